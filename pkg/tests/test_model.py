import copy
import json

import numpy as np
import pytest

import lossnet as ln
from conftest import chain_spec, loop_spec, random_spec, single_node_spec

GOLDEN_DOC = {
    "nodes": [{"id": "n1", "capacity": 1.0}, {"id": "n2", "capacity": 1.0}],
    "classes": [
        {"id": "fwd", "lambda": 1.0, "mu": 0.0, "gamma": 1.0,
         "entry": {"n1": 1.0},
         "routing": {"n1": {"n2": 1.0}, "n2": {"exit": 1.0}}},
        {"id": "rev", "lambda": 1.0, "mu": 0.0, "gamma": 1.0,
         "entry": {"n2": 1.0},
         "routing": {"n2": {"n1": 1.0}, "n1": {"exit": 1.0}}},
    ],
}


def test_golden_ratio_spec_is_valid():
    assert ln.validate(ln.golden_ratio()) == []


def test_presets_are_valid():
    for name, builder in ln.PRESETS.items():
        assert ln.validate(builder()) == [], name


def test_row_not_stochastic_is_flagged():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["classes"][0]["routing"]["n1"] = {"n2": 0.9}
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("sums to 0.9" in msg for msg in bad)


def test_nonzero_diagonal_is_flagged():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["classes"][0]["routing"]["n1"] = {"n1": 0.3, "n2": 0.7}
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("diagonal" in msg for msg in bad)


def test_entry_must_sum_to_one():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["classes"][0]["entry"] = {"n1": 0.5}
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("entry" in msg for msg in bad)


def test_zero_departure_rate_rejected():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["classes"][0]["mu"] = 0.0
    doc["classes"][0]["gamma"] = 0.0
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("move rate + service rate" in msg for msg in bad)


def test_nonpositive_capacity_rejected():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["nodes"][0]["capacity"] = 0.0
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("capacity" in msg for msg in bad)


def test_unreachable_node_rejected():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["nodes"].append({"id": "n3", "capacity": 1.0})
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("unreachable" in msg for msg in bad)


def test_require_valid_raises_with_all_messages():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["nodes"][0]["capacity"] = -1.0
    doc["classes"][0]["entry"] = {"n1": 0.5}
    with pytest.raises(ValueError) as err:
        ln.require_valid(ln.spec_from_dict(doc))
    assert "capacity" in str(err.value) and "entry" in str(err.value)


def test_derived_parameters():
    d = ln.derived(single_node_spec(lam=1.0, mu=0.0, gamma=1.0))
    assert d.load[0] == 1.0 and d.continuation[0] == 1.0
    d = ln.derived(single_node_spec(lam=2.0, mu=1.0, gamma=1.0))
    assert d.load[0] == 1.0 and d.continuation[0] == 0.5
    d = ln.derived(single_node_spec(lam=1.0, mu=2.0, gamma=0.0))
    assert d.load[0] == 0.5 and d.continuation[0] == 0.0


def test_reachable_sets():
    assert ln.reachable_set(chain_spec(), "c") == {"a", "b"}
    assert ln.reachable_set(single_node_spec(), "c") == {"a"}
    assert ln.reachable_set(loop_spec(), "c") == {"a", "b"}


def test_reachability_excludes_downstream_only_nodes():
    spec = ln.branching_network()
    assert ln.reachable_set(spec, "relay") == {"n1", "n2", "n3"}
    assert ln.reachable_set(spec, "branch") == {"n1", "n3", "n4"}


def test_union_of_reachable_sets_covers_nodes(rng):
    for _ in range(20):
        spec = random_spec(rng)
        covered = set()
        for cid in spec.class_ids:
            covered |= ln.reachable_set(spec, cid)
        assert covered == set(spec.node_ids)


def test_round_trip_through_dict():
    spec = ln.spec_from_dict(GOLDEN_DOC)
    again = ln.spec_from_dict(ln.spec_to_dict(spec))
    assert ln.spec_to_dict(spec) == ln.spec_to_dict(again)
    np.testing.assert_array_equal(spec.routing, again.routing)
    np.testing.assert_array_equal(spec.entry, again.entry)


def test_round_trip_random(rng):
    for _ in range(10):
        spec = random_spec(rng)
        again = ln.spec_from_dict(ln.spec_to_dict(spec))
        np.testing.assert_allclose(spec.routing, again.routing, rtol=0, atol=0)
        np.testing.assert_allclose(spec.exit_prob, again.exit_prob,
                                   rtol=0, atol=0)


def test_save_and_load(tmp_path):
    path = tmp_path / "net.json"
    ln.save_spec(ln.golden_ratio(), path)
    spec = ln.load_spec(path)
    assert ln.spec_to_dict(spec) == ln.spec_to_dict(ln.golden_ratio())


def test_absent_routing_row_means_exit():
    doc = copy.deepcopy(GOLDEN_DOC)
    del doc["classes"][0]["routing"]["n2"]
    spec = ln.spec_from_dict(doc)
    r = spec.class_index("fwd")
    assert spec.exit_prob[r, spec.node_index("n2")] == 1.0
    assert ln.validate(spec) == []


def test_missing_mass_is_not_sent_to_exit():
    doc = copy.deepcopy(GOLDEN_DOC)
    doc["classes"][0]["routing"]["n2"] = {}
    bad = ln.validate(ln.spec_from_dict(doc))
    assert any("missing mass" in msg for msg in bad)


def test_structural_errors_raise_format_error():
    with pytest.raises(ln.SpecFormatError):
        ln.spec_from_dict({"nodes": []})
    with pytest.raises(ln.SpecFormatError):
        ln.spec_from_dict({"nodes": [{"id": "a", "capacity": 1.0}],
                           "classes": [{"id": "c", "lambda": 1.0, "mu": 1.0,
                                        "gamma": 0.0, "entry": {"zzz": 1.0},
                                        "routing": {}}]})


def test_load_rejects_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ln.SpecFormatError):
        ln.load_spec(path)


def test_bundled_specs_match_presets():
    from lossnet.cli import BUNDLED_SPECS, bundled_spec
    builders = {"golden-ratio": ln.golden_ratio, "erlang": ln.erlang_single,
                "branching": ln.branching_network}
    assert set(BUNDLED_SPECS) == set(builders)
    for name, builder in builders.items():
        assert ln.spec_to_dict(bundled_spec(name)) == \
            ln.spec_to_dict(builder()), name


def test_spec_arrays_are_read_only():
    spec = ln.golden_ratio()
    with pytest.raises(ValueError):
        spec.capacity[0] = 5.0
    with pytest.raises(ValueError):
        spec.routing[0, 0, 1] = 0.5
