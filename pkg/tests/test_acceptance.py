"""End-to-end acceptance gate.

Each test prints one ``[criterion N] PASS/FAIL - detail`` line so the
suite doubles as a human-readable verification report; the assertions
make the same verdicts binding.
"""
import math
import time
from itertools import repeat

import numpy as np
import pytest

import lossnet as ln
from conftest import loop_spec, random_acceptance, random_spec

GOLDEN_T = (math.sqrt(5.0) - 1.0) / 2.0
GOLDEN_X = np.array([[GOLDEN_T, 1.0 - GOLDEN_T],
                     [1.0 - GOLDEN_T, GOLDEN_T]])


@pytest.fixture
def announce(capsys):
    def _announce(criterion: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            verdict = "PASS" if ok else "FAIL"
            print(f"[criterion {criterion}] {verdict} - {detail}")
    return _announce


def test_saturated_two_node_equilibrium_both_methods(announce):
    spec = ln.golden_ratio()
    start = time.perf_counter()
    worst = 0.0
    for method in ("ode", "phi"):
        point = ln.solve_equilibrium(spec, method=method, tol=1e-10)
        worst = max(worst,
                    float(np.max(np.abs(point.t - GOLDEN_T))),
                    float(np.max(np.abs(point.x - GOLDEN_X))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 1.0
    announce(1, ok, f"max deviation {worst:.2e}, {elapsed:.2f}s")
    assert worst <= 1e-8
    assert elapsed < 1.0


def test_two_node_sweep_hits_every_regime(announce):
    rng = np.random.default_rng(0)
    seen = {1: 0, 2: 0, 3: 0, 4: 0}
    worst = 0.0
    for _ in range(100):
        load1, load2 = rng.uniform(0.2, 2.5, size=2)
        cap1, cap2 = rng.uniform(0.3, 3.5, size=2)
        sol = ln.two_node_closed_form(load1, load2, cap1, cap2)
        seen[sol.case] += 1
        spec = ln.two_node_spec(load1, load2, cap1, cap2)
        residual = float(np.max(np.abs(
            sol.x - ln.equilibrium_map(spec, sol.x))))
        worst = max(worst, residual)
    ok = worst <= 1e-10 and all(seen.values())
    announce(2, ok, f"cases {dict(seen)}, worst map residual {worst:.2e}")
    assert worst <= 1e-10
    assert all(seen.values()), f"sweep missed a regime: {seen}"


def test_acceptance_occupancy_against_path_sampling(announce):
    rng = np.random.default_rng(7)
    worst_z = 0.0
    for _ in range(100):
        spec = random_spec(rng)
        t = random_acceptance(rng, spec.n_nodes)
        exact = ln.occupancy_from_acceptance(spec, t)
        est, se = ln.occupancy_from_acceptance_mc(
            spec, t, n_paths=100_000, seed=rng)
        gap = np.abs(est - exact)
        assert np.all(gap <= 3.0 * se + 1e-9)
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(se > 0, gap / np.where(se > 0, se, 1.0), 0.0)
        worst_z = max(worst_z, float(z.max()))

    worst_loop = 0.0
    for _ in range(20):
        continuation = rng.uniform(0.3, 0.9)
        load = rng.uniform(0.3, 2.0)
        gamma = 1.0
        mu = gamma * (1.0 - continuation) / continuation
        spec = loop_spec(lam=load * (gamma + mu), mu=mu, gamma=gamma,
                         caps=(50.0, 50.0))
        t = random_acceptance(rng, 2)
        x = ln.occupancy_from_acceptance(spec, t)
        closed = ln.route_occupancy(load, continuation, t, cyclic=True)
        worst_loop = max(worst_loop, float(np.max(np.abs(x[0] - closed))))
    ok = worst_z <= 3.0 and worst_loop <= 1e-10
    announce(3, ok,
             f"worst sampling z {worst_z:.2f}, loop closed-form gap "
             f"{worst_loop:.2e}")
    assert worst_loop <= 1e-10


def test_multistart_probes_agree(announce):
    start = time.perf_counter()
    golden = ln.uniqueness_probe(ln.golden_ratio(), n_starts=20, tol=1e-6,
                                 seed=0)
    branching = ln.uniqueness_probe(ln.branching_network(), n_starts=20,
                                    tol=1e-6, seed=0)
    elapsed = time.perf_counter() - start
    spread = max(golden.max_spread, branching.max_spread)
    ok = (golden.verdict == "pass" and branching.verdict == "pass"
          and elapsed < 30.0)
    announce(4, ok, f"max spread {spread:.2e} over 20 starts on both "
                    f"networks, {elapsed:.1f}s")
    assert golden.verdict == "pass", golden
    assert branching.verdict == "pass", branching
    assert elapsed < 30.0


def test_simulation_approaches_fluid_path_with_scale(announce):
    start = time.perf_counter()
    study = ln.scaling_study(ln.golden_ratio(), scales=(10, 100, 1000),
                             horizon=10.0, n_replicas=20, seed=0)
    elapsed = time.perf_counter() - start
    dists = study.sup_distance
    ok = (study.monotone and dists[-1] <= 0.05
          and study.acceptance_gap <= 0.02 and elapsed < 120.0)
    announce(5, ok,
             f"sup distances {np.round(dists, 4).tolist()}, acceptance gap "
             f"{study.acceptance_gap:.4f}, {elapsed:.1f}s")
    assert study.monotone, dists
    assert dists[-1] <= 0.05
    assert study.acceptance_gap <= 0.02
    assert elapsed < 120.0


def test_erlang_simulation_matches_generator_law(announce):
    spec = ln.erlang_single()
    states, q = ln.build_generator(spec, scale=1)
    pi = ln.stationary(q)
    assert np.max(np.abs(pi - np.array([8.0, 4.0, 1.0]) / 13.0)) <= 1e-12
    exact_occ = sum(p * s[0] for p, s in zip(pi, states))
    exact_block = pi[-1]

    trajs = ln.replicate(spec, scale=1, horizon=2000.0, n_replicas=20,
                         seed=11, warmup=100.0)
    occ = np.array([ln.occupancy_time_average(t, window=(100.0, 2000.0))[0, 0]
                    for t in trajs])
    block = np.array([1.0 - ln.acceptance_rates(t)[0] for t in trajs])
    z_occ = abs(occ.mean() - exact_occ) / (occ.std(ddof=1) / np.sqrt(20))
    z_block = abs(block.mean() - exact_block) / (block.std(ddof=1) / np.sqrt(20))
    ok = z_occ <= 3.0 and z_block <= 3.0
    announce(6, ok, f"occupancy z {z_occ:.2f}, blocking z {z_block:.2f} "
                    f"against the exact stationary law")
    assert z_occ <= 3.0
    assert z_block <= 3.0


def test_divergence_property_suite(announce):
    start = time.perf_counter()
    report = ln.selfcheck(seed=0, n_pairs=10_000, n_splits=1_000)
    forward = ln.sequence_divergence_series(repeat(0.5), repeat(0.9))
    swapped = ln.sequence_divergence_series(repeat(0.9), repeat(0.5))
    elapsed = time.perf_counter() - start
    limit = 8.0 * math.log(1.8)
    closed_gap = max(abs(forward.value - limit), abs(swapped.value - limit))
    ok = report["passed"] and closed_gap <= 1e-9 and elapsed < 10.0
    announce(7, ok, f"property suite passed={report['passed']}, geometric "
                    f"closed-form gap {closed_gap:.1e}, {elapsed:.1f}s")
    assert report["passed"], report
    assert closed_gap <= 1e-9
    assert elapsed < 10.0


def test_uniqueness_pairing_positive_on_random_pairs(announce):
    rng = np.random.default_rng(808)
    min_positive = np.inf
    n_distinct = 0
    for k in range(1000):
        if k % 10 == 0:
            spec = random_spec(rng)
        t = random_acceptance(rng, spec.n_nodes)
        if k % 100 == 99:
            value = ln.monotonicity_functional(spec, t, t)
            assert value == 0.0
            continue
        tprime = random_acceptance(rng, spec.n_nodes)
        if np.max(np.abs(t - tprime)) <= 1e-10:
            continue
        value = ln.monotonicity_functional(spec, t, tprime)
        assert value > 0.0, (value, t, tprime)
        min_positive = min(min_positive, value)
        n_distinct += 1
    ok = n_distinct >= 900
    announce(8, ok, f"{n_distinct} distinct pairs all positive, smallest "
                    f"value {min_positive:.2e}; identical pairs give 0")
    assert n_distinct >= 900
