"""Built-in example networks, also bundled as JSON under specs/.

Three sizes: a symmetric two-node crossing network whose equilibrium
acceptance factor is the inverse golden ratio, a single node with no
routing (the classic blocked-calls-lost benchmark), and a four-node
network mixing a deterministic relay route with a branching route.
"""

from __future__ import annotations

from .model import NetworkSpec, spec_from_dict


def golden_ratio() -> NetworkSpec:
    """Two crossing two-hop routes, unit loads and capacities.

    Both nodes saturate and the equilibrium acceptance factor at each node
    is (sqrt(5) - 1) / 2, the inverse golden ratio.
    """
    return spec_from_dict({
        "nodes": [{"id": "n1", "capacity": 1.0}, {"id": "n2", "capacity": 1.0}],
        "classes": [
            {"id": "fwd", "lambda": 1.0, "mu": 0.0, "gamma": 1.0,
             "entry": {"n1": 1.0},
             "routing": {"n1": {"n2": 1.0}, "n2": {"exit": 1.0}}},
            {"id": "rev", "lambda": 1.0, "mu": 0.0, "gamma": 1.0,
             "entry": {"n2": 1.0},
             "routing": {"n2": {"n1": 1.0}, "n1": {"exit": 1.0}}},
        ],
    })


def erlang_single() -> NetworkSpec:
    """One node, capacity 2, one class that never transfers.

    Offered load 0.5; the exact stationary occupancy law at scale 1 is
    (8, 4, 1)/13, a textbook small blocking system.
    """
    return spec_from_dict({
        "nodes": [{"id": "n1", "capacity": 2.0}],
        "classes": [
            {"id": "calls", "lambda": 1.0, "mu": 1.0, "gamma": 1.0,
             "entry": {"n1": 1.0},
             "routing": {"n1": {"exit": 1.0}}},
        ],
    })


def branching_network() -> NetworkSpec:
    """Four nodes: a three-hop relay route crossed by a branching route.

    The relay class walks n1 -> n2 -> n3 and leaves; the branching class
    enters at n4 and moves to n1 or n3 with equal probability before
    leaving.  Nodes n1 and n3 saturate at equilibrium, whose acceptance
    factors are exactly t = (5/6, 1, 15/16, 1).
    """
    return spec_from_dict({
        "nodes": [{"id": "n1", "capacity": 5.0}, {"id": "n2", "capacity": 5.0},
                  {"id": "n3", "capacity": 5.0}, {"id": "n4", "capacity": 5.0}],
        "classes": [
            {"id": "relay", "lambda": 4.0, "mu": 0.0, "gamma": 1.0,
             "entry": {"n1": 1.0},
             "routing": {"n1": {"n2": 1.0}, "n2": {"n3": 1.0},
                         "n3": {"exit": 1.0}}},
            {"id": "branch", "lambda": 4.0, "mu": 0.0, "gamma": 1.0,
             "entry": {"n4": 1.0},
             "routing": {"n4": {"n1": 0.5, "n3": 0.5}, "n1": {"exit": 1.0},
                         "n3": {"exit": 1.0}}},
        ],
    })


PRESETS = {
    "golden-ratio": golden_ratio,
    "erlang": erlang_single,
    "branching": branching_network,
}
