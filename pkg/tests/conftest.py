"""Shared builders for the test suite."""
import numpy as np
import pytest

from lossnet import spec_from_dict


def single_node_spec(lam=1.0, mu=1.0, gamma=0.0, cap=1.0):
    """One node, one class, route straight to exit."""
    return spec_from_dict({
        "nodes": [{"id": "a", "capacity": float(cap)}],
        "classes": [{"id": "c", "lambda": float(lam), "mu": float(mu),
                     "gamma": float(gamma), "entry": {"a": 1.0},
                     "routing": {"a": {"exit": 1.0}}}]})


def chain_spec(lam=2.0, mu=1.0, gamma=1.0, caps=(10.0, 10.0)):
    """Two-node deterministic route a -> b -> exit."""
    return spec_from_dict({
        "nodes": [{"id": "a", "capacity": float(caps[0])},
                  {"id": "b", "capacity": float(caps[1])}],
        "classes": [{"id": "c", "lambda": float(lam), "mu": float(mu),
                     "gamma": float(gamma), "entry": {"a": 1.0},
                     "routing": {"a": {"b": 1.0}, "b": {"exit": 1.0}}}]})


def loop_spec(lam=2.0, mu=1.0, gamma=1.0, caps=(10.0, 10.0)):
    """Two-node periodic route a -> b -> a -> ... entered at a."""
    return spec_from_dict({
        "nodes": [{"id": "a", "capacity": float(caps[0])},
                  {"id": "b", "capacity": float(caps[1])}],
        "classes": [{"id": "c", "lambda": float(lam), "mu": float(mu),
                     "gamma": float(gamma), "entry": {"a": 1.0},
                     "routing": {"a": {"b": 1.0}, "b": {"a": 1.0}}}]})


def random_spec(rng, n_nodes=None, n_classes=None):
    """A random valid network whose continuation probabilities stay
    strictly below 1 (mu bounded away from 0), so every acceptance
    vector in (0, 1]^n admits an occupancy representation."""
    n = int(rng.integers(2, 5)) if n_nodes is None else n_nodes
    m = int(rng.integers(1, 3)) if n_classes is None else n_classes
    nodes = [{"id": f"n{i}", "capacity": float(rng.uniform(0.5, 3.0))}
             for i in range(n)]
    classes = []
    for r in range(m):
        k = int(rng.integers(1, n + 1))
        support = rng.choice(n, size=k, replace=False)
        weights = rng.dirichlet(np.ones(k))
        entry = {f"n{i}": float(w) for i, w in zip(support, weights)}
        routing = {}
        for i in range(n):
            others = [j for j in range(n) if j != i]
            w = rng.dirichlet(np.ones(len(others) + 1))
            # keep a floor of exit mass so the routing chain is leaky
            row = {"exit": float(0.05 + 0.95 * w[-1])}
            for j, p in zip(others, 0.95 * w[:-1]):
                if p > 0:
                    row[f"n{j}"] = float(p)
            routing[f"n{i}"] = row
        classes.append({"id": f"r{r}",
                        "lambda": float(rng.uniform(0.2, 3.0)),
                        "mu": float(rng.uniform(0.1, 2.0)),
                        "gamma": float(rng.uniform(0.2, 2.0)),
                        "entry": entry, "routing": routing})
    return spec_from_dict({"nodes": nodes, "classes": classes})


def random_acceptance(rng, n, low=0.1):
    return rng.uniform(low, 1.0, size=n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
