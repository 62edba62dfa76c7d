import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

seeds = st.integers(min_value=0, max_value=2**32 - 1)

# worked examples
FIVE_LEAF_NEWICK = "((1:8,2:8):12,(3:10,(4:5,5:5):5):10);"
FIVE_LEAF_VECTOR = (16, 40, 40, 40, 40, 40, 40, 20, 20, 10)
W1 = (0.4, 0.8, 2, 0.8, 2, 2)
W2_PERM = (0.8, 0.8, 2, 0.4, 2, 2)
W2_SEGMENT = (2, 2, 2, 0.8, 0.8, 0.4)
NEIGHBOUR_T1 = "((A,B),C,(D,E));"
NEIGHBOUR_T2 = "((A,B),E,(C,D));"


def random_merge_history(rng, n):
    """Random agglomeration of leaves 1..n: list of (left, right, height)."""
    clusters = [(frozenset([k]), k) for k in range(1, n + 1)]
    height = 0.0
    out = []
    while len(clusters) > 1:
        i, j = sorted(rng.choice(len(clusters), 2, replace=False))
        height += rng.uniform(0.05, 1.0)
        a, b = clusters[i], clusters[j]
        out.append((a, b, height))
        clusters.pop(j)
        clusters.pop(i)
        clusters.append((a[0] | b[0], (a, b, height)))
    return out


def random_ultrametric(rng, n):
    """Cophenetic vector of a random equidistant binary tree, built without palmtree."""
    w = {}
    for a, b, h in random_merge_history(rng, n):
        for i in a[0]:
            for j in b[0]:
                w[min(i, j), max(i, j)] = 2 * h
    return np.array([w[i, j] for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def random_newick(rng, n, equidistant=False):
    """Random binary rooted tree on leaves 1..n as a Newick string."""
    nodes = [(str(k), 0.0) for k in range(1, n + 1)]
    height = 0.0
    while len(nodes) > 1:
        i, j = sorted(rng.choice(len(nodes), 2, replace=False))
        height += rng.uniform(0.05, 1.0)
        (sa, ha), (sb, hb) = nodes[i], nodes[j]
        if equidistant:
            la, lb = height - ha, height - hb
        else:
            la, lb = rng.uniform(0.05, 2.0), rng.uniform(0.05, 2.0)
        nodes.pop(j)
        nodes.pop(i)
        nodes.append((f"({sa}:{la!r},{sb}:{lb!r})", height))
    return nodes[0][0] + ";"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) == "call":
                lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
