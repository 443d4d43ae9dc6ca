import itertools
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from journalmap.corpus import CitationMatrix
from journalmap.simmat import SimilarityMatrix

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def cliques(k, m, bridge=False, weight=1.0, bridge_weight=None):
    """``m`` cliques of ``k`` nodes, optionally chained by single bridge edges."""
    i, j = [], []
    for c in range(m):
        for a, b in itertools.combinations(range(k), 2):
            i.append(c * k + a)
            j.append(c * k + b)
    if bridge:
        for c in range(m - 1):
            i.append(c * k)
            j.append((c + 1) * k)
    w = np.full(len(i), weight)
    if bridge and bridge_weight is not None:
        w[len(i) - (m - 1) :] = bridge_weight
    return SimilarityMatrix.from_entries(k * m, np.array(i), np.array(j), w)


def sim_from_dense(w, kind="cosine"):
    w = np.asarray(w, dtype=np.float64)
    i, j = np.nonzero(np.triu(w, 1))
    return SimilarityMatrix.from_entries(w.shape[0], i, j, w[i, j], kind=kind)


def random_citation_matrix(rng, n, density=0.2, max_count=20):
    mask = rng.random((n, n)) < density
    counts = rng.integers(1, max_count + 1, size=(n, n))
    r, c = np.nonzero(mask)
    return CitationMatrix.from_triples(n, r, c, counts[r, c])


def planted(sizes, p_in, p_out, seed):
    """Random graph with dense blocks; unit weights."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = labels.size
    iu = np.triu_indices(n, 1)
    same = labels[iu[0]] == labels[iu[1]]
    keep = rng.random(iu[0].size) < np.where(same, p_in, p_out)
    sim = SimilarityMatrix.from_entries(n, iu[0][keep], iu[1][keep], np.ones(keep.sum()))
    return sim, labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS:
        terminalreporter.write_line(line)
