import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from journalmap.cluster import (
    ClusterConfig,
    Partition,
    cluster,
    effective_resolution,
    louvain,
    merge_small_clusters,
    modularity,
    relabel_by_size,
    vos_cluster,
    vos_objective,
)
from journalmap.errors import DataError
from journalmap.simmat import SimilarityMatrix, component_labels

from conftest import cliques, planted, sim_from_dense


def set_partitions(n):
    """All partitions of range(n) as restricted growth strings."""
    a = [0] * n

    def rec(k, m):
        if k == n:
            yield np.array(a)
            return
        for c in range(m + 1):
            a[k] = c
            yield from rec(k + 1, max(m, c + 1))

    if n == 0:
        return
    a[0] = 0
    yield from rec(1, 1)


def modularity_oracle(w, labels, gamma=1.0):
    """Textbook double sum over ordered pairs with the strength product."""
    k = w.sum(axis=1)
    two_m = k.sum()
    q = 0.0
    n = len(labels)
    for i in range(n):
        for j in range(n):
            if labels[i] == labels[j]:
                q += w[i, j] - gamma * k[i] * k[j] / two_m
    return q / two_m


def vos_oracle(w, labels, res):
    n = len(labels)
    return sum(w[i, j] - res for i in range(n) for j in range(i + 1, n) if labels[i] == labels[j])


def test_set_partitions_counts_bell_numbers():
    assert [sum(1 for _ in set_partitions(n)) for n in range(1, 8)] == [1, 2, 5, 15, 52, 203, 877]


def test_two_disjoint_cliques_natural_partition_is_half():
    sim = cliques(10, 2)
    labels = np.repeat([0, 1], 10)
    assert modularity(sim, labels) == 0.5
    part = louvain(sim)
    assert part.n_communities == 2 and part.q == 0.5


@given(st.integers(3, 7), st.integers(0, 2**32 - 1), st.floats(0.2, 2.0))
def test_modularity_matches_textbook_double_sum(n, seed, gamma):
    rng = np.random.default_rng(seed)
    w = np.triu(rng.integers(0, 4, (n, n)).astype(float), 1)
    if w.sum() == 0:
        w[0, 1] = 1
    w = w + w.T
    sim = sim_from_dense(w)
    labels = rng.integers(0, 3, n)
    assert modularity(sim, labels, gamma) == pytest.approx(modularity_oracle(w, labels, gamma), abs=1e-12)
    res = float(rng.uniform(0, 2))
    assert vos_objective(sim, labels, res) == pytest.approx(vos_oracle(w, labels, res), abs=1e-12)


def test_modularity_of_edgeless_network_is_zero():
    sim = SimilarityMatrix.from_entries(3, [], [], [])
    assert modularity(sim, [0, 1, 2]) == 0.0


def test_modularity_rejects_bad_assignment():
    sim = cliques(3, 1)
    with pytest.raises(DataError):
        modularity(sim, [0, 1])
    with pytest.raises(DataError):
        modularity(sim, [0, -1, 0])


def random_weighted(n, seed, density=0.6):
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < density, 1)
    w = np.where(mask, rng.integers(1, 6, (n, n)), 0).astype(float)
    return w + w.T


@pytest.mark.parametrize("seed", range(12))
def test_louvain_against_exhaustive_optimum(seed):
    n = 8
    w = random_weighted(n, seed)
    sim = sim_from_dense(w)
    best = max(modularity(sim, p) for p in set_partitions(n))
    part = louvain(sim, ClusterConfig(seed=seed))
    assert part.q <= best + 1e-12
    # a greedy heuristic, but on 8 nodes it should land within a few percent
    assert part.q >= best - 0.05
    assert part.q == pytest.approx(modularity(sim, part.assignment), abs=1e-12)


@pytest.mark.parametrize("gamma", [0.05, 0.3, 1.0])
@pytest.mark.parametrize("seed", range(5))
def test_vos_against_exhaustive_optimum(seed, gamma):
    n = 7
    w = random_weighted(n, 100 + seed) / 5
    sim = sim_from_dense(w)
    cfg = ClusterConfig(objective="vos", resolution=gamma, scale_resolution=False, seed=seed)
    best = max(vos_objective(sim, p, gamma) for p in set_partitions(n))
    part = vos_cluster(sim, cfg)
    assert part.objective <= best + 1e-12
    assert part.objective >= best - 0.1 * abs(best) - 1e-9
    assert part.objective == pytest.approx(vos_objective(sim, part.assignment, gamma), abs=1e-12)


def test_planted_two_blocks_recovered_in_most_seeds():
    hits = 0
    for seed in range(10):
        sim, labels = planted([50, 50], 0.3, 0.02, seed)
        part = louvain(sim, ClusterConfig(seed=seed))
        same = (part.assignment[:, None] == part.assignment[None, :]) == (labels[:, None] == labels[None, :])
        hits += bool(same.all())
    assert hits >= 9


def test_history_is_non_decreasing_and_ends_at_q():
    sim, _ = planted([20, 20, 20], 0.4, 0.05, 1)
    part = louvain(sim)
    h = np.array(part.history)
    assert np.all(np.diff(h) >= -1e-12)
    assert h[-1] == pytest.approx(part.q, abs=1e-9)
    assert part.converged and part.n_levels >= 1


def test_vos_resolution_extremes():
    sim = cliques(5, 4, bridge=True)
    tiny = vos_cluster(sim, ClusterConfig(objective="vos", resolution=1e-6))
    assert tiny.n_communities == 1
    # each link weighs 1: any pair costs more than it gains once gamma > 1
    big = vos_cluster(sim, ClusterConfig(objective="vos", resolution=1.5, scale_resolution=False))
    assert big.n_communities == sim.n
    mid = vos_cluster(sim, ClusterConfig(objective="vos", resolution=0.5))
    assert sorted(mid.sizes().tolist()) == [5, 5, 5, 5]


def test_vos_small_gamma_gives_connected_components():
    sim = cliques(3, 3)
    part = vos_cluster(sim, ClusterConfig(objective="vos", resolution=1e-9))
    labels = component_labels(sim)
    assert all((part.assignment[i] == part.assignment[j]) == (labels[i] == labels[j]) for i, j in itertools.combinations(range(9), 2))


def test_effective_resolution_scales_by_mean_weight():
    sim = sim_from_dense([[0, 0.2, 0.4], [0.2, 0, 0], [0.4, 0, 0]])
    assert effective_resolution(sim, ClusterConfig(objective="vos", resolution=2.0)) == pytest.approx(0.6)
    assert effective_resolution(sim, ClusterConfig(objective="vos", resolution=2.0, scale_resolution=False)) == 2.0


def test_higher_gamma_never_gives_fewer_vos_clusters_on_cliques():
    sim = cliques(4, 5, bridge=True)
    counts = [vos_cluster(sim, ClusterConfig(objective="vos", resolution=g)).n_communities for g in (0.01, 0.3, 1.2, 3.0)]
    assert counts == sorted(counts)


def test_single_edge_and_single_node():
    part = louvain(sim_from_dense([[0, 1], [1, 0]]))
    assert part.n_communities == 1
    lone = louvain(SimilarityMatrix.from_entries(1, [], [], []))
    assert lone.assignment.tolist() == [0]
    with pytest.raises(DataError):
        louvain(SimilarityMatrix.from_entries(0, [], [], []))


def test_deterministic_for_a_seed():
    sim, _ = planted([30, 30, 30], 0.2, 0.05, 4)
    a = louvain(sim, ClusterConfig(seed=3))
    b = louvain(sim, ClusterConfig(seed=3))
    assert np.array_equal(a.assignment, b.assignment) and a.q == b.q


def test_relabel_by_size_orders_by_size_then_first_member():
    part = Partition(np.array([2, 0, 0, 1, 1, 3]), np.arange(6), 0.0)
    assert relabel_by_size(part).assignment.tolist() == [2, 0, 0, 1, 1, 3]
    part = Partition(np.array([5, 5, 1, 1, 1, 0]), np.arange(6), 0.0)
    assert relabel_by_size(part).assignment.tolist() == [1, 1, 0, 0, 0, 2]


def test_merge_small_clusters_folds_into_best_neighbour():
    w = np.zeros((7, 7))
    for a, b in itertools.combinations(range(3), 2):
        w[a, b] = 1
    for a, b in itertools.combinations(range(3, 6), 2):
        w[a, b] = 1
    w[6, 0] = 0.2
    w[6, 3] = 0.5
    sim = sim_from_dense(w + w.T)
    part = Partition(np.array([0, 0, 0, 1, 1, 1, 2]), np.arange(7), 0.0)
    merged = merge_small_clusters(sim, part, 2)
    assert merged.assignment.tolist() == [0, 0, 0, 1, 1, 1, 1]
    assert merged.q == pytest.approx(modularity(sim, merged.assignment))


def test_merge_leaves_isolated_small_cluster():
    sim = sim_from_dense([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    part = Partition(np.array([0, 0, 1]), np.arange(3), 0.0)
    assert merge_small_clusters(sim, part, 2).assignment.tolist() == [0, 0, 1]


def test_min_cluster_size_config():
    sim, _ = planted([15, 15, 3], 0.5, 0.03, 2)
    part = louvain(sim, ClusterConfig(min_cluster_size=5))
    connected = component_labels(sim).max() == 0
    if connected:
        assert part.sizes().min() >= 5


@pytest.mark.parametrize(
    "kwargs",
    [dict(objective="x"), dict(resolution=0), dict(min_cluster_size=0), dict(max_passes=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(DataError):
        ClusterConfig(**kwargs)


def test_dispatch_and_objective_guards():
    sim = cliques(3, 2)
    assert cluster(sim, ClusterConfig()).n_communities == 2
    assert cluster(sim, ClusterConfig(objective="vos", resolution=0.5)).n_communities == 2
    with pytest.raises(DataError):
        louvain(sim, ClusterConfig(objective="vos"))
    with pytest.raises(DataError):
        vos_cluster(sim, ClusterConfig())


def test_max_passes_warning():
    sim, _ = planted([30, 30], 0.3, 0.05, 0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        part = louvain(sim, ClusterConfig(max_passes=1))
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)
    assert part.q == pytest.approx(modularity(sim, part.assignment), abs=1e-12)
