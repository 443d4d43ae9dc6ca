import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from journalmap.errors import DataError
from journalmap.layout import (
    Layout,
    LayoutConfig,
    center_layout,
    kamada_kawai,
    kk_stress,
    layout,
    map_frame,
    mean_linked_distance,
    mean_pair_distance,
    read_layout,
    target_distances,
    vos_layout,
    vos_objective_value,
    write_layout,
)
from journalmap.simmat import SimilarityMatrix

from conftest import cliques, planted, sim_from_dense

KK = LayoutConfig(method="kamada_kawai", tolerance=1e-9)


def dist(c, i, j):
    return float(np.linalg.norm(c[i] - c[j]))


def test_two_nodes_sit_at_unit_distance():
    lay = vos_layout(sim_from_dense([[0, 0.3], [0.3, 0]]))
    assert dist(lay.coords, 0, 1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("bridge_weight", [0.1, 1.0])
def test_bridged_cliques_separate(seed, bridge_weight):
    sim = cliques(4, 2, bridge=True, bridge_weight=bridge_weight)
    lay = vos_layout(sim, LayoutConfig(seed=seed))
    c = lay.coords
    intra = np.mean([dist(c, i, j) for g in (range(4), range(4, 8)) for i in g for j in g if i < j])
    inter = np.mean([dist(c, i, j) for i in range(4) for j in range(4, 8)])
    assert intra < inter


def test_star_hub_leaf_distances_equal():
    sim = SimilarityMatrix.from_entries(5, [0, 0, 0, 0], [1, 2, 3, 4], np.ones(4))
    lay = vos_layout(sim, LayoutConfig(tolerance=1e-12, max_iterations=5000))
    d = [dist(lay.coords, 0, k) for k in range(1, 5)]
    assert max(d) - min(d) <= 1e-3


@pytest.mark.parametrize("mean_over", ["all", "linked"])
@pytest.mark.parametrize("seed", range(5))
def test_vos_objective_non_increasing_and_constraint_met(seed, mean_over):
    sim, _ = planted([25, 25, 25], 0.3, 0.03, seed)
    lay = vos_layout(sim, LayoutConfig(seed=seed, mean_over=mean_over))
    h = np.array(lay.history)
    assert np.all(np.diff(h) <= 1e-12 * h[:-1])
    mean = mean_pair_distance(lay.coords) if mean_over == "all" else mean_linked_distance(sim, lay)
    assert mean == pytest.approx(1.0, abs=1e-12)
    assert lay.x.mean() == pytest.approx(0, abs=1e-12) and lay.y.mean() == pytest.approx(0, abs=1e-12)
    # at unit mean distance the ratio equals the weighted sum of squares
    assert vos_objective_value(sim, lay.coords) == pytest.approx(lay.objective_value, rel=1e-9)


def test_vos_layout_is_deterministic():
    sim, _ = planted([20, 20], 0.3, 0.05, 2)
    a = vos_layout(sim, LayoutConfig(seed=5))
    b = vos_layout(sim, LayoutConfig(seed=5))
    assert np.array_equal(a.coords, b.coords)


def test_vos_layout_rejects_bad_input():
    with pytest.raises(DataError, match="disconnected"):
        vos_layout(cliques(3, 2))
    with pytest.raises(DataError, match="at least 2"):
        vos_layout(SimilarityMatrix.from_entries(1, [], [], []))


def _angle_at_middle(c):
    u, v = c[0] - c[1], c[2] - c[1]
    cos = float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.pi - math.acos(max(-1.0, min(1.0, cos)))


@pytest.mark.parametrize("seed", range(3))
def test_kk_path_is_straight(seed):
    sim = SimilarityMatrix.from_entries(3, [0, 1], [1, 2], [1.0, 1.0])
    lay = kamada_kawai(sim, LayoutConfig(method="kamada_kawai", tolerance=1e-9, seed=seed))
    assert _angle_at_middle(lay.coords) < 1e-2
    assert dist(lay.coords, 0, 2) == pytest.approx(2.0, rel=1e-6)
    assert dist(lay.coords, 0, 1) == pytest.approx(1.0, rel=1e-6)


def test_kk_triangle_is_equilateral():
    lay = kamada_kawai(cliques(3, 1), KK)
    d = [dist(lay.coords, 0, 1), dist(lay.coords, 1, 2), dist(lay.coords, 0, 2)]
    assert max(d) - min(d) <= 1e-3


def test_kk_two_nodes_hit_target_exactly():
    lay = kamada_kawai(sim_from_dense([[0, 4.0], [4.0, 0]]), KK)
    assert dist(lay.coords, 0, 1) == pytest.approx(0.25, rel=1e-12)
    assert lay.objective_value == pytest.approx(0.0, abs=1e-20)


def test_kk_stress_non_increasing():
    sim, _ = planted([15, 15], 0.4, 0.05, 0)
    lay = kamada_kawai(sim, KK)
    h = np.array(lay.history)
    assert np.all(np.diff(h) <= 1e-10 * h[:-1] + 1e-15)
    assert kk_stress(lay.coords, target_distances(sim)) == pytest.approx(lay.objective_value)


def test_target_distances_use_inverse_similarity():
    sim = SimilarityMatrix.from_entries(3, [0, 1], [1, 2], [2.0, 0.5])
    t = target_distances(sim)
    assert t[0, 1] == 0.5 and t[1, 2] == 2.0 and t[0, 2] == 2.5


def test_layout_dispatch():
    sim = cliques(3, 1)
    assert layout(sim, LayoutConfig()).method == "vos"
    assert layout(sim, KK).method == "kamada_kawai"


def test_map_frame_rules():
    pts = np.array([(0, 0), (3, 0), (0, 1)])
    f = map_frame(pts)
    assert f.diagonal == pytest.approx(3 * math.sqrt(2))
    assert map_frame(pts, "rectangle").diagonal == pytest.approx(math.sqrt(10))
    assert map_frame(np.array([(0, 0), (1, 0), (0, 1), (1, 1)])).diagonal == pytest.approx(math.sqrt(2))
    with pytest.raises(DataError, match="degenerate"):
        map_frame(np.array([(1, 1), (1, 1)]))
    with pytest.raises(DataError):
        map_frame(np.array([(1, 1)]))
    with pytest.raises(DataError):
        map_frame(pts, "circle")


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=30))
def test_every_pair_fits_inside_the_diagonal(points):
    pts = np.array(points)
    if np.ptp(pts, axis=0).max() == 0:
        return
    for rule in ("square", "rectangle"):
        diag = map_frame(pts, rule).diagonal
        diff = pts[:, None] - pts[None]
        d = np.hypot(diff[..., 0], diff[..., 1])
        assert d.max() <= diag * (1 + 1e-12)


def test_center_layout():
    lay = Layout(np.arange(2), np.array([[1.0, 1.0], [3.0, 3.0]]), "vos")
    c = center_layout(lay)
    assert c.coords.tolist() == [[-1.0, -1.0], [1.0, 1.0]]
    assert np.array_equal(center_layout(c).coords, c.coords)


def test_layout_file_round_trip(tmp_path):
    lay = Layout(np.array([3, 7]), np.array([[0.1, -2 / 3], [1e-17, 5.0]]), "vos")
    write_layout(lay, tmp_path / "layout.tsv")
    back = read_layout(tmp_path / "layout.tsv")
    assert back.ids.tolist() == [3, 7] and np.array_equal(back.coords, lay.coords)


def test_config_validation():
    with pytest.raises(DataError):
        LayoutConfig(method="spring")
    with pytest.raises(DataError):
        LayoutConfig(tolerance=0)
    with pytest.raises(DataError):
        LayoutConfig(max_iterations=0)
