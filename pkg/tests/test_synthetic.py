from collections import Counter

import numpy as np
import pytest

from journalmap.cluster import ClusterConfig, louvain
from journalmap.corpus import corpus_stats, normalize_title
from journalmap.errors import DataError
from journalmap.simmat import cosine_similarity, largest_component
from journalmap.synthetic import SyntheticSpec, field_of, generate_corpus, overlay_titles


@pytest.mark.parametrize("n,e,frac", [(50, 600, 0.3), (300, 9000, 0.419), (200, 200, 0.0), (120, 4000, 0.0)])
def test_link_and_single_counts_are_exact(n, e, frac):
    reg, m = generate_corpus(SyntheticSpec(n, e, n_fields=4, single_fraction=frac, seed=3))
    s = corpus_stats(m)
    assert s.n_links == e
    assert s.n_single_links == round(frac * e)
    assert len(reg) == n and np.all(m.diagonal() > 0)
    assert np.all(m.total_cited() == [r.total_cited for r in reg])


def test_deterministic_per_seed():
    a = generate_corpus(SyntheticSpec(100, 2000, seed=5))[1]
    b = generate_corpus(SyntheticSpec(100, 2000, seed=5))[1]
    c = generate_corpus(SyntheticSpec(100, 2000, seed=6))[1]
    assert np.array_equal(a.rows, b.rows) and np.array_equal(a.counts, b.counts)
    assert not (np.array_equal(a.rows, c.rows) and np.array_equal(a.counts, c.counts))


def test_near_complete_fill_is_reachable():
    _, m = generate_corpus(SyntheticSpec(30, 880, n_fields=2, single_fraction=0.1))
    assert m.nnz == 880


def test_bad_sizes():
    with pytest.raises(DataError):
        generate_corpus(SyntheticSpec(10, 5))
    with pytest.raises(DataError):
        generate_corpus(SyntheticSpec(10, 101))
    with pytest.raises(DataError):
        generate_corpus(SyntheticSpec(10, 50, single_fraction=0.9))


def test_fields_are_balanced():
    f = field_of(1000, 7, 0)
    sizes = np.bincount(f)
    assert sizes.max() - sizes.min() <= 1


def test_titles_are_unique_after_normalisation():
    reg, _ = generate_corpus(SyntheticSpec(500, 5000))
    assert len({normalize_title(r.title) for r in reg}) == 500


def test_planted_fields_are_recoverable():
    reg, m = generate_corpus(SyntheticSpec(400, 16000, n_fields=2, in_field=0.9, seed=1))
    sim = cosine_similarity(m, "citing")
    sim = sim.subgraph(largest_component(sim))
    part = louvain(sim, ClusterConfig(seed=0))
    truth = field_of(400, 2, 1)[sim.ids]
    agree = sum(Counter(part.assignment[truth == f]).most_common(1)[0][1] for f in (0, 1))
    assert agree / sim.n > 0.95


def test_overlay_fixture_shape():
    pool = [f"J{k}" for k in range(300)]
    titles = overlay_titles(pool, 114, 71, seed=2)
    assert len(titles) == 114 and len(set(titles)) == 71
    titles = overlay_titles(pool, 120, 71, seed=2, unmatched=6)
    assert len(titles) == 120
    assert sum(t.startswith("Unindexed") for t in titles) == 6
    assert overlay_titles(pool, 114, 71, seed=2) == overlay_titles(pool, 114, 71, seed=2)
    with pytest.raises(DataError):
        overlay_titles(pool, 50, 71)
