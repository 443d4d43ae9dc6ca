from collections import Counter

import pytest

from journalmap import cli, cluster, corpus
from journalmap.diversity import read_rao
from journalmap.errors import InvariantViolation
from journalmap.overlay import read_basemap, read_map_file, read_overlay_stats, write_ris
from journalmap.synthetic import field_of


def run(*argv):
    return cli.main(["-q", *map(str, argv)])


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    data = root / "data"
    assert run("gen-synthetic", "--out", data, "--journals", 300, "--edges", 12000, "--fields", 4,
               "--ris-records", 114, "--ris-titles", 71, "--seed", 1) == 0
    out = root / "map"
    assert run("build-basemap", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv", "--out", out) == 0
    return data, out


def test_build_basemap_outputs(demo):
    data, out = demo
    for name in ("basemap.tsv", "layout.tsv", "clusters.tsv", "stats.tsv", "run_config.tsv"):
        assert (out / name).exists()
    bm = read_basemap(out / "basemap.tsv")
    stats = dict(line.split("\t") for line in (out / "stats.tsv").read_text().splitlines()[1:])
    assert int(stats["largest_component"]) == len(bm)
    assert stats["basemap_id"] == bm.fingerprint()
    assert "min_weight\t2" in (out / "run_config.tsv").read_text()


def test_rerun_is_byte_identical(demo, tmp_path):
    data, out = demo
    assert run("build-basemap", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv", "--out", tmp_path) == 0
    for name in ("basemap.tsv", "layout.tsv", "clusters.tsv", "stats.tsv", "run_config.tsv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_min_weight_changes_link_counts(demo, tmp_path):
    data, out = demo
    assert run("build-basemap", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv",
               "--out", tmp_path, "--min-weight", 1) == 0
    read = lambda p: dict(line.split("\t") for line in (p / "stats.tsv").read_text().splitlines()[1:])
    one, two = read(tmp_path), read(out)
    _, m = corpus.load_corpus(data / "journals.tsv", data / "edges.tsv")
    assert int(one["n_links_filtered"]) == m.nnz
    assert int(two["n_links_filtered"]) == m.nnz - int((m.counts == 1).sum())


def test_overlay_workflow(demo, tmp_path):
    data, out = demo
    ris = data / "documents.ris"
    args = ["overlay", "--ris", ris, "--basemap", out / "basemap.tsv", "--out", tmp_path, "--timestamp", "T"]
    assert run(*args) == 0
    assert run(*args, "--name", "second") == 0
    reports = read_rao(tmp_path / "rao.txt")
    assert [r.set_name for r in reports] == ["documents", "second"]
    assert reports[0].delta == reports[1].delta and reports[0].n_documents == 114
    rows = read_map_file(tmp_path / "overlay.txt")
    stats, trailer = read_overlay_stats(tmp_path / "overlay_stats.tsv")
    assert sum(r[1] for r in stats) == int(trailer["n_documents_matched"])
    assert len(rows) == len(read_basemap(out / "basemap.tsv"))
    first = (tmp_path / "overlay.txt").read_bytes()
    assert run(*args) == 0
    assert (tmp_path / "overlay.txt").read_bytes() == first


def test_alternate_cluster_field_keeps_positions(demo, tmp_path):
    data, out = demo
    base = ["overlay", "--ris", data / "documents.ris", "--basemap", out / "basemap.tsv"]
    assert run(*base, "--out", tmp_path / "a") == 0
    assert run(*base, "--out", tmp_path / "b", "--cluster-field", "alternate") == 0
    a = read_map_file(tmp_path / "a" / "overlay.txt")
    b = read_map_file(tmp_path / "b" / "overlay.txt")
    assert [(r.id, r.x, r.y, r.weight) for r in a] == [(r.id, r.x, r.y, r.weight) for r in b]
    bm = read_basemap(out / "basemap.tsv")
    alt = {e.id: e.alternate_cluster for e in bm.entries}
    assert all(r.cluster == alt[r.id] for r in b if r.weight > 0)


def test_zero_matches_writes_stats_and_fails(demo, tmp_path, capsys):
    data, out = demo
    write_ris(["Nothing Like It", "Nor This"], tmp_path / "x.ris")
    code = run("overlay", "--ris", tmp_path / "x.ris", "--basemap", out / "basemap.tsv", "--out", tmp_path)
    assert code == 2
    assert "undefined" in capsys.readouterr().err
    _, trailer = read_overlay_stats(tmp_path / "overlay_stats.tsv")
    assert trailer["n_documents_matched"] == "0"


def test_compare_dispersed_beats_concentrated(demo, tmp_path, capsys):
    data, out = demo
    bm = read_basemap(out / "basemap.tsv")
    by_cluster = {}
    for e in bm.entries:
        by_cluster.setdefault(e.cluster, []).append(e.title)
    big = max(by_cluster.values(), key=len)
    spread = [titles[k] for titles in by_cluster.values() for k in range(min(5, len(titles)))]
    write_ris(big[:20] * 3, tmp_path / "concentrated.ris")
    write_ris(spread * 2, tmp_path / "dispersed.ris")
    rao = tmp_path / "rao.txt"
    for name in ("concentrated", "dispersed"):
        assert run("overlay", "--ris", tmp_path / f"{name}.ris", "--basemap", out / "basemap.tsv",
                   "--out", tmp_path / name, "--rao", rao) == 0
    capsys.readouterr()
    assert run("compare", rao) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[1].startswith("dispersed") and table[2].startswith("concentrated")
    assert run("compare", rao, "--sets", "dispersed") == 2
    assert "need >= 2 sets" in capsys.readouterr().err


def test_two_block_corpus_gives_two_dominant_clusters(tmp_path):
    assert run("gen-synthetic", "--out", tmp_path, "--journals", 200, "--edges", 8000, "--fields", 2,
               "--in-field", 0.95, "--seed", 4) == 0
    fields = field_of(200, 2, 4)
    for primary in ("louvain", "vos"):
        assert run("build-basemap", "--journals", tmp_path / "journals.tsv", "--edges", tmp_path / "edges.tsv",
                   "--out", tmp_path / primary, "--primary-clustering", primary) == 0
        entries = read_basemap(tmp_path / primary / "basemap.tsv").entries
        sizes = Counter(e.cluster for e in entries)
        (c1, n1), (c2, n2) = sizes.most_common(2)
        rest = sorted(sizes.values(), reverse=True)[2:]
        # the two largest clusters are the two planted blocks
        assert {Counter(fields[e.id] for e in entries if e.cluster == c).most_common(1)[0][0] for c in (c1, c2)} == {0, 1}
        for c in (c1, c2):
            members = [fields[e.id] for e in entries if e.cluster == c]
            assert Counter(members).most_common(1)[0][1] >= 0.95 * len(members)
        assert sum(rest) <= 0.5 * (n1 + n2) and all(r < n2 / 4 for r in rest)
        if primary == "louvain":
            assert n1 + n2 >= 0.95 * len(entries)


def test_local_map_by_title(demo, tmp_path, capsys):
    data, _ = demo
    reg = corpus.load_corpus(data / "journals.tsv", data / "edges.tsv")[0]
    assert run("local-map", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv",
               "--seed-journal", reg[7].title.upper(), "--out", tmp_path) == 0
    rows = read_map_file(tmp_path / "localmap.txt")
    assert 7 in {r.id for r in rows}
    assert "run_config.tsv" in {p.name for p in tmp_path.iterdir()}
    assert run("local-map", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv",
               "--seed-journal", "No Such Journal", "--out", tmp_path) == 2


def test_exit_codes(demo, tmp_path, monkeypatch, capsys):
    data, _ = demo
    assert run("build-basemap", "--journals", data / "journals.tsv") == 1
    assert run("no-such-command") == 1
    assert run("--threads", 0, "stats", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv") == 1
    assert run("build-basemap", "--journals", tmp_path / "missing.tsv", "--edges", data / "edges.tsv", "--out", tmp_path) == 2
    assert "parse:" in capsys.readouterr().err

    def broken(*a, **k):
        raise InvariantViolation("objective drifted")

    monkeypatch.setattr(cluster, "louvain", broken)
    assert run("build-basemap", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv", "--out", tmp_path) == 3
    assert "louvain: objective drifted" in capsys.readouterr().err


def test_stats_command(demo, capsys):
    data, _ = demo
    assert run("stats", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split("\t")[:3] == ["all", "300", "12000"]
    assert lines[2].startswith("min_weight=2")
