"""Command-line workflows: base maps, overlays, local maps and comparisons.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import resource
import sys
import time
from pathlib import Path

from journalmap import cluster, corpus, diversity, layout, localmap, overlay, simmat, synthetic
from journalmap.errors import DataError, InvariantViolation

log = logging.getLogger("journalmap")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3
GLOBAL_LAYOUT_ITERATIONS = 300


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class StageError(DataError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.cause = exc


def _peak_rss_mb() -> float:
    kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return kb / 1024


@contextlib.contextmanager
def stage(name):
    """Log wall time and peak memory; prefix data errors with the stage name."""
    log.info("%s ...", name)
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except InvariantViolation as exc:
        raise InvariantViolation(f"{name}: {exc}") from exc
    except (DataError, OSError) as exc:
        raise StageError(name, exc) from exc
    log.info("%s done in %.1f s, peak RSS %.0f MB", name, time.perf_counter() - t0, _peak_rss_mb())


def write_run_config(out: Path, items: dict) -> None:
    with open(out / "run_config.tsv", "w", encoding="utf-8", newline="\n") as f:
        f.write("key\tvalue\n")
        for k, v in items.items():
            f.write(f"{k}\t{v}\n")


def write_key_values(path: Path, items: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("key\tvalue\n")
        for k, v in items.items():
            f.write(f"{k}\t{v!r}\n" if isinstance(v, float) else f"{k}\t{v}\n")


def _set_threads(n):
    if n is None:
        return
    import numba

    if n < 1:
        raise UsageError("--threads must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- build-basemap -------------------------------------------------------------


def cmd_build_basemap(args) -> int:
    out = _out_dir(args.out)
    primary = args.primary_clustering
    louvain_cfg = cluster.ClusterConfig(
        objective="modularity", resolution=args.resolution, seed=args.seed, min_cluster_size=args.min_cluster_size
    )
    vos_cfg = cluster.ClusterConfig(
        objective="vos",
        resolution=args.vos_resolution,
        scale_resolution=not args.unscaled_resolution,
        seed=args.seed,
        min_cluster_size=args.min_cluster_size,
    )
    layout_cfg = layout.LayoutConfig(
        method="vos", max_iterations=args.layout_iterations, tolerance=args.layout_tolerance, seed=args.seed
    )
    write_run_config(
        out,
        {
            "command": "build-basemap",
            "journals": args.journals,
            "edges": args.edges,
            "min_weight": args.min_weight,
            "direction": args.direction,
            "self_citations": not args.no_self_citations,
            "threshold": args.threshold,
            "max_pairs": args.max_pairs,
            "primary_clustering": primary,
            "louvain_resolution": louvain_cfg.resolution,
            "vos_resolution": vos_cfg.resolution,
            "vos_scale_resolution": vos_cfg.scale_resolution,
            "min_cluster_size": args.min_cluster_size,
            "layout_method": layout_cfg.method,
            "layout_iterations": layout_cfg.max_iterations,
            "layout_tolerance": layout_cfg.tolerance,
            "seed": args.seed,
        },
    )
    stats = {}
    with stage("parse"):
        registry, matrix = corpus.load_corpus(args.journals, args.edges)
        s = corpus.corpus_stats(matrix)
        stats.update(n_journals=s.n_journals, n_links=s.n_links, n_single_links=s.n_single_links)
        stats["fill_fraction"] = s.fill_fraction
    with stage("filter_min_weight"):
        matrix = corpus.filter_min_weight(matrix, args.min_weight)
        s = corpus.corpus_stats(matrix)
        stats["n_links_filtered"] = s.n_links
        stats["fill_fraction_filtered"] = s.fill_fraction
    with stage("cosine"):
        sim = simmat.cosine_similarity(
            matrix, args.direction, not args.no_self_citations, max_pairs=args.max_pairs
        )
        del matrix
        sim = simmat.threshold_similarity(sim, args.threshold)
        stats["n_similarity_pairs"] = sim.nnz
        log.info("%d similarity pairs", sim.nnz)
    with stage("largest_component"):
        n_comp = simmat.component_sizes(sim).size
        sim = sim.subgraph(simmat.largest_component(sim))
        if sim.n < 2:
            raise DataError("largest component has fewer than 2 journals")
        stats["n_components"] = n_comp
        stats["largest_component"] = sim.n
        stats["n_similarity_pairs_component"] = sim.nnz
        graph = simmat.adjacency(sim)
    with stage("louvain"):
        blondel = cluster.louvain(sim, louvain_cfg, graph)
        stats["louvain_q"] = blondel.q
        stats["louvain_communities"] = blondel.n_communities
    with stage("vos_cluster"):
        vos = cluster.vos_cluster(sim, vos_cfg, graph)
        stats["vos_objective"] = vos.objective
        stats["vos_q"] = vos.q
        stats["vos_clusters"] = vos.n_communities
    with stage("vos_layout"):
        if layout_cfg.mean_over == "all":
            del graph  # the all-pairs sweep reads only the upper triangle
            graph = None
        lay = layout.vos_layout(sim, layout_cfg, graph)
        del graph
        stats["layout_objective"] = lay.objective_value
        stats["layout_iterations"] = lay.n_iterations
        stats["layout_converged"] = lay.converged
        if not lay.converged:
            log.warning("layout stopped at the iteration cap (%d)", lay.n_iterations)
    with stage("write"):
        first, second = (vos, blondel) if primary == "vos" else (blondel, vos)
        entries = []
        for k, jid in enumerate(sim.ids.tolist()):
            rec = registry[jid]
            entries.append(
                overlay.BaseMapEntry(
                    id=jid,
                    title=rec.title,
                    normalized_title=rec.normalized_title,
                    x=float(lay.coords[k, 0]),
                    y=float(lay.coords[k, 1]),
                    cluster=int(first.assignment[k]) + 1,
                    alternate_cluster=int(second.assignment[k]) + 1,
                    total_cited=rec.total_cited,
                    total_citing=rec.total_citing,
                )
            )
        bm = overlay.BaseMap(tuple(entries))
        overlay.write_basemap(bm, out / "basemap.tsv")
        layout.write_layout(lay, out / "layout.tsv")
        with open(out / "clusters.tsv", "w", encoding="utf-8", newline="\n") as f:
            f.write("journal_id\tcluster\talternate_cluster\n")
            for e in bm.entries:
                f.write(f"{e.id}\t{e.cluster}\t{e.alternate_cluster}\n")
        stats["basemap_id"] = bm.fingerprint()
        write_key_values(out / "stats.tsv", stats)
    print(
        f"base map: {sim.n} journals, {first.n_communities} clusters ({primary}), "
        f"Q(louvain) = {blondel.q:.4f}, id {bm.fingerprint()}"
    )
    return EXIT_OK


# -- overlay -------------------------------------------------------------------


def cmd_overlay(args) -> int:
    out = _out_dir(args.out)
    name = args.name or Path(args.ris).stem
    write_run_config(
        out,
        {
            "command": "overlay",
            "ris": args.ris,
            "basemap": args.basemap,
            "cluster_field": args.cluster_field,
            "diagonal": args.diagonal,
            "name": name,
        },
    )
    with stage("read"):
        bm = overlay.read_basemap(args.basemap).with_cluster_field(args.cluster_field)
        titles = overlay.read_ris(args.ris)
    with stage("match"):
        ov = overlay.match_titles(titles, bm)
        log.info("%d of %d documents matched %d journals", ov.n_matched, ov.n_documents_total, len(ov.counts))
    with stage("emit"):
        overlay.emit_map_file(bm, ov, out / "overlay.txt")
        overlay.emit_overlay_stats(ov, bm, out / "overlay_stats.tsv")
    with stage("rao_stirling"):
        report = diversity.rao_stirling(ov, bm, rule=args.diagonal, set_name=name)
        if args.timestamp:
            report = dataclasses.replace(report, timestamp=args.timestamp)
        rao_path = Path(args.rao) if args.rao else out / "rao.txt"
        line = diversity.append_rao(report, rao_path)
    print(line)
    return EXIT_OK


# -- local-map -----------------------------------------------------------------


def _resolve_journal(registry, key: str) -> int:
    if key.isdigit():
        jid = int(key)
        if jid >= len(registry):
            raise DataError(f"unknown journal id {jid}")
        return jid
    norm = corpus.normalize_title(key)
    for rec in registry:
        if rec.normalized_title == norm:
            return rec.id
    raise DataError(f"no journal titled {key!r}")


def cmd_local_map(args) -> int:
    out = _out_dir(args.out)
    write_run_config(
        out,
        {
            "command": "local-map",
            "journals": args.journals,
            "edges": args.edges,
            "seed_journal": args.seed_journal,
            "direction": args.direction,
            "threshold": args.threshold,
            "min_weight": args.min_weight,
            "resolution": args.resolution,
            "layout_iterations": args.layout_iterations,
            "seed": args.seed,
        },
    )
    with stage("parse"):
        registry, matrix = corpus.load_corpus(args.journals, args.edges)
        matrix = corpus.filter_min_weight(matrix, args.min_weight)
        seed_id = _resolve_journal(registry, args.seed_journal)
    with stage("ego_network"):
        ego = localmap.ego_network(matrix, seed_id, args.direction, args.threshold)
        log.info("%d journals above the threshold", len(ego))
    with stage("local_map"):
        part, lay = localmap.local_map(
            ego,
            cluster.ClusterConfig(resolution=args.resolution, seed=args.seed),
            layout.LayoutConfig(
                method="kamada_kawai", max_iterations=args.layout_iterations, tolerance=1e-9, seed=args.seed
            ),
        )
    with stage("write"):
        localmap.write_local_map(ego, part, lay, registry, out / "localmap.txt")
    print(f"local map of {registry[seed_id].title}: {len(ego)} journals, {part.n_communities} communities")
    return EXIT_OK


# -- compare -------------------------------------------------------------------


def cmd_compare(args) -> int:
    with stage("compare"):
        reports = []
        for path in args.rao:
            reports.extend(diversity.read_rao(path))
        if args.sets:
            wanted = set(args.sets)
            reports = [r for r in reports if r.set_name in wanted]
        if len(reports) < 2:
            raise DataError("need >= 2 sets to compare")
        rows = diversity.compare_sets(reports)
    print(diversity.format_comparison(rows, reports[0].diagonal_rule))
    return EXIT_OK


# -- gen-synthetic and stats -----------------------------------------------------


def cmd_gen_synthetic(args) -> int:
    out = _out_dir(args.out)
    spec = synthetic.SyntheticSpec(
        n_journals=args.journals,
        n_edges=args.edges,
        n_fields=args.fields,
        single_fraction=args.single_fraction,
        in_field=args.in_field,
        seed=args.seed,
    )
    with stage("generate"):
        registry, matrix = synthetic.generate_corpus(spec)
    with stage("write"):
        corpus.write_journals(registry, out / "journals.tsv")
        corpus.write_edges(matrix, out / "edges.tsv")
        if args.ris_records:
            titles = synthetic.overlay_titles(
                [r.title for r in registry], args.ris_records, args.ris_titles, args.seed, args.ris_unmatched
            )
            overlay.write_ris(titles, out / "documents.ris")
    write_run_config(out, {"command": "gen-synthetic", **spec.__dict__})
    s = corpus.corpus_stats(matrix)
    print(f"{s.n_journals} journals, {s.n_links} links ({s.n_single_links} single), fill {s.fill_fraction:.4%}")
    return EXIT_OK


def cmd_stats(args) -> int:
    with stage("parse"):
        _, matrix = corpus.load_corpus(args.journals, args.edges)
    rows = [("all", corpus.corpus_stats(matrix))]
    if args.min_weight > 1:
        rows.append((f"min_weight={args.min_weight}", corpus.corpus_stats(corpus.filter_min_weight(matrix, args.min_weight))))
    print("set\tjournals\tlinks\tsingle_links\tfill_fraction\tcitations")
    for name, s in rows:
        print(f"{name}\t{s.n_journals}\t{s.n_links}\t{s.n_single_links}\t{s.fill_fraction:.6f}\t{s.total_citations}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="journalmap", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    p.add_argument("--threads", type=int, help="cap numba worker threads (results do not change)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-basemap", help="cosine base map with clusters and a global layout")
    b.add_argument("--journals", required=True)
    b.add_argument("--edges", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--min-weight", type=int, default=2)
    b.add_argument("--direction", choices=[d.value for d in simmat.Direction], default="citing")
    b.add_argument("--no-self-citations", action="store_true")
    b.add_argument("--threshold", type=float, default=0.0, help="drop cosine values below this")
    b.add_argument("--max-pairs", type=int, default=simmat.DEFAULT_MAX_PAIRS)
    b.add_argument("--primary-clustering", choices=["vos", "louvain"], default="vos")
    b.add_argument("--resolution", type=float, default=1.0, help="louvain resolution")
    b.add_argument("--vos-resolution", type=float, default=1.0)
    b.add_argument("--unscaled-resolution", action="store_true", help="do not scale the vos resolution by the mean weight")
    b.add_argument("--min-cluster-size", type=int, default=1)
    b.add_argument("--layout-iterations", type=int, default=GLOBAL_LAYOUT_ITERATIONS)
    b.add_argument("--layout-tolerance", type=float, default=1e-7)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_build_basemap)

    o = sub.add_parser("overlay", help="overlay an RIS download on a base map")
    o.add_argument("--ris", required=True)
    o.add_argument("--basemap", required=True)
    o.add_argument("--out", required=True)
    o.add_argument("--name", help="set name in rao.txt (default: RIS file stem)")
    o.add_argument("--cluster-field", choices=["primary", "alternate"], default="primary")
    o.add_argument("--diagonal", choices=list(layout.DIAGONAL_RULES), default="square")
    o.add_argument("--rao", help="rao.txt to append to (default: OUT/rao.txt)")
    o.add_argument("--timestamp", help="fixed timestamp for the rao.txt line")
    o.set_defaults(func=cmd_overlay)

    m = sub.add_parser("local-map", help="ego-network map around one journal")
    m.add_argument("--journals", required=True)
    m.add_argument("--edges", required=True)
    m.add_argument("--seed-journal", required=True, help="journal id or title")
    m.add_argument("--out", required=True)
    m.add_argument("--direction", choices=[d.value for d in simmat.Direction], default="cited")
    m.add_argument("--threshold", type=float, default=localmap.DEFAULT_THRESHOLD)
    m.add_argument("--min-weight", type=int, default=1)
    m.add_argument("--resolution", type=float, default=1.0)
    m.add_argument("--layout-iterations", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_local_map)

    c = sub.add_parser("compare", help="compare diversity of document sets on one base map")
    c.add_argument("rao", nargs="+", help="rao.txt files")
    c.add_argument("--sets", nargs="+", help="restrict to these set names")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gen-synthetic", help="write a planted-structure corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--journals", type=int, default=2000)
    g.add_argument("--edges", type=int, default=100_000)
    g.add_argument("--fields", type=int, default=20)
    g.add_argument("--single-fraction", type=float, default=0.419)
    g.add_argument("--in-field", type=float, default=0.8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ris-records", type=int, default=0, help="also write documents.ris with this many records")
    g.add_argument("--ris-titles", type=int, default=71)
    g.add_argument("--ris-unmatched", type=int, default=0)
    g.set_defaults(func=cmd_gen_synthetic)

    s = sub.add_parser("stats", help="size and fill fraction of a corpus")
    s.add_argument("--journals", required=True)
    s.add_argument("--edges", required=True)
    s.add_argument("--min-weight", type=int, default=2)
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        _set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
