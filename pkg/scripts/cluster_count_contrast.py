"""Louvain vs VOS cluster counts on non-normalised co-occurrence, cited and citing.

Prints a table with, per direction, the largest component size, the
Louvain community count and modularity, and the VOS cluster count at each
resolution with the number of clusters holding at least five journals.

    python3 scripts/cluster_count_contrast.py --journals 2000 --edges 120000
"""

import argparse

from journalmap.cluster import ClusterConfig, louvain, vos_cluster
from journalmap.corpus import corpus_stats, filter_min_weight
from journalmap.simmat import cooccurrence, largest_component
from journalmap.synthetic import SyntheticSpec, generate_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--journals", type=int, default=2000)
    p.add_argument("--edges", type=int, default=120_000)
    p.add_argument("--fields", type=int, default=12)
    p.add_argument("--min-weight", type=int, default=2)
    p.add_argument("--gammas", type=float, nargs="+", default=[1.0, 2.0, 5.0])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    _, m = generate_corpus(SyntheticSpec(args.journals, args.edges, args.fields, seed=args.seed))
    m = filter_min_weight(m, args.min_weight)
    s = corpus_stats(m)
    print(f"{s.n_journals} journals, {s.n_links} links after min weight {args.min_weight}, fill {s.fill_fraction:.2%}")
    head = ["direction", "n", "louvain", "Q"] + [f"vos g={g:g} (>=5)" for g in args.gammas]
    print("\t".join(head))
    for direction in ("cited", "citing"):
        sim = cooccurrence(m, direction)
        sim = sim.subgraph(largest_component(sim))
        blondel = louvain(sim, ClusterConfig(seed=args.seed))
        row = [direction, str(sim.n), str(blondel.n_communities), f"{blondel.q:.3f}"]
        for g in args.gammas:
            vos = vos_cluster(sim, ClusterConfig(objective="vos", resolution=g, seed=args.seed))
            row.append(f"{vos.n_communities} ({int((vos.sizes() >= 5).sum())})")
        print("\t".join(row))


if __name__ == "__main__":
    main()
