"""Overlay two document sets on one base map and compare their diversity.

Runs the command-line workflow end to end on a synthetic corpus: build the
base map, draw a dispersed set (a few journals from every cluster) and a
concentrated one (journals of the largest cluster only), overlay both and
print the comparison table.  All files land in --out.

    python3 scripts/portfolio_compare.py --out /tmp/portfolio
"""

import argparse
from collections import defaultdict
from pathlib import Path

import numpy as np

from journalmap import cli
from journalmap.overlay import read_basemap, write_ris


def journalmap(*argv):
    code = cli.main([str(a) for a in argv])
    if code:
        raise SystemExit(f"journalmap {argv[0]} exited with {code}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="portfolio")
    p.add_argument("--journals", type=int, default=1500)
    p.add_argument("--edges", type=int, default=80_000)
    p.add_argument("--fields", type=int, default=15)
    p.add_argument("--dispersed", type=int, default=268, help="records in the dispersed set")
    p.add_argument("--concentrated", type=int, default=715, help="records in the concentrated set")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    out = Path(args.out)
    journalmap("gen-synthetic", "--out", out / "data", "--journals", args.journals, "--edges", args.edges,
               "--fields", args.fields, "--seed", args.seed)
    journalmap("build-basemap", "--journals", out / "data" / "journals.tsv", "--edges", out / "data" / "edges.tsv",
               "--out", out / "map", "--seed", args.seed)

    bm = read_basemap(out / "map" / "basemap.tsv")
    by_cluster = defaultdict(list)
    for e in bm.entries:
        by_cluster[e.cluster].append(e.title)
    rng = np.random.default_rng(args.seed)
    everywhere = [t for titles in by_cluster.values() for t in titles[:5]]
    largest = max(by_cluster.values(), key=len)
    write_ris(rng.choice(everywhere, args.dispersed).tolist(), out / "dispersed.ris")
    write_ris(rng.choice(largest, args.concentrated).tolist(), out / "concentrated.ris")

    rao = out / "rao.txt"
    rao.unlink(missing_ok=True)
    for name in ("dispersed", "concentrated"):
        journalmap("overlay", "--ris", out / f"{name}.ris", "--basemap", out / "map" / "basemap.tsv",
                   "--out", out / name, "--rao", rao)
    journalmap("compare", rao)


if __name__ == "__main__":
    main()
