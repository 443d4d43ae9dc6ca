"""Time `build-basemap` on a large synthetic corpus.

Generates the corpus with `gen-synthetic`, then runs `build-basemap` in a
child process and records its own wall time and peak resident memory.  The
result goes to results/desk_scale.json, which the acceptance suite reads.

    python3 scripts/desk_scale.py --journals 20000 --edges 10000000
"""

import argparse
import json
import os
import platform
import re
import subprocess
import sys
import tempfile
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
STAGE = re.compile(r"INFO (\S+) done in ([0-9.]+) s, peak RSS ([0-9.]+) MB")


def run(argv, log_path):
    """Wall seconds and peak RSS (MB) of one child process."""
    t0 = time.perf_counter()
    with open(log_path, "w") as log:
        proc = subprocess.Popen([sys.executable, "-m", "journalmap", *map(str, argv)], stderr=log, stdout=log)
        _, status, usage = os.wait4(proc.pid, 0)
    wall = time.perf_counter() - t0
    code = os.waitstatus_to_exitcode(status)
    if code:
        sys.exit(f"{argv[0]} failed with exit code {code}; see {log_path}")
    return wall, usage.ru_maxrss / 1024


def total_memory_gb():
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES") / 2**30
    except (ValueError, OSError):
        return float("nan")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--journals", type=int, default=20_000)
    p.add_argument("--edges", type=int, default=10_000_000)
    p.add_argument("--fields", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout-iterations", type=int, default=None, help="default: the CLI default")
    p.add_argument("--workdir", default=None)
    p.add_argument("--out", default=str(ROOT / "results" / "desk_scale.json"))
    args = p.parse_args()

    work = Path(args.workdir or tempfile.mkdtemp(prefix="desk_scale_"))
    work.mkdir(parents=True, exist_ok=True)
    data, out = work / "data", work / "map"
    gen_wall, gen_rss = run(
        ["gen-synthetic", "--out", data, "--journals", args.journals, "--edges", args.edges,
         "--fields", args.fields, "--seed", args.seed],
        work / "gen.log",
    )
    build = ["build-basemap", "--journals", data / "journals.tsv", "--edges", data / "edges.tsv", "--out", out]
    if args.layout_iterations:
        build += ["--layout-iterations", args.layout_iterations]
    wall, peak = run(build, work / "build.log")

    stages = {m[1]: {"seconds": float(m[2]), "peak_rss_mb": float(m[3])}
              for m in STAGE.finditer((work / "build.log").read_text())}
    stats = dict(line.split("\t", 1) for line in (out / "stats.tsv").read_text().splitlines()[1:])
    result = {
        "n_journals": args.journals,
        "n_edges": args.edges,
        "generate_seconds": round(gen_wall, 1),
        "build_seconds": round(wall, 1),
        "build_peak_rss_mb": round(peak, 0),
        "generate_peak_rss_mb": round(gen_rss, 0),
        "stages": stages,
        "stats": stats,
        "cpu_count": os.cpu_count(),
        "memory_gb": round(total_memory_gb(), 1),
        "machine": platform.platform(),
        "workdir": str(work),
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
    print(json.dumps({k: result[k] for k in ("build_seconds", "build_peak_rss_mb", "cpu_count", "memory_gb")}))


if __name__ == "__main__":
    main()
