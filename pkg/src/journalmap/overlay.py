"""Overlay a downloaded document set (RIS export) onto a base map."""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from journalmap.corpus import normalize_title
from journalmap.errors import CorpusFormatError, DataError, RISFormatError

DEFAULT_TITLE_TAGS = ("T2", "JF", "JO")
GREY_CLUSTER = 0

BASEMAP_COLUMNS = (
    "id",
    "title",
    "normalized_title",
    "x",
    "y",
    "cluster",
    "alternate_cluster",
    "total_cited",
    "total_citing",
)
MAP_COLUMNS = ("id", "label", "x", "y", "cluster", "weight")

_TAG_LINE = re.compile(r"^([A-Z][A-Z0-9])  -(?: (.*))?$")


# -- base map ----------------------------------------------------------------


@dataclass(frozen=True)
class BaseMapEntry:
    id: int
    title: str
    x: float
    y: float
    cluster: int
    alternate_cluster: int = 0
    total_cited: int = 0
    total_citing: int = 0
    normalized_title: str = ""

    def __post_init__(self):
        if not self.normalized_title:
            object.__setattr__(self, "normalized_title", normalize_title(self.title))


@dataclass(frozen=True, eq=False)
class BaseMap:
    """Journal positions and colours; rows ordered by journal id."""

    entries: tuple[BaseMapEntry, ...]
    _by_id: dict = field(init=False, repr=False)
    _by_title: dict = field(init=False, repr=False)

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda e: e.id))
        object.__setattr__(self, "entries", entries)
        by_id, by_title = {}, {}
        for e in entries:
            if e.id in by_id:
                raise DataError(f"duplicate journal id {e.id} in base map")
            if e.cluster < 1:
                raise DataError(f"journal {e.id}: cluster must be >= 1, got {e.cluster}")
            if not (math.isfinite(e.x) and math.isfinite(e.y)):
                raise DataError(f"journal {e.id}: non-finite coordinates")
            by_id[e.id] = e
            # first journal wins when two titles normalise to the same key
            by_title.setdefault(e.normalized_title, e.id)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_by_title", by_title)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, journal_id: int) -> BaseMapEntry:
        try:
            return self._by_id[journal_id]
        except KeyError:
            raise DataError(f"journal {journal_id} is not on the base map") from None

    def __contains__(self, journal_id):
        return journal_id in self._by_id

    def lookup(self, normalized_title: str):
        return self._by_title.get(normalized_title)

    @property
    def ids(self) -> np.ndarray:
        return np.array([e.id for e in self.entries], dtype=np.int64)

    @property
    def coords(self) -> np.ndarray:
        return np.array([(e.x, e.y) for e in self.entries], dtype=np.float64).reshape(-1, 2)

    def position(self, journal_id: int) -> tuple[float, float]:
        e = self[journal_id]
        return e.x, e.y

    def with_cluster_field(self, which: str) -> "BaseMap":
        """Swap the active colouring; ``alternate`` moves the alternate labels into ``cluster``."""
        if which == "primary":
            return self
        if which != "alternate":
            raise DataError(f"cluster field must be 'primary' or 'alternate', got {which!r}")
        return BaseMap(
            tuple(replace(e, cluster=e.alternate_cluster, alternate_cluster=e.cluster) for e in self.entries)
        )

    def fingerprint(self) -> str:
        """Digest of ids and coordinates; colourings do not change it."""
        h = hashlib.sha256()
        for e in self.entries:
            h.update(f"{e.id}\t{e.x!r}\t{e.y!r}\n".encode())
        return h.hexdigest()[:12]


def write_basemap(basemap: BaseMap, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(BASEMAP_COLUMNS) + "\n")
        for e in basemap.entries:
            f.write(
                f"{e.id}\t{_clean(e.title)}\t{e.normalized_title}\t{e.x!r}\t{e.y!r}\t"
                f"{e.cluster}\t{e.alternate_cluster}\t{e.total_cited}\t{e.total_citing}\n"
            )


def read_basemap(path) -> BaseMap:
    entries = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\r\n").split("\t")
        if tuple(header) != BASEMAP_COLUMNS:
            raise CorpusFormatError(f"expected header {'|'.join(BASEMAP_COLUMNS)}", 1, str(path))
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            p = line.rstrip("\r\n").split("\t")
            if len(p) != len(BASEMAP_COLUMNS):
                raise CorpusFormatError(f"expected {len(BASEMAP_COLUMNS)} fields, got {len(p)}", lineno, str(path))
            try:
                entries.append(
                    BaseMapEntry(
                        id=int(p[0]),
                        title=p[1],
                        normalized_title=p[2],
                        x=float(p[3]),
                        y=float(p[4]),
                        cluster=int(p[5]),
                        alternate_cluster=int(p[6]),
                        total_cited=int(p[7]),
                        total_citing=int(p[8]),
                    )
                )
            except ValueError as exc:
                raise CorpusFormatError(f"malformed base map row ({exc})", lineno, str(path)) from None
    return BaseMap(tuple(entries))


# -- RIS -----------------------------------------------------------------------


def parse_ris(stream: IO[str] | Iterable[str], tags: Sequence[str] = DEFAULT_TITLE_TAGS) -> list[str]:
    """One source title per record, from the first present tag in ``tags``.

    Records without any of the tags yield ``""``.
    """
    titles = []
    current = None
    record_no = 0
    seen_ty = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if lineno == 1:
            line = line.lstrip("﻿")
        m = _TAG_LINE.match(line)
        if not m:
            continue  # blank lines and wrapped continuation text
        tag, value = m.group(1), (m.group(2) or "").strip()
        if tag == "TY":
            if current is not None:
                raise RISFormatError(f"record {record_no} has no ER terminator (new TY at line {lineno})")
            seen_ty = True
            record_no += 1
            current = {}
        elif current is None:
            if tag == "ER":
                raise RISFormatError(f"ER without TY at line {lineno}")
            continue
        elif tag == "ER":
            titles.append(next((current[t] for t in tags if current.get(t)), ""))
            current = None
        else:
            current.setdefault(tag, value)
    if current is not None:
        raise RISFormatError(f"record {record_no} has no ER terminator (end of input)")
    if not seen_ty:
        raise RISFormatError("not a RIS stream: no TY tag found")
    return titles


def read_ris(path, tags: Sequence[str] = DEFAULT_TITLE_TAGS) -> list[str]:
    with open(path, encoding="utf-8-sig") as f:
        return parse_ris(f, tags)


def write_ris(titles: Iterable[str], path, item_titles: Iterable[str] | None = None) -> None:
    """Minimal Scopus-style RIS export, one JOUR record per source title."""
    item_titles = list(item_titles) if item_titles is not None else None
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for k, t in enumerate(titles):
            f.write("TY  - JOUR\n")
            f.write(f"TI  - {item_titles[k] if item_titles else f'Document {k + 1}'}\n")
            if t:
                f.write(f"T2  - {t}\n")
            f.write("ER  - \n\n")


# -- matching and output ---------------------------------------------------------


@dataclass(frozen=True)
class OverlaySet:
    counts: dict[int, int]
    unmatched: tuple[tuple[str, int], ...]
    n_documents_total: int

    @property
    def n_matched(self) -> int:
        return sum(self.counts.values())

    @property
    def n_unmatched(self) -> int:
        return sum(c for _, c in self.unmatched)

    @property
    def match_rate(self) -> float:
        return self.n_matched / self.n_documents_total if self.n_documents_total else float("nan")

    def __add__(self, other: "OverlaySet") -> "OverlaySet":
        counts = Counter(self.counts)
        counts.update(other.counts)
        unmatched = Counter(dict(self.unmatched))
        unmatched.update(dict(other.unmatched))
        return OverlaySet(
            dict(sorted(counts.items())),
            _sorted_unmatched(unmatched),
            self.n_documents_total + other.n_documents_total,
        )


def _sorted_unmatched(counter) -> tuple[tuple[str, int], ...]:
    return tuple(sorted(counter.items(), key=lambda kv: (-kv[1], kv[0])))


def match_titles(titles: Sequence[str], basemap: BaseMap) -> OverlaySet:
    """Exact match on normalised title; no fuzzy matching."""
    counts: Counter[int] = Counter()
    unmatched: Counter[str] = Counter()
    shown: dict[str, str] = {}
    for t in titles:
        key = normalize_title(t)
        jid = basemap.lookup(key) if key else None
        if jid is None:
            shown.setdefault(key, t.strip())
            unmatched[shown[key]] += 1
        else:
            counts[jid] += 1
    return OverlaySet(dict(sorted(counts.items())), _sorted_unmatched(unmatched), len(titles))


def node_size(n: int) -> float:
    """``log4(n + 1)``."""
    if n < 0:
        raise DataError(f"document count must be >= 0, got {n}")
    # log2 is exact at powers of two, so n = 3, 15, 63 ... give integers
    return math.log2(n + 1) / 2


def count_from_size(size: float) -> int:
    return round(4.0**size - 1)


class MapRow(NamedTuple):
    id: int
    label: str
    x: float
    y: float
    cluster: int
    weight: float


def _clean(label: str) -> str:
    return label.replace("\t", " ").replace("\n", " ").replace("\r", " ")


def write_map_rows(rows: Iterable[MapRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(MAP_COLUMNS) + "\n")
        for r in rows:
            f.write(f"{r.id}\t{_clean(r.label)}\t{r.x!r}\t{r.y!r}\t{r.cluster}\t{float(r.weight)!r}\n")


def read_map_file(path) -> list[MapRow]:
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\r\n").split("\t")
        if tuple(header) != MAP_COLUMNS:
            raise CorpusFormatError(f"expected header {'|'.join(MAP_COLUMNS)}", 1, str(path))
        for lineno, line in enumerate(f, start=2):
            p = line.rstrip("\r\n").split("\t")
            if len(p) != len(MAP_COLUMNS):
                raise CorpusFormatError("malformed map row", lineno, str(path))
            rows.append(MapRow(int(p[0]), p[1], float(p[2]), float(p[3]), int(p[4]), float(p[5])))
    return rows


def overlay_rows(basemap: BaseMap, overlay: OverlaySet) -> list[MapRow]:
    """Overlay journals keep their colour and get size ``log4(n+1)``; the rest fade to grey."""
    rows = []
    for e in basemap.entries:
        n = overlay.counts.get(e.id, 0)
        if n > 0:
            rows.append(MapRow(e.id, e.title, e.x, e.y, e.cluster, node_size(n)))
        else:
            rows.append(MapRow(e.id, e.title, e.x, e.y, GREY_CLUSTER, 0.0))
    return rows


def emit_map_file(basemap: BaseMap, overlay: OverlaySet, path) -> list[MapRow]:
    missing = [j for j in overlay.counts if j not in basemap]
    if missing:
        raise DataError(f"overlay journals not on the base map: {missing[:5]}")
    rows = overlay_rows(basemap, overlay)
    write_map_rows(rows, path)
    return rows


def emit_overlay_stats(overlay: OverlaySet, basemap: BaseMap, path) -> None:
    """Per-journal raw counts and sizes, then a trailer with totals and match rate."""
    items = sorted(overlay.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("title\tn\tsize\tcluster\tx\ty\n")
        for jid, n in items:
            e = basemap[jid]
            f.write(f"{_clean(e.title)}\t{n}\t{node_size(n)!r}\t{e.cluster}\t{e.x!r}\t{e.y!r}\n")
        f.write("\n")
        f.write(f"n_documents_total\t{overlay.n_documents_total}\n")
        f.write(f"n_documents_matched\t{overlay.n_matched}\n")
        f.write(f"n_documents_unmatched\t{overlay.n_unmatched}\n")
        f.write(f"n_journals\t{len(overlay.counts)}\n")
        f.write(f"match_rate\t{overlay.match_rate:.6f}\n")
        for title, c in overlay.unmatched:
            f.write(f"unmatched\t{_clean(title)}\t{c}\n")


def read_overlay_stats(path) -> tuple[list[tuple[str, int, float, int, float, float]], dict[str, str]]:
    rows, trailer = [], {}
    with open(path, encoding="utf-8") as f:
        f.readline()
        body = True
        for line in f:
            line = line.rstrip("\n")
            if body and not line:
                body = False
                continue
            p = line.split("\t")
            if body:
                rows.append((p[0], int(p[1]), float(p[2]), int(p[3]), float(p[4]), float(p[5])))
            elif p[0] != "unmatched":
                trailer[p[0]] = p[1]
    return rows, trailer
