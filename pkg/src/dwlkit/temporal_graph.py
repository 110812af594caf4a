"""Event-stream data model for continuous-time dynamic graphs.

A :class:`DynamicGraph` is a node set plus a time-sorted stream of interaction
events.  The dynamic adjacency tensor (:class:`DAT`) stores, per unordered node
pair, the sorted timestamps of its interactions; the historical (``hdat_at``)
and time-interval (``tit_at``) views materialise the infinity-padded rows of
that tensor at a query time on demand.
"""
from __future__ import annotations

import io
import math
import os
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

INF = math.inf
MAX_NODE_ID = 2**31 - 1
DEFAULT_ORACLE_BOUND = 8


class GraphFormatError(ValueError):
    """Raised when an event file does not parse under its declared format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OracleBoundError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    src: int
    dst: int
    time: float
    edge_feature_index: int | None = None


class DynamicGraph:
    """Immutable dynamic graph: node count, sorted events and feature tables.

    Events are sorted stably by time on construction, so equal timestamps keep
    their input order.  Missing feature tables become single-column zero
    matrices.
    """

    def __init__(
        self,
        node_count: int,
        events: Iterable[Event | tuple] = (),
        node_features: np.ndarray | None = None,
        edge_features: np.ndarray | None = None,
    ):
        evs = [e if isinstance(e, Event) else Event(*e) for e in events]
        if node_count < 0:
            raise ValueError("node_count must be non-negative")
        for e in evs:
            if not (0 <= e.src < node_count and 0 <= e.dst < node_count):
                raise ValueError(f"event {e} references a node outside [0, {node_count})")
            if not math.isfinite(e.time) or e.time < 0:
                raise ValueError(f"event {e} has a non-finite or negative time")
        evs.sort(key=lambda e: e.time)  # stable
        self.node_count = int(node_count)
        self.events: tuple[Event, ...] = tuple(evs)

        if node_features is None:
            node_features = np.zeros((node_count, 1))
        node_features = np.asarray(node_features, dtype=np.float64)
        if node_features.ndim != 2 or node_features.shape[0] != node_count:
            raise ValueError("node_features must have one row per node")
        if edge_features is None:
            edge_features = np.zeros((len(evs), 1))
            if any(e.edge_feature_index is not None for e in evs):
                raise ValueError("edge_feature_index given without an edge feature table")
        edge_features = np.asarray(edge_features, dtype=np.float64)
        if edge_features.ndim != 2 or edge_features.shape[0] != len(evs):
            raise ValueError("edge_features must have one row per event")
        for e in evs:
            if e.edge_feature_index is not None and not 0 <= e.edge_feature_index < len(evs):
                raise ValueError(f"edge_feature_index out of range in {e}")
        node_features.setflags(write=False)
        edge_features.setflags(write=False)
        self.node_features = node_features
        self.edge_features = edge_features

        self.src = np.array([e.src for e in evs], dtype=np.int64)
        self.dst = np.array([e.dst for e in evs], dtype=np.int64)
        self.times = np.array([e.time for e in evs], dtype=np.float64)
        self._build_incidence()

    def _build_incidence(self) -> None:
        # per node: incident event positions in time order; a self-loop counts once
        incident: list[list[int]] = [[] for _ in range(self.node_count)]
        for i, e in enumerate(self.events):
            incident[e.src].append(i)
            if e.dst != e.src:
                incident[e.dst].append(i)
        self._incident = [np.array(ix, dtype=np.int64) for ix in incident]
        self._incident_times = [self.times[ix] for ix in self._incident]
        self._incident_other = []
        for u, ix in enumerate(self._incident):
            other = np.where(self.src[ix] == u, self.dst[ix], self.src[ix])
            self._incident_other.append(other)
        self._edge_index = np.array(
            [-1 if e.edge_feature_index is None else e.edge_feature_index for e in self.events],
            dtype=np.int64,
        )

    @property
    def node_feature_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def edge_feature_dim(self) -> int:
        return self.edge_features.shape[1]

    def __len__(self) -> int:
        return len(self.events)

    def __repr__(self) -> str:
        return f"DynamicGraph(node_count={self.node_count}, events={len(self.events)})"

    def edge_feature_row(self, edge_feature_index: int) -> np.ndarray:
        if edge_feature_index < 0:
            return np.zeros(self.edge_feature_dim)
        return self.edge_features[edge_feature_index]

    def relabel(self, perm: Sequence[int]) -> "DynamicGraph":
        """Apply the node permutation ``u -> perm[u]``; features move with their nodes."""
        perm = list(perm)
        if sorted(perm) != list(range(self.node_count)):
            raise ValueError("perm must be a permutation of the node ids")
        feats = np.empty_like(self.node_features)
        feats[perm] = self.node_features
        evs = [Event(perm[e.src], perm[e.dst], e.time, e.edge_feature_index) for e in self.events]
        return DynamicGraph(self.node_count, evs, feats, self.edge_features)


def _remap_edges(g: DynamicGraph, keep: list[int]) -> tuple[list[Event], np.ndarray]:
    rows = []
    evs = []
    for i in keep:
        e = g.events[i]
        if e.edge_feature_index is None:
            rows.append(np.zeros(g.edge_feature_dim))
        else:
            rows.append(g.edge_features[e.edge_feature_index])
        evs.append(Event(e.src, e.dst, e.time, len(evs)))
    table = np.array(rows).reshape(len(keep), g.edge_feature_dim)
    return evs, table


def restrict_events(g: DynamicGraph, keep: Iterable[int]) -> DynamicGraph:
    """Same node set and node features, only the events at positions ``keep``."""
    keep = sorted(set(int(i) for i in keep))
    evs, table = _remap_edges(g, keep)
    return DynamicGraph(g.node_count, evs, g.node_features, table)


# --------------------------------------------------------------------------
# loading


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def _parse_id(tok: str, line: int) -> int:
    try:
        val = int(tok)
    except ValueError:
        try:
            f = float(tok)
        except ValueError:
            raise GraphFormatError(f"node id {tok!r} is not numeric", line) from None
        if not f.is_integer():
            raise GraphFormatError(f"node id {tok!r} is not an integer", line) from None
        val = int(f)
    if val < 0:
        raise GraphFormatError(f"node id {tok!r} is negative", line)
    if val > MAX_NODE_ID:
        raise GraphFormatError(f"node id {tok!r} overflows the id range", line)
    return val


def _parse_time(tok: str, line: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise GraphFormatError(f"timestamp {tok!r} is not numeric", line) from None
    if not math.isfinite(val) or val < 0:
        raise GraphFormatError(f"timestamp {tok!r} must be finite and non-negative", line)
    return val


def load_events(source, format: str = "edge_list") -> DynamicGraph:
    """Parse an event file into a :class:`DynamicGraph`.

    ``source`` may be a path, raw bytes or a file object.  ``format`` is
    ``"jodie_csv"`` (header, then ``src,dst,ts,label,f1..fk``) or
    ``"edge_list"`` (``src dst ts`` per line, whitespace separated, no header).
    """
    if format not in ("jodie_csv", "edge_list"):
        raise ValueError(f"unknown format {format!r}")
    fh = _open_text(source)
    try:
        lines = fh.read().splitlines()
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()

    events: list[Event] = []
    feats: list[list[float]] = []
    start = 1 if format == "jodie_csv" else 0
    width = None
    for lineno, raw in enumerate(lines[start:], start=start + 1):
        if not raw.strip():
            continue
        if format == "edge_list":
            toks = raw.split()
            if len(toks) != 3:
                raise GraphFormatError(f"expected 3 fields, got {len(toks)}", lineno)
            u, v = _parse_id(toks[0], lineno), _parse_id(toks[1], lineno)
            events.append(Event(u, v, _parse_time(toks[2], lineno)))
            continue
        toks = [t.strip() for t in raw.split(",")]
        if len(toks) < 4:
            raise GraphFormatError(f"expected at least 4 fields, got {len(toks)}", lineno)
        u, v = _parse_id(toks[0], lineno), _parse_id(toks[1], lineno)
        ts = _parse_time(toks[2], lineno)
        try:
            row = [float(x) for x in toks[4:]]
        except ValueError:
            raise GraphFormatError("non-numeric edge feature", lineno) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise GraphFormatError(f"expected {width} features, got {len(row)}", lineno)
        events.append(Event(u, v, ts, len(feats)))
        feats.append(row)

    node_count = 1 + max((max(e.src, e.dst) for e in events), default=-1)
    edge_table = None
    if format == "jodie_csv" and events:
        edge_table = np.array(feats, dtype=np.float64).reshape(len(events), width)
        if width == 0:
            edge_table = np.zeros((len(events), 1))
    return DynamicGraph(node_count, events, edge_features=edge_table)


def write_edge_list(g: DynamicGraph, stream) -> None:
    """Write ``g`` as an edge_list file with full-precision timestamps."""
    for e in g.events:
        stream.write(f"{int(e.src)} {int(e.dst)} {float(e.time)!r}\n")


# --------------------------------------------------------------------------
# dynamic adjacency tensor


def pair_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class DAT:
    """Sparse dynamic adjacency tensor.

    ``pairs`` maps an unordered pair (stored as ``(min, max)``) to its sorted
    finite timestamps; absent pairs stand for the all-infinity row.  ``T`` is
    the longest sequence length.
    """

    pairs: Mapping[tuple[int, int], np.ndarray]
    T: int
    node_count: int = 0

    def sequence(self, u: int, v: int) -> np.ndarray:
        return self.pairs.get(pair_key(u, v), _EMPTY)

    def count(self, u: int, v: int) -> int:
        return len(self.sequence(u, v))

    def count_before(self, u: int, v: int, t: float) -> int:
        seq = self.sequence(u, v)
        return int(np.searchsorted(seq, t, side="left"))

    def history(self, u: int, v: int, t: float) -> tuple[float, ...]:
        """Finite entries of the historical row (timestamps strictly before ``t``)."""
        seq = self.sequence(u, v)
        return tuple(seq[: int(np.searchsorted(seq, t, side="left"))].tolist())


_EMPTY = np.zeros(0)
_EMPTY.setflags(write=False)


def build_dat(g: DynamicGraph) -> DAT:
    buckets: dict[tuple[int, int], list[float]] = {}
    for e in g.events:
        buckets.setdefault(pair_key(e.src, e.dst), []).append(e.time)
    pairs = {}
    for k, ts in buckets.items():
        arr = np.array(ts, dtype=np.float64)  # already sorted: events are time-ordered
        arr.setflags(write=False)
        pairs[k] = arr
    T = max((len(a) for a in pairs.values()), default=0)
    return DAT(pairs, T, g.node_count)


def hdat_at(dat: DAT, u: int, v: int, t: float) -> np.ndarray:
    """Row ``(u, v)`` of the historical DAT at ``t``: timestamps ``< t``, then infinity."""
    if not math.isfinite(t):
        raise ValueError("query time must be finite")
    out = np.full(dat.T, INF)
    hist = dat.history(u, v, t)
    out[: len(hist)] = hist
    return out


def tit_at(dat: DAT, u: int, v: int, t: float) -> np.ndarray:
    """Row ``(u, v)`` of the time-interval tensor at ``t``."""
    row = hdat_at(dat, u, v, t)
    finite = np.isfinite(row)
    row[finite] = t - row[finite]
    return row


# --------------------------------------------------------------------------
# historical neighbours


@dataclass(frozen=True)
class HistoricalNeighborhood:
    root: int
    t: float
    neighbors: np.ndarray
    times: np.ndarray
    edge_indices: np.ndarray  # -1 where the event has no edge features

    @property
    def entries(self) -> list[tuple[int, float, int | None]]:
        return [
            (int(w), float(ts), None if ix < 0 else int(ix))
            for w, ts, ix in zip(self.neighbors, self.times, self.edge_indices)
        ]

    def __len__(self) -> int:
        return len(self.neighbors)


def historical_neighbors(g: DynamicGraph, u: int, t: float, limit: int | None = None) -> HistoricalNeighborhood:
    """Events incident to ``u`` strictly before ``t``, keeping the ``limit`` most recent."""
    if not 0 <= u < g.node_count:
        raise ValueError(f"node {u} out of range")
    if limit is not None and limit < 1:
        raise ValueError("limit must be positive")
    times = g._incident_times[u]
    hi = bisect_left(times, t) if len(times) < 64 else int(np.searchsorted(times, t, side="left"))
    lo = 0 if limit is None else max(0, hi - limit)
    ix = g._incident[u][lo:hi]
    return HistoricalNeighborhood(
        root=u,
        t=t,
        neighbors=g._incident_other[u][lo:hi],
        times=times[lo:hi],
        edge_indices=g._edge_index[ix],
    )


# --------------------------------------------------------------------------
# brute-force isomorphism oracle


@dataclass
class IsoResult:
    isomorphic: bool
    mapping: tuple[int, ...] | None = None
    explored: int = 0

    def __bool__(self) -> bool:
        return self.isomorphic


def _history_table(g: DynamicGraph, t: float) -> dict[tuple[int, int], tuple[float, ...]]:
    table: dict[tuple[int, int], list[float]] = {}
    for e in g.events:
        if e.time < t:
            table.setdefault(pair_key(e.src, e.dst), []).append(e.time)
    return {k: tuple(v) for k, v in table.items()}


def brute_force_isomorphic_until(
    gA: DynamicGraph,
    gB: DynamicGraph,
    t: float,
    max_nodes: int = DEFAULT_ORACLE_BOUND,
    pin: Mapping[int, int] | None = None,
    compare_features: bool = True,
) -> IsoResult:
    """Exhaustive search for a bijection under which the historical DATs agree.

    ``pin`` forces ``phi(i) = pin[i]``; pinning a node pair of ``gA`` to a pair
    of ``gB`` turns this into the pair-isomorphism check.  Candidate images are
    pruned with a per-node invariant (sorted incident histories and features),
    which never excludes a valid bijection.
    """
    n = gA.node_count
    if max(n, gB.node_count) > max_nodes:
        raise OracleBoundError(f"oracle bound is {max_nodes} nodes, got {max(n, gB.node_count)}")
    if n != gB.node_count:
        return IsoResult(False)
    hA, hB = _history_table(gA, t), _history_table(gB, t)
    if sorted(hA.values()) != sorted(hB.values()):
        return IsoResult(False)

    def invariant(g, h, u):
        inc = sorted(h.get(pair_key(u, w), ()) for w in range(n) if w != u)
        feat = tuple(g.node_features[u].tolist()) if compare_features else ()
        return (h.get((u, u), ()), tuple(inc), feat)

    invA = [invariant(gA, hA, u) for u in range(n)]
    invB = [invariant(gB, hB, u) for u in range(n)]
    if sorted(invA) != sorted(invB):
        return IsoResult(False)
    candidates = [[a for a in range(n) if invB[a] == invA[u]] for u in range(n)]
    pin = dict(pin or {})
    for i, a in pin.items():
        if a not in candidates[i]:
            return IsoResult(False)
        candidates[i] = [a]

    order = sorted(range(n), key=lambda u: len(candidates[u]))
    phi = [-1] * n
    used = [False] * n
    explored = 0

    def extend(pos: int) -> bool:
        nonlocal explored
        if pos == n:
            return True
        i = order[pos]
        for a in candidates[i]:
            if used[a]:
                continue
            explored += 1
            ok = True
            for q in range(pos):
                j = order[q]
                if hA.get(pair_key(i, j), ()) != hB.get(pair_key(a, phi[j]), ()):
                    ok = False
                    break
            if not ok:
                continue
            phi[i] = a
            used[a] = True
            if extend(pos + 1):
                return True
            used[a] = False
            phi[i] = -1
        return False

    if extend(0):
        return IsoResult(True, tuple(phi), explored)
    return IsoResult(False, None, explored)
