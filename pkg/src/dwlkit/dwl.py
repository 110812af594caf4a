"""Dynamic Weisfeiler-Lehman colour refinement and symbolic model simulators.

Colours are dense integer ids handed out by a :class:`ColorTable`.  Every
signature is a plain tuple of earlier ids and exact timestamp (or interval)
tuples, so the table realises an injective hash.  Two graphs compared in one
run must share a table; ids from different tables mean nothing to each other.

Interaction histories enter signatures as the finite prefix of the historical
DAT row.  The infinity padding is implicit, which keeps rows from graphs with
different maximum interaction counts comparable.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Sequence

import numpy as np

from .encodings import mite_raw
from .temporal_graph import DAT, DynamicGraph, Event, build_dat, historical_neighbors, pair_key


class ColorTable:
    """Injective map from signatures to dense colour ids (insertion order)."""

    def __init__(self):
        self._ids: dict[Hashable, int] = {}

    def __call__(self, signature: Hashable) -> int:
        cid = self._ids.get(signature)
        if cid is None:
            cid = self._ids[signature] = len(self._ids)
        return cid

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def next_id(self) -> int:
        return len(self._ids)

    def __contains__(self, signature: Hashable) -> bool:
        return signature in self._ids


@dataclass
class Coloring:
    """Colours per refinement round; ``rounds[j]`` maps entity -> colour id."""

    kind: str  # "node" or "pair"
    t: float
    rounds: list[dict] = field(default_factory=list)
    stable: bool = False

    @property
    def rounds_run(self) -> int:
        return len(self.rounds) - 1

    @property
    def final(self) -> dict:
        return self.rounds[-1]

    def at(self, j: int) -> dict:
        """Colours of round ``j``; past a stable end the last partition persists."""
        if j < len(self.rounds):
            return self.rounds[j]
        if not self.stable:
            raise IndexError(f"round {j} was not computed")
        return self.rounds[-1]

    def histogram(self, j: int) -> Counter:
        return Counter(self.rounds[j].values())

    def num_classes(self, j: int = -1) -> int:
        return len(set(self.rounds[j].values()))


@dataclass(frozen=True)
class Verdict:
    non_isomorphic: bool
    round: int  # first distinguishing round, or rounds run when undecided

    @property
    def name(self) -> str:
        return "NonIsomorphic" if self.non_isomorphic else "PossiblyIsomorphic"

    def to_dict(self) -> dict:
        key = "round" if self.non_isomorphic else "rounds_run"
        return {"verdict": self.name, key: self.round}


# --------------------------------------------------------------------------
# partition helpers


def same_partition(a: dict, b: dict) -> bool:
    """Whether two colourings of the same entities induce the same partition."""
    if a.keys() != b.keys():
        raise ValueError("colourings cover different entities")
    fwd: dict = {}
    bwd: dict = {}
    for x, ca in a.items():
        cb = b[x]
        if fwd.setdefault(ca, cb) != cb or bwd.setdefault(cb, ca) != ca:
            return False
    return True


def refines(fine: dict, coarse: dict) -> bool:
    """``fine[x] == fine[y]`` implies ``coarse[x] == coarse[y]`` for all x, y."""
    if fine.keys() != coarse.keys():
        raise ValueError("colourings cover different entities")
    seen: dict = {}
    for x, cf in fine.items():
        if seen.setdefault(cf, coarse[x]) != coarse[x]:
            return False
    return True


def merge_colorings(colorings: Sequence[dict]) -> dict:
    """Tag entity keys by graph index so several colourings form one partition."""
    return {(gi, x): c for gi, col in enumerate(colorings) for x, c in col.items()}


# --------------------------------------------------------------------------
# initial labellings


def _feature_key(g: DynamicGraph, u: int) -> tuple:
    return tuple(g.node_features[u].tolist())


def node_labels(g: DynamicGraph, init) -> dict[int, Hashable]:
    if init == "constant":
        return {u: 0 for u in range(g.node_count)}
    if init == "features":
        return {u: _feature_key(g, u) for u in range(g.node_count)}
    if callable(init):
        return {u: init(g, u) for u in range(g.node_count)}
    raise ValueError(f"unknown init {init!r}")


def pair_labels(g: DynamicGraph, init) -> dict[tuple[int, int], Hashable]:
    n = g.node_count
    if init == "constant":
        return {(u, v): 0 for u in range(n) for v in range(n)}
    if init == "features":
        # [X_u || X_v] only; the pair's own history enters through later rounds
        return {(u, v): _feature_key(g, u) + _feature_key(g, v) for u in range(n) for v in range(n)}
    if callable(init):
        return {(u, v): init(g, (u, v)) for u in range(n) for v in range(n)}
    raise ValueError(f"unknown init {init!r}")


# --------------------------------------------------------------------------
# k-DWL


class _History:
    """Finite HDAT prefixes of one graph at a fixed query time."""

    def __init__(self, g: DynamicGraph, t: float, dat: DAT | None = None):
        self.g = g
        self.t = t
        dat = dat if dat is not None else build_dat(g)
        self.rows: dict[tuple[int, int], tuple[float, ...]] = {}
        for key, seq in dat.pairs.items():
            hi = int(np.searchsorted(seq, t, side="left"))
            if hi:
                self.rows[key] = tuple(seq[:hi].tolist())
        self.neigh: list[list[int]] = []
        for u in range(g.node_count):
            nb = historical_neighbors(g, u, t)
            self.neigh.append(nb.neighbors.tolist())

    def row(self, u: int, v: int) -> tuple[float, ...]:
        return self.rows.get(pair_key(u, v), ())

    def intervals(self, u: int, v: int) -> tuple[float, ...]:
        return tuple(self.t - x for x in self.row(u, v))


def _one_dwl_step(h: _History, prev: dict, table: ColorTable, multiplicity: str, include_history: bool) -> dict:
    out = {}
    for u in range(h.g.node_count):
        nbrs = h.neigh[u] if multiplicity == "event" else sorted(set(h.neigh[u]))
        if include_history:
            items = sorted((prev[w], h.row(u, w)) for w in nbrs)
        else:
            items = sorted((prev[w],) for w in nbrs)
        out[u] = table(("1dwl", prev[u], tuple(items)))
    return out


def _two_dwl_step(h: _History, prev: dict, table: ColorTable, multiplicity: str, include_history: bool) -> dict:
    n = h.g.node_count
    out = {}
    for u, v in product(range(n), repeat=2):
        if include_history:
            items = sorted((prev[(w, v)], prev[(u, w)], h.row(w, u), h.row(w, v)) for w in range(n))
        else:
            items = sorted((prev[(w, v)], prev[(u, w)]) for w in range(n))
        out[(u, v)] = table(("2dwl", prev[(u, v)], tuple(items)))
    return out


def dwl_refine_many(
    graphs: Sequence[DynamicGraph],
    t: float,
    k: int = 1,
    init="constant",
    max_rounds: int | None = None,
    table: ColorTable | None = None,
    multiplicity: str = "event",
    include_history: bool = True,
) -> list[Coloring]:
    """Run k-DWL on several graphs in lock step with one shared colour table.

    Refinement stops once the joint partition over all graphs stops splitting
    or after ``max_rounds`` rounds.  The default is the total entity count
    over all graphs, which always reaches the stable partition.
    ``multiplicity="event"`` lets a neighbour contribute one multiset entry per
    interaction; ``"neighbor"`` deduplicates.  ``include_history=False`` drops
    the timestamp terms and exists only to check that the property suite
    notices a broken test.
    """
    if k not in (1, 2):
        raise ValueError("only k = 1 and k = 2 are supported")
    if multiplicity not in ("event", "neighbor"):
        raise ValueError(f"unknown multiplicity {multiplicity!r}")
    table = table if table is not None else ColorTable()
    hist = [_History(g, t) for g in graphs]
    labels = [node_labels(g, init) if k == 1 else pair_labels(g, init) for g in graphs]
    current = [{x: table(("init", lab)) for x, lab in ls.items()} for ls in labels]
    colorings = [Coloring("node" if k == 1 else "pair", t, [c]) for c in current]
    if max_rounds is None:
        max_rounds = sum(g.node_count ** k for g in graphs)
    step = _one_dwl_step if k == 1 else _two_dwl_step

    n_classes = len({c for col in current for c in col.values()})
    if n_classes == 0:
        for col in colorings:
            col.stable = True
    for _ in range(max_rounds if n_classes else 0):
        current = [step(h, prev, table, multiplicity, include_history) for h, prev in zip(hist, current)]
        for col, c in zip(colorings, current):
            col.rounds.append(c)
        new_classes = len({c for col in current for c in col.values()})
        if new_classes == n_classes:
            for col in colorings:
                col.stable = True
            break
        n_classes = new_classes
    return colorings


def dwl_refine(g: DynamicGraph, t: float, k: int = 1, init="constant", max_rounds: int | None = None,
               table: ColorTable | None = None, multiplicity: str = "event") -> Coloring:
    return dwl_refine_many([g], t, k, init, max_rounds, table, multiplicity)[0]


def compare_histograms(colorings: Sequence[Coloring]) -> Verdict:
    a, b = colorings
    last = min(a.rounds_run, b.rounds_run)
    for j in range(last + 1):
        if a.histogram(j) != b.histogram(j):
            return Verdict(True, j)
    return Verdict(False, last)


def dwl_distinguish(
    gA: DynamicGraph,
    gB: DynamicGraph,
    t: float,
    k: int = 1,
    max_rounds: int | None = None,
    init="constant",
    multiplicity: str = "event",
    include_history: bool = True,
) -> Verdict:
    """Run k-DWL on both graphs in parallel and compare colour multisets per round.

    Graphs with different node counts differ already at round 0 because their
    entity sets have different sizes.
    """
    cols = dwl_refine_many([gA, gB], t, k, init, max_rounds, ColorTable(), multiplicity, include_history)
    return compare_histograms(cols)


# --------------------------------------------------------------------------
# static 1-WL


def static_wl1(g: DynamicGraph, rounds: int, table: ColorTable | None = None, init="constant") -> Coloring:
    """Classic 1-WL on the multigraph obtained by forgetting timestamps."""
    table = table if table is not None else ColorTable()
    mult: list[Counter] = [Counter() for _ in range(g.node_count)]
    for e in g.events:
        mult[e.src][e.dst] += 1
        if e.src != e.dst:
            mult[e.dst][e.src] += 1
    cur = {u: table(("init", lab)) for u, lab in node_labels(g, init).items()}
    col = Coloring("node", float("inf"), [cur])
    for _ in range(rounds):
        cur = {
            u: table(("wl1", cur[u], tuple(sorted((cur[w], m) for w, m in mult[u].items()))))
            for u in range(g.node_count)
        }
        col.rounds.append(cur)
    return col


def wl1_distinguish(gA: DynamicGraph, gB: DynamicGraph, rounds: int | None = None) -> Verdict:
    table = ColorTable()
    if rounds is None:
        rounds = max(gA.node_count, gB.node_count)
    return compare_histograms([static_wl1(gA, rounds, table), static_wl1(gB, rounds, table)])


# --------------------------------------------------------------------------
# symbolic model simulators


def dygnn_sim(
    g: DynamicGraph,
    t: float,
    rounds: int,
    table: ColorTable,
    mite_target: tuple[int, int] | None = None,
    message: str = "interval",
    dat: DAT | None = None,
) -> Coloring:
    """Message-passing node model with injective AGG/UPDATE.

    Each round hashes a node's previous colour with the multiset of
    ``(neighbour colour, message)`` over its historical events.  With
    ``message="interval"`` the message is the single interval ``t - t'``;
    ``"sequence"`` sends the whole interval row of the pair instead.  When
    ``mite_target`` is set, initial colours also hash each node's MITE vector
    relative to that pair.
    """
    if message not in ("interval", "sequence"):
        raise ValueError(f"unknown message format {message!r}")
    dat = dat if dat is not None else build_dat(g)
    h = _History(g, t, dat)
    K = max(1, dat.T)
    cur = {}
    for u in range(g.node_count):
        sig: tuple = ("feat", _feature_key(g, u))
        if mite_target is not None:
            a, b = mite_target
            sig += (tuple(mite_raw(dat, a, b, u, t, K).tolist()),)
        cur[u] = table(sig)
    col = Coloring("node", t, [cur])
    events = [historical_neighbors(g, u, t) for u in range(g.node_count)]
    for _ in range(rounds):
        nxt = {}
        for u in range(g.node_count):
            nb = events[u]
            if message == "interval":
                items = sorted((cur[w], t - ts) for w, ts in zip(nb.neighbors.tolist(), nb.times.tolist()))
            else:
                items = sorted((cur[w], h.intervals(u, w)) for w in nb.neighbors.tolist())
            nxt[u] = table(("dygnn", cur[u], tuple(items)))
        cur = nxt
        col.rounds.append(cur)
    return col


def sim_pair_color(col: Coloring, pair: tuple[int, int], j: int = -1) -> tuple[int, int]:
    """Pair readout of a node model: the two endpoint colours."""
    c = col.rounds[j]
    return (c[pair[0]], c[pair[1]])


def hopedgn_symbolic(
    g: DynamicGraph,
    t: float,
    rounds: int,
    mode: str = "global",
    table: ColorTable | None = None,
    init="features",
) -> Coloring:
    """Pair-level model whose projections, AGG and UPDATE are injective hashes.

    Round ``l`` hashes the pair's previous colour with the multiset of
    ``(h(u, w), h(v, w), B_uw, B_vw)`` over replacing nodes ``w``: every node in
    ``global`` mode, the joint historical neighbourhood (one entry per event)
    in ``local`` mode.
    """
    if mode not in ("global", "local"):
        raise ValueError(f"unknown mode {mode!r}")
    table = table if table is not None else ColorTable()
    n = g.node_count
    h = _History(g, t)
    cur = {s: table(("init", lab)) for s, lab in pair_labels(g, init).items()}
    col = Coloring("pair", t, [cur])
    all_nodes = list(range(n))
    iv = {(a, b): h.intervals(a, b) for a in range(n) for b in range(n)}
    for _ in range(rounds):
        nxt = {}
        for u, v in product(range(n), repeat=2):
            ws = all_nodes if mode == "global" else h.neigh[u] + h.neigh[v]
            items = sorted((cur[(u, w)], cur[(v, w)], iv[(u, w)], iv[(v, w)]) for w in ws)
            nxt[(u, v)] = table(("hope", cur[(u, v)], tuple(items)))
        cur = nxt
        col.rounds.append(cur)
    return col


# --------------------------------------------------------------------------
# reference constructions

NODE_A, NODE_B, NODE_C, NODE_D, NODE_E, NODE_F = range(6)


def twin_paths_graph(t1: float = 1.0, t2: float = 2.0) -> DynamicGraph:
    """Two disjoint temporal paths ``A -t1- B -t2- C`` and ``F -t1- E -t2- D``.

    Queried after ``t2``, ``C`` and ``D`` are automorphic, yet ``(A, C)``
    share the common past neighbour ``B`` while ``(A, D)`` share none.
    """
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    evs = [
        Event(NODE_A, NODE_B, t1),
        Event(NODE_F, NODE_E, t1),
        Event(NODE_B, NODE_C, t2),
        Event(NODE_E, NODE_D, t2),
    ]
    return DynamicGraph(6, evs)

