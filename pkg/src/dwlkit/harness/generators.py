"""Seeded instance generators for property suites and toy link prediction."""
from __future__ import annotations

import numpy as np

from ..temporal_graph import DynamicGraph, Event


def random_dynamic_graph(
    n: int,
    m: int,
    t_max: float = 10.0,
    seed: int | np.random.Generator = 0,
    discrete: bool = False,
    feature_values: int = 0,
) -> DynamicGraph:
    """``m`` events between uniformly chosen distinct node pairs.

    Times are uniform in ``(0, t_max)``; with ``discrete=True`` they are drawn
    from ``{1, ..., floor(t_max) - 1}`` instead, which produces the ties and
    repeated histories that exercise colour refinement.  ``feature_values > 0``
    attaches a one-column node feature with that many distinct values.
    """
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    rng = np.random.default_rng(seed)
    evs = []
    for _ in range(m):
        if n == 1:
            u = v = 0
        else:
            u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
        if discrete:
            ts = float(rng.integers(1, max(2, int(t_max))))
        else:
            ts = float(rng.uniform(0.0, t_max))
            while ts == 0.0:
                ts = float(rng.uniform(0.0, t_max))
        evs.append(Event(u, v, ts))
    feats = None
    if feature_values > 0:
        feats = rng.integers(0, feature_values, size=(n, 1)).astype(np.float64)
    return DynamicGraph(n, evs, feats)


def perturb(g: DynamicGraph, rng: np.random.Generator, t_max: float = 10.0) -> DynamicGraph:
    """Relabel ``g`` randomly and, half of the time, nudge one event.

    Gives graph pairs that are often isomorphic and otherwise near misses.
    """
    perm = rng.permutation(g.node_count).tolist()
    out = g.relabel(perm)
    if not out.events or rng.random() < 0.5:
        return out
    evs = list(out.events)
    i = int(rng.integers(len(evs)))
    e = evs[i]
    choice = rng.integers(3)
    if choice == 0:
        evs[i] = Event(e.src, e.dst, float(rng.integers(1, max(2, int(t_max)))))
    elif choice == 1 and g.node_count > 2:
        w = int(rng.choice([x for x in range(g.node_count) if x != e.src]))
        evs[i] = Event(e.src, w, e.time)
    else:
        del evs[i]
    return DynamicGraph(out.node_count, evs, out.node_features)


def random_graph_pair(rng: np.random.Generator, max_nodes: int = 6, max_events: int = 10,
                      t_max: float = 6.0, features: bool | None = None):
    """A pair ``(gA, gB)`` plus query time for the randomized property suites."""
    n = int(rng.integers(1, max_nodes + 1))
    m = int(rng.integers(0, max_events + 1))
    if features is None:
        features = rng.random() < 0.3
    fv = 2 if features else 0
    gA = random_dynamic_graph(n, m, t_max, rng, discrete=True, feature_values=fv)
    if rng.random() < 0.8:
        gB = perturb(gA, rng, t_max)
    else:
        gB = random_dynamic_graph(n, m, t_max, rng, discrete=True, feature_values=fv)
    t = float(rng.integers(1, int(t_max) + 1)) + 0.5
    return gA, gB, t


def triangle_graph(
    n: int = 60,
    m: int = 2000,
    t_max: float = 10_000.0,
    seed: int = 0,
    n_triangles: int = 40,
    background: float = 0.3,
    max_gap: float = 5.0,
) -> tuple[DynamicGraph, list[int]]:
    """Event stream with a pool of triangles that keep recurring.

    Each motif draws a triangle ``(u, w, v)`` from a fixed pool and emits the
    wedge ``u-w``, ``w-v`` followed by the closing edge ``u-v``, with gaps of
    at most ``max_gap``.  A ``background`` fraction of events connects uniform
    random pairs.  Returns the graph and the positions of closing events.
    """
    if n < 3:
        raise ValueError("need at least 3 nodes")
    rng = np.random.default_rng(seed)
    pool = [tuple(int(x) for x in rng.choice(n, size=3, replace=False)) for _ in range(n_triangles)]
    raw: list[tuple[int, int, float, bool]] = []
    while len(raw) < m:
        t0 = float(rng.uniform(0.0, t_max))
        if rng.random() < background:
            a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
            raw.append((a, b, t0, False))
            continue
        u, w, v = pool[int(rng.integers(len(pool)))]
        g1, g2, g3 = np.sort(rng.uniform(0.0, max_gap, size=3))
        if not g1 < g2 < g3:
            continue
        raw.append((u, w, t0 + g1, False))
        raw.append((w, v, t0 + g2, False))
        raw.append((u, v, t0 + g3, True))
    raw = raw[:m]
    order = sorted(range(len(raw)), key=lambda i: raw[i][2])
    evs = [Event(raw[i][0], raw[i][1], float(raw[i][2])) for i in order]
    closing = [k for k, i in enumerate(order) if raw[i][3]]
    return DynamicGraph(n, evs), closing
