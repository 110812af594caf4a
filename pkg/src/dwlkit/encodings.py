"""Neighbourhood feature pipeline for node-pair models.

Everything here is parameter-free apart from the alignment weights handed to
:func:`patch_and_align`; the learnable MITE projection and time frequencies live
in :mod:`dwlkit.neural`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .temporal_graph import DAT, DynamicGraph, historical_neighbors, pair_key


def _recent_intervals(dat: DAT, a: int, b: int, t: float, K: int | None) -> np.ndarray:
    seq = dat.pairs.get(pair_key(a, b))
    if seq is None:
        return np.zeros(0)
    hi = int(np.searchsorted(seq, t, side="left"))
    lo = 0 if K is None else max(0, hi - K)
    return t - seq[lo:hi]


def mite_raw(dat: DAT, u: int, v: int, w: int, t: float, K: int) -> np.ndarray:
    """Log-normalised bi-interaction intervals of ``w`` with the pair ``(u, v)``.

    Returns ``2K`` values: the first half holds ``ln(1 + t - t')`` for the ``K``
    most recent interactions of ``(w, u)`` before ``t`` (oldest first), the
    second half the same for ``(w, v)``.  Unused slots are 0, which no real
    interval can produce because ``t' < t``.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if not math.isfinite(t):
        raise ValueError("query time must be finite")
    out = np.zeros(2 * K)
    left = _recent_intervals(dat, w, u, t, K)
    right = _recent_intervals(dat, w, v, t, K)
    out[: len(left)] = np.log1p(left)
    out[K : K + len(right)] = np.log1p(right)
    return out


def ncoe(dat: DAT, u: int, v: int, w: int, t: float) -> tuple[int, int]:
    """Co-occurrence counts of ``w`` with ``u`` and with ``v`` before ``t``."""
    return dat.count_before(w, u, t), dat.count_before(w, v, t)


@dataclass
class TimeEncoding:
    """Fourier time features ``sqrt(2/d_T) [cos(w_i dt), sin(w_i dt)]_i``."""

    frequencies: np.ndarray

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=np.float64)
        if self.frequencies.ndim != 1 or len(self.frequencies) == 0:
            raise ValueError("frequencies must be a non-empty vector")

    @classmethod
    def geometric(cls, d_T: int, decades: float = 9.0) -> "TimeEncoding":
        # frequencies 1, ..., 10**-decades, evenly spaced in log scale
        if d_T < 2 or d_T % 2:
            raise ValueError("d_T must be a positive even integer")
        return cls(1.0 / 10 ** np.linspace(0.0, decades, d_T // 2))

    @property
    def dim(self) -> int:
        return 2 * len(self.frequencies)

    def __call__(self, dt) -> np.ndarray:
        return time_encode(dt, self)


def time_encode(dt, enc: TimeEncoding | np.ndarray) -> np.ndarray:
    """Encode one interval or an array of intervals; output has trailing dim ``d_T``."""
    freqs = enc.frequencies if isinstance(enc, TimeEncoding) else np.asarray(enc, dtype=np.float64)
    dt = np.asarray(dt, dtype=np.float64)
    phase = dt[..., None] * freqs
    out = np.empty(dt.shape + (2 * len(freqs),))
    out[..., 0::2] = np.cos(phase)
    out[..., 1::2] = np.sin(phase)
    return out * math.sqrt(2.0 / out.shape[-1])


@dataclass
class EncodingBundle:
    """Per-neighbour encodings of a target pair's joint neighbourhood.

    Rows list the events of ``N(u, t)`` oldest first, then those of
    ``N(v, t)``.  ``dt`` keeps the raw intervals so models with learnable time
    frequencies can re-encode them.
    """

    X_C: np.ndarray
    X_E: np.ndarray
    X_T: np.ndarray
    X_M: np.ndarray
    dt: np.ndarray
    neighbors: np.ndarray
    pair: tuple[int, int]
    t: float

    @property
    def S(self) -> int:
        return self.X_C.shape[0]


def build_encoding_bundle(
    g: DynamicGraph,
    dat: DAT,
    pair: tuple[int, int],
    t: float,
    limit: int,
    K: int,
    enc: TimeEncoding,
) -> EncodingBundle:
    u, v = pair
    nu = historical_neighbors(g, u, t, limit)
    nv = historical_neighbors(g, v, t, limit)
    ws = np.concatenate([nu.neighbors, nv.neighbors]).astype(np.int64)
    times = np.concatenate([nu.times, nv.times])
    eix = np.concatenate([nu.edge_indices, nv.edge_indices])
    S = len(ws)

    X = g.node_features
    X_C = np.concatenate(
        [X[ws], np.broadcast_to(X[u], (S, X.shape[1])), np.broadcast_to(X[v], (S, X.shape[1]))],
        axis=1,
    )
    X_E = np.zeros((S, g.edge_feature_dim))
    has = eix >= 0
    X_E[has] = g.edge_features[eix[has]]
    dt = t - times
    X_T = time_encode(dt, enc)

    X_M = np.zeros((S, 2 * K))
    cache: dict[int, np.ndarray] = {}
    for i, w in enumerate(ws.tolist()):
        row = cache.get(w)
        if row is None:
            row = cache[w] = mite_raw(dat, u, v, w, t, K)
        X_M[i] = row
    return EncodingBundle(X_C, X_E, X_T, X_M, dt, ws, (u, v), float(t))


def patchify(X: np.ndarray, P: int) -> np.ndarray:
    """Reshape ``S x d`` rows into ``ceil(S/P) x (P*d)`` patches, zero padded.

    An empty sequence yields a single all-zero patch.
    """
    if P < 1:
        raise ValueError("patch size must be positive")
    S, d = X.shape
    n_p = max(1, -(-S // P))
    out = np.zeros((n_p * P, d))
    out[:S] = X
    return out.reshape(n_p, P * d)


@dataclass
class PatchedEncodings:
    Z: np.ndarray
    n_patches: int
    P: int


ALIGN_KEYS = ("C", "E", "T", "M")


def patch_and_align(
    bundle: EncodingBundle,
    P: int,
    weights: dict[str, tuple[np.ndarray, np.ndarray]],
    X_M: np.ndarray | None = None,
) -> PatchedEncodings:
    """Patch each encoding, project it with ``X W + b`` and concatenate.

    ``weights`` maps ``"C" | "E" | "T" | "M"`` to ``(W, b)`` with ``W`` of shape
    ``(P * d_*, d)``.  ``X_M`` overrides the raw MITE rows (for instance with
    their learned projection).
    """
    mats = {"C": bundle.X_C, "E": bundle.X_E, "T": bundle.X_T, "M": bundle.X_M if X_M is None else X_M}
    parts = []
    for key in ALIGN_KEYS:
        W, b = weights[key]
        Xp = patchify(mats[key], P)
        if W.shape[0] != Xp.shape[1] or b.shape != (W.shape[1],):
            raise ValueError(
                f"alignment weights for {key} have shape {W.shape}/{b.shape}, "
                f"input patches have width {Xp.shape[1]}"
            )
        parts.append(Xp @ W + b)
    Z = np.concatenate(parts, axis=1)
    return PatchedEncodings(Z, Z.shape[0], P)
