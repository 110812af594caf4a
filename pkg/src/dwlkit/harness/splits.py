"""Chronological splits, inductive node masking and negative sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..temporal_graph import DynamicGraph

TRAIN_FRACTION = 0.70
VAL_FRACTION = 0.85


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    """Event positions per section.

    ``train`` excludes events touching masked nodes; ``val`` and ``test`` keep
    every event in their time ranges, and the inductive sections are the
    subsets touching a masked node.
    """

    t_total: float
    val_start: float
    test_start: float
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    masked_nodes: frozenset = frozenset()
    removed_train: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    inductive_val: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    inductive_test: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    seed: int = 0

    def section(self, name: str) -> np.ndarray:
        sections = {
            "train": self.train,
            "val": self.val,
            "test": self.test,
            "inductive-val": self.inductive_val,
            "inductive-test": self.inductive_test,
        }
        if name not in sections:
            raise KeyError(f"unknown section {name!r}")
        return sections[name]

    def to_dict(self) -> dict:
        return {
            "t_total": self.t_total,
            "val_start": self.val_start,
            "test_start": self.test_start,
            "train": self.train.tolist(),
            "val": self.val.tolist(),
            "test": self.test.tolist(),
            "masked_nodes": sorted(self.masked_nodes),
            "removed_train": self.removed_train.tolist(),
            "inductive_val": self.inductive_val.tolist(),
            "inductive_test": self.inductive_test.tolist(),
            "seed": self.seed,
        }


def chronological_split(g: DynamicGraph, seed: int = 0) -> SplitSpec:
    """Half-open time split ``[0, .7T)``, ``[.7T, .85T)``, ``[.85T, T]``.

    ``T`` is the largest event time.  Raises :class:`SplitError` for fewer than
    three events, a single shared timestamp, or an empty section.
    """
    if len(g) < 3:
        raise SplitError("need at least 3 events to split")
    times = g.times
    if times.min() == times.max():
        raise SplitError("all events share one timestamp; the split is degenerate")
    T = float(times.max())
    val_start, test_start = TRAIN_FRACTION * T, VAL_FRACTION * T
    idx = np.arange(len(times))
    train = idx[times < val_start]
    val = idx[(times >= val_start) & (times < test_start)]
    test = idx[times >= test_start]
    for name, sec in (("train", train), ("val", val), ("test", test)):
        if len(sec) == 0:
            raise SplitError(f"the {name} section is empty")
    return SplitSpec(T, val_start, test_start, train, val, test, seed=seed)


def inductive_mask(split: SplitSpec, g: DynamicGraph, fraction: float = 0.10, seed: int = 0) -> SplitSpec:
    """Mask ``ceil(fraction * |test nodes|)`` nodes sampled from the test section.

    Their events leave the training section; validation and test keep their
    events and additionally record the subsets touching a masked node.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    if len(split.test) == 0:
        raise SplitError("test section is empty")
    test_nodes = np.unique(np.concatenate([g.src[split.test], g.dst[split.test]]))
    k = math.ceil(fraction * len(test_nodes))
    rng = np.random.default_rng(seed)
    masked = np.sort(rng.choice(test_nodes, size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)
    mask = np.zeros(g.node_count, dtype=bool)
    mask[masked] = True

    def touching(ix):
        return ix[mask[g.src[ix]] | mask[g.dst[ix]]]

    removed = touching(split.train)
    return replace(
        split,
        train=np.setdiff1d(split.train, removed),
        removed_train=removed,
        masked_nodes=frozenset(int(x) for x in masked),
        inductive_val=touching(split.val),
        inductive_test=touching(split.test),
        seed=seed,
    )


def sample_negatives(g: DynamicGraph, positions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One corrupted destination per positive: uniform over nodes other than the source."""
    src = g.src[positions]
    if g.node_count < 2:
        raise ValueError("negative sampling needs at least two nodes")
    draw = rng.integers(0, g.node_count - 1, size=len(positions))
    # skip over the source id to stay uniform on the other n - 1 nodes
    return draw + (draw >= src)


def eval_negatives(g: DynamicGraph, split: SplitSpec, section: str) -> np.ndarray:
    """Negatives for an evaluation section, fixed by the split seed."""
    offsets = {"train": 0, "val": 1, "test": 2, "inductive-val": 3, "inductive-test": 4}
    rng = np.random.default_rng([split.seed, offsets[section]])
    return sample_negatives(g, split.section(section), rng)
