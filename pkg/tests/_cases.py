"""Seeded model instances shared by the unit and acceptance tests."""
import numpy as np

from dwlkit.encodings import EncodingBundle, TimeEncoding, build_encoding_bundle
from dwlkit.harness.generators import random_dynamic_graph
from dwlkit.neural import ModelConfig, ModelParams, forward, init_params
from dwlkit.temporal_graph import build_dat


def randomize(params: ModelParams, rng: np.random.Generator) -> ModelParams:
    """Keep Glorot matrices; draw biases, gains and frequencies at random."""
    arrays = {}
    for name, a in params.arrays.items():
        if name == "time.freq":
            arrays[name] = rng.uniform(0.2, 2.0, a.shape)
        elif name.endswith(".g"):
            arrays[name] = rng.uniform(0.5, 1.5, a.shape)
        elif a.ndim == 2 or name == "score.w":
            arrays[name] = a
        else:
            arrays[name] = rng.normal(0.0, 0.1, a.shape)
    return params.with_arrays(arrays)


def bundle_with_patches(rng, P, n_patches, K, limit=3, d_T=4, feature_values=0):
    """A bundle for pair (0, 1) from a random graph whose joint neighbourhood spans ``n_patches``."""
    for _ in range(500):
        g = random_dynamic_graph(6, int(rng.integers(4, 30)), t_max=5.0, seed=rng, feature_values=feature_values)
        b = build_encoding_bundle(g, build_dat(g), (0, 1), 5.0, limit, K, TimeEncoding.geometric(d_T))
        if (n_patches - 1) * P < b.S <= n_patches * P:
            return g, b
    raise RuntimeError("no graph with the requested neighbourhood size")


def tiny_case(seed: int):
    """d=4, d_T=4, K=2, one layer, one head, three patches; random P, graph, label and parameters."""
    rng = np.random.default_rng(seed)
    P = int(rng.integers(1, 3))
    _, bundle = bundle_with_patches(rng, P, 3, K=2)
    cfg = ModelConfig(d=4, d_T=4, K=2, d_B=3, n_layers=1, n_heads=1, patch_size=P, limit=3)
    params = randomize(init_params(cfg, rng), rng)
    label = int(rng.integers(2))
    return params, bundle, label


def patch_permutation_gap(params: ModelParams, b, n_patches: int, rng) -> float:
    """Largest change in embedding or score when whole patches are shuffled."""
    P = params.config.patch_size
    pad = n_patches * P - b.S

    def padded(x):
        return np.concatenate([x, np.zeros((pad,) + x.shape[1:])])

    # pad to whole patches explicitly so permuted patches stay aligned; padded rows get dt = 0
    cols = {k: padded(getattr(b, k)) for k in ("X_C", "X_E", "X_T", "X_M", "dt", "neighbors")}
    base = EncodingBundle(**cols, pair=b.pair, t=b.t)
    perm = rng.permutation(n_patches)
    order = np.concatenate([np.arange(i * P, (i + 1) * P) for i in perm])
    shuffled = EncodingBundle(**{k: v[order] for k, v in cols.items()}, pair=b.pair, t=b.t)
    e1, s1 = forward(params, base)
    e2, s2 = forward(params, shuffled)
    return float(max(np.max(np.abs(e1 - e2)), abs(s1 - s2)))
