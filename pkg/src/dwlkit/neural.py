"""Pair-level transformer link predictor in numpy with hand-written gradients.

Pipeline per target pair ``(u, v, t)``: encoding bundle -> MITE MLP and
Fourier time features -> patching and per-encoding alignment -> pre-norm
transformer blocks -> mean over patches -> output affine -> sigmoid score.

Everything runs in float64.  A batch pads examples to a common patch count;
padded patches are masked out of attention keys and pooling, so a batched
forward agrees with per-example forwards up to summation order.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .encodings import EncodingBundle, TimeEncoding, build_encoding_bundle
from .harness.metrics import MetricsReport, metrics_report
from .harness.splits import SplitSpec, eval_negatives, sample_negatives
from .temporal_graph import DAT, DynamicGraph

LN_EPS = 1e-5
PROB_CLAMP = 1e-12
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
_GELU_C = math.sqrt(2.0 / math.pi)


class NonFiniteActivation(FloatingPointError):
    def __init__(self, where: str):
        super().__init__(f"non-finite activation in {where}")
        self.where = where


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, params: "ModelParams", epoch: int, dump_path: str | None = None):
        super().__init__(message if dump_path is None else f"{message}; state written to {dump_path}")
        self.params = params
        self.epoch = epoch
        self.dump_path = dump_path


# --------------------------------------------------------------------------
# configuration and parameters


@dataclass(frozen=True)
class ModelConfig:
    node_dim: int = 1
    edge_dim: int = 1
    d: int = 50
    d_T: int = 100
    K: int = 32
    d_B: int = 50
    n_layers: int = 2
    n_heads: int = 2
    patch_size: int = 1
    limit: int = 32
    d_out: int | None = None
    use_mite: bool = True

    def __post_init__(self):
        for name in ("node_dim", "edge_dim", "d", "d_T", "K", "d_B", "n_heads", "patch_size", "limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_layers < 0:
            raise ValueError("n_layers must be non-negative")
        if self.d_T % 2:
            raise ValueError("d_T must be even")
        if self.hidden % self.n_heads:
            raise ValueError(f"hidden width {self.hidden} is not divisible by {self.n_heads} heads")

    @property
    def hidden(self) -> int:
        return 4 * self.d

    @property
    def out_dim(self) -> int:
        return self.d if self.d_out is None else self.d_out

    def align_input_dims(self) -> dict[str, int]:
        return {"C": 3 * self.node_dim, "E": self.edge_dim, "T": self.d_T, "M": self.d_B}


def _shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    D, P = cfg.hidden, cfg.patch_size
    s: dict[str, tuple[int, ...]] = {
        "mite.W1": (2 * cfg.K, cfg.d_B),
        "mite.b1": (cfg.d_B,),
        "mite.W2": (cfg.d_B, cfg.d_B),
        "mite.b2": (cfg.d_B,),
        "time.freq": (cfg.d_T // 2,),
    }
    for key, dim in cfg.align_input_dims().items():
        s[f"align.{key}.W"] = (P * dim, cfg.d)
        s[f"align.{key}.b"] = (cfg.d,)
    for l in range(cfg.n_layers):
        p = f"layer{l}."
        s[p + "ln1.g"] = s[p + "ln1.b"] = (D,)
        for name in ("q", "k", "v", "o"):
            s[p + f"attn.W{name}"] = (D, D)
            # a key bias only shifts each query's scores by a constant, which softmax ignores
            if name != "k":
                s[p + f"attn.b{name}"] = (D,)
        s[p + "ln2.g"] = s[p + "ln2.b"] = (D,)
        s[p + "ffn.W1"] = (D, D)
        s[p + "ffn.b1"] = (D,)
        s[p + "ffn.W2"] = (D, D)
        s[p + "ffn.b2"] = (D,)
    s["out.W"] = (D, cfg.out_dim)
    s["out.b"] = (cfg.out_dim,)
    s["score.w"] = (cfg.out_dim,)
    s["score.b"] = (1,)
    return s


class ModelParams:
    """Named float64 parameter blocks plus the config that fixes their shapes."""

    def __init__(self, config: ModelConfig, arrays: dict[str, np.ndarray]):
        expected = _shapes(config)
        if list(arrays) != list(expected):
            missing = set(expected) ^ set(arrays)
            if missing:
                raise ValueError(f"parameter blocks do not match the config: {sorted(missing)}")
            arrays = {k: arrays[k] for k in expected}
        for k, shape in expected.items():
            arr = np.asarray(arrays[k], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"block {k} has shape {arr.shape}, expected {shape}")
            arrays[k] = arr
        self.config = config
        self.arrays = dict(arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    def names(self) -> list[str]:
        return list(self.arrays)

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.config, arrays)

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays.values())

    def equals(self, other: "ModelParams") -> bool:
        return self.config == other.config and all(
            self.arrays[k].tobytes() == other.arrays[k].tobytes() for k in self.arrays
        )


def init_params(config: ModelConfig, seed: int | np.random.Generator = 0) -> ModelParams:
    """Glorot-uniform matrices, zero biases, unit layer-norm gains, geometric frequencies."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in _shapes(config).items():
        leaf = name.rsplit(".", 1)[1]
        if name == "time.freq":
            arrays[name] = TimeEncoding.geometric(config.d_T).frequencies.copy()
        elif leaf == "g":
            arrays[name] = np.ones(shape)
        elif len(shape) == 2 or name == "score.w":
            fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], 1)
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-limit, limit, size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return ModelParams(config, arrays)


def zero_params(config: ModelConfig) -> ModelParams:
    return ModelParams(config, {k: np.zeros(s) for k, s in _shapes(config).items()})


def save_params(params: ModelParams, path: str | Path) -> tuple[Path, Path]:
    """Write a flat little-endian float64 ``.bin`` and a ``.json`` manifest next to it."""
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    manifest_path = path.with_suffix(".json")
    blocks = []
    offset = 0
    chunks = []
    for name, arr in params.arrays.items():
        blocks.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
        chunks.append(arr.astype("<f8").ravel())
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    bin_path.write_bytes(flat.tobytes())
    manifest = {"dtype": "<f8", "count": int(offset), "config": asdict(params.config), "blocks": blocks}
    manifest_path.write_text(json.dumps(manifest, indent=1))
    return bin_path, manifest_path


def load_params(path: str | Path) -> ModelParams:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    flat = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype=manifest["dtype"]).astype(np.float64)
    if flat.size != manifest["count"]:
        raise ValueError(f"binary holds {flat.size} values, manifest says {manifest['count']}")
    arrays = {}
    for b in manifest["blocks"]:
        n = int(np.prod(b["shape"])) if b["shape"] else 1
        arrays[b["name"]] = flat[b["offset"] : b["offset"] + n].reshape(b["shape"]).copy()
    return ModelParams(ModelConfig(**manifest["config"]), arrays)


# --------------------------------------------------------------------------
# primitives


def gelu(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tanh-approximated Gaussian-error unit; also returns the tanh term for backward."""
    th = np.tanh(_GELU_C * (x + 0.044715 * x**3))
    return 0.5 * x * (1.0 + th), th


def _gelu_grad(x: np.ndarray, th: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th**2) * _GELU_C * (1.0 + 3 * 0.044715 * x**2)


def _layer_norm(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc**2).mean(-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_back(dy, g, cache):
    xhat, inv = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axes)
    db = dy.sum(axes)
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dg, db


def _affine_back(x, dy, W):
    """Gradients of ``y = x @ W + b`` for inputs with arbitrary leading axes."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, x2.T @ dy2, dy2.sum(0)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# --------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    X_C: np.ndarray  # B x R x d_C, R = n_p * P
    X_E: np.ndarray
    dt: np.ndarray  # B x R
    X_M: np.ndarray  # B x R x 2K
    row_mask: np.ndarray  # B x R
    patch_mask: np.ndarray  # B x n_p
    n_p: int
    P: int

    @property
    def size(self) -> int:
        return self.X_C.shape[0]


def collate(bundles: Sequence[EncodingBundle], cfg: ModelConfig) -> Batch:
    if not bundles:
        raise ValueError("empty batch")
    P = cfg.patch_size
    per = [max(1, -(-b.S // P)) for b in bundles]
    n_p = max(per)
    R = n_p * P
    B = len(bundles)
    dims = cfg.align_input_dims()
    X_C = np.zeros((B, R, dims["C"]))
    X_E = np.zeros((B, R, dims["E"]))
    X_M = np.zeros((B, R, 2 * cfg.K))
    dt = np.zeros((B, R))
    row_mask = np.zeros((B, R))
    patch_mask = np.zeros((B, n_p))
    for i, b in enumerate(bundles):
        S = b.S
        if b.X_C.shape[1] != dims["C"] or b.X_E.shape[1] != dims["E"] or b.X_M.shape[1] != 2 * cfg.K:
            raise ValueError(
                f"bundle widths C={b.X_C.shape[1]} E={b.X_E.shape[1]} M={b.X_M.shape[1]} "
                f"do not match the model (C={dims['C']}, E={dims['E']}, M={2 * cfg.K})"
            )
        X_C[i, :S] = b.X_C
        X_E[i, :S] = b.X_E
        if cfg.use_mite:
            X_M[i, :S] = b.X_M
        dt[i, :S] = b.dt
        row_mask[i, :S] = 1.0
        patch_mask[i, : per[i]] = 1.0
    return Batch(X_C, X_E, dt, X_M, row_mask, patch_mask, n_p, P)


# --------------------------------------------------------------------------
# forward / backward


def _check(x, where):
    if not np.all(np.isfinite(x)):
        raise NonFiniteActivation(where)


def _forward(params: ModelParams, batch: Batch):
    # overflow surfaces as NonFiniteActivation from the explicit checks
    with np.errstate(over="ignore", invalid="ignore"):
        return _forward_unchecked(params, batch)


def _forward_unchecked(params: ModelParams, batch: Batch):
    cfg = params.config
    p = params.arrays
    B, R, n_p = batch.size, batch.X_C.shape[1], batch.n_p
    mask = batch.row_mask[..., None]
    cache: dict = {}

    a1 = batch.X_M @ p["mite.W1"] + p["mite.b1"]
    g1, th1 = gelu(a1)
    m = (g1 @ p["mite.W2"] + p["mite.b2"]) * mask
    cache["mite"] = (a1, g1, th1)

    phase = batch.dt[..., None] * p["time.freq"]
    scale = math.sqrt(2.0 / cfg.d_T)
    cos, sin = np.cos(phase), np.sin(phase)
    te = np.empty((B, R, cfg.d_T))
    te[..., 0::2] = scale * cos
    te[..., 1::2] = scale * sin
    te *= mask
    cache["time"] = (cos, sin, scale)

    patched = {
        "C": batch.X_C.reshape(B, n_p, -1),
        "E": batch.X_E.reshape(B, n_p, -1),
        "T": te.reshape(B, n_p, -1),
        "M": m.reshape(B, n_p, -1),
    }
    cache["patched"] = patched
    H = np.concatenate([patched[k] @ p[f"align.{k}.W"] + p[f"align.{k}.b"] for k in "CETM"], axis=-1)
    _check(H, "alignment")

    D, nh = cfg.hidden, cfg.n_heads
    dh = D // nh
    key_ok = batch.patch_mask[:, None, None, :] > 0
    layers = []
    for l in range(cfg.n_layers):
        pre = f"layer{l}."
        A, ln1 = _layer_norm(H, p[pre + "ln1.g"], p[pre + "ln1.b"])

        def heads(x):
            return x.reshape(B, n_p, nh, dh).transpose(0, 2, 1, 3)

        q = heads(A @ p[pre + "attn.Wq"] + p[pre + "attn.bq"])
        k = heads(A @ p[pre + "attn.Wk"])
        v = heads(A @ p[pre + "attn.Wv"] + p[pre + "attn.bv"])
        scores = np.where(key_ok, q @ k.transpose(0, 1, 3, 2) / math.sqrt(dh), -np.inf)
        scores = scores - scores.max(-1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(-1, keepdims=True)
        o = (att @ v).transpose(0, 2, 1, 3).reshape(B, n_p, D)
        Ht = H + o @ p[pre + "attn.Wo"] + p[pre + "attn.bo"]
        Bn, ln2 = _layer_norm(Ht, p[pre + "ln2.g"], p[pre + "ln2.b"])
        f1 = Bn @ p[pre + "ffn.W1"] + p[pre + "ffn.b1"]
        gf, thf = gelu(f1)
        H_next = Ht + gf @ p[pre + "ffn.W2"] + p[pre + "ffn.b2"]
        _check(H_next, f"layer {l}")
        layers.append((H, A, ln1, q, k, v, att, o, Bn, ln2, f1, gf, thf))
        H = H_next

    pm = batch.patch_mask
    count = pm.sum(1, keepdims=True)
    pooled = (H * pm[..., None]).sum(1) / count
    emb = pooled @ p["out.W"] + p["out.b"]
    logit = emb @ p["score.w"] + p["score.b"][0]
    _check(logit, "output")
    cache.update(layers=layers, pooled=pooled, emb=emb, count=count)
    return logit, emb, cache


def _backward(params: ModelParams, batch: Batch, cache: dict, dlogit: np.ndarray) -> dict[str, np.ndarray]:
    cfg = params.config
    p = params.arrays
    g: dict[str, np.ndarray] = {}
    B, n_p = batch.size, batch.n_p
    D, nh = cfg.hidden, cfg.n_heads
    dh = D // nh

    emb, pooled = cache["emb"], cache["pooled"]
    g["score.w"] = emb.T @ dlogit
    g["score.b"] = np.array([dlogit.sum()])
    demb = dlogit[:, None] * p["score.w"][None, :]
    dpooled, g["out.W"], g["out.b"] = _affine_back(pooled, demb, p["out.W"])
    dH = batch.patch_mask[..., None] / cache["count"][:, :, None] * dpooled[:, None, :]

    for l in reversed(range(cfg.n_layers)):
        pre = f"layer{l}."
        H, A, ln1, q, k, v, att, o, Bn, ln2, f1, gf, thf = cache["layers"][l]
        dHt = dH
        dgf, g[pre + "ffn.W2"], g[pre + "ffn.b2"] = _affine_back(gf, dH, p[pre + "ffn.W2"])
        df1 = dgf * _gelu_grad(f1, thf)
        dBn, g[pre + "ffn.W1"], g[pre + "ffn.b1"] = _affine_back(Bn, df1, p[pre + "ffn.W1"])
        dx, g[pre + "ln2.g"], g[pre + "ln2.b"] = _layer_norm_back(dBn, p[pre + "ln2.g"], ln2)
        dHt = dHt + dx

        do, g[pre + "attn.Wo"], g[pre + "attn.bo"] = _affine_back(o, dHt, p[pre + "attn.Wo"])
        do = do.reshape(B, n_p, nh, dh).transpose(0, 2, 1, 3)
        datt = do @ v.transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ do
        dscores = att * (datt - (datt * att).sum(-1, keepdims=True)) / math.sqrt(dh)
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q

        def merge(x):
            return x.transpose(0, 2, 1, 3).reshape(B, n_p, D)

        dA = np.zeros_like(A)
        for name, dpart in (("q", dq), ("k", dk), ("v", dv)):
            dx, g[pre + f"attn.W{name}"], db = _affine_back(A, merge(dpart), p[pre + f"attn.W{name}"])
            if name != "k":
                g[pre + f"attn.b{name}"] = db
            dA += dx
        dx, g[pre + "ln1.g"], g[pre + "ln1.b"] = _layer_norm_back(dA, p[pre + "ln1.g"], ln1)
        dH = dHt + dx

    patched = cache["patched"]
    d = cfg.d
    dpatched = {}
    for i, key in enumerate("CETM"):
        dZ = dH[..., i * d : (i + 1) * d]
        dpatched[key], g[f"align.{key}.W"], g[f"align.{key}.b"] = _affine_back(patched[key], dZ, p[f"align.{key}.W"])

    R = batch.X_C.shape[1]
    mask = batch.row_mask[..., None]
    dte = dpatched["T"].reshape(B, R, cfg.d_T) * mask
    cos, sin, scale = cache["time"]
    dphase = scale * (cos * dte[..., 1::2] - sin * dte[..., 0::2])
    g["time.freq"] = (dphase * batch.dt[..., None]).reshape(-1, cfg.d_T // 2).sum(0)

    a1, g1, th1 = cache["mite"]
    dm = dpatched["M"].reshape(B, R, cfg.d_B) * mask
    dg1, g["mite.W2"], g["mite.b2"] = _affine_back(g1, dm, p["mite.W2"])
    da1 = dg1 * _gelu_grad(a1, th1)
    _, g["mite.W1"], g["mite.b1"] = _affine_back(batch.X_M, da1, p["mite.W1"])
    return {k: g[k] for k in params.names()}


def _softplus(z):
    return np.logaddexp(0.0, z)


# clamping p to [c, 1 - c] is clamping the logit to [-LOGIT_CLAMP, LOGIT_CLAMP]
LOGIT_CLAMP = math.log((1.0 - PROB_CLAMP) / PROB_CLAMP)


def _bce(logit: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-example loss, probability and d loss / d logit with clamped probabilities.

    Evaluated in logit space (``-ln p = softplus(-z)``) so saturated scores keep
    full relative precision.
    """
    zc = np.clip(logit, -LOGIT_CLAMP, LOGIT_CLAMP)
    loss = y * _softplus(-zc) + (1.0 - y) * _softplus(zc)
    prob = sigmoid(logit)
    # p - y, written per label to avoid cancellation near p = 1
    dlogit = np.where(y > 0.5, -sigmoid(-logit), prob)
    dlogit = np.where(np.abs(logit) < LOGIT_CLAMP, dlogit, 0.0)
    return loss, prob, dlogit


def forward(params: ModelParams, bundle: EncodingBundle, P: int | None = None) -> tuple[np.ndarray, float]:
    """Pair embedding and link probability for a single bundle."""
    if P is not None and P != params.config.patch_size:
        raise ValueError(f"parameters were built for patch size {params.config.patch_size}, got {P}")
    logit, emb, _ = _forward(params, collate([bundle], params.config))
    return emb[0], float(probability(logit)[0])


def probability(logit) -> np.ndarray:
    """Sigmoid clamped like the loss, so reported scores stay inside (0, 1)."""
    return np.clip(sigmoid(logit), PROB_CLAMP, 1.0 - PROB_CLAMP)


def predict_logits(params: ModelParams, bundles: Sequence[EncodingBundle], batch_size: int = 200) -> np.ndarray:
    out = []
    for i in range(0, len(bundles), batch_size):
        logit, _, _ = _forward(params, collate(bundles[i : i + batch_size], params.config))
        out.append(logit)
    return np.concatenate(out) if out else np.zeros(0)


def predict(params: ModelParams, bundles: Sequence[EncodingBundle], batch_size: int = 200) -> np.ndarray:
    return probability(predict_logits(params, bundles, batch_size))


def _split_examples(examples) -> tuple[list[EncodingBundle], np.ndarray]:
    examples = list(examples)
    if not examples:
        raise ValueError("empty batch")
    bundles = [b for b, _ in examples]
    y = np.array([float(lab) for _, lab in examples])
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return bundles, y


def loss_only(params: ModelParams, examples) -> float:
    bundles, y = _split_examples(examples)
    logit, _, _ = _forward(params, collate(bundles, params.config))
    return float(_bce(logit, y)[0].mean())


def loss_and_grad(params: ModelParams, examples) -> tuple[float, dict[str, np.ndarray]]:
    """Mean BCE over ``(bundle, label)`` pairs and its gradient for every block."""
    bundles, y = _split_examples(examples)
    batch = collate(bundles, params.config)
    logit, _, cache = _forward(params, batch)
    loss, _, dlogit = _bce(logit, y)
    grads = _backward(params, batch, cache, dlogit / len(y))
    return float(loss.mean()), grads


# --------------------------------------------------------------------------
# gradient verification


@dataclass
class GradReport:
    errors: dict[str, float]
    eps: float
    checked: int = 0

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def worst(self) -> tuple[str, float]:
        name = max(self.errors, key=self.errors.get)
        return name, self.errors[name]


def finite_diff_check(
    params: ModelParams,
    example,
    eps: float = 1e-5,
    max_per_block: int | None = None,
    seed: int = 0,
) -> GradReport:
    """Compare analytic gradients with central differences, block by block.

    ``example`` is one ``(bundle, label)`` pair or a list of them.  With
    ``max_per_block`` set, a seeded random subset of each block's entries is
    checked; otherwise every entry.  The relative error uses the denominator
    ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    examples = [example] if isinstance(example, tuple) and isinstance(example[0], EncodingBundle) else list(example)
    _, grads = loss_and_grad(params, examples)
    rng = np.random.default_rng(seed)
    work = params.copy()
    errors: dict[str, float] = {}
    checked = 0
    for name in params.names():
        arr = work.arrays[name]
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_block is not None and flat.size > max_per_block:
            idx = np.sort(rng.choice(flat.size, size=max_per_block, replace=False))
        worst = 0.0
        for i in idx:
            keep = flat[i]
            flat[i] = keep + eps
            up = loss_only(work, examples)
            flat[i] = keep - eps
            down = loss_only(work, examples)
            flat[i] = keep
            num = (up - down) / (2 * eps)
            ana = grads[name].reshape(-1)[i]
            err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
            worst = max(worst, err)
        errors[name] = worst
        checked += len(idx)
    return GradReport(errors, eps, checked)


# --------------------------------------------------------------------------
# training


@dataclass
class AdamState:
    lr: float
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams, lr: float) -> "AdamState":
        return cls(lr, {k: np.zeros_like(a) for k, a in params.arrays.items()},
                   {k: np.zeros_like(a) for k, a in params.arrays.items()})

    def update(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        b1, b2 = ADAM_BETAS
        self.step += 1
        c1 = 1.0 - b1**self.step
        c2 = 1.0 - b2**self.step
        for k, gk in grads.items():
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * gk
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * gk * gk
            params.arrays[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + ADAM_EPS)


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 200
    epochs: int = 50
    patience: int = 10
    seed: int = 0
    limit: int = 32
    patch_size: int = 1
    d: int = 50
    d_T: int = 100
    K: int = 32
    d_B: int = 50
    n_layers: int = 2
    n_heads: int = 2
    d_out: int = 0  # 0 means d
    use_mite: bool = True
    dump_path: str = ""

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        for name in ("batch_size", "patience", "limit", "patch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")

    def model_config(self, g: DynamicGraph) -> ModelConfig:
        return ModelConfig(
            node_dim=g.node_feature_dim,
            edge_dim=g.edge_feature_dim,
            d=self.d,
            d_T=self.d_T,
            K=self.K,
            d_B=self.d_B,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            patch_size=self.patch_size,
            limit=self.limit,
            d_out=self.d_out or None,
            use_mite=self.use_mite,
        )

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            kind = types[key]
            if kind == "bool":
                if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"line {lineno}: {key} needs a boolean")
                values[key] = val.lower() in ("true", "1", "yes")
            elif kind == "int":
                values[key] = int(val)
            elif kind == "float":
                values[key] = float(val)
            else:
                values[key] = val
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


def _bundle_builder(g: DynamicGraph, dat: DAT, cfg: ModelConfig) -> Callable[[int, int, float], EncodingBundle]:
    # X_T is recomputed inside the model from dt with the learned frequencies
    enc = TimeEncoding.geometric(cfg.d_T)

    def build(u: int, v: int, t: float) -> EncodingBundle:
        return build_encoding_bundle(g, dat, (u, v), t, cfg.limit, cfg.K, enc)

    return build


def build_bundles(g: DynamicGraph, dat: DAT, cfg: ModelConfig, src, dst, times) -> list[EncodingBundle]:
    build = _bundle_builder(g, dat, cfg)
    return [build(int(u), int(v), float(t)) for u, v, t in zip(src, dst, times)]


def _section_examples(g, dat, cfg, split: SplitSpec, section: str):
    pos = split.section(section)
    if len(pos) == 0:
        raise ValueError(f"section {section!r} is empty")
    neg_dst = eval_negatives(g, split, section)
    pos_b = build_bundles(g, dat, cfg, g.src[pos], g.dst[pos], g.times[pos])
    neg_b = build_bundles(g, dat, cfg, g.src[pos], neg_dst, g.times[pos])
    return pos_b, neg_b


def _report(params, pos_b, neg_b, setting, batch_size) -> MetricsReport:
    # logits rank like exact probabilities without ties from float saturation
    scores = predict_logits(params, pos_b + neg_b, batch_size)
    labels = np.concatenate([np.ones(len(pos_b)), np.zeros(len(neg_b))])
    return metrics_report(scores, labels, setting)


def evaluate(
    params: ModelParams,
    g: DynamicGraph,
    dat: DAT,
    split: SplitSpec,
    section: str = "test",
    batch_size: int = 200,
) -> MetricsReport:
    """AP and AUC over a section's positives and one fixed negative per positive."""
    pos_b, neg_b = _section_examples(g, dat, params.config, split, section)
    setting = "inductive" if section.startswith("inductive") else "transductive"
    return _report(params, pos_b, neg_b, setting, batch_size)


def train_step(params: ModelParams, opt: AdamState, examples) -> float:
    loss, grads = loss_and_grad(params, examples)
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    opt.update(params, grads)
    return loss


def train(
    g: DynamicGraph,
    dat: DAT,
    split: SplitSpec,
    config: TrainConfig,
    log: Callable[[dict], None] | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Chronological mini-batch training with early stopping on validation AP.

    Every training positive is paired with one negative sharing its source and
    time, with a uniform random destination redrawn each epoch.  Returns the
    best-validation parameters and one history record per epoch.
    """
    cfg = config.model_config(g)
    params = init_params(cfg, np.random.default_rng([config.seed, 0]))
    history: list[dict] = []
    if config.epochs == 0:
        return params, history
    rng = np.random.default_rng([config.seed, 1])
    opt = AdamState.for_params(params, config.lr)
    train_pos = split.train
    if len(train_pos) == 0:
        raise ValueError("training section is empty")
    build = _bundle_builder(g, dat, cfg)
    pos_bundles = [build(int(g.src[i]), int(g.dst[i]), float(g.times[i])) for i in train_pos]
    val_pos, val_neg = _section_examples(g, dat, cfg, split, "val")

    best = params.copy()
    best_ap = -math.inf
    stale = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        neg_dst = sample_negatives(g, train_pos, rng)
        losses = []
        for lo in range(0, len(train_pos), config.batch_size):
            hi = min(lo + config.batch_size, len(train_pos))
            negs = [build(int(g.src[i]), int(d), float(g.times[i])) for i, d in zip(train_pos[lo:hi], neg_dst[lo:hi])]
            examples = [(b, 1) for b in pos_bundles[lo:hi]] + [(b, 0) for b in negs]
            try:
                losses.append(train_step(params, opt, examples))
            except FloatingPointError as exc:
                dump = None
                if config.dump_path:
                    dump = str(save_params(params, config.dump_path)[0])
                raise TrainingDiverged(f"training diverged in epoch {epoch}: {exc}", params, epoch, dump) from exc
        val = _report(params, val_pos, val_neg, "transductive", config.batch_size)
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_ap": val.ap,
            "val_auc": val.auc,
            "seconds": time.perf_counter() - started,
        }
        history.append(record)
        if log is not None:
            log(record)
        if val.ap > best_ap:
            best_ap, best, stale = val.ap, params.copy(), 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best, history


def deterministic_history(history: Iterable[dict]) -> list[dict]:
    """History records without wall-clock fields, for run-to-run comparison."""
    return [{k: v for k, v in rec.items() if k != "seconds"} for rec in history]
