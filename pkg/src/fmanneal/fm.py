"""Factorization-machine surrogate model.

Second-order FM over binary inputs: prediction, sum-of-squares loss,
smoothing / L2 regularizers, closed-form gradients, and full-batch
AMSGRAD training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FmParams",
    "TrainConfig",
    "AmsgradState",
    "FmGradients",
    "init_params",
    "predict",
    "predict_batch",
    "loss_mse",
    "fsr_penalty",
    "l2_penalty",
    "total_loss",
    "gradients",
    "amsgrad_step",
    "train",
]

# AMSGRAD decay rates / epsilon: conventional defaults, fixed.
BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8

Adjacency = "np.ndarray | list[tuple[int, int]]"


@dataclass(frozen=True)
class FmParams:
    """Model parameters: scalar bias `a`, linear weights `b` (n_bits,),
    and rank-K factor vectors `v` (n_bits, rank).

    Energy model: a + sum_i b_i x_i + sum_{i<j} <v_i, v_j> x_i x_j.
    """

    a: float
    b: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if v.ndim != 2 or b.ndim != 1 or b.shape[0] != v.shape[0]:
            raise ValueError(f"inconsistent parameter shapes: b {b.shape}, v {v.shape}")
        if v.shape[1] < 1:
            raise ValueError("rank must be >= 1")
        if not (np.isfinite(self.a) and np.isfinite(b).all() and np.isfinite(v).all()):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "v", v)

    @property
    def n_bits(self) -> int:
        return self.b.shape[0]

    @property
    def rank(self) -> int:
        return self.v.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch training settings."""

    learning_rate: float = 0.1
    n_updates: int = 1000
    lambda_sr: float = 0.0
    lambda_l2: float = 0.0
    init_scale: float = 0.1
    seed: int = 0
    warm_start: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.n_updates < 1:
            raise ValueError("n_updates must be >= 1")
        if self.lambda_sr < 0 or self.lambda_l2 < 0:
            raise ValueError("regularization strengths must be >= 0")
        if self.init_scale <= 0:
            raise ValueError("init_scale must be > 0")


@dataclass(frozen=True)
class FmGradients:
    da: float
    db: np.ndarray
    dv: np.ndarray


@dataclass
class AmsgradState:
    """AMSGRAD accumulators over the flattened parameter vector
    (a, b, v rows), plus the step counter.

    `v2max` is element-wise non-decreasing across steps.
    """

    m: np.ndarray
    v2: np.ndarray
    v2max: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n_bits: int, rank: int) -> "AmsgradState":
        n = 1 + n_bits + n_bits * rank
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), 0)


def _pack(a: float, b: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.concatenate(([a], b, v.ravel()))


def _unpack(theta: np.ndarray, n_bits: int, rank: int) -> FmParams:
    a = float(theta[0])
    b = theta[1 : 1 + n_bits].copy()
    v = theta[1 + n_bits :].reshape(n_bits, rank).copy()
    return FmParams(a, b, v)


def init_params(n_bits: int, rank: int, init_scale: float = 0.1, seed: int = 0) -> FmParams:
    """Zero bias, b and v drawn i.i.d. from N(0, init_scale^2).

    Deterministic per seed: identical seeds give bit-identical parameters.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if init_scale <= 0:
        raise ValueError("init_scale must be > 0")
    rng = np.random.default_rng(seed)
    b = rng.normal(0.0, init_scale, size=n_bits)
    v = rng.normal(0.0, init_scale, size=(n_bits, rank))
    return FmParams(0.0, b, v)


def _as_bit_matrix(x: np.ndarray, n_bits: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != n_bits:
        raise ValueError(f"bit-vector length {X.shape[1]} != n_bits {n_bits}")
    return X


def predict_batch(params: FmParams, X: np.ndarray) -> np.ndarray:
    """Model output for each row of the (m, n_bits) bit matrix X.

    Uses the O(N*K) factorized pair sum
    0.5 * sum_k [ (sum_i v_ik x_i)^2 - sum_i v_ik^2 x_i ]
    (x_i^2 = x_i for binary inputs).
    """
    X = _as_bit_matrix(X, params.n_bits)
    s = X @ params.v
    pair = 0.5 * ((s * s).sum(axis=1) - X @ (params.v * params.v).sum(axis=1))
    return params.a + X @ params.b + pair


def predict(params: FmParams, x: np.ndarray) -> float:
    """Model output for a single bit-vector."""
    return float(predict_batch(params, np.asarray(x))[0])


def loss_mse(params: FmParams, X: np.ndarray, y: np.ndarray) -> float:
    """Sum of squared residuals over the dataset (a sum, not a mean)."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("dataset must be non-empty")
    r = predict_batch(params, X) - y
    return float(r @ r)


def _adjacency_arrays(adjacency, n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = np.asarray(list(adjacency), dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n_bits):
        raise ValueError("adjacency index out of range")
    return pairs[:, 0], pairs[:, 1]


def fsr_penalty(params: FmParams, adjacency) -> float:
    """Smoothing penalty sum_{(p,q)} ||v_p - v_q||^2 + (b_p - b_q)^2.

    Zero iff every adjacent pair has equal b and equal v rows.
    """
    p, q = _adjacency_arrays(adjacency, params.n_bits)
    if p.size == 0:
        return 0.0
    dv = params.v[p] - params.v[q]
    db = params.b[p] - params.b[q]
    return float((dv * dv).sum() + db @ db)


def l2_penalty(params: FmParams) -> float:
    """sum_p ||v_p||^2 + b_p^2; the bias a is excluded."""
    return float((params.v * params.v).sum() + params.b @ params.b)


def total_loss(
    params: FmParams,
    X: np.ndarray,
    y: np.ndarray,
    adjacency=(),
    lambda_sr: float = 0.0,
    lambda_l2: float = 0.0,
) -> float:
    """Sum-of-squares loss plus weighted regularizers."""
    out = loss_mse(params, X, y)
    if lambda_sr:
        out += lambda_sr * fsr_penalty(params, adjacency)
    if lambda_l2:
        out += lambda_l2 * l2_penalty(params)
    return out


def gradients(
    params: FmParams,
    X: np.ndarray,
    y: np.ndarray,
    adjacency=(),
    lambda_sr: float = 0.0,
    lambda_l2: float = 0.0,
) -> FmGradients:
    """Exact gradients of the regularized loss.

    Data terms: da = sum_m 2 r_m; db_l = sum_m 2 r_m x_l;
    dv_l = sum_m 2 r_m x_l (sum_i v_i x_i - v_l x_l).
    The smoothing term contributes +-2 lambda_sr (b_p - b_q) per adjacent
    pair (and the analogue for v); L2 contributes 2 lambda_l2 b, 2 lambda_l2 v.
    A column of X that is identically zero yields exactly zero db_l / dv_l
    when both lambdas vanish.
    """
    X = _as_bit_matrix(X, params.n_bits)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("dataset must be non-empty")
    s = X @ params.v
    pred = params.a + X @ params.b + 0.5 * ((s * s).sum(axis=1) - X @ (params.v * params.v).sum(axis=1))
    r = pred - y
    xtr = X.T @ r
    da = 2.0 * float(r.sum())
    db = 2.0 * xtr
    dv = 2.0 * (X.T @ (r[:, None] * s) - xtr[:, None] * params.v)
    if lambda_sr:
        p, q = _adjacency_arrays(adjacency, params.n_bits)
        if p.size:
            diff_b = params.b[p] - params.b[q]
            diff_v = params.v[p] - params.v[q]
            np.add.at(db, p, 2.0 * lambda_sr * diff_b)
            np.add.at(db, q, -2.0 * lambda_sr * diff_b)
            np.add.at(dv, p, 2.0 * lambda_sr * diff_v)
            np.add.at(dv, q, -2.0 * lambda_sr * diff_v)
    if lambda_l2:
        db += 2.0 * lambda_l2 * params.b
        dv += 2.0 * lambda_l2 * params.v
    return FmGradients(da, db, dv)


def amsgrad_step(
    state: AmsgradState,
    params: FmParams,
    grads: FmGradients,
    learning_rate: float,
) -> tuple[FmParams, AmsgradState]:
    """One AMSGRAD update (bias-corrected moments, running-max second moment).

    A coordinate with zero gradient and zero accumulated moments is left
    bit-identical.
    """
    n, k = params.n_bits, params.rank
    if grads.db.shape != (n,) or grads.dv.shape != (n, k):
        raise ValueError("gradient shapes do not match parameters")
    g = _pack(grads.da, grads.db, grads.dv)
    if state.m.shape != g.shape:
        raise ValueError("optimizer state does not match parameter count")
    t = state.step + 1
    m = BETA1 * state.m + (1.0 - BETA1) * g
    v2 = BETA2 * state.v2 + (1.0 - BETA2) * g * g
    v2max = np.maximum(state.v2max, v2)
    m_hat = m / (1.0 - BETA1**t)
    v_hat = v2max / (1.0 - BETA2**t)
    theta = _pack(params.a, params.b, params.v)
    theta = theta - learning_rate * m_hat / (np.sqrt(v_hat) + EPS)
    return _unpack(theta, n, k), AmsgradState(m, v2, v2max, t)


def train(
    params: FmParams,
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    adjacency=(),
) -> tuple[FmParams, np.ndarray]:
    """Run config.n_updates full-batch AMSGRAD iterations on the
    regularized loss; returns final parameters and the per-iteration
    total-loss history (loss evaluated before each update).

    Deterministic: no randomness beyond the caller-supplied params.
    """
    X = _as_bit_matrix(X, params.n_bits)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("dataset must be non-empty")
    n, k = params.n_bits, params.rank
    lam_sr, lam_l2 = config.lambda_sr, config.lambda_l2
    p_idx, q_idx = _adjacency_arrays(adjacency, n)
    use_sr = lam_sr > 0 and p_idx.size > 0

    a = float(params.a)
    b = params.b.copy()
    v = params.v.copy()
    m = np.zeros(1 + n + n * k)
    v2 = np.zeros_like(m)
    v2max = np.zeros_like(m)
    lr = config.learning_rate
    Xt = np.ascontiguousarray(X.T)
    history = np.empty(config.n_updates)

    for it in range(config.n_updates):
        s = X @ v
        pred = a + X @ b + 0.5 * ((s * s).sum(axis=1) - X @ (v * v).sum(axis=1))
        r = pred - y
        loss = float(r @ r)
        xtr = Xt @ r
        da = 2.0 * float(r.sum())
        db = 2.0 * xtr
        dv = 2.0 * (Xt @ (r[:, None] * s) - xtr[:, None] * v)
        if use_sr:
            diff_b = b[p_idx] - b[q_idx]
            diff_v = v[p_idx] - v[q_idx]
            loss += lam_sr * (float((diff_v * diff_v).sum()) + float(diff_b @ diff_b))
            np.add.at(db, p_idx, 2.0 * lam_sr * diff_b)
            np.add.at(db, q_idx, -2.0 * lam_sr * diff_b)
            np.add.at(dv, p_idx, 2.0 * lam_sr * diff_v)
            np.add.at(dv, q_idx, -2.0 * lam_sr * diff_v)
        if lam_l2:
            loss += lam_l2 * (float((v * v).sum()) + float(b @ b))
            db += 2.0 * lam_l2 * b
            dv += 2.0 * lam_l2 * v
        history[it] = loss

        t = it + 1
        g = np.concatenate(([da], db, dv.ravel()))
        m = BETA1 * m + (1.0 - BETA1) * g
        v2 = BETA2 * v2 + (1.0 - BETA2) * g * g
        np.maximum(v2max, v2, out=v2max)
        step = lr * (m / (1.0 - BETA1**t)) / (np.sqrt(v2max / (1.0 - BETA2**t)) + EPS)
        a -= float(step[0])
        b -= step[1 : 1 + n]
        v -= step[1 + n :].reshape(n, k)

    return FmParams(a, b, v), history
