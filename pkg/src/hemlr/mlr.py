"""Plaintext reference trainer for multiclass logistic regression.

Implements the softmax log-likelihood, the sigmoid-likelihood loss
family, the fixed-Hessian preconditioner and the momentum update that
the encrypted path must reproduce. The weight matrix W is c x (1+d),
one row per class; the gradient is always evaluated at the momentum
iterate V.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from hemlr.data import Dataset
from hemlr.errors import DegenerateLikelihood, DimensionMismatch
from hemlr.sigmoid_poly import PolyApprox, poly_eval, sigmoid


class Optimizer(enum.Enum):
    RAW_NAG = "raw-nag"
    SIGMOID_NAG = "sigmoid-nag"
    SIGMOID_NAG_QG = "sigmoid-nag-qg"


class LossKind(enum.Enum):
    SOFTMAX_LL = "softmax"
    SIGMOID_LL = "sigmoid-ll"
    LOG_ABS_ERROR = "log-abs-error"
    SQUARED_ERROR = "squared-error"
    MEAN_LOG_ABS_ERROR = "mean-log-abs-error"


@dataclass(frozen=True)
class Preconditioner:
    """Rows of B are identical; entry j inverts the absolute row sum of
    the fixed Hessian bound for feature j."""

    B: np.ndarray
    eps: float


@dataclass(frozen=True)
class NagState:
    V: np.ndarray
    W: np.ndarray
    alpha0: float
    alpha1: float
    eta: float
    gamma: float
    count: int


def _check_dims(W: np.ndarray, ds: Dataset) -> None:
    if W.shape != (ds.c, ds.d + 1):
        raise DimensionMismatch(
            f"W is {W.shape}, expected {(ds.c, ds.d + 1)}")


def scores(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    return X @ W.T


def apply_activation(activation, Z: np.ndarray, clamp: bool = True) -> np.ndarray:
    """Elementwise activation: exact sigmoid (None), a PolyApprox, or
    any callable."""
    if activation is None:
        return sigmoid(Z)
    if isinstance(activation, PolyApprox):
        return poly_eval(activation, Z, clamp=clamp)
    return activation(Z)


def softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_loglik(W: np.ndarray, ds: Dataset) -> float:
    """ln L = sum_i [x_i . w_{y_i} - ln sum_k exp(x_i . w_k)], stabilized
    by max subtraction inside the log-sum-exp."""
    _check_dims(W, ds)
    Z = scores(W, ds.X)
    m = Z.max(axis=1)
    lse = m + np.log(np.exp(Z - m[:, None]).sum(axis=1))
    return float((Z[np.arange(ds.n), ds.Y] - lse).sum())


def sle_loss(W: np.ndarray, ds: Dataset, kind: LossKind,
             activation=None, clamp: bool = True) -> float:
    """Sigmoid-likelihood loss family over all (example, class) pairs."""
    _check_dims(W, ds)
    Z = scores(W, ds.X)
    if kind is LossKind.SIGMOID_LL:
        # sum_i ln sigmoid(s_{i, y_i}); stable via -log(1 + e^{-z})
        z = Z[np.arange(ds.n), ds.Y]
        return float(-np.logaddexp(0.0, -z).sum())
    S = apply_activation(activation, Z, clamp=clamp)
    if kind is LossKind.SQUARED_ERROR:
        return float(((ds.Ybar - S) ** 2).sum())
    if kind in (LossKind.LOG_ABS_ERROR, LossKind.MEAN_LOG_ABS_ERROR):
        gap = np.abs(ds.Ybar - S)
        if (gap < 1e-300).any():
            raise DegenerateLikelihood("|ybar - sigmoid| underflowed to 0")
        total = float(np.log(gap).sum())
        return total / ds.n if kind is LossKind.MEAN_LOG_ABS_ERROR else total
    raise ValueError(f"unsupported kind for sle_loss: {kind}")


def sle_gradient(W: np.ndarray, ds: Dataset, activation=None,
                 clamp: bool = True) -> np.ndarray:
    """g = (Ybar - act(X W^T))^T X, shape c x (1+d)."""
    _check_dims(W, ds)
    S = apply_activation(activation, scores(W, ds.X), clamp=clamp)
    return (ds.Ybar - S).T @ ds.X


def softmax_gradient(W: np.ndarray, ds: Dataset) -> np.ndarray:
    """Ascent gradient of the softmax log-likelihood."""
    _check_dims(W, ds)
    return (ds.Ybar - softmax(scores(W, ds.X))).T @ ds.X


def build_preconditioner(ds: Dataset, eps: float = 1e-10,
                         loss_scale: float = 1.0) -> Preconditioner:
    """Invert the absolute row sums of the fixed Hessian bound -X^T X / 4.

    loss_scale is the constant multiplying the loss (1 for the summed
    loss, 1/n for the mean loss); both the bound and eps scale with it,
    so the preconditioner scales inversely and the preconditioned
    gradient is invariant.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    H = -0.25 * (ds.X.T @ ds.X)
    row_abs = np.abs(H).sum(axis=0)
    b0 = 1.0 / (eps + row_abs)
    B = np.tile(b0 / loss_scale, (ds.c, 1))
    return Preconditioner(B=B, eps=eps)


def make_nag_state(W0: np.ndarray) -> NagState:
    a0 = 0.01
    a1 = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * a0 * a0))
    return NagState(V=W0.copy(), W=W0.copy(), alpha0=a0, alpha1=a1,
                    eta=float("nan"), gamma=float("nan"), count=1)


def nag_step(state: NagState, G: np.ndarray, n: int,
             rate_plus_one: bool = True) -> NagState:
    """One momentum update.

    G is the (possibly preconditioned) ascent direction evaluated at V.
    The preconditioned variant steps by (1+gamma); the plain variants
    drop the +1 and step by gamma alone.
    """
    eta = (1.0 - state.alpha0) / state.alpha1
    gamma = 1.0 / (n * state.count)
    rate = 1.0 + gamma if rate_plus_one else gamma
    w_temp = state.W + rate * G
    W_new = (1.0 - eta) * w_temp + eta * state.V
    V_new = w_temp
    a0 = state.alpha1
    a1 = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * a0 * a0))
    return NagState(V=V_new, W=W_new, alpha0=a0, alpha1=a1,
                    eta=eta, gamma=gamma, count=state.count + 1)


def precision(W: np.ndarray, ds: Dataset) -> float:
    """Top-1 accuracy; score ties resolve to the lowest class index."""
    _check_dims(W, ds)
    pred = np.argmax(scores(W, ds.X), axis=1)
    return float((pred == ds.Y).mean())


def _metric_row(it: int, W: np.ndarray, ds: Dataset, test_ds) -> dict:
    try:
        lnl2 = sle_loss(W, ds, LossKind.LOG_ABS_ERROR)
    except DegenerateLikelihood:
        lnl2 = float("nan")
    p_train = precision(W, ds)
    p_test = precision(W, test_ds) if test_ds is not None else p_train
    return {
        "iter": it,
        "precision_train": p_train,
        "precision_test": p_test,
        "lnL2": lnl2,
        "lnL_softmax": softmax_loglik(W, ds),
    }


def train(ds: Dataset, optimizer: Optimizer, activation=None, kappa: int = 2,
          eps: float = 1e-10, clamp: bool = True, test_ds=None):
    """Run kappa momentum iterations from W0 = 0.

    Returns (W, metrics) where metrics has one row per iteration with
    train/test precision and both likelihood metrics. RAW_NAG ascends
    the softmax log-likelihood; the sigmoid variants use the
    per-class-likelihood gradient, with the preconditioner applied only
    by SIGMOID_NAG_QG.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    W0 = np.zeros((ds.c, ds.d + 1))
    state = make_nag_state(W0)
    precond = (build_preconditioner(ds, eps=eps)
               if optimizer is Optimizer.SIGMOID_NAG_QG else None)
    metrics = []
    for it in range(1, kappa + 1):
        if optimizer is Optimizer.RAW_NAG:
            G = softmax_gradient(state.V, ds)
        else:
            G = sle_gradient(state.V, ds, activation=activation, clamp=clamp)
            if precond is not None:
                G = precond.B * G
        state = nag_step(state, G, ds.n,
                         rate_plus_one=optimizer is Optimizer.SIGMOID_NAG_QG)
        if not np.isfinite(state.W).all():
            raise FloatingPointError(f"non-finite weights at iteration {it}")
        metrics.append(_metric_row(it, state.W, ds, test_ds))
    return state.W, metrics


def model_to_json_dict(W: np.ndarray, c: int, d: int) -> dict:
    return {"c": c, "d": d, "w": [[float(v) for v in row] for row in W]}


def model_from_json_dict(doc: dict):
    W = np.asarray(doc["w"], dtype=np.float64)
    return W, int(doc["c"]), int(doc["d"])
