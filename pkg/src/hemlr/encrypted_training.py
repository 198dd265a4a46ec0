"""Training loop evaluated over packed ciphertexts.

Protocol: the client uploads the feature matrix X (row team), the
one-hot labels packed at X's row tiling, the preconditioner and the
zero initial weights; the momentum ciphertext V is created server-side
from W at the first iteration. Each iteration evaluates

    w_temp = W + (1+gamma) * B (.) (Ybar - act(X V^T))^T X
    W      = (1-eta) * w_temp + eta * V;  V = w_temp

with the momentum scalars computed in plaintext (they depend only on
the public iteration counter and n) and applied as constant
multiplications. The polynomial activation runs in Horner form, so one
iteration costs a fixed 3 + degree + 3 + 1 + 1 levels; with the default
cubic activation and the 22-level preset exactly two iterations fit,
and the third raises LevelExhausted unless the bootstrap policy allows
a refresh.
"""

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from hemlr.data import Dataset
from hemlr.errors import (
    CapacityExceeded,
    ConfigError,
    DegenerateLikelihood,
    LevelExhausted,
)
from hemlr.he import HeContext, HeParams
from hemlr.mlr import LossKind, Preconditioner, precision, sle_loss
from hemlr.packing import (
    PackedMatrix,
    constant_mult,
    elementwise_add,
    elementwise_mult,
    elementwise_sub,
    matmul_tiled,
    next_pow2,
    pack,
    unpack,
    valid_region_mask,
)
from hemlr.sigmoid_poly import (
    PolyApprox,
    fitted_surrogate,
    poly_from_json_dict,
    poly_to_json_dict,
)

POLICIES = ("never", "on-exhaustion")


@dataclass(frozen=True)
class EncryptedTrainingSession:
    """Everything the server holds between iterations.

    The upload set is X_pm + Y_pm + B_pm + W_pm, giving
    2*ceil(n/rows_per_ct) + 2 ciphertexts; V_pm is server-side state and
    not an upload. iteration is the 1-based counter of the next update.
    """

    ctx: HeContext
    X_pm: PackedMatrix
    Y_pm: PackedMatrix
    B_pm: PackedMatrix
    W_pm: PackedMatrix
    V_pm: object
    activation: PolyApprox
    n: int
    d: int
    c: int
    iteration: int
    alpha0: float
    alpha1: float
    depth_log: tuple
    peak_payload: int

    @property
    def upload_count(self) -> int:
        return len(self.X_pm.cts) + len(self.Y_pm.cts) + 2


def client_encrypt(ds: Dataset, precond: Preconditioner, ctx: HeContext,
                   W0=None, activation: PolyApprox = None) -> EncryptedTrainingSession:
    """Pack and encrypt the four uploads.

    The labels share the feature matrix's padded width so both teams
    tile rows identically; the weight and preconditioner matrices must
    each fit a single ciphertext.
    """
    width = ds.d + 1
    pc = next_pow2(width)
    slots = ctx.params.slots
    if pc > slots:
        raise CapacityExceeded(f"padded width {pc} exceeds {slots} slots")
    rpc = slots // pc
    if ds.c > rpc:
        raise CapacityExceeded(
            f"{ds.c} classes need {ds.c} weight rows, only {rpc} fit one ciphertext")
    if ds.c > pc:
        raise CapacityExceeded(
            f"{ds.c} label columns exceed the shared row width {pc}")
    if W0 is None:
        W0 = np.zeros((ds.c, width))
    X_pm = pack(ds.X, ctx)
    Y_pm = pack(ds.Ybar, ctx, padded_cols=pc)
    B_pm = pack(precond.B, ctx, padded_cols=pc)
    W_pm = pack(W0, ctx, padded_cols=pc)
    if activation is None:
        activation = fitted_surrogate()
    a0 = 0.01
    a1 = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * a0 * a0))
    return EncryptedTrainingSession(
        ctx=ctx, X_pm=X_pm, Y_pm=Y_pm, B_pm=B_pm, W_pm=W_pm, V_pm=None,
        activation=activation, n=ds.n, d=ds.d, c=ds.c, iteration=1,
        alpha0=a0, alpha1=float(a1), depth_log=(), peak_payload=0)


def _poly_apply_packed(Z: PackedMatrix, poly: PolyApprox) -> PackedMatrix:
    """Horner evaluation of the activation on every payload slot.

    Constant terms are masked to the valid region so padding slots stay
    exactly zero; multiplicative terms need no mask because the padding
    of Z is already zero. Costs degree(poly) levels.
    """
    if poly.degree < 1:
        raise ConfigError("encrypted activation needs degree >= 1")
    ctx = Z.ctx
    coeffs = poly.coeffs
    cts = []
    for i, z in enumerate(Z.cts):
        mask = valid_region_mask(Z, i)
        acc = ctx.rescale(ctx.cmult(coeffs[-1], z))
        if coeffs[-2] != 0.0:
            acc = ctx.cadd(mask * coeffs[-2], acc)
        for k in range(len(coeffs) - 3, -1, -1):
            z_al, acc_al = ctx.level_align(z, acc)
            acc = ctx.rescale(ctx.mult(acc_al, z_al))
            if coeffs[k] != 0.0:
                acc = ctx.cadd(mask * coeffs[k], acc)
        cts.append(acc)
    return replace(Z, cts=tuple(cts))


def he_iteration(session: EncryptedTrainingSession) -> EncryptedTrainingSession:
    """One full update; returns a new session, inputs untouched.

    Raises LevelExhausted when the remaining budget cannot cover the
    iteration; the caller decides whether to bootstrap and retry.
    """
    V_pm = session.V_pm if session.V_pm is not None else session.W_pm
    eta = (1.0 - session.alpha0) / session.alpha1
    gamma = 1.0 / (session.n * session.iteration)
    start_level = session.W_pm.cts[0].level

    base_live = session.upload_count + (1 if session.V_pm is not None else 0)
    peak = session.peak_payload

    Z = matmul_tiled(session.X_pm, V_pm.with_transposed(True))
    peak = max(peak, base_live + len(Z.cts))
    S = _poly_apply_packed(Z, session.activation)
    peak = max(peak, base_live + len(Z.cts) + len(S.cts))
    D = elementwise_sub(session.Y_pm, S)
    peak = max(peak, base_live + len(S.cts) + len(D.cts))
    G = matmul_tiled(D.with_transposed(True), session.X_pm,
                     scale_const=1.0 + gamma)
    peak = max(peak, base_live + len(D.cts) + len(G.cts))
    Gq = elementwise_mult(G, session.B_pm)
    w_temp = elementwise_add(session.W_pm, Gq)
    W_new = elementwise_add(constant_mult(w_temp, 1.0 - eta),
                            constant_mult(V_pm, eta))
    peak = max(peak, base_live + 3)
    # keep V at W's level so every iteration consumes the same depth
    V_new = replace(w_temp, cts=tuple(
        session.ctx.mod_down(ct, W_new.cts[0].level) for ct in w_temp.cts))

    a0 = session.alpha1
    a1 = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * a0 * a0))
    consumed = start_level - W_new.cts[0].level
    return replace(session, W_pm=W_new, V_pm=V_new,
                   iteration=session.iteration + 1,
                   alpha0=a0, alpha1=float(a1),
                   depth_log=session.depth_log + (consumed,),
                   peak_payload=peak)


def _bootstrap_weights(session: EncryptedTrainingSession) -> EncryptedTrainingSession:
    ctx = session.ctx
    W_new = replace(session.W_pm,
                    cts=tuple(ctx.bootstrap(ct) for ct in session.W_pm.cts))
    V_new = session.V_pm
    if V_new is not None:
        V_new = replace(V_new, cts=tuple(ctx.bootstrap(ct) for ct in V_new.cts))
    return replace(session, W_pm=W_new, V_pm=V_new)


def server_train(session: EncryptedTrainingSession, kappa: int,
                 bootstrap_policy: str = "never"):
    """Run kappa iterations under the given bootstrap policy.

    policy "never" propagates LevelExhausted; "on-exhaustion" refreshes
    the weight ciphertexts and retries the failed iteration once.
    Returns (final session, trace report).
    """
    if kappa < 1:
        raise ConfigError("kappa must be >= 1")
    if bootstrap_policy not in POLICIES:
        raise ConfigError(f"unknown policy {bootstrap_policy!r}")
    for _ in range(kappa):
        try:
            session = he_iteration(session)
        except LevelExhausted:
            if bootstrap_policy == "never":
                raise
            session = _bootstrap_weights(session)
            session = he_iteration(session)
    report = {
        "iterations": kappa,
        "per_op_counts": session.ctx.trace.snapshot(),
        "depth_per_iteration": list(session.depth_log),
        "peak_payload_count": session.peak_payload,
    }
    return session, report


def decrypted_weights(session: EncryptedTrainingSession) -> np.ndarray:
    return unpack(session.W_pm)


def client_decrypt_eval(session: EncryptedTrainingSession, ds: Dataset) -> dict:
    """Decrypt the weights and score them on a dataset."""
    W = decrypted_weights(session)
    try:
        lnl2 = sle_loss(W, ds, LossKind.LOG_ABS_ERROR)
    except DegenerateLikelihood:
        lnl2 = float("nan")
    return {"precision": precision(W, ds), "lnL2": lnl2}


# -- checkpointing --------------------------------------------------------------


def _ct_to_dict(ct) -> dict:
    return {
        "values": [float(v) for v in ct.values],
        "level": ct.level,
        "scale_bits": ct.scale_bits,
        "payload_len": ct.payload_len,
    }


def _pm_meta(pm: PackedMatrix) -> dict:
    return {"rows": pm.rows, "cols": pm.cols, "padded_cols": pm.padded_cols,
            "transposed": pm.transposed, "count": len(pm.cts)}


def save_session(session: EncryptedTrainingSession, dirpath: str) -> None:
    """Serialize every ciphertext payload plus levels and counters to a
    directory of JSON files."""
    os.makedirs(dirpath, exist_ok=True)
    groups = {"x": session.X_pm, "y": session.Y_pm, "b": session.B_pm,
              "w": session.W_pm}
    if session.V_pm is not None:
        groups["v"] = session.V_pm
    meta = {
        "params": {"logN": session.ctx.params.logN,
                   "logQ": session.ctx.params.logQ,
                   "logp": session.ctx.params.logp},
        "n": session.n, "d": session.d, "c": session.c,
        "iteration": session.iteration,
        "alpha0": session.alpha0, "alpha1": session.alpha1,
        "depth_log": list(session.depth_log),
        "peak_payload": session.peak_payload,
        "activation": poly_to_json_dict(session.activation),
        "trace": session.ctx.trace_json_dict(),
        "matrices": {name: _pm_meta(pm) for name, pm in groups.items()},
    }
    with open(os.path.join(dirpath, "session.json"), "w") as fh:
        json.dump(meta, fh)
    for name, pm in groups.items():
        for i, ct in enumerate(pm.cts):
            with open(os.path.join(dirpath, f"{name}_{i}.json"), "w") as fh:
                json.dump(_ct_to_dict(ct), fh)


def load_session(dirpath: str) -> EncryptedTrainingSession:
    with open(os.path.join(dirpath, "session.json")) as fh:
        meta = json.load(fh)
    params = HeParams(**meta["params"])
    ctx = HeContext(params)

    def load_pm(name: str) -> PackedMatrix:
        m = meta["matrices"][name]
        cts = []
        for i in range(m["count"]):
            with open(os.path.join(dirpath, f"{name}_{i}.json")) as fh:
                doc = json.load(fh)
            cts.append(ctx.adopt(np.asarray(doc["values"]), doc["level"],
                                 doc["scale_bits"], doc["payload_len"]))
        return PackedMatrix(ctx=ctx, rows=m["rows"], cols=m["cols"],
                            padded_cols=m["padded_cols"],
                            transposed=m["transposed"], cts=tuple(cts))

    ctx.restore_accounting(meta["trace"]["per_op_counts"],
                           params.max_level - meta["trace"]["max_depth_consumed"])
    return EncryptedTrainingSession(
        ctx=ctx, X_pm=load_pm("x"), Y_pm=load_pm("y"), B_pm=load_pm("b"),
        W_pm=load_pm("w"),
        V_pm=load_pm("v") if "v" in meta["matrices"] else None,
        activation=poly_from_json_dict(meta["activation"]),
        n=meta["n"], d=meta["d"], c=meta["c"], iteration=meta["iteration"],
        alpha0=meta["alpha0"], alpha1=meta["alpha1"],
        depth_log=tuple(meta["depth_log"]),
        peak_payload=meta["peak_payload"])
