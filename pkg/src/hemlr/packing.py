"""Row-major tiled matrix packing and matrix products over ciphertexts.

A matrix is laid out row by row inside a ciphertext: columns are padded
to a power of two so each logical row starts at a multiple of
padded_cols and the slot vector holds slots/padded_cols rows. Matrices
with more rows span an ordered team of ciphertexts.

The product of two packed matrices requires exactly one operand to be
stored transposed. Either side works:

* second transposed: for each stored row j of the second operand,
  replicate it across all row positions (rotate-and-add doubling),
  multiply slotwise with the first operand, fold each row onto its
  column 0 (rotate-and-add cascade), then rotate that column-0 value
  into output column j and mask. Three rescales per pass, so the
  product always costs three levels.
* first transposed: extract column j of the stored payload, spread it
  across the row width, multiply with the second operand, fold rows
  together (exact cyclic broadcast of the column sums), then mask out
  output row j. Also three levels.

Teams multiply blockwise; the row-tiled pairing for the transposed-first
case is diagonal (block i of each operand covers the same logical rows).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from hemlr.errors import (
    BothOrNeitherTransposed,
    DimensionMismatch,
    MatrixTooWide,
    MultiCiphertextUnsupported,
)
from hemlr.he import HeContext


def next_pow2(x: int) -> int:
    return 1 if x <= 1 else 1 << (x - 1).bit_length()


@dataclass(frozen=True)
class PackedMatrix:
    """A logical rows x cols matrix tiled over one or more ciphertexts.

    transposed records that the stored payload is the transpose of the
    matmul operand this object stands for; it changes interpretation
    only, never layout. Padding slots always decode to exactly zero.
    """

    ctx: HeContext
    rows: int
    cols: int
    padded_cols: int
    transposed: bool
    cts: tuple

    @property
    def rows_per_ct(self) -> int:
        return self.ctx.params.slots // self.padded_cols

    def with_transposed(self, flag: bool) -> "PackedMatrix":
        return replace(self, transposed=flag)

    def block_rows(self, i: int) -> int:
        return min(self.rows - i * self.rows_per_ct, self.rows_per_ct)


def pack(M, ctx: HeContext, transposed: bool = False,
         padded_cols=None) -> PackedMatrix:
    """Encrypt a matrix in row-major tiled layout.

    padded_cols defaults to the next power of two at least cols; an
    explicit wider power of two forces a shared layout with another
    matrix (the label matrix is packed at the feature matrix's width so
    their teams align row for row).
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionMismatch("pack expects a 2-d matrix")
    rows, cols = M.shape
    pc = next_pow2(cols) if padded_cols is None else int(padded_cols)
    if pc & (pc - 1) or pc < max(cols, 1):
        raise DimensionMismatch(f"padded_cols {pc} must be a power of two >= cols")
    if pc > ctx.params.slots:
        raise MatrixTooWide(f"padded width {pc} > {ctx.params.slots} slots")
    rpc = ctx.params.slots // pc
    cts = []
    for start in range(0, rows, rpc):
        chunk = M[start: start + rpc]
        buf = np.zeros(ctx.params.slots)
        buf.reshape(rpc, pc)[: chunk.shape[0], :cols] = chunk
        cts.append(ctx.enc(buf))
    return PackedMatrix(ctx=ctx, rows=rows, cols=cols, padded_cols=pc,
                        transposed=transposed, cts=tuple(cts))


def unpack(P: PackedMatrix) -> np.ndarray:
    """Decrypt back to the stored payload (transposed flag is not applied)."""
    rpc = P.rows_per_ct
    out = np.zeros((P.rows, P.cols))
    for i, ct in enumerate(P.cts):
        grid = P.ctx.dec(ct).reshape(rpc, P.padded_cols)
        take = P.block_rows(i)
        out[i * rpc: i * rpc + take] = grid[:take, : P.cols]
    return out


# -- masks -------------------------------------------------------------------


def _row_mask(P: PackedMatrix, row: int, value: float = 1.0) -> np.ndarray:
    m = np.zeros(P.ctx.params.slots)
    m.reshape(P.rows_per_ct, P.padded_cols)[row, :] = value
    return m


def _col_mask(P: PackedMatrix, col: int, value: float = 1.0) -> np.ndarray:
    m = np.zeros(P.ctx.params.slots)
    m.reshape(P.rows_per_ct, P.padded_cols)[:, col] = value
    return m


def valid_region_mask(P: PackedMatrix, block: int, value: float = 1.0) -> np.ndarray:
    """value on the payload slots of block `block`, zero on padding."""
    m = np.zeros(P.ctx.params.slots)
    m.reshape(P.rows_per_ct, P.padded_cols)[: P.block_rows(block), : P.cols] = value
    return m


def _single_ct(P: PackedMatrix):
    if len(P.cts) != 1:
        raise MultiCiphertextUnsupported(
            f"operation needs a single ciphertext, matrix spans {len(P.cts)}")
    return P.cts[0]


# -- shifts and summations ----------------------------------------------------


def row_shift(P: PackedMatrix) -> PackedMatrix:
    """Cyclic shift of the logical rows up by one.

    When the matrix fills its ciphertext this is a single rotation by
    the row width; otherwise the wrapped row would land in the padding,
    so the shifted body and the relocated first row are masked and
    recombined (two rotations, two masks, one add, one rescale).
    """
    ct = _single_ct(P)
    ctx = P.ctx
    mp = P.padded_cols
    if P.rows == 1:
        return P
    if P.rows == P.rows_per_ct:
        return replace(P, cts=(ctx.rot(ct, mp),))
    slots = ctx.params.slots
    body = np.zeros(slots)
    body.reshape(P.rows_per_ct, mp)[: P.rows - 1, :] = 1.0
    up = ctx.cmult(body, ctx.rot(ct, mp))
    first = ctx.cmult(_row_mask(P, P.rows - 1),
                      ctx.rot(ct, (slots - (P.rows - 1) * mp) % slots))
    return replace(P, cts=(ctx.rescale(ctx.add(up, first)),))


def col_shift_incomplete(P: PackedMatrix) -> PackedMatrix:
    """One rotation by 1: columns shift left and wrap across row
    boundaries (the last column of a row receives the head of the next)."""
    ct = _single_ct(P)
    return replace(P, cts=(P.ctx.rot(ct, 1),))


def col_shift_complete(P: PackedMatrix) -> PackedMatrix:
    """Per-row cyclic column shift by 1: exactly two Rot, two cMult and
    one Add, with no rescale, so the trace delta is pinned."""
    ct = _single_ct(P)
    ctx = P.ctx
    mp = P.padded_cols
    slots = ctx.params.slots
    keep = np.zeros(slots)
    keep.reshape(P.rows_per_ct, mp)[:, : mp - 1] = 1.0
    shifted = ctx.cmult(keep, ctx.rot(ct, 1))
    wrapped = ctx.cmult(_col_mask(P, mp - 1), ctx.rot(ct, (1 - mp) % slots))
    return replace(P, cts=(ctx.add(shifted, wrapped),))


def sum_row_vec(P: PackedMatrix, broadcast: bool = False) -> PackedMatrix:
    """Row sums via log2(padded_cols) rotate-and-add steps.

    The cascade alone leaves the exact row sum in column 0 of each row
    (other columns hold windowed partial sums that wrap into the next
    row). With broadcast set, column 0 is masked out and spread back
    across the row so every slot of row i holds the row sum; that costs
    log2(padded_cols) further rotations plus one mask.
    """
    acc = _single_ct(P)
    ctx = P.ctx
    steps = P.padded_cols.bit_length() - 1
    for s in range(steps):
        acc = ctx.add(acc, ctx.rot(acc, 1 << s))
    if broadcast:
        acc = ctx.cmult(_col_mask(P, 0), acc)
        for s in range(steps):
            acc = ctx.add(acc, ctx.rot(acc, (ctx.params.slots - (1 << s))
                                       % ctx.params.slots))
        acc = ctx.rescale(acc)
    return replace(P, cts=(acc,))


def sum_col_vec(P: PackedMatrix) -> PackedMatrix:
    """Column sums broadcast to every row: log2(rows_per_ct) rotate-and-
    add steps; the cascade is exact because the row blocks tile the
    whole slot vector cyclically."""
    acc = _single_ct(P)
    ctx = P.ctx
    for s in range(P.rows_per_ct.bit_length() - 1):
        acc = ctx.add(acc, ctx.rot(acc, P.padded_cols * (1 << s)))
    return replace(P, cts=(acc,))


# -- matrix products -----------------------------------------------------------


def _check_layout(a: PackedMatrix, b: PackedMatrix) -> None:
    if a.ctx is not b.ctx:
        raise DimensionMismatch("operands come from different contexts")
    if a.padded_cols != b.padded_cols:
        raise DimensionMismatch(
            f"operands must share slot layout ({a.padded_cols} vs {b.padded_cols})")


def _matmul_second_transposed(A: PackedMatrix, Q: PackedMatrix,
                              scale_const: float) -> PackedMatrix:
    """A x B where Q stores B^T: output column j comes from stored row j."""
    _check_layout(A, Q)
    if A.cols != Q.cols:
        raise DimensionMismatch(
            f"inner dimensions differ: {A.cols} vs {Q.cols}")
    if Q.rows > A.padded_cols:
        raise DimensionMismatch(
            f"{Q.rows} output columns exceed row width {A.padded_cols}")
    ctx = A.ctx
    slots = ctx.params.slots
    mp = A.padded_cols
    rpc = A.rows_per_ct
    row_steps = rpc.bit_length() - 1
    col_steps = mp.bit_length() - 1
    out_cts = []
    for a_ct in A.cts:
        acc = None
        for qi, q_ct in enumerate(Q.cts):
            for jloc in range(Q.block_rows(qi)):
                jglob = qi * rpc + jloc
                # replicate stored row j of the transposed operand everywhere
                rep = ctx.rescale(ctx.cmult(_row_mask(Q, jloc), q_ct))
                for s in range(row_steps):
                    rep = ctx.add(rep, ctx.rot(rep, (slots - mp * (1 << s)) % slots))
                a_al, rep_al = ctx.level_align(a_ct, rep)
                prod = ctx.rescale(ctx.mult(a_al, rep_al))
                # fold each row onto its column 0
                for s in range(col_steps):
                    prod = ctx.add(prod, ctx.rot(prod, 1 << s))
                prod = ctx.rot(prod, (slots - jglob) % slots)
                term = ctx.rescale(ctx.cmult(_col_mask(A, jglob, scale_const), prod))
                if acc is None:
                    acc = term
                else:
                    acc = ctx.add(*ctx.level_align(acc, term))
        out_cts.append(acc)
    return PackedMatrix(ctx=ctx, rows=A.rows, cols=Q.rows, padded_cols=mp,
                        transposed=False, cts=tuple(out_cts))


def _matmul_first_transposed(D: PackedMatrix, X: PackedMatrix,
                             scale_const: float) -> PackedMatrix:
    """D^T x X where D stores the payload untransposed; blocks pair
    diagonally, so both teams must tile the same logical rows."""
    _check_layout(D, X)
    if D.rows != X.rows or len(D.cts) != len(X.cts):
        raise DimensionMismatch(
            f"row tilings differ: {D.rows}/{len(D.cts)} vs {X.rows}/{len(X.cts)}")
    ctx = D.ctx
    slots = ctx.params.slots
    mp = D.padded_cols
    rpc = D.rows_per_ct
    row_steps = rpc.bit_length() - 1
    col_steps = mp.bit_length() - 1
    out_count = math.ceil(D.cols / rpc)
    accs = [None] * out_count
    for d_ct, x_ct in zip(D.cts, X.cts):
        for j in range(D.cols):
            # column j of the payload becomes output row j
            u = ctx.rescale(ctx.cmult(_col_mask(D, j), d_ct))
            u = ctx.rot(u, j)
            for s in range(col_steps):
                u = ctx.add(u, ctx.rot(u, (slots - (1 << s)) % slots))
            x_al, u_al = ctx.level_align(x_ct, u)
            prod = ctx.rescale(ctx.mult(x_al, u_al))
            # exact cyclic broadcast of the column sums over all rows
            for s in range(row_steps):
                prod = ctx.add(prod, ctx.rot(prod, mp * (1 << s)))
            term = ctx.rescale(ctx.cmult(_row_mask(D, j % rpc, scale_const), prod))
            oi = j // rpc
            if accs[oi] is None:
                accs[oi] = term
            else:
                accs[oi] = ctx.add(*ctx.level_align(accs[oi], term))
    return PackedMatrix(ctx=ctx, rows=D.cols, cols=X.cols, padded_cols=mp,
                        transposed=False, cts=tuple(accs))


def matmul_tiled(first: PackedMatrix, second: PackedMatrix,
                 scale_const: float = 1.0) -> PackedMatrix:
    """Blockwise product of two packed matrices (teams allowed).

    Exactly one operand must carry the transposed flag. scale_const is
    folded into the output masks, so a public scalar multiplies the
    product at no extra depth.
    """
    if not first.cts or not second.cts:
        raise DimensionMismatch("empty ciphertext team")
    if first.transposed == second.transposed:
        raise BothOrNeitherTransposed(
            "exactly one operand must be stored transposed")
    if second.transposed:
        return _matmul_second_transposed(first, second, scale_const)
    return _matmul_first_transposed(first, second, scale_const)


def matmul_single(first: PackedMatrix, second: PackedMatrix,
                  scale_const: float = 1.0) -> PackedMatrix:
    """Single-ciphertext product; the team version without the tiling."""
    _single_ct(first)
    _single_ct(second)
    return matmul_tiled(first, second, scale_const)


# -- elementwise team helpers ---------------------------------------------------


def _check_same_shape(P: PackedMatrix, Q: PackedMatrix) -> None:
    _check_layout(P, Q)
    if (P.rows, P.cols) != (Q.rows, Q.cols) or len(P.cts) != len(Q.cts):
        raise DimensionMismatch(
            f"shapes differ: {(P.rows, P.cols)} vs {(Q.rows, Q.cols)}")


def elementwise_sub(P: PackedMatrix, Q: PackedMatrix) -> PackedMatrix:
    _check_same_shape(P, Q)
    ctx = P.ctx
    cts = []
    for a, b in zip(P.cts, Q.cts):
        a, b = ctx.level_align(a, b)
        cts.append(ctx.sub(a, b))
    return replace(P, cts=tuple(cts), transposed=False)


def elementwise_add(P: PackedMatrix, Q: PackedMatrix) -> PackedMatrix:
    _check_same_shape(P, Q)
    ctx = P.ctx
    cts = []
    for a, b in zip(P.cts, Q.cts):
        a, b = ctx.level_align(a, b)
        cts.append(ctx.add(a, b))
    return replace(P, cts=tuple(cts), transposed=False)


def elementwise_mult(P: PackedMatrix, Q: PackedMatrix) -> PackedMatrix:
    _check_same_shape(P, Q)
    ctx = P.ctx
    cts = []
    for a, b in zip(P.cts, Q.cts):
        a, b = ctx.level_align(a, b)
        cts.append(ctx.rescale(ctx.mult(a, b)))
    return replace(P, cts=tuple(cts), transposed=False)


def constant_mult(P: PackedMatrix, k: float) -> PackedMatrix:
    cts = tuple(P.ctx.rescale(P.ctx.cmult(k, ct)) for ct in P.cts)
    return replace(P, cts=cts)
