"""Row-major tiled matrix packing and the rotation-based matmul schedules."""

import numpy as np
import pytest

from hemlr.errors import (
    BothOrNeitherTransposed,
    DimensionMismatch,
    MatrixTooWide,
    MultiCiphertextUnsupported,
)
from hemlr.he import HeContext, HeParams, OpTrace
from hemlr.packing import (
    col_shift_complete,
    col_shift_incomplete,
    matmul_single,
    matmul_tiled,
    next_pow2,
    pack,
    row_shift,
    sum_col_vec,
    sum_row_vec,
    unpack,
)

P8 = HeParams(logN=4, logQ=990, logp=45)     # 8 slots
P16 = HeParams(logN=5, logQ=990, logp=45)    # 16 slots
P128 = HeParams(logN=8, logQ=990, logp=45)   # 128 slots


def test_next_pow2():
    assert [next_pow2(k) for k in (1, 2, 3, 4, 5, 402)] == [1, 2, 4, 4, 8, 512]


def test_pack_layout_2x3():
    ctx = HeContext(P8)
    M = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    P = pack(M, ctx)
    assert P.padded_cols == 4 and P.rows_per_ct == 2 and len(P.cts) == 1
    np.testing.assert_array_equal(
        ctx.dec(P.cts[0]), [1.0, 2.0, 3.0, 0.0, 4.0, 5.0, 6.0, 0.0])
    np.testing.assert_array_equal(unpack(P), M)


def test_pack_reference_shape():
    ctx = HeContext(HeParams())
    M = np.zeros((128, 402))
    P = pack(M, ctx)
    assert P.padded_cols == 512
    assert P.rows_per_ct == 64
    assert len(P.cts) == 2


def test_pack_round_trip_random():
    rng = np.random.default_rng(1)
    ctx = HeContext(P128)
    M = rng.standard_normal((7, 5))
    np.testing.assert_array_equal(unpack(pack(M, ctx)), M)


def test_pack_too_wide():
    ctx = HeContext(P8)
    with pytest.raises(MatrixTooWide):
        pack(np.zeros((1, 9)), ctx)


def test_pack_explicit_width():
    ctx = HeContext(P16)
    M = np.arange(6.0).reshape(2, 3)
    P = pack(M, ctx, padded_cols=8)
    assert P.padded_cols == 8 and P.rows_per_ct == 2
    np.testing.assert_array_equal(unpack(P), M)
    with pytest.raises(DimensionMismatch):
        pack(M, ctx, padded_cols=3)  # not a power of two
    with pytest.raises(DimensionMismatch):
        pack(M, ctx, padded_cols=2)  # narrower than the matrix


def test_pack_padding_is_zero():
    rng = np.random.default_rng(2)
    ctx = HeContext(P16)
    P = pack(rng.standard_normal((3, 3)), ctx)
    raw = ctx.dec(P.cts[0])
    body = raw.reshape(4, 4)
    np.testing.assert_array_equal(body[:3, 3], 0.0)
    np.testing.assert_array_equal(body[3], 0.0)


def test_row_shift_three_rows():
    ctx = HeContext(P16)
    M = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(unpack(row_shift(pack(M, ctx))),
                                  np.roll(M, -1, axis=0))


def test_row_shift_single_row():
    ctx = HeContext(P8)
    M = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(unpack(row_shift(pack(M, ctx))), M)


def test_row_shift_twice_is_identity():
    ctx = HeContext(P8)
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    P = pack(M, ctx, padded_cols=4)
    np.testing.assert_array_equal(unpack(row_shift(row_shift(P))), M)


def test_row_shift_full_ct_single_rotation():
    # a full ciphertext needs no masking: exactly one rotation
    ctx = HeContext(P16)
    M = np.arange(16.0).reshape(4, 4)
    P = pack(M, ctx)
    before = ctx.trace.snapshot()
    out = row_shift(P)
    assert OpTrace.delta(before, ctx.trace.snapshot()) == {"Rot": 1}
    np.testing.assert_array_equal(unpack(out), np.roll(M, -1, axis=0))


def test_col_shift_complete_example():
    ctx = HeContext(P8)
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = col_shift_complete(pack(M, ctx, padded_cols=2))
    np.testing.assert_array_equal(unpack(out), [[2.0, 1.0], [4.0, 3.0]])


def test_col_shift_complete_trace():
    ctx = HeContext(P8)
    P = pack(np.array([[1.0, 2.0], [3.0, 4.0]]), ctx, padded_cols=2)
    before = ctx.trace.snapshot()
    col_shift_complete(P)
    assert OpTrace.delta(before, ctx.trace.snapshot()) == {
        "Rot": 2, "cMult": 2, "Add": 1}


def test_col_shift_incomplete_wraps_rows():
    # matrix fills the ciphertext exactly, so the wrap reaches row 0
    ctx = HeContext(HeParams(logN=3, logQ=990, logp=45))
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = col_shift_incomplete(pack(M, ctx, padded_cols=2))
    # slot-level rotation pulls the head of the next row into each row tail
    np.testing.assert_array_equal(unpack(out), [[2.0, 3.0], [4.0, 1.0]])


def test_col_shifts_agree_on_single_row():
    ctx = HeContext(HeParams(logN=3, logQ=990, logp=45))
    M = np.array([[1.0, 2.0, 3.0, 4.0]])
    P = pack(M, ctx, padded_cols=4)
    a = unpack(col_shift_incomplete(P))
    b = unpack(col_shift_complete(P))
    np.testing.assert_array_equal(a, b)


def test_col_shift_reference_loop():
    rng = np.random.default_rng(3)
    ctx = HeContext(P128)
    M = rng.standard_normal((4, 8))
    out = unpack(col_shift_complete(pack(M, ctx)))
    np.testing.assert_allclose(out, np.roll(M, -1, axis=1), rtol=1e-12)


def test_sum_row_vec_broadcast_example():
    ctx = HeContext(P8)
    P = pack(np.array([[1.0, 2.0], [3.0, 4.0]]), ctx, padded_cols=2)
    out = unpack(sum_row_vec(P, broadcast=True))
    np.testing.assert_allclose(out, [[3.0, 3.0], [7.0, 7.0]], rtol=1e-12)


def test_sum_row_vec_column_zero_exact():
    rng = np.random.default_rng(4)
    ctx = HeContext(P128)
    M = rng.standard_normal((4, 4))
    out = unpack(sum_row_vec(pack(M, ctx)))
    np.testing.assert_allclose(out[:, 0], M.sum(axis=1), rtol=1e-12)


def test_sum_row_vec_rotation_count():
    # pinned cost: exactly log2(padded_cols) rotations
    ctx = HeContext(P128)
    P = pack(np.ones((2, 8)), ctx)
    before = ctx.trace.snapshot()
    sum_row_vec(P)
    delta = OpTrace.delta(before, ctx.trace.snapshot())
    assert delta["Rot"] == 3
    assert delta == {"Rot": 3, "Add": 3}


def test_sum_col_vec_example():
    ctx = HeContext(P8)
    P = pack(np.array([[1.0, 2.0], [3.0, 4.0]]), ctx, padded_cols=2)
    np.testing.assert_allclose(unpack(sum_col_vec(P)),
                               [[4.0, 6.0], [4.0, 6.0]], rtol=1e-12)


def test_sum_col_vec_random_loop_oracle():
    rng = np.random.default_rng(5)
    ctx = HeContext(P128)
    M = rng.standard_normal((4, 4))
    expect = np.tile(M.sum(axis=0), (4, 1))
    np.testing.assert_allclose(unpack(sum_col_vec(pack(M, ctx))), expect,
                               rtol=1e-12, atol=1e-14)


def test_shifts_reject_teams():
    ctx = HeContext(P8)
    P = pack(np.ones((4, 4)), ctx)  # 2 rows per ct -> 2 cts
    assert len(P.cts) == 2
    for op in (row_shift, col_shift_incomplete, col_shift_complete,
               sum_row_vec, sum_col_vec):
        with pytest.raises(MultiCiphertextUnsupported):
            op(P)


def test_matmul_identity_right_factor():
    ctx = HeContext(P16)
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 0.0]])
    I2 = np.eye(2)
    Pa = pack(A, ctx)
    Pb = pack(I2, ctx, transposed=True)
    np.testing.assert_allclose(unpack(matmul_single(Pa, Pb)), A, atol=1e-12)


def test_matmul_figure_shape_oracle():
    rng = np.random.default_rng(6)
    ctx = HeContext(P16)
    A = rng.standard_normal((4, 2))
    B = rng.standard_normal((2, 2))
    Pa = pack(A, ctx)
    Pbt = pack(B.T, ctx, transposed=True)
    np.testing.assert_allclose(unpack(matmul_single(Pa, Pbt)), A @ B,
                               atol=1e-12)


def test_matmul_zero_row_propagates():
    rng = np.random.default_rng(7)
    ctx = HeContext(P16)
    A = rng.standard_normal((4, 2))
    A[2] = 0.0
    B = rng.standard_normal((2, 2))
    out = unpack(matmul_single(pack(A, ctx), pack(B.T, ctx, transposed=True)))
    np.testing.assert_array_equal(out[2], 0.0)


def test_matmul_requires_one_transposed():
    ctx = HeContext(P16)
    A = pack(np.ones((2, 2)), ctx)
    B = pack(np.ones((2, 2)), ctx)
    with pytest.raises(BothOrNeitherTransposed):
        matmul_tiled(A, B)
    with pytest.raises(BothOrNeitherTransposed):
        matmul_tiled(A.with_transposed(True), B.with_transposed(True))


def test_matmul_inner_dim_mismatch():
    ctx = HeContext(P128)
    A = pack(np.ones((2, 4)), ctx)
    B = pack(np.ones((2, 2)), ctx, transposed=True, padded_cols=4)
    with pytest.raises(DimensionMismatch):
        matmul_tiled(A, B)


def test_matmul_transpose_variants_agree():
    rng = np.random.default_rng(8)
    ctx = HeContext(P128)
    A = rng.standard_normal((4, 4))
    B = rng.standard_normal((4, 4))
    second = unpack(matmul_tiled(pack(A, ctx),
                                 pack(B, ctx, transposed=True)))
    first = unpack(matmul_tiled(pack(A.T, ctx, transposed=True),
                                pack(B.T, ctx)))
    np.testing.assert_allclose(second, A @ B.T, atol=1e-12)
    np.testing.assert_allclose(first, second, atol=1e-12)


def test_matmul_identity_both_orientations():
    ctx = HeContext(P128)
    I4 = np.eye(4)
    a = unpack(matmul_tiled(pack(I4, ctx), pack(I4, ctx, transposed=True)))
    b = unpack(matmul_tiled(pack(I4, ctx, transposed=True), pack(I4, ctx)))
    np.testing.assert_allclose(a, I4, atol=1e-14)
    np.testing.assert_allclose(b, I4, atol=1e-14)


def test_matmul_team_output():
    # 8 rows at 4 rows/ct: the product spans two ciphertexts
    rng = np.random.default_rng(9)
    ctx = HeContext(P16)
    A = rng.standard_normal((8, 3))
    B = rng.standard_normal((2, 3))
    Pa = pack(A, ctx)
    assert len(Pa.cts) == 2
    out = matmul_tiled(Pa, pack(B, ctx, transposed=True))
    assert len(out.cts) == 2
    np.testing.assert_allclose(unpack(out), A @ B.T, atol=1e-12)


def test_matmul_team_first_transposed():
    rng = np.random.default_rng(10)
    ctx = HeContext(P16)
    D = rng.standard_normal((8, 3))
    X = rng.standard_normal((8, 4))
    out = matmul_tiled(pack(D, ctx, transposed=True), pack(X, ctx, padded_cols=4))
    np.testing.assert_allclose(unpack(out), D.T @ X, atol=1e-12)


def test_matmul_empty_team():
    ctx = HeContext(P16)
    A = pack(np.ones((2, 2)), ctx)
    from dataclasses import replace
    empty = replace(A, cts=())
    with pytest.raises(DimensionMismatch):
        matmul_tiled(empty, A.with_transposed(True))


def test_matmul_scale_const_folded():
    rng = np.random.default_rng(11)
    ctx = HeContext(P128)
    A = rng.standard_normal((3, 4))
    B = rng.standard_normal((2, 4))
    out = unpack(matmul_tiled(pack(A, ctx), pack(B, ctx, transposed=True),
                              scale_const=1.25))
    np.testing.assert_allclose(out, 1.25 * (A @ B.T), atol=1e-12)


def test_matmul_depth_constant():
    """The schedule consumes 3 levels regardless of operand values."""
    rng = np.random.default_rng(12)
    consumed = []
    for _ in range(2):
        ctx = HeContext(P128)
        A = rng.standard_normal((4, 4))
        B = rng.standard_normal((4, 4))
        Pa = pack(A, ctx)
        Pb = pack(B, ctx, transposed=True)
        out = matmul_tiled(Pa, Pb)
        consumed.append(Pa.cts[0].level - out.cts[0].level)
    assert consumed == [3, 3]


def test_matmul_randomized_oracle_batch():
    # slice of the acceptance suite kept here for fast regression signal
    rng = np.random.default_rng(13)
    ctx_params = P128
    for _ in range(60):
        m = int(rng.integers(1, 17))
        k = int(rng.integers(1, 17))
        p = int(rng.integers(1, 17))
        w = next_pow2(max(k, p))
        ctx = HeContext(ctx_params)
        A = rng.standard_normal((m, k))
        B = rng.standard_normal((p, k))
        Pa = pack(A, ctx, padded_cols=w)
        Pb = pack(B, ctx, transposed=True, padded_cols=w)
        np.testing.assert_allclose(unpack(matmul_tiled(Pa, Pb)), A @ B.T,
                                   atol=1e-9)
