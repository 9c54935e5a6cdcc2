import numpy as np
import pytest

from l1analysis.operators import (
    AnalysisOperator,
    build_haar_dwt,
    build_haar_undecimated,
    build_haar_undecimated_2d,
    build_identity,
    build_operator,
    build_random_tight,
    build_tv1,
    build_tv2,
    gram_info,
    load_operator,
    save_operator,
)
from l1analysis.signals import blocks


def test_operator_rejects_zero_row():
    with pytest.raises(ValueError):
        AnalysisOperator(np.array([[1.0, 0.0], [0.0, 0.0]]), "custom")


def test_operator_rejects_nonfinite():
    with pytest.raises(ValueError):
        AnalysisOperator(np.array([[1.0, np.nan]]), "custom")


def test_tv1_examples():
    np.testing.assert_array_equal(build_tv1(2).matrix, [[-1.0, 1.0]])
    np.testing.assert_array_equal(build_tv1(3).matrix, [[-1, 1, 0], [0, -1, 1]])
    np.testing.assert_array_equal(build_tv1(7).matrix @ np.full(7, 3.5), np.zeros(6))
    with pytest.raises(ValueError):
        build_tv1(1)


def test_tv2_examples():
    expected = [[-1, 0, 1, 0], [0, -1, 0, 1], [-1, 1, 0, 0], [0, 0, -1, 1]]
    np.testing.assert_array_equal(build_tv2(2).matrix, expected)
    for k in (2, 4, 10):
        op = build_tv2(k)
        assert op.N == 2 * (k - 1) * k and op.n == k * k
        np.testing.assert_array_equal(op.matrix @ np.ones(k * k), 0.0)
    with pytest.raises(ValueError):
        build_tv2(1)


@pytest.mark.parametrize("op", [build_tv1(9), build_tv2(4)], ids=["tv1", "tv2"])
def test_tv_kernel_is_constants(op):
    s = np.linalg.svd(op.matrix, compute_uv=False)
    s = np.concatenate([s, np.zeros(op.n - s.size)])
    assert np.sum(s < 1e-10) == 1


def test_dwt_two_point():
    rows = {tuple(np.round(r * np.sqrt(2), 12)) for r in build_haar_dwt(2, 1).matrix}
    assert rows in ({(1.0, 1.0), (1.0, -1.0)}, {(1.0, 1.0), (-1.0, 1.0)})


def test_dwt_orthonormal_and_blocks_sparsity():
    op = build_haar_dwt(256, 6)
    np.testing.assert_allclose(op.matrix.T @ op.matrix, np.eye(256), atol=1e-10)
    c = op.matrix @ blocks(256)
    assert int(np.sum(np.abs(c) > 1e-9 * np.abs(c).max())) == 41


@pytest.mark.parametrize("n,J", [(12, 2), (256, 9), (100, 1)])
def test_dwt_rejects_bad_sizes(n, J):
    with pytest.raises(ValueError):
        build_haar_dwt(n, J)


@pytest.mark.parametrize("n,J", [(64, 3), (256, 6), (24, 3)])
def test_undecimated_duality_and_row_relation(n, J):
    P = build_haar_undecimated(n, J, "primal").matrix
    D = build_haar_undecimated(n, J, "dual").matrix
    assert P.shape == ((J + 1) * n, n)
    assert np.abs(D.T @ P - np.eye(n)).max() <= 1e-10
    np.testing.assert_allclose(np.linalg.norm(P, axis=1), 1.0, atol=1e-14)
    rel = D / np.linalg.norm(D, axis=1)[:, None]
    assert np.abs(rel - P).max() <= 1e-12


def test_undecimated_divisibility():
    with pytest.raises(ValueError):
        build_haar_undecimated(20, 3)


def test_undecimated_frame_bounds():
    g = gram_info(build_haar_undecimated(256, 6, "primal"))
    assert g.frame_lower == pytest.approx(2.0, rel=0.01)
    assert g.frame_upper == pytest.approx(64.0, rel=0.01)
    gd = gram_info(build_haar_undecimated(256, 6, "dual"))
    assert gd.frame_lower == pytest.approx(1 / 64, rel=0.01)
    assert gd.frame_upper == pytest.approx(0.5, rel=0.01)
    assert gd.condition == pytest.approx(32.0, rel=0.01)


def test_undecimated_2d():
    P = build_haar_undecimated_2d(16, 2, "primal").matrix
    D = build_haar_undecimated_2d(16, 2, "dual").matrix
    assert P.shape == (7 * 256, 256)
    assert np.abs(D.T @ P - np.eye(256)).max() <= 1e-9
    c = P @ np.ones(256)
    nz = np.nonzero(np.abs(c) > 1e-12)[0]
    assert nz.min() >= 6 * 256  # only the coarse block responds
    with pytest.raises(ValueError):
        build_haar_undecimated_2d(10, 2)


def test_random_tight_frame_and_rows():
    op = build_random_tight(6, 4, seed=3)
    assert np.abs(op.matrix.T @ op.matrix - np.eye(4)).max() <= 1e-10
    short = build_random_tight(3, 4, seed=3)
    assert np.abs(short.matrix @ short.matrix.T - np.eye(3)).max() <= 1e-10
    assert np.abs(short.matrix.T @ short.matrix - np.eye(4)).max() > 0.1
    again = build_random_tight(6, 4, seed=3)
    assert np.array_equal(op.matrix, again.matrix)
    assert not np.array_equal(op.matrix, build_random_tight(6, 4, seed=4).matrix)


def test_random_tight_general_position():
    P = build_random_tight(12, 8, seed=11).matrix
    rng = np.random.default_rng(0)
    for _ in range(20):
        rows = rng.choice(12, size=8, replace=False)
        assert np.linalg.matrix_rank(P[rows]) == 8


def test_gram_info_identity():
    g = gram_info(build_identity(5))
    np.testing.assert_array_equal(g.gram, np.eye(5))
    assert g.frame_lower == g.frame_upper == 1.0


@pytest.mark.parametrize("kind,n,J", [
    ("dwt_haar", 32, 3), ("rdwt_haar", 32, 3), ("irdwt_haar", 32, 3), ("tv1", 20, 0),
    ("tv2", 5, 0), ("identity", 7, 0), ("irdwt_haar_2d", 8, 2),
])
def test_frame_inequality_and_gram(kind, n, J):
    op = build_operator(kind, n, J)
    g = gram_info(op)
    np.testing.assert_allclose(g.gram, g.gram.T, atol=1e-10)
    ev = np.linalg.eigvalsh(op.matrix.T @ op.matrix)
    assert g.frame_lower == pytest.approx(max(ev[0], 0.0), abs=1e-8)
    assert g.frame_upper == pytest.approx(ev[-1], abs=1e-8)
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = rng.standard_normal(op.n)
        e = np.sum((op.matrix @ x) ** 2)
        assert g.frame_lower * (x @ x) - 1e-8 <= e <= g.frame_upper * (x @ x) + 1e-8


def test_scaled_operator():
    op = build_tv1(5).scaled(-2.0)
    np.testing.assert_array_equal(op.matrix, -2.0 * build_tv1(5).matrix)


def test_serialization_roundtrip(tmp_path):
    op = build_random_tight(9, 5, seed=21)
    path = tmp_path / "op.bin"
    save_operator(op, path)
    back = load_operator(path)
    assert back.kind == op.kind and back.seed == 21
    assert np.array_equal(back.matrix, op.matrix)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        load_operator(bad)
