import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1analysis.operators import build_random_tight, build_tv1
from l1analysis.signals import (
    InfeasibleSignal,
    SignalSpec,
    blocks,
    blocks_smooth,
    dense_jumps,
    gen_signal,
    random_cosparse,
    random_piecewise,
)


def tv_nnz(x):
    d = np.diff(x)
    return int(np.sum(np.abs(d) > 1e-9 * max(np.abs(d).max(), 1e-300)))


def test_dense_jumps_example():
    np.testing.assert_array_equal(dense_jumps(8, 3), [1, -1, 1, 0, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        dense_jumps(4, 5)


def test_blocks_jump_counts():
    assert tv_nnz(blocks(256, grid="midpoint")) == 11
    # jump at 0.25 lands on the sample k = 64 and is split into two half steps
    x = blocks(256)
    assert tv_nnz(x) == 12
    assert x[63] == pytest.approx(0.5 * (x[62] + x[64]))


def test_blocks_smooth_differs_only_on_segment():
    t = np.arange(1, 257) / 256
    a, b = blocks(256), blocks_smooth(256)
    outside = (t < 0.44) | (t >= 0.65)
    np.testing.assert_array_equal(a[outside], b[outside])
    assert np.all(np.diff(b[~outside]) != 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 60), st.data())
def test_random_piecewise_jump_bound(n, data):
    s_tv = data.draw(st.integers(0, n - 1))
    seed = data.draw(st.integers(0, 2**31))
    x = random_piecewise(n, s_tv, seed)
    d = np.abs(np.diff(x))
    assert np.sum(d > 1e-9 * np.abs(x).max()) <= s_tv


def test_random_piecewise_literal_reading():
    x = random_piecewise(30, 5, seed=2, literal=True)
    d = build_tv1(30).matrix @ x
    assert np.sum(np.abs(d) <= 1e-10 * np.abs(d).max()) >= 5


def test_random_piecewise_deterministic():
    np.testing.assert_array_equal(random_piecewise(40, 6, 3), random_piecewise(40, 6, 3))


def test_random_cosparse_support_and_infeasible():
    op = build_random_tight(60, 50, seed=0)
    x = random_cosparse(op, 20, seed=1)
    c = op.matrix @ x
    assert np.sum(np.abs(c) > 1e-9 * np.abs(c).max()) <= 20
    with pytest.raises(InfeasibleSignal):
        random_cosparse(op, 5, seed=1)


def test_gen_signal_dispatch():
    np.testing.assert_array_equal(gen_signal(SignalSpec("blocks", 64)), blocks(64))
    np.testing.assert_array_equal(gen_signal(SignalSpec("dense_jumps", 8, {"s_tv": 3})),
                                  dense_jumps(8, 3))
    op = build_random_tight(12, 8, seed=0)
    x = gen_signal(SignalSpec("random_cosparse", 8, {"operator": op, "S": 6, "seed": 4}))
    np.testing.assert_array_equal(x, random_cosparse(op, 6, 4))
    with pytest.raises(ValueError):
        SignalSpec("blocks", 1)
    with pytest.raises(ValueError):
        gen_signal(SignalSpec("nothing", 8))
