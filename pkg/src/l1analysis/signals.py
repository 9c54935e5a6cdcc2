"""Test signals: Donoho-Johnstone blocks, its smoothed variant, and the random
piecewise-constant / cosparse generators of the phase-transition sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import kernel_basis
from .operators import AnalysisOperator, build_tv1
from .rng import stream

__all__ = [
    "BLOCKS_JUMPS",
    "BLOCKS_HEIGHTS",
    "SignalSpec",
    "InfeasibleSignal",
    "blocks",
    "blocks_smooth",
    "dense_jumps",
    "random_piecewise",
    "random_cosparse",
    "gen_signal",
]

BLOCKS_JUMPS = (0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81)
BLOCKS_HEIGHTS = (4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2)

SMOOTH_INTERVAL = (0.44, 0.65)


class InfeasibleSignal(ValueError):
    """Raised when a kernel-based generator meets a trivial kernel."""


def _grid(n: int, grid: str) -> np.ndarray:
    if grid == "wavelab":
        return np.arange(1, n + 1) / n
    if grid == "midpoint":
        return (np.arange(n) + 0.5) / n
    raise ValueError("grid must be 'wavelab' or 'midpoint'")


def blocks(n: int, grid: str = "wavelab") -> np.ndarray:
    """Piecewise-constant blocks signal sampled on ``n`` points.

    ``grid='wavelab'`` samples ``t = k/n, k = 1..n`` with the step convention
    ``(1 + sign(t - t_j))/2``, which places a half step on any jump that falls
    exactly on a grid point (at ``n = 256`` this splits the jump at 0.25 in
    two). ``grid='midpoint'`` samples ``t = (k - 1/2)/n`` and gives 11 clean
    jumps.
    """
    t = _grid(n, grid)
    x = np.zeros(n)
    for tj, hj in zip(BLOCKS_JUMPS, BLOCKS_HEIGHTS):
        x += hj * (1.0 + np.sign(t - tj)) / 2.0
    return x


def blocks_smooth(n: int, grid: str = "wavelab") -> np.ndarray:
    """Blocks with the segment over ``[0.44, 0.65)`` replaced by a raised-cosine
    ramp from the level on the left of 0.44 to the level right of 0.65."""
    x = blocks(n, grid)
    t = _grid(n, grid)
    lo, hi = SMOOTH_INTERVAL
    inside = (t >= lo) & (t < hi)
    left = x[np.nonzero(t < lo)[0][-1]]
    right = x[np.nonzero(t >= hi)[0][0]]
    s = (t[inside] - lo) / (hi - lo)
    x[inside] = left + (right - left) * 0.5 * (1.0 - np.cos(np.pi * s))
    return x


def dense_jumps(n: int, s_tv: int) -> np.ndarray:
    """``x_j = (-1)**(j-1)`` for ``j <= s_tv`` and 0 afterwards."""
    if not 0 <= s_tv <= n:
        raise ValueError("s_tv must lie in [0, n]")
    x = np.zeros(n)
    x[:s_tv] = (-1.0) ** np.arange(s_tv)
    return x


def _kernel_draw(rows: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    B = kernel_basis(rows).basis if rows.shape[0] else np.eye(n)
    if B.shape[1] == 0:
        raise InfeasibleSignal("kernel of the cosupport rows is trivial")
    return B @ rng.standard_normal(B.shape[1])


def random_piecewise(n: int, s_tv: int, seed: int, literal: bool = False) -> np.ndarray:
    """Random piecewise-constant signal with at most ``s_tv`` jumps.

    Draws ``s_tv`` jump positions uniformly and returns ``B c`` with ``B`` an
    orthonormal basis of the kernel of the difference rows *outside* the jump
    set. ``literal=True`` instead uses the kernel of the rows *inside* the
    set, which makes ``s_tv`` the number of enforced zeros.
    """
    if not 0 <= s_tv <= n - 1:
        raise ValueError("s_tv must lie in [0, n-1]")
    rng = stream(seed, "random_piecewise", n, s_tv)
    D = build_tv1(n).matrix
    S = np.sort(rng.choice(n - 1, size=s_tv, replace=False))
    mask = np.zeros(n - 1, dtype=bool)
    mask[S] = True
    rows = D[mask] if literal else D[~mask]
    return _kernel_draw(rows, n, rng)


def random_cosparse(op: AnalysisOperator, S: int, seed: int) -> np.ndarray:
    """``x = B c`` with ``B`` a kernel basis of ``Psi`` restricted to the
    complement of a uniformly random support of size ``S``."""
    N, n = op.N, op.n
    if not 0 <= S <= N:
        raise ValueError("S must lie in [0, N]")
    rng = stream(seed, "random_cosparse", N, n, S)
    supp = rng.choice(N, size=S, replace=False)
    mask = np.ones(N, dtype=bool)
    mask[supp] = False
    return _kernel_draw(op.matrix[mask], n, rng)


@dataclass(frozen=True)
class SignalSpec:
    """Recipe for :func:`gen_signal`.

    ``params`` holds kind-specific values: ``s_tv`` for dense_jumps and
    random_piecewise, ``S`` and ``operator`` for random_cosparse, ``seed``
    for the random kinds and an optional ``grid`` for the blocks kinds.
    """

    kind: str
    n: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")


def gen_signal(spec: SignalSpec) -> np.ndarray:
    p = spec.params
    if spec.kind == "blocks":
        return blocks(spec.n, p.get("grid", "wavelab"))
    if spec.kind == "blocks_smooth":
        return blocks_smooth(spec.n, p.get("grid", "wavelab"))
    if spec.kind == "dense_jumps":
        return dense_jumps(spec.n, p["s_tv"])
    if spec.kind == "random_piecewise":
        return random_piecewise(spec.n, p["s_tv"], p.get("seed", 0), p.get("literal", False))
    if spec.kind == "random_cosparse":
        op = p["operator"]
        if op.n != spec.n:
            raise ValueError("operator dimension does not match n")
        return random_cosparse(op, p["S"], p.get("seed", 0))
    raise ValueError(f"unknown signal kind {spec.kind!r}")
