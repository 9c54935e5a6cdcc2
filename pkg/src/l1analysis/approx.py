"""Low-complexity approximation of compressible signals.

A subspace ``U`` with small sampling rate ``M(Psi, P_U x)`` and small
distance ``||x - x_bar||`` trades approximation error for measurements. Two
ways of choosing ``U`` are provided: a greedy exclusion of analysis atoms and
the naive kernel of the rows outside the ``S`` largest coefficients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import Subspace, kernel_basis, project
from .operators import AnalysisOperator, GramInfo
from .rate import sampling_rate_M

__all__ = [
    "GreedyStep",
    "GreedyTrace",
    "GreedyPath",
    "greedy_subspace",
    "LargestCoefficients",
    "surrogate_point",
    "SweepRecord",
    "compressible_sweep",
]

_DEP_TOL = 1e-10


@dataclass(frozen=True)
class GreedyStep:
    chosen: int
    excluded: int
    S0: int
    error: float


@dataclass
class GreedyTrace:
    """Record of one greedy run.

    ``selected_cosupport`` lists excluded indices in exclusion order;
    ``stop`` is ``"target"``, ``"exhausted"`` or ``"stagnation"``.
    """

    selected_cosupport: list[int]
    per_iteration: list[GreedyStep]
    final_U: Subspace
    stop: str

    @property
    def aborted(self) -> bool:
        return self.stop == "stagnation"

    def to_json(self) -> str:
        return json.dumps(
            {
                "selected_cosupport": self.selected_cosupport,
                "per_iteration": [s.__dict__ for s in self.per_iteration],
                "dim_U": self.final_U.dim,
                "stop": self.stop,
            },
            sort_keys=True,
        )


class _SpanBuilder:
    """Orthonormal basis of a growing span of row vectors."""

    def __init__(self, n: int):
        self.Q = np.zeros((n, n))
        self.r = 0

    def add(self, v: np.ndarray) -> bool:
        if self.r == self.Q.shape[0]:
            return False
        nv = np.linalg.norm(v)
        Q = self.Q[:, : self.r]
        for _ in range(2):
            v = v - Q @ (Q.T @ v)
        nr = np.linalg.norm(v)
        if nr <= _DEP_TOL * nv:
            return False
        self.Q[:, self.r] = v / nr
        self.r += 1
        return True

    def residual(self, x: np.ndarray, r: int | None = None) -> np.ndarray:
        Q = self.Q[:, : self.r if r is None else r]
        return x - Q @ (Q.T @ x)

    def complement(self, r: int | None = None) -> Subspace:
        r = self.r if r is None else r
        n = self.Q.shape[0]
        if r == 0:
            return Subspace.full(n)
        return kernel_basis(self.Q[:, :r].T)


class GreedyPath:
    """Full trajectory of the greedy exclusion for one ``(Psi, x)``.

    Each iteration (1) picks the candidate ``k`` minimizing
    ``|<psi_k, x>| / ||psi_k||``, (2) excludes every candidate ``k'`` with
    ``|<psi_k', x - P_{span psi_k} x>| <= eps``, (3) sets ``U`` to the
    orthogonal complement of the excluded rows and (4) records
    ``S0 = ||Psi P_U x||_0`` at tolerance ``eps``.

    ``reproject=False`` evaluates steps (1) and (2) at the original ``x``;
    ``reproject=True`` uses the current ``P_U x`` instead.

    The run stops when the candidate set is empty, when ``S0`` reaches
    ``stop_at`` or, with ``patience`` set, when ``patience`` consecutive
    iterations that changed ``U`` failed to lower ``S0``. Iterations that
    exclude a row already spanned by earlier exclusions leave ``U`` and ``S0``
    untouched and do not count toward ``patience``.
    """

    def __init__(self, op: AnalysisOperator, x: np.ndarray, eps: float | None = None,
                 stop_at: int = 0, patience: int | None = 2, reproject: bool = False):
        x = np.asarray(x, dtype=float)
        P = op.matrix
        N, n = op.N, op.n
        coeffs = P @ x
        cmax = np.abs(coeffs).max()
        self.eps = 1e-9 * cmax if eps is None else float(eps)
        self.op = op
        self.x = x
        self.N = N
        norms = op.row_norms
        span = _SpanBuilder(n)
        candidate = np.ones(N, dtype=bool)
        excluded_order: list[int] = []
        steps: list[GreedyStep] = []
        ranks: list[int] = []
        S0 = N
        stall = 0
        stop = "exhausted"
        current = x
        while S0 > stop_at:
            if not candidate.any():
                stop = "exhausted"
                break
            base = current if reproject else x
            c = P @ base
            score = np.where(candidate, np.abs(c) / norms, np.inf)
            k = int(np.argmin(score))
            resid = base - (c[k] / norms[k] ** 2) * P[k]
            drop = candidate & (np.abs(P @ resid) <= self.eps)
            drop[k] = True
            new = np.nonzero(drop)[0]
            candidate[new] = False
            changed = False
            for j in new:
                changed |= span.add(P[j])
                excluded_order.append(int(j))
            current = span.residual(x)
            S0_new = int(np.sum(np.abs(P @ current) > self.eps))
            if changed and S0_new >= S0:
                stall += 1
            elif changed:
                stall = 0
            S0 = S0_new
            steps.append(GreedyStep(k, len(excluded_order), S0, float(np.linalg.norm(x - current))))
            ranks.append(span.r)
            if S0 <= stop_at:
                stop = "target"
                break
            if patience is not None and stall >= patience:
                stop = "stagnation"
                break
        self.selected = excluded_order
        self.steps = steps
        self.ranks = ranks
        self.stop = stop
        self._span = span
        self._pmin = np.minimum.accumulate([st.S0 for st in steps]) if steps else np.zeros(0)

    def index_for(self, S: int) -> int | None:
        """First iteration with ``S0 <= S``; ``-1`` for the initial state
        ``U = R^n`` when ``S >= N``; ``None`` when never reached."""
        if S >= self.N:
            return -1
        i = int(np.searchsorted(-self._pmin, -S, side="left"))
        return i if i < len(self.steps) else None

    def subspace_at(self, i: int) -> Subspace:
        if i < 0:
            return Subspace.full(self.op.n)
        return self._span.complement(self.ranks[i])

    def trace_for(self, S: int) -> GreedyTrace:
        i = self.index_for(S)
        if i is None:
            last = len(self.steps) - 1
            n_exc = self.steps[last].excluded if self.steps else 0
            return GreedyTrace(self.selected[:n_exc], list(self.steps),
                               self.subspace_at(last), self.stop)
        if i < 0:
            return GreedyTrace([], [], Subspace.full(self.op.n), "target")
        n_exc = self.steps[i].excluded
        return GreedyTrace(self.selected[:n_exc], self.steps[: i + 1],
                           self.subspace_at(i), "target")

    # provider interface for compressible_sweep
    def key(self, S: int):
        return self.index_for(S)

    def __call__(self, S: int) -> Subspace | None:
        i = self.index_for(S)
        return None if i is None else self.subspace_at(i)


def greedy_subspace(op: AnalysisOperator, x: np.ndarray, S_target: int,
                    eps: float | None = None, patience: int | None = 2,
                    reproject: bool = False) -> GreedyTrace:
    """Greedy subspace selection down to analysis sparsity ``S_target``.

    ``eps`` defaults to ``1e-9 * max_k |<psi_k, x>|``. ``S_target >= N``
    returns ``U = R^n``. See :class:`GreedyPath` for the loop itself.
    """
    if not 1 <= S_target <= op.N:
        raise ValueError("S_target must lie in [1, N]")
    if S_target >= op.N:
        return GreedyTrace([], [], Subspace.full(op.n), "target")
    path = GreedyPath(op, x, eps, stop_at=S_target, patience=patience, reproject=reproject)
    return path.trace_for(S_target)


class LargestCoefficients:
    """``U_S = ker Psi_{S^c}`` with ``S`` the indices of the ``S`` largest
    coefficients of ``Psi x`` (ties by lower index)."""

    def __init__(self, op: AnalysisOperator, x: np.ndarray):
        self.op = op
        self.order = np.argsort(-np.abs(op.matrix @ np.asarray(x, float)), kind="stable")

    def key(self, S: int):
        return int(min(S, self.op.N))

    def __call__(self, S: int) -> Subspace:
        if S >= self.op.N:
            return Subspace.full(self.op.n)
        rest = self.order[S:]
        return kernel_basis(self.op.matrix[rest])


def surrogate_point(op: AnalysisOperator, x: np.ndarray, U: Subspace) -> np.ndarray:
    """``(||Psi x||_1 / ||Psi P_U x||_1) P_U x``; same l1-analysis norm as ``x``."""
    x = np.asarray(x, dtype=float)
    pu = project(U, x)
    denom = np.abs(op.matrix @ pu).sum()
    if denom == 0.0 or denom <= 1e-13 * np.abs(op.matrix @ x).sum():
        raise ValueError("Psi P_U x vanishes; surrogate point undefined")
    return (np.abs(op.matrix @ x).sum() / denom) * pu


@dataclass(frozen=True)
class SweepRecord:
    m: int
    S_used: int | None
    M: float | None
    approx_error: float | None

    @property
    def feasible(self) -> bool:
        return self.S_used is not None


def compressible_sweep(op: AnalysisOperator, x: np.ndarray, m_values, provider,
                       S_init: int | None = None, gram: GramInfo | None = None,
                       ) -> list[SweepRecord]:
    """For each ``m``, lower ``S`` from ``S_init`` until
    ``M(Psi, P_{U_S} x) <= m`` and record ``||x - x_bar||``.

    ``provider(S)`` returns ``U_S`` (or ``None`` if unavailable); an optional
    ``provider.key(S)`` identifies equal subspaces so that each distinct
    ``U_S`` is evaluated once. States with ``Psi P_U x = 0`` are skipped. An
    ``m`` with no admissible ``S`` gets an infeasible record.
    """
    x = np.asarray(x, dtype=float)
    if S_init is None:
        c = op.matrix @ x
        S_init = int(np.sum(np.abs(c) > 1e-9 * np.abs(c).max()))
    keyf = getattr(provider, "key", lambda S: S)
    cache: dict = {}
    l1x = np.abs(op.matrix @ x).sum()

    def evaluate(S):
        k = keyf(S)
        if k is None:
            return None
        if k not in cache:
            U = provider(S)
            res = None
            if U is not None:
                pu = project(U, x)
                l1pu = np.abs(op.matrix @ pu).sum()
                if l1pu > 1e-12 * l1x:
                    M = sampling_rate_M(op, gram, pu).M
                    xb = (l1x / l1pu) * pu
                    res = (M, float(np.linalg.norm(x - xb)))
            cache[k] = res
        return cache[k]

    out = []
    for m in m_values:
        rec = SweepRecord(int(m), None, None, None)
        for S in range(S_init, 0, -1):
            r = evaluate(S)
            if r is not None and r[0] <= m:
                rec = SweepRecord(int(m), S, r[0], r[1])
                break
        out.append(rec)
    return out
