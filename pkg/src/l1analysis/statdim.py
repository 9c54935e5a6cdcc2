"""Monte-Carlo statistical dimension of the l1-analysis descent cone and two
numerical checks of the underlying theory.

For a standard Gaussian ``g`` and a small step ``t`` the program

    sup <g, h>  s.t.  ||Psi (x + t h)||_1 <= ||Psi x||_1,  ||h||_2 <= 1

returns the norm of the projection of ``g`` onto the descent cone, so the
mean of its squared value over Gaussian draws estimates the statistical
dimension.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize_scalar
from scipy.special import erf
from scipy.stats import norm

from .linalg import l1_ball_project
from .operators import AnalysisOperator
from .rate import h_eval
from .rng import stream

__all__ = [
    "StatDimEstimate",
    "ProgramValue",
    "DescentProgram",
    "descent_program_value",
    "statistical_dimension",
    "l1_statdim_closed_form",
    "verify_mean_width_sandwich",
    "clip",
    "clipped_cov_bound",
    "clipped_cov_oracle",
]


@dataclass(frozen=True)
class StatDimEstimate:
    mean: float
    std_error: float
    samples: int
    scale_t: float
    failures: int = 0

    def to_json(self) -> str:
        d = asdict(self)
        d["k"] = d.pop("samples")
        d["t"] = d.pop("scale_t")
        return json.dumps(d, sort_keys=True)


@dataclass(frozen=True)
class ProgramValue:
    value: float
    converged: bool
    iters: int


class DescentProgram:
    """Reusable ADMM solver for the descent program of a fixed ``(Psi, x, t)``.

    Rows of ``Psi`` are normalized and the l1 constraint becomes a weighted
    l1 ball with weights ``||psi_k||``; this keeps the splitting well
    conditioned for frames whose row norms span several orders of magnitude.
    Variables: ``h`` (free), ``v = h`` in the unit ball and ``z = Psi_tilde h``
    in the shifted weighted ball. The linear system ``I + Psi_tilde^T Psi_tilde``
    is factored once.
    """

    def __init__(self, op: AnalysisOperator, x: np.ndarray, t: float = 0.01,
                 tol: float = 1e-8, max_iters: int = 20_000, penalty: float = 10.0,
                 over_relax: float = 1.8, adapt_every: int = 20):
        if not t > 0:
            raise ValueError("t must be positive")
        x = np.asarray(x, dtype=float)
        if x.shape != (op.n,):
            raise ValueError("x has the wrong dimension")
        self.w = op.row_norms
        self.Pt = op.matrix / self.w[:, None]
        self.c = self.Pt @ x
        self.radius = float(np.abs(op.matrix @ x).sum())
        if self.radius == 0.0:
            raise ValueError("x lies in ker Psi; descent set is a subspace")
        self.t = float(t)
        self.K = cho_factor(np.eye(op.n) + self.Pt.T @ self.Pt)
        self.tol = tol
        self.max_iters = max_iters
        self.penalty = penalty
        self.alpha = over_relax
        self.adapt_every = adapt_every

    def _proj_z(self, q):
        return (l1_ball_project(self.c + self.t * q, self.radius, self.w) - self.c) / self.t

    def solve(self, g: np.ndarray) -> ProgramValue:
        g = np.asarray(g, dtype=float)
        if not np.any(g):
            return ProgramValue(0.0, True, 0)
        Pt, K, alpha = self.Pt, self.K, self.alpha
        n, N = Pt.shape[1], Pt.shape[0]
        rho = self.penalty
        v = np.zeros(n)
        z = np.zeros(N)
        u1 = np.zeros(n)
        u2 = np.zeros(N)
        converged = False
        it = 0
        for it in range(1, self.max_iters + 1):
            h = cho_solve(K, g / rho + v - u1 + Pt.T @ (z - u2))
            Ph = Pt @ h
            hh = alpha * h + (1.0 - alpha) * v
            Phh = alpha * Ph + (1.0 - alpha) * z
            v_old, z_old = v, z
            q = hh + u1
            nq = np.linalg.norm(q)
            v = q if nq <= 1.0 else q / nq
            z = self._proj_z(Phh + u2)
            u1 += hh - v
            u2 += Phh - z
            if it % self.adapt_every == 0:
                rp = math.sqrt(np.sum((h - v) ** 2) + np.sum((Ph - z) ** 2))
                rd = rho * np.linalg.norm((v - v_old) + Pt.T @ (z - z_old))
                if rp < self.tol and rd < self.tol:
                    converged = True
                    break
                if rp > 10.0 * rd:
                    rho *= 2.0
                    u1 /= 2.0
                    u2 /= 2.0
                elif rd > 10.0 * rp:
                    rho /= 2.0
                    u1 *= 2.0
                    u2 *= 2.0
        return ProgramValue(max(float(g @ v), 0.0), converged, it)


def descent_program_value(op: AnalysisOperator, x: np.ndarray, t: float,
                          g: np.ndarray, **solver_kw) -> ProgramValue:
    """Optimal value of the descent program for one Gaussian vector ``g``."""
    return DescentProgram(op, x, t, **solver_kw).solve(g)


def statistical_dimension(op: AnalysisOperator, x: np.ndarray, t: float = 0.01,
                          k: int = 200, seed: int = 0, **solver_kw) -> StatDimEstimate:
    """Mean of the squared program value over ``k`` Gaussian draws.

    Draw ``i`` uses the substream ``(seed, "statdim", i)``, so the estimate
    does not depend on evaluation order. Unconverged samples are counted in
    ``failures`` and left out of the mean.
    """
    prog = DescentProgram(op, x, t, **solver_kw)
    vals = []
    failures = 0
    for i in range(k):
        g = stream(seed, "statdim", i).standard_normal(op.n)
        res = prog.solve(g)
        if res.converged:
            vals.append(res.value**2)
        else:
            failures += 1
    if not vals:
        return StatDimEstimate(float("nan"), float("nan"), 0, t, failures)
    arr = np.asarray(vals)
    mean = math.fsum(vals) / arr.size
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return StatDimEstimate(mean, se, int(arr.size), t, failures)


def _tail_sq(tau: float) -> float:
    # E (|g| - tau)_+^2 by quadrature
    val, _ = quad(lambda s: (s - tau) ** 2 * norm.pdf(s), tau, np.inf,
                  epsabs=1e-13, epsrel=1e-12)
    return 2.0 * val


def l1_statdim_closed_form(n: int, S: int) -> float:
    """Statistical dimension of the l1 descent cone at an ``S``-sparse point,
    ``inf_tau S (1 + tau^2) + (n - S) E (|g| - tau)_+^2``, by 1D quadrature."""
    if not 0 <= S <= n:
        raise ValueError("need 0 <= S <= n")
    if S == n:
        return float(n)
    if S == 0:
        return 0.0
    f = lambda tau: S * (1.0 + tau * tau) + (n - S) * _tail_sq(tau)
    res = minimize_scalar(f, bounds=(0.0, 10.0), method="bounded",
                          options={"xatol": 1e-10})
    return float(min(res.fun, f(0.0)))


def verify_mean_width_sandwich(estimate: StatDimEstimate, M: float) -> bool:
    """``delta_hat <= M + 1 + 3 * std_error``."""
    return bool(estimate.mean <= M + 1.0 + 3.0 * estimate.std_error)


def clip(s, beta):
    """``sign(s) * min(|s|, beta)``."""
    return np.clip(s, -beta, beta)


def clipped_cov_bound(ip: float, beta1: float, beta2: float) -> float:
    """``|ip| * [erf(b_min/sqrt 2) - h(b_max) b_min b_max]``."""
    if beta1 < 0 or beta2 < 0:
        raise ValueError("clip levels must be nonnegative")
    bmin, bmax = min(beta1, beta2), max(beta1, beta2)
    if bmin == 0.0:
        return 0.0
    return abs(ip) * (float(erf(bmin / math.sqrt(2.0))) - h_eval(bmax) * bmin * bmax)


def clipped_cov_oracle(v1: np.ndarray, v2: np.ndarray, beta1: float, beta2: float,
                       samples: int = 1_000_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of ``clip(<v1,g>) clip(<v2,g>)``.

    For unit vectors the pair ``(<v1,g>, <v2,g>)`` is bivariate normal with
    correlation ``rho = <v1,v2>``; it is sampled as ``(g, rho g + sqrt(1-rho^2) g')``.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    rho = float(np.clip(v1 @ v2, -1.0, 1.0))
    rng = stream(seed, "clipped_cov")
    g1 = rng.standard_normal(samples)
    g2 = rng.standard_normal(samples)
    prod = clip(g1, beta1) * clip(rho * g1 + math.sqrt(1.0 - rho * rho) * g2, beta2)
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(samples))
