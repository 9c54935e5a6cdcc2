"""Sampling-rate function and the measurement thresholds derived from it.

The scalar kernel is

    h(tau) = sqrt(2/pi) exp(-tau^2/2) / tau + erf(tau/sqrt(2)) - 1,

a strictly decreasing bijection of (0, inf) onto itself, and
``Phi(rho) = erf(h^{-1}(rho)/sqrt(2))``. For an operator ``Psi`` and a signal
``x`` with generalized sparsity ``S``, generalized cosparsity ``L`` and its
diagonal variant ``Lbar``, the predicted number of Gaussian measurements is

    M(Psi, x) = n - (Lbar^2 / L) * Phi(S / L).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf, erfcx

from .cosparsity import DEFAULT_EPS_SUPP, CosparsityProfile, analysis_profile
from .linalg import Subspace, kernel_basis, project
from .operators import AnalysisOperator, GramInfo

__all__ = [
    "H_BRACKET",
    "RateReport",
    "StableBound",
    "h_eval",
    "h_inverse",
    "phi_eval",
    "sampling_rate_M",
    "simplified_M",
    "exact_recovery_m",
    "recovery_probability",
    "krz_bound",
    "krz_for_profile",
    "stable_bound",
    "approx_error_upper",
]

H_BRACKET = (1e-12, 40.0)
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 / math.pi)


def h_eval(tau):
    """Evaluate ``h`` for ``tau > 0`` (scalar or array).

    Written as ``exp(-tau^2/2) * (sqrt(2/pi)/tau - erfcx(tau/sqrt 2))`` to avoid
    the cancellation in ``erf - 1`` for large ``tau``.
    """
    t = np.asarray(tau, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("h is defined for tau > 0 only")
    with np.errstate(over="ignore"):
        out = np.exp(-0.5 * t * t) * (_SQRT2PI / t - erfcx(t / _SQRT2))
    return float(out) if np.ndim(out) == 0 else out


def h_inverse(rho: float, return_clamped: bool = False):
    """Solve ``h(tau) = rho`` by bisection on ``[1e-12, 40]``.

    Bisection runs in ``log tau`` until the bracket collapses to adjacent
    floating-point numbers. Values of ``rho`` outside ``h`` of the bracket
    return the nearest endpoint; with ``return_clamped=True`` a flag telling
    whether this happened is returned as well.
    """
    rho = float(rho)
    if not rho > 0:
        raise ValueError("h_inverse needs rho > 0")
    lo, hi = H_BRACKET
    clamped = False
    if rho >= h_eval(lo):
        tau, clamped = lo, rho > h_eval(lo)
    elif rho <= h_eval(hi):
        tau, clamped = hi, rho < h_eval(hi)
    else:
        a, b = math.log(lo), math.log(hi)
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid in (a, b):
                break
            if h_eval(math.exp(mid)) > rho:
                a = mid
            else:
                b = mid
        ta, tb = math.exp(a), math.exp(b)
        tau = ta if abs(h_eval(ta) - rho) <= abs(h_eval(tb) - rho) else tb
    return (tau, clamped) if return_clamped else tau


def phi_eval(rho: float) -> float:
    """``Phi(rho) = erf(h^{-1}(rho) / sqrt(2))``."""
    return float(erf(h_inverse(rho) / _SQRT2))


@dataclass
class RateReport:
    """Result of :func:`sampling_rate_M`.

    ``degenerate`` is ``"none"``, ``"full_support"`` (empty cosupport, ``M = n``)
    or ``"kernel_member"`` (``Psi x = 0``, ``M = dim ker Psi``).
    """

    M: float
    simplified: float
    n: int
    degenerate: str
    profile: CosparsityProfile
    krz: float | None = None

    def m_exact(self, u: float) -> int:
        return exact_recovery_m(self.M, u)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "profile"}
        d["simplified"] = None if math.isinf(self.simplified) else self.simplified
        d["profile"] = self.profile.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _m_from_profile(p: CosparsityProfile, n: int) -> float:
    ratio = p.gen_sparsity / p.gen_cosparsity
    return n - p.gen_cosparsity_diag**2 / p.gen_cosparsity * phi_eval(ratio)


def sampling_rate_M(
    op: AnalysisOperator,
    gram: GramInfo | None,
    x: np.ndarray,
    eps_supp: float = DEFAULT_EPS_SUPP,
) -> RateReport:
    """Sampling-rate function ``M(Psi, x)`` with its degeneracy tag."""
    n = op.n
    prof = analysis_profile(op, gram, x, eps_supp)
    if prof.S == 0:
        M = float(kernel_basis(op.matrix).dim)
        return RateReport(M, math.inf, n, "kernel_member", prof)
    if prof.L == 0:
        return RateReport(float(n), math.inf, n, "full_support", prof)
    M = _m_from_profile(prof, n)
    return RateReport(M, simplified_M(prof, n), n, "none", prof)


def simplified_M(profile: CosparsityProfile, n: int) -> float:
    """Closed-form upper bound on ``M`` avoiding ``h^{-1}``: minimum of

    ``n - Lbar^2/L + (Lbar/L)^2 [2 S log((S + Lbar)/S) + S]`` and
    ``n - (2/pi) Lbar^2 / (S + L)``.

    The second branch uses ``Phi(S/L) >= (2/pi) L / (S + L)``. Writing
    ``S + Lbar`` in its denominator is only valid when ``L = Lbar`` (for
    instance orthonormal ``Psi``) and undercuts ``M`` for redundant frames.
    """
    S = profile.gen_sparsity
    L = profile.gen_cosparsity
    Lb = profile.gen_cosparsity_diag
    if not (S > 0 and L > 0):
        raise ValueError("simplified bound needs a nondegenerate profile")
    first = n - Lb**2 / L + (Lb / L) ** 2 * (2.0 * S * math.log((S + Lb) / S) + S)
    second = n - (2.0 / math.pi) * Lb**2 / (S + L)
    return min(first, second)


def exact_recovery_m(M: float, u: float) -> int:
    """Smallest integer ``m`` with ``m > (sqrt(M) + u)^2 + 1``."""
    if M < 0 or u < 0:
        raise ValueError("M and u must be nonnegative")
    return int(math.floor((math.sqrt(M) + u) ** 2 + 1.0)) + 1


def recovery_probability(u: float) -> float:
    """Probability ``1 - exp(-u^2/2)`` attached to :func:`exact_recovery_m`."""
    return 1.0 - math.exp(-0.5 * u * u)


def _min_m(rhs: float) -> int:
    # smallest integer m >= 1 with m^2/(m+1) >= rhs
    if rhs <= 0.5:
        return 1
    m = int(math.floor(0.5 * (rhs + math.sqrt(rhs * rhs + 4.0 * rhs))))
    m = max(m - 2, 1)
    while m * m / (m + 1.0) < rhs:
        m += 1
    return m


def krz_bound(
    kind: str,
    *,
    n: int,
    N: int,
    b: float | None = None,
    cosupport_norm_sum: float | None = None,
    S: int | None = None,
    eps: float = 1.0,
    tau: float = 0.0,
) -> int:
    """Gaussian measurement bound for analysis basis pursuit built on frame
    bounds (``kind='frame'``) or for 1D total variation (``kind='tv1'``).

    Returns the smallest ``m`` with ``m^2/(m+1) >= (sqrt(inner) + sqrt(2 log(1/eps) + tau))^2``
    where ``inner`` is ``n - 2 (sum_{S^c} ||psi_i||)^2 / (pi b N)`` for frames
    and ``n (1 - (1 - (S+1)/N)^2 / pi)`` for TV. The defaults ``eps = 1``,
    ``tau = 0`` drop the probability and noise terms.
    """
    if not 0 < eps <= 1 or tau < 0:
        raise ValueError("need 0 < eps <= 1 and tau >= 0")
    if kind == "frame":
        if b is None or cosupport_norm_sum is None:
            raise ValueError("frame kind needs b and cosupport_norm_sum")
        inner = n - 2.0 * cosupport_norm_sum**2 / (math.pi * b * N)
    elif kind == "tv1":
        if S is None:
            raise ValueError("tv1 kind needs S")
        inner = n * (1.0 - (1.0 - (S + 1.0) / N) ** 2 / math.pi)
    else:
        raise ValueError("kind must be 'frame' or 'tv1'")
    if inner < 0:
        raise ValueError("invalid parameters: negative term under the square root")
    rhs = (math.sqrt(inner) + math.sqrt(2.0 * math.log(1.0 / eps) + tau)) ** 2
    return _min_m(rhs)


def krz_for_profile(op: AnalysisOperator, gram: GramInfo | None,
                    profile: CosparsityProfile, eps: float = 1.0, tau: float = 0.0) -> int:
    """:func:`krz_bound` with parameters read off ``op`` and ``profile``:
    the TV formula for ``tv1`` operators, the frame formula otherwise (with
    ``b`` the largest eigenvalue of ``Psi^T Psi``)."""
    if op.kind == "tv1":
        return krz_bound("tv1", n=op.n, N=op.N, S=profile.S, eps=eps, tau=tau)
    if gram is not None:
        b = gram.frame_upper
    else:
        b = float(np.linalg.norm(op.matrix, 2) ** 2)
    return krz_bound("frame", n=op.n, N=op.N, b=b,
                     cosupport_norm_sum=profile.gen_cosparsity_diag, eps=eps, tau=tau)


@dataclass
class StableBound:
    """Output of :func:`stable_bound`; ``err`` is ``None`` when ``m <= m0``."""

    x_bar: np.ndarray
    M_bar: float
    m0: float
    err: float | None

    @property
    def sufficient(self) -> bool:
        return self.err is not None


def _surrogate(op: AnalysisOperator, x: np.ndarray, U: Subspace) -> np.ndarray:
    pu = project(U, x)
    denom = np.abs(op.matrix @ pu).sum()
    if denom == 0.0:
        raise ValueError("Psi P_U x vanishes; surrogate point undefined")
    return (np.abs(op.matrix @ x).sum() / denom) * pu


def stable_bound(
    op: AnalysisOperator,
    gram: GramInfo | None,
    x: np.ndarray,
    U: Subspace,
    R: float,
    u: float,
    eta: float,
    m: int,
    eps_supp: float = DEFAULT_EPS_SUPP,
) -> StableBound:
    """Error guarantee for analysis basis pursuit through a surrogate point.

    With ``x_bar`` the rescaled projection of ``x`` onto ``U``,
    ``m0 = ((R+1)/R (sqrt(M(x_bar)) + 1) + u)^2 + 1`` and, for ``m > m0``,
    ``err = max(R ||x - x_bar||, 2 eta / (sqrt(m-1) - sqrt(m0-1)))``.
    ``R = inf`` is allowed; then ``(R+1)/R = 1`` and ``R * 0 = 0``.
    Gaussian measurements only.
    """
    if not R > 0 or u < 0 or eta < 0:
        raise ValueError("need R > 0, u >= 0, eta >= 0")
    x = np.asarray(x, dtype=float)
    xb = _surrogate(op, x, U)
    Mb = sampling_rate_M(op, gram, xb, eps_supp).M
    factor = 1.0 if math.isinf(R) else (R + 1.0) / R
    m0 = (factor * (math.sqrt(Mb) + 1.0) + u) ** 2 + 1.0
    if m <= m0:
        return StableBound(xb, Mb, m0, None)
    dist = float(np.linalg.norm(x - xb))
    if math.isinf(R):
        approx = 0.0 if dist == 0.0 else math.inf
    else:
        approx = R * dist
    noise = 2.0 * eta / (math.sqrt(m - 1.0) - math.sqrt(m0 - 1.0))
    return StableBound(xb, Mb, m0, max(approx, noise))


def approx_error_upper(op: AnalysisOperator, x: np.ndarray, U: Subspace) -> float:
    """``(||P_U x|| / ||Psi P_U x||_1) ||Psi P_{U^perp} x||_1 + ||P_{U^perp} x||``,
    an upper bound on ``||x - x_bar||``."""
    x = np.asarray(x, dtype=float)
    pu = project(U, x)
    pc = x - pu
    denom = np.abs(op.matrix @ pu).sum()
    if denom == 0.0:
        raise ValueError("Psi P_U x vanishes")
    return float(
        np.linalg.norm(pu) / denom * np.abs(op.matrix @ pc).sum() + np.linalg.norm(pc)
    )
