"""Supports, sign patterns and the generalized (co-)sparsity parameters."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .operators import AnalysisOperator, GramInfo

__all__ = [
    "DEFAULT_EPS_SUPP",
    "CosparsityProfile",
    "analysis_profile",
    "best_s_term_error",
    "kr15_error_bound",
]

DEFAULT_EPS_SUPP = 1e-9


@dataclass(frozen=True)
class CosparsityProfile:
    """Support data of ``Psi x`` and the three generalized parameters.

    Attributes
    ----------
    support, cosupport : ndarray of int
        Indices of nonzero / zero analysis coefficients.
    sign : ndarray
        Sign vector, zero on the cosupport.
    S, L : int
        ``|support|`` and ``|cosupport|``.
    gen_sparsity : float
        ``sum_{k,k' in S} s_k s_k' g_kk'``, equal to ``||Psi^T s||^2``.
    gen_cosparsity : float
        ``sum_{k,k' in S^c} g_kk'^2 / sqrt(g_kk g_k'k')``.
    gen_cosparsity_diag : float
        ``sum_{k in S^c} sqrt(g_kk)``.
    """

    support: np.ndarray
    cosupport: np.ndarray
    sign: np.ndarray
    S: int
    L: int
    gen_sparsity: float
    gen_cosparsity: float
    gen_cosparsity_diag: float

    @property
    def N(self) -> int:
        return self.S + self.L

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "L": self.L,
            "genS": self.gen_sparsity,
            "genL": self.gen_cosparsity,
            "genLbar": self.gen_cosparsity_diag,
            "support": self.support.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def analysis_profile(
    op: AnalysisOperator,
    gram: GramInfo | None,
    x: np.ndarray,
    eps_supp: float = DEFAULT_EPS_SUPP,
) -> CosparsityProfile:
    """Profile of ``x`` under ``op``.

    A coefficient counts as zero when ``|<psi_k, x>| <= eps_supp * max_k' |<psi_k', x>|``.
    ``gram`` may be ``None``; only the cosupport block of the Gram matrix is
    needed and it is then formed on the fly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (op.n,):
        raise ValueError(f"x must have shape ({op.n},)")
    P = op.matrix
    c = P @ x
    cmax = np.abs(c).max()
    # Psi x numerically zero: x lies in ker Psi
    if cmax <= 1e-13 * op.row_norms.max() * np.linalg.norm(x):
        supp_mask = np.zeros(op.N, dtype=bool)
    else:
        supp_mask = np.abs(c) > eps_supp * cmax
    support = np.nonzero(supp_mask)[0]
    cosupport = np.nonzero(~supp_mask)[0]
    sign = np.where(supp_mask, np.sign(c), 0.0)
    gen_s = float(np.sum((P.T @ sign) ** 2)) if support.size else 0.0

    d = op.row_norms[cosupport]
    if cosupport.size:
        if gram is not None:
            Gc = gram.gram[np.ix_(cosupport, cosupport)]
        else:
            Pc = P[cosupport]
            Gc = Pc @ Pc.T
        gen_l = float(np.sum(Gc**2 / np.outer(d, d)))
        gen_lbar = float(d.sum())
    else:
        gen_l = gen_lbar = 0.0
    return CosparsityProfile(
        support, cosupport, sign, int(support.size), int(cosupport.size),
        gen_s, gen_l, gen_lbar,
    )


def best_s_term_error(v: np.ndarray, S: int, p: int = 1) -> float:
    """``l^p`` norm of ``v`` after zeroing its ``S`` largest-magnitude entries.

    Ties between equal magnitudes keep the lower index.
    """
    v = np.asarray(v, dtype=float)
    if not 0 <= S <= v.size:
        raise ValueError("S must lie in [0, len(v)]")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    order = np.argsort(-np.abs(v), kind="stable")
    rest = v[order[S:]]
    return float(np.linalg.norm(rest, ord=p)) if rest.size else 0.0


def kr15_error_bound(a: float, S: int, coeffs: np.ndarray) -> float:
    """``2 sigma_S(coeffs)_1 / sqrt(a S)``, the frame-based error guarantee
    for analysis basis pursuit with lower frame bound ``a``."""
    if a <= 0:
        raise ValueError("lower frame bound must be positive")
    if S < 1:
        raise ValueError("S must be at least 1")
    return 2.0 * best_s_term_error(coeffs, S, 1) / np.sqrt(a * S)
