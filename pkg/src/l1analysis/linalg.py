"""Dense linear-algebra primitives: kernels, orthogonal projections and the
proximal / projection maps used by the convex solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Subspace",
    "kernel_basis",
    "project",
    "l1_ball_project",
    "soft_threshold",
    "orthonormalize",
]

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of R^d stored through an orthonormal basis.

    ``basis`` has shape ``(ambient_dim, dim)``; the trivial subspace has zero
    columns.
    """

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != self.ambient_dim:
            raise ValueError(
                f"basis must have shape ({self.ambient_dim}, k), got {b.shape}"
            )
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def full(cls, d: int) -> "Subspace":
        return cls(d, np.eye(d))

    @classmethod
    def trivial(cls, d: int) -> "Subspace":
        return cls(d, np.zeros((d, 0)))

    @classmethod
    def span(cls, vectors: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> "Subspace":
        """Span of the columns of ``vectors`` (re-orthonormalized)."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(vectors.shape[0], orthonormalize(vectors, tol))

    def complement(self) -> "Subspace":
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        return kernel_basis(self.basis.T)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


def orthonormalize(vectors: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis for the column span of ``vectors`` (SVD based)."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    d = vectors.shape[0]
    if vectors.size == 0:
        return np.zeros((d, 0))
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((d, 0))
    rank = int(np.sum(s > tol * s[0]))
    return u[:, :rank]


def kernel_basis(A: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Orthonormal basis of the numerical null space of ``A``.

    Singular values below ``tol * sigma_max`` count as zero. A zero matrix
    yields the whole space.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[1]
    if A.shape[0] == 0:
        return Subspace.full(n)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return Subspace.full(n)
    rank = int(np.sum(s > tol * s[0]))
    return Subspace(n, vt[rank:].T.copy())


def project(U: Subspace, x: np.ndarray, complement: bool = False) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``U`` (or onto its complement)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (U.ambient_dim,):
        raise ValueError(
            f"dimension mismatch: vector of shape {x.shape}, subspace in R^{U.ambient_dim}"
        )
    px = U.basis @ (U.basis.T @ x)
    return x - px if complement else px


def soft_threshold(v: np.ndarray, theta: float) -> np.ndarray:
    """Proximal map of ``theta * ||.||_1``."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def l1_ball_project(
    v: np.ndarray, radius: float, weights: np.ndarray | None = None
) -> np.ndarray:
    """Euclidean projection onto ``{w : sum_k weights_k |w_k| <= radius}``.

    Exact sort-and-threshold algorithm. With ``weights=None`` this is the
    ordinary l1 ball. Ties in the sort are broken by index order (stable
    sort), so the result is deterministic.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    if weights is None:
        if a.sum() <= radius:
            return v.copy()
        s = np.sort(a, kind="stable")[::-1]
        cs = np.cumsum(s) - radius
        k = np.arange(1, s.size + 1)
        idx = np.nonzero(s * k > cs)[0][-1]
        theta = cs[idx] / (idx + 1)
        return np.sign(v) * np.maximum(a - theta, 0.0)

    w = np.asarray(weights, dtype=float)
    if w.shape != v.shape or np.any(w <= 0):
        raise ValueError("weights must be positive and match v")
    if np.dot(w, a) <= radius:
        return v.copy()
    ratio = a / w
    order = np.argsort(-ratio, kind="stable")
    cum_aw = np.cumsum((a * w)[order])
    cum_ww = np.cumsum((w * w)[order])
    theta = (cum_aw - radius) / cum_ww
    idx = np.nonzero(ratio[order] > theta)[0][-1]
    return np.sign(v) * np.maximum(a - theta[idx] * w, 0.0)
