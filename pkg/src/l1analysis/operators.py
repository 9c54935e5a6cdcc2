"""Analysis operators: TV differences, Haar wavelet frames, random tight frames.

All operators are materialized as dense ``N x n`` matrices. 2D operators act
on column-major vectorizations of square ``n_side x n_side`` images.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import circulant

from .rng import stream

__all__ = [
    "AnalysisOperator",
    "GramInfo",
    "KINDS",
    "build_tv1",
    "build_tv2",
    "build_haar_dwt",
    "build_haar_undecimated",
    "build_haar_undecimated_2d",
    "build_random_tight",
    "build_identity",
    "build_custom",
    "build_operator",
    "gram_info",
    "save_operator",
    "load_operator",
]

KINDS = (
    "dwt_haar",
    "rdwt_haar",
    "irdwt_haar",
    "rdwt_haar_2d",
    "irdwt_haar_2d",
    "tv1",
    "tv2",
    "random_tight",
    "identity",
    "custom",
)


@dataclass(frozen=True)
class AnalysisOperator:
    """Dense analysis operator ``Psi`` with its construction recipe.

    Attributes
    ----------
    matrix : ndarray, shape (N, n)
        Rows are the analysis vectors ``psi_k``.
    kind : str
        One of :data:`KINDS`.
    levels : int
        Number of wavelet scales (0 for non-wavelet operators).
    seed : int or None
        Seed of the random stream (``random_tight`` only).
    """

    matrix: np.ndarray
    kind: str = "custom"
    levels: int = 0
    seed: int | None = None
    _row_norms: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float, order="C")
        if M.ndim != 2 or M.size == 0:
            raise ValueError("operator matrix must be a nonempty 2D array")
        if not np.all(np.isfinite(M)):
            raise ValueError("operator has non-finite entries")
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        norms = np.linalg.norm(M, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("analysis operator has a zero row")
        M.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "_row_norms", norms)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def row_norms(self) -> np.ndarray:
        return self._row_norms

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def scaled(self, lam: float) -> "AnalysisOperator":
        """The operator ``lam * Psi`` (tagged ``custom``)."""
        return AnalysisOperator(lam * self.matrix, "custom")

    def rows(self, idx) -> np.ndarray:
        return self.matrix[idx]


@dataclass(frozen=True)
class GramInfo:
    """Gram matrix ``G = Psi Psi^T``, row norms and frame bounds ``(a, b)``."""

    gram: np.ndarray
    row_norms: np.ndarray
    frame_lower: float
    frame_upper: float

    @property
    def condition(self) -> float:
        return np.inf if self.frame_lower <= 0 else self.frame_upper / self.frame_lower


def gram_info(op: AnalysisOperator) -> GramInfo:
    """Gram matrix and the extreme eigenvalues of ``Psi^T Psi``."""
    P = op.matrix
    G = P @ P.T
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(P.T @ P)
    a = max(float(ev[0]), 0.0)
    return GramInfo(G, op.row_norms.copy(), a, float(ev[-1]))


# ----------------------------------------------------------------------------
# constructions


def build_identity(n: int) -> AnalysisOperator:
    return AnalysisOperator(np.eye(n), "identity")


def build_custom(matrix: np.ndarray) -> AnalysisOperator:
    return AnalysisOperator(matrix, "custom")


def _tv1_matrix(n: int) -> np.ndarray:
    D = np.zeros((n - 1, n))
    i = np.arange(n - 1)
    D[i, i] = -1.0
    D[i, i + 1] = 1.0
    return D


def build_tv1(n: int) -> AnalysisOperator:
    """Forward differences ``(x_{k+1} - x_k)``, shape ``(n-1, n)``."""
    if n < 2:
        raise ValueError("tv1 needs n >= 2")
    return AnalysisOperator(_tv1_matrix(n), "tv1")


def build_tv2(n_side: int) -> AnalysisOperator:
    """Anisotropic 2D differences ``[D kron I ; I kron D]`` on column-major images."""
    if n_side < 2:
        raise ValueError("tv2 needs n_side >= 2")
    D = _tv1_matrix(n_side)
    I = np.eye(n_side)
    return AnalysisOperator(np.vstack([np.kron(D, I), np.kron(I, D)]), "tv2")


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _haar_atoms(n: int, J: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Unit-norm Haar detail atoms for levels 1..J and the level-J scaling atom."""
    details = []
    for j in range(1, J + 1):
        L = 2**j
        a = np.zeros(n)
        a[: L // 2] = 1.0
        a[L // 2 : L] = -1.0
        details.append(a * 2.0 ** (-j / 2))
    approx = np.zeros(n)
    approx[: 2**J] = 2.0 ** (-J / 2)
    return details, approx


def _shifts(atom: np.ndarray) -> np.ndarray:
    # row s is the atom circularly shifted by s samples
    return circulant(atom).T.copy()


def build_haar_dwt(n: int, J: int) -> AnalysisOperator:
    """Orthonormal decimated Haar transform with ``J`` detail levels."""
    if not _is_pow2(n) or n < 2:
        raise ValueError("dwt needs n to be a power of two")
    p = n.bit_length() - 1
    if not 1 <= J <= p:
        raise ValueError(f"J must lie in [1, {p}]")
    rows = []
    for j in range(1, J + 1):
        L = 2**j
        for k in range(n // L):
            a = np.zeros(n)
            a[k * L : k * L + L // 2] = 1.0
            a[k * L + L // 2 : (k + 1) * L] = -1.0
            rows.append(a * 2.0 ** (-j / 2))
    L = 2**J
    for k in range(n // L):
        a = np.zeros(n)
        a[k * L : (k + 1) * L] = 2.0 ** (-J / 2)
        rows.append(a)
    return AnalysisOperator(np.array(rows), "dwt_haar", levels=J)


def _undecimated_blocks(n: int, J: int, variant: str) -> list[np.ndarray]:
    if variant not in ("primal", "dual"):
        raise ValueError("variant must be 'primal' or 'dual'")
    if J < 1 or n % (2**J) != 0:
        raise ValueError("n must be divisible by 2**J")
    details, approx = _haar_atoms(n, J)
    blocks = []
    for j, d in enumerate(details, start=1):
        w = 2.0 ** (-j) if variant == "dual" else 1.0
        blocks.append(w * _shifts(d))
    w = 2.0 ** (-J) if variant == "dual" else 1.0
    blocks.append(w * _shifts(approx))
    return blocks


def build_haar_undecimated(n: int, J: int, variant: str = "primal") -> AnalysisOperator:
    """Undecimated (a trous) Haar frame with periodic boundary.

    ``primal`` has unit-norm rows; ``dual`` rescales detail level ``j`` by
    ``2**-j`` and the approximation block by ``2**-J`` so that
    ``dual.T @ primal = I``. Row order: level 1 shifts, ..., level J shifts,
    approximation shifts.
    """
    blocks = _undecimated_blocks(n, J, variant)
    kind = "rdwt_haar" if variant == "primal" else "irdwt_haar"
    return AnalysisOperator(np.vstack(blocks), kind, levels=J)


def build_haar_undecimated_2d(
    n_side: int, J: int, variant: str = "primal"
) -> AnalysisOperator:
    """Separable 2D a trous Haar frame on column-major ``n_side^2`` images.

    Per scale ``j`` the subbands LH, HL and HH are the Kronecker products of
    the 1D scaling/detail circulants; LL at scale ``J`` closes the frame.
    The dual rescales scale-``j`` subbands by ``4**-j`` and LL by ``4**-J``.
    """
    if variant not in ("primal", "dual"):
        raise ValueError("variant must be 'primal' or 'dual'")
    if J < 1 or n_side % (2**J) != 0:
        raise ValueError("n_side must be divisible by 2**J")
    blocks = []
    for j in range(1, J + 1):
        d, a = _haar_atoms(n_side, j)
        D = _shifts(d[-1])
        A = _shifts(a)
        w = 4.0 ** (-j) if variant == "dual" else 1.0
        # kron(C_col, C_row) applies C_row along image rows (axis 0)
        blocks += [w * np.kron(A, D), w * np.kron(D, A), w * np.kron(D, D)]
    _, a = _haar_atoms(n_side, J)
    A = _shifts(a)
    w = 4.0 ** (-J) if variant == "dual" else 1.0
    blocks.append(w * np.kron(A, A))
    kind = "rdwt_haar_2d" if variant == "primal" else "irdwt_haar_2d"
    return AnalysisOperator(np.vstack(blocks), kind, levels=J)


def build_random_tight(N: int, n: int, seed: int) -> AnalysisOperator:
    """Random operator with all singular values equal to one.

    ``N >= n`` gives a tight frame (``Psi^T Psi = I_n``); ``N < n`` gives
    orthonormal rows (``Psi Psi^T = I_N``), which is not a frame.
    """
    if N < 1 or n < 1:
        raise ValueError("N and n must be positive")
    g = stream(seed, "random_tight", N, n).standard_normal((N, n))
    U, _, Vt = np.linalg.svd(g, full_matrices=False)
    return AnalysisOperator(U @ Vt, "random_tight", seed=int(seed))


def build_operator(kind: str, n: int, levels: int = 0, seed: int | None = None,
                   N: int | None = None) -> AnalysisOperator:
    """Dispatch on ``kind``; for 2D kinds ``n`` is the image side length."""
    if kind == "dwt_haar":
        return build_haar_dwt(n, levels)
    if kind in ("rdwt_haar", "irdwt_haar"):
        return build_haar_undecimated(n, levels, "primal" if kind == "rdwt_haar" else "dual")
    if kind in ("rdwt_haar_2d", "irdwt_haar_2d"):
        variant = "primal" if kind == "rdwt_haar_2d" else "dual"
        return build_haar_undecimated_2d(n, levels, variant)
    if kind == "tv1":
        return build_tv1(n)
    if kind == "tv2":
        return build_tv2(n)
    if kind == "random_tight":
        if N is None or seed is None:
            raise ValueError("random_tight needs N and seed")
        return build_random_tight(N, n, seed)
    if kind == "identity":
        return build_identity(n)
    raise ValueError(f"cannot build operator of kind {kind!r}")


# ----------------------------------------------------------------------------
# binary container: magic, u32 header length, JSON header, row-major <f8 data

_MAGIC = b"L1AOP\x01"


def save_operator(op: AnalysisOperator, path: str | Path) -> None:
    header = json.dumps(
        {"kind": op.kind, "n": op.n, "N": op.N, "levels": op.levels, "seed": op.seed},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes())


def load_operator(path: str | Path) -> AnalysisOperator:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not an operator file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    N, n = header["N"], header["n"]
    if data.size != N * n:
        raise ValueError(f"{path}: expected {N * n} entries, found {data.size}")
    return AnalysisOperator(
        data.reshape(N, n).astype(float), header["kind"], header["levels"], header["seed"]
    )
