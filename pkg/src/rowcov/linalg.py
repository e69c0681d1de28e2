"""Dense linear-algebra kernels.

Reduced SVD, Grassmann projectors ``G(R) = R (R^T R)^- R^T``, orthonormal
bases for the orthogonal complement of a design, and closed-form square
roots of spiked covariance matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDesignError, InvalidInputError

__all__ = [
    "ReducedSVD",
    "GrassmannPoint",
    "ComplementBasis",
    "reduced_svd",
    "grassmann_projector",
    "complement_basis",
    "identity_basis",
    "sym_sqrt",
    "sym_sqrt_spiked",
    "sign_normalize",
]

UNIT_TOL = 1e-8


def _as_matrix(M, name="M") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d matrix, got shape {M.shape}")
    if M.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return M


def _rank_cutoff(s: np.ndarray, shape) -> float:
    return np.finfo(float).eps * max(shape) * s[0]


@dataclass(frozen=True)
class ReducedSVD:
    """SVD restricted to the singular triples above the rank threshold."""

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray

    @property
    def r(self) -> int:
        return self.D.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.D) @ self.V.T


@dataclass(frozen=True)
class GrassmannPoint:
    """A rank-``r`` symmetric idempotent ``n x n`` matrix.

    ``basis`` optionally carries an ``n x r`` orthonormal matrix with
    ``G = basis @ basis.T``; statistics use it to avoid forming ``G``.
    """

    G: np.ndarray
    r: int
    basis: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        object.__setattr__(self, "G", (G + G.T) / 2.0)

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.G).copy()


@dataclass(frozen=True)
class ComplementBasis:
    """Orthonormal basis ``H`` ((n-q) x n) of the complement of a design.

    ``H @ H.T = I_{n-q}`` and ``H.T @ H = P = I - X (X^T X)^{-1} X^T``.
    """

    H: np.ndarray
    P: np.ndarray
    q: int

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def reduced_svd(M) -> ReducedSVD:
    """Reduced singular value decomposition of ``M``.

    Singular values at or below ``eps * max(n, p) * s_max`` are treated as
    zero and dropped together with their singular vectors, so the returned
    ``U`` has exactly ``rank(M)`` columns.

    Raises
    ------
    InvalidInputError
        If ``M`` has non-finite entries or is identically zero.
    """
    M = _as_matrix(M)
    if not np.any(M):
        raise InvalidInputError("matrix is identically zero")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > _rank_cutoff(s, M.shape)
    return ReducedSVD(U=U[:, keep], D=s[keep], V=Vt[keep].T)


def grassmann_projector(R) -> GrassmannPoint:
    """Projection onto the column space of ``R``.

    Computes ``G(R) = R (R^T R)^- R^T`` as ``U U^T`` from the reduced SVD of
    ``R``. The result is invariant to ``R -> R A^T`` for nonsingular ``A``.
    """
    svd = reduced_svd(R)
    U = svd.U
    return GrassmannPoint(G=U @ U.T, r=svd.r, basis=U)


def sign_normalize(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip column signs so the first clearly nonzero entry is positive."""
    v = np.array(v, dtype=float, copy=True)
    if v.size == 0:
        return v
    a = np.abs(v)
    big = a > tol * np.maximum(1.0, a.max(axis=0))
    first = np.argmax(big, axis=0)
    lead = v[first, np.arange(v.shape[1])]
    v[:, big.any(axis=0) & (lead < 0)] *= -1.0
    return v


def complement_basis(X) -> ComplementBasis:
    """Orthonormal basis for the null space of ``X^T``.

    The basis is the trailing ``n - q`` columns of a complete QR
    factorization of ``X`` (columns taken in their given order), with each
    basis vector's first nonzero entry made positive. Any other orthonormal
    basis gives the same ``P`` and therefore the same invariant statistics.

    Raises
    ------
    InvalidDesignError
        If ``X`` is rank deficient or has ``q >= n`` columns.
    """
    X = _as_matrix(X, "X")
    n, q = X.shape
    if q >= n:
        raise InvalidDesignError(f"design has q={q} columns but only n={n} rows; need q < n")
    s = np.linalg.svd(X, compute_uv=False)
    if s[0] == 0 or np.sum(s > _rank_cutoff(s, X.shape)) < q:
        raise InvalidDesignError(f"design matrix ({n}x{q}) is not of full column rank")
    Q, _ = np.linalg.qr(X, mode="complete")
    H = sign_normalize(Q[:, q:]).T
    P = np.eye(n) - X @ np.linalg.solve(X.T @ X, X.T)
    return ComplementBasis(H=H, P=(P + P.T) / 2.0, q=q)


def identity_basis(n: int) -> ComplementBasis:
    """Complement basis of the empty design (``q = 0``)."""
    eye = np.eye(n)
    return ComplementBasis(H=eye, P=eye.copy(), q=0)


def sym_sqrt(M) -> np.ndarray:
    """Symmetric square root of a symmetric positive semidefinite matrix."""
    M = _as_matrix(M)
    w, E = np.linalg.eigh((M + M.T) / 2.0)
    w = np.clip(w, 0.0, None)
    return (E * np.sqrt(w)) @ E.T


def _unit_vector(c, name="c") -> np.ndarray:
    c = np.asarray(c, dtype=float).ravel()
    if not np.all(np.isfinite(c)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    norm = np.linalg.norm(c)
    if abs(norm - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"{name} must be a unit vector, has norm {norm:.6g}")
    return c


def sym_sqrt_spiked(omega: float, c) -> np.ndarray:
    """Square root of ``I + omega c c^T``: ``I + (sqrt(1 + omega) - 1) c c^T``."""
    if not np.isfinite(omega) or omega < 0:
        raise InvalidInputError(f"omega must be a finite nonnegative number, got {omega}")
    c = _unit_vector(c)
    return np.eye(c.size) + (np.sqrt(1.0 + omega) - 1.0) * np.outer(c, c)
