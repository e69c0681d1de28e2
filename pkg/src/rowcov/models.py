"""Mean models, residualization and reduction to the mean-zero model.

A row design ``X`` (n x q2) and an optional column design ``W`` (p x q1)
are projected out of the data: ``R = P_X Y P_W``. Writing ``P_X = H_X^T H_X``
and ``P_W = H_W^T H_W`` gives the reduced matrix ``Ytilde = H_X Y H_W^T`` of
size ``(n - q2) x (p - q1)`` with ``R = H_X^T Ytilde H_W``, and every
invariant statistic of ``R`` is a statistic of ``Ytilde``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfoundedDirectionError,
    DimensionError,
    InvalidDesignError,
    InvalidInputError,
)
from .linalg import ComplementBasis, _as_matrix, _unit_vector, complement_basis, identity_basis

__all__ = [
    "DesignKind",
    "DesignSpec",
    "Reduction",
    "Regime",
    "residualize",
    "reduce_direction",
    "check_triviality",
    "effective_dims",
    "CONFOUNDING_TOL",
]

CONFOUNDING_TOL = 1e-10


class DesignKind(str, enum.Enum):
    ZERO = "zero"
    COLUMN_MEANS = "colmeans"
    ROW_REGRESSION = "reg"
    ROW_COLUMN_REGRESSION = "rowcol"


class Regime(str, enum.Enum):
    TRIVIAL = "trivial"
    NONTRIVIAL = "nontrivial"


@dataclass(frozen=True)
class DesignSpec:
    """Mean model for an ``n x p`` data matrix.

    ``COLUMN_MEANS`` is a row regression on the all-ones vector; the
    intercept column is materialized once ``n`` is known.
    """

    kind: DesignKind
    X: np.ndarray | None = None
    W: np.ndarray | None = None

    @classmethod
    def zero(cls) -> "DesignSpec":
        return cls(DesignKind.ZERO)

    @classmethod
    def column_means(cls) -> "DesignSpec":
        return cls(DesignKind.COLUMN_MEANS)

    @classmethod
    def row_regression(cls, X) -> "DesignSpec":
        return cls(DesignKind.ROW_REGRESSION, X=_as_matrix(X, "X"))

    @classmethod
    def row_column_regression(cls, X, W) -> "DesignSpec":
        return cls(DesignKind.ROW_COLUMN_REGRESSION, X=_as_matrix(X, "X"), W=_as_matrix(W, "W"))

    def row_design(self, n: int) -> np.ndarray | None:
        if self.kind is DesignKind.ZERO:
            return None
        if self.kind is DesignKind.COLUMN_MEANS:
            return np.ones((n, 1))
        if self.X is None:
            raise InvalidDesignError(f"design kind {self.kind.value!r} requires X")
        return self.X

    def column_design(self) -> np.ndarray | None:
        if self.kind is DesignKind.ROW_COLUMN_REGRESSION:
            if self.W is None:
                raise InvalidDesignError("row-and-column regression requires W")
            return self.W
        return None

    def q2(self, n: int) -> int:
        X = self.row_design(n)
        return 0 if X is None else X.shape[1]

    @property
    def q1(self) -> int:
        W = self.column_design()
        return 0 if W is None else W.shape[1]

    def bases(self, n: int, p: int) -> tuple[ComplementBasis, ComplementBasis]:
        """Complement bases ``(H_X, H_W)`` for an ``n x p`` data matrix."""
        X = self.row_design(n)
        W = self.column_design()
        if X is not None and X.shape[0] != n:
            raise DimensionError(f"X has {X.shape[0]} rows but the data has n={n}")
        if W is not None and W.shape[0] != p:
            raise DimensionError(f"W has {W.shape[0]} rows but the data has p={p}")
        hx = identity_basis(n) if X is None else complement_basis(X)
        hw = identity_basis(p) if W is None else complement_basis(W)
        return hx, hw


@dataclass(frozen=True)
class Reduction:
    R: np.ndarray
    H_X: ComplementBasis
    H_W: ComplementBasis
    Ytilde: np.ndarray

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def p(self) -> int:
        return self.R.shape[1]

    @property
    def q2(self) -> int:
        return self.H_X.q

    @property
    def q1(self) -> int:
        return self.H_W.q

    @property
    def n_eff(self) -> int:
        return self.Ytilde.shape[0]

    @property
    def p_eff(self) -> int:
        return self.Ytilde.shape[1]


def _data_matrix(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise InvalidInputError(f"data must be an n x p matrix, got shape {Y.shape}")
    if Y.size == 0 or not np.all(np.isfinite(Y)):
        raise InvalidInputError("data must be non-empty and finite")
    return Y


def residualize(Y, design: DesignSpec) -> Reduction:
    """Residual matrix and mean-zero reduction of ``Y`` under ``design``."""
    Y = _data_matrix(Y)
    n, p = Y.shape
    hx, hw = design.bases(n, p)
    Yt = hx.H @ Y @ hw.H.T
    R = hx.H.T @ Yt @ hw.H
    return Reduction(R=R, H_X=hx, H_W=hw, Ytilde=Yt)


def reduce_direction(c, H_X: ComplementBasis) -> tuple[np.ndarray, float]:
    """Map a spike direction into the reduced row space.

    Returns ``(H c / |H c|, |H c|^2)``. A spike ``omega c c^T`` on the
    original rows becomes a spike of size ``omega |H c|^2`` along the
    returned unit vector.

    Raises
    ------
    ConfoundedDirectionError
        If ``|H c|`` is below ``CONFOUNDING_TOL``: ``c`` lies in the column
        space of the row design and cannot be detected.
    """
    c = _unit_vector(c)
    if c.size != H_X.n:
        raise DimensionError(f"c has length {c.size}, expected n={H_X.n}")
    if H_X.q == 0:
        return c, 1.0
    hc = H_X.H @ c
    norm = float(np.linalg.norm(hc))
    if norm < CONFOUNDING_TOL:
        raise ConfoundedDirectionError(
            "direction c lies in the column space of the row design; row "
            "covariance along c is confounded with the mean and is not "
            "detectable by an invariant test"
        )
    return hc / norm, min(norm**2, 1.0)


def effective_dims(n: int, p: int, design: DesignSpec) -> tuple[int, int]:
    """``(n - q2, p - q1)`` without building any bases."""
    return n - design.q2(n), p - design.q1


def check_triviality(n: int, p: int, design: DesignSpec) -> Regime:
    """Trivial iff ``n - q2 <= p - q1``.

    In the trivial regime ``G(R)`` equals ``P_X`` for almost every ``Y`` and
    any invariant test has power equal to its level.
    """
    n_eff, p_eff = effective_dims(n, p, design)
    return Regime.TRIVIAL if n_eff <= p_eff else Regime.NONTRIVIAL
