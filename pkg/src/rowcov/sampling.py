"""Random matrices and beta-distribution functions.

Every replicate of a simulation draws from its own counter-based stream
(Philox keyed by ``SeedSequence(seed, spawn_key=path)``), so results depend
only on ``(seed, path)`` and never on chunking or worker count.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DimensionError, InvalidCovarianceError, InvalidInputError
from .linalg import _as_matrix, _unit_vector, sym_sqrt, sym_sqrt_spiked

__all__ = [
    "RngStream",
    "SeparableCovariance",
    "Family",
    "GAUSSIAN",
    "sample_matrix_normal",
    "sample_stiefel_uniform",
    "sample_haar_orthogonal",
    "sample_elliptical_Z",
    "beta_cdf",
    "beta_sf",
    "beta_pdf",
    "beta_quantile",
]


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    ``spawn(i)`` addresses the ``i``-th child stream; simulations give
    replicate ``s`` the stream ``parent.spawn(s)``.
    """

    seed: int
    stream_id: int = 0
    parent: tuple[int, ...] = ()

    def __post_init__(self):
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if int(self.stream_id) < 0:
            raise InvalidInputError("stream_id must be nonnegative")

    @property
    def key(self) -> tuple[int, ...]:
        return (*self.parent, int(self.stream_id))

    def spawn(self, i: int) -> "RngStream":
        return RngStream(self.seed, int(i), self.key)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidInputError(f"expected an RngStream or numpy Generator, got {type(rng).__name__}")


# --- elliptical families --------------------------------------------------


@dataclass(frozen=True)
class Family:
    """Spherical law of ``vec(Z)``: a scale mixture of standard normals.

    ``matrix_t``: ``Z = N / sqrt(chi2_dof / dof)`` with one mixing variable
    per matrix. ``scale_contaminated``: with probability ``eps`` the whole
    matrix is multiplied by ``sqrt(kappa)`` (``kappa`` is a variance factor).
    """

    name: str
    dof: float | None = None
    eps: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.name == "gaussian":
            return
        if self.name == "matrix_t":
            if self.dof is None or not np.isfinite(self.dof) or self.dof <= 0:
                raise InvalidInputError(f"matrix_t needs dof > 0, got {self.dof}")
        elif self.name == "scale_contaminated":
            if self.eps is None or not 0.0 <= self.eps <= 1.0:
                raise InvalidInputError(f"scale_contaminated needs eps in [0, 1], got {self.eps}")
            if self.kappa is None or not np.isfinite(self.kappa) or self.kappa <= 0:
                raise InvalidInputError(f"scale_contaminated needs kappa > 0, got {self.kappa}")
        else:
            raise InvalidInputError(f"unknown family {self.name!r}")

    @classmethod
    def gaussian(cls) -> "Family":
        return cls("gaussian")

    @classmethod
    def matrix_t(cls, dof: float) -> "Family":
        return cls("matrix_t", dof=float(dof))

    @classmethod
    def scale_contaminated(cls, eps: float, kappa: float) -> "Family":
        return cls("scale_contaminated", eps=float(eps), kappa=float(kappa))

    @classmethod
    def parse(cls, text: str) -> "Family":
        """Parse ``gaussian``, ``matrix_t(3)`` or ``scale_contaminated(0.1,9)``."""
        m = re.fullmatch(r"\s*(\w+)\s*(?:\((.*)\))?\s*", text)
        if not m:
            raise InvalidInputError(f"cannot parse family {text!r}")
        args = [float(a) for a in m.group(2).split(",")] if m.group(2) else []
        name = m.group(1)
        try:
            if name == "gaussian" and not args:
                return cls.gaussian()
            if name == "matrix_t" and len(args) == 1:
                return cls.matrix_t(*args)
            if name == "scale_contaminated" and len(args) == 2:
                return cls.scale_contaminated(*args)
        except TypeError:
            pass
        raise InvalidInputError(f"cannot parse family {text!r}")

    def __str__(self) -> str:
        if self.name == "matrix_t":
            return f"matrix_t({self.dof:g})"
        if self.name == "scale_contaminated":
            return f"scale_contaminated({self.eps:g},{self.kappa:g})"
        return self.name


GAUSSIAN = Family.gaussian()


def sample_elliptical_Z(n: int, p: int, family: Family = GAUSSIAN, rng=None) -> np.ndarray:
    """Draw an ``n x p`` matrix whose vectorization is spherically symmetric."""
    g = _generator(rng)
    Z = g.standard_normal((n, p))
    if family.name == "matrix_t":
        Z *= np.sqrt(family.dof / g.chisquare(family.dof))
    elif family.name == "scale_contaminated":
        if g.random() < family.eps:
            Z *= np.sqrt(family.kappa)
    return Z


# --- matrix normal --------------------------------------------------------


def _check_pd(M: np.ndarray, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidCovarianceError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)) or not np.allclose(M, M.T, atol=1e-10 * max(1.0, np.abs(M).max())):
        raise InvalidCovarianceError(f"{name} must be finite and symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise InvalidCovarianceError(f"{name} is not positive definite") from None
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class SeparableCovariance:
    """Covariance ``Sigma (x) Psi`` of ``vec(Y)``.

    ``Psi`` is either dense or the spike ``I + omega c c^T``.
    """

    Sigma: np.ndarray
    Psi: np.ndarray | None = None
    omega: float | None = None
    c: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "Sigma", _check_pd(self.Sigma, "Sigma"))
        if self.Psi is not None:
            if self.omega is not None or self.c is not None:
                raise InvalidCovarianceError("give either a dense Psi or a spike (omega, c), not both")
            object.__setattr__(self, "Psi", _check_pd(self.Psi, "Psi"))
        else:
            if self.omega is None or self.c is None:
                raise InvalidCovarianceError("Psi requires a dense matrix or a spike (omega, c)")
            if not np.isfinite(self.omega) or self.omega < 0:
                raise InvalidCovarianceError(f"omega must be nonnegative, got {self.omega}")
            object.__setattr__(self, "c", _unit_vector(self.c))

    @classmethod
    def spiked(cls, omega: float, c, Sigma=None, p: int | None = None) -> "SeparableCovariance":
        if Sigma is None:
            if p is None:
                raise InvalidCovarianceError("need Sigma or p")
            Sigma = np.eye(p)
        return cls(Sigma=Sigma, omega=float(omega), c=np.asarray(c, dtype=float))

    @classmethod
    def white(cls, n: int, p: int) -> "SeparableCovariance":
        return cls(Sigma=np.eye(p), Psi=np.eye(n))

    @property
    def n(self) -> int:
        return self.Psi.shape[0] if self.Psi is not None else self.c.size

    @property
    def p(self) -> int:
        return self.Sigma.shape[0]

    def psi_matrix(self) -> np.ndarray:
        if self.Psi is not None:
            return self.Psi
        return np.eye(self.n) + self.omega * np.outer(self.c, self.c)

    def psi_sqrt(self) -> np.ndarray:
        if self.Psi is not None:
            return sym_sqrt(self.Psi)
        return sym_sqrt_spiked(self.omega, self.c)

    def sigma_sqrt(self) -> np.ndarray:
        return sym_sqrt(self.Sigma)


def sample_matrix_normal(X, B, cov: SeparableCovariance, rng, family: Family = GAUSSIAN) -> np.ndarray:
    """Draw ``Y = X B^T + Psi^{1/2} Z Sigma^{1/2}``.

    ``X`` and ``B`` may both be ``None`` for a mean-zero draw. With the
    default Gaussian family ``Y`` is matrix normal with
    ``Cov(y_i, y_j) = psi_ij Sigma``.
    """
    n, p = cov.n, cov.p
    if (X is None) != (B is None):
        raise DimensionError("X and B must be given together")
    Z = sample_elliptical_Z(n, p, family, rng)
    Y = cov.psi_sqrt() @ Z @ cov.sigma_sqrt()
    if X is not None:
        X = _as_matrix(X, "X")
        B = _as_matrix(B, "B")
        if X.shape[0] != n or B.shape[0] != p or X.shape[1] != B.shape[1]:
            raise DimensionError(f"X {X.shape} and B {B.shape} incompatible with n={n}, p={p}")
        Y = Y + X @ B.T
    return Y


def sample_stiefel_uniform(n: int, p: int, rng) -> np.ndarray:
    """Uniform draw from the Stiefel manifold: ``W = Z (Z^T Z)^{-1/2}``."""
    if p < 1 or p > n:
        raise DimensionError(f"need 1 <= p <= n, got n={n}, p={p}")
    Z = _generator(rng).standard_normal((n, p))
    w, E = np.linalg.eigh(Z.T @ Z)
    return Z @ ((E / np.sqrt(w)) @ E.T)


def sample_haar_orthogonal(n: int, rng) -> np.ndarray:
    """Haar-distributed ``n x n`` orthogonal matrix.

    QR of a square Gaussian matrix, with the sign of each column fixed so
    the triangular factor has a positive diagonal.
    """
    Z = _generator(rng).standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


# --- beta distribution ----------------------------------------------------


def _check_shapes(a, b):
    if not (np.isfinite(a) and np.isfinite(b) and a > 0 and b > 0):
        raise InvalidInputError(f"beta shape parameters must be positive, got a={a}, b={b}")


def beta_cdf(x, a: float, b: float):
    """Regularized incomplete beta function ``I_x(a, b)``."""
    _check_shapes(a, b)
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any((x < 0) | (x > 1)):
        raise InvalidInputError("beta_cdf argument must lie in [0, 1]")
    out = special.betainc(a, b, x)
    return float(out) if out.ndim == 0 else out


def beta_sf(x, a: float, b: float):
    """Upper tail ``1 - I_x(a, b)``, computed without cancellation."""
    _check_shapes(a, b)
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any((x < 0) | (x > 1)):
        raise InvalidInputError("beta_sf argument must lie in [0, 1]")
    out = special.betaincc(a, b, x)
    return float(out) if out.ndim == 0 else out


def beta_pdf(x, a: float, b: float):
    _check_shapes(a, b)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        logd = special.xlogy(a - 1, x) + special.xlog1py(b - 1, -x) - special.betaln(a, b)
    out = np.exp(logd)
    return float(out) if out.ndim == 0 else out


def beta_quantile(u: float, a: float, b: float, upper: bool = False, xtol: float = 1e-12) -> float:
    """Inverse of :func:`beta_cdf` in ``x`` for ``u`` in ``(0, 1)``.

    With ``upper=True``, ``u`` is an upper-tail probability and the
    survival function is inverted instead; use this for accuracy when the
    lower-tail probability is within rounding of one.

    Safeguarded Newton iteration: the root stays bracketed, Newton steps
    that leave the bracket or fail to halve it are replaced by bisection,
    and iteration stops once the bracket is narrower than ``xtol``.
    """
    _check_shapes(a, b)
    if not (np.isfinite(u) and 0.0 < u < 1.0):
        raise InvalidInputError(f"beta_quantile needs u in (0, 1), got {u}")
    if upper:
        def f(x):
            return u - special.betaincc(a, b, x)
    else:
        def f(x):
            return special.betainc(a, b, x) - u
    lo, hi = 0.0, 1.0
    x = a / (a + b)
    width = hi - lo
    for _ in range(400):
        fx = f(x)
        if fx == 0.0:
            return float(x)
        if fx > 0:
            hi = x
        else:
            lo = x
        if hi - lo < xtol:
            break
        d = beta_pdf(x, a, b)
        step = x - fx / d if d > 0 and np.isfinite(d) else np.nan
        if lo < step < hi and (hi - lo) < 0.5 * width:
            if abs(step - x) < 0.25 * xtol:
                return float(step)
            x = step
        else:
            x = 0.5 * (lo + hi)
        width = hi - lo
    return float(0.5 * (lo + hi)) if hi - lo < xtol else float(x)
