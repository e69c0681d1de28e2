"""Invariant test statistics and their null calibration.

The exact rank-1 spiked test (beta null), its analytic power, the pairwise
statistic matrix ``T`` and the maxEP statistic with a Monte Carlo null, plus
the profile, Stiefel and Grassmann log-likelihoods and the spiked-model MLE
and likelihood-ratio statistic.
"""
from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import InfiniteMLEError, InvalidInputError, RankError, TrivialityError
from .linalg import GrassmannPoint, _as_matrix, _unit_vector, grassmann_projector
from .models import DesignSpec, Reduction, reduce_direction, residualize
from .sampling import GAUSSIAN, Family, RngStream, _check_pd, beta_cdf, beta_quantile, beta_sf, sample_elliptical_Z

__all__ = [
    "SpikedTestResult",
    "PairwiseStatMatrix",
    "TestReport",
    "spiked_statistic",
    "spiked_test",
    "spiked_power",
    "spiked_type2_error",
    "pairwise_stat_matrix",
    "pair_vector",
    "maxep_statistic",
    "simulate_null",
    "simulate_statistic",
    "mc_null_test",
    "profile_loglik_neg2",
    "profile_loglik_neg2_spectral",
    "loglik_U_neg2",
    "loglik_G_neg2",
    "spiked_mle_omega",
    "spiked_lrt_stat",
    "DEFAULT_REPS",
]

DEFAULT_REPS = 5000
MIN_REPS = 100


def _check_alpha(alpha: float) -> float:
    if not (np.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return float(alpha)


def _require_nontrivial(red: Reduction):
    if red.n_eff <= red.p_eff:
        raise TrivialityError(
            f"n - q2 = {red.n_eff} <= p - q1 = {red.p_eff}: every invariant "
            "statistic is constant and no invariant test has power above its level"
        )


# --- result types ---------------------------------------------------------


@dataclass(frozen=True)
class SpikedTestResult:
    t: float
    critical_value: float
    p_value: float
    alpha: float
    shape1: float
    shape2: float
    n_eff: int
    p_eff: int

    @property
    def reject(self) -> bool:
        return self.t > self.critical_value


@dataclass
class TestReport:
    """Outcome of a test run; ``to_dict`` gives the JSON report schema."""

    __test__ = False  # not a pytest class

    method: str
    n: int
    p: int
    q1: int
    q2: int
    n_eff: int
    p_eff: int
    statistic: float
    critical_value: float
    p_value: float
    alpha: float
    null_kind: str
    S: int | None = None
    seed: int | None = None
    argmax_pair: list[int] | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical_value

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reject"] = self.reject
        return d


@dataclass(frozen=True)
class PairwiseStatMatrix:
    """``T[i, j] = c_ij^T G c_ij`` for ``i != j``, with ``c_ij = (e_i + e_j)/sqrt(2)``.

    The diagonal is not a pair and is stored as NaN.
    """

    T: np.ndarray

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def argmax_pair(self) -> tuple[int, int]:
        """Maximizing pair ``(i, j)``, ``i < j``; ties go to the lowest ``i``, then ``j``."""
        iu, ju = np.triu_indices(self.n, k=1)
        k = int(np.argmax(self.T[iu, ju]))
        return int(iu[k]), int(ju[k])


# --- spiked (UMPI) test ---------------------------------------------------


def spiked_statistic(G: GrassmannPoint, c) -> float:
    """``t_c = c^T G c``, in ``[0, 1]``."""
    c = _unit_vector(c)
    if c.size != G.n:
        raise InvalidInputError(f"c has length {c.size}, expected {G.n}")
    if G.basis is not None:
        t = float(np.sum((c @ G.basis) ** 2))
    else:
        t = float(c @ G.G @ c)
    return min(max(t, 0.0), 1.0)


@functools.lru_cache(maxsize=256)
def _upper_quantile(alpha: float, a: float, b: float) -> float:
    return beta_quantile(alpha, a, b, upper=True)


def spiked_test(Y, design: DesignSpec, c, alpha: float = 0.05) -> SpikedTestResult:
    """Uniformly most powerful invariant test of ``omega = 0`` vs ``omega > 0``.

    The row covariance alternative is ``Psi = I + omega c c^T`` with known
    unit ``c``. The statistic is ``t = c^T G(R) c / |H_X c|^2``, which is
    ``ctilde^T G(Ytilde) ctilde`` for the reduced direction and equals
    ``c^T G(R) c`` when ``c`` is orthogonal to the row design. Under the
    null ``t ~ beta(p_eff / 2, (n_eff - p_eff) / 2)``; the test rejects when
    ``t`` exceeds the upper ``alpha`` quantile.
    """
    alpha = _check_alpha(alpha)
    red = residualize(Y, design)
    _require_nontrivial(red)
    _, scale = reduce_direction(c, red.H_X)
    t = min(spiked_statistic(grassmann_projector(red.R), c) / scale, 1.0)
    a = red.p_eff / 2.0
    b = (red.n_eff - red.p_eff) / 2.0
    return SpikedTestResult(
        t=t,
        critical_value=_upper_quantile(alpha, a, b),
        p_value=beta_sf(t, a, b),
        alpha=alpha,
        shape1=a,
        shape2=b,
        n_eff=red.n_eff,
        p_eff=red.p_eff,
    )


def spiked_power(omega: float, n: int, p: int, alpha: float = 0.05) -> float:
    """Power of the level-``alpha`` spiked test under ``Psi = I + omega c c^T``.

    ``P(b > b_crit / (1 + omega (1 - b_crit)))`` with
    ``b ~ beta(p/2, (n-p)/2)``. For a regression design pass the effective
    dimensions and ``omega |H c|^2``.
    """
    alpha = _check_alpha(alpha)
    if not (0 < p < n):
        raise InvalidInputError(f"need 0 < p < n, got n={n}, p={p}")
    if not omega >= 0:
        raise InvalidInputError(f"omega must be nonnegative, got {omega}")
    if omega == 0:
        return alpha
    if math.isinf(omega):
        return 1.0
    a, b = p / 2.0, (n - p) / 2.0
    # clip the rounding of the quantile so power never dips below the level
    return max(alpha, beta_sf(_power_threshold(omega, a, b, alpha), a, b))


def _power_threshold(omega, a, b, alpha):
    crit = _upper_quantile(alpha, a, b)
    return crit / (1.0 + omega * (1.0 - crit))


def spiked_type2_error(omega: float, n: int, p: int, alpha: float = 0.05) -> float:
    """``1 - spiked_power``, computed directly so it stays accurate near zero."""
    alpha = _check_alpha(alpha)
    if not (0 < p < n):
        raise InvalidInputError(f"need 0 < p < n, got n={n}, p={p}")
    if not omega >= 0:
        raise InvalidInputError(f"omega must be nonnegative, got {omega}")
    if omega == 0:
        return 1.0 - alpha
    if math.isinf(omega):
        return 0.0
    a, b = p / 2.0, (n - p) / 2.0
    return min(1.0 - alpha, beta_cdf(_power_threshold(omega, a, b, alpha), a, b))


# --- pairwise / maxEP -----------------------------------------------------


def pair_vector(n: int, i: int, j: int) -> np.ndarray:
    """``(e_i + e_j) / sqrt(2)`` (0-based indices)."""
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidInputError(f"pair ({i}, {j}) invalid for n={n}")
    c = np.zeros(n)
    c[[i, j]] = 1.0 / math.sqrt(2.0)
    return c


def pairwise_stat_matrix(G: GrassmannPoint) -> PairwiseStatMatrix:
    """``T = G + (g 1^T + 1 g^T) / 2`` with ``g = diag(G)``; diagonal set to NaN."""
    g = G.diag
    T = G.G + 0.5 * (g[:, None] + g[None, :])
    np.fill_diagonal(T, np.nan)
    return PairwiseStatMatrix(T)


def maxep_statistic(T: PairwiseStatMatrix) -> float:
    """Largest off-diagonal entry of ``T``."""
    if T.n < 2:
        raise InvalidInputError("maxEP needs at least two rows")
    return float(np.nanmax(T.T))


# --- batched statistics on orthonormal bases ------------------------------
# U has shape (B, n, r); G = U U^T for each replicate.


def _batch_spiked(c: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def stat(U):
        return np.square(np.einsum("i,bij->bj", c, U)).sum(axis=1)

    return stat


def _batch_maxep(U: np.ndarray) -> np.ndarray:
    G = U @ np.swapaxes(U, 1, 2)
    g = np.einsum("bij,bij->bi", U, U)
    T = G + 0.5 * (g[:, :, None] + g[:, None, :])
    n = T.shape[1]
    T[:, np.arange(n), np.arange(n)] = -np.inf
    return T.reshape(T.shape[0], -1).max(axis=1)


def _statistic_kernel(statistic: str, hx, c=None):
    if statistic == "maxep":
        return _batch_maxep
    if statistic == "spiked":
        if c is None:
            raise InvalidInputError("the spiked statistic needs a direction c")
        _, scale = reduce_direction(c, hx)
        return _batch_spiked(_unit_vector(c) / math.sqrt(scale))
    raise InvalidInputError(f"unknown statistic {statistic!r}; expected 'spiked' or 'maxep'")


def _chunk_size(n: int, p: int) -> int:
    return int(max(16, min(4096, 2**21 // (n * max(n, p)))))


def simulate_statistic(
    statistic,
    n: int,
    p: int,
    design: DesignSpec,
    S: int,
    rng: RngStream,
    c=None,
    psi_sqrt: np.ndarray | None = None,
    family: Family = GAUSSIAN,
    workers: int = 1,
) -> np.ndarray:
    """Simulate an invariant statistic over ``S`` replicates.

    Replicate ``s`` draws ``Y = psi_sqrt @ Z`` with ``Z`` from
    ``family`` on stream ``rng.spawn(s)`` (``Sigma = I`` and a zero mean
    suffice: the statistic is invariant to both), residualizes it under
    ``design`` and evaluates ``statistic``. ``statistic`` is ``"spiked"``
    (normalized as in :func:`spiked_test`), ``"maxep"``, or a callable
    mapping a ``(B, n, r)`` stack of orthonormal bases of ``G(R)`` to ``B``
    values.
    """
    hx, hw = design.bases(n, p)
    if hx.dim <= hw.dim:
        raise TrivialityError(f"n - q2 = {hx.dim} <= p - q1 = {hw.dim}: trivial regime")
    kernel = statistic if callable(statistic) else _statistic_kernel(statistic, hx, c)
    HX, HXt, HWt = hx.H, np.ascontiguousarray(hx.H.T), np.ascontiguousarray(hw.H.T)
    if psi_sqrt is not None:
        psi_sqrt = _as_matrix(psi_sqrt, "psi_sqrt")
        if psi_sqrt.shape != (n, n):
            raise InvalidInputError(f"psi_sqrt must be {n}x{n}")
    S = int(S)
    out = np.empty(S)
    step = _chunk_size(n, p)

    def run(start: int):
        stop = min(start + step, S)
        Z = np.stack([sample_elliptical_Z(n, p, family, rng.spawn(s)) for s in range(start, stop)])
        if psi_sqrt is not None:
            Z = psi_sqrt @ Z
        Yt = HX @ Z @ HWt
        Q, _ = np.linalg.qr(Yt)
        out[start:stop] = kernel(HXt @ Q)

    starts = range(0, S, step)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s0 in starts:
            run(s0)
    return out


def simulate_null(statistic, n, p, design, S=DEFAULT_REPS, rng=None, c=None, family=GAUSSIAN, workers=1):
    """Monte Carlo null sample of ``statistic`` from standard normal data."""
    if rng is None:
        rng = RngStream(0)
    return simulate_statistic(statistic, n, p, design, S, rng, c=c, family=family, workers=workers)


def _observed(statistic: str, red: Reduction, c):
    G = grassmann_projector(red.R)
    if statistic == "maxep":
        T = pairwise_stat_matrix(G)
        return maxep_statistic(T), list(T.argmax_pair())
    if statistic == "spiked":
        if c is None:
            raise InvalidInputError("the spiked statistic needs a direction c")
        _, scale = reduce_direction(c, red.H_X)
        return min(spiked_statistic(G, c) / scale, 1.0), None
    raise InvalidInputError(f"unknown statistic {statistic!r}; expected 'spiked' or 'maxep'")


def mc_null_test(
    statistic: str,
    Y,
    design: DesignSpec,
    S: int = DEFAULT_REPS,
    alpha: float = 0.05,
    rng: RngStream | None = None,
    c=None,
    workers: int = 1,
) -> TestReport:
    """Invariant test with a simulated null distribution.

    The critical value is the empirical ``1 - alpha`` quantile of ``S``
    null replicates; the p-value is ``(1 + #{null >= observed}) / (S + 1)``.
    ``argmax_pair`` is 0-based.
    """
    alpha = _check_alpha(alpha)
    if int(S) < MIN_REPS:
        raise InvalidInputError(f"need at least {MIN_REPS} null replicates, got {S}")
    rng = RngStream(0) if rng is None else rng
    red = residualize(Y, design)
    _require_nontrivial(red)
    t_obs, pair = _observed(statistic, red, c)
    null = simulate_null(statistic, red.n, red.p, design, S, rng, c=c, workers=workers)
    crit = float(np.quantile(null, 1.0 - alpha))
    p_value = (1.0 + np.count_nonzero(null >= t_obs)) / (S + 1.0)
    return TestReport(
        method=statistic,
        n=red.n,
        p=red.p,
        q1=red.q1,
        q2=red.q2,
        n_eff=red.n_eff,
        p_eff=red.p_eff,
        statistic=float(t_obs),
        critical_value=crit,
        p_value=float(p_value),
        alpha=alpha,
        null_kind="monte_carlo",
        S=int(S),
        seed=int(rng.seed),
        argmax_pair=pair,
    )


# --- likelihoods ----------------------------------------------------------


def _logdet_pd(M: np.ndarray, what: str) -> float:
    sign, ld = np.linalg.slogdet(M)
    if sign <= 0 or not np.isfinite(ld):
        raise RankError(f"{what} is singular or not positive definite")
    return float(ld)


def _psi(Psi, n: int) -> np.ndarray:
    Psi = _check_pd(Psi, "Psi")
    if Psi.shape != (n, n):
        raise InvalidInputError(f"Psi must be {n}x{n}, got {Psi.shape}")
    return Psi


def profile_loglik_neg2(Y, Psi) -> float:
    """``p log|Psi| + n log|Y^T Psi^{-1} Y / n| + n p``.

    Minus twice the mean-zero matrix normal log-likelihood, minimized over
    ``Sigma`` and without its additive constant.
    """
    Y = _as_matrix(Y, "Y")
    n, p = Y.shape
    Psi = _psi(Psi, n)
    inner = Y.T @ np.linalg.solve(Psi, Y) / n
    return p * _logdet_pd(Psi, "Psi") + n * _logdet_pd(inner, "Y^T Psi^-1 Y") + n * p


def profile_loglik_neg2_spectral(Y, E, log_eigs, tol: float = 1e-10) -> float:
    """:func:`profile_loglik_neg2` for ``Psi = E diag(exp(log_eigs)) E^T``.

    Works on log eigenvalues so paths with eigenvalues far below the
    floating-point range stay finite. Directions of ``E`` whose projection
    of ``Y`` is below ``tol`` times the largest are treated as orthogonal to
    the column space of ``Y``; they contribute only through ``log|Psi|``.
    """
    Y = _as_matrix(Y, "Y")
    n, p = Y.shape
    E = _as_matrix(E, "E")
    log_eigs = np.asarray(log_eigs, dtype=float)
    if E.shape != (n, n) or log_eigs.shape != (n,):
        raise InvalidInputError("E must be n x n and log_eigs length n")
    A = E.T @ Y
    norms = np.linalg.norm(A, axis=1)
    keep = norms > tol * norms.max()
    inner = (A[keep].T * np.exp(-log_eigs[keep])) @ A[keep] / n
    return p * float(log_eigs.sum()) + n * _logdet_pd(inner, "Y^T Psi^-1 Y") + n * p


def loglik_U_neg2(U, Psi) -> float:
    """``p log|Psi| + n log|U^T Psi^{-1} U|`` for ``U`` with orthonormal columns."""
    U = _as_matrix(U, "U")
    n, p = U.shape
    Psi = _psi(Psi, n)
    inner = U.T @ np.linalg.solve(Psi, U)
    return p * _logdet_pd(Psi, "Psi") + n * _logdet_pd(inner, "U^T Psi^-1 U")


def loglik_G_neg2(G, Psi) -> float:
    """``p log|Psi| + n log|I - (I - Psi^{-1}) G|``, ``p = rank(G)``."""
    if isinstance(G, GrassmannPoint):
        Gm, p = G.G, G.r
    else:
        Gm = _as_matrix(G, "G")
        p = int(round(np.trace(Gm)))
    n = Gm.shape[0]
    Psi = _psi(Psi, n)
    M = np.eye(n) - (np.eye(n) - np.linalg.inv(Psi)) @ Gm
    sign, ld = np.linalg.slogdet(M)
    if sign <= 0:
        raise RankError("I - (I - Psi^-1) G is singular")
    return p * _logdet_pd(Psi, "Psi") + n * float(ld)


def spiked_mle_omega(t: float, n: int, p: int) -> float:
    """MLE of the spike size, ``(n t - p) / (p (1 - t))`` clipped at zero."""
    if not (0 <= t <= 1):
        raise InvalidInputError(f"t must lie in [0, 1], got {t}")
    if t == 1:
        raise InfiniteMLEError("t = 1: the spike MLE is infinite")
    return max(0.0, (n * t - p) / (p * (1.0 - t)))


def spiked_lrt_stat(t: float, n: int, p: int) -> float:
    """``(n - p) log(1 - t) + p log t``; not monotone in ``t``, peaks at ``t = p/n``."""
    if not (0 < t < 1):
        raise InvalidInputError(f"t must lie in (0, 1), got {t}")
    return (n - p) * math.log1p(-t) + p * math.log(t)
