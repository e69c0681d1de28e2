"""Simulation studies: power curves, the bias demonstration, elliptical
null invariance and likelihood unboundedness paths.

All studies take an :class:`~rowcov.sampling.RngStream` and address
sub-streams deterministically, so identical seeds give identical tables.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import stats

from .errors import InvalidInputError
from .invariant import (
    mc_null_test,
    pair_vector,
    profile_loglik_neg2_spectral,
    simulate_statistic,
    spiked_power,
)
from .linalg import _as_matrix, complement_basis, reduced_svd, sym_sqrt_spiked
from .models import DesignSpec, Regime, check_triviality
from .sampling import GAUSSIAN, Family, RngStream, beta_quantile, sample_haar_orthogonal

__all__ = [
    "PowerRow",
    "PowerCurveTable",
    "umpi_power_curve",
    "maxep_power_curve",
    "BiasReport",
    "bias_demonstration",
    "elliptical_null_invariance",
    "UnboundednessPath",
    "unboundedness_path",
    "nested_null_calibration",
    "resolve_p",
    "DEFAULT_N_LIST",
    "CSV_COLUMNS",
]

DEFAULT_N_LIST = (20, 40, 80, 160, 320)
CSV_COLUMNS = ("n", "p", "omega", "alpha", "power", "method", "S", "mc_se")

PRule = Union[int, str, Callable[[int], int]]


def resolve_p(p_rule: PRule, n: int) -> int:
    """``p`` for a given ``n``: a fixed integer, ``"half"`` (``n // 2``) or a callable."""
    if callable(p_rule):
        return int(p_rule(n))
    if isinstance(p_rule, str):
        if p_rule == "half":
            return n // 2
        try:
            return int(p_rule)
        except ValueError:
            raise InvalidInputError(f"p rule must be an integer or 'half', got {p_rule!r}") from None
    return int(p_rule)


@dataclass(frozen=True)
class PowerRow:
    n: int
    p: int
    omega: float
    alpha: float
    power: float
    method: str
    S: int = 0
    mc_se: float = 0.0


@dataclass
class PowerCurveTable:
    """Power by ``(n, p, omega)``.

    Rows with ``method == "trivial"`` mark skipped configurations
    (``n_eff <= p_eff``); their power is NaN.
    """

    rows: list[PowerRow] = field(default_factory=list)

    def sort(self) -> "PowerCurveTable":
        self.rows.sort(key=lambda r: (r.n, r.p, r.omega))
        return self

    def select(self, **kw) -> list[PowerRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in kw.items())]

    def series(self) -> dict[tuple[int, int], list[PowerRow]]:
        out: dict[tuple[int, int], list[PowerRow]] = {}
        for r in self.rows:
            if r.method != "trivial":
                out.setdefault((r.n, r.p), []).append(r)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.n, r.p, repr(float(r.omega)), repr(float(r.alpha)), repr(float(r.power)),
                        r.method, r.S, repr(float(r.mc_se))])
        return buf.getvalue()

    def to_plot_data(self) -> str:
        """Whitespace-separated blocks, one per ``(n, p)`` series, x = omega."""
        lines = []
        for (n, p), rows in self.series().items():
            lines.append(f"# n={n} p={p} method={rows[0].method}")
            lines.append("# omega power mc_se")
            lines.extend(f"{r.omega!r} {r.power!r} {r.mc_se!r}" for r in rows)
            lines.extend(["", ""])
        return "\n".join(lines)


def _trivial_row(n, p, alpha, method_S=0):
    warnings.warn(f"skipping trivial configuration n={n}, p={p}", stacklevel=3)
    return PowerRow(n, p, math.nan, alpha, math.nan, "trivial", method_S, 0.0)


def umpi_power_curve(
    n_list: Iterable[int] = DEFAULT_N_LIST,
    p_rule: PRule = "half",
    omega_grid: Sequence[float] = (0.0, 1.0, 2.0, 5.0, 10.0),
    alpha: float = 0.05,
) -> PowerCurveTable:
    """Analytic power of the spiked test over a grid (mean-zero model)."""
    table = PowerCurveTable()
    for n in n_list:
        p = resolve_p(p_rule, n)
        if p < 1 or check_triviality(n, p, DesignSpec.zero()) is Regime.TRIVIAL:
            table.rows.append(_trivial_row(n, p, alpha))
            continue
        for omega in omega_grid:
            table.rows.append(PowerRow(n, p, float(omega), alpha, spiked_power(omega, n, p, alpha), "analytic"))
    return table.sort()


def _binom_se(power: float, S: int) -> float:
    return math.sqrt(max(power * (1.0 - power), 0.0) / S)


def maxep_power_curve(
    n_list: Iterable[int] = DEFAULT_N_LIST,
    p_rule: PRule = "half",
    omega_grid: Sequence[float] = (0.0, 1.0, 2.0, 5.0, 10.0),
    alpha: float = 0.05,
    S_null: int = 5000,
    S_power: int = 2000,
    rng: RngStream | None = None,
    pair: tuple[int, int] = (0, 1),
    design: DesignSpec | None = None,
    workers: int = 1,
) -> PowerCurveTable:
    """Monte Carlo power of the maxEP test under ``Psi = I + omega c_ij c_ij^T``.

    For each ``(n, p)`` the critical value is the ``1 - alpha`` quantile of
    ``S_null`` null replicates; power is the rejection rate over ``S_power``
    replicates at each ``omega``. ``pair`` is 0-based.
    """
    rng = RngStream(0) if rng is None else rng
    design = DesignSpec.zero() if design is None else design
    table = PowerCurveTable()
    for k, n in enumerate(n_list):
        p = resolve_p(p_rule, n)
        if p < 1 or check_triviality(n, p, design) is Regime.TRIVIAL:
            table.rows.append(_trivial_row(n, p, alpha, S_power))
            continue
        cell = rng.spawn(k)
        null = simulate_statistic("maxep", n, p, design, S_null, cell.spawn(0), workers=workers)
        crit = float(np.quantile(null, 1.0 - alpha))
        c = pair_vector(n, *pair)
        for j, omega in enumerate(omega_grid):
            t = simulate_statistic("maxep", n, p, design, S_power, cell.spawn(1 + j),
                                   psi_sqrt=sym_sqrt_spiked(omega, c), workers=workers)
            power = float(np.mean(t > crit))
            table.rows.append(PowerRow(n, p, float(omega), alpha, power, "monte_carlo", S_power,
                                       _binom_se(power, S_power)))
    return table.sort()


# --- bias demonstration ---------------------------------------------------


@dataclass
class BiasReport:
    avg_power: float
    se: float
    power_at_aligned_E: float
    power_at_antialigned_E: float
    alpha: float
    S_outer: int
    S_inner: int
    powers: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["powers"] = self.powers.tolist()
        return d


def _frame_with(c: np.ndarray, k: int) -> np.ndarray:
    """Orthogonal matrix whose ``k``-th column is the unit vector ``c``."""
    n = c.size
    Q, _ = np.linalg.qr(np.column_stack([c, np.eye(n)]))
    Q = Q[:, :n] * np.sign(Q[:, 0] @ c)
    order = list(range(1, n))
    order.insert(k, 0)
    return Q[:, order]


def bias_demonstration(
    Lambda,
    n: int,
    p: int,
    alpha: float = 0.05,
    S_outer: int = 500,
    S_inner: int = 2000,
    rng: RngStream | None = None,
    c=None,
    workers: int = 1,
) -> BiasReport:
    """Power of the level-``alpha`` spiked test averaged over uniform eigenvectors.

    For ``Psi = E diag(Lambda) E^T`` with ``E`` Haar on the orthogonal
    group, the averaged power equals ``alpha`` whatever ``Lambda`` is. The
    report also gives the power when the largest eigenvalue's eigenvector is
    ``c`` (aligned) and when the smallest one's is (antialigned).
    """
    lam = np.asarray(Lambda, dtype=float).ravel()
    if lam.shape != (n,) or np.any(lam <= 0):
        raise InvalidInputError("Lambda must hold n positive eigenvalues")
    rng = RngStream(0) if rng is None else rng
    c = np.eye(n)[0] if c is None else np.asarray(c, dtype=float)
    zero = DesignSpec.zero()
    crit = beta_quantile(alpha, p / 2.0, (n - p) / 2.0, upper=True)
    root = np.sqrt(lam)

    def power_at(E, stream):
        t = simulate_statistic("spiked", n, p, zero, S_inner, stream, c=c,
                               psi_sqrt=(E * root) @ E.T, workers=workers)
        return float(np.mean(t > crit))

    powers = np.array([
        power_at(sample_haar_orthogonal(n, rng.spawn(0).spawn(e)), rng.spawn(1).spawn(e))
        for e in range(S_outer)
    ])
    aligned = power_at(_frame_with(c, int(np.argmax(lam))), rng.spawn(2))
    anti = power_at(_frame_with(c, int(np.argmin(lam))), rng.spawn(3))
    return BiasReport(
        avg_power=float(powers.mean()),
        se=float(powers.std(ddof=1) / math.sqrt(S_outer)),
        power_at_aligned_E=aligned,
        power_at_antialigned_E=anti,
        alpha=alpha,
        S_outer=S_outer,
        S_inner=S_inner,
        powers=powers,
    )


# --- calibration of Monte Carlo tests -------------------------------------


def nested_null_calibration(
    statistic: str,
    n: int,
    p: int,
    design: DesignSpec,
    alpha: float = 0.05,
    S_outer: int = 2000,
    S_inner: int = 2000,
    rng: RngStream | None = None,
    c=None,
    workers: int = 1,
) -> dict:
    """Type-I error of :func:`~rowcov.invariant.mc_null_test` on null data.

    Each outer replicate draws standard normal data and runs the full test
    with its own ``S_inner``-replicate null sample.
    """
    rng = RngStream(0) if rng is None else rng
    rejects = 0
    pvals = np.empty(S_outer)
    for o in range(S_outer):
        Y = rng.spawn(0).spawn(o).generator().standard_normal((n, p))
        rep = mc_null_test(statistic, Y, design, S=S_inner, alpha=alpha, rng=rng.spawn(1).spawn(o),
                           c=c, workers=workers)
        rejects += rep.reject
        pvals[o] = rep.p_value
    rate = rejects / S_outer
    return {"rate": rate, "se": _binom_se(alpha, S_outer), "alpha": alpha, "S_outer": S_outer,
            "S_inner": S_inner, "p_values": pvals}


# --- elliptical null invariance -------------------------------------------


def elliptical_null_invariance(
    n: int,
    p: int,
    design: DesignSpec,
    families: Sequence[Family] = (GAUSSIAN, Family.matrix_t(3)),
    S: int = 10_000,
    rng: RngStream | None = None,
    statistic: str = "spiked",
    c=None,
    workers: int = 1,
) -> dict:
    """Pairwise two-sample KS distances between null samples of a statistic.

    Each family gets its own independent sample of size ``S``; a second,
    independent Gaussian sample is added as a same-distribution reference.
    """
    rng = RngStream(0) if rng is None else rng
    if statistic == "spiked" and c is None:
        c = pair_vector(n, 0, 1)
    samples = {}
    for k, fam in enumerate(families):
        samples[str(fam)] = simulate_statistic(statistic, n, p, design, S, rng.spawn(k),
                                               c=c, family=fam, workers=workers)
    samples["gaussian#2"] = simulate_statistic(statistic, n, p, design, S, rng.spawn(len(families)),
                                               c=c, workers=workers)
    ks = {}
    for a, b in combinations(samples, 2):
        res = stats.ks_2samp(samples[a], samples[b])
        ks[f"{a} vs {b}"] = {"ks": float(res.statistic), "p_value": float(res.pvalue)}
    return {"n": n, "p": p, "statistic": statistic, "S": S, "seed": rng.seed, "ks": ks}


# --- unboundedness of the likelihood --------------------------------------


@dataclass
class UnboundednessPath:
    log10_trailing: np.ndarray
    values: np.ndarray
    psi_terms: np.ndarray
    bounds: np.ndarray

    def to_dict(self) -> dict:
        return {k: v.tolist() for k, v in asdict(self).items()}


def unboundedness_path(Y, steps: int = 50, leading=None, decades_per_step: float = 1.0) -> UnboundednessPath:
    """Profile ``-2 log``-likelihood along ``Psi = E diag(lambda) E^T``.

    ``E = [U, U_perp]`` with ``U`` the left singular vectors of ``Y``; the
    leading ``p`` eigenvalues are ``leading`` (default ones) and the
    trailing ``n - p`` equal ``10^(-k * decades_per_step)`` at step
    ``k = 1..steps``. Everything is computed from log eigenvalues.

    ``psi_terms`` holds ``p log|Psi| + n log|U^T Psi^{-1} U|`` and
    ``bounds`` its upper bound ``-(n - p) log(lambda_(1) / lambda_(p))``
    over the descending eigenvalues.
    """
    Y = _as_matrix(Y, "Y")
    n, p = Y.shape
    if n <= p:
        raise InvalidInputError(f"need n > p, got n={n}, p={p}")
    svd = reduced_svd(Y)
    if svd.r < p:
        raise InvalidInputError("Y must have full column rank")
    E = np.column_stack([svd.U, complement_basis(svd.U).H.T])
    lead = np.zeros(p) if leading is None else np.log(np.asarray(leading, dtype=float))
    if lead.shape != (p,):
        raise InvalidInputError("leading must hold p positive eigenvalues")
    ks = np.arange(1, steps + 1)
    log10_trailing = -decades_per_step * ks.astype(float)
    values, psi_terms, bounds = [], [], []
    for l10 in log10_trailing:
        log_eigs = np.concatenate([lead, np.full(n - p, l10 * math.log(10.0))])
        values.append(profile_loglik_neg2_spectral(Y, E, log_eigs))
        psi_terms.append(profile_loglik_neg2_spectral(svd.U, E, log_eigs) + n * p * (math.log(n) - 1.0))
        srt = np.sort(log_eigs)[::-1]
        bounds.append(-(n - p) * (srt[0] - srt[p - 1]))
    return UnboundednessPath(log10_trailing, np.array(values), np.array(psi_terms), np.array(bounds))
