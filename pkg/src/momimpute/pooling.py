"""Combine M completed datasets into a point estimate and two variances.

Rubin's rule::

    V_rubin = W_M + (1 + 1/M) B_M

Over-imputation estimator::

    V_new = (W_M - C_M) + (D_Mn - D_Mr) + B_M / M

where ``C_M`` measures the spread of the imputed nonrespondent values across
imputations, and ``D_Mn``/``D_Mr`` pick up the between-unit covariance that
the shared parameter draw induces in the over-imputed values (all units and
respondents only, respectively).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DegenerateVariance, InsufficientImputations
from .estimators import Estimand, mme_point, mme_variance
from .randcore import t_quantile

__all__ = [
    "PooledResult",
    "ConfidenceInterval",
    "rubin_combine",
    "compute_cm",
    "centered_over_values",
    "compute_d_terms",
    "new_combine",
    "barnard_rubin_df",
    "confidence_interval",
    "pool",
    "V_FLOOR",
]

V_FLOOR = 1e-12


def _check_m(M):
    if M < 2:
        raise InsufficientImputations(f"need at least 2 imputations, got {M}")


def rubin_combine(estimates, variances):
    """Return ``(eta_mi, w_m, b_m, v_rubin)``."""
    est = np.asarray(estimates, dtype=float)
    var = np.asarray(variances, dtype=float)
    M = est.shape[0]
    _check_m(M)
    if var.shape != est.shape:
        raise ValueError("estimates and variances must have the same length")
    # shifted mean: exact when all estimates agree
    eta_mi = float(est[0] + np.mean(est - est[0]))
    w_m = float(var.mean())
    b_m = float(np.sum((est - eta_mi) ** 2) / (M - 1))
    return eta_mi, w_m, b_m, w_m + (1.0 + 1.0 / M) * b_m


def compute_cm(over_values, n: int) -> float:
    """Spread of imputed g-values over nonrespondents.

    ``over_values`` is ``(M, n - r)``: row k holds g(y_i^{*(k)}) for the
    nonrespondents.
    """
    g = np.asarray(over_values, dtype=float)
    if g.ndim != 2:
        raise ValueError("over_values must be a 2-d (M, n - r) array")
    M = g.shape[0]
    _check_m(M)
    if g.shape[1] == 0:
        return 0.0
    dev = g - g.mean(axis=0, keepdims=True)
    return float(np.sum(dev * dev) / (n * n * (M - 1)))


def centered_over_values(g_over) -> np.ndarray:
    """d_i^{(k)} = g(y_i^{*(k)}) - mean over k, for an ``(M, n)`` array."""
    g = np.asarray(g_over, dtype=float)
    return g - g.mean(axis=0, keepdims=True)


def compute_d_terms(d, r: int, n: int):
    """Return ``(d_mn, d_mr)`` from centred over-imputations ``d`` of shape ``(M, n)``.

    Both terms keep the 1/n and 1/n^2 scaling; ``d_mr`` only restricts the
    unit sums to the first ``r`` (respondent) columns.
    """
    d = np.asarray(d, dtype=float)
    M = d.shape[0]
    _check_m(M)

    def term(block):
        sums = block.sum(axis=1)
        sq = np.einsum("ki,ki->k", block, block)
        return float(np.sum(sums * sums) / (n * n * (M - 1)) - np.sum(sq) / (n * n * (M - 1)))

    return term(d), term(d[:, :r])


def new_combine(w_m: float, b_m: float, M: int, c_m: float, d_mn: float, d_mr: float) -> float:
    _check_m(M)
    return (w_m - c_m) + (d_mn - d_mr) + b_m / M


def barnard_rubin_df(w_m: float, b_m: float, M: int, n: int) -> float:
    """Small-sample degrees of freedom for Rubin's interval, with nu_com = n - 3."""
    _check_m(M)
    if n < 4:
        raise ValueError("Barnard-Rubin df needs n >= 4")
    total = w_m + (1.0 + 1.0 / M) * b_m
    if not total > 0:
        raise DegenerateVariance("total variance is zero")
    lam = (1.0 + 1.0 / M) * b_m / total
    nu_com = n - 3
    nu2 = (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - lam)
    if lam == 0.0:
        return nu2
    nu1 = (M - 1) / lam**2
    if nu2 <= 0.0:
        return float(M - 1)
    return nu1 * nu2 / (nu1 + nu2)


@dataclass(frozen=True)
class ConfidenceInterval:
    level: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def confidence_interval(eta_mi: float, v: float, df: float, level: float) -> ConfidenceInterval:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if v < 0:
        raise ValueError("variance must be non-negative")
    half = t_quantile(df, 1.0 - (1.0 - level) / 2.0) * math.sqrt(v)
    return ConfidenceInterval(level, eta_mi - half, eta_mi + half)


@dataclass(frozen=True)
class PooledResult:
    """Pooled estimate with the full variance decomposition.

    ``v_new`` is the raw (possibly negative) value; ``negative`` flags
    ``v_new <= 0`` and :attr:`v_new_ci` is the floored value used for
    intervals.
    """

    eta_mi: float
    w_m: float
    b_m: float
    c_m: float
    d_mn: float
    d_mr: float
    v_rubin: float
    v_new: float
    df_rubin: float
    df_new: float
    M: int
    n: int
    r: int
    negative: bool

    @property
    def v_new_ci(self) -> float:
        return max(self.v_new, V_FLOOR)

    def interval(self, method: str, level: float) -> ConfidenceInterval:
        if method == "rubin":
            return confidence_interval(self.eta_mi, self.v_rubin, self.df_rubin, level)
        if method == "new":
            return confidence_interval(self.eta_mi, self.v_new_ci, self.df_new, level)
        raise ValueError(f"unknown method {method!r}")

    def as_record(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def pool(estimand: Estimand, y_completed, y_over, r: int) -> PooledResult:
    """Pool ``(M, n)`` completed and over-imputed arrays (respondents first)."""
    y_completed = np.asarray(y_completed, dtype=float)
    y_over = np.asarray(y_over, dtype=float)
    M, n = y_completed.shape
    _check_m(M)
    if y_over.shape != (M, n):
        raise ValueError("y_over must have the same shape as y_completed")

    est = mme_point(estimand, y_completed)
    var = mme_variance(estimand, y_completed)
    eta_mi, w_m, b_m, v_rubin = rubin_combine(est, var)

    g_over = estimand.g(y_over)
    c_m = compute_cm(g_over[:, r:], n)
    d_mn, d_mr = compute_d_terms(centered_over_values(g_over), r, n)
    v_new = new_combine(w_m, b_m, M, c_m, d_mn, d_mr)

    if v_rubin > 0:
        df_rubin = barnard_rubin_df(w_m, b_m, M, n)
    else:
        df_rubin = float(n - 3) * (n - 2) / n
    return PooledResult(
        eta_mi=eta_mi, w_m=w_m, b_m=b_m, c_m=c_m, d_mn=d_mn, d_mr=d_mr,
        v_rubin=v_rubin, v_new=v_new, df_rubin=df_rubin, df_new=float(M - 1),
        M=M, n=n, r=r, negative=bool(v_new <= 0),
    )
