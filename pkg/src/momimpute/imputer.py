"""Bayesian normal-regression imputation with over-imputation of respondents.

The posterior under the flat prior on beta and the 1/sigma^2 prior on the
error variance is exact:

    sigma^2 | y_obs  ~  sigma2_hat * (r - p) / chi^2_{r-p}
    beta | sigma^2, y_obs  ~  N(beta_hat, sigma^2 (X_r'X_r)^{-1})

Each imputation draws one (beta*, sigma*^2) and one predictive value per
unit.  That single value is the over-imputation for every unit and doubles
as the imputation for nonrespondents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import IncompleteDataset
from .errors import InsufficientRespondents, RankDeficient
from .randcore import RngStream

__all__ = [
    "PosteriorSpec",
    "ParameterDraw",
    "CompletedReplicate",
    "ImputationSet",
    "fit_posterior",
    "draw_parameters",
    "make_replicate",
    "impute",
]

COND_LIMIT = 1e12


@dataclass(frozen=True)
class PosteriorSpec:
    beta_hat: np.ndarray
    xtx_inv: np.ndarray
    sigma2_hat: float
    resid_df: int

    @property
    def chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.xtx_inv)


@dataclass(frozen=True)
class ParameterDraw:
    beta_star: np.ndarray
    sigma2_star: float


@dataclass(frozen=True)
class CompletedReplicate:
    index: int
    y_completed: np.ndarray
    y_over: np.ndarray
    draw: ParameterDraw


def fit_posterior(data: IncompleteDataset) -> PosteriorSpec:
    """Least-squares fit on respondents, via QR."""
    r, p = data.r, data.p
    if r <= p:
        raise InsufficientRespondents(f"need more respondents than coefficients (r={r}, p={p})")
    Xr = data.x[:r]
    yr = data.y_obs
    q, R = np.linalg.qr(Xr)
    # cond(X'X) = cond(R)^2
    if np.linalg.cond(R) ** 2 > COND_LIMIT:
        raise RankDeficient("respondent design matrix is (numerically) rank deficient")
    beta_hat = np.linalg.solve(R, q.T @ yr)
    resid = yr - Xr @ beta_hat
    rss = float(resid @ resid)
    if rss <= 1e-24 * max(1.0, float(yr @ yr)):
        raise InsufficientRespondents("respondents fit exactly (RSS = 0); posterior is improper")
    r_inv = np.linalg.inv(R)
    xtx_inv = r_inv @ r_inv.T
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    df = r - p
    return PosteriorSpec(beta_hat=beta_hat, xtx_inv=xtx_inv, sigma2_hat=rss / df, resid_df=df)


def draw_parameters(post: PosteriorSpec, stream: RngStream) -> ParameterDraw:
    chi2 = stream.chi_square(post.resid_df)
    sigma2_star = post.sigma2_hat * post.resid_df / chi2
    z = stream.normal(0.0, 1.0, len(post.beta_hat))
    beta_star = post.beta_hat + np.sqrt(sigma2_star) * (post.chol @ z)
    return ParameterDraw(beta_star=beta_star, sigma2_star=float(sigma2_star))


def make_replicate(data: IncompleteDataset, draw: ParameterDraw, stream: RngStream,
                   index: int = 0) -> CompletedReplicate:
    e = stream.normal(0.0, draw.sigma2_star, data.n)
    y_over = data.x @ draw.beta_star + e
    y_completed = y_over.copy()
    y_completed[: data.r] = data.y_obs
    y_over.setflags(write=False)
    y_completed.setflags(write=False)
    return CompletedReplicate(index=index, y_completed=y_completed, y_over=y_over, draw=draw)


@dataclass(frozen=True)
class ImputationSet:
    """M completed datasets stacked row-wise (shape ``(M, n)``)."""

    data: IncompleteDataset
    y_completed: np.ndarray
    y_over: np.ndarray
    draws: tuple[ParameterDraw, ...]

    @property
    def M(self) -> int:
        return self.y_over.shape[0]

    def replicate(self, j: int) -> CompletedReplicate:
        return CompletedReplicate(j, self.y_completed[j], self.y_over[j], self.draws[j])

    def __iter__(self):
        return (self.replicate(j) for j in range(self.M))


def impute(data: IncompleteDataset, M: int, stream: RngStream,
           post: PosteriorSpec | None = None) -> ImputationSet:
    """Create ``M`` over-imputed replicates.

    Imputation ``j`` uses sub-stream ``j`` of ``stream`` (its child 0 for the
    parameter draw, child 1 for the unit-level noise), so any single
    replicate can be regenerated on its own.
    """
    if post is None:
        post = fit_posterior(data)
    y_over = np.empty((M, data.n))
    draws = []
    for j in range(M):
        sj = stream.child(j)
        draw = draw_parameters(post, sj.child(0))
        rep = make_replicate(data, draw, sj.child(1), index=j)
        y_over[j] = rep.y_over
        draws.append(draw)
    y_completed = y_over.copy()
    y_completed[:, : data.r] = data.y_obs
    y_over.setflags(write=False)
    y_completed.setflags(write=False)
    return ImputationSet(data=data, y_completed=y_completed, y_over=y_over, draws=tuple(draws))
