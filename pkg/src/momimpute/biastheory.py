"""Asymptotic bias of Rubin's variance estimator for method-of-moments MI.

General MAR form::

    bias ~= 2 (1 - p) / n * ( E[var{g(Y)|X} | delta=0]  -  mdot_0' I^{-1} mdot_1 )

with ``mdot(x) = d m(x; theta) / d theta`` for ``m(x; theta) = E{g(Y) | x}``,
``mdot_d = E{mdot(X) | delta = d}`` and ``I`` the per-respondent Fisher
information of ``theta = (beta, sigma^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .datagen import MissingnessMechanism, PopulationModel
from .estimators import Estimand
from .randcore import RngStream

__all__ = [
    "BiasInputs",
    "bias_general",
    "bias_mcar",
    "bias_no_intercept",
    "moment_oracle",
    "normal_model_info_inv",
    "mdot",
]


@dataclass(frozen=True)
class BiasInputs:
    """Population moments feeding the bias formulas.

    ``e1x``, ``e0x`` and ``e1x2`` are moments of the (non-intercept)
    covariate among respondents / nonrespondents.  The remaining optional
    fields are filled by :func:`moment_oracle` and describe the large-M
    variance ``var(eta_MI) ~= V1 / n + V2 / r``.
    """

    n: int
    p_resp: float
    sigma2: float
    cond_var_given_x_nonresp: float
    mdot0: np.ndarray
    mdot1: np.ndarray
    info_inv: np.ndarray
    e1x: float = math.nan
    e0x: float = math.nan
    e1x2: float = math.nan
    mdot_all: np.ndarray | None = None
    var_g: float = math.nan
    var_m: float = math.nan
    cond_var_given_x: float = math.nan

    @property
    def v1(self) -> float:
        return self.var_g - (1 - self.p_resp) * self.cond_var_given_x_nonresp

    @property
    def v2(self) -> float:
        a = float(self.mdot_all @ self.info_inv @ self.mdot_all)
        b = float(self.mdot1 @ self.info_inv @ self.mdot1)
        return a - self.p_resp**2 * b

    @property
    def r(self) -> float:
        return self.n * self.p_resp

    def var_eta_mi(self) -> float:
        """Large-M variance of the MI estimator."""
        return self.v1 / self.n + self.v2 / self.r

    def expected_cm(self) -> float:
        return (1 - self.p_resp) * self.cond_var_given_x_nonresp / self.n


def bias_general(inputs: BiasInputs) -> float:
    m0 = np.atleast_1d(np.asarray(inputs.mdot0, dtype=float))
    m1 = np.atleast_1d(np.asarray(inputs.mdot1, dtype=float))
    info_inv = np.atleast_2d(np.asarray(inputs.info_inv, dtype=float))
    if not (m0.shape == m1.shape and info_inv.shape == (m0.size, m0.size)):
        raise ValueError(
            f"dimension mismatch: mdot0 {m0.shape}, mdot1 {m1.shape}, info_inv {info_inv.shape}"
        )
    cross = float(m0 @ info_inv @ m1)
    return 2.0 * (1.0 - inputs.p_resp) / inputs.n * (inputs.cond_var_given_x_nonresp - cross)


def bias_mcar(var_mme: float, var_mle: float, p_resp: float) -> float:
    if var_mme < 0 or var_mle < 0:
        raise ValueError("variances must be non-negative")
    return 2.0 * p_resp * (1.0 - p_resp) * (var_mme - var_mle)


def bias_no_intercept(n, p_resp, sigma2, e1x, e0x, e1x2) -> float:
    """Bias for ``y = beta x + e`` (no intercept) with ``g(y) = y``."""
    if not e1x2 > 0:
        raise ValueError("E1(X^2) must be positive")
    return 2.0 / n * (1.0 - p_resp) * sigma2 * (e1x2 - e0x * e1x) / e1x2


def mdot(model: PopulationModel, estimand: Estimand, X: np.ndarray) -> np.ndarray:
    """Derivative of ``m(x; beta, sigma^2)`` per unit, shape ``(N, p + 1)``.

    Columns are ``d/d beta`` (one per design column) then ``d/d sigma^2``.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    if estimand.kind == "mean":
        return np.column_stack([X, np.zeros(N)])
    sigma2 = model.error_variance
    sigma = math.sqrt(sigma2)
    z = (estimand.threshold - X @ np.asarray(model.beta)) / sigma
    phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    d_beta = -(phi / sigma)[:, None] * X
    d_s2 = -phi * z / (2.0 * sigma2)
    return np.column_stack([d_beta, d_s2])


def cond_mean_var(model: PopulationModel, estimand: Estimand, X: np.ndarray):
    """``m(x)`` and ``var{g(Y) | x}`` per unit."""
    mu = X @ np.asarray(model.beta)
    if estimand.kind == "mean":
        return mu, np.full(len(mu), model.error_variance)
    m = special.ndtr((estimand.threshold - mu) / math.sqrt(model.error_variance))
    return m, m * (1.0 - m)


def normal_model_info_inv(exxt: np.ndarray, sigma2: float) -> np.ndarray:
    """Inverse Fisher information of ``(beta, sigma^2)`` in the normal linear model.

    ``exxt`` is E(XX') over the units the parameters are fitted on.
    """
    exxt = np.atleast_2d(exxt)
    p = exxt.shape[0]
    out = np.zeros((p + 1, p + 1))
    out[:p, :p] = sigma2 * np.linalg.inv(exxt)
    out[p, p] = 2.0 * sigma2**2
    return out


ORACLE_BLOCK = 1_000_000


def moment_oracle(model: PopulationModel, mechanism: MissingnessMechanism, estimand: Estimand,
                  draws: int, stream: RngStream, n: int = 1) -> BiasInputs:
    """Estimate every moment the bias formulas need by Monte Carlo over X.

    Conditioning on delta uses the response probabilities as weights
    (``E1(h) = E[pi h] / E[pi]``), which is unbiased and lower-variance than
    sampling delta.  Conditional variances of g(Y) given x are analytic.
    The Fisher information is taken over respondents, since the imputation
    parameters are fitted on them.

    Draws are processed in blocks of ``ORACLE_BLOCK``; block ``b`` uses
    sub-stream ``b`` so the result does not depend on memory limits.
    """
    if draws < 1:
        raise ValueError("draws must be positive")
    p = model.p
    acc = {
        "w1": 0.0, "w0": 0.0, "md1": np.zeros(p + 1), "md0": np.zeros(p + 1),
        "md": np.zeros(p + 1), "xx1": np.zeros((p, p)), "cv0": 0.0, "cv": 0.0,
        "x1": 0.0, "x0": 0.0, "x21": 0.0, "m": 0.0, "m2": 0.0,
    }
    done = 0
    block = 0
    while done < draws:
        size = min(ORACLE_BLOCK, draws - done)
        x = model.covariate.draw(stream.child(block), size)
        X = model.design(x)
        w1 = mechanism.response_prob(x)
        w0 = 1.0 - w1
        md = mdot(model, estimand, X)
        m, cv = cond_mean_var(model, estimand, X)
        acc["w1"] += w1.sum()
        acc["w0"] += w0.sum()
        acc["md1"] += w1 @ md
        acc["md0"] += w0 @ md
        acc["md"] += md.sum(axis=0)
        acc["xx1"] += (X * w1[:, None]).T @ X
        acc["cv0"] += w0 @ cv
        acc["cv"] += cv.sum()
        acc["x1"] += w1 @ x
        acc["x0"] += w0 @ x
        acc["x21"] += w1 @ (x * x)
        acc["m"] += m.sum()
        acc["m2"] += m @ m
        done += size
        block += 1

    N = float(draws)
    w1s, w0s = acc["w1"], acc["w0"]
    safe0 = w0s if w0s > 0 else 1.0
    info_inv = normal_model_info_inv(acc["xx1"] / w1s, model.error_variance)
    var_m = acc["m2"] / N - (acc["m"] / N) ** 2
    cvar = acc["cv"] / N
    return BiasInputs(
        n=n, p_resp=w1s / N, sigma2=model.error_variance,
        cond_var_given_x_nonresp=acc["cv0"] / safe0,
        mdot0=acc["md0"] / safe0, mdot1=acc["md1"] / w1s, info_inv=info_inv,
        e1x=acc["x1"] / w1s, e0x=acc["x0"] / safe0, e1x2=acc["x21"] / w1s,
        mdot_all=acc["md"] / N, var_g=var_m + cvar, var_m=var_m, cond_var_given_x=cvar,
    )


def mcar_variances(inputs: BiasInputs) -> tuple[float, float]:
    """Respondent-mean variances ``(var_MME, var_MLE)`` implied by the moments."""
    r = inputs.r
    var_mme = inputs.var_g / r
    md = inputs.mdot_all
    var_mle = (inputs.var_m + float(md @ inputs.info_inv @ md)) / r
    return var_mme, var_mle


def theoretical_bias(model: PopulationModel, mechanism: MissingnessMechanism, estimand: Estimand,
                     n: int, draws: int, stream: RngStream) -> dict:
    """Every applicable bias formula for one scenario and estimand.

    ``predicted_relative_bias_pct`` divides the general bias by the large-M
    variance of the MI estimator implied by the same moments.
    """
    inputs = moment_oracle(model, mechanism, estimand, draws, stream, n=n)
    general = bias_general(inputs)
    var_mi = inputs.var_eta_mi()
    out = {
        "estimand": estimand.label,
        "n": n,
        "p_resp": inputs.p_resp,
        "e1x": inputs.e1x,
        "e0x": inputs.e0x,
        "e1x2": inputs.e1x2,
        "bias_general": general,
        "var_eta_mi": var_mi,
        "predicted_relative_bias_pct": 100.0 * general / var_mi,
        "bias_no_intercept": math.nan,
        "bias_mcar": math.nan,
        "expected_cm": inputs.expected_cm(),
    }
    if not model.intercept and estimand.kind == "mean":
        out["bias_no_intercept"] = bias_no_intercept(
            n, inputs.p_resp, model.error_variance, inputs.e1x, inputs.e0x, inputs.e1x2
        )
    if mechanism.kind == "mcar":
        var_mme, var_mle = mcar_variances(inputs)
        out["bias_mcar"] = bias_mcar(var_mme, var_mle, inputs.p_resp)
    return out
