"""Complete-sample method-of-moments estimators for E{g(Y)}.

Both estimators accept a single completed vector or a stack of them
(shape ``(M, n)``), reducing along the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample

__all__ = ["Estimand", "CompleteSampleEstimate", "mme_point", "mme_variance", "mme_estimate"]


@dataclass(frozen=True)
class Estimand:
    """``mean`` (g(y) = y) or ``threshold`` (g(y) = I(y < q), strict)."""

    kind: str
    threshold: float = math.nan

    def __post_init__(self):
        if self.kind not in ("mean", "threshold"):
            raise ValueError(f"unknown estimand kind {self.kind!r}")
        if self.kind == "threshold" and not math.isfinite(self.threshold):
            raise ValueError("threshold estimand needs a finite threshold")

    @classmethod
    def mean(cls):
        return cls("mean")

    @classmethod
    def proportion_below(cls, q):
        return cls("threshold", float(q))

    @classmethod
    def parse(cls, text: str) -> "Estimand":
        """Parse ``"mean"`` or ``"threshold:<q>"``."""
        text = text.strip().lower()
        if text == "mean":
            return cls.mean()
        kind, sep, value = text.partition(":")
        if kind in ("threshold", "prop", "proportion") and sep:
            return cls.proportion_below(float(value))
        raise ValueError(f"cannot parse estimand {text!r}")

    @property
    def label(self) -> str:
        return "mean" if self.kind == "mean" else f"threshold:{self.threshold:g}"

    def g(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "mean":
            return y
        return (y < self.threshold).astype(float)


@dataclass(frozen=True)
class CompleteSampleEstimate:
    eta_hat: float
    v_hat: float


def mme_point(estimand: Estimand, y_completed):
    g = estimand.g(y_completed)
    if g.shape[-1] < 1:
        raise DegenerateSample("need at least one unit")
    return g.mean(axis=-1)


def mme_variance(estimand: Estimand, y_completed):
    """Variance estimate of :func:`mme_point`.

    Mean: ``sum((y - ybar)^2) / (n (n - 1))``, computed in two passes.
    Proportion: ``phat (1 - phat) / (n - 1)``.
    """
    g = estimand.g(y_completed)
    n = g.shape[-1]
    if n < 2:
        raise DegenerateSample(f"variance needs n >= 2, got n={n}")
    centre = g.mean(axis=-1, keepdims=True)
    if estimand.kind == "mean":
        ss = np.sum((g - centre) ** 2, axis=-1)
        return ss / (n * (n - 1))
    phat = centre[..., 0]
    return phat * (1.0 - phat) / (n - 1)


def mme_estimate(estimand: Estimand, y_completed) -> CompleteSampleEstimate:
    return CompleteSampleEstimate(
        float(mme_point(estimand, y_completed)), float(mme_variance(estimand, y_completed))
    )
