"""Superpopulation models, finite samples, and response mechanisms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .estimators import Estimand
from .randcore import RngStream

__all__ = [
    "CovariateDist",
    "PopulationModel",
    "MissingnessMechanism",
    "IncompleteDataset",
    "generate_sample",
    "apply_missingness",
    "true_eta",
    "sim1_model",
    "sim2_model",
]


@dataclass(frozen=True)
class CovariateDist:
    """Distribution of the single covariate: ``exponential`` or ``normal``."""

    kind: str
    rate: float = 1.0
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if self.kind == "exponential":
            if not self.rate > 0:
                raise ValueError("exponential covariate needs rate > 0")
        elif self.kind == "normal":
            if not self.variance > 0:
                raise ValueError("normal covariate needs variance > 0")
        else:
            raise ValueError(f"unknown covariate distribution {self.kind!r}")

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", rate=rate)

    @classmethod
    def normal(cls, mean=0.0, variance=1.0):
        return cls("normal", mean=mean, variance=variance)

    @property
    def expectation(self) -> float:
        return 1.0 / self.rate if self.kind == "exponential" else self.mean

    @property
    def second_moment(self) -> float:
        if self.kind == "exponential":
            return 2.0 / self.rate**2
        return self.variance + self.mean**2

    def draw(self, stream: RngStream, size: int) -> np.ndarray:
        if self.kind == "exponential":
            return stream.exponential(self.rate, size)
        return stream.normal(self.mean, self.variance, size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exponential":
            return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0)), 0.0)
        sd = math.sqrt(self.variance)
        return np.exp(-0.5 * ((x - self.mean) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))

    def support(self) -> tuple[float, float]:
        if self.kind == "exponential":
            return 0.0, math.inf
        return -math.inf, math.inf


@dataclass(frozen=True)
class PopulationModel:
    """Linear model ``y = x'beta + e`` with one covariate and optional intercept.

    ``beta`` is ordered like the design columns, i.e. ``(intercept, slope)``
    when ``intercept`` is true and ``(slope,)`` otherwise.
    """

    beta: tuple[float, ...]
    covariate: CovariateDist
    error_variance: float
    intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if not self.error_variance > 0:
            raise ValueError("error_variance must be positive")
        if len(self.beta) != int(self.intercept) + 1:
            raise ValueError(
                f"beta has length {len(self.beta)}; expected {int(self.intercept) + 1}"
            )

    @property
    def p(self) -> int:
        return len(self.beta)

    def design(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.intercept:
            return np.column_stack([np.ones_like(x), x])
        return x.reshape(-1, 1)

    def mean_function(self, x):
        """``x'beta`` evaluated at raw covariate values."""
        x = np.asarray(x, dtype=float)
        if self.intercept:
            return self.beta[0] + self.beta[1] * x
        return self.beta[0] * x


def sim1_model() -> PopulationModel:
    return PopulationModel((0.1,), CovariateDist.exponential(1.0), 0.5, intercept=False)


def sim2_model() -> PopulationModel:
    return PopulationModel((3.0, -1.0), CovariateDist.normal(2.0, 1.0), 1.0, intercept=True)


@dataclass(frozen=True)
class MissingnessMechanism:
    """``mcar`` with a fixed ``response_rate`` or ``mar_logistic`` in ``(phi0, phi1)``."""

    kind: str
    response_rate: float = 1.0
    phi0: float = 0.0
    phi1: float = 0.0

    def __post_init__(self):
        if self.kind == "mcar":
            if not 0.0 < self.response_rate <= 1.0:
                raise ValueError("MCAR response_rate must lie in (0, 1]")
        elif self.kind != "mar_logistic":
            raise ValueError(f"unknown missingness mechanism {self.kind!r}")

    @classmethod
    def mcar(cls, response_rate):
        return cls("mcar", response_rate=response_rate)

    @classmethod
    def mar_logistic(cls, phi0, phi1):
        return cls("mar_logistic", phi0=phi0, phi1=phi1)

    def response_prob(self, x):
        """Response probability for raw covariate values ``x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "mcar":
            return np.full(x.shape, self.response_rate)
        return special.expit(self.phi0 + self.phi1 * x)


@dataclass(frozen=True)
class IncompleteDataset:
    """Sample with respondents stored first.

    ``y`` holds NaN for nonrespondents; only ``y[:r]`` is ever read.
    """

    x: np.ndarray  # n x p design matrix
    y: np.ndarray
    delta: np.ndarray
    r: int

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def y_obs(self) -> np.ndarray:
        return self.y[: self.r]

    @classmethod
    def from_arrays(cls, x, y, delta) -> "IncompleteDataset":
        """Build from arbitrary unit order, moving respondents to the front.

        The permutation is stable, so unit order within each group is kept.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(y, dtype=float)
        delta = np.asarray(delta).astype(np.int8)
        if not (len(x) == len(y) == len(delta)):
            raise ValueError("x, y and delta must have the same number of units")
        if np.any((delta != 0) & (delta != 1)):
            raise ValueError("delta must be 0/1")
        order = np.argsort(1 - delta, kind="stable")
        r = int(delta.sum())
        x = x[order]
        y = y[order]
        y[r:] = np.nan
        d = delta[order]
        for arr in (x, y, d):
            arr.setflags(write=False)
        return cls(x=x, y=y, delta=d, r=r)


def generate_sample(model: PopulationModel, n: int, stream: RngStream):
    """Draw ``n`` units from ``model``; returns the design matrix and ``y``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    xs = model.covariate.draw(stream.child(0), n)
    e = stream.child(1).normal(0.0, model.error_variance, n)
    X = model.design(xs)
    y = X @ np.asarray(model.beta) + e
    return X, y


def apply_missingness(data, mechanism: MissingnessMechanism,
                      stream: RngStream) -> IncompleteDataset:
    """Draw response indicators for a complete sample ``data = (X, y)``.

    The covariate is the last design column (the intercept, if any, is first).
    """
    X, y = data
    probs = mechanism.response_prob(np.asarray(X)[:, -1])
    delta = stream.bernoulli(probs)
    return IncompleteDataset.from_arrays(X, y, delta)


def expected_response_rate(model: PopulationModel, mechanism: MissingnessMechanism) -> float:
    """E[pr(delta=1 | X)] by quadrature over the covariate distribution."""
    if mechanism.kind == "mcar":
        return mechanism.response_rate
    return _integrate_over_covariate(model.covariate, lambda x: mechanism.response_prob(x))


def _integrate_over_covariate(cov: CovariateDist, fn) -> float:
    lo, hi = cov.support()
    val, _ = integrate.quad(
        lambda t: float(fn(t) * cov.pdf(t)), lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400
    )
    return val


def true_eta(model: PopulationModel, estimand: Estimand) -> float:
    """Superpopulation value of E{g(Y)}.

    Exact for the mean and for threshold proportions under a normal
    covariate (Y is then normal); otherwise integrates
    ``Phi((q - x'beta)/sigma)`` against the covariate density.
    """
    cov = model.covariate
    if estimand.kind == "mean":
        return float(model.mean_function(cov.expectation))
    q = estimand.threshold
    sigma = math.sqrt(model.error_variance)
    if cov.kind == "normal":
        slope = model.beta[-1]
        mu = float(model.mean_function(cov.mean))
        sd = math.sqrt(slope**2 * cov.variance + model.error_variance)
        return float(special.ndtr((q - mu) / sd))
    return _integrate_over_covariate(
        cov, lambda x: special.ndtr((q - model.mean_function(x)) / sigma)
    )
