"""Splittable random streams and the small distribution kit used everywhere.

A stream is identified by ``(root_seed, path)``.  The generator behind it is
seeded from a :class:`numpy.random.SeedSequence` whose ``spawn_key`` is the
path, so any sub-stream can be rebuilt from its coordinates alone, in any
order and on any worker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "RngStream",
    "derive_stream",
    "sample",
    "normal_quantile",
    "t_quantile",
    "t_cdf",
]

_SEED_MASK = (1 << 64) - 1


@dataclass
class RngStream:
    """Deterministic random stream addressed by a root seed and an index path.

    Streams are cheap values: copy or rebuild them freely, but do not share
    one instance between threads, since drawing advances its state.
    """

    root_seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.root_seed = int(self.root_seed) & _SEED_MASK
        self.path = tuple(int(i) for i in self.path)
        if any(i < 0 for i in self.path):
            raise ValueError("stream path entries must be non-negative")

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            seq = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.Philox(seq))
        return self._gen

    def child(self, index: int) -> "RngStream":
        return derive_stream(self, index)

    def descend(self, *indices: int) -> "RngStream":
        """Shorthand for repeated :meth:`child` calls."""
        return RngStream(self.root_seed, self.path + tuple(indices))

    # vectorised draws; ``size=None`` returns a Python float

    def normal(self, mean=0.0, variance=1.0, size=None):
        if np.any(np.asarray(variance) < 0):
            raise ValueError("normal variance must be non-negative")
        z = self.generator.standard_normal(size)
        return mean + np.sqrt(variance) * z

    def exponential(self, rate=1.0, size=None):
        if np.any(np.asarray(rate) <= 0):
            raise ValueError("exponential rate must be positive")
        return self.generator.standard_exponential(size) / rate

    def bernoulli(self, p, size=None):
        p_arr = np.asarray(p, dtype=float)
        if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
            raise ValueError("bernoulli probability must lie in [0, 1]")
        if size is None:
            size = p_arr.shape if p_arr.shape else None
        u = self.generator.random(size)
        out = (u < p_arr).astype(np.int8)
        return int(out) if np.ndim(out) == 0 else out

    def chi_square(self, df, size=None):
        if np.any(np.asarray(df) <= 0):
            raise ValueError("chi-square degrees of freedom must be positive")
        return self.generator.gamma(np.asarray(df) / 2.0, 2.0, size)


def derive_stream(root: RngStream, child_index: int) -> RngStream:
    """Return the sub-stream of ``root`` at ``child_index``.

    The child never shares state with its parent; deriving the same index
    twice gives two independent copies of the same sequence.
    """
    if child_index < 0:
        raise ValueError("child_index must be non-negative")
    return RngStream(root.root_seed, root.path + (int(child_index),))


_DISTRIBUTIONS = {
    "normal": lambda s, mean, variance: s.normal(mean, variance),
    "exponential": lambda s, rate: s.exponential(rate),
    "bernoulli": lambda s, p: s.bernoulli(p),
    "chi_square": lambda s, df: s.chi_square(df),
}


def sample(dist: str | Sequence, stream: RngStream, *params):
    """Draw a single value from a named distribution.

    ``dist`` is either a name followed by ``params`` or a tuple
    ``(name, *params)``, e.g. ``sample(("normal", 0.0, 1.0), s)``.
    """
    if not isinstance(dist, str):
        dist, *rest = dist
        params = tuple(rest) + params
    try:
        draw = _DISTRIBUTIONS[dist]
    except KeyError:
        raise ValueError(f"unknown distribution {dist!r}") from None
    return float(draw(stream, *params))


def normal_quantile(prob):
    prob = np.asarray(prob, dtype=float)
    if np.any((prob <= 0) | (prob >= 1)):
        raise ValueError("probability must lie strictly inside (0, 1)")
    out = special.ndtri(prob)
    return float(out) if out.ndim == 0 else out


def t_cdf(x: float, df: float) -> float:
    if math.isinf(df):
        return float(special.ndtr(x))
    return float(special.stdtr(df, x))


def _t_pdf(x: float, df: float) -> float:
    logc = special.gammaln((df + 1) / 2) - special.gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(logc - (df + 1) / 2 * math.log1p(x * x / df))


def t_quantile(df: float, prob: float, tol: float = 1e-10) -> float:
    """Quantile of Student's t with ``df`` degrees of freedom (``inf`` allowed).

    Starts from the inverse regularized incomplete beta function, then
    polishes with Newton steps on the CDF, falling back to bisection when a
    step leaves the bracket.
    """
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie strictly inside (0, 1)")
    if not df > 0:
        raise ValueError("df must be positive")
    if math.isinf(df):
        return float(special.ndtri(prob))
    if prob == 0.5:
        return 0.0

    tail = min(prob, 1.0 - prob)
    sign = -1.0 if prob < 0.5 else 1.0
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    xb = special.betaincinv(df / 2.0, 0.5, 2.0 * tail)
    if xb <= 0.0:
        x = math.inf
    else:
        x = math.sqrt(df * (1.0 / xb - 1.0))

    target = 1.0 - tail  # work on the upper half
    if not math.isfinite(x) or x <= 0.0:
        x = 1.0
    lo, hi = 0.0, max(2.0 * x, 1.0)
    while t_cdf(hi, df) < target:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        f = t_cdf(x, df) - target
        if abs(f) <= tol * 1e-2:
            break
        if f > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        dens = _t_pdf(x, df)
        step = f / dens if dens > 0 else math.inf
        nx = x - step
        if not (lo < nx < hi) or not math.isfinite(nx):
            nx = 0.5 * (lo + hi)
        if abs(nx - x) <= 1e-15 * max(1.0, abs(x)):
            x = nx
            break
        x = nx
    return sign * x
