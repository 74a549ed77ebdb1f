"""Finite approximations of discrete random probability measures.

Two families of constructors live here:

* quantile-series constructions whose weights are monotone by design
  (``dp_new``, ``stable_new``, ``pdp_new``, ``nigp_new``), and
* truncated stick-breaking (``pdp_stick``, ``nigp_stick``), whose weights
  come out in generation order and are only stochastically decreasing.

Every constructor draws its atoms first and then its weight randomness from
the same generator.  Two constructors fed the same stream therefore place
the same atom sequence, which makes method comparisons under a shared seed
use common random numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError, TruncationOverflowError
from .rng import as_generator
from .special_functions import (
    IGParams,
    beta_sample,
    gamma_log_quantile,
    half_stable_sample,
    ig_log_quantile,
    ig_sample,
)

# 1 - V below this is treated as V == 1 in the N-IGP stick-breaking.
DEGENERACY_GAP = 2.0 ** -52
DEGENERACY_DELTA = 1e300
DEFAULT_EPSILON_CAP = 10 ** 6


# ---------------------------------------------------------------------------
# Base measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseMeasure:
    """Centring distribution H on the real line.

    ``name`` is one of ``uniform`` (params ``a, b``), ``normal``
    (``mu, sigma``) or ``exponential`` (``rate``).
    """

    name: str = "uniform"
    params: tuple = (0.0, 1.0)

    def __post_init__(self):
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.name == "uniform":
            if len(p) != 2 or not p[0] < p[1]:
                raise DomainError(f"uniform base needs a < b, got {p}")
        elif self.name == "normal":
            if len(p) != 2 or not p[1] > 0:
                raise DomainError(f"normal base needs sigma > 0, got {p}")
        elif self.name == "exponential":
            if len(p) != 1 or not p[0] > 0:
                raise DomainError(f"exponential base needs rate > 0, got {p}")
        else:
            raise DomainError(f"unknown base measure {self.name!r}")

    @classmethod
    def uniform(cls, a=0.0, b=1.0):
        return cls("uniform", (a, b))

    @classmethod
    def normal(cls, mu=0.0, sigma=1.0):
        return cls("normal", (mu, sigma))

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", (rate,))

    @classmethod
    def parse(cls, text):
        """Parse ``name`` or ``name:p1,p2`` (e.g. ``uniform:0,1``)."""
        name, _, rest = text.partition(":")
        if not rest:
            return {"uniform": cls.uniform, "normal": cls.normal,
                    "exponential": cls.exponential}.get(name, lambda: cls(name, ()))()
        try:
            params = tuple(float(v) for v in rest.split(","))
        except ValueError:
            raise DomainError(f"bad base measure parameters in {text!r}") from None
        return cls(name, params)

    def __str__(self):
        return f"{self.name}:" + ",".join(repr(v) for v in self.params)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "uniform":
            a, b = self.params
            return np.clip((x - a) / (b - a), 0.0, 1.0)
        if self.name == "normal":
            mu, sigma = self.params
            return special.ndtr((x - mu) / sigma)
        (rate,) = self.params
        return np.where(x > 0, -np.expm1(-rate * np.maximum(x, 0.0)), 0.0)

    def sample(self, rng, size=None):
        gen = as_generator(rng)
        if self.name == "uniform":
            return gen.uniform(*self.params, size)
        if self.name == "normal":
            return gen.normal(*self.params, size)
        return gen.exponential(1.0 / self.params[0], size)


# ---------------------------------------------------------------------------
# Containers and rules
# ---------------------------------------------------------------------------

@dataclass
class DiscreteRandomMeasure:
    """A finite realization sum_i weights[i] * delta(atoms[i]).

    ``log_weights`` is kept when the constructor works on the log scale;
    weights smaller than the least positive double are zero in ``weights``
    but still ordered correctly in ``log_weights``.  ``degenerate_at`` is the
    0-based index of the first stick that collapsed numerically (N-IGP
    stick-breaking only), or ``None``.
    """

    atoms: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray | None = None
    degenerate_at: int | None = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.atoms.shape != self.weights.shape or self.atoms.ndim != 1:
            raise DomainError("atoms and weights must be 1-d arrays of equal length")

    def __len__(self):
        return len(self.weights)

    @property
    def degenerate(self):
        return self.degenerate_at is not None


@dataclass(frozen=True)
class PdpParams:
    """Discount ``alpha`` in [0, 1) and concentration ``theta`` > -alpha."""

    alpha: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and np.isfinite(self.theta)):
            raise DomainError("alpha and theta must be finite")
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.theta > -self.alpha:
            raise DomainError(f"theta must exceed -alpha = {-self.alpha}, got {self.theta}")


@dataclass(frozen=True)
class TruncationRule:
    """Fixed truncation level or epsilon stopping rule for stick-breaking."""

    kind: str
    n: int | None = None
    eps: float | None = None
    cap: int = DEFAULT_EPSILON_CAP

    def __post_init__(self):
        if self.kind == "fixed_n":
            if self.n is None or int(self.n) != self.n or self.n < 1:
                raise DomainError(f"fixed truncation needs a positive integer n, got {self.n}")
        elif self.kind == "epsilon":
            if self.eps is None or not 0.0 < self.eps < 1.0:
                raise DomainError(f"epsilon must lie in (0, 1), got {self.eps}")
            if self.cap < 1:
                raise DomainError("cap must be positive")
        else:
            raise DomainError(f"unknown truncation kind {self.kind!r}")

    @classmethod
    def fixed(cls, n):
        return cls("fixed_n", n=n)

    @classmethod
    def epsilon(cls, eps, cap=DEFAULT_EPSILON_CAP):
        return cls("epsilon", eps=eps, cap=cap)


@dataclass
class StickState:
    """Running stick-breaking state: fractions so far and the leftover stick."""

    fractions: list = field(default_factory=list)
    residual: float = 1.0


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _check_n(n, name="n"):
    if int(n) != n or n < 1:
        raise DomainError(f"{name} must be a positive integer, got {n}")
    return int(n)


def _normalize(weights):
    weights = np.asarray(weights, dtype=float)
    return weights / np.sum(weights)


def _from_log(log_w):
    """Normalize log-weights; returns (weights, normalized log-weights)."""
    log_w = np.asarray(log_w, dtype=float)
    log_w = log_w - special.logsumexp(log_w)
    w = np.exp(log_w)
    return w / np.sum(w), log_w


def _arrival_fractions(gen, n, arrivals=None):
    """Return (Gamma_i / Gamma_{n+1}, 1 - Gamma_i / Gamma_{n+1}) for i <= n.

    The complement is formed from the exponential increments directly so it
    keeps full relative precision when the ratio is close to 1.
    """
    if arrivals is None:
        e = gen.standard_exponential(n + 1)
        total = math.fsum(e)
        head = np.cumsum(e)[:n]
        tail = np.cumsum(e[::-1])[::-1][1:]
    else:
        arrivals = np.asarray(arrivals, dtype=float)
        if arrivals.shape != (n + 1,):
            raise DomainError(f"need {n + 1} arrival times, got {arrivals.shape}")
        if np.any(np.diff(arrivals) <= 0) or arrivals[0] <= 0:
            raise DomainError("arrival times must be positive and strictly increasing")
        total = arrivals[-1]
        head = arrivals[:n]
        tail = total - head
    return head / total, tail / total


# ---------------------------------------------------------------------------
# Quantile-series constructions
# ---------------------------------------------------------------------------

def _dp_log_weights(gen, n, theta, arrivals=None):
    upper, lower = _arrival_fractions(gen, n, arrivals)
    # G_n^{-1}(y) is the Gamma(theta / n) quantile at lower-tail 1 - y
    log_q = gamma_log_quantile(theta / n, lower=lower, upper=upper)
    if not np.all(np.isfinite(log_q)):
        raise NumericalError(f"gamma quantile failed for shape {theta / n}")
    return log_q


def dp_new(n, theta, H: BaseMeasure, rng, arrivals=None) -> DiscreteRandomMeasure:
    """Dirichlet process approximation with monotone weights.

    Weight i is proportional to the Gamma(theta / n, 1) quantile at
    1 - Gamma_i / Gamma_{n+1}.  ``arrivals`` (length n + 1) replaces the
    random arrival times, for testing.
    """
    n = _check_n(n)
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    gen = as_generator(rng)
    atoms = H.sample(gen, n)
    w, log_w = _from_log(_dp_log_weights(gen, n, theta, arrivals))
    return DiscreteRandomMeasure(atoms, w, log_w)


def _stable_log_weights(gen, n, alpha, arrivals=None, copies=None):
    if arrivals is None:
        size = n if copies is None else (copies, n)
        g = np.cumsum(gen.standard_exponential(size), axis=-1)
    else:
        g = np.asarray(arrivals, dtype=float)
        if g.shape[-1] < n:
            raise DomainError(f"need at least {n} arrival times")
        g = g[..., :n]
        if np.any(np.diff(g, axis=-1) <= 0) or np.any(g <= 0):
            raise DomainError("arrival times must be positive and strictly increasing")
    return -np.log(g) / alpha


def stable_new(n, alpha, H: BaseMeasure, rng, arrivals=None) -> DiscreteRandomMeasure:
    """Stable-law process approximation: weights proportional to Gamma_i**(-1/alpha)."""
    n = _check_n(n)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    gen = as_generator(rng)
    atoms = H.sample(gen, n)
    w, log_w = _from_log(_stable_log_weights(gen, n, alpha, arrivals))
    return DiscreteRandomMeasure(atoms, w, log_w)


def pdp_new(n, m, params: PdpParams, H: BaseMeasure, rng) -> DiscreteRandomMeasure:
    """Two-parameter Poisson-Dirichlet approximation by the product construction.

    One ``dp_new(n, theta)`` weight vector is multiplied against ``n``
    independent ``stable_new(m, alpha)`` weight vectors; the ``n * m``
    products are returned in descending order.
    """
    n = _check_n(n)
    m = _check_n(m, "m")
    if params.alpha == 0.0:
        raise DomainError("alpha = 0 is the Dirichlet process; use dp_new")
    if params.theta == 0.0:
        raise DomainError("theta = 0 is the stable-law process; use stable_new")
    if params.theta < 0:
        raise DomainError(f"the product construction needs theta > 0, got {params.theta}")
    gen = as_generator(rng)
    atoms = H.sample(gen, n * m)
    _, log_dp = _from_log(_dp_log_weights(gen, n, params.theta))
    log_st = _stable_log_weights(gen, m, params.alpha, copies=n)
    log_st = log_st - special.logsumexp(log_st, axis=1, keepdims=True)
    log_w = (log_dp[:, None] + log_st).ravel()
    log_w = -np.sort(-log_w)
    w, log_w = _from_log(log_w)
    return DiscreteRandomMeasure(atoms, w, log_w)


def nigp_new(n, theta, H: BaseMeasure, rng, arrivals=None) -> DiscreteRandomMeasure:
    """Normalized inverse-Gaussian process approximation with monotone weights.

    Weight i is proportional to the IG(theta / n, 1) quantile at
    1 - Gamma_i / Gamma_{n+1}.
    """
    n = _check_n(n)
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    gen = as_generator(rng)
    atoms = H.sample(gen, n)
    upper, lower = _arrival_fractions(gen, n, arrivals)
    log_q = ig_log_quantile(IGParams(theta / n, 1.0), lower=lower, upper=upper)
    if not np.all(np.isfinite(log_q)):
        raise NumericalError(f"inverse-Gaussian quantile failed for delta {theta / n}")
    w, log_w = _from_log(log_q)
    return DiscreteRandomMeasure(atoms, w, log_w)


# ---------------------------------------------------------------------------
# Stick-breaking constructions
# ---------------------------------------------------------------------------

def _stick_weights(fractions):
    """p_1 = b_1, p_i = b_i prod_{k<i} (1 - b_k)."""
    fractions = np.asarray(fractions, dtype=float)
    left = np.concatenate(([1.0], np.cumprod(1.0 - fractions[:-1])))
    return fractions * left


def pdp_stick(rule: TruncationRule, params: PdpParams, H: BaseMeasure, rng,
              fractions=None) -> DiscreteRandomMeasure:
    """Truncated stick-breaking for the two-parameter Poisson-Dirichlet process.

    beta_i ~ Beta(1 - alpha, theta + i * alpha).  Under ``fixed_n`` the last
    fraction is set to 1; under ``epsilon`` generation stops at the first
    piece smaller than ``eps`` and that piece absorbs the rest of the stick.
    Weights are returned in generation order.  ``fractions`` overrides the
    beta draws (fixed truncation only).
    """
    gen = as_generator(rng)
    a = 1.0 - params.alpha
    if rule.kind == "fixed_n":
        n = rule.n
        atoms = H.sample(gen, n)
        if fractions is None:
            b = params.theta + params.alpha * np.arange(1, n)
            fractions = beta_sample(a, b, gen, size=n - 1) if n > 1 else np.empty(0)
            fractions = np.append(fractions, 1.0)
        else:
            fractions = np.asarray(fractions, dtype=float)
            if fractions.shape != (n,):
                raise DomainError(f"need {n} stick fractions, got {fractions.shape}")
            fractions = fractions.copy()
            fractions[-1] = 1.0
        return DiscreteRandomMeasure(atoms, _normalize(_stick_weights(fractions)))

    chunks = []
    residual = 1.0
    start = 1
    chunk = 256
    while True:
        if start > rule.cap:
            raise TruncationOverflowError(
                f"epsilon rule did not stop within {rule.cap} terms", partial_length=start - 1)
        size = min(chunk, rule.cap - start + 1)
        b = params.theta + params.alpha * np.arange(start, start + size)
        frac = beta_sample(a, b, gen, size=size)
        left = residual * np.concatenate(([1.0], np.cumprod(1.0 - frac[:-1])))
        pieces = frac * left
        hit = np.flatnonzero(pieces < rule.eps)
        if hit.size:
            k = hit[0]
            frac = frac[:k + 1].copy()
            frac[-1] = 1.0
            chunks.append(frac * left[:k + 1])
            break
        chunks.append(pieces)
        residual = left[-1] * (1.0 - frac[-1])
        start += size
        chunk = min(chunk * 2, 1 << 16)
    weights = np.concatenate(chunks)
    atoms = H.sample(gen, len(weights))
    return DiscreteRandomMeasure(atoms, _normalize(weights))


def nigp_stick(n, theta, H: BaseMeasure, rng, fractions=None) -> DiscreteRandomMeasure:
    """Truncated stick-breaking for the normalized inverse-Gaussian process.

    V_i = X_i / (X_i + Z_i) with Z_i positive 1/2-stable and
    X_i ~ GIG(chi=theta**2 / R, psi=1, lambda=-1/2) = IG(theta / sqrt(R), 1),
    where R = prod_{j<i} (1 - V_j) is the unused stick.  X_i grows as the
    stick is used up, so for large theta the fractions collapse to 1 within
    a few steps.

    The last fraction is forced to 1.  When a fraction reaches 1 to double
    precision, or the IG parameter overflows, the stick is closed at that
    index and ``degenerate_at`` records it; the remaining weights are zero.
    ``fractions`` (length n) overrides the V draws.
    """
    n = _check_n(n)
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    gen = as_generator(rng)
    atoms = H.sample(gen, n)
    weights = np.zeros(n)
    if fractions is not None:
        fractions = np.asarray(fractions, dtype=float)
        if fractions.shape != (n,):
            raise DomainError(f"need {n} stick fractions, got {fractions.shape}")
        fr = fractions.copy()
        fr[-1] = 1.0
        return DiscreteRandomMeasure(atoms, _normalize(_stick_weights(fr)))

    stick = StickState()
    degenerate_at = None
    for i in range(n - 1):
        scale = theta / math.sqrt(stick.residual) if stick.residual > 0 else math.inf
        if not scale < DEGENERACY_DELTA:
            degenerate_at = i
            break
        x = ig_sample(IGParams(scale, 1.0), gen)
        z = half_stable_sample(gen)
        gap = z / (x + z)  # 1 - V_i, kept exact rather than formed by subtraction
        if not np.isfinite(gap) or gap < DEGENERACY_GAP:
            degenerate_at = i
            break
        weights[i] = stick.residual * (1.0 - gap)
        stick.fractions.append(1.0 - gap)
        stick.residual *= gap
    last = n - 1 if degenerate_at is None else degenerate_at
    weights[last] = stick.residual
    return DiscreteRandomMeasure(atoms, _normalize(weights), degenerate_at=degenerate_at)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate_cdf(measure: DiscreteRandomMeasure, grid):
    """Random CDF F(x) = sum of weights on atoms <= x, at each grid point."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    # atom <= grid[k] for every k >= idx
    idx = np.searchsorted(grid, measure.atoms, side="left")
    mass = np.bincount(idx, weights=measure.weights, minlength=grid.size + 1)
    return np.cumsum(mass[:grid.size])
