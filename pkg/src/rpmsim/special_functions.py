"""Special functions and primitive variate generators.

Everything here is either deterministic or a pure function of its
parameters and the random stream it is handed.  Quantiles are found by
bisection in log-space on accurate CDF / survival evaluations, which keeps
them usable at the very small gamma shapes (``theta / n``) that the
quantile-series constructions need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .rng import as_generator

_TINY = np.finfo(float).tiny
_BISECT_ITERS = 110


def _check_finite(name, value):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{name} must be finite")


# ---------------------------------------------------------------------------
# Incomplete gamma and xi
# ---------------------------------------------------------------------------

def _scaled_expn(n, x):
    """Return exp(x) * E_n(x) for integer n >= 1 and x > 0."""
    if x <= 1.0:
        return float(special.expn(n, x) * math.exp(x))
    # Modified Lentz evaluation of the continued fraction for E_n.
    b = x + n
    c = 1.0 / 1e-300
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise NumericalError(f"continued fraction for E_{n}({x}) did not converge")


def scaled_upper_incomplete_gamma(a, x):
    """Return exp(x) * Gamma(a, x).

    The scaling keeps the value representable for large ``x``.  Supported
    shapes are non-positive integers (through the exponential integral
    identity Gamma(1 - n, x) = x**(1 - n) E_n(x)) and positive reals.
    """
    _check_finite("a", a)
    _check_finite("x", x)
    if x <= 0:
        raise DomainError(f"x must be positive, got {x}")
    if a > 0:
        q = special.gammaincc(a, x)
        if q == 0.0:
            raise NumericalError(f"Gamma({a}, {x}) underflows")
        return math.exp(special.gammaln(a) + math.log(q) + x)
    if float(a).is_integer():
        n = int(1 - a)
        return x ** (1 - n) * _scaled_expn(n, x)
    raise DomainError(f"negative non-integer shape {a} is not supported")


def upper_incomplete_gamma(a, x):
    """Upper incomplete gamma function Gamma(a, x) = int_x^inf t^(a-1) e^(-t) dt.

    ``a`` may be any positive real or a non-positive integer (``a = -2`` is
    the case used by :func:`xi`).
    """
    value = scaled_upper_incomplete_gamma(a, x) * math.exp(-x)
    if value == 0.0:
        raise NumericalError(f"Gamma({a}, {x}) underflows double precision")
    return value


def xi(theta):
    """Variance divisor of the normalized inverse-Gaussian process.

    Equal to 1 / (theta**2 * exp(theta) * Gamma(-2, theta)); grows like
    ``theta`` for large ``theta``.
    """
    _check_finite("theta", theta)
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    # theta**2 * Gamma(-2, theta) == E_3(theta)
    return 1.0 / _scaled_expn(3, float(theta))


# ---------------------------------------------------------------------------
# Vectorised bisection in log-space
# ---------------------------------------------------------------------------

def _bisect_increasing(g, lo, hi, dg=None, start=None):
    """Root of a nondecreasing vectorised ``g`` bracketed by ``lo`` < ``hi``.

    With a derivative ``dg`` the iteration is Newton, safeguarded by the
    bracket: any step that leaves it, or fails to be finite, is replaced by
    bisection.  Without ``dg`` it is plain bisection.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    t = 0.5 * (lo + hi) if start is None else np.clip(np.asarray(start, dtype=float), lo, hi)
    for _ in range(_BISECT_ITERS):
        gt = g(t)
        up = gt > 0
        hi = np.where(up, t, hi)
        lo = np.where(up, lo, t)
        mid = 0.5 * (lo + hi)
        tol = 4e-16 * np.maximum(1.0, np.abs(t))
        if dg is None:
            nxt = mid
            converged = np.abs(nxt - t) <= tol
        else:
            with np.errstate(all="ignore"):
                nxt = t - gt / dg(t)
            # a Newton step below the tolerance means t is already the root
            converged = np.abs(nxt - t) <= tol
            bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi)
            nxt = np.where(bad, mid, nxt)
        done = converged | (hi - lo <= tol) | (gt == 0)
        t = np.where(done, t, nxt)
        if np.all(done):
            break
    return t


def _expand_bracket(g, lo, hi):
    """Widen ``[lo, hi]`` until g(lo) <= 0 <= g(hi) elementwise."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    step = np.ones_like(lo)
    for _ in range(64):
        bad = g(lo) > 0
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, 2 * step, step)
    else:
        raise NumericalError("could not bracket quantile from below")
    step = np.ones_like(hi)
    for _ in range(64):
        bad = g(hi) < 0
        if not bad.any():
            break
        hi = np.where(bad, hi + step, hi)
        step = np.where(bad, 2 * step, step)
    else:
        raise NumericalError("could not bracket quantile from above")
    return lo, hi


def _split_probs(lower, upper):
    """Broadcast complementary probabilities, filling whichever is missing."""
    if lower is None and upper is None:
        raise TypeError("need a lower or an upper probability")
    if lower is None:
        upper = np.asarray(upper, dtype=float)
        lower = 1.0 - upper
    elif upper is None:
        lower = np.asarray(lower, dtype=float)
        upper = 1.0 - lower
    lower, upper = np.broadcast_arrays(np.asarray(lower, float), np.asarray(upper, float))
    if np.any(~(lower > 0)) or np.any(~(upper > 0)):
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    return lower, upper


def _log1mexp(v):
    """log(1 - exp(v)) for v <= 0."""
    return np.where(v > -math.log(2), np.log(-np.expm1(v)), np.log1p(-np.exp(v)))


# ---------------------------------------------------------------------------
# Gamma(shape, 1)
# ---------------------------------------------------------------------------

def _log_gamma_cdf(a, t):
    """log P(a, exp(t)); ``t`` is log x so that x may underflow."""
    t = np.asarray(t, dtype=float)
    x = np.exp(t)
    with np.errstate(divide="ignore"):
        p = special.gammainc(a, x)
        out = np.log(p)
    small = p < 1e-280
    if np.any(small):
        xs, ts = x[small], t[small]
        # P(a, x) = x^a e^-x / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        for k in range(1, 500):
            term = term * xs / (a + k)
            total = total + term
            if np.all(term < 1e-17 * total):
                break
        out[small] = a * ts - xs - special.gammaln(a + 1) + np.log(total)
    return out


def _log_gamma_sf(a, t):
    """log Q(a, exp(t))."""
    t = np.asarray(t, dtype=float)
    x = np.exp(t)
    with np.errstate(divide="ignore"):
        q = special.gammaincc(a, x)
        out = np.log(q)
    # Below the median x may underflow; go through P instead.
    low = q > 0.5
    if np.any(low):
        out[low] = _log1mexp(_log_gamma_cdf(a, t[low]))
    small = q < 1e-280
    if np.any(small):
        xs = x[small]
        # Lentz continued fraction for Gamma(a, x); valid for x > a + 1.
        b = xs + 1.0 - a
        c = np.full_like(xs, 1e300)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, 1000):
            an = -i * (i - a)
            b = b + 2.0
            d = 1.0 / (an * d + b)
            c = b + an / c
            delta = c * d
            h = h * delta
            if np.all(np.abs(delta - 1.0) < 1e-16):
                break
        out[small] = a * np.log(xs) - xs - special.gammaln(a) + np.log(h)
    return out


def gamma_cdf(shape, x):
    """Regularized lower incomplete gamma P(shape, x)."""
    if shape <= 0:
        raise DomainError(f"shape must be positive, got {shape}")
    return special.gammainc(shape, np.maximum(x, 0.0))


def gamma_log_quantile(shape, lower=None, upper=None):
    """Log of the Gamma(shape, 1) quantile.

    Give either the lower-tail probability ``lower`` or the upper-tail
    probability ``upper`` (or both, when both are known more accurately
    than ``1 - other``).  Working on the log scale lets the quantile go far
    below the smallest representable double, which happens routinely for
    shapes around 1e-2 and below.
    """
    _check_finite("shape", shape)
    if shape <= 0:
        raise DomainError(f"shape must be positive, got {shape}")
    lower, upper = _split_probs(lower, upper)
    a = float(shape)
    use_lower = lower <= 0.5
    log_lo_p = np.log(lower)
    log_up_p = np.log(upper)

    def g(t):
        x = np.exp(t)
        res = np.empty_like(t)
        if use_lower.any():
            res[use_lower] = _log_gamma_cdf(a, t[use_lower]) - log_lo_p[use_lower]
        if (~use_lower).any():
            res[~use_lower] = log_up_p[~use_lower] - _log_gamma_sf(a, t[~use_lower])
        return res

    lga = special.gammaln(a)

    def dg(t):
        # d/dt of log P (or -log Q) is x f(x) / P (or / Q)
        x = np.exp(t)
        log_xf = a * t - x - lga
        res = np.empty_like(t)
        if use_lower.any():
            res[use_lower] = np.exp(log_xf[use_lower] - _log_gamma_cdf(a, t[use_lower]))
        if (~use_lower).any():
            res[~use_lower] = np.exp(log_xf[~use_lower] - _log_gamma_sf(a, t[~use_lower]))
        return res

    lg = special.gammaln(a + 1)
    # P(a, x) <= x^a / Gamma(a + 1) gives a valid lower bracket.
    base = np.where(use_lower, log_lo_p, math.log(0.5))
    t_lo = (base + lg) / a - 1.0
    # The median is below a + 1; Chernoff bounds the upper tail.
    t_hi = np.where(use_lower, math.log(a + 1.0),
                    np.log(2.0 * (a * math.log(2.0) - log_up_p) + a + 1.0))
    t_lo, t_hi = np.broadcast_arrays(t_lo, t_hi)
    start = np.where(use_lower, t_lo + 1.0, math.log(a + 1.0) - np.minimum(log_up_p, 0.0) / 2)
    return _bisect_increasing(g, t_lo.astype(float), t_hi.astype(float), dg, start)


def gamma_quantile(shape, p):
    """Quantile of the Gamma(shape, 1) distribution at lower-tail probability ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("p must lie strictly inside (0, 1)")
    t = gamma_log_quantile(shape, lower=p)
    x = np.exp(t)
    if np.any(x == 0.0):
        raise NumericalError(
            f"Gamma({shape}) quantile underflows double precision; use gamma_log_quantile")
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Inverse Gaussian IG(delta, gamma)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IGParams:
    """Inverse-Gaussian law with density

        delta / sqrt(2 pi) * x**(-3/2) * exp(-(delta**2 / x + gamma_rate**2 * x) / 2 + delta * gamma_rate)

    Mean ``delta / gamma_rate``; in mean/shape terms mu = delta / gamma_rate
    and lambda = delta**2.  Convolution closes in ``delta``.
    """

    delta: float
    gamma_rate: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.delta) and np.isfinite(self.gamma_rate)):
            raise DomainError("IG parameters must be finite")
        if self.delta <= 0 or self.gamma_rate <= 0:
            raise DomainError(
                f"IG parameters must be positive, got delta={self.delta}, gamma={self.gamma_rate}")

    @property
    def mean(self):
        return self.delta / self.gamma_rate

    @property
    def shape(self):
        return self.delta ** 2


def ig_pdf(params: IGParams, x):
    x = np.asarray(x, dtype=float)
    d, g = params.delta, params.gamma_rate
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = (math.log(d) - 0.5 * math.log(2 * math.pi) - 1.5 * np.log(x)
                - 0.5 * (d * d / x + g * g * x) + d * g)
        return np.where(x > 0, np.exp(logf), 0.0)


def _ig_z(params, x):
    d, g = params.delta, params.gamma_rate
    sx = np.sqrt(x)
    return (g * x - d) / sx, (g * x + d) / sx


def ig_log_cdf(params: IGParams, x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z1, z2 = _ig_z(params, x)
        out = np.logaddexp(special.log_ndtr(z1),
                           2 * params.delta * params.gamma_rate + special.log_ndtr(-z2))
    return np.where(x > 0, out, -np.inf)


def ig_log_sf(params: IGParams, x):
    x = np.asarray(x, dtype=float)
    out = np.empty(np.shape(x))
    z1, z2 = _ig_z(params, np.maximum(x, _TINY))
    right = z1 > 0
    if np.any(~right):
        out[~right] = _log1mexp(np.minimum(ig_log_cdf(params, x[~right]), 0.0))
    if np.any(right):
        # sf = 0.5 exp(-z1^2/2) [erfcx(z1/sqrt2) - erfcx(z2/sqrt2)]; the
        # exp(2 delta gamma) factor cancels exactly against z2^2 - z1^2.
        u1 = z1[right] / math.sqrt(2)
        u2 = z2[right] / math.sqrt(2)
        diff = special.erfcx(u1) - special.erfcx(u2)
        if np.any(diff <= 0):
            raise NumericalError("IG survival function lost all precision")
        out[right] = -u1 * u1 + np.log(0.5 * diff)
    return out


def ig_cdf(params: IGParams, x):
    return np.exp(ig_log_cdf(params, x))


def ig_sf(params: IGParams, x):
    return np.exp(ig_log_sf(params, x))


def ig_log_quantile(params: IGParams, lower=None, upper=None):
    """Log of the IG quantile given a lower- and/or upper-tail probability."""
    lower, upper = _split_probs(lower, upper)
    shape = lower.shape
    lower, upper = lower.ravel(), upper.ravel()
    use_lower = lower <= 0.5
    log_lo_p = np.log(lower)
    log_up_p = np.log(upper)

    def g(t):
        x = np.exp(t)
        res = np.empty_like(t)
        if use_lower.any():
            res[use_lower] = ig_log_cdf(params, x[use_lower]) - log_lo_p[use_lower]
        if (~use_lower).any():
            res[~use_lower] = log_up_p[~use_lower] - ig_log_sf(params, x[~use_lower])
        return res

    def dg(t):
        x = np.exp(t)
        log_xf = np.log(np.maximum(ig_pdf(params, x), _TINY)) + t
        res = np.empty_like(t)
        if use_lower.any():
            res[use_lower] = np.exp(log_xf[use_lower] - ig_log_cdf(params, x[use_lower]))
        if (~use_lower).any():
            res[~use_lower] = np.exp(log_xf[~use_lower] - ig_log_sf(params, x[~use_lower]))
        return res

    start = math.log(params.mean)
    lo, hi = _expand_bracket(g, np.full(lower.shape, start - 1.0), np.full(lower.shape, start + 1.0))
    t = _bisect_increasing(g, lo, hi, dg)
    return t.reshape(shape)


def ig_quantile(params: IGParams, p):
    """Quantile of IG(delta, gamma) at lower-tail probability ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError("p must lie strictly inside (0, 1)")
    x = np.exp(ig_log_quantile(params, lower=p))
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Random variates
# ---------------------------------------------------------------------------

def ig_sample(params: IGParams, rng, size=None):
    """Inverse-Gaussian variates by the Michael-Schucany-Haas transformation.

    A chi-square(1) variate is mapped to the smaller root of the IG
    quadratic, which is kept with probability mu / (mu + root) and otherwise
    replaced by mu**2 / root.  The root is computed in the ratio form so
    that very large ``delta`` does not overflow.
    """
    gen = as_generator(rng)
    mu = params.mean
    y = gen.standard_normal(size) ** 2
    u = gen.random(size)
    r = y / (params.delta * params.gamma_rate)  # mu * y / lambda
    big_ratio = 1.0 + 0.5 * r + np.sqrt(r + 0.25 * r * r)  # larger root / mu
    small_root = mu / big_ratio
    # keep the small root with probability mu / (mu + small_root)
    out = np.where(u * (1.0 + 1.0 / big_ratio) <= 1.0, small_root, mu * big_ratio)
    return out if size is not None else float(out)


def half_stable_sample(rng, size=None):
    """Positive 1/2-stable (Levy) variates 1 / W**2, W standard normal.

    Density (2 pi)**(-1/2) x**(-3/2) exp(-1 / (2 x)).
    """
    gen = as_generator(rng)
    w = gen.standard_normal(size)
    out = 1.0 / (w * w)
    return out if size is not None else float(out)


def beta_sample(a, b, rng, size=None):
    """Beta(a, b) variates, kept inside the open unit interval.

    ``a`` and ``b`` may be arrays (broadcast against ``size``).
    """
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0)):
        raise DomainError(f"beta parameters must be positive, got a={a}, b={b}")
    gen = as_generator(rng)
    out = np.clip(gen.beta(a, b, size), _TINY, 1.0 - 2.0 ** -53)
    return out if size is not None else float(out)


def beta_cdf(a, b, x):
    """Regularized incomplete beta I_x(a, b), clamped outside [0, 1]."""
    if not (a > 0 and b > 0):
        raise DomainError(f"beta parameters must be positive, got a={a}, b={b}")
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    out = special.betainc(a, b, x)
    return float(out) if out.ndim == 0 else out


def gamma_arrivals(count, rng):
    """Arrival times Gamma_1 < ... < Gamma_count of a unit-rate Poisson process."""
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    gen = as_generator(rng)
    return np.cumsum(gen.standard_exponential(count))
