"""Moment formulas, ordering probabilities and Monte Carlo error reports."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .random_measures import (
    BaseMeasure,
    PdpParams,
    TruncationRule,
    dp_new,
    evaluate_cdf,
    nigp_new,
    nigp_stick,
    pdp_new,
    pdp_stick,
    stable_new,
)
from .rng import RngStream, as_generator
from .special_functions import xi


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")


# ---------------------------------------------------------------------------
# Moments and Chebyshev bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentPair:
    mean: float
    variance: float


def pdp_moments(params: PdpParams, hA) -> MomentPair:
    """Mean and variance of P(A) under PDP(H; alpha, theta) with H(A) = hA."""
    _check_prob("hA", hA)
    return MomentPair(hA, hA * (1.0 - hA) * (1.0 - params.alpha) / (1.0 + params.theta))


def nigp_moments(theta, hA) -> MomentPair:
    """Mean and variance of P(A) under the normalized inverse-Gaussian process."""
    _check_prob("hA", hA)
    return MomentPair(hA, hA * (1.0 - hA) / xi(theta))


def _chebyshev(variance, eps):
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return min(1.0, variance / (eps * eps))


def chebyshev_bound_pdp(params: PdpParams, hA, eps):
    """Upper bound on Pr{|P(A) - H(A)| > eps}, capped at 1."""
    return _chebyshev(pdp_moments(params, hA).variance, eps)


def chebyshev_bound_nigp(theta, hA, eps):
    return _chebyshev(nigp_moments(theta, hA).variance, eps)


# ---------------------------------------------------------------------------
# Ordering probability of consecutive stick-breaking weights
# ---------------------------------------------------------------------------

def _lemma1_panels(i, alpha, theta, panels, order):
    a = 1.0 - alpha
    c = theta + i * alpha
    c2 = theta + (i + 1) * alpha
    # Event {b_{i+1} (1 - b_i) < b_i}: for b_i >= 1/2 it always holds, otherwise
    # it has probability I_{b/(1-b)}(a, c2).  Substituting u = b**a removes the
    # b**(a-1) endpoint singularity of the Beta(a, c) density.
    u_max = 0.5 ** a
    nodes, wts = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, u_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * wts[None, :]).ravel()
    b = u ** (1.0 / a)
    inner = special.betainc(a, c2, b / (1.0 - b))
    integrand = np.exp((c - 1.0) * np.log1p(-b) - special.betaln(a, c) - math.log(a)) * inner
    upper_half = special.betainc(c, a, 0.5)  # Pr{b_i >= 1/2}
    return float(np.dot(w, integrand) + upper_half)


def lemma1_prob(i, alpha, theta, tol=1e-9, panels=16, order=20, max_panels=1 << 14):
    """Pr{p'_{i+1} < p'_i} for PDP stick-breaking weights, by quadrature.

    The probability is written as E[I_{min(b/(1-b), 1)}(1 - alpha, theta + (i+1) alpha)]
    with b ~ Beta(1 - alpha, theta + i alpha) and integrated with composite
    Gauss-Legendre rules; the panel count is doubled until two successive
    rules agree to ``tol``.
    """
    if int(i) != i or i < 1:
        raise DomainError(f"i must be a positive integer, got {i}")
    PdpParams(alpha, theta)
    prev = _lemma1_panels(i, alpha, theta, panels, order)
    while panels < max_panels:
        panels *= 2
        cur = _lemma1_panels(i, alpha, theta, panels, order)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise NumericalError(
        f"quadrature for i={i}, alpha={alpha}, theta={theta} stalled at "
        f"change {abs(cur - prev):.3g} > {tol:g}")


def lemma1_prob_mc(i, alpha, theta, reps, rng, chunk=1 << 18):
    """Monte Carlo estimate of the same ordering probability.

    Draws the two consecutive Beta fractions directly and counts the event
    b_{i+1} (1 - b_i) < b_i.
    """
    if reps < 1:
        raise DomainError("reps must be positive")
    PdpParams(alpha, theta)
    gen = as_generator(rng)
    a = 1.0 - alpha
    hits = 0
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        b1 = gen.beta(a, theta + i * alpha, size)
        b2 = gen.beta(a, theta + (i + 1) * alpha, size)
        hits += int(np.count_nonzero(b2 * (1.0 - b1) < b1))
        done += size
    return hits / reps


def mc_standard_error(prob, reps):
    return math.sqrt(max(prob * (1.0 - prob), 0.0) / reps)


# ---------------------------------------------------------------------------
# Process handles
# ---------------------------------------------------------------------------

PROCESSES = ("dp-new", "stable-new", "pdp-new", "pdp-stick", "nigp-new", "nigp-stick")


@dataclass(frozen=True)
class ProcessSpec:
    """A constructor plus its configuration, usable across processes.

    ``n`` is the truncation level (for ``pdp-new`` the Dirichlet part, with
    ``m`` stable weights per copy).  ``eps`` switches ``pdp-stick`` to the
    epsilon stopping rule.
    """

    kind: str
    n: int = 100
    m: int = 500
    alpha: float = 0.0
    theta: float = 1.0
    eps: float | None = None
    cap: int = 10 ** 6

    def __post_init__(self):
        if self.kind not in PROCESSES:
            raise DomainError(f"unknown process {self.kind!r}; choose from {', '.join(PROCESSES)}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if self.kind == "pdp-new" and (int(self.m) != self.m or self.m < 1):
            raise DomainError(f"m must be a positive integer, got {self.m}")
        if self.kind in ("dp-new", "nigp-new", "nigp-stick") and not self.theta > 0:
            raise DomainError(f"theta must be positive for {self.kind}, got {self.theta}")
        if self.kind == "stable-new" and not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1) for stable-new, got {self.alpha}")
        if self.kind == "pdp-stick":
            PdpParams(self.alpha, self.theta)
            if self.eps is not None:
                TruncationRule.epsilon(self.eps, self.cap)
        if self.kind == "pdp-new":
            PdpParams(self.alpha, self.theta)
            if not (self.alpha > 0 and self.theta > 0):
                raise DomainError(
                    "pdp-new needs alpha in (0, 1) and theta > 0; "
                    "use dp-new for alpha = 0 and stable-new for theta = 0")

    def sample(self, H: BaseMeasure, rng):
        if self.kind == "dp-new":
            return dp_new(self.n, self.theta, H, rng)
        if self.kind == "stable-new":
            return stable_new(self.n, self.alpha, H, rng)
        if self.kind == "pdp-new":
            return pdp_new(self.n, self.m, PdpParams(self.alpha, self.theta), H, rng)
        if self.kind == "pdp-stick":
            rule = (TruncationRule.fixed(self.n) if self.eps is None
                    else TruncationRule.epsilon(self.eps, self.cap))
            return pdp_stick(rule, PdpParams(self.alpha, self.theta), H, rng)
        if self.kind == "nigp-new":
            return nigp_new(self.n, self.theta, H, rng)
        return nigp_stick(self.n, self.theta, H, rng)

    def moments(self, hA) -> MomentPair:
        """Exact (untruncated) moments of P(A) for the target process."""
        if self.kind in ("nigp-new", "nigp-stick"):
            return nigp_moments(self.theta, hA)
        alpha = 0.0 if self.kind == "dp-new" else self.alpha
        theta = 0.0 if self.kind == "stable-new" else self.theta
        return pdp_moments(PdpParams(alpha, theta), hA)

    def __call__(self, rng, H: BaseMeasure = BaseMeasure.uniform()):
        return self.sample(H, rng)


# ---------------------------------------------------------------------------
# Path simulation
# ---------------------------------------------------------------------------

def _path_chunk(process, H, grid, seed, stream_ids):
    rows = np.empty((len(stream_ids), len(grid)))
    degenerate = np.zeros(len(stream_ids), dtype=bool)
    for k, sid in enumerate(stream_ids):
        measure = process.sample(H, RngStream(seed, sid))
        rows[k] = evaluate_cdf(measure, grid)
        degenerate[k] = measure.degenerate
    return rows, degenerate


def simulate_paths(process: ProcessSpec, H: BaseMeasure, grid, paths, rng: RngStream, workers=1):
    """CDF values of ``paths`` independent realizations on ``grid``.

    Path j uses stream ``rng.stream_id + j``.  Work is split into contiguous
    blocks and reassembled by index, so the result does not depend on
    ``workers``.  Returns ``(cdf_matrix, degenerate_flags)``.
    """
    if paths < 1:
        raise DomainError("paths must be positive")
    grid = np.asarray(grid, dtype=float)
    ids = [rng.stream_id + j for j in range(paths)]
    if rng.subkey:
        raise DomainError("simulate_paths expects a top-level stream")
    if workers <= 1 or paths == 1:
        return _path_chunk(process, H, grid, rng.seed, ids)
    blocks = np.array_split(np.array(ids), min(workers * 4, paths))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_path_chunk, *zip(*[(process, H, grid, rng.seed, list(b)) for b in blocks])))
    return np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def empirical_order_probs(process, indices, reps, rng: RngStream):
    """Fraction of realizations with weight_{i+1} < weight_i, for each i.

    ``process`` is any callable mapping a stream to a realization (a
    :class:`ProcessSpec` works).  ``indices`` are 1-based positions in
    generation order; all indices are
    evaluated on the same ``reps`` realizations (rep k uses stream
    ``rng.stream_id + k``).
    """
    indices = [int(i) for i in indices]
    if any(i < 1 for i in indices):
        raise DomainError("indices are 1-based and must be positive")
    if reps < 1:
        raise DomainError("reps must be positive")
    counts = np.zeros(len(indices))
    for k in range(reps):
        w = process(rng.offset(k)).weights
        if max(indices) + 1 > len(w):
            raise DomainError(f"index {max(indices)} + 1 exceeds truncation length {len(w)}")
        for j, i in enumerate(indices):
            counts[j] += w[i] < w[i - 1]
    return counts / reps


def empirical_order_prob(process, i, reps, rng: RngStream):
    return float(empirical_order_probs(process, [i], reps, rng)[0])


# ---------------------------------------------------------------------------
# Error reports
# ---------------------------------------------------------------------------

@dataclass
class ErrorReport:
    grid: list
    empirical_mean: list
    empirical_sd: list
    true_mean: list
    true_sd: list
    max_mean_error: float
    max_sd_error: float
    paths: int
    degenerate_paths: int
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def error_report(process: ProcessSpec, paths, grid, H: BaseMeasure, rng: RngStream,
                 workers=1, include_degenerate=False) -> ErrorReport:
    """Compare empirical mean / SD of the random CDF against the exact process.

    Degenerate realizations are counted and, unless ``include_degenerate``,
    left out of the aggregates.  When fewer than two realizations remain the
    statistics are NaN; the report is still returned so the degeneracy count
    reaches the caller.
    """
    if paths < 2:
        raise DomainError("an error report needs at least 2 paths")
    grid = np.asarray(grid, dtype=float)
    cdfs, degenerate = simulate_paths(process, H, grid, paths, rng, workers)
    good = cdfs if include_degenerate else cdfs[~degenerate]
    h = H.cdf(grid)
    true_mean = h
    true_sd = np.sqrt([process.moments(float(v)).variance for v in h])
    if len(good) >= 2:
        emp_mean = good.mean(axis=0)
        emp_sd = good.std(axis=0, ddof=1)
        max_mean = float(np.max(np.abs(emp_mean - true_mean)))
        max_sd = float(np.max(np.abs(emp_sd - true_sd)))
    else:
        emp_mean = emp_sd = np.full(len(grid), np.nan)
        max_mean = max_sd = math.nan
    return ErrorReport(
        grid=grid.tolist(),
        empirical_mean=emp_mean.tolist(),
        empirical_sd=emp_sd.tolist(),
        true_mean=true_mean.tolist(),
        true_sd=true_sd.tolist(),
        max_mean_error=max_mean,
        max_sd_error=max_sd,
        paths=int(len(good)),
        degenerate_paths=int(degenerate.sum()),
        config={**asdict(process), "base": str(H), "seed": rng.seed, "stream_id": rng.stream_id},
    )
