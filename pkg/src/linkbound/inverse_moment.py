"""Upper bounds and exact values for inverse moments E[(1+X)^(-theta)], X >= 0.

The discretized bound evaluates the CDF of X on a uniform grid of step
``delta`` and replaces (1+x)^(-theta) by its value at the left cell edge,
which overestimates because the integrand is decreasing. Truncating the
grid at any point keeps it an upper bound; extending the truncation or
shrinking the step only tightens it. The quadrature routine computes the
exact expectation and serves as the delta -> 0 reference.

Grid evaluation streams in fixed-size chunks so that fine steps never
materialize the whole grid. The truncation point is chosen in x-space,
independent of the step, so refining the step compares the same truncated
quantity and is guaranteed monotone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .channel import DB_TO_LN, ShadowingChannel

_CHUNK = 2_000_000
# Below this composite exponent, differences of (1+x)^(-theta) across one
# cell lose too many digits; switch to the expm1-based increment form.
_STABLE_FORM_THETA = 1e-3
# Expanding search for the truncation point starts here and may not pass
# the ceiling even for pathologically heavy cdfs.
_SEARCH_X0 = 1e-12
_SEARCH_CEIL = 1e12


class CdfContractError(ValueError):
    """The supplied CDF violated monotonicity or range on the evaluation grid."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested relative tolerance."""


@dataclass(frozen=True)
class DiscretizationConfig:
    """Controls for the discretized inverse-moment bound.

    Attributes:
        step_delta: grid step in linear-SNR units.
        tail_mass_tol: truncate the grid once the survival of X drops below
            this mass; the residual looseness versus an untruncated grid is
            at most tail_mass_tol times the integrand at the cut.
        slack_tol: additionally truncate once survival * (1+x)^(-theta)
            drops below this value, which bounds the residual directly and
            cuts far earlier for large exponents.
        max_terms: hard cap on the number of grid terms.
        refine_to_limit: when set, successively halve the step and return a
            step -> 0 estimate (Richardson-extrapolated), stopping once the
            estimate stabilizes to refine_rtol.
        refine_rtol: relative stabilization tolerance for refinement mode.
        max_refine_rounds: cap on the number of halvings.
    """

    step_delta: float = 1e-2
    tail_mass_tol: float = 2e-3
    slack_tol: float = 1e-12
    max_terms: int = 200_000_000
    refine_to_limit: bool = False
    refine_rtol: float = 2e-5
    max_refine_rounds: int = 24

    def __post_init__(self) -> None:
        if self.step_delta <= 0:
            raise ValueError("step_delta must be positive")
        if not 0 < self.tail_mass_tol < 1:
            raise ValueError("tail_mass_tol must lie in (0, 1)")
        if self.slack_tol <= 0:
            raise ValueError("slack_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.refine_rtol <= 0:
            raise ValueError("refine_rtol must be positive")
        if self.max_refine_rounds < 1:
            raise ValueError("max_refine_rounds must be at least 1")


@dataclass(frozen=True)
class PointMass:
    """Degenerate distribution concentrated at a single non-negative value."""

    value: float

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("point mass must sit at a non-negative value")


def _as_vectorized(cdf):
    """Return a callable mapping float arrays to float arrays."""
    probe = np.asarray([1.0])
    try:
        out = np.asarray(cdf(probe), dtype=float)
        if out.shape == probe.shape:
            return lambda x: np.asarray(cdf(x), dtype=float)
    except Exception:
        pass
    return np.vectorize(lambda x: float(cdf(x)), otypes=[float])


def _survival(cdfv, x: float) -> float:
    return 1.0 - float(cdfv(np.asarray([x]))[0])


def truncation_point(cdf, theta: float, config: DiscretizationConfig) -> float:
    """Smallest x at which the grid may stop under the configured tolerances.

    Stops where either the survival falls below tail_mass_tol or the
    residual-slack proxy survival * (1+x)^(-theta) falls below slack_tol.
    Located by doubling then bisection; deliberately independent of the
    step so that refinements truncate at the same point.
    """
    cdfv = _as_vectorized(cdf)

    def stopped(x: float) -> bool:
        surv = _survival(cdfv, x)
        if surv <= config.tail_mass_tol:
            return True
        return surv * math.exp(-theta * math.log1p(x)) <= config.slack_tol

    x = _SEARCH_X0
    if stopped(x):
        return x
    while x < _SEARCH_CEIL and not stopped(2.0 * x):
        x *= 2.0
    if x >= _SEARCH_CEIL:
        return _SEARCH_CEIL
    lo, hi = x, 2.0 * x
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if stopped(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _check_chunk(f: np.ndarray, prev_last: float) -> np.ndarray:
    lo, hi = f.min(), f.max()
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise CdfContractError("cdf values outside [0, 1] on the evaluation grid")
    if lo < 0.0 or hi > 1.0:
        f = np.clip(f, 0.0, 1.0)
    if f[0] < prev_last - 1e-12 or (f.size > 1 and np.any(np.diff(f) < -1e-12)):
        raise CdfContractError("cdf is not monotone non-decreasing on the evaluation grid")
    return f


def _grid_sum_many(cdfv, thetas: np.ndarray, delta: float, n_terms: np.ndarray) -> np.ndarray:
    """Evaluate the truncated grid bound for several exponents in one sweep.

    Shares the CDF and log grids across exponents; each exponent stops at
    its own term count. When one exponent is exactly double another, its
    staircase comes from squaring the smaller one's instead of a fresh exp
    pass. Per-exponent chunk partials are re-summed from the tail up so the
    smallest weights accumulate first.
    """
    n_max = int(n_terms.max())
    order = np.argsort(thetas, kind="stable")
    partials = [[] for _ in thetas]
    leading = np.zeros(len(thetas))
    prev_log_edge = 0.0
    prev_f_last = 0.0
    for k0 in range(1, n_max + 1, _CHUNK):
        k1 = min(k0 + _CHUNK - 1, n_max)
        k = np.arange(k0, k1 + 1, dtype=float)
        x_right = k * delta
        f = _check_chunk(cdfv(x_right), prev_f_last)
        log_edges = np.empty(x_right.size + 1)
        log_edges[0] = prev_log_edge
        np.log1p(x_right, out=log_edges[1:])
        dlog = None
        chunk_h: list[tuple[float, np.ndarray]] = []
        for j in order:
            theta = float(thetas[j])
            nj = int(n_terms[j])
            if nj < k0:
                continue
            m = min(k1, nj) - k0 + 1
            if theta >= _STABLE_FORM_THETA:
                h = None
                for prev_theta, prev_h in chunk_h:
                    if abs(theta - 2.0 * prev_theta) <= 1e-12 * theta and prev_h.size >= m + 1:
                        h = prev_h[: m + 1] ** 2
                        break
                if h is None:
                    h = np.exp(-theta * log_edges[: m + 1])
                if len(chunk_h) < 16:  # cap retained staircases per chunk
                    chunk_h.append((theta, h))
                weights = -np.diff(h)
            else:
                if dlog is None:
                    # Stable one-cell increments of log1p along the grid.
                    dlog = np.log1p(delta / (1.0 + (x_right - delta)))
                h_left = np.exp(-theta * log_edges[:m])
                weights = h_left * (-np.expm1(-theta * dlog[:m]))
            # np.dot sums pairwise; chunk partials are then combined from
            # the tail end up so the smallest contributions accumulate first.
            partials[j].append(float(np.dot(weights, f[:m])))
            if nj <= k1:
                leading[j] = math.exp(-theta * log_edges[nj - k0 + 1])
        prev_log_edge = log_edges[-1]
        prev_f_last = float(f[-1])
    totals = np.array(
        [leading[j] + math.fsum(reversed(partials[j])) for j in range(len(thetas))]
    )
    return np.clip(totals, 1e-300, 1.0)


def _bound_at_step(cdfv, thetas, delta, trunc_points, max_terms) -> np.ndarray:
    n_terms = np.maximum(1, np.ceil(np.asarray(trunc_points) / delta)).astype(np.int64)
    n_terms = np.minimum(n_terms, max_terms)
    return _grid_sum_many(cdfv, np.asarray(thetas, dtype=float), delta, n_terms)


def inverse_moment_bound_many(cdf, thetas, config: DiscretizationConfig) -> np.ndarray:
    """Vector version of inverse_moment_bound over a batch of exponents."""
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas < 0):
        raise ValueError("theta must be non-negative")
    out = np.ones_like(thetas)
    active = thetas > 0
    if not np.any(active):
        return out
    cdfv = _as_vectorized(cdf)
    act = thetas[active]
    trunc = np.array([truncation_point(cdfv, t, config) for t in act])
    if not config.refine_to_limit:
        out[active] = _bound_at_step(cdfv, act, config.step_delta, trunc, config.max_terms)
        return out

    # Refinement mode: halve the step until the first-order extrapolant of
    # the step -> 0 limit stabilizes. The discretization error is linear in
    # the step to leading order, so two consecutive levels extrapolate it
    # away; the returned value estimates the limit rather than bounding it.
    # Exponents whose extrapolant has stabilized drop out of finer levels,
    # since the cost per level grows inversely with the step.
    delta = config.step_delta
    prev = _bound_at_step(cdfv, act, delta, trunc, config.max_terms)
    extrap_prev = np.full(act.size, np.nan)
    result = prev.copy()
    live = np.ones(act.size, dtype=bool)
    for _ in range(config.max_refine_rounds):
        delta *= 0.5
        cur = _bound_at_step(cdfv, act[live], delta, trunc[live], config.max_terms)
        extrap = 2.0 * cur - prev[live]
        result[live] = extrap
        rel = np.abs(extrap - extrap_prev[live]) / np.maximum(np.abs(extrap), 1e-300)
        converged = rel <= config.refine_rtol
        extrap_prev[live] = extrap
        prev[live] = cur
        live[live.nonzero()[0][converged]] = False
        if not live.any():
            break
    out[active] = np.clip(result, 1e-300, 1.0)
    return out


def inverse_moment_bound(cdf, theta: float, config: DiscretizationConfig) -> float:
    """Discretized upper bound on E[(1+X)^(-theta)] from the CDF of X.

    Returns the truncated staircase sum
    ``(1+delta*N)^(-theta) + sum_k [(1+(k-1)delta)^(-theta) - (1+k delta)^(-theta)] * F(k delta)``
    with N fixed by the truncation rules in ``config``. The value is an
    upper bound on the expectation for every truncation, lies in (0, 1],
    and tightens monotonically as the step shrinks or terms are added.

    Raises ValueError for negative theta and CdfContractError if the CDF
    misbehaves on the grid.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0:
        return 1.0
    return float(inverse_moment_bound_many(cdf, np.asarray([theta]), config)[0])


class StieltjesTable:
    """Mass/edge aggregation of a CDF over the uniform grid, for fast sweeps.

    Cells of the uniform grid are merged into blocks aligned to a fixed
    lattice of width ``block_log_width`` in log1p(x); each block stores its
    probability mass and the log1p of its left edge. Evaluating with the
    left edge overestimates every merged cell, so the result stays an upper
    bound on the expectation and exceeds the unmerged grid value by at most
    a factor exp(theta * block_log_width) - 1. Build cost is one sweep over
    the grid; each exponent afterwards costs one exp pass over the blocks.
    """

    def __init__(self, cdf, delta: float, n_terms: int, block_log_width: float):
        cdfv = _as_vectorized(cdf)
        self.block_log_width = float(block_log_width)
        masses: list[np.ndarray] = []
        edges: list[np.ndarray] = []
        prev_f = 0.0
        last_id = -1
        for k0 in range(1, n_terms + 1, _CHUNK):
            k1 = min(k0 + _CHUNK - 1, n_terms)
            k = np.arange(k0, k1 + 1, dtype=float)
            f = _check_chunk(cdfv(k * delta), prev_f)
            log_left = np.log1p((k - 1.0) * delta)
            mass = np.diff(np.concatenate(([prev_f], f)))
            ids = np.floor(log_left / self.block_log_width).astype(np.int64)
            starts = np.concatenate(([0], np.nonzero(np.diff(ids))[0] + 1))
            block_mass = np.add.reduceat(mass, starts)
            block_edge = log_left[starts]
            if last_id >= 0 and ids[0] == last_id:
                masses[-1][-1] += block_mass[0]
                block_mass = block_mass[1:]
                block_edge = block_edge[1:]
            if block_mass.size:
                masses.append(block_mass)
                edges.append(block_edge)
                last_id = int(ids[-1])
            prev_f = float(f[-1])
        self.mass = np.concatenate(masses) if masses else np.zeros(0)
        self.log_edges = np.concatenate(edges) if edges else np.zeros(0)
        self.end_survival = 1.0 - prev_f
        self.end_log_edge = math.log1p(n_terms * delta)

    def bound(self, theta: float) -> float:
        """Upper bound on E[(1+X)^(-theta)] from the aggregated blocks."""
        val = float(np.dot(self.mass, np.exp(-theta * self.log_edges)))
        val += self.end_survival * math.exp(-theta * self.end_log_edge)
        return min(max(val, 1e-300), 1.0)


def _lognormal_exact(channel: ShadowingChannel, theta: float) -> float:
    """Exact inverse moment of the log-normal SNR by Gaussian quadrature.

    Substitutes x = exp(ln10/10 * (mean_db + sigma_db z)) and integrates the
    standard normal density over |z| <= 10; the integrand is split at the
    knee where (1+x)^(-theta) transitions, which quad would otherwise miss
    at large exponents.
    """
    if channel.sigma_db == 0.0:
        return _point_mass_exact(channel.median_snr, theta)
    ln_mean = DB_TO_LN * channel.mean_snr_db
    ln_sigma = DB_TO_LN * channel.sigma_db

    def integrand(z: float) -> float:
        ln_x = ln_mean + ln_sigma * z
        return math.exp(-0.5 * z * z - theta * math.log1p(math.exp(ln_x))) / math.sqrt(
            2.0 * math.pi
        )

    knee = (math.log(1.0 / theta) - ln_mean) / ln_sigma if theta > 0 else 0.0
    knee = min(max(knee, -9.99), 9.99)
    value, abserr = integrate.quad(
        integrand, -10.0, 10.0, points=[knee], limit=200, epsabs=0.0, epsrel=1e-11
    )
    if not math.isfinite(value) or (value > 0 and abserr > 1e-9 * value):
        raise QuadratureError(
            f"inverse-moment quadrature did not converge: value={value!r} abserr={abserr!r}"
        )
    return min(max(value, 1e-300), 1.0)


def _point_mass_exact(value: float, theta: float) -> float:
    return math.exp(-theta * math.log1p(value))


def _generic_exact(dist, theta: float) -> float:
    """Quadrature fallback for descriptors exposing a density or a CDF."""
    pdf = getattr(dist, "pdf", None)
    if callable(pdf):
        def integrand(x: float) -> float:
            return math.exp(-theta * math.log1p(x)) * float(pdf(x))

        value, abserr = integrate.quad(integrand, 0.0, np.inf, limit=200, epsabs=0.0,
                                       epsrel=1e-11)
    else:
        cdf = getattr(dist, "cdf", dist)
        if not callable(cdf):
            raise TypeError("distribution descriptor must expose pdf, cdf, or be callable")
        # Integration by parts against the survival function:
        # E[(1+X)^-t] = 1 - t * integral of (1+x)^(-t-1) * (1 - F(x)) dx.
        def integrand(x: float) -> float:
            surv = 1.0 - float(cdf(x))
            return math.exp(-(theta + 1.0) * math.log1p(x)) * surv

        tail, abserr = integrate.quad(integrand, 0.0, np.inf, limit=200, epsabs=1e-14,
                                      epsrel=1e-11)
        value = 1.0 - theta * tail
    if not math.isfinite(value) or (value > 0 and abserr > 1e-9 * max(value, 1e-12)):
        raise QuadratureError(
            f"inverse-moment quadrature did not converge: value={value!r} abserr={abserr!r}"
        )
    return min(max(value, 1e-300), 1.0)


def exact_inverse_moment(dist, theta: float) -> float:
    """E[(1+X)^(-theta)] by adaptive quadrature, the step -> 0 reference.

    ``dist`` may be a ShadowingChannel (integrated in the Gaussian variable),
    a PointMass, or any object exposing ``pdf`` or ``cdf`` (or a bare CDF
    callable). Raises QuadratureError when the tolerance budget is missed.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0:
        return 1.0
    if isinstance(dist, ShadowingChannel):
        return _lognormal_exact(dist, theta)
    if isinstance(dist, PointMass):
        return _point_mass_exact(dist.value, theta)
    return _generic_exact(dist, theta)


def with_step(config: DiscretizationConfig, delta: float) -> DiscretizationConfig:
    """Copy of a config with a different grid step."""
    return replace(config, step_delta=delta)
