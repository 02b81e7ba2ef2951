"""Bounds on the Laplace transform of the cumulative service process.

One slot of service carries bits_per_nat * ln(1 + SNR) bits, so
E[exp(-theta * S)] over independent slots factors into per-slot inverse
moments with composite exponent theta * bits_per_nat. The per-slot factor
is bounded from above via the discretized inverse-moment machinery (or
its exact quadrature limit in step -> 0 mode) and the n-slot bound is
that factor to the n-th power, carried in the log domain.

Theta sweeps hit the per-slot factor hundreds of times, so evaluation is
routed by the size of the composite exponent:

  * tiny exponents: a second-order bound 1 - t*E[Y] + t^2*E[Y^2]/2 on
    E[exp(-t Y)], Y = ln(1+SNR) >= 0, valid since exp(-z) <= 1 - z + z^2/2;
  * mid-range exponents: a mass-aggregated table of the discretized grid
    (still an upper bound, within a configured relative looseness of it);
  * large exponents: direct streaming evaluation, cheap because the
    truncation point collapses.

Every route returns an upper bound on the exact per-slot factor, which is
the property all downstream guarantees rest on.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import integrate

from .channel import DB_TO_LN, ShadowingChannel, snr_cdf
from .inverse_moment import (
    DiscretizationConfig,
    StieltjesTable,
    exact_inverse_moment,
    inverse_moment_bound_many,
    truncation_point,
)

# Composite-exponent routing thresholds and the table's relative looseness
# budget against the unmerged grid at the top of its band.
_QUADRATIC_MAX_EXPONENT = 0.05
_DIRECT_MIN_EXPONENT = 5.0
_TABLE_REL_TOL = 1e-4

_LOG_FLOOR = math.log(1e-300)


class ServiceCharacterization:
    """Per-slot service transform bound for a shadowing channel, memoized.

    Args:
        channel: the slotted channel offering the service.
        config: discretization controls for the per-slot bound.
        exact: substitute the exact quadrature inverse moment for the
            discretized bound (the step -> 0 mode).

    The memoization cache is keyed on theta rounded to 12 significant
    digits; entries are immutable once written, so concurrent readers are
    safe and racing writers at worst recompute the same value.
    """

    def __init__(
        self,
        channel: ShadowingChannel,
        config: DiscretizationConfig | None = None,
        exact: bool = False,
    ):
        self.channel = channel
        self.config = config if config is not None else DiscretizationConfig()
        self.exact = exact
        self._log_cache: dict[str, float] = {}
        self._table: StieltjesTable | None = None
        self._log_moments: tuple[float, float] | None = None

    @property
    def bits_per_nat(self) -> float:
        return self.channel.bits_per_nat

    def composite_exponent(self, theta: float) -> float:
        """Dimensionless exponent seen by the inverse moment: theta * slot * W / ln 2."""
        return theta * self.channel.bits_per_nat

    # -- per-slot factor -----------------------------------------------------

    def _cdf(self, x):
        return snr_cdf(self.channel, x)

    def _capacity_log_moments(self) -> tuple[float, float]:
        """First two moments of Y = ln(1 + SNR), by Gaussian quadrature."""
        if self._log_moments is None:
            ln_mean = DB_TO_LN * self.channel.mean_snr_db
            ln_sigma = DB_TO_LN * self.channel.sigma_db
            norm = 1.0 / math.sqrt(2.0 * math.pi)

            def moment(power: int) -> float:
                def integrand(z: float) -> float:
                    y = math.log1p(math.exp(ln_mean + ln_sigma * z))
                    return norm * math.exp(-0.5 * z * z) * y**power

                val, _ = integrate.quad(integrand, -10.0, 10.0, limit=200)
                return val

            self._log_moments = (moment(1), moment(2))
        return self._log_moments

    def _ensure_table(self) -> StieltjesTable:
        if self._table is None:
            tail_x = truncation_point(self._cdf, 0.0, self.config)
            n = int(
                min(self.config.max_terms, math.ceil(tail_x / self.config.step_delta))
            )
            self._table = StieltjesTable(
                self._cdf,
                self.config.step_delta,
                max(n, 1),
                block_log_width=_TABLE_REL_TOL / _DIRECT_MIN_EXPONENT,
            )
        return self._table

    def _compute_log(self, theta: float) -> float:
        exponent = self.composite_exponent(theta)
        if self.channel.sigma_db == 0.0:
            # Degenerate channel: the inverse moment of a point mass, exactly.
            return -exponent * math.log1p(self.channel.median_snr)
        if self.exact:
            return math.log(exact_inverse_moment(self.channel, exponent))
        if exponent <= _QUADRATIC_MAX_EXPONENT:
            m1, m2 = self._capacity_log_moments()
            return math.log(1.0 - exponent * m1 + 0.5 * exponent * exponent * m2)
        if exponent < _DIRECT_MIN_EXPONENT:
            return math.log(self._ensure_table().bound(exponent))
        val = inverse_moment_bound_many(self._cdf, np.asarray([exponent]), self.config)[0]
        return math.log(val)

    def log_per_slot_bound(self, theta: float) -> float:
        """ln of the per-slot transform bound; non-positive, floored at ln(1e-300)."""
        if theta <= 0:
            raise ValueError("theta must be positive")
        key = f"{theta:.12g}"
        cached = self._log_cache.get(key)
        if cached is None:
            cached = min(max(self._compute_log(theta), _LOG_FLOOR), 0.0)
            self._log_cache[key] = cached
        return cached

    def log_per_slot_bound_many(self, thetas) -> np.ndarray:
        """Batched log_per_slot_bound over an array of thetas."""
        thetas = np.asarray(thetas, dtype=float)
        return np.array([self.log_per_slot_bound(float(t)) for t in thetas])

    def per_slot_bound(self, theta: float) -> float:
        """Upper bound on E[(1 + SNR)^(-theta * bits_per_nat)], in (0, 1]."""
        return math.exp(self.log_per_slot_bound(theta))

    # -- multi-slot bound ------------------------------------------------------

    def log_mgf_bound(self, theta: float, n_slots: int) -> float:
        """ln of the bound on E[exp(-theta * S(0, n))]: n times the per-slot log."""
        if n_slots < 0:
            raise ValueError("n_slots must be non-negative")
        if n_slots == 0:
            return 0.0
        return n_slots * self.log_per_slot_bound(theta)

    def mgf_bound(self, theta: float, n_slots: int) -> float:
        """Bound on E[exp(-theta * S(0, n))]; exponentiated only on demand."""
        return math.exp(self.log_mgf_bound(theta, n_slots))


def heterogeneous_log_mgf_bound(
    snr_cdfs: Sequence,
    theta: float,
    bits_per_nat: float,
    config: DiscretizationConfig,
) -> float:
    """Slow path for independent but non-identically distributed slots.

    Takes one SNR CDF per slot and multiplies the per-slot inverse-moment
    bounds (summed in log domain). Reduces to the i.i.d. power form when
    all CDFs coincide.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    exponent = theta * bits_per_nat
    total = 0.0
    for cdf in snr_cdfs:
        val = inverse_moment_bound_many(cdf, np.asarray([exponent]), config)[0]
        total += math.log(val)
    return total


def heterogeneous_mgf_bound(
    snr_cdfs: Sequence,
    theta: float,
    bits_per_nat: float,
    config: DiscretizationConfig,
) -> float:
    return math.exp(heterogeneous_log_mgf_bound(snr_cdfs, theta, bits_per_nat, config))
