"""Forward vols, piecewise-constant instantaneous structures, and their integrals.

Spot implied vols at increasing maturities bootstrap into forward vols via

    sigma^2(T1, T2) = [sigma^2(0,T2) T2 - sigma^2(0,T1) T1] / (T2 - T1)

and, under piecewise-constant time dependence, instantaneous vols and
correlations equal the forward quantities on each bucket.  All integrals
here are exact bucket sums over merged breakpoint grids, not quadrature.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_left
from dataclasses import dataclass

from .errors import (
    CalendarArbitrageError,
    ExtrapolationWarning,
    UndefinedCorrelationError,
    ValidationError,
)
from .market_data import FxPair, VolTermStructure

MIN_BUCKET_WIDTH = 1e-12


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function on buckets (T_n, T_n+1], starting at 0."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breakpoints) < 2:
            raise ValidationError("need at least one bucket")
        if self.breakpoints[0] != 0.0:
            raise ValidationError(f"breakpoints must start at 0, got {self.breakpoints[0]}")
        for n in range(1, len(self.breakpoints)):
            width = self.breakpoints[n] - self.breakpoints[n - 1]
            if width < MIN_BUCKET_WIDTH:
                raise ValidationError(
                    f"bucket {n - 1} has width {width:.3g} < {MIN_BUCKET_WIDTH}"
                )
        if len(self.values) != len(self.breakpoints) - 1:
            raise ValidationError(
                f"{len(self.breakpoints) - 1} buckets need {len(self.breakpoints) - 1} values, "
                f"got {len(self.values)}"
            )

    @property
    def horizon(self) -> float:
        return self.breakpoints[-1]

    def value_at(self, t: float) -> float:
        """Value on the bucket containing t; flat beyond the horizon (warns)."""
        if not t > 0:
            raise ValidationError(f"t must be > 0, got {t}")
        if t > self.horizon:
            warnings.warn(
                f"step function extrapolated flat beyond T={self.horizon} to t={t}",
                ExtrapolationWarning,
                stacklevel=2,
            )
            return self.values[-1]
        return self.values[bisect_left(self.breakpoints, t) - 1]


def forward_vol(sigma_near: float, sigma_far: float, t_near: float, t_far: float) -> float:
    """Forward implied vol sigma(t_near, t_far) from two spot vols.

    Raises CalendarArbitrageError when the forward variance is negative;
    an exactly zero forward variance is allowed and yields 0.
    """
    if not 0 <= t_near < t_far:
        raise ValidationError(f"need 0 <= t_near < t_far, got ({t_near}, {t_far})")
    if sigma_near < 0 or sigma_far < 0:
        raise ValidationError("vols must be >= 0")
    tv_near = sigma_near * sigma_near * t_near
    tv_far = sigma_far * sigma_far * t_far
    if tv_far < tv_near:
        raise CalendarArbitrageError(
            f"negative forward variance on ({t_near}, {t_far}]: "
            f"total variance {tv_far:.12g} at T={t_far} < {tv_near:.12g} at T={t_near}"
        )
    return math.sqrt((tv_far - tv_near) / (t_far - t_near))


def bootstrap_piecewise_vol(ts: VolTermStructure) -> PiecewiseConstant:
    """Instantaneous (forward) vols per quote bucket, first bucket from 0.

    The result reproduces every quoted total variance exactly:
    total_variance(result, T_n) == sigma(0,T_n)^2 * T_n.
    """
    breakpoints = (0.0,) + ts.maturities
    values = []
    prev_t, prev_sigma = 0.0, 0.0
    for n, (t, sigma) in enumerate(ts.points):
        try:
            values.append(forward_vol(prev_sigma, sigma, prev_t, t))
        except CalendarArbitrageError as exc:
            raise CalendarArbitrageError(f"{ts.pair} bucket {n}: {exc}") from exc
        prev_t, prev_sigma = t, sigma
    return PiecewiseConstant(breakpoints, tuple(values))


def total_variance(sigma: PiecewiseConstant, horizon: float) -> float:
    """Integral of sigma(t)^2 over (0, horizon], exact bucket sums."""
    if not horizon > 0:
        raise ValidationError(f"horizon must be > 0, got {horizon}")
    if horizon > sigma.horizon:
        warnings.warn(
            f"total variance extrapolated flat beyond T={sigma.horizon} to T={horizon}",
            ExtrapolationWarning,
            stacklevel=2,
        )
    total = 0.0
    for n, value in enumerate(sigma.values):
        left = sigma.breakpoints[n]
        right = sigma.breakpoints[n + 1]
        width = min(horizon, right) - left
        if width <= 0:
            break
        total += value * value * width
    if horizon > sigma.horizon:
        total += sigma.values[-1] ** 2 * (horizon - sigma.horizon)
    return total


def merged_breakpoints(structures: list[PiecewiseConstant], horizon: float) -> list[float]:
    points = {0.0, horizon}
    for s in structures:
        points.update(b for b in s.breakpoints if 0.0 < b < horizon)
    return sorted(points)


def integrated_correlation(
    rho: PiecewiseConstant,
    sigma_a: PiecewiseConstant,
    sigma_b: PiecewiseConstant,
    horizon: float,
) -> float:
    """Term correlation over (0, horizon] from instantaneous inputs:

        integral of rho(t) sigma_a(t) sigma_b(t) dt
        / sqrt(total variance of a * total variance of b)

    Exact on the merged bucket grid.  Bounded by max |rho(t)|, hence in
    [-1, 1]; only floating-point headroom is clipped.
    """
    if not horizon > 0:
        raise ValidationError(f"horizon must be > 0, got {horizon}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        tv_a = total_variance(sigma_a, horizon)
        tv_b = total_variance(sigma_b, horizon)
    if tv_a == 0.0 or tv_b == 0.0:
        which = "both legs" if tv_a == tv_b == 0.0 else "one leg"
        raise UndefinedCorrelationError(
            f"correlation undefined over (0, {horizon}]: {which} of zero total variance"
        )
    for grid_warn in (rho, sigma_a, sigma_b):
        if horizon > grid_warn.horizon:
            warnings.warn(
                f"integrated correlation extrapolates an input flat beyond T={grid_warn.horizon}",
                ExtrapolationWarning,
                stacklevel=2,
            )
            break
    grid = merged_breakpoints([rho, sigma_a, sigma_b], horizon)
    covariance = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtrapolationWarning)
        for left, right in zip(grid, grid[1:]):
            mid = 0.5 * (left + right)
            r = rho.value_at(mid)
            if abs(r) > 1.0:
                raise ValidationError(f"|rho| > 1 on bucket around t={mid}: {r}")
            covariance += r * sigma_a.value_at(mid) * sigma_b.value_at(mid) * (right - left)
    result = covariance / math.sqrt(tv_a * tv_b)
    return max(-1.0, min(1.0, result))


def horizon_vol(ts: VolTermStructure, start: float, end: float) -> float:
    """Implied vol of a quoted structure over (start, end], interpolating in
    total variance at non-quoted horizons."""
    if not 0 <= start < end:
        raise ValidationError(f"need 0 <= start < end, got ({start}, {end})")
    tv_end = ts.total_variance(end)
    tv_start = ts.total_variance(start) if start > 0 else 0.0
    if tv_end < tv_start:
        raise CalendarArbitrageError(
            f"{ts.pair}: negative forward variance on ({start}, {end}]"
        )
    return math.sqrt((tv_end - tv_start) / (end - start))


@dataclass(frozen=True)
class ForwardVol:
    """A forward implied vol for one pair over a future bucket."""

    pair: FxPair
    start: float
    end: float
    sigma: float

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"need 0 <= start < end, got ({self.start}, {self.end})")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")


def forward_vols(ts: VolTermStructure) -> list[ForwardVol]:
    """The bootstrapped instantaneous vols as labelled bucket quotes."""
    pc = bootstrap_piecewise_vol(ts)
    return [
        ForwardVol(ts.pair, pc.breakpoints[n], pc.breakpoints[n + 1], pc.values[n])
        for n in range(len(pc.values))
    ]
