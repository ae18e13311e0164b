"""Independent oracles for the test suite.

Driver world: each currency gets one exposure vector per time bucket over
d independent Brownian drivers, and the log-increment of the rate
X_{a/b} over a bucket is (v_b - v_a) . dW.  Everything observable then
follows from plain covariance algebra, with no reference to the library's
correlation formulas:

    bucket variance rate of (a, b)      |v_b - v_a|^2
    bucket correlation of (a,b), (c,d)  (v_b - v_a).(v_d - v_c) / norms
    total variance to a boundary        sum of bucket rates * widths

These are the quantities the triangle and cross formulas must reproduce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fxcorr import Currency, FxPair, MarketSnapshot, RateCurve, VolTermStructure


@dataclass
class DriverWorld:
    """Piecewise-constant exposures per currency over shared bucket boundaries."""

    boundaries: tuple[float, ...]                 # 0 = b0 < b1 < ... < bN
    exposures: tuple[dict[str, np.ndarray], ...]  # one dict per bucket

    @classmethod
    def random(
        cls,
        codes: list[str],
        rng: np.random.Generator,
        boundaries: tuple[float, ...] = (0.0, 1.0),
        n_drivers: int = 3,
        scale: float = 0.15,
    ) -> "DriverWorld":
        buckets = []
        for _ in range(len(boundaries) - 1):
            buckets.append({c: rng.normal(0.0, scale, n_drivers) for c in codes})
        return cls(tuple(boundaries), tuple(buckets))

    @property
    def codes(self) -> list[str]:
        return sorted(self.exposures[0])

    def bucket_vector(self, bucket: int, a: str, b: str) -> np.ndarray:
        return self.exposures[bucket][b] - self.exposures[bucket][a]

    def bucket_vol(self, bucket: int, a: str, b: str) -> float:
        return float(np.linalg.norm(self.bucket_vector(bucket, a, b)))

    def bucket_corr(self, bucket: int, a: str, b: str, c: str, d: str) -> float:
        va = self.bucket_vector(bucket, a, b)
        vb = self.bucket_vector(bucket, c, d)
        return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))

    def total_variance(self, a: str, b: str, horizon: float) -> float:
        total = 0.0
        for n in range(len(self.boundaries) - 1):
            width = min(horizon, self.boundaries[n + 1]) - self.boundaries[n]
            if width <= 0:
                break
            total += self.bucket_vol(n, a, b) ** 2 * width
        return total

    def vol(self, a: str, b: str, horizon: float) -> float:
        return math.sqrt(self.total_variance(a, b, horizon) / horizon)

    def integrated_corr(self, a: str, b: str, c: str, d: str, horizon: float) -> float:
        cov = 0.0
        for n in range(len(self.boundaries) - 1):
            width = min(horizon, self.boundaries[n + 1]) - self.boundaries[n]
            if width <= 0:
                break
            va = self.bucket_vector(n, a, b)
            vb = self.bucket_vector(n, c, d)
            cov += float(va @ vb) * width
        return cov / math.sqrt(
            self.total_variance(a, b, horizon) * self.total_variance(c, d, horizon)
        )

    def snapshot(self, rate: float = 0.0) -> MarketSnapshot:
        """Quote every pair at every bucket boundary, with flat rates and
        arbitrage-consistent spots."""
        codes = self.codes
        maturities = self.boundaries[1:]
        levels = {c: 0.1 * n for n, c in enumerate(codes)}
        spots = {}
        vols = {}
        for i, a in enumerate(codes):
            for b in codes[i + 1:]:
                pair = FxPair(Currency(a), Currency(b))
                spots[pair] = math.exp(levels[b] - levels[a])
                points = tuple((t, self.vol(a, b, t)) for t in maturities)
                vols[pair] = VolTermStructure(pair, points)
        rates = {
            Currency(c): RateCurve(Currency(c), ((maturities[-1], rate),)) for c in codes
        }
        return MarketSnapshot(spots, vols, rates, as_of="driver-world")
