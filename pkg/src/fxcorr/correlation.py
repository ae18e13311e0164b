"""Implied correlations between FX rates from implied volatilities.

Two formulas cover every configuration of a pair of rates X_{i/j}, X_{m/k}:

  shared denominating currency (m = i), the "currency triangle":

      rho = (s_ik^2 + s_ij^2 - s_jk^2) / (2 s_ik s_ij)

  different denominating currencies, via the cross rates of all four
  currencies:

      rho = (s_ik^2 + s_mj^2 - s_jk^2 - s_im^2) / (2 s_ij s_mk)

where s_ab is the implied vol of X_{a/b} over the common horizon and a
degenerate "pair" of one currency with itself has zero vol, which reduces
the second formula to the first when m = i.  Vols are orientation
invariant, so the orientation of the queried pairs enters only through
which currency plays which index — flipping one queried pair negates the
result exactly.

Correlations over future buckets use forward vols in the same formulas.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CorrelationClampWarning,
    CorrelationRangeError,
    MissingDataError,
    UndefinedCorrelationError,
    ValidationError,
)
from .market_data import Currency, FxPair, MarketSnapshot, canonicalize
from .term_structure import PiecewiseConstant, horizon_vol

RANGE_SNAP = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class CorrQuery:
    """Correlation between the log-increments of two pairs over a horizon.

    ``horizon`` is (start, end] in year fractions; a total-horizon query
    uses start = 0.  Degenerate queries (same pair, or a pair and its
    inverse) are answered as +/-1 with a degenerate provenance record.
    """

    pair_a: FxPair
    pair_b: FxPair
    horizon: tuple[float, float]

    def __post_init__(self):
        start, end = self.horizon
        if not 0 <= start < end:
            raise ValidationError(f"horizon must satisfy 0 <= start < end, got {self.horizon}")

    @classmethod
    def total(cls, pair_a: FxPair, pair_b: FxPair, maturity: float) -> "CorrQuery":
        return cls(pair_a, pair_b, (0.0, maturity))


@dataclass(frozen=True)
class VolUsed:
    """One vol input to a correlation formula, identified by its role."""

    role: str
    pair: str
    start: float
    end: float
    sigma: float


@dataclass(frozen=True)
class CorrProvenance:
    """Which formula produced a correlation and from which vols."""

    formula: str  # "triangle" | "cross" | "degenerate"
    pair_a: str
    pair_b: str
    start: float
    end: float
    vols: tuple[VolUsed, ...] = ()
    clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "formula": self.formula,
            "pair_a": self.pair_a,
            "pair_b": self.pair_b,
            "start": self.start,
            "end": self.end,
            "clamped": self.clamped,
            "vols": [
                {"role": v.role, "pair": v.pair, "start": v.start, "end": v.end, "sigma": v.sigma}
                for v in self.vols
            ],
        }


@dataclass(frozen=True)
class CorrResult:
    value: float
    provenance: CorrProvenance

    @property
    def degenerate(self) -> bool:
        return self.provenance.formula == "degenerate"


def _bound(raw: float, clamp: bool, describe: str) -> tuple[float, bool]:
    # Values within floating-point headroom of the bounds snap silently.
    if abs(raw) <= 1.0:
        return raw, False
    if abs(raw) <= 1.0 + RANGE_SNAP:
        return math.copysign(1.0, raw), False
    if clamp:
        warnings.warn(
            f"implied correlation {raw:.12g} clamped to {math.copysign(1.0, raw):+.0f} ({describe})",
            CorrelationClampWarning,
            stacklevel=3,
        )
        return math.copysign(1.0, raw), True
    raise CorrelationRangeError(
        f"implied correlation {raw:.12g} outside [-1, 1]: {describe}; "
        "the input vols admit arbitrage (pass clamp to force the nearest bound)"
    )


def triangle_corr(sigma_ik: float, sigma_ij: float, sigma_jk: float, *, clamp: bool = False) -> float:
    """Correlation of rates X_{i/k}, X_{i/j} sharing denominating currency i,
    from their vols and the cross vol of X_{j/k}."""
    if sigma_ik <= 0 or sigma_ij <= 0:
        raise UndefinedCorrelationError(
            f"triangle correlation needs positive vols for the queried pairs, "
            f"got sigma_ik={sigma_ik}, sigma_ij={sigma_ij}"
        )
    if sigma_jk < 0:
        raise ValidationError(f"cross vol must be >= 0, got {sigma_jk}")
    raw = (sigma_ik * sigma_ik + sigma_ij * sigma_ij - sigma_jk * sigma_jk) / (
        2.0 * sigma_ik * sigma_ij
    )
    value, _ = _bound(raw, clamp, f"triangle vols ({sigma_ik}, {sigma_ij}, {sigma_jk})")
    return value


def cross_corr(
    sigma_ij: float,
    sigma_mk: float,
    sigma_ik: float,
    sigma_mj: float,
    sigma_jk: float,
    sigma_im: float,
    *,
    clamp: bool = False,
) -> float:
    """Correlation of rates X_{i/j}, X_{m/k} with different denominating
    currencies, from the vols of all six cross rates of {i, j, k, m}."""
    if sigma_ij <= 0 or sigma_mk <= 0:
        raise UndefinedCorrelationError(
            f"cross correlation needs positive vols for the queried pairs, "
            f"got sigma_ij={sigma_ij}, sigma_mk={sigma_mk}"
        )
    for name, s in (("sigma_ik", sigma_ik), ("sigma_mj", sigma_mj),
                    ("sigma_jk", sigma_jk), ("sigma_im", sigma_im)):
        if s < 0:
            raise ValidationError(f"{name} must be >= 0, got {s}")
    raw = (
        sigma_ik * sigma_ik + sigma_mj * sigma_mj - sigma_jk * sigma_jk - sigma_im * sigma_im
    ) / (2.0 * sigma_ij * sigma_mk)
    value, _ = _bound(
        raw,
        clamp,
        f"cross vols ({sigma_ij}, {sigma_mk}, {sigma_ik}, {sigma_mj}, {sigma_jk}, {sigma_im})",
    )
    return value


def _vol_between(snapshot: MarketSnapshot, a: Currency, b: Currency, start: float, end: float) -> float:
    if a == b:
        return 0.0
    try:
        ts = snapshot.vol_structure(FxPair(a, b))
    except MissingDataError as exc:
        raise MissingDataError(
            f"no vol term structure for pair {a}/{b} (needed over ({start}, {end}])"
        ) from exc
    return horizon_vol(ts, start, end)


def implied_corr(query: CorrQuery, snapshot: MarketSnapshot, *, clamp: bool = False) -> CorrResult:
    """Dispatch to the triangle or cross formula for the queried orientation.

    Returns the correlation between the log-increments of the two pairs
    exactly as oriented in the query, with a provenance record listing
    every vol that fed the formula.
    """
    i, j = query.pair_a.denominating, query.pair_a.foreign
    m, k = query.pair_b.denominating, query.pair_b.foreign
    start, end = query.horizon

    if query.pair_a == query.pair_b or query.pair_a == query.pair_b.inverse():
        value = 1.0 if query.pair_a == query.pair_b else -1.0
        prov = CorrProvenance(
            "degenerate", query.pair_a.label, query.pair_b.label, start, end
        )
        return CorrResult(value, prov)

    def vol(role: str, a: Currency, b: Currency) -> VolUsed:
        return VolUsed(role, f"{a}/{b}", start, end, _vol_between(snapshot, a, b, start, end))

    describe = f"{query.pair_a} vs {query.pair_b} over ({start}, {end}]"
    if m == i:
        used = (vol("sigma_ik", i, k), vol("sigma_ij", i, j), vol("sigma_jk", j, k))
        s_ik, s_ij, s_jk = (u.sigma for u in used)
        if s_ik <= 0 or s_ij <= 0:
            raise UndefinedCorrelationError(
                f"zero implied vol for a queried pair: {describe}"
            )
        raw = (s_ik * s_ik + s_ij * s_ij - s_jk * s_jk) / (2.0 * s_ik * s_ij)
        formula = "triangle"
    else:
        used = (
            vol("sigma_ij", i, j),
            vol("sigma_mk", m, k),
            vol("sigma_ik", i, k),
            vol("sigma_mj", m, j),
            vol("sigma_jk", j, k),
            vol("sigma_im", i, m),
        )
        s_ij, s_mk, s_ik, s_mj, s_jk, s_im = (u.sigma for u in used)
        if s_ij <= 0 or s_mk <= 0:
            raise UndefinedCorrelationError(
                f"zero implied vol for a queried pair: {describe}"
            )
        raw = (s_ik * s_ik + s_mj * s_mj - s_jk * s_jk - s_im * s_im) / (2.0 * s_ij * s_mk)
        formula = "cross"

    value, clamped = _bound(raw, clamp, describe)
    prov = CorrProvenance(
        formula, query.pair_a.label, query.pair_b.label, start, end, used, clamped
    )
    return CorrResult(value, prov)


def normalize_breakpoints(buckets: Iterable[float]) -> tuple[float, ...]:
    """Sorted bucket boundaries with a leading 0 (added when absent)."""
    points = sorted(set(float(b) for b in buckets))
    if not points:
        raise ValidationError("need at least one bucket boundary")
    if points[0] < 0:
        raise ValidationError(f"bucket boundaries must be >= 0, got {points[0]}")
    if points[0] != 0.0:
        points.insert(0, 0.0)
    if len(points) < 2:
        raise ValidationError("need at least one bucket past 0")
    return tuple(points)


def term_corr(
    query: CorrQuery,
    snapshot: MarketSnapshot,
    buckets: Iterable[float],
    *,
    clamp: bool = False,
) -> PiecewiseConstant:
    """Per-bucket implied correlations from forward vols over each bucket.

    ``buckets`` are breakpoints; the query's own horizon is ignored in
    favour of the bucket grid.  Errors carry the offending bucket index.
    """
    breakpoints = normalize_breakpoints(buckets)
    values = []
    for n, (left, right) in enumerate(zip(breakpoints, breakpoints[1:])):
        bucket_query = CorrQuery(query.pair_a, query.pair_b, (left, right))
        try:
            values.append(implied_corr(bucket_query, snapshot, clamp=clamp).value)
        except (CorrelationRangeError, MissingDataError, UndefinedCorrelationError) as exc:
            raise type(exc)(f"bucket {n} ({left}, {right}]: {exc}") from exc
    return PiecewiseConstant(breakpoints, tuple(values))


@dataclass(frozen=True)
class BucketStatus:
    """PSD diagnosis of one bucket's correlation matrix."""

    status: str  # "psd" | "repaired" | "indefinite"
    min_eigenvalue: float
    frobenius_change: float = 0.0


@dataclass(frozen=True, eq=False)
class BucketedCorrelationMatrix:
    """Per-bucket correlation matrices across a set of canonical pairs."""

    pairs: tuple[str, ...]
    breakpoints: tuple[float, ...]
    matrices: tuple[np.ndarray, ...]
    statuses: tuple[BucketStatus, ...]

    def __post_init__(self):
        if len(self.matrices) != len(self.breakpoints) - 1:
            raise ValidationError("one matrix per bucket required")
        if len(self.statuses) != len(self.matrices):
            raise ValidationError("one status per bucket required")
        n = len(self.pairs)
        for mat in self.matrices:
            if mat.shape != (n, n):
                raise ValidationError(f"matrix shape {mat.shape} does not match {n} pairs")

    @property
    def n_buckets(self) -> int:
        return len(self.matrices)

    def bucket_index(self, t: float) -> int:
        if not 0 < t <= self.breakpoints[-1]:
            raise ValidationError(f"t={t} outside ({self.breakpoints[0]}, {self.breakpoints[-1]}]")
        for n in range(self.n_buckets):
            if t <= self.breakpoints[n + 1]:
                return n
        raise AssertionError("unreachable")

    def to_dict(self) -> dict:
        return {
            "pairs": list(self.pairs),
            "buckets": [
                {
                    "start": self.breakpoints[n],
                    "end": self.breakpoints[n + 1],
                    "matrix": [list(row) for row in self.matrices[n]],
                    "status": self.statuses[n].status,
                    "min_eigenvalue": self.statuses[n].min_eigenvalue,
                    "frobenius_change": self.statuses[n].frobenius_change,
                }
                for n in range(self.n_buckets)
            ],
        }


def _clip_to_psd(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """One-pass eigenvalue clipping at 0 plus unit-diagonal renormalization."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    clipped = (eigvecs * np.maximum(eigvals, 0.0)) @ eigvecs.T
    scale = np.sqrt(np.maximum(np.diag(clipped), 1e-300))
    repaired = clipped / np.outer(scale, scale)
    repaired = 0.5 * (repaired + repaired.T)
    np.fill_diagonal(repaired, 1.0)
    np.clip(repaired, -1.0, 1.0, out=repaired)
    change = float(np.linalg.norm(repaired - matrix, ord="fro"))
    return repaired, change


def build_matrix(
    pairs: Sequence[FxPair],
    snapshot: MarketSnapshot,
    buckets: Iterable[float],
    *,
    repair: bool = False,
    clamp: bool = False,
) -> BucketedCorrelationMatrix:
    """Pairwise term correlations assembled into one matrix per bucket.

    Pairs are restated in canonical orientation.  Each bucket's matrix is
    built entry by entry (each entry a pure function of the snapshot),
    symmetrized by construction, then eigenvalue-checked.  Indefinite
    buckets are either flagged or, with ``repair``, clipped to the nearest
    unit-diagonal PSD matrix (reporting the Frobenius distance moved).
    """
    canon = []
    for pair in pairs:
        cpair, _ = canonicalize(pair)
        if cpair in canon:
            raise ValidationError(f"pair {pair} duplicates {cpair} after canonicalization")
        canon.append(cpair)
    if len(canon) < 2:
        raise ValidationError("need at least two pairs")
    breakpoints = normalize_breakpoints(buckets)

    matrices = []
    statuses = []
    for n, (left, right) in enumerate(zip(breakpoints, breakpoints[1:])):
        mat = np.eye(len(canon))
        for a in range(len(canon)):
            for b in range(a + 1, len(canon)):
                query = CorrQuery(canon[a], canon[b], (left, right))
                try:
                    value = implied_corr(query, snapshot, clamp=clamp).value
                except (CorrelationRangeError, MissingDataError, UndefinedCorrelationError) as exc:
                    raise type(exc)(
                        f"matrix entry ({canon[a]}, {canon[b]}) bucket {n} ({left}, {right}]: {exc}"
                    ) from exc
                mat[a, b] = value
                mat[b, a] = value
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig >= -PSD_TOL:
            statuses.append(BucketStatus("psd", min_eig))
        elif repair:
            mat, change = _clip_to_psd(mat)
            statuses.append(
                BucketStatus("repaired", float(np.linalg.eigvalsh(mat)[0]), change)
            )
        else:
            statuses.append(BucketStatus("indefinite", min_eig))
        mat.setflags(write=False)
        matrices.append(mat)

    return BucketedCorrelationMatrix(
        tuple(p.label for p in canon), breakpoints, tuple(matrices), tuple(statuses)
    )
