"""Poincare series over an enumerated orbit and critical exponent estimates.

Every sum runs over orbit elements in ascending displacement (the OrbitSet
order), so a truncated sum is a prefix sum and results are bit-reproducible.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .hyperbolic import BallPoint, lift_from_ball
from .orbit import OrbitSet, TruncationWarning

METHODS = ("log-count-slope", "endpoint-ratio")
MIN_RADII = 5


def _trusted(orbit: OrbitSet, radius: float, what: str) -> bool:
    ok = radius <= orbit.complete_radius + 1e-12
    if not ok:
        warnings.warn(
            f"{what} at R={radius:g} exceeds complete_radius={orbit.complete_radius:.4f}",
            TruncationWarning, stacklevel=3)
    return ok


def _count(orbit: OrbitSet, radius) -> np.ndarray:
    return np.searchsorted(orbit.displacements, radius, side="right")


def _prefix_sums(orbit: OrbitSet, s: float) -> np.ndarray:
    return np.cumsum(np.exp(-s * orbit.displacements))


def gap_terms(orbit: OrbitSet, z: BallPoint) -> tuple[np.ndarray, np.ndarray]:
    """Per-element (cosh d(0, gamma z), 1 - |gamma z|^2).

    Uses 1 - |gamma z|^2 = (1 - |z|^2) / |(M Z)_0|^2 with Z the lift of z;
    the naive difference loses all digits once gamma z nears the sphere.
    """
    lift = lift_from_ball(z)
    a = np.abs(orbit.first_rows @ lift)
    base = 1.0 - float(np.vdot(z.coords, z.coords).real)
    return a / np.sqrt(base), base / (a * a)


@dataclass(frozen=True)
class SeriesEstimate:
    s: float
    truncation_radius: float
    partial_sum: float
    last_increment: float  # S(R) - S(R - 1)
    term_count: int
    trusted: bool = True

    def to_json(self) -> dict:
        return asdict(self)


def poincare_sum(orbit: OrbitSet, s: float, radius: float) -> SeriesEstimate:
    """Sum of exp(-s d(0, gamma 0)) over elements with displacement <= radius."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    trusted = _trusted(orbit, radius, "Poincare sum")
    cum = _prefix_sums(orbit, s)
    n, n_prev = (int(k) for k in _count(orbit, [radius, radius - 1.0]))
    total = float(cum[n - 1])
    prev = float(cum[n_prev - 1]) if n_prev else 0.0
    return SeriesEstimate(float(s), float(radius), total, total - prev, n, trusted)


@dataclass(frozen=True)
class ExponentEstimate:
    delta_hat: float
    fit_window: tuple[float, float]
    slope_stderr: float
    n_points: int
    method: str
    slope: float
    endpoint_ratio: float
    intercept: float
    r2: float
    radii: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    complete_radius: float = float("nan")
    orbit_size: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["fit_window"] = list(self.fit_window)
        return d


def critical_exponent(
    orbit: OrbitSet,
    window: tuple[float, float] | None = None,
    n_radii: int = 8,
    method: str = "log-count-slope",
) -> ExponentEstimate:
    """Growth rate of N(R) over ``window``, default [complete_radius / 3, complete_radius].

    The primary estimate is the least-squares slope of log N(R) against R at
    ``n_radii`` equispaced radii; log N(R1) / R1 is kept as a cross-check.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if n_radii < MIN_RADII:
        raise ValueError(f"need at least {MIN_RADII} sample radii")
    cr = orbit.complete_radius
    r0, r1 = window if window is not None else (cr / 3.0, cr)
    if not 0 <= r0 < r1:
        raise ValueError(f"bad fit window [{r0}, {r1}]")
    if r1 > cr + 1e-12:
        raise ValueError(f"fit window end {r1:g} exceeds complete_radius {cr:.4f}")
    radii = np.linspace(r0, r1, n_radii)
    counts = _count(orbit, radii)
    if counts[-1] - counts[0] < n_radii or counts[0] < 1:
        raise ValueError(f"too few orbit points in window [{r0:.4g}, {r1:.4g}]")
    fit = stats.linregress(radii, np.log(counts))
    endpoint = float(np.log(counts[-1]) / r1)
    slope = float(fit.slope)
    return ExponentEstimate(
        delta_hat=slope if method == "log-count-slope" else endpoint,
        fit_window=(float(r0), float(r1)),
        slope_stderr=float(fit.stderr),
        n_points=int(n_radii),
        method=method,
        slope=slope,
        endpoint_ratio=endpoint,
        intercept=float(fit.intercept),
        r2=float(fit.rvalue ** 2),
        radii=[float(r) for r in radii],
        counts=[int(c) for c in counts],
        complete_radius=float(cr),
        orbit_size=len(orbit),
    )


@dataclass(frozen=True)
class BoundReport:
    max_violation: float
    argmax: int
    side: str  # "lower", "upper" or "none"
    word: str
    term_count: int

    def to_json(self) -> dict:
        return asdict(self)


def bound_check(orbit: OrbitSet, z: BallPoint, *, _gap_scale: float = 1.0) -> BoundReport:
    """Worst relative violation of exp(-2d) <= 1 - |gamma z|^2 <= 4 exp(-2d) over the orbit.

    d = d(0, gamma z) comes from arccosh of the lifted inner product, the gap
    from the stable quotient formula.  ``_gap_scale`` corrupts the gap for
    harness self-tests.
    """
    c, gap = gap_terms(orbit, z)
    gap = gap * _gap_scale
    e2 = np.exp(-2.0 * np.arccosh(np.maximum(c, 1.0)))
    low = np.maximum(e2 - gap, 0.0) / gap
    high = np.maximum(gap - 4.0 * e2, 0.0) / (4.0 * e2)
    worst = np.maximum(low, high)
    i = int(np.argmax(worst))
    v = float(worst[i])
    side = "none" if v == 0 else ("lower" if low[i] >= high[i] else "upper")
    return BoundReport(v, i, side, orbit.word_str(i), len(orbit))


def gap_series(orbit: OrbitSet, z: BallPoint, radius: float | None = None) -> float:
    """Sum of (1 - |gamma z|^2) over elements with d(0, gamma 0) <= radius."""
    _, gap = gap_terms(orbit, z)
    if radius is not None:
        gap = gap[: int(_count(orbit, radius))]
    return float(np.cumsum(gap)[-1]) if gap.size else 0.0


@dataclass(frozen=True)
class DivergenceProfile:
    s: float
    radii: list[float]
    counts: list[int]
    partial_sums: list[float]
    slope: float
    intercept: float
    r2: float
    log_slope: float
    trusted: list[bool]

    def increments(self) -> np.ndarray:
        return np.diff(np.asarray(self.partial_sums))

    def to_json(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["R", "N", f"partial_sum_s={self.s:g}"])
        for r, n, p in zip(self.radii, self.counts, self.partial_sums):
            w.writerow([repr(r), n, repr(p)])
        return fh.getvalue()


def divergence_profile(orbit: OrbitSet, s: float, radii) -> DivergenceProfile:
    """Partial sums of exp(-s d) at increasing radii with linear and log-linear fits.

    A finite truncation cannot certify divergence; the fitted slope reports
    growth consistent with it or not.
    """
    radii = np.asarray(sorted(float(r) for r in radii))
    if radii.size < 2:
        raise ValueError("need at least two radii")
    cum = _prefix_sums(orbit, s)
    counts = _count(orbit, radii)
    sums = cum[counts - 1]
    trusted = [bool(r <= orbit.complete_radius + 1e-12) for r in radii]
    if not all(trusted):
        warnings.warn(
            f"divergence profile extends past complete_radius={orbit.complete_radius:.4f}",
            TruncationWarning, stacklevel=2)
    lin = stats.linregress(radii, sums)
    log_fit = stats.linregress(radii, np.log(sums))
    return DivergenceProfile(
        s=float(s),
        radii=[float(r) for r in radii],
        counts=[int(c) for c in counts],
        partial_sums=[float(v) for v in sums],
        slope=float(lin.slope),
        intercept=float(lin.intercept),
        r2=float(lin.rvalue ** 2) if np.ptp(sums) > 0 else 0.0,
        log_slope=float(log_fit.slope),
        trusted=trusted,
    )


def series_csv(orbit: OrbitSet, s: float, radii) -> str:
    """(R, N(R), partial sum) rows."""
    return divergence_profile(orbit, s, radii).to_csv()


def jacobian_bound(delta: float, p: int) -> float:
    """((delta + 1) / p) ** p, the p-Jacobian contraction factor."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if int(p) != p or p < 2:
        raise ValueError("p must be an integer >= 2")
    return ((delta + 1.0) / p) ** int(p)


def dumps(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, sort_keys=True)
