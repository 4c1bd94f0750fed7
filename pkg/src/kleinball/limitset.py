"""Random-word samples of the limit set and greedy-net box dimension.

A sample point is g_1 g_2 ... g_L . 0 for a random reduced word, pushed
radially onto the sphere.  The word is applied to the lifted origin one
letter at a time (last letter first), renormalizing the vector at every step
and tracking log cosh d separately, so long words neither overflow nor lose
the gap 1 - |z|.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .groups import GroupSpec
from .hyperbolic import BoundaryPoint
from .orbit import Letter, letters_for

BLOCK = 2048  # words per derived seed; fixed so output does not depend on workers
BOUNDARY_TOL = 1e-6
CLUSTER_TOL = 1e-6
METRICS = ("koranyi", "euclidean")


class NotNearBoundaryWarning(UserWarning):
    """Sampled orbit points stayed too far from the sphere."""


@dataclass(frozen=True)
class LimitSample:
    points: np.ndarray  # (count, n) unit vectors
    word_len: int
    seed: int
    spec_name: str
    max_gap: float  # largest 1 - |z| before projection
    median_gap: float
    lengths: np.ndarray | None = None  # letters used per word

    def __len__(self):
        return self.points.shape[0]

    def boundary_points(self) -> list[BoundaryPoint]:
        return [BoundaryPoint(p) for p in self.points]

    def to_csv(self) -> str:
        fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        n = self.points.shape[1]
        w.writerow([f"{p}{k}" for k in range(1, n + 1) for p in ("re", "im")])
        for z in self.points:
            w.writerow([repr(float(x)) for c in z for x in (c.real, c.imag)])
        return fh.getvalue()


def _allowed(letters: list[Letter]) -> np.ndarray:
    nl = len(letters)
    ok = np.ones((nl + 1, nl), dtype=bool)  # row nl: no previous letter
    for i, lt in enumerate(letters):
        ok[i, lt.inverse] = False
    return ok


def _sample_block(letters, allowed, word_len, max_len, count, seed_seq, d, dtype):
    rng = np.random.default_rng(seed_seq)
    mats = np.stack([lt.matrix for lt in letters]).astype(dtype)
    runs = np.array([lt.max_run for lt in letters] + [0])
    nl = len(letters)
    v = np.zeros((count, d), dtype=dtype)
    v[:, 0] = 1.0
    log_c = np.zeros(count)
    last = np.full(count, nl)
    run = np.zeros(count, dtype=np.int64)
    lengths = np.zeros(count, dtype=np.int64)
    active = np.arange(count)
    for step in range(max_len):
        # one draw per word per step keeps the stream independent of which words stopped
        u = rng.random((count, nl))[active]
        la, ra = last[active], run[active]
        ok = allowed[la].copy()
        capped = (runs[la] > 0) & (ra >= runs[la])
        ok[np.nonzero(capped)[0], la[capped]] = False
        pick = np.argmax(np.where(ok, u, -1.0), axis=1)
        w = np.einsum("nij,nj->ni", mats[pick], v[active])
        s = np.abs(w[:, 0])
        v[active] = w / s[:, None]
        log_c[active] += np.log(s)
        run[active] = np.where(pick == la, ra + 1, 1)
        last[active] = pick
        lengths[active] = step + 1
        if step + 1 >= word_len:
            # 1 - |z| <= 1 - |z|^2 = 1 / cosh^2 d
            active = active[np.exp(-2.0 * log_c[active]) > BOUNDARY_TOL]
            if active.size == 0:
                break
    z = v[:, 1:] / v[:, :1]
    r = np.linalg.norm(z, axis=1)
    gap = np.exp(-2.0 * log_c) / (1.0 + r)
    return z / r[:, None], gap, lengths


def sample_limit_set(
    spec: GroupSpec, word_len: int, count: int, seed: int, workers: int = 1, max_len: int | None = None,
) -> LimitSample:
    """Images of the origin under ``count`` random reduced words, projected to the sphere.

    Letters are drawn uniformly among those allowed after the previous one
    (no cancellation, no torsion run longer than half the order).  A word
    still farther than 1e-6 from the sphere after ``word_len`` letters keeps
    growing, up to ``max_len`` (default 50 * word_len); survivors trigger a
    warning.  Each block of BLOCK words has its own seed derived from ``seed``.
    """
    if word_len < 1 or count < 1:
        raise ValueError("word_len and count must be positive")
    max_len = 50 * word_len if max_len is None else max(int(max_len), word_len)
    letters = letters_for(spec)
    if not letters:
        raise ValueError("group has no nontrivial generators")
    d = spec.ambient_dim + 1
    dtype = np.float64 if spec.is_real else np.complex128
    allowed = _allowed(letters)
    sizes = [min(BLOCK, count - s) for s in range(0, count, BLOCK)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(letters, allowed, word_len, max_len, k, q, d, dtype) for k, q in zip(sizes, seqs)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _sample_block(*a), jobs))
    else:
        parts = [_sample_block(*a) for a in jobs]
    pts = np.concatenate([p[0] for p in parts]).astype(complex)
    gap = np.concatenate([p[1] for p in parts])
    lengths = np.concatenate([p[2] for p in parts])
    if gap.max() > BOUNDARY_TOL:
        warnings.warn(
            f"orbit points not near the sphere: 1-|z| max {gap.max():.3g}, median {np.median(gap):.3g}, "
            f"{int((gap > BOUNDARY_TOL).sum())}/{gap.size} above {BOUNDARY_TOL:g}",
            NotNearBoundaryWarning, stacklevel=2)
    return LimitSample(pts, int(word_len), int(seed), spec.name, float(gap.max()), float(np.median(gap)), lengths)


def transform_sample(sample: LimitSample, g) -> LimitSample:
    """Image of the sample under an isometry (acting on the closed ball)."""
    m = g.matrix if hasattr(g, "matrix") else np.asarray(g)
    lifts = np.concatenate([np.ones((len(sample), 1)), sample.points], axis=1)
    w = lifts @ m.T
    z = w[:, 1:] / w[:, :1]
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return LimitSample(z, sample.word_len, sample.seed, sample.spec_name, sample.max_gap, sample.median_gap, sample.lengths)


def merge_samples(a: LimitSample, b: LimitSample) -> LimitSample:
    return LimitSample(np.concatenate([a.points, b.points]), a.word_len, a.seed, a.spec_name,
                       max(a.max_gap, b.max_gap), float(np.median([a.median_gap, b.median_gap])),
                       None if a.lengths is None or b.lengths is None else np.concatenate([a.lengths, b.lengths]))


@dataclass(frozen=True)
class DimensionEstimate:
    dim_hat: float
    scales: list[float]
    counts: list[int]
    fit_r2: float
    metric: str
    n_points: int
    degenerate: bool = False
    slope_stderr: float = 0.0
    distinct_points: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _real_coords(p: np.ndarray) -> np.ndarray:
    return np.concatenate([p.real, p.imag], axis=1)


def distinct_count(points: np.ndarray, tol: float = CLUSTER_TOL) -> int:
    return greedy_net_size(points, tol, "euclidean")


def greedy_net_size(points: np.ndarray, r: float, metric: str = "koranyi") -> int:
    """Centres picked by the greedy net: take the first uncovered point, cover its r-ball, repeat.

    The Korányi ball {q : |1 - <p, q>| <= r^2} sits inside the Euclidean ball
    of radius sqrt(2) r, so the kd-tree query is exact after filtering.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    x = _real_coords(points)
    tree = cKDTree(x)
    covered = np.zeros(len(points), dtype=bool)
    reach = np.sqrt(2.0) * r * (1 + 1e-12) if metric == "koranyi" else r
    centres = 0
    for i in range(len(points)):
        if covered[i]:
            continue
        centres += 1
        nb = np.asarray(tree.query_ball_point(x[i], reach), dtype=np.int64)
        if metric == "koranyi":
            inner = points[nb] @ points[i].conj()
            nb = nb[np.abs(1.0 - inner) <= r * r]
        covered[nb] = True
        covered[i] = True
    return centres


def default_scales(metric: str = "koranyi") -> list[float]:
    if metric == "koranyi":
        return list(np.geomspace(1.0, 0.03, 8))
    return list(np.geomspace(1.0, 0.01, 8))


def box_dimension(sample: LimitSample, scales=None, metric: str = "koranyi", min_points: int = 500) -> DimensionEstimate:
    """Minus the slope of log(net size) against log(scale)."""
    pts = sample.points
    if len(pts) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(pts)}")
    scales = sorted((float(s) for s in (scales if scales is not None else default_scales(metric))), reverse=True)
    if len(scales) < 4 or np.log10(scales[0] / scales[-1]) < 1.5 - 1e-12:
        raise ValueError("need >= 4 scales spanning >= 1.5 decades")
    if len(set(scales)) != len(scales) or scales[-1] <= 0:
        raise ValueError("scales must be distinct and positive")
    distinct = distinct_count(pts)
    if distinct <= 2:
        return DimensionEstimate(0.0, scales, [distinct] * len(scales), 1.0, metric, len(pts), True, 0.0, distinct)
    counts = [greedy_net_size(pts, r, metric) for r in scales]
    fit = stats.linregress(np.log(scales), np.log(counts))
    return DimensionEstimate(
        dim_hat=float(-fit.slope), scales=scales, counts=counts, fit_r2=float(fit.rvalue ** 2),
        metric=metric, n_points=len(pts), slope_stderr=float(fit.stderr), distinct_points=distinct,
    )
