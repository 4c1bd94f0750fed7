"""The truncated invariant field F(z) = sum (|gamma z|^2 - 1) and numerical certificates.

Each summand is -(1 - |gamma z|^2), computed by the stable quotient
(1 - |z|^2) / |(M Z)_0|^2, so F stays accurate for elements far out in the orbit.
Points are evaluated in batches; each point's terms are reduced in orbit
order, so a batch gives the same value as a single evaluation.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .groups import CongruencePredicate
from .hyperbolic import BallPoint, NotInBallError, project_to_ball
from .orbit import OrbitSet, min_displacement

_BATCH = 1 << 22  # points x terms per evaluation block
BOUNDARY_MARGIN = 1e-12


@dataclass(eq=False)
class TruncatedField:
    """F restricted to orbit elements of displacement <= radius, optionally in a congruence kernel."""

    orbit: OrbitSet
    filter: CongruencePredicate | None = None
    radius: float | None = None
    rows: np.ndarray = field(init=False, repr=False)
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mask = np.ones(len(self.orbit), dtype=bool)
        if self.radius is not None:
            mask &= self.orbit.displacements <= self.radius
        if self.filter is not None:
            mask &= self.orbit.kernel_mask(self.filter)
        mask[0] = True
        self.mask = mask
        self.rows = np.ascontiguousarray(self.orbit.first_rows[mask])

    @property
    def n(self) -> int:
        return self.orbit.n

    @property
    def term_count(self) -> int:
        return self.rows.shape[0]

    @property
    def truncation(self) -> float:
        return self.orbit.max_radius if self.radius is None else min(self.radius, self.orbit.max_radius)

    @property
    def ident(self) -> str:
        parts = [self.orbit.spec.name, f"R={self.truncation:g}"]
        if self.filter is not None:
            parts.append(f"mod {self.filter.modulus}")
        return " ".join(parts)

    def gaps(self, z) -> np.ndarray:
        """(P, N) array of 1 - |gamma z|^2 for points z of shape (P, n)."""
        z = _points(z, self.n)
        base = 1.0 - np.einsum("pi,pi->p", z, z.conj()).real
        if np.any(base <= BOUNDARY_MARGIN):
            raise NotInBallError("evaluation point outside the ball")
        lifts = np.concatenate([np.ones((z.shape[0], 1)), z], axis=1)
        w = np.abs(lifts @ self.rows.T)
        return base[:, None] / (w * w)

    def values(self, z) -> np.ndarray:
        z = _points(z, self.n)
        step = max(1, _BATCH // self.term_count)
        out = np.empty(z.shape[0])
        for s in range(0, z.shape[0], step):
            out[s:s + step] = -self.gaps(z[s:s + step]).sum(axis=1)
        return out


def _points(z, n: int) -> np.ndarray:
    if isinstance(z, BallPoint):
        z = z.coords
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z[None]
    if z.shape[-1] != n:
        raise ValueError(f"expected points in C^{n}, got shape {z.shape}")
    return z


def evaluate(field: TruncatedField, z) -> float:
    return float(field.values(z)[0])


def partial_sums(field: TruncatedField, z) -> np.ndarray:
    """S_1, ..., S_m in orbit order (ascending displacement, identity first)."""
    return np.cumsum(-field.gaps(z)[0])


def _stencil(z: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    return np.stack([z + eps * v, z - eps * v, z + 1j * eps * v, z - 1j * eps * v, z])


def default_step(z) -> float:
    """1e-3, shrunk to a tenth of the distance to the sphere."""
    r = float(np.linalg.norm(z.coords if isinstance(z, BallPoint) else z))
    return min(1e-3, (1.0 - r) / 10.0)


def levi_form_fd(field: TruncatedField, z, v, eps: float | None = None) -> float:
    """Rotation-averaged second difference, the Levi form of F at z along v up to O(eps^2)."""
    z = _points(z, field.n)[0]
    v = np.asarray(v, dtype=complex)
    eps = default_step(z) if eps is None else float(eps)
    pts = _stencil(z, v, eps)
    if np.any(np.linalg.norm(pts, axis=1) >= 1.0 - BOUNDARY_MARGIN):
        raise NotInBallError(f"stencil of step {eps:g} leaves the ball")
    f = field.values(pts)
    return float((f[0] + f[1] + f[2] + f[3] - 4.0 * f[4]) / (4.0 * eps * eps))


def submean_check(field: TruncatedField, z, v, r: float, n_samples: int = 64) -> float:
    """Mean of F over the circle z + r e^{i theta} v minus F(z)."""
    z = _points(z, field.n)[0]
    v = np.asarray(v, dtype=complex)
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    circle = z[None] + r * np.exp(1j * theta)[:, None] * v[None]
    f = field.values(np.concatenate([circle, z[None]]))
    return float(f[:-1].mean() - f[-1])


@dataclass(frozen=True)
class MaxPrincipleReport:
    interior_max: float
    boundary_max: float
    interior_argmax: complex
    boundary_argmax: complex
    center_value: float
    passed: bool

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("interior_argmax", "boundary_argmax"):
            d[k] = [d[k].real, d[k].imag]
        return d


def max_principle_probe(
    field: TruncatedField, center, direction, radius: float, grid: tuple[int, int] = (16, 64),
    tol: float = 1e-7,
) -> MaxPrincipleReport:
    """Compare F on a polar grid inside the disk {center + zeta direction : |zeta| < radius} with its boundary circle."""
    c = _points(center, field.n)[0]
    u = np.asarray(direction, dtype=complex)
    n_r, n_t = grid
    theta = 2 * np.pi * np.arange(n_t) / n_t
    rad = radius * np.arange(n_r) / n_r
    inner = (rad[:, None] * np.exp(1j * theta)[None]).ravel()
    inner = np.concatenate([[0j], inner[n_t:]])  # one copy of the centre
    outer = radius * np.exp(1j * theta)
    f_in = field.values(c[None] + inner[:, None] * u[None])
    f_out = field.values(c[None] + outer[:, None] * u[None])
    i, j = int(np.argmax(f_in)), int(np.argmax(f_out))
    return MaxPrincipleReport(
        interior_max=float(f_in[i]), boundary_max=float(f_out[j]),
        interior_argmax=complex(inner[i]), boundary_argmax=complex(outer[j]),
        center_value=float(f_in[0]), passed=bool(f_in[i] <= f_out[j] + tol),
    )


def invariance_residual(field: TruncatedField, g, z) -> float:
    """|F(g z) - F(z)|; zero for the full series, nonzero only through truncation."""
    m = g.matrix if hasattr(g, "matrix") else np.asarray(g)
    z = _points(z, field.n)[0]
    gz = project_to_ball(m @ np.concatenate([[1.0], z])).coords
    f = field.values(np.stack([gz, z]))
    return float(abs(f[0] - f[1]))


@dataclass(frozen=True)
class FiltrationRow:
    modulus: int
    sup_norm: float
    kernel_size: int  # enumerated kernel elements, identity included
    kernel_min_displacement: float


def filtered_convergence(orbit: OrbitSet, moduli, samples, radius: float | None = None) -> list[FiltrationRow]:
    """sup over samples of |F_m(z) - (|z|^2 - 1)| for each modulus m.

    F_m keeps only enumerated elements congruent to the identity mod m; the
    identity term equals |z|^2 - 1, so the difference is the sum over the
    nontrivial kernel elements.
    """
    if not orbit.spec.integer_entries:
        raise ValueError("congruence filtration needs integer generator entries")
    pts = _points(samples, orbit.n)
    out = []
    for m in moduli:
        f = TruncatedField(orbit, CongruencePredicate(int(m)), radius)
        if f.term_count > 1:
            lead = 1.0 - np.einsum("pi,pi->p", pts, pts.conj()).real
            sup = float(np.max(np.abs(f.values(pts) + lead)))
        else:
            sup = 0.0
        sub = orbit if radius is None else orbit.within(radius)
        out.append(FiltrationRow(int(m), sup, f.term_count, min_displacement(sub, CongruencePredicate(int(m)))))
    return out


def first_separating_modulus(orbit: OrbitSet, radius: float, chain) -> int | None:
    """First m along ``chain`` whose kernel meets the enumerated radius ball only in the identity.

    The search stops at the first success; no minimality claim is made.
    """
    sub = orbit.within(radius)
    for m in chain:
        if min_displacement(sub, CongruencePredicate(int(m))) == float("inf"):
            return int(m)
    return None


def sample_ball(n: int, count: int, radius: float, seed: int) -> np.ndarray:
    """Uniform points of the Euclidean ball of the given radius in C^n."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, 2 * n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    x *= radius * rng.random(count)[:, None] ** (1.0 / (2 * n))
    return x[:, :n] + 1j * x[:, n:]


def unit_directions(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass(frozen=True)
class Certificate:
    field_id: str
    samples: int
    directions: int
    min_levi: float
    levi_step_gap: float  # max |L(eps1) - L(eps2)| over all probes
    min_submean_margin: float
    max_principle_failures: int
    max_invariance_residual: float
    monotone_partial_sums: bool
    truncation: float
    term_count: int

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def certify(
    field: TruncatedField,
    n_points: int = 50,
    n_dirs: int = 10,
    seed: int = 0,
    sample_radius: float = 0.6,
    steps: tuple[float, float] = (1e-3, 1e-4),
    submean_radius: float = 0.05,
    n_disks: int = 10,
) -> Certificate:
    """Levi form, submean, maximum principle, invariance and monotonicity probes on random samples."""
    n = field.n
    pts = sample_ball(n, n_points, sample_radius, seed)
    dirs = unit_directions(n, n_points * n_dirs, seed + 1).reshape(n_points, n_dirs, n)
    levi_min, gap, sub_min = np.inf, 0.0, np.inf
    for z, vs in zip(pts, dirs):
        for v in vs:
            vals = [levi_form_fd(field, z, v, min(e, (1 - np.linalg.norm(z)) / 10)) for e in steps]
            levi_min = min(levi_min, *vals)
            gap = max(gap, abs(vals[0] - vals[1]))
            sub_min = min(sub_min, submean_check(field, z, v, submean_radius))
    fails = 0
    centres = sample_ball(n, n_disks, sample_radius / 2, seed + 2)
    for c, u in zip(centres, unit_directions(n, n_disks, seed + 3)):
        rep = max_principle_probe(field, c, u, 0.25, grid=(8, 32))
        fails += not rep.passed
    monotone = all(bool(np.all(np.diff(partial_sums(field, z)) <= 0)) for z in pts)
    res = 0.0
    for lt in field.orbit.letters:
        for z in pts[:10]:
            res = max(res, invariance_residual(field, lt.matrix, z))
    return Certificate(
        field_id=field.ident, samples=n_points, directions=n_dirs, min_levi=float(levi_min),
        levi_step_gap=float(gap), min_submean_margin=float(sub_min), max_principle_failures=fails,
        max_invariance_residual=float(res), monotone_partial_sums=monotone,
        truncation=float(field.truncation), term_count=field.term_count,
    )


def grid_csv(field: TruncatedField, points) -> str:
    """CSV dump of F on a list of points: re/im per coordinate, then F."""
    pts = _points(points, field.n)
    vals = field.values(pts)
    head = [f"{p}{k}" for k in range(1, field.n + 1) for p in ("re", "im")] + ["F"]
    lines = [",".join(head)]
    for z, f in zip(pts, vals):
        row = [repr(float(x)) for c in z for x in (c.real, c.imag)] + [repr(float(f))]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
