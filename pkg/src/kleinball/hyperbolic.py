"""Complex hyperbolic space as the unit ball B^n in C^n.

Points of B^n are affine charts z = (z_1, ..., z_n) of negative lines for the
Hermitian form <z, w> = -z_0 conj(w_0) + sum_k z_k conj(w_k) on C^{n+1}.
Isometries are (n+1) x (n+1) matrices preserving that form, acting
projectively.  With this normalization d(0, z) satisfies
cosh^2 d(0, z) = 1 / (1 - |z|^2), so complex geodesics have curvature -4 and
totally real planes curvature -1.

Most functions accept plain array-likes; the small value classes below only
exist to pin down invariants at API boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SCALAR_TOL = 1e-12
MATRIX_TOL = 1e-9


class NotInBallError(ValueError):
    """Raised when a vector or point does not represent a point of B^n."""


def form_matrix(n: int) -> np.ndarray:
    """The Gram matrix J = diag(-1, 1, ..., 1) of size n + 1."""
    j = np.ones(n + 1)
    j[0] = -1.0
    return np.diag(j)


def _vec(z) -> np.ndarray:
    v = np.asarray(z, dtype=complex)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def herm_form(z, w) -> complex:
    """Evaluate -z_0 conj(w_0) + sum_{k>=1} z_k conj(w_k)."""
    z, w = _vec(z), _vec(w)
    if z.shape != w.shape:
        raise ValueError(f"length mismatch: {z.shape[0]} vs {w.shape[0]}")
    prod = z * np.conj(w)
    return complex(prod[1:].sum() - prod[0])


def quadratic_form(z) -> float:
    q = herm_form(z, z)
    if abs(q.imag) > SCALAR_TOL * max(1.0, abs(q.real)):
        raise ValueError(f"quadratic form has imaginary part {q.imag}")
    return q.real


def in_negative_cone(z) -> bool:
    return quadratic_form(z) < 0


@dataclass(frozen=True, eq=False)
class BallPoint:
    """A point of B^n given by its affine coordinates."""

    coords: np.ndarray

    def __post_init__(self):
        c = _vec(self.coords).copy()
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)
        r = float(np.linalg.norm(c))
        if not r < 1.0 - SCALAR_TOL:
            raise NotInBallError(f"|z| = {r!r} is not inside the unit ball")

    @classmethod
    def origin(cls, n: int) -> BallPoint:
        return cls(np.zeros(n, dtype=complex))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __repr__(self):
        return f"BallPoint({np.array2string(self.coords, precision=6)})"


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = _vec(self.coords).copy()
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)
        r = float(np.linalg.norm(c))
        if abs(r - 1.0) > MATRIX_TOL:
            raise ValueError(f"|p| = {r!r} is not on the unit sphere")

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def verify_isometry(m) -> float:
    """Return ||M* J M - J||_inf (max-entry norm)."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValueError(f"expected a square matrix of size >= 2, got {m.shape}")
    j = form_matrix(m.shape[0] - 1)
    return float(np.abs(m.conj().T @ j @ m - j).max())


@dataclass(frozen=True, eq=False)
class IsometryElement:
    """A matrix in U(n, 1), checked at construction.

    Products of many elements drift off U(n, 1) roughly in proportion to
    their squared norm; those are built with ``check=False`` and carry their
    measured residual instead.
    """

    matrix: np.ndarray
    unitarity_residual: float = field(default=float("nan"))
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        res = verify_isometry(m)
        object.__setattr__(self, "unitarity_residual", res)
        if self.check and res > MATRIX_TOL:
            raise ValueError(f"matrix is not in U(n,1): residual {res:.3e}")

    @property
    def n(self) -> int:
        return self.matrix.shape[0] - 1

    def __matmul__(self, other: IsometryElement) -> IsometryElement:
        return IsometryElement(self.matrix @ other.matrix, check=False)

    def inverse(self) -> IsometryElement:
        j = form_matrix(self.n)
        return IsometryElement(j @ self.matrix.conj().T @ j, check=False)


def lift_from_ball(b: BallPoint) -> np.ndarray:
    return np.concatenate([[1.0 + 0j], b.coords])


def project_to_ball(z) -> BallPoint:
    z = _vec(z)
    if abs(z[0]) < SCALAR_TOL or not quadratic_form(z) < 0:
        raise NotInBallError("vector is not in the negative cone")
    return BallPoint(z[1:] / z[0])


def _matrix(g) -> np.ndarray:
    return g.matrix if isinstance(g, IsometryElement) else np.asarray(g, dtype=complex)


def apply_isometry(g, b: BallPoint) -> BallPoint:
    return project_to_ball(_matrix(g) @ lift_from_ball(b))


def distance(b1: BallPoint, b2: BallPoint) -> float:
    """Bergman distance: cosh^2 d = |<Z,W>|^2 / (q(Z) q(W)) for lifts Z, W."""
    z, w = lift_from_ball(b1), lift_from_ball(b2)
    c2 = abs(herm_form(z, w)) ** 2 / (quadratic_form(z) * quadratic_form(w))
    return float(np.arccosh(np.sqrt(max(c2, 1.0))))


def koranyi_distance(p: BoundaryPoint, q: BoundaryPoint) -> float:
    """|1 - <p, q>|^{1/2} with the standard Hermitian product of C^n."""
    return float(np.sqrt(abs(1.0 - np.vdot(q.coords, p.coords))))


def radial_coords(z: np.ndarray) -> np.ndarray:
    """Vectorized helper: points (..., n) -> unit vectors along them."""
    return z / np.linalg.norm(z, axis=-1, keepdims=True)
