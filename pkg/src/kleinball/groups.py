"""Generator-matrix fixtures for discrete subgroups of U(n, 1).

Fuchsian fixtures start from an SL(2, R) triangle group and push it into
U(n, 1) in two ways: through the adjoint representation onto a totally real
plane (curvature -1), or through the Cayley transform onto a complex geodesic
(curvature -4).  The same SL(2, R) word therefore has twice the displacement
in the real embedding that it has in the complex one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .hyperbolic import MATRIX_TOL, SCALAR_TOL, IsometryElement, form_matrix

# symmetric-square basis: (x0, x1, x2) <-> [[x1, x2 + x0], [x2 - x0, -x1]],
# so -det = -x0^2 + x1^2 + x2^2 and the point i of the upper half plane
# corresponds to (1, 0, 0).
_SL2_BASIS = [
    np.array([[0.0, 1.0], [-1.0, 0.0]]),
    np.array([[1.0, 0.0], [0.0, -1.0]]),
    np.array([[0.0, 1.0], [1.0, 0.0]]),
]
_CAYLEY = np.array([[1.0, -1.0j], [1.0, 1.0j]])
_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class GroupSpec:
    name: str
    ambient_dim: int
    generators: tuple[IsometryElement, ...]
    integer_entries: bool = False
    expected_delta: float | None = None
    provenance: str = ""

    def __post_init__(self):
        gens = tuple(
            g if isinstance(g, IsometryElement) else IsometryElement(g) for g in self.generators
        )
        object.__setattr__(self, "generators", gens)
        if not gens:
            raise ValueError("generator list is empty")
        for g in gens:
            if g.n != self.ambient_dim:
                raise ValueError(f"generator of size {g.n + 1} in ambient dimension {self.ambient_dim}")
            if g.unitarity_residual > MATRIX_TOL:
                raise ValueError(f"generator residual {g.unitarity_residual:.3e} exceeds {MATRIX_TOL}")
        if self.integer_entries:
            for g in gens:
                if np.abs(g.matrix - np.round(g.matrix.real)).max() > SCALAR_TOL:
                    raise ValueError("integer_entries set but a generator has non-integer entries")

    @property
    def is_real(self) -> bool:
        return all(np.abs(g.matrix.imag).max() == 0 for g in self.generators)

    def to_json(self) -> dict:
        def enc(x):
            return int(x) if self.integer_entries else float(x)

        return {
            "name": self.name,
            "n": self.ambient_dim,
            "generators": [
                [[[enc(v.real), enc(v.imag)] for v in row] for row in g.matrix] for g in self.generators
            ],
            "integer_entries": self.integer_entries,
            "expected_delta": self.expected_delta,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data: dict) -> GroupSpec:
        known = {"name", "n", "generators", "integer_entries", "expected_delta", "provenance"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GroupSpec fields: {sorted(unknown)}")
        gens = []
        for g in data["generators"]:
            a = np.asarray(g, dtype=float)
            if a.ndim != 3 or a.shape[2] != 2:
                raise ValueError("generators must be lists of rows of [re, im] pairs")
            gens.append(a[..., 0] + 1j * a[..., 1])
        return cls(
            name=data["name"],
            ambient_dim=int(data["n"]),
            generators=tuple(gens),
            integer_entries=bool(data.get("integer_entries", False)),
            expected_delta=data.get("expected_delta"),
            provenance=data.get("provenance", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def load(cls, path) -> GroupSpec:
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CongruencePredicate:
    """Membership in the kernel of reduction mod ``modulus`` (matrix = I mod m)."""

    modulus: int

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError("modulus must be >= 2")

    def holds(self, matrices: np.ndarray) -> np.ndarray:
        """Vectorized test on an array of integer-valued matrices (..., d, d)."""
        m = np.asarray(matrices)
        ints = np.round(m.real)
        if np.abs(m - ints).max(initial=0.0) > 1e-6:
            raise ValueError("congruence test needs integer matrices")
        d = m.shape[-1]
        return np.all(np.mod(ints - np.eye(d), self.modulus) == 0, axis=(-2, -1))

    def __call__(self, matrix) -> bool:
        return bool(self.holds(np.asarray(matrix)[None])[0])


# --- SL(2, R) embeddings -------------------------------------------------------


def _check_unimodular(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (2, 2):
        raise ValueError("expected a 2x2 matrix")
    if abs(np.linalg.det(a) - 1.0) > MATRIX_TOL:
        raise ValueError(f"det = {np.linalg.det(a)!r}, expected 1")
    return a


def _embed(block: np.ndarray, n: int) -> np.ndarray:
    k = block.shape[0]
    if n + 1 < k:
        raise ValueError(f"ambient dimension {n} too small for a {k}x{k} block")
    m = np.eye(n + 1, dtype=complex)
    m[:k, :k] = block
    return m


def sl2r_to_so21_matrix(a) -> np.ndarray:
    """Adjoint action X -> A X A^{-1} on sl(2, R), as a real 3x3 matrix."""
    a = _check_unimodular(a)
    ainv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]])
    cols = []
    for x in _SL2_BASIS:
        y = a @ x @ ainv
        cols.append([(y[0, 1] - y[1, 0]) / 2, y[0, 0], (y[0, 1] + y[1, 0]) / 2])
    return np.array(cols).T


def sl2r_to_so21(a, n: int = 2) -> IsometryElement:
    return IsometryElement(_embed(sl2r_to_so21_matrix(a), n))


def sl2r_to_su11_matrix(a) -> np.ndarray:
    """Cayley conjugate of A, written in the (z0, z1) ordering of the form."""
    a = _check_unimodular(a)
    s = _CAYLEY @ a @ np.linalg.inv(_CAYLEY)
    return _SWAP @ s @ _SWAP


def sl2r_to_su11(a, n: int = 1) -> IsometryElement:
    return IsometryElement(_embed(sl2r_to_su11_matrix(a), n))


# --- triangle groups ------------------------------------------------------------

_REFLECT = np.array([[-1.0, 0.0], [0.0, 1.0]])  # z -> -conj(z)


def _rot_about_i(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, s], [-s, c]])


def _conj(g, x):
    return g @ x @ np.linalg.inv(g)


def _fixed_point(m: np.ndarray) -> complex:
    a, b, c, d = m.ravel()
    root = np.sqrt(complex((a - d) ** 2 + 4 * b * c))
    z = ((a - d) + root) / (2 * c)
    return z if z.imag > 0 else ((a - d) - root) / (2 * c)


def _to_klein(z: complex) -> complex:
    w = (z - 1j) / (z + 1j)
    return 2 * w / (1 + abs(w) ** 2)


def _from_klein(k: complex) -> complex:
    w = k / (1 + np.sqrt(1 - abs(k) ** 2))
    return 1j * (1 + w) / (1 - w)


def triangle_sl2(p: int, q: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Rotation generators of the orientation-preserving (p, q, r) triangle group.

    The first is a rotation by 2pi/p, the second by 2pi/q, and their product
    a rotation by 2pi/r.  The group is conjugated so that i (the origin after
    either embedding) is the Klein-model centroid of the triangle, which no
    nontrivial element fixes.
    """
    if min(p, q, r) < 2 or q * r + p * r + p * q >= p * q * r:  # 1/p + 1/q + 1/r >= 1, exactly
        raise ValueError(f"({p},{q},{r}) is not a hyperbolic triangle")
    al, be, ga = np.pi / p, np.pi / q, np.pi / r
    side = np.arccosh((np.cos(ga) + np.cos(al) * np.cos(be)) / (np.sin(al) * np.sin(be)))
    # vertex P = i, vertex Q = i e^side, side PQ on the imaginary axis
    shift = np.diag([np.exp(side / 2), np.exp(-side / 2)])
    refl_pr = _conj(_rot_about_i(al), _REFLECT)
    refl_qr = _conj(shift @ _rot_about_i(be), _REFLECT)
    a = refl_pr @ _REFLECT
    b = _REFLECT @ refl_qr
    if abs(abs(np.trace(a @ b)) - 2 * np.cos(ga)) > 1e-9:
        raise AssertionError("triangle construction failed")
    verts = [_fixed_point(a), _fixed_point(b), _fixed_point(a @ b)]
    c = _from_klein(sum(_to_klein(v) for v in verts) / 3)
    sy = np.sqrt(c.imag)
    t = np.array([[1 / sy, -c.real / sy], [0.0, sy]])
    return _conj(t, a), _conj(t, b)


def real_fuchsian_triangle(p: int, q: int, r: int, n: int = 2) -> GroupSpec:
    if n < 2:
        raise ValueError("a totally real plane needs n >= 2")
    a, b = triangle_sl2(p, q, r)
    return GroupSpec(
        name=f"real-fuchsian:{p},{q},{r}",
        ambient_dim=n,
        generators=(sl2r_to_so21(a, n), sl2r_to_so21(b, n)),
        expected_delta=1.0,
        provenance=f"({p},{q},{r}) triangle group on a totally real plane",
    )


def complex_fuchsian(p: int, q: int, r: int, n: int = 2) -> GroupSpec:
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = triangle_sl2(p, q, r)
    return GroupSpec(
        name=f"complex-fuchsian:{p},{q},{r}",
        ambient_dim=n,
        generators=(sl2r_to_su11(a, n), sl2r_to_su11(b, n)),
        expected_delta=2.0,
        provenance=f"({p},{q},{r}) triangle group on the complex line z2=...=zn=0",
    )


def cyclic_loxodromic(t: float, n: int = 2) -> GroupSpec:
    if not t > 0:
        raise ValueError("translation length must be positive")
    block = np.array([[np.cosh(t), np.sinh(t)], [np.sinh(t), np.cosh(t)]])
    return GroupSpec(
        name=f"cyclic:{t!r}",
        ambient_dim=n,
        generators=(IsometryElement(_embed(block, n)),),
        expected_delta=0.0,
        provenance=f"cyclic group of a loxodromic with translation length {t!r}",
    )


def sanov_group(n: int = 2) -> GroupSpec:
    gens = (sl2r_to_so21([[1, 2], [0, 1]], n), sl2r_to_so21([[1, 0], [2, 1]], n))
    return GroupSpec(
        name="sanov",
        ambient_dim=n,
        generators=gens,
        integer_entries=True,
        expected_delta=1.0,
        provenance="free group <[[1,2],[0,1]], [[1,0],[2,1]]> on a totally real plane",
    )


def trivial_group(n: int = 2) -> GroupSpec:
    return GroupSpec(name="trivial", ambient_dim=n, generators=(np.eye(n + 1),),
                     integer_entries=True, expected_delta=0.0, provenance="identity only")


def reproject(m: np.ndarray, iters: int = 4) -> np.ndarray:
    """Pull a near-isometry back onto U(n, 1) by Newton iteration on M* J M = J."""
    j = form_matrix(m.shape[0] - 1)
    eye = np.eye(m.shape[0])
    for _ in range(iters):
        s = j @ m.conj().T @ j @ m
        m = m @ (3 * eye - s) / 2
    return m


def quasi_fuchsian_perturb(spec: GroupSpec, eps: float, seed: int = 0) -> GroupSpec:
    """Conjugate the first generator by exp(eps K), K random in u(n, 1).

    No claim is made that the result is discrete.
    """
    if eps > 0.5:
        raise ValueError("eps > 0.5: perturbation too large to be meaningful")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return spec
    d = spec.ambient_dim + 1
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    j = form_matrix(spec.ambient_dim)
    k = x - j @ x.conj().T @ j
    k /= np.abs(k).max()
    h = reproject(expm(eps * k))
    g0 = reproject(h @ spec.generators[0].matrix @ np.linalg.inv(h))
    return replace(
        spec,
        name=f"{spec.name}+qf({eps!r},{seed})",
        generators=(IsometryElement(g0),) + spec.generators[1:],
        integer_entries=False,
        expected_delta=None,
        provenance=(
            f"{spec.provenance}; first generator conjugated by exp({eps!r} K), seed {seed}; "
            "critical exponent expected strictly greater than 1 (lower bound only); "
            "discreteness not verified"
        ),
    )


def congruence_filter(spec: GroupSpec, m: int) -> CongruencePredicate:
    if not spec.integer_entries:
        raise ValueError(f"{spec.name}: congruence filtration needs integer entries")
    pred = CongruencePredicate(m)
    if all(pred(g.matrix) for g in spec.generators):
        raise ValueError(f"every generator of {spec.name} is the identity mod {m}")
    return pred
