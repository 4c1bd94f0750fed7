from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import random_ball, random_isometry
from kleinball.hyperbolic import (
    BallPoint, BoundaryPoint, IsometryElement, NotInBallError, apply_isometry, distance, form_matrix,
    herm_form, in_negative_cone, koranyi_distance, lift_from_ball, project_to_ball, quadratic_form,
    verify_isometry,
)

finite = st.floats(-10, 10, allow_nan=False)
cvec = st.lists(st.tuples(finite, finite), min_size=3, max_size=3).map(
    lambda xs: np.array([complex(a, b) for a, b in xs]))


def test_herm_form_examples():
    assert herm_form([1, 0, 0], [1, 0, 0]) == -1
    assert herm_form([1, 0.5, 0], [1, 0.5, 0]) == pytest.approx(-0.75)
    # (0,1,i),(0,i,1): 1*conj(i) + i*conj(1) = -i + i
    v = herm_form([0, 1, 1j], [0, 1j, 1])
    assert v == pytest.approx(0)
    assert herm_form([0, 1j, 1], [0, 1, 1j]) == pytest.approx(np.conj(v))


def test_herm_form_length_mismatch():
    with pytest.raises(ValueError):
        herm_form([1, 0], [1, 0, 0])


@given(cvec, cvec)
def test_herm_form_conjugate_symmetric(z, w):
    assert abs(herm_form(w, z) - np.conj(herm_form(z, w))) < 1e-12 * max(1.0, np.abs(z).max() * np.abs(w).max())


def test_conjugate_symmetry_bulk(rng):
    z = rng.standard_normal((1000, 3)) + 1j * rng.standard_normal((1000, 3))
    w = rng.standard_normal((1000, 3)) + 1j * rng.standard_normal((1000, 3))
    worst = max(abs(herm_form(a, b) - np.conj(herm_form(b, a))) for a, b in zip(z, w))
    assert worst < 1e-12


def test_quadratic_form_and_cone():
    assert quadratic_form([1, 0, 0]) == -1 and in_negative_cone([1, 0, 0])
    assert quadratic_form([1, 1, 0]) == 0 and not in_negative_cone([1, 1, 0])
    assert quadratic_form([1, 0.9, 0]) == pytest.approx(-0.19)
    assert in_negative_cone([1, 0.9, 0])


def test_lift_and_project():
    assert np.array_equal(lift_from_ball(BallPoint.origin(2)), [1, 0, 0])
    assert np.allclose(project_to_ball([2, 1, 0]).coords, [0.5, 0])
    with pytest.raises(NotInBallError):
        project_to_ball([1, 1, 0])
    with pytest.raises(NotInBallError):
        project_to_ball([0, 0.1, 0])
    b = BallPoint([0.3 + 0.2j, -0.1j])
    assert np.abs(project_to_ball(lift_from_ball(b)).coords - b.coords).max() < 1e-14


def test_ballpoint_rejects_outside():
    with pytest.raises(NotInBallError):
        BallPoint([1.0, 0.0])
    with pytest.raises(NotInBallError):
        BallPoint([1 - 1e-13, 0.0])
    BallPoint([1 - 1e-11, 0.0])


def test_boundary_point_tolerance():
    BoundaryPoint([1 + 1e-10, 0])
    with pytest.raises(ValueError):
        BoundaryPoint([1 + 1e-8, 0])


def test_verify_isometry_examples():
    assert verify_isometry(np.eye(3)) == 0
    assert verify_isometry(form_matrix(2)) == 0
    assert verify_isometry(2 * np.eye(3)) == 3
    with pytest.raises(ValueError):
        IsometryElement(2 * np.eye(3))


def test_apply_isometry_su11_block():
    m = np.eye(3)
    m[:2, :2] = [[np.cosh(1), np.sinh(1)], [np.sinh(1), np.cosh(1)]]
    out = apply_isometry(IsometryElement(m), BallPoint.origin(2))
    assert np.allclose(out.coords, [np.tanh(1), 0], atol=1e-15)
    assert out.coords[0].real == pytest.approx(0.76159, abs=1e-5)


def test_apply_identity_and_composition(rng):
    for _ in range(20):
        g, h = random_isometry(rng), random_isometry(rng)
        b = BallPoint(random_ball(rng))
        assert np.allclose(apply_isometry(np.eye(3), b).coords, b.coords)
        lhs = apply_isometry(g, apply_isometry(h, b)).coords
        rhs = apply_isometry(g @ h, b).coords
        assert np.abs(lhs - rhs).max() < 1e-10


def test_distance_examples():
    o = BallPoint.origin(2)
    assert distance(o, o) == 0
    d = distance(o, BallPoint([0.5, 0]))
    assert d == pytest.approx(np.arccosh(2 / np.sqrt(3)), abs=1e-15)
    # independent route: integrate the disk metric |dz| / (1 - |z|^2) along a radius
    length, _ = integrate.quad(lambda r: 1 / (1 - r * r), 0, 0.5)
    assert d == pytest.approx(length, abs=1e-12)
    assert d == pytest.approx(0.549306, abs=1e-6)


def test_distance_formula_radial(rng):
    for r in rng.random(100) * 0.999:
        d = distance(BallPoint.origin(2), BallPoint([r, 0]))
        assert abs(np.cosh(d) ** 2 - 1 / (1 - r * r)) < 1e-10 * max(1, 1 / (1 - r * r))


def test_distance_invariance_and_symmetry(rng):
    for _ in range(50):
        g = random_isometry(rng, size=0.7)
        a, b = BallPoint(random_ball(rng)), BallPoint(random_ball(rng))
        assert distance(a, b) == distance(b, a)
        assert abs(distance(apply_isometry(g, a), apply_isometry(g, b)) - distance(a, b)) < 1e-9


def test_triangle_inequality(rng):
    worst = 0.0
    for _ in range(300):
        a, b, c = (BallPoint(random_ball(rng)) for _ in range(3))
        worst = max(worst, distance(a, c) - distance(a, b) - distance(b, c))
    assert worst <= 1e-9


def test_koranyi_examples():
    p = BoundaryPoint([1, 0])
    assert koranyi_distance(p, p) == 0
    q = BoundaryPoint([np.cos(0.1), np.sin(0.1)])
    # exact value sqrt(1 - cos 0.1); the leading Taylor term is 0.1 / sqrt(2)
    assert koranyi_distance(q, p) == pytest.approx(np.sqrt(1 - np.cos(0.1)), abs=1e-15)
    assert koranyi_distance(q, p) == pytest.approx(0.1 / np.sqrt(2), abs=5e-5)
    assert koranyi_distance(q, p) == koranyi_distance(p, q)
    c = BoundaryPoint([np.exp(0.1j), 0])
    # exact value sqrt(2 sin 0.05); leading term sqrt(0.1)
    assert koranyi_distance(c, p) == pytest.approx(np.sqrt(2 * np.sin(0.05)), abs=1e-15)
    assert koranyi_distance(c, p) == pytest.approx(np.sqrt(0.1), abs=1e-4)


@pytest.mark.parametrize("kind,expected", [("real", 1.0), ("complex", 0.5)])
def test_koranyi_scaling_exponent(kind, expected):
    theta = np.geomspace(1e-4, 1e-1, 20)
    p = BoundaryPoint([1, 0])
    if kind == "real":
        pts = [BoundaryPoint([np.cos(t), np.sin(t)]) for t in theta]
    else:
        pts = [BoundaryPoint([np.exp(1j * t), 0]) for t in theta]
    d = [koranyi_distance(q, p) for q in pts]
    slope = np.polyfit(np.log(theta), np.log(d), 1)[0]
    assert abs(slope - expected) <= 0.02


@settings(max_examples=50)
@given(st.floats(0, 0.99), st.floats(0, 2 * np.pi))
def test_points_stay_in_ball(r, phi):
    m = np.eye(3)
    m[:2, :2] = [[np.cosh(3), np.sinh(3)], [np.sinh(3), np.cosh(3)]]
    out = apply_isometry(m, BallPoint([r * np.exp(1j * phi), 0]))
    assert np.linalg.norm(out.coords) < 1
