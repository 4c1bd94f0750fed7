from __future__ import annotations

import json

import numpy as np
import pytest

from kleinball.groups import CongruencePredicate, cyclic_loxodromic
from kleinball.hyperbolic import BallPoint, NotInBallError
from kleinball.orbit import enumerate_orbit
from kleinball.psh import (
    TruncatedField, certify, evaluate, filtered_convergence, first_separating_modulus, grid_csv,
    invariance_residual, levi_form_fd, max_principle_probe, partial_sums, sample_ball, submean_check,
)


@pytest.fixture(scope="module")
def cyclic20():
    return enumerate_orbit(cyclic_loxodromic(1.0), 100, 20.0)


def test_field_examples(trivial_orbit, cyclic10):
    f = TruncatedField(trivial_orbit)
    assert evaluate(f, BallPoint.origin(2)) == -1.0
    assert evaluate(f, [0.6, 0]) == pytest.approx(-0.64, abs=1e-15)
    closed = -sum(1 / np.cosh(k) ** 2 for k in range(-10, 11))
    assert closed == pytest.approx(-2.0040843190169593, abs=1e-14)
    assert evaluate(TruncatedField(cyclic10), BallPoint.origin(2)) == pytest.approx(closed, abs=1e-12)


def test_batch_matches_single(real8):
    f = TruncatedField(real8)
    pts = sample_ball(2, 7, 0.8, 3)
    batch = f.values(pts)
    single = [evaluate(f, z) for z in pts]
    assert np.array_equal(batch, single)


def test_partial_sums(real8, rng):
    f = TruncatedField(real8)
    for z in sample_ball(2, 5, 0.9, 11):
        s = partial_sums(f, z)
        assert np.all(np.diff(s) <= 0)
        assert abs(s[-1] - evaluate(f, z)) <= 1e-12
        assert s[0] == pytest.approx(np.vdot(z, z).real - 1)


def test_outside_ball(trivial_orbit):
    f = TruncatedField(trivial_orbit)
    with pytest.raises(NotInBallError):
        evaluate(f, [1.0, 0])
    with pytest.raises(NotInBallError):
        levi_form_fd(f, [0.9995, 0], [1, 0], eps=1e-3)
    with pytest.raises(ValueError):
        evaluate(f, [0.1, 0.1, 0.1])


def test_levi_trivial(trivial_orbit):
    f = TruncatedField(trivial_orbit)
    assert levi_form_fd(f, [0, 0], [1, 0]) == pytest.approx(1.0, abs=1e-6)
    assert levi_form_fd(f, [0.3, 0.1j], np.array([1, 1j]) * np.sqrt(2)) == pytest.approx(4.0, abs=1e-5)


def test_levi_nonnegative(real8, complex4):
    for orbit in (real8, complex4):
        f = TruncatedField(orbit)
        for v in ([1, 0], [0, 1], [1, 1j]):
            assert levi_form_fd(f, [0, 0], v) >= -1e-6
    f = TruncatedField(real8)
    z, v = [0.2, 0.3j], [0.5, -0.5j]
    assert abs(levi_form_fd(f, z, v, 1e-3) - levi_form_fd(f, z, v, 1e-4)) < 1e-4


def test_submean(trivial_orbit):
    f = TruncatedField(trivial_orbit)
    m = submean_check(f, [0, 0], [1, 0], 0.1)
    assert m == pytest.approx(0.01, abs=1e-12)
    assert submean_check(f, [0.2, 0.1], [0, 1], 0.2) == pytest.approx(4 * m, abs=1e-12)


def test_submean_detects_superharmonic(trivial_orbit):
    class Flipped(TruncatedField):
        def values(self, z):
            return -super().values(z)

    assert submean_check(Flipped(trivial_orbit), [0, 0], [1, 0], 0.1) < 0


def test_max_principle(trivial_orbit):
    f = TruncatedField(trivial_orbit)
    rep = max_principle_probe(f, [0, 0], [1, 0], 0.5)
    assert rep.passed
    assert rep.boundary_max == pytest.approx(-0.75)
    assert rep.center_value == -1.0 and rep.interior_max < rep.boundary_max

    class Zero(TruncatedField):
        def values(self, z):
            return np.zeros(len(np.atleast_2d(z)))

    assert max_principle_probe(Zero(trivial_orbit), [0, 0], [1, 0], 0.5).passed

    class Bump(TruncatedField):
        def values(self, z):
            return super().values(z) * -1

    assert not max_principle_probe(Bump(trivial_orbit), [0, 0], [1, 0], 0.5).passed


def test_invariance(trivial_orbit, cyclic10, cyclic20, sanov10):
    g = cyclic10.letters[0].matrix
    z = [0.1, 0.05j]
    assert invariance_residual(TruncatedField(trivial_orbit), np.eye(3), z) == 0.0
    r10 = invariance_residual(TruncatedField(cyclic10), g, z)
    r20 = invariance_residual(TruncatedField(cyclic20), g, z)
    assert r20 < r10 < 1e-6
    h = sanov10.letters[0].matrix
    seq = [invariance_residual(TruncatedField(sanov10, radius=r), h, z) for r in (6.0, 8.0, 10.0)]
    assert seq[0] > seq[1] > seq[2] and seq[2] < 1e-2


def test_filtration(trivial_orbit, sanov10):
    pts = sample_ball(2, 20, 0.7, 5)
    rows = filtered_convergence(sanov10, [3, 9, 27], pts)
    sups = [r.sup_norm for r in rows]
    assert sups[0] > sups[1] > sups[2] > 0
    assert [r.modulus for r in rows] == [3, 9, 27]
    mins = [r.kernel_min_displacement for r in rows]
    assert mins[0] < mins[1] < mins[2]
    sizes = [r.kernel_size for r in rows]
    assert sizes[0] > sizes[1] > sizes[2] >= 2
    assert filtered_convergence(trivial_orbit, [3], pts)[0].sup_norm == 0.0
    m = first_separating_modulus(sanov10, 10.0, [3 ** k for k in range(1, 7)])
    assert m == 81
    f = TruncatedField(sanov10, CongruencePredicate(m), 10.0)
    assert f.term_count == 1


def test_certificate(real8):
    cert = certify(TruncatedField(real8, radius=5.0), n_points=6, n_dirs=3)
    assert cert.min_levi >= -1e-6
    assert cert.levi_step_gap < 1e-3  # O(eps^2) with eps = 1e-3 on a Levi form of order 10
    assert cert.min_submean_margin >= -1e-9
    assert cert.max_principle_failures == 0
    assert cert.monotone_partial_sums
    data = json.loads(cert.dumps())
    assert data["field_id"] == cert.field_id and data["term_count"] == cert.term_count
    assert "R=5" in cert.field_id


def test_grid_csv(trivial_orbit):
    text = grid_csv(TruncatedField(trivial_orbit), [[0, 0], [0.6, 0]])
    lines = text.strip().split("\n")
    assert lines[0] == "re1,im1,re2,im2,F"
    assert float(lines[2].split(",")[-1]) == pytest.approx(-0.64)
