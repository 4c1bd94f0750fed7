from __future__ import annotations

import itertools
import warnings

import numpy as np
import pytest

from kleinball.groups import complex_fuchsian, cyclic_loxodromic, real_fuchsian_triangle, sanov_group, trivial_group
from kleinball.hyperbolic import BallPoint, distance
from kleinball.orbit import (
    CACHE_ENV, OrbitCapExceeded, TruncationWarning, cached_enumerate, canonical_phase, counting_function,
    enumerate_orbit, load_orbit, min_displacement, orbital_counting, save_orbit,
)


def test_cyclic_example(cyclic10):
    assert len(cyclic10) == 21
    d = np.round(cyclic10.displacements, 9)
    assert d[0] == 0
    vals, counts = np.unique(d[1:], return_counts=True)
    assert np.allclose(vals, np.arange(1, 11)) and np.all(counts == 2)
    assert cyclic10.complete_radius == pytest.approx(10)


def test_small_examples():
    assert len(enumerate_orbit(sanov_group(), 3)) == 53
    assert len(enumerate_orbit(trivial_group(), 5, 3.0)) == 1
    with pytest.raises(ValueError):
        enumerate_orbit(sanov_group(), 0)
    with pytest.raises(ValueError):
        enumerate_orbit(sanov_group(), 3, 0.0)


def test_counting(cyclic10):
    assert orbital_counting(cyclic10, 0.0) == 1
    assert orbital_counting(cyclic10, 5.5) == 11
    c = counting_function(cyclic10, np.linspace(0, 10, 50))
    assert np.all(np.diff(c) >= 0)
    with pytest.warns(TruncationWarning):
        orbital_counting(cyclic10, 11.0)


def test_min_displacement(cyclic10):
    assert min_displacement(cyclic10) == pytest.approx(1.0)
    assert min_displacement(enumerate_orbit(trivial_group(), 3, 3.0)) == float("inf")


def test_identity_first_and_sorted(real8):
    assert real8.word(0) == () and real8.displacements[0] == 0
    assert np.allclose(real8.matrices[0], np.eye(3))
    assert np.all(np.diff(real8.displacements) >= 0)
    assert real8.complete_radius == real8.max_radius  # pruned search exhausted


def test_elements_consistent(real8, complex4, rng):
    for orbit in (real8, complex4):
        mats = np.stack([lt.matrix for lt in orbit.letters])
        inverse = [lt.inverse for lt in orbit.letters]
        for i in rng.choice(len(orbit), 200, replace=False):
            el = orbit[int(i)]
            # the image has rounded coordinates, so the distance recomputed from it
            # carries an error of about eps * cosh^2 d
            tol = 1e-10 * max(1.0, np.cosh(el.displacement) ** 2 / np.cosh(5.0) ** 2)
            assert abs(distance(BallPoint.origin(orbit.n), el.image) - el.displacement) < tol
            img = el.matrix.matrix[1:, 0] / el.matrix.matrix[0, 0]
            assert np.abs(img - el.image.coords).max() < 1e-10
            w = el.word
            assert all(inverse[x] != y for x, y in zip(w, w[1:]))
            prod = np.eye(orbit.n + 1, dtype=complex)
            for k in w:
                prod = prod @ mats[k]
            a, b = canonical_phase(prod), el.matrix.matrix
            assert np.abs(a - b).max() < 1e-8 * max(1.0, np.abs(b).max())


def _phase_gap(m1, m2):
    ip = np.vdot(m2, m1)
    lam = ip / abs(ip) if abs(ip) else 1.0
    return np.abs(m1 - lam * m2).max()


def test_dedup_soundness(real8, complex4, rng):
    for orbit in (real8, complex4):
        i = rng.integers(0, len(orbit), 2000)
        j = rng.integers(0, len(orbit), 2000)
        gaps = [_phase_gap(orbit.matrices[a], orbit.matrices[b]) for a, b in zip(i, j) if a != b]
        assert min(gaps) > orbit.dedup_tolerance
        # nearest neighbours in displacement are the hardest case
        k = np.arange(1, len(orbit) - 1, 97)
        gaps = [_phase_gap(orbit.matrices[a], orbit.matrices[a + 1]) for a in k]
        assert min(gaps) > orbit.dedup_tolerance


@pytest.mark.parametrize("make,radius", [
    (lambda: real_fuchsian_triangle(2, 3, 7), 7.0),
    (lambda: complex_fuchsian(2, 3, 7), 3.5),
    (lambda: sanov_group(), 8.0),
])
def test_dedup_stable_under_tolerance(make, radius):
    a = enumerate_orbit(make(), 10_000, radius)
    b = enumerate_orbit(make(), 10_000, radius, dedup_tol=1e-8)
    assert len(a) == len(b)


def test_brute_force_word_ball():
    """All words of length <= 7 multiplied out naively, deduplicated by rounding."""
    spec = real_fuchsian_triangle(2, 3, 7)
    gens = [g.matrix.real for g in spec.generators]
    gens += [np.linalg.inv(g) for g in gens]
    seen = {tuple(np.round(np.eye(3), 5).ravel())}
    for L in range(1, 8):
        for word in itertools.product(range(4), repeat=L):
            m = np.eye(3)
            for k in word:
                m = m @ gens[k]
            seen.add(tuple(np.round(m * np.sign(m[0, 0]), 5).ravel() + 0.0))
    orbit = enumerate_orbit(spec, 7)
    assert len(orbit) == len(seen)


def test_worker_independence():
    spec = complex_fuchsian(2, 3, 7)
    a = enumerate_orbit(spec, 10_000, 3.5, workers=1)
    b = enumerate_orbit(spec, 10_000, 3.5, workers=4)
    assert np.array_equal(a.matrices, b.matrices)
    assert np.array_equal(a.displacements, b.displacements)
    assert a.words_str() == b.words_str()
    assert a.to_csv() == b.to_csv()


def test_growth_sanity(real8, complex4):
    for orbit, rate in ((real8, 1.0), (complex4, 2.0)):
        cr = orbit.complete_radius
        radii = np.linspace(cr / 3, cr, 8)
        logn = np.log(counting_function(orbit, radii))
        # N(R) ~ c e^{rate R}; the offset log c (about log 21 for real (2,3,7)) is
        # fitted, the growth itself must track rate * R
        offset = np.mean(logn - rate * radii)
        assert np.all(np.abs(logn - rate * radii - offset) <= 0.25 * radii)
        assert abs(np.polyfit(radii, logn, 1)[0] - rate) <= 0.25


def test_cap_returns_partial():
    with pytest.raises(OrbitCapExceeded) as exc:
        enumerate_orbit(real_fuchsian_triangle(2, 3, 7), 10_000, 10.0, cap=5000)
    part = exc.value.partial
    assert 1 < len(part) <= 5000
    assert part.complete_radius < 10.0
    assert part.complete_radius <= part.displacements.max()
    full = enumerate_orbit(real_fuchsian_triangle(2, 3, 7), 10_000, part.complete_radius)
    assert orbital_counting(full, part.complete_radius) == orbital_counting(part, part.complete_radius)


def test_word_length_frontier():
    orbit = enumerate_orbit(real_fuchsian_triangle(2, 3, 7), 12)
    first_at_max = orbit.displacements[orbit.depths == 12]
    assert orbit.complete_radius == pytest.approx(first_at_max.min())


def test_csv_dump():
    orbit = enumerate_orbit(sanov_group(), 3)
    text = orbit.to_csv()
    rows = text.strip().split("\n")
    assert rows[0] == "word,displacement,re1,im1,re2,im2"
    assert len(rows) == 54
    assert rows[1].startswith(",0.0,")
    assert text == orbit.to_csv()


def test_save_load_and_cache(tmp_path, monkeypatch):
    orbit = enumerate_orbit(sanov_group(), 4)
    save_orbit(orbit, tmp_path / "o.npz")
    back, partial = load_orbit(tmp_path / "o.npz")
    assert not partial and np.array_equal(back.matrices, orbit.matrices)
    assert back.words_str() == orbit.words_str()
    monkeypatch.setenv(CACHE_ENV, str(tmp_path / "cache"))
    a = cached_enumerate(sanov_group(), 4)
    assert len(list((tmp_path / "cache").iterdir())) == 1
    b = cached_enumerate(sanov_group(), 4, workers=3)
    assert np.array_equal(a.matrices, b.matrices)
    with pytest.raises(OrbitCapExceeded):
        cached_enumerate(sanov_group(), 6, cap=100)
    with pytest.raises(OrbitCapExceeded):
        cached_enumerate(sanov_group(), 6, cap=100)


def test_elliptic_elements_kept():
    orbit = enumerate_orbit(complex_fuchsian(2, 3, 7), 10_000, 1.0)
    # the central element diag(-1, -1, 1) fixes the origin but is a distinct isometry
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        zero = orbit.displacements < 1e-9
    assert zero.sum() == 2
