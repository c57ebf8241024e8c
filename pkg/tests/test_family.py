import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosovfam.errors import DomainError, WindowExceededError
from anosovfam.families import cat_family, perturbed_cat_family, perturbed_cat_map
from anosovfam.family import (
    MetricTensor,
    NsdsFamily,
    Perturbation,
    TorusMap,
    TorusPoint,
    compose,
    constant_family,
    derivative_cocycle,
    distance,
    injectivity_radius,
    inverse_map,
    reduce_mod1,
)

from oracles import CAT, brute_lattice_min, brute_systole, fd_jacobian, preimage_by_contraction, random_spd, sine_map

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


# -- points and metrics -----------------------------------------------------


@given(st.floats(-50, 50, allow_nan=False), st.floats(-50, 50, allow_nan=False))
def test_point_coords_reduced(x, y):
    p = TorusPoint(3, (x, y))
    assert all(0.0 <= c < 1.0 for c in p.coords)


def test_reduce_tiny_negative_to_zero():
    assert reduce_mod1(np.array([-1e-18, 1.0]))[0] == 0.0
    assert reduce_mod1(np.array([-1e-18, 1.0]))[1] == 0.0


def test_metric_invariants():
    with pytest.raises(DomainError):
        MetricTensor([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(DomainError):
        MetricTensor([[1.0, 2.0], [2.0, 1.0]])


def test_distance_examples():
    g = MetricTensor(np.eye(2))
    assert distance(g, TorusPoint(0, (0.9, 0.0)), TorusPoint(0, (0.1, 0.0))) == pytest.approx(0.2, abs=1e-15)
    assert distance(g, TorusPoint(0, (0.3, 0.7)), TorusPoint(0, (0.3, 0.7))) == 0.0
    g4 = MetricTensor(np.diag([4.0, 1.0]))
    assert distance(g4, TorusPoint(0, (0.0, 0.0)), TorusPoint(0, (0.1, 0.0))) == pytest.approx(0.2, abs=1e-15)


def test_distance_component_mismatch():
    with pytest.raises(DomainError):
        distance(MetricTensor(np.eye(2), 0), TorusPoint(0, (0, 0)), TorusPoint(1, (0, 0)))


def test_distance_matches_brute_force_on_skewed_metrics():
    rng = np.random.default_rng(1)
    for _ in range(60):
        G = random_spd(rng, cond=200.0)
        g = MetricTensor(G)
        a, b = rng.random(2), rng.random(2)
        assert float(g.torus_distance(a, b)) == pytest.approx(brute_lattice_min(G, b - a), rel=1e-12, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(unit, unit, unit, unit, unit, unit)
def test_distance_is_a_metric(x1, y1, x2, y2, x3, y3):
    g = MetricTensor([[2.0, 0.7], [0.7, 1.0]])
    p, q, r = TorusPoint(0, (x1, y1)), TorusPoint(0, (x2, y2)), TorusPoint(0, (x3, y3))
    assert distance(g, p, q) == distance(g, q, p)
    assert distance(g, p, r) <= distance(g, p, q) + distance(g, q, r) + 1e-12


def test_nearest_lift_tie_goes_to_smaller_lattice_vector():
    g = MetricTensor(np.eye(2))
    np.testing.assert_array_equal(g.shortest_displacement(np.array([0.5, 0.0])), [-0.5, 0.0])


def test_injectivity_radius_examples():
    assert injectivity_radius(MetricTensor(np.eye(2))) == pytest.approx(0.5)
    assert injectivity_radius(MetricTensor(np.diag([0.64, 0.64]))) == pytest.approx(0.4)
    assert injectivity_radius(MetricTensor(np.diag([4.0, 1.0]))) == pytest.approx(0.5)


def test_injectivity_radius_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(40):
        G = random_spd(rng, cond=500.0)
        assert injectivity_radius(MetricTensor(G)) == pytest.approx(0.5 * brute_systole(G), rel=1e-12)


# -- maps -------------------------------------------------------------------


def test_torus_map_invariants():
    with pytest.raises(DomainError):
        TorusMap([[2, 0], [0, 1]])
    with pytest.raises(DomainError):
        TorusMap([[2.5, 1], [1, 1]])
    with pytest.raises(DomainError):
        perturbed_cat_map(0.2)  # eps * 2 pi > smallest singular value of A


def test_jacobian_matches_finite_differences():
    f = TorusMap(CAT, [Perturbation(0.7, (1, 2), 1, 0.3), Perturbation(0.4, (2, -1), 0, 1.1)], 0.01)
    rng = np.random.default_rng(2)
    for z in rng.random((10, 2)):
        np.testing.assert_allclose(f.jacobian(z), fd_jacobian(f.apply, z), atol=1e-8)


def test_displacement_matches_difference():
    f = perturbed_cat_map(0.05)
    rng = np.random.default_rng(3)
    z = rng.random((20, 2))
    dz = 1e-3 * rng.normal(size=(20, 2))
    np.testing.assert_allclose(f.displacement(z, dz), f.apply(z + dz) - f.apply(z), atol=1e-14)


def test_perturbation_matches_oracle():
    f = perturbed_cat_map(0.05)
    z = np.array([0.37, 0.81])
    np.testing.assert_allclose(f.apply(z), sine_map(CAT, 0.05, z), atol=1e-15)


# -- compose / cocycle ------------------------------------------------------


def test_compose_examples():
    fam = cat_family(10)
    assert compose(fam, 0, 0, TorusPoint(0, (0.3, 0.7))).coords == (0.3, 0.7)
    q = compose(fam, 0, 1, TorusPoint(0, (0.25, 0.5)))
    assert q.component == 1
    np.testing.assert_allclose(q.coords, (0.0, 0.75), atol=1e-15)
    np.testing.assert_allclose(compose(fam, 0, 2, TorusPoint(0, (0.25, 0.5))).coords, (0.75, 0.75), atol=1e-15)


def test_compose_window():
    fam = cat_family(3)
    with pytest.raises(WindowExceededError):
        compose(fam, 0, 4, TorusPoint(0, (0.1, 0.1)))
    with pytest.raises(DomainError):
        compose(fam, 1, 1, TorusPoint(0, (0.1, 0.1)))


@settings(max_examples=40, deadline=None)
@given(unit, unit, st.integers(-4, 4), st.integers(-4, 4))
def test_compose_additive(x, y, n, m):
    fam = perturbed_cat_family(0.05, window=10)
    p = TorusPoint(0, (x, y))
    a = compose(fam, 0, n + m, p)
    b = compose(fam, n, m, compose(fam, 0, n, p))
    g = fam.metric(n + m)
    steps = abs(n) + abs(m) + 1
    # one-step errors are amplified by at most |A| ~ 2.6 per step
    assert distance(g, a, b) <= 1e-12 * 3.0**steps


def test_cocycle_examples():
    fam = cat_family(5)
    np.testing.assert_array_equal(derivative_cocycle(fam, 0, 0, TorusPoint(0, (0.2, 0.4))), np.eye(2))
    np.testing.assert_allclose(derivative_cocycle(fam, 0, 2, TorusPoint(0, (0.2, 0.4))), [[5, 3], [3, 2]])
    eps = 0.05
    pf = perturbed_cat_family(eps, window=5)
    np.testing.assert_allclose(
        derivative_cocycle(pf, 0, 1, TorusPoint(0, (0.0, 0.0))), [[2 + 2 * math.pi * eps, 1], [1, 1]], atol=1e-15
    )


def test_cocycle_identity_random():
    fam = perturbed_cat_family(0.05, window=12)
    rng = np.random.default_rng(4)
    for _ in range(100):
        p = TorusPoint(0, rng.random(2))
        n, m = rng.integers(-3, 4, size=2)
        lhs = derivative_cocycle(fam, 0, n + m, p)
        rhs = derivative_cocycle(fam, n, m, compose(fam, 0, n, p)) @ derivative_cocycle(fam, 0, n, p)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())


# -- inversion --------------------------------------------------------------


def test_inverse_map_examples():
    fam = cat_family(2)
    p = inverse_map(fam.map(0), fam.metric(0), TorusPoint(1, (0.0, 0.75)))
    np.testing.assert_allclose(p.coords, (0.25, 0.5), atol=1e-15)
    assert p.component == 0


def test_inverse_map_perturbed_against_contraction_oracle():
    f = perturbed_cat_map(0.05)
    g = MetricTensor(np.eye(2))
    q = TorusPoint(1, f.apply(np.array([0.3, 0.3])))
    p = inverse_map(f, g, q)
    np.testing.assert_allclose(p.coords, (0.3, 0.3), atol=1e-12)
    oracle = preimage_by_contraction(CAT, 0.05, q.xy)
    assert g.torus_distance(p.xy, oracle) < 1e-12


@settings(max_examples=50, deadline=None)
@given(unit, unit)
def test_round_trip(x, y):
    fam = perturbed_cat_family(0.05, window=3)
    for i in (-2, 0, 2):
        p = TorusPoint(i, (x, y))
        back = compose(fam, i + 1, -1, compose(fam, i, 1, p))
        assert distance(fam.metric(i), p, back) <= 1e-10


def test_determinism():
    a = perturbed_cat_family(0.05, window=4)
    b = perturbed_cat_family(0.05, window=4)
    z = np.array([0.123, 0.456])
    for i in range(-4, 5):
        assert a.map(i).apply(z).tobytes() == b.map(i).apply(z).tobytes()
        assert a.metric(i) == b.metric(i)
    assert a.map(2) is a.map(2)


def test_window_exceeded_on_metric():
    with pytest.raises(WindowExceededError):
        constant_family(TorusMap(CAT), window=2).metric(3)


def test_family_rejects_bad_metric():
    fam = NsdsFamily(lambda i: TorusMap(CAT), lambda i: [[1.0, 2.0], [2.0, 1.0]], 3)
    with pytest.raises(DomainError):
        fam.metric(0)
