import math

import numpy as np
import pytest

from anosovfam.errors import InsufficientDepthError, TruncationError, WindowExceededError
from anosovfam.families import (
    CAT_LAMBDA,
    cat_family,
    diagonal_family,
    example23_family,
    example24_family,
    identity_family,
    perturbed_cat_family,
    zeta_law,
)
from anosovfam.family import TorusMap, TorusPoint, compose, constant_family
from anosovfam.hyperbolicity import (
    SplittingFrame,
    adapted_metric,
    angles_sequence,
    collinearity_residual,
    delta_constant,
    estimate_splitting,
    frames_along_orbit,
    gathering,
    minimal_gathering_length,
    property_of_angles,
    verify_anosov,
)

from oracles import CAT, LAM, cat_eigenlines, delta_closed_form, gram_cos, random_spd

P = TorusPoint(0, (0.1, 0.2))


def _acute_sine(a, b):
    a = np.asarray(a, float) / np.linalg.norm(np.asarray(a, float))
    b = np.asarray(b, float) / np.linalg.norm(np.asarray(b, float))
    return abs(a[0] * b[1] - a[1] * b[0])


# -- splitting --------------------------------------------------------------


def test_cat_frame_matches_eigenlines():
    fr = estimate_splitting(cat_family(), 0, P, depth=20)
    vs, vu = cat_eigenlines()
    assert _acute_sine(fr.e_u, vu) < 1e-9
    assert _acute_sine(fr.e_s, vs) < 1e-9
    assert fr.theta == pytest.approx(math.pi / 2, abs=1e-12)
    assert fr.mu_local == pytest.approx(LAM, rel=1e-12)
    assert fr.kappa_local == pytest.approx(LAM, rel=1e-12)


def test_frame_unit_and_theta_definition():
    fam = perturbed_cat_family(0.05)
    fr = estimate_splitting(fam, 0, P, depth=30)
    g = fam.metric(0)
    assert float(g.norm(fr.e_s)) == pytest.approx(1.0, abs=1e-12)
    assert float(g.norm(fr.e_u)) == pytest.approx(1.0, abs=1e-12)
    assert fr.theta == math.acos(float(np.clip(g.inner(fr.e_s, fr.e_u), -1, 1)))


def test_diagonal_family_frame():
    fr = estimate_splitting(diagonal_family(2.0, window=60), 0, P, depth=30)
    np.testing.assert_allclose(fr.e_u, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(fr.e_s, [0.0, 1.0], atol=1e-12)
    assert fr.theta == pytest.approx(math.pi / 2)
    assert fr.mu_local == pytest.approx(0.5) and fr.kappa_local == pytest.approx(0.5)


def test_perturbed_frame_residual_and_depth_doubling():
    fam = perturbed_cat_family(0.05)
    fr = estimate_splitting(fam, 0, P, depth=30)
    assert fr.residual < 1e-6
    fr2 = estimate_splitting(fam, 0, P, depth=60)
    assert _acute_sine(fr.e_u, fr2.e_u) < 1e-9
    assert _acute_sine(fr.e_s, fr2.e_s) < 1e-9


def test_identity_family_rejected():
    with pytest.raises(InsufficientDepthError) as e:
        estimate_splitting(identity_family(50), 0, P, depth=30)
    assert e.value.residual == pytest.approx(1.0)


def test_depth_window_checked():
    with pytest.raises(WindowExceededError):
        estimate_splitting(cat_family(10), 0, P, depth=20)


@pytest.mark.parametrize("fam,bound", [(cat_family(), 1e-8), (perturbed_cat_family(0.05), 1e-5)])
def test_splitting_invariance(fam, bound):
    frames = frames_along_orbit(fam, P, -5, 5, depth=30)
    for n in range(-5, 5):
        rs, ru = collinearity_residual(fam, frames[n], frames[n + 1])
        assert rs <= bound and ru <= bound


def test_angle_cross_check_random_metrics():
    rng = np.random.default_rng(11)
    vs, vu = cat_eigenlines()
    for _ in range(100):
        G = random_spd(rng, cond=10.0)
        fam = constant_family(TorusMap(CAT), G, window=30)
        fr = estimate_splitting(fam, 0, P, depth=25)
        assert fr.cos_theta == pytest.approx(abs(gram_cos(G, vs, vu)), abs=1e-12)


# -- certificate ------------------------------------------------------------


def test_cat_certificate():
    fam = cat_family()
    frames = frames_along_orbit(fam, P, -3, 3)
    cert = verify_anosov(fam, frames.values(), 1.0, LAM, 10)
    assert cert.passed and cert.max_violation <= 1e-9
    assert 0 < cert.lam < 1 and cert.samples_checked == 7


def test_certificate_monotone_in_horizon():
    fam = perturbed_cat_family(0.05)
    frames = list(frames_along_orbit(fam, P, -2, 2).values())
    lam = max(max(f.mu_local, f.kappa_local) for f in frames)
    c = 1.3
    results = [verify_anosov(fam, frames, c, lam, h).passed for h in range(1, 9)]
    for h in range(len(results)):
        if results[h]:
            assert all(results[:h])


def _identity_frames(fam):
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    return [SplittingFrame(TorusPoint(i, (0.3, 0.4)), e1, e2, math.pi / 2, 1.0, 1.0, 0.0, 0) for i in (-1, 0, 1)]


@pytest.mark.parametrize("c,lam", [(1.0, 0.5), (1.0, 0.99), (1.5, 0.6), (10.0, 0.05)])
def test_identity_fails_at_horizon_one(c, lam):
    fam = identity_family(5)
    assert not verify_anosov(fam, _identity_frames(fam), c, lam, 1).passed


def test_identity_with_c_lambda_at_least_one_cannot_fail_at_horizon_one():
    # |D f e| = 1 <= c lam when c lam >= 1, so "fails for any c" needs c lam < 1
    fam = identity_family(5)
    assert verify_anosov(fam, _identity_frames(fam), 3.0, 0.5, 1).passed


def test_example23_certificate():
    a = b = 0.9
    fam = example23_family(a, b, window=80)
    frames = [estimate_splitting(fam, i, TorusPoint(i, (0.2, 0.3)), dtype=np.longdouble) for i in range(-5, 30, 3)]
    lam_t = max(LAM, a * LAM, LAM / b)
    assert verify_anosov(fam, frames, 1.0, lam_t, 20).passed
    assert not verify_anosov(fam, frames, 1.0, 0.99 * lam_t, 20).passed


# -- angles -----------------------------------------------------------------


def test_example24_cos_equals_zeta():
    law = zeta_law("harmonic", offset=2.0)
    fam = example24_family(law, window=60)
    frames = frames_along_orbit(fam, P, -20, 20)
    ang = angles_sequence(fam, frames)
    for i, c in zip(ang.indices, ang.cos):
        assert c == pytest.approx(law(i), abs=1e-12)


def test_constant_half_angles():
    fam = example24_family(zeta_law("constant", value=0.5), window=40)
    ang = angles_sequence(fam, frames_along_orbit(fam, P, -5, 5))
    ok, mu = property_of_angles(ang)
    assert ok and mu == pytest.approx(0.5, abs=1e-12)


def test_cat_angles_right():
    fam = cat_family()
    ang = angles_sequence(fam, frames_along_orbit(fam, P, -3, 3))
    np.testing.assert_allclose(ang.theta, math.pi / 2, atol=1e-12)
    assert property_of_angles(ang) == (True, 0.0)


def test_property_of_angles_harmonic_window_50():
    law = zeta_law("harmonic", offset=2.0)
    thetas = [math.acos(law(i)) for i in range(-50, 51)]
    mu_expected = 1 - 1 / 52
    ok, mu = property_of_angles(thetas, margin=1e-6)
    assert mu == pytest.approx(mu_expected, abs=1e-12)
    # at the default margin the finite window still satisfies the bound
    assert ok
    for margin in (1e-3, 0.019, 0.0193, 0.05, 0.3):
        assert property_of_angles(thetas, margin)[0] == (mu_expected < 1 - margin)


def test_property_of_angles_empty():
    with pytest.raises(ValueError):
        property_of_angles([])


# -- adapted metric ---------------------------------------------------------


def test_delta_matches_closed_form():
    for c in (0.0, 0.3, 0.9):
        for lam, z in ((0.38, 0.3), (0.5, 0.1)):
            assert delta_constant(c, lam, z) == pytest.approx(delta_closed_form(c, lam, z), rel=1e-14)


def test_adapted_metric_diagonal():
    fam = diagonal_family(2.0, window=100)
    am = adapted_metric(fam, P, [0], zeta=0.3, lam=0.5, truncation_depth=40)
    star = am.star_tensor_at[0].g
    assert abs(star[0, 1]) < 1e-12 * star[0, 0]
    assert star[0, 0] == pytest.approx(star[1, 1], rel=1e-12)
    assert am.delta_at[0] == pytest.approx((0.3 / 0.8) ** 2)
    assert am.bounds_hold


@pytest.mark.parametrize("fam,lam", [(cat_family(), CAT_LAMBDA), (perturbed_cat_family(0.05), 0.47)])
def test_adapted_metric_bounds(fam, lam):
    am = adapted_metric(fam, P, [-2, 0, 2], zeta=min(0.3, (1 - lam) / 2), lam=lam, truncation_depth=40, n_samples=1000)
    for n in am.orthogonality:
        assert am.orthogonality[n] <= 1e-10
    assert am.bounds_hold


def test_adapted_metric_truncation_error():
    with pytest.raises(TruncationError):
        adapted_metric(cat_family(), P, [0], zeta=0.3, lam=CAT_LAMBDA, truncation_depth=2)


def test_adapted_metric_zeta_range():
    with pytest.raises(ValueError):
        adapted_metric(cat_family(), P, [0], zeta=0.7, lam=CAT_LAMBDA)


# -- gathering --------------------------------------------------------------


def test_gathering_length_one_is_identity():
    fam = cat_family(10)
    assert gathering(fam, 1) is fam


def test_gathering_cat_square():
    fam = perturbed_cat_family(0.05, window=20)
    cat2 = gathering(cat_family(20), 2)
    z = np.array([0.31, 0.77])
    np.testing.assert_allclose(cat2.map(0).apply(z) % 1.0, (np.array([[5, 3], [3, 2]]) @ z) % 1.0, atol=1e-14)
    g = gathering(fam, 3)
    assert g.window == 6
    rng = np.random.default_rng(5)
    for _ in range(20):
        i = int(rng.integers(-5, 6))
        p = TorusPoint(i, rng.random(2))
        a = compose(g, i, 1, p)
        b = compose(fam, 3 * i, 3, TorusPoint(3 * i, p.coords))
        assert a.coords == b.coords
        assert g.metric(i).g.tobytes() == fam.metric(3 * i).g.tobytes()


def test_gathering_too_long():
    with pytest.raises(WindowExceededError):
        gathering(cat_family(4), 5)


def test_minimal_gathering_length_scan():
    def scan(c, lam):
        n = 1
        while c * lam**n > lam:
            n += 1
        return n

    assert minimal_gathering_length(3, 0.5) == scan(3, 0.5) == 3
    assert minimal_gathering_length(1, 0.3) == 1
    for c, lam in ((2.0, 0.9), (7.5, 0.2), (1.01, 0.99)):
        assert minimal_gathering_length(c, lam) == scan(c, lam)
