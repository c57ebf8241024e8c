import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anosovfam.errors import DomainError, NotUniformlyEquivalentError, WindowExceededError
from anosovfam.families import (
    CAT,
    CAT_LAMBDA,
    cat_family,
    example23_family,
    example24_family,
    perturbed_cat_family,
    zeta_law,
)
from anosovfam.family import TorusMap, TorusPoint, constant_family
from anosovfam.graph_transform import RateTable, stable_manifold, unstable_manifold
from anosovfam.hyperbolicity import SplittingFrame, delta_constant, estimate_splitting
from anosovfam.orbits import (
    UNDERFLOW,
    coincidence_for_family,
    coincidence_quantities,
    decay_report,
    expansivity_probe,
    manifold_subset_check,
    metric_equivalence_nesting,
    separation_trace,
    tail_slope,
)

from oracles import LAM, cat_eigenlines

P = TorusPoint(0, (0.1, 0.2))
LOG_LAM = math.log(LAM)


def _unit(v):
    v = np.asarray(v, dtype=np.longdouble)
    return v / np.sqrt((v * v).sum())


# -- tail slopes ------------------------------------------------------------


def test_tail_slope_geometric():
    tr = 0.01 * 0.5 ** np.arange(21)
    s, N, uf = tail_slope(tr)
    assert s == pytest.approx(math.log(0.5), abs=1e-12) and N == 20 and not uf


def test_tail_slope_is_max_over_tail():
    rng = np.random.default_rng(0)
    tr = np.exp(np.cumsum(rng.normal(-0.3, 0.5, 31)))
    s, N, _ = tail_slope(tr)
    n = np.arange(15, 31)
    assert s == float(np.max(np.log(tr[n] / tr[0]) / n))


def test_tail_slope_underflow_truncates():
    tr = np.array([1.0, 1e-3, 1e-6, 1e-9, 1e-12, 1e-15, 1e-18])
    s, N, uf = tail_slope(tr)
    assert uf and N == 4
    assert s == pytest.approx(math.log(1e-12) / 4)


def test_tail_slope_zero_trace():
    s, N, uf = tail_slope(np.zeros(5))
    assert s == -math.inf and uf


# -- decay reports ----------------------------------------------------------


def test_coincident_points():
    r = decay_report(cat_family(), P, P, horizon=10)
    assert not r.forward.any() and not r.backward.any()
    assert r.coincident and r.underflow_forward and r.underflow_backward
    assert r.in_stable and r.in_unstable


def test_cat_stable_offset_rate():
    vs, _ = cat_eigenlines()
    r = decay_report(cat_family(), P, offset=0.001 * _unit(vs), horizon=20)
    assert r.theta == pytest.approx(LOG_LAM, abs=0.05)
    assert r.in_stable and not r.in_unstable


def test_cat_slope_consistency_order_one_over_n():
    # in extended precision along an exact eigenline, d_n = lambda^n d_0 up to rounding
    vs, _ = cat_eigenlines()
    tr = separation_trace(cat_family(), 0, np.array([0.1, 0.2], dtype=np.longdouble), 0.001 * _unit(vs), 12, 1)
    assert tail_slope(tr)[0] == pytest.approx(LOG_LAM, abs=1 / 12)


def test_cat_unstable_offset_leaves_ball():
    _, vu = cat_eigenlines()
    r = decay_report(cat_family(), P, offset=0.001 * _unit(vu), epsilon=0.1, horizon=20)
    bound = math.ceil(math.log(0.1 / 0.001) / math.log(1 / LAM))
    assert not r.ball_forward and r.exit_forward <= bound
    assert not r.in_stable


def test_decay_needs_window():
    with pytest.raises(WindowExceededError):
        decay_report(cat_family(10), P, offset=[0.001, 0.0], horizon=20)


def test_decay_components_must_match():
    with pytest.raises(DomainError):
        decay_report(cat_family(), P, TorusPoint(1, (0.1, 0.2)), horizon=5)


def test_scale_invariance_of_exponents():
    g = np.array([[1.3, 0.2], [0.2, 0.8]])
    a = constant_family(TorusMap(CAT), g, window=30)
    b = constant_family(TorusMap(CAT), 4 * g, window=30)
    rng = np.random.default_rng(2)
    for _ in range(10):
        off = 0.002 * (rng.random(2) - 0.5)
        ra = decay_report(a, P, offset=off, horizon=15, epsilon=10.0)
        rb = decay_report(b, P, offset=off, horizon=15, epsilon=10.0)
        assert ra.theta == pytest.approx(rb.theta, abs=1e-12)
        assert ra.omega == pytest.approx(rb.omega, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.005, 0.2), st.floats(1.0, 5.0))
def test_enlarging_epsilon_keeps_membership(x, y, e1, factor):
    fam = perturbed_cat_family(0.05, window=30)
    off = 0.01 * np.array([x, y])
    small = decay_report(fam, P, offset=off, epsilon=e1, horizon=10)
    big = decay_report(fam, P, offset=off, epsilon=e1 * factor, horizon=10)
    assert (not small.in_stable) or big.in_stable
    assert (not small.in_unstable) or big.in_unstable


def test_membership_continuity_in_base_point():
    # q_m taken on the computed local manifolds of p_m -> p: verdicts stabilise to the verdict at p
    fam = perturbed_cat_family(0.05, window=40)
    for build, attr in ((stable_manifold, "in_stable"), (unstable_manifold, "in_unstable")):
        verdicts, offsets = [], []
        for m in (None, 3, 4, 5, 6):
            xy = np.array(P.xy) + (0 if m is None else 10.0**-m) * np.array([1.0, -0.7])
            res = build(fam, TorusPoint(0, xy), N=6, M=64, check_properties=False)
            off = res.lifted[0][48] - res.orbit[0]
            r = decay_report(fam, TorusPoint(0, res.orbit[0]), offset=off, horizon=10)
            verdicts.append(getattr(r, attr))
            offsets.append(off)
        assert all(verdicts)
        # q_m -> q as p_m -> p
        assert np.linalg.norm(offsets[-1] - offsets[0]) < 1e-5


# -- manifold subset check --------------------------------------------------


@pytest.fixture(scope="module")
def perturbed_u():
    return unstable_manifold(perturbed_cat_family(0.05), P, N=8, M=200)


def test_cat_subset_check():
    fam = cat_family()
    res = unstable_manifold(fam, P, N=8, M=128)
    chk = manifold_subset_check(fam, res, n_samples=20)
    assert chk.fraction == 1.0
    assert all(r.omega <= chk.log_lam_tilde for r in chk.reports)
    assert chk.control_rejected


def test_perturbed_subset_check(perturbed_u):
    fam = perturbed_cat_family(0.05)
    chk = manifold_subset_check(fam, perturbed_u, n_samples=50)
    assert chk.fraction == 1.0 and chk.control_rejected


def test_perturbed_stable_side_forward_decay():
    fam = perturbed_cat_family(0.05)
    res = stable_manifold(fam, P, N=8, M=200, check_properties=False)
    chk = manifold_subset_check(fam, res, n_samples=20)
    assert all(r.theta <= chk.log_lam_tilde for r in chk.reports)
    assert chk.fraction == 1.0 and chk.control_rejected


def test_anchor_is_member(perturbed_u):
    fam = perturbed_cat_family(0.05)
    r = decay_report(fam, P, offset=np.zeros(2), horizon=10)
    assert r.in_unstable and r.in_stable


# -- coincidence ------------------------------------------------------------


def _const_frames(theta, H):
    e1 = np.array([1.0, 0.0])
    e2 = np.array([math.cos(theta), math.sin(theta)])
    return {n: SplittingFrame(TorusPoint(n, (0.0, 0.0)), e1, e2, theta, 0.3, 0.3, 0.0, 0) for n in range(-H, H + 1)}


def test_coincidence_constant_closed_form():
    H, theta, tau, vs, lam, zeta = 30, 1.1, 0.7, 0.6, 0.3, 0.2
    frames = _const_frames(theta, H)
    rt = RateTable(lam, (1 / lam - 1) / 2, 0.5, 0.8)
    rt.tau = {n: tau for n in range(-H, H)}
    rt.varsigma = {n: vs for n in range(-H, H)}
    rep = coincidence_quantities(frames, rt, H, zeta)
    D = delta_constant(math.cos(theta), lam, zeta)
    tail = range(15, 31)
    assert rep.omega_angle == rep.theta_angle == theta
    assert rep.omega_tilde == pytest.approx(min(-math.log(vs) + math.log(D / 2) / n for n in tail), rel=1e-12)
    assert rep.theta_tilde == pytest.approx(min(-math.log(tau) + math.log(D / 2) / n for n in tail), rel=1e-12)
    assert rep.satisfied
    # the limit as the window grows
    big = 4000
    frames = _const_frames(theta, big)
    rt.tau = {n: tau for n in range(-big, big)}
    rt.varsigma = {n: vs for n in range(-big, big)}
    assert coincidence_quantities(frames, rt, big, zeta).omega_tilde == pytest.approx(
        -math.log(vs), abs=abs(math.log(D / 2)) / (big // 2) + 1e-12
    )


def test_coincidence_satisfied_iff_definition():
    frames = _const_frames(0.9, 10)
    rt = RateTable(0.3, (1 / 0.3 - 1) / 2, 0.5, 0.8)
    for tau in (0.2, 0.99, 1.5):
        rt.tau = {n: tau for n in range(-10, 10)}
        rt.varsigma = {n: 0.5 for n in range(-10, 10)}
        rep = coincidence_quantities(frames, rt, 10, 0.2)
        assert rep.satisfied == (min(rep.omega_tilde, rep.theta_tilde) >= -1e-12)


def test_coincidence_example24_tail_angle():
    law = zeta_law("geometric", base=0.5, ratio=0.5)
    fam = example24_family(law, window=60)
    rep, frames, rates = coincidence_for_family(fam, P, 10)
    tail = range(5, 11)
    assert rep.omega_angle == pytest.approx(max(math.acos(law(-n)) for n in tail), abs=1e-9)
    assert rep.theta_angle == pytest.approx(max(math.acos(law(n)) for n in tail), abs=1e-9)
    assert not rep.satisfied


def test_coincidence_cat():
    rep, _, _ = coincidence_for_family(cat_family(), P, 40)
    assert rep.satisfied
    assert rep.omega_angle == pytest.approx(math.pi / 2) and rep.theta_angle == pytest.approx(math.pi / 2)


# -- expansivity probe ------------------------------------------------------


def test_probe_example23_witness():
    fam = example23_family(0.3, 0.3, window=80)
    res = expansivity_probe(fam, horizon=40, start=(0.2, 0.3))
    assert res.witness is not None
    assert res.forward_slope < 0 and res.backward_slope < 0
    x, y = res.witness
    assert not np.allclose(x, y)


def test_probe_flat_cat_none():
    res = expansivity_probe(cat_family(), horizon=40, start=(0.2, 0.3))
    assert res.witness is None and res.forward_slope > 0


def test_probe_distinct_points():
    with pytest.raises(DomainError):
        expansivity_probe(cat_family(), separation=0.0)


# -- metric nesting ---------------------------------------------------------


def test_nesting_same_metric():
    fam = perturbed_cat_family(0.05, window=40)
    rep = metric_equivalence_nesting(fam, 1.0, P, horizon=10, k=1.0, K=1.0, n_samples=6)
    assert rep.implications_hold
    assert rep.epsilon == rep.epsilon_prime
    assert rep.slopes_a == pytest.approx(rep.slopes_b, abs=1e-12)


def test_nesting_scaled_metric():
    fam = cat_family(40)
    rep = metric_equivalence_nesting(fam, 4.0, P, horizon=15, spread=1.0, n_samples=8)
    # ||v|| = k ||v||' with ||v||' = 2 ||v||
    assert rep.k == pytest.approx(0.5) and rep.K == pytest.approx(0.5)
    assert rep.implications_hold
    for a, b in zip(rep.slopes_a, rep.slopes_b):
        assert a == pytest.approx(b, abs=1e-12)


def test_nesting_example23_not_uniform():
    fam = example23_family(0.9, 0.9, window=60)
    flat = lambda j: fam.metric(0).with_component(j)
    with pytest.raises(NotUniformlyEquivalentError):
        metric_equivalence_nesting(fam, flat, P, horizon=25)
