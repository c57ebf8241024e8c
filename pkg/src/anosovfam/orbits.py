"""
Exponential decay rates of orbit pairs, local stable/unstable sets, the
coincidence conditions, the expansivity probe and metric-equivalence nesting.

Orbit pairs are propagated as a base orbit plus a displacement: the second
point is ``p + d`` and ``d`` is pushed with ``map.displacement`` so tiny
separations never suffer cancellation.  Displacements are reduced to the
shortest lattice representative after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, NotUniformlyEquivalentError
from .family import InverseMap, MetricTensor, NsdsFamily, TorusPoint, as_real, injectivity_radius
from .graph_transform import ManifoldResult, RateTable, build_charted_step, rate_table
from .hyperbolicity import SplittingFrame, delta_constant, estimate_splitting, frames_along_orbit, orbit_points

UNDERFLOW = 1e-14

_DTYPES = {"double": np.float64, "extended": np.longdouble}


def _dtype(precision):
    try:
        return _DTYPES[precision]
    except KeyError:
        raise DomainError(f"precision must be one of {sorted(_DTYPES)}, got {precision!r}") from None


def _eps_fn(family: NsdsFamily, epsilon) -> Callable[[int], float]:
    if epsilon is None:
        return lambda j: injectivity_radius(family.metric(j))
    if callable(epsilon):
        return epsilon
    e = float(epsilon)
    return lambda j: e


def separation_trace(family: NsdsFamily, i: int, xy, offset, steps: int, direction: int, dtype=np.longdouble) -> np.ndarray:
    """Distances ``d(f^n x, f^n (x + offset))`` for ``n = 0..steps`` (``direction=-1``: backward)."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    lo, hi = (i, i + steps) if direction > 0 else (i - steps, i)
    pts = orbit_points(family, i, xy, lo, hi, dtype)
    g = family.metric(i)
    d = g.shortest_displacement(np.asarray(offset, dtype=dtype))
    out = [float(g.norm(d))]
    j = i
    for _ in range(steps):
        if direction > 0:
            d = family.map(j).displacement(pts[j], d)
            j += 1
        else:
            d = InverseMap(family.map(j - 1)).displacement(pts[j], d)
            j -= 1
        g = family.metric(j)
        d = g.shortest_displacement(d)
        out.append(float(g.norm(d)))
    return np.array(out)


def tail_slope(trace: np.ndarray) -> tuple:
    """``max_{n in [N/2, N]} (1/n) log(d_n / d_0)`` on the part of ``trace`` above the underflow floor.

    Returns ``(slope, usable_horizon, underflow)``; the slope is ``-inf`` when
    no positive distance exists after index 0.
    """
    trace = np.asarray(trace, dtype=float)
    below = np.nonzero(trace < UNDERFLOW)[0]
    cut = int(below[0]) if below.size else len(trace)
    underflow = bool(below.size)
    N = cut - 1
    if N < 1 or trace[0] < UNDERFLOW:
        return -math.inf, max(N, 0), underflow
    n = np.arange(max(1, math.ceil(N / 2)), N + 1)
    return float(np.max(np.log(trace[n] / trace[0]) / n)), N, underflow


def _log(trace):
    with np.errstate(divide="ignore"):
        return [float(x) for x in np.log(np.where(trace >= UNDERFLOW, trace, np.nan))]


def _first_exit(trace, eps_values):
    bad = np.nonzero(trace >= eps_values)[0]
    return int(bad[0]) if bad.size else None


@dataclass
class DecayReport:
    p: TorusPoint
    q: TorusPoint
    horizon: int
    forward: np.ndarray
    backward: np.ndarray
    theta: float
    omega: float
    forward_horizon: int
    backward_horizon: int
    underflow_forward: bool
    underflow_backward: bool
    ball_forward: bool
    ball_backward: bool
    exit_forward: int | None
    exit_backward: int | None

    @property
    def forward_log(self) -> list:
        return _log(self.forward)

    @property
    def backward_log(self) -> list:
        return _log(self.backward)

    @property
    def coincident(self) -> bool:
        return self.forward[0] < UNDERFLOW

    @property
    def in_stable(self) -> bool:
        return self.coincident or (self.ball_forward and self.theta < 0)

    @property
    def in_unstable(self) -> bool:
        return self.coincident or (self.ball_backward and self.omega < 0)

    def as_dict(self) -> dict:
        return {
            "p": [self.p.component, *map(float, self.p.xy)],
            "q": [self.q.component, *map(float, self.q.xy)],
            "horizon": self.horizon,
            "theta": self.theta,
            "omega": self.omega,
            "forward_horizon": self.forward_horizon,
            "backward_horizon": self.backward_horizon,
            "underflow_forward": self.underflow_forward,
            "underflow_backward": self.underflow_backward,
            "ball_forward": self.ball_forward,
            "ball_backward": self.ball_backward,
            "exit_forward": self.exit_forward,
            "exit_backward": self.exit_backward,
            "in_stable": self.in_stable,
            "in_unstable": self.in_unstable,
        }


def decay_report(
    family: NsdsFamily,
    p: TorusPoint,
    q: TorusPoint | None = None,
    epsilon=None,
    horizon: int = 20,
    *,
    offset=None,
    precision: str = "extended",
) -> DecayReport:
    """Forward and backward separation of the orbits of ``p`` and ``q``.

    ``q`` may instead be given as a tangent ``offset`` at ``p`` (``q = p + offset``).
    ``epsilon`` is a constant, a callable ``index -> radius`` or ``None`` for the
    injectivity radius of each component.  ``theta``/``omega`` are the tail
    slopes of the forward/backward traces normalised by the initial distance.
    """
    i = p.component
    family.check(i - horizon, i + horizon)
    dtype = _dtype(precision)
    if offset is None:
        if q is None:
            raise ValueError("give q or offset")
        if q.component != i:
            raise DomainError(f"p and q lie on different components ({i} vs {q.component})")
        offset = family.metric(i).shortest_displacement(np.asarray(q.xy, dtype=dtype) - np.asarray(p.xy, dtype=dtype))
    else:
        offset = np.asarray(offset, dtype=dtype)
        q = TorusPoint(i, np.asarray(p.xy, float) + offset.astype(float))
    xy = np.asarray(p.xy, dtype=dtype)
    fw = separation_trace(family, i, xy, offset, horizon, 1, dtype)
    bw = separation_trace(family, i, xy, offset, horizon, -1, dtype)
    eps = _eps_fn(family, epsilon)
    ef = np.array([eps(i + n) for n in range(horizon + 1)])
    eb = np.array([eps(i - n) for n in range(horizon + 1)])
    theta, nf, uf = tail_slope(fw)
    omega, nb, ub = tail_slope(bw)
    xf, xb = _first_exit(fw, ef), _first_exit(bw, eb)
    return DecayReport(p, q, horizon, fw, bw, theta, omega, nf, nb, uf, ub, xf is None, xb is None, xf, xb)


# ---------------------------------------------------------------------------


@dataclass
class SubsetCheck:
    reports: list
    control: DecayReport | None
    log_lam_tilde: float
    side: str

    @property
    def memberships(self) -> list:
        attr = "in_unstable" if self.side == "u" else "in_stable"
        slope = "omega" if self.side == "u" else "theta"
        return [getattr(r, attr) and getattr(r, slope) <= self.log_lam_tilde for r in self.reports]

    @property
    def fraction(self) -> float:
        m = self.memberships
        return sum(m) / len(m) if m else 1.0

    @property
    def control_rejected(self) -> bool | None:
        if self.control is None:
            return None
        return not (self.control.in_unstable if self.side == "u" else self.control.in_stable)


def manifold_subset_check(
    family: NsdsFamily,
    manifold: ManifoldResult,
    n_samples: int = 20,
    epsilon=None,
    horizon: int = 10,
    seed: int = 0,
    control_spacings: float | None = 10.0,
    precision: str = "extended",
) -> SubsetCheck:
    """Sample points on the computed manifold at index 0 and test local-set membership.

    Unstable-manifold samples must belong to the local unstable set with backward
    slope at most ``log lam_tilde``; stable ones mirror this forward.  The control
    point is displaced ``control_spacings`` grid spacings along the transverse
    direction and should be rejected.
    """
    side = manifold.side
    gr = manifold.graphs.graphs[0]
    cloud = manifold.lifted[0]
    anchor = manifold.orbit[0]
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(cloud), size=min(n_samples, len(cloud)), replace=False)
    p = TorusPoint(0, anchor)
    reports = [
        decay_report(family, p, epsilon=epsilon, horizon=horizon, offset=cloud[j] - anchor, precision=precision)
        for j in sorted(pick)
    ]
    control = None
    if control_spacings:
        h = float(gr.grid[1] - gr.grid[0])
        fr = manifold.frames[0]
        transverse = fr.e_s if side == "u" else fr.e_u
        along = fr.e_u if side == "u" else fr.e_s
        j = gr.center + gr.M // 4
        base = gr.grid[j] * along + gr.values[j] * transverse
        control = decay_report(
            family, p, epsilon=epsilon, horizon=horizon, offset=base + control_spacings * h * transverse, precision=precision
        )
    return SubsetCheck(reports, control, math.log(manifold.rates.lam_tilde), side)


# ---------------------------------------------------------------------------


@dataclass
class CoincidenceReport:
    omega_angle: float
    theta_angle: float
    omega_tilde: float
    theta_tilde: float
    satisfied: bool
    horizon: int
    omega_terms: list = field(default_factory=list)
    theta_terms: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "omega_angle": self.omega_angle,
            "theta_angle": self.theta_angle,
            "omega_tilde": self.omega_tilde,
            "theta_tilde": self.theta_tilde,
            "cccc_satisfied": self.satisfied,
            "horizon": self.horizon,
            "omega_terms": self.omega_terms,
            "theta_terms": self.theta_terms,
        }


def coincidence_quantities(
    frames: Mapping[int, SplittingFrame],
    rates: RateTable,
    horizon: int,
    zeta: float | None = None,
    tolerance: float = 1e-12,
) -> CoincidenceReport:
    """Angle limits and the exponential margins, with limits replaced by tail extrema.

    ``omega_tilde = min_{n in tail} (1/n) log((Delta_{-n}/2) / (varsigma_0 ... varsigma_{-n+1}))``
    and ``theta_tilde`` likewise with ``Delta_n`` and ``tau_0 ... tau_{n-1}``.
    """
    lam = rates.lam
    zeta = (1.0 - lam) / 2.0 if zeta is None else float(zeta)
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    D = {n: delta_constant(frames[n].cos_theta, lam, zeta) for n in range(-horizon, horizon + 1)}
    tail = range(math.ceil(horizon / 2), horizon + 1)
    om_terms, th_terms = [], []
    ls = lt = 0.0
    for n in range(1, horizon + 1):
        ls += math.log(rates.varsigma[-n + 1])
        lt += math.log(rates.tau[n - 1])
        if n in tail:
            om_terms.append((math.log(D[-n] / 2.0) - ls) / n)
            th_terms.append((math.log(D[n] / 2.0) - lt) / n)
    om_angle = max(frames[-n].theta for n in tail)
    th_angle = max(frames[n].theta for n in tail)
    om_t, th_t = min(om_terms), min(th_terms)
    ok = min(om_t, th_t) >= -tolerance and min(om_angle, th_angle) > 0
    return CoincidenceReport(om_angle, th_angle, om_t, th_t, bool(ok), horizon, om_terms, th_terms)


def coincidence_for_family(
    family: NsdsFamily, p: TorusPoint, horizon: int, lam: float | None = None, gamma=None, lam_tilde=None,
    zeta=None, depth: int = 30, splitting_tol: float = 1e-6, tolerance: float = 1e-12,
):
    """Frames, rates and the coincidence report along the orbit of ``p``."""
    frames = frames_along_orbit(family, p, -horizon, horizon, depth, splitting_tol)
    pts = orbit_points(family, p.component, p.xy, -horizon, horizon)
    steps = {n: build_charted_step(family, pts, frames, n) for n in range(-horizon, horizon)}
    if lam is None:
        lam = max(max(s.mu, s.kappa) for s in steps.values())
    rates = rate_table(steps, lam, gamma, lam_tilde)
    return coincidence_quantities(frames, rates, horizon, zeta, tolerance), frames, rates


# ---------------------------------------------------------------------------


@dataclass
class ProbeResult:
    witness: tuple | None
    forward: np.ndarray | None
    backward: np.ndarray | None
    forward_slope: float | None
    backward_slope: float | None
    tested: int
    thresholds: tuple

    def as_dict(self) -> dict:
        return {
            "witness": None if self.witness is None else [list(map(float, z)) for z in self.witness],
            "forward_slope": self.forward_slope,
            "backward_slope": self.backward_slope,
            "tested": self.tested,
            "thresholds": list(self.thresholds),
        }


def expansivity_probe(
    family: NsdsFamily,
    sample_count: int = 8,
    horizon: int = 40,
    seed: int = 0,
    separation: float = 0.01,
    thresholds=(1e-1, 1e-2),
    start=None,
    depth: int = 30,
    backward_horizon: int | None = 20,
) -> ProbeResult:
    """Look for distinct points whose orbits approach each other in both time directions.

    Candidates are ``y = x + separation * e_u(x)`` for ``x`` drawn at random
    (``start`` is tried first).  A pair is a witness when both tail slopes are
    negative and both traces end below ``threshold * d_0`` for every threshold.
    Backward iteration along ``e_u`` amplifies rounding in the transverse
    component like ``1/lambda^n``, hence the separate ``backward_horizon``.
    The last candidate's traces are returned when no witness is found.
    """
    if separation == 0:
        raise DomainError("the probe needs distinct points (separation != 0)")
    rng = np.random.default_rng(seed)
    starts = [] if start is None else [np.asarray(start, float)]
    starts += list(rng.random((sample_count, 2)))
    fw = bw = None
    sf = sb = None
    for k, x in enumerate(starts, 1):
        fr = estimate_splitting(family, 0, TorusPoint(0, x), depth=depth, dtype=np.longdouble)
        off = separation * np.asarray(fr.e_u, dtype=np.longdouble)
        xy = np.asarray(x, dtype=np.longdouble)
        fw = separation_trace(family, 0, xy, off, horizon, 1)
        bw = separation_trace(family, 0, xy, off, backward_horizon or horizon, -1)
        sf, sb = tail_slope(fw)[0], tail_slope(bw)[0]
        ends_f = fw[fw >= UNDERFLOW][-1] / fw[0]
        ends_b = bw[bw >= UNDERFLOW][-1] / bw[0]
        low = min(thresholds)
        if sf < 0 and sb < 0 and ends_f < low and ends_b < low:
            y = x + separation * np.asarray(fr.e_u, float)
            return ProbeResult((x, y), fw, bw, sf, sb, k, tuple(thresholds))
    return ProbeResult(None, fw, bw, sf, sb, len(starts), tuple(thresholds))


# ---------------------------------------------------------------------------


def equivalence_bounds(g: MetricTensor, h: MetricTensor) -> tuple:
    """Best ``(k, K)`` with ``k ||v||_h <= ||v||_g <= K ||v||_h``."""
    w = np.linalg.eigvals(np.linalg.solve(h.g, g.g)).real
    return float(math.sqrt(w.min())), float(math.sqrt(w.max()))


@dataclass
class NestingReport:
    k: float
    K: float
    epsilon: dict
    epsilon_prime: dict
    samples: int
    implications_hold: bool
    slopes_a: list
    slopes_b: list

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "K": self.K,
            "samples": self.samples,
            "implications_hold": self.implications_hold,
            "slopes_a": self.slopes_a,
            "slopes_b": self.slopes_b,
        }


def metric_equivalence_nesting(
    family: NsdsFamily,
    metric_b,
    p: TorusPoint,
    horizon: int = 20,
    epsilon=None,
    k: float | None = None,
    K: float | None = None,
    spread: float = 10.0,
    n_samples: int = 12,
    seed: int = 0,
) -> NestingReport:
    """Check that local stable sets for the family's metrics nest inside those for ``metric_b``.

    ``metric_b`` is a callable ``index -> MetricTensor`` or a positive scale for
    ``g' = scale * g``.  Unless given, ``k`` and ``K`` are the exact constants at
    the anchor component widened by ``spread``; they are then verified on every
    component within the horizon.  Radii for ``metric_b`` are ``eps'_n = eps_n / k``
    (half the ``metric_b`` diameter of the ``eps_n`` ball).

    Raises
    ------
    NotUniformlyEquivalentError
        When some component violates ``k ||v||' <= ||v|| <= K ||v||'``.
    """
    if not callable(metric_b):
        s = float(metric_b)
        if s <= 0:
            raise DomainError("metric scale must be positive")
        metric_b = lambda j: family.metric(j).scaled(s)
    i = p.component
    if k is None or K is None:
        k0, K0 = equivalence_bounds(family.metric(i), metric_b(i))
        k = k0 / spread if k is None else k
        K = K0 * spread if K is None else K
    for j in range(i - horizon, i + horizon + 1):
        lo, hi = equivalence_bounds(family.metric(j), metric_b(j))
        if lo < k * (1 - 1e-12):
            raise NotUniformlyEquivalentError(j, lo, k, K)
        if hi > K * (1 + 1e-12):
            raise NotUniformlyEquivalentError(j, hi, k, K)
    fam_b = NsdsFamily(family.map, lambda j: metric_b(j).with_component(j), family.window, f"{family.name}'")
    eps = _eps_fn(family, epsilon)
    eps_b = lambda j: eps(j) / k
    rng = np.random.default_rng(seed)
    fr = estimate_splitting(family, i, p, dtype=np.longdouble)
    holds = True
    sa, sb = [], []
    for t in range(n_samples):
        s = rng.uniform(-0.5, 0.5) * eps(i)
        if t % 2:
            off = s * np.asarray(fr.e_s, dtype=np.longdouble)
        else:
            off = (rng.random(2) - 0.5).astype(np.longdouble) * eps(i)
        if not np.any(off):
            continue
        ra = decay_report(family, p, epsilon=eps, horizon=horizon, offset=off)
        rb = decay_report(fam_b, p, epsilon=eps_b, horizon=horizon, offset=off)
        sa.append(ra.theta)
        sb.append(rb.theta)
        if ra.in_stable and not rb.in_stable:
            holds = False
    span = range(i - horizon, i + horizon + 1)
    return NestingReport(
        k, K, {j: eps(j) for j in span}, {j: eps_b(j) for j in span}, len(sa), holds, sa, sb
    )
