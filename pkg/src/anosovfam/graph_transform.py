"""
Graph transform along an anchor orbit.

Charts are flat: the exponential map at an orbit point ``p_n`` is
``(v, w) -> p_n + v e_s + w e_u (mod 1)`` with ``(e_s, e_u)`` the unit splitting
frame, so the charted map ``f~_n`` is the planar displacement of ``f_n`` written
in frame coordinates.  ``F_n`` is its diagonal part at 0 and ``(a_n, b_n)`` the
remainder.  Local unstable manifolds are graphs ``v = phi_n(w)`` over the
``e_u`` axis; the stable side is obtained from the reflected inverse family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import (
    CapViolationError,
    ContractViolationError,
    CoverageError,
    HyperbolicityMarginError,
    NonConvergenceError,
    ScheduleInfeasibleError,
)
from .family import InverseMap, MetricTensor, NsdsFamily, TorusPoint, injectivity_radius, reduce_mod1
from .hyperbolicity import SplittingFrame, delta_constant, frames_along_orbit, orbit_points

Remainder = Callable[[np.ndarray, np.ndarray], tuple]


def _zero_remainder(v, w):
    z = np.zeros(np.broadcast(np.asarray(v), np.asarray(w)).shape)
    return z, z.copy()


# ---------------------------------------------------------------------------
# charted steps


@dataclass
class ChartedStep:
    """``f~_n(v, w) = (F_ss v + a_n(v, w), F_uu w + b_n(v, w))`` in frame coordinates.

    ``remainder`` evaluates ``(a_n, b_n)`` on arrays.  ``offdiag`` records how far the
    frame Jacobian is from diagonal (the splitting residual); that part is carried
    by the remainder, except for linear maps where the remainder is set to zero.
    """

    n: int
    F: np.ndarray
    remainder: Remainder = _zero_remainder
    domain_radius: float = math.inf
    target_radius: float = math.inf
    lipschitz: float = 1.0
    offdiag: float = 0.0
    linear: bool = False
    image: Callable | None = field(default=None, repr=False)

    @property
    def mu(self) -> float:
        return abs(float(self.F[0, 0]))

    @property
    def kappa(self) -> float:
        return 1.0 / abs(float(self.F[1, 1]))

    def __call__(self, v, w):
        a, b = self.remainder(v, w)
        return self.F[0, 0] * np.asarray(v) + a, self.F[1, 1] * np.asarray(w) + b


def charted_step_from_matrix(n: int, F, remainder: Remainder | None = None, **kw) -> ChartedStep:
    """Step with a given diagonal ``F`` and optional remainder (for synthetic experiments)."""
    F = np.asarray(F, dtype=float)
    return ChartedStep(n, np.diag(np.diag(F)), remainder or _zero_remainder, linear=remainder is None, **kw)


def build_charted_step(
    family: NsdsFamily, points: Mapping[int, np.ndarray], frames: Mapping[int, SplittingFrame], n: int
) -> ChartedStep:
    """Charted map between the frames at ``p_n`` and ``p_{n+1}``."""
    f = family.map(n)
    p = np.asarray(points[n], dtype=float)
    Q0 = frames[n].matrix()
    Q1 = frames[n + 1].matrix()
    Q1i = np.linalg.inv(Q1)
    J = f.jacobian(p)
    Fm = Q1i @ J @ Q0
    F = np.diag(np.diag(Fm))
    off = float(max(abs(Fm[0, 1]), abs(Fm[1, 0])) / np.abs(Fm).max())
    linear = bool(f.is_linear)

    def image(v, w):
        x = np.stack(np.broadcast_arrays(np.asarray(v, float), np.asarray(w, float)), axis=-1)
        return f.displacement(p, x @ Q0.T)

    if linear:
        rem = _zero_remainder
    else:

        def rem(v, w):
            v = np.asarray(v, float)
            w = np.asarray(w, float)
            y = image(v, w) @ Q1i.T
            return y[..., 0] - F[0, 0] * v, y[..., 1] - F[1, 1] * w

    g0, g1 = family.metric(n), family.metric(n + 1)
    L = float(f.lipschitz_bound(g0, g1))
    return ChartedStep(
        n, F, rem, target_radius=injectivity_radius(g1), lipschitz=L, offdiag=off, linear=linear, image=image
    )


def check_cap(step: ChartedStep, delta: float, metric_next: MetricTensor, alpha: float, samples: int = 21) -> float:
    """Largest image norm over the cone ``{|v| <= alpha |w|, |w| <= delta}``; raises on overflow."""
    if step.image is None:
        return 0.0
    w = np.linspace(-delta, delta, samples)
    t = np.linspace(-1.0, 1.0, samples)
    W, T = np.meshgrid(w, t)
    V = alpha * np.abs(W) * T
    norms = metric_next.norm(step.image(V, W))
    worst = float(norms.max())
    if worst >= step.target_radius:
        raise CapViolationError(step.n, worst, step.target_radius)
    return worst


def estimate_sigma(step: ChartedStep, delta: float, grid_density: int = 33, safety: float = 1.25, rel_step: float = 1e-4):
    """Sampled ``sup |D a_n|, |D b_n|`` over ``[-delta, delta]^2`` times ``safety``.

    Derivatives are central differences; the grid has odd density so the origin
    is a node.  Returns 0 exactly for steps with zero remainder.
    """
    if step.linear:
        return 0.0
    m = int(grid_density) | 1
    x = np.linspace(-delta, delta, m)
    V, W = np.meshgrid(x, x)
    h = rel_step * delta
    ap, bp = step.remainder(V + h, W)
    am, bm = step.remainder(V - h, W)
    a_v, b_v = (ap - am) / (2 * h), (bp - bm) / (2 * h)
    ap, bp = step.remainder(V, W + h)
    am, bm = step.remainder(V, W - h)
    a_w, b_w = (ap - am) / (2 * h), (bp - bm) / (2 * h)
    sup = max(float(np.hypot(a_v, a_w).max()), float(np.hypot(b_v, b_w).max()))
    return safety * sup


# ---------------------------------------------------------------------------
# rates


def default_gamma(lam: float) -> float:
    return (lam * lam + 1.0) / 2.0


def default_lambda_tilde(lam: float) -> float:
    return (3.0 + lam) / 4.0


def omega_branches(mu: float, kappa: float, alpha: float, gamma: float, lam: float, lam_tilde: float) -> tuple:
    """The three terms whose minimum is ``omega``; call with ``mu`` and ``kappa`` swapped for ``varpi``."""
    ki = 1.0 / kappa
    return (
        (ki - mu) * alpha / (1.0 + alpha) ** 2,
        (gamma * ki - mu) / ((1.0 + alpha) * (1.0 + gamma)),
        (2.0 * lam * lam_tilde * ki - 1.0 - lam) / (1.0 + lam),
    )


@dataclass
class RateTable:
    lam: float
    alpha: float
    gamma: float
    lam_tilde: float
    mu: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=dict)
    omega: dict = field(default_factory=dict)
    tau: dict = field(default_factory=dict)
    varpi: dict = field(default_factory=dict)
    varsigma: dict = field(default_factory=dict)
    sigma: dict = field(default_factory=dict)

    def growth(self, n: int) -> float:
        """Recurrence factor ``(kappa_n^{-1} + alpha mu_n) / (1 + alpha)``."""
        return (1.0 / self.kappa[n] + self.alpha * self.mu[n]) / (1.0 + self.alpha)

    def expansion(self, n: int) -> float:
        """Guaranteed expansion ``kappa_n^{-1} - omega_n (1 + alpha)`` of ``r_n``."""
        return 1.0 / self.kappa[n] - self.omega[n] * (1.0 + self.alpha)


def rate_table(steps: Mapping[int, ChartedStep], lam: float, gamma: float | None = None, lam_tilde: float | None = None) -> RateTable:
    """``omega``, ``tau`` (and stable-side ``varpi``, ``varsigma``) from the one-step rates.

    Raises
    ------
    HyperbolicityMarginError
        If some ``omega_n`` or ``varpi_n`` is not positive.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    gamma = default_gamma(lam) if gamma is None else float(gamma)
    lam_tilde = default_lambda_tilde(lam) if lam_tilde is None else float(lam_tilde)
    if not lam * lam < gamma < 1.0:
        raise ValueError(f"gamma must lie in (lambda^2, 1) = ({lam * lam:.6g}, 1), got {gamma}")
    if not (1.0 + lam) / 2.0 < lam_tilde < 1.0:
        raise ValueError(f"lambda_tilde must lie in ((1+lambda)/2, 1) = ({(1 + lam) / 2:.6g}, 1), got {lam_tilde}")
    alpha = (1.0 / lam - 1.0) / 2.0
    t = RateTable(lam, alpha, gamma, lam_tilde)
    for n in sorted(steps):
        mu, kappa = steps[n].mu, steps[n].kappa
        om = min(omega_branches(mu, kappa, alpha, gamma, lam, lam_tilde))
        vp = min(omega_branches(kappa, mu, alpha, gamma, lam, lam_tilde))
        if om <= 0.0:
            raise HyperbolicityMarginError(n, om, "omega")
        if vp <= 0.0:
            raise HyperbolicityMarginError(n, vp, "varpi")
        t.mu[n], t.kappa[n], t.omega[n], t.varpi[n] = mu, kappa, om, vp
        t.tau[n] = (1.0 + alpha) / (1.0 / kappa - om * (1.0 + alpha))
        t.varsigma[n] = (1.0 + alpha) / (1.0 / mu - vp * (1.0 + alpha))
    return t


# ---------------------------------------------------------------------------
# schedule


@dataclass
class DeltaSchedule:
    delta: dict
    cap: dict
    injectivity: dict
    sigma: dict
    certified: bool
    violation: int | None = None
    binding: dict = field(default_factory=dict)


def schedule_deltas(
    family: NsdsFamily,
    steps: Mapping[int, ChartedStep],
    rates: RateTable,
    grid_density: int = 33,
    safety: float = 1.25,
    bisection_steps: int = 60,
) -> DeltaSchedule:
    """Radii ``delta_n`` on the window spanned by ``steps`` (plus the final index).

    Each ``delta_n`` starts as the largest value below the chart cap with
    ``sigma_n(delta_n) < omega_n`` (bisection), then a forward sweep enforces
    ``delta_n <= growth_{n-1} delta_{n-1}``.  The cap is
    ``min{eps_n, eps_{n+1}/max(L_n, 1)} / (1 + alpha)`` with ``eps`` the
    injectivity radii: the extra factor covers the cone ``|v| <= alpha |w|``.

    Raises
    ------
    ScheduleInfeasibleError
        When no positive radius satisfies ``sigma_n < omega_n`` at some index.
    """
    idx = sorted(steps)
    last = idx[-1] + 1
    alpha = rates.alpha
    eps = {n: injectivity_radius(family.metric(n)) for n in idx + [last]}
    cap, delta, sig, binding = {}, {}, {}, {}
    for n in idx:
        st = steps[n]
        cap[n] = min(eps[n], eps[n + 1] / max(st.lipschitz, 1.0)) / (1.0 + alpha)
        om = rates.omega[n]
        s = estimate_sigma(st, cap[n], grid_density, safety)
        if s < om:
            delta[n] = cap[n]
            binding[n] = "cap"
            continue
        lo, hi = 0.0, cap[n]
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            if estimate_sigma(st, mid, grid_density, safety) < om:
                lo = mid
            else:
                hi = mid
        if lo <= 0.0:
            raise ScheduleInfeasibleError(n, f"sigma_n >= omega_n = {om:.6g} for every radius tried")
        delta[n] = lo
        binding[n] = "sigma"
    cap[last] = eps[last] / (1.0 + alpha)
    delta[last] = cap[last]
    binding[last] = "cap"
    for n in idx[1:] + [last]:
        lim = rates.growth(n - 1) * delta[n - 1]
        if lim < delta[n]:
            delta[n] = lim
            binding[n] = "recurrence"
    violation = None
    for n in idx:
        sig[n] = estimate_sigma(steps[n], delta[n], grid_density, safety)
        if not sig[n] < rates.omega[n] and violation is None:
            violation = n
    rates.sigma.update(sig)
    return DeltaSchedule(delta, cap, eps, sig, violation is None, violation, binding)


# ---------------------------------------------------------------------------
# graphs


def grid(delta: float, M: int) -> np.ndarray:
    """``M + 1`` equispaced nodes on ``[-delta, delta]`` with an exact 0 in the middle."""
    if M < 2 or M % 2:
        raise ValueError(f"grid size M must be an even integer >= 2, got {M}")
    h = M // 2
    return delta * (np.arange(M + 1) - h) / h


@dataclass
class LipschitzGraph:
    """Piecewise-linear ``phi_n : [-delta, delta] -> E^s`` on an equispaced grid."""

    n: int
    radius: float
    grid: np.ndarray
    values: np.ndarray

    @classmethod
    def zero(cls, n: int, radius: float, M: int) -> "LipschitzGraph":
        g = grid(radius, M)
        return cls(n, radius, g, np.zeros_like(g))

    @classmethod
    def from_function(cls, n: int, radius: float, M: int, fn) -> "LipschitzGraph":
        g = grid(radius, M)
        vals = np.asarray(fn(g), dtype=float)
        vals[M // 2] = 0.0
        return cls(n, radius, g, vals)

    @property
    def M(self) -> int:
        return len(self.grid) - 1

    @property
    def center(self) -> int:
        return self.M // 2

    def __call__(self, w):
        return np.interp(w, self.grid, self.values)

    def lipschitz(self) -> float:
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.grid))))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def check(self, alpha: float, rtol: float = 1e-9) -> None:
        if self.values[self.center] != 0.0:
            raise ContractViolationError(self.n, "phi(0)", float(self.values[self.center]), 0.0)
        lip = self.lipschitz()
        if lip > alpha * (1 + rtol):
            raise ContractViolationError(self.n, "Lipschitz constant", lip, alpha)
        if self.sup_norm() > self.radius * (1 + rtol):
            raise ContractViolationError(self.n, "sup norm", self.sup_norm(), self.radius)


def random_graph(n: int, radius: float, M: int, alpha: float, rng: np.random.Generator) -> LipschitzGraph:
    """Random admissible graph: slopes drawn in ``[-alpha, alpha]``, anchored at 0."""
    g = grid(radius, M)
    h = g[1] - g[0]
    slopes = rng.uniform(-alpha, alpha, size=M)
    c = M // 2
    vals = np.zeros(M + 1)
    vals[c + 1 :] = np.cumsum(slopes[c:]) * h
    vals[:c] = -np.cumsum(slopes[:c][::-1])[::-1] * h
    return LipschitzGraph(n, radius, g, vals)


def graph_distance(a: LipschitzGraph, b: LipschitzGraph) -> float:
    """``sup_{x != 0} |a(x) - b(x)| / |x|`` over the nodes of ``a`` (exact for piecewise-linear graphs on a shared grid)."""
    x = a.grid
    mask = x != 0.0
    return float(np.max(np.abs(a.values[mask] - b(x[mask])) / np.abs(x[mask])))


def family_distance(a: Mapping[int, LipschitzGraph], b: Mapping[int, LipschitzGraph]) -> float:
    common = sorted(set(a) & set(b))
    return max((graph_distance(a[n], b[n]) for n in common), default=0.0)


def _invert_monotone(fn, lo, hi, targets, iterations: int = 100, xtol: float = 1e-15):
    """Solve ``fn(w) = targets`` for increasing ``fn`` on brackets ``[lo, hi]``.

    Vectorized Illinois regula falsi: a secant step that keeps the root bracketed
    and halves the stale end value, with a bisection fallback.
    """
    lo = lo.copy()
    hi = hi.copy()
    flo = fn(lo) - targets
    fhi = fn(hi) - targets
    side = np.zeros(lo.shape, dtype=int)
    scale = np.maximum(np.abs(lo), np.abs(hi)).max()
    for _ in range(iterations):
        span = fhi - flo
        ok = span > 0
        t = np.where(ok, -flo / np.where(ok, span, 1.0), 0.5)
        x = lo + np.clip(t, 0.0, 1.0) * (hi - lo)
        fx = fn(x) - targets
        hit = fx == 0
        right = fx > 0
        hi = np.where(right | hit, x, hi)
        fhi = np.where(hit, 0.0, np.where(right, fx, np.where(side == -1, fhi / 2, fhi)))
        lo = np.where(~right | hit, x, lo)
        flo = np.where(hit, 0.0, np.where(~right, fx, np.where(side == 1, flo / 2, flo)))
        side = np.where(right, 1, -1)
        if np.all((hi - lo) <= xtol * max(scale, 1e-300)) or np.all(np.minimum(np.abs(flo), np.abs(fhi)) == 0):
            break
    return np.where(np.abs(flo) <= np.abs(fhi), lo, hi)


def graph_transform_step(
    phi: LipschitzGraph, step: ChartedStep, rates: RateTable | None, delta_next: float, M_next: int | None = None,
    alpha: float | None = None, check: bool = True,
) -> LipschitzGraph:
    """``psi_{n+1}(x) = F_ss phi(w) + a_n(phi(w), w)`` with ``w = r_n^{-1}(x)``, ``r_n(w) = F_uu w + b_n(phi(w), w)``.

    Checks the expansion of ``r_n`` on grid chords, coverage of ``[-delta_next, delta_next]``,
    and that ``psi`` is ``alpha``-Lipschitz and anchored at 0.
    """
    n = phi.n
    M_next = phi.M if M_next is None else M_next
    if alpha is None:
        alpha = rates.alpha if rates is not None else math.inf
    W = phi.grid
    sgn = 1.0 if step.F[1, 1] > 0 else -1.0

    def r(w):
        _, b = step.remainder(phi(w), w)
        return sgn * (step.F[1, 1] * w + b)

    R = r(W)
    if check and rates is not None and n in rates.omega:
        bound = rates.expansion(n)
        chord = np.diff(R) / np.diff(W)
        if chord.min() < bound * (1 - 1e-9):
            raise ContractViolationError(n, "expansion of r_n", float(chord.min()), bound)
    if not (R[0] <= -delta_next and R[-1] >= delta_next):
        raise CoverageError(n, delta_next, float(min(-R[0], R[-1])))

    X = grid(delta_next, M_next)
    tgt = sgn * X
    j = np.clip(np.searchsorted(R, tgt, side="right") - 1, 0, len(W) - 2)
    w = _invert_monotone(r, W[j], W[j + 1], tgt)
    w[M_next // 2] = 0.0
    v = phi(w)
    a, _ = step.remainder(v, w)
    vals = step.F[0, 0] * v + a
    vals[M_next // 2] = 0.0
    psi = LipschitzGraph(n + 1, delta_next, X, vals)
    if check:
        psi.check(alpha)
    return psi


# ---------------------------------------------------------------------------
# fixed point


@dataclass
class GraphFamily:
    graphs: dict
    metric_value: float
    trace: list = field(default_factory=list)
    sweeps: int = 0

    @property
    def contraction(self) -> list:
        t = self.trace
        return [t[k + 1] / t[k] for k in range(len(t) - 1) if t[k] > 0]

    def sup_norm(self) -> float:
        return max(g.sup_norm() for g in self.graphs.values())


def apply_operator(
    graphs: Mapping[int, LipschitzGraph], steps, schedule: DeltaSchedule, rates: RateTable, M: int, check: bool = True
) -> dict:
    """One Jacobi sweep: ``psi_{n+1}`` from ``phi_n``; the first index gets the zero graph."""
    idx = sorted(graphs)
    out = {idx[0]: LipschitzGraph.zero(idx[0], schedule.delta[idx[0]], M)}
    for n in idx[:-1]:
        out[n + 1] = graph_transform_step(graphs[n], steps[n], rates, schedule.delta[n + 1], M, check=check)
    return out


def fixed_point(
    steps, schedule: DeltaSchedule, rates: RateTable, M: int = 200, tol: float = 1e-10, max_sweeps: int = 200,
    initial: Mapping[int, LipschitzGraph] | None = None,
) -> GraphFamily:
    """Iterate the whole-window graph transform until the step distance is at most ``tol``.

    Raises
    ------
    NonConvergenceError
        After ``max_sweeps`` sweeps, carrying the distance trace.
    """
    idx = sorted(steps) + [max(steps) + 1]
    cur = dict(initial) if initial is not None else {n: LipschitzGraph.zero(n, schedule.delta[n], M) for n in idx}
    trace = []
    for k in range(1, max_sweeps + 1):
        new = apply_operator(cur, steps, schedule, rates, M)
        d = family_distance(new, cur)
        trace.append(d)
        cur = new
        if d <= tol:
            return GraphFamily(cur, d, trace, k)
    raise NonConvergenceError(trace)


# ---------------------------------------------------------------------------
# manifolds


def reflect(family: NsdsFamily) -> NsdsFamily:
    """Index-reflected inverse family ``R_m = f_{-m-1}^{-1} : M_{-m} -> M_{-m-1}``, metric ``g'_m = g_{-m}``."""
    return NsdsFamily(
        lambda m: InverseMap(family.map(-m - 1)),
        lambda m: family.metric(-m).with_component(m),
        family.window - 1,
        f"reflect({family.name})",
    )


@dataclass
class ManifoldResult:
    side: str
    anchor: TorusPoint
    window: int
    M: int
    points: dict
    lifted: dict
    graphs: GraphFamily
    frames: dict
    steps: dict
    rates: RateTable
    schedule: DeltaSchedule
    orbit: dict
    zeta: float
    properties: dict = field(default_factory=dict)

    def delta_const(self, n: int) -> float:
        return delta_constant(self.frames[n].cos_theta, self.rates.lam, self.zeta)


def _prepare(family, p, N, depth, splitting_tol):
    frames = frames_along_orbit(family, p, -N, N, depth, splitting_tol)
    pts = orbit_points(family, 0, p.xy, -N, N)
    steps = {n: build_charted_step(family, pts, frames, n) for n in range(-N, N)}
    return frames, pts, steps


def unstable_manifold(
    family: NsdsFamily,
    p: TorusPoint,
    N: int = 8,
    M: int = 200,
    tol: float = 1e-10,
    *,
    lam: float | None = None,
    gamma: float | None = None,
    lam_tilde: float | None = None,
    zeta: float | None = None,
    safety: float = 1.25,
    depth: int = 30,
    splitting_tol: float = 1e-6,
    max_sweeps: int = 200,
    sigma_grid: int = 33,
    check_properties: bool = True,
    bound_depth: int = 7,
) -> ManifoldResult:
    """Local unstable manifolds at ``f_0^n(p)``, ``-N <= n <= N``.

    ``lam`` defaults to the largest one-step rate along the anchor orbit;
    ``gamma``, ``lam_tilde`` and ``zeta`` default to the midpoints of their
    admissible intervals.
    """
    if p.component != 0:
        raise ValueError("anchor must lie in M_0")
    frames, pts, steps = _prepare(family, p, N, depth, splitting_tol)
    if lam is None:
        lam = max(max(s.mu, s.kappa) for s in steps.values())
    rates = rate_table(steps, lam, gamma, lam_tilde)
    zeta = (1.0 - lam) / 2.0 if zeta is None else float(zeta)
    for n in steps:
        if rates.tau[n] >= rates.lam_tilde:
            raise ContractViolationError(n, "tau_n", rates.tau[n], rates.lam_tilde)
    schedule = schedule_deltas(family, steps, rates, sigma_grid, safety)
    if not schedule.certified:
        raise ScheduleInfeasibleError(schedule.violation, "sigma_n >= omega_n after the recurrence sweep")
    for n, st in steps.items():
        check_cap(st, schedule.delta[n], family.metric(n + 1), rates.alpha)
    gf = fixed_point(steps, schedule, rates, M, tol, max_sweeps)
    points, lifted = {}, {}
    for n, gr in gf.graphs.items():
        Q = frames[n].matrix()
        lift = pts[n] + np.column_stack([gr.values, gr.grid]) @ Q.T
        lifted[n] = lift
        points[n] = reduce_mod1(lift)
    res = ManifoldResult("u", p, N, M, points, lifted, gf, frames, steps, rates, schedule, pts, zeta)
    if check_properties:
        res.properties = manifold_properties(family, res, bound_depth)
    return res


def _reflect_result(res: ManifoldResult, family: NsdsFamily) -> ManifoldResult:
    flip = lambda d: {-k: v for k, v in d.items()}
    out = ManifoldResult(
        "s", res.anchor, res.window, res.M, flip(res.points), flip(res.lifted), res.graphs,
        res.frames, res.steps, res.rates, res.schedule, flip(res.orbit), res.zeta, res.properties,
    )
    out.reflected = res
    return out


def stable_manifold(family: NsdsFamily, p: TorusPoint, N: int = 8, M: int = 200, tol: float = 1e-10, **kw) -> ManifoldResult:
    """Local stable manifolds, computed as unstable manifolds of :func:`reflect` ``(family)``.

    Dictionaries ``points``, ``lifted`` and ``orbit`` are re-indexed to the
    original components; graphs, frames, steps, rates and schedule keep the
    reflected indexing (reflected index ``m`` is original index ``-m``).
    """
    res = unstable_manifold(reflect(family), p, N, M, tol, **kw)
    return _reflect_result(res, family)


# ---------------------------------------------------------------------------
# properties


def _polyline_distance(metric: MetricTensor, pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Metric distance from each point to a polyline (both as lifted planar coordinates)."""
    S = metric.sqrt()
    P = pts @ S.T
    A = poly[:-1] @ S.T
    B = poly[1:] @ S.T
    AB = B - A
    L2 = np.einsum("ij,ij->i", AB, AB)
    AP = P[:, None, :] - A[None, :, :]
    t = np.clip(np.einsum("kij,ij->ki", AP, AB) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    proj = A[None] + t[..., None] * AB[None]
    d = np.linalg.norm(P[:, None, :] - proj, axis=-1)
    return d.min(axis=1)


def tangency_slope(graph: LipschitzGraph) -> float:
    c = graph.center
    h = graph.grid[c + 1] - graph.grid[c]
    return float(abs(graph.values[c + 1] - graph.values[c - 1]) / (2 * h))


def manifold_properties(family: NsdsFamily, res: ManifoldResult, bound_depth: int = 7) -> dict:
    """Anchor, tangency, backward invariance and the backward contraction bound."""
    gr = res.graphs.graphs
    N = res.window
    anchor_exact = all(np.array_equal(res.lifted[n][gr[n].center], res.orbit[n]) for n in gr)
    slopes = {n: tangency_slope(g) for n, g in gr.items()}

    inv_res = {}
    for n in range(-N + 1, N + 1):
        f = family.map(n - 1)
        finv = InverseMap(f)
        disp = res.lifted[n] - res.orbit[n]
        back = res.orbit[n - 1] + finv.displacement(res.orbit[n], disp)
        # shift the preimage lift next to the anchor before measuring
        back = res.orbit[n - 1] + family.metric(n - 1).shortest_displacement(back - res.orbit[n - 1])
        d = _polyline_distance(family.metric(n - 1), back, res.lifted[n - 1])
        inv_res[n] = float(d.max())

    bound_ok, worst_ratio = True, 0.0
    for m in range(-N + 1, N + 1):
        g_m = family.metric(m)
        Dm = res.delta_const(m)
        disp0 = res.lifted[m] - res.orbit[m]
        d0 = g_m.norm(disp0)
        keep = d0 > 0
        disp = disp0[keep]
        d0 = d0[keep]
        prod = 1.0
        for k in range(0, min(bound_depth, m + N - 1) + 1):
            j = m - 1 - k  # apply f_j^{-1}
            prod *= res.rates.tau[j]
            disp = InverseMap(family.map(j)).displacement(res.orbit[j + 1], disp)
            dk = family.metric(j).norm(family.metric(j).shortest_displacement(disp))
            rhs = (2.0 / Dm) * prod * d0
            ratio = float(np.max(dk / rhs))
            worst_ratio = max(worst_ratio, ratio)
            if ratio > 1.0 + 1e-6:
                bound_ok = False
    return {
        "anchor_exact": bool(anchor_exact),
        "tangency_slope": slopes,
        "tangency_max": max(slopes.values()),
        "invariance_residual": inv_res,
        "invariance_max": max(inv_res.values()),
        "grid_spacing": {n: float(g.grid[1] - g.grid[0]) for n, g in gr.items()},
        "contraction_bound_ok": bound_ok,
        "contraction_bound_worst_ratio": worst_ratio,
    }
