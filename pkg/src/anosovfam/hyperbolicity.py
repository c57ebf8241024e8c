"""
Splitting estimation and hyperbolicity data.

The stable direction at a point is the one least expanded by a long forward
stretch of the derivative cocycle, the unstable direction the one least
expanded by a long backward stretch.  Both are read off singular vectors in
metric-orthonormal coordinates, which also covers families whose hyperbolicity
comes entirely from the metrics.  Depth and achieved residual are always
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientDepthError, TruncationError, WindowExceededError
from .family import (
    ComposedMap,
    MetricTensor,
    NsdsFamily,
    TorusPoint,
    as_real,
    inv2,
    reduce_mod1,
)


@dataclass(frozen=True)
class SplittingFrame:
    """Unit spanning vectors of ``E^s`` and ``E^u`` at one point, with one-step rates."""

    point: TorusPoint
    e_s: np.ndarray
    e_u: np.ndarray
    theta: float
    mu_local: float
    kappa_local: float
    residual: float
    depth: int

    @property
    def cos_theta(self) -> float:
        return math.cos(self.theta)

    def matrix(self) -> np.ndarray:
        """Columns ``[e_s, e_u]``: frame coordinates ``(v, w)`` to standard ones."""
        return np.column_stack([self.e_s, self.e_u])


def orbit_points(family: NsdsFamily, i: int, xy, start: int, stop: int, dtype=float) -> dict:
    """Raw orbit coordinates ``{k: z_k}`` for ``start <= k <= stop`` through ``z_i = xy``.

    Iterates outward from ``i`` so that ``f_k(z_k) = z_{k+1}`` holds to rounding for every k.
    """
    family.check(start, stop)
    z0 = reduce_mod1(np.asarray(xy, dtype=dtype))
    pts = {i: z0}
    z = z0
    for k in range(i, stop):
        z = reduce_mod1(family.map(k).apply(z))
        pts[k + 1] = z
    z = z0
    for k in range(i, start, -1):
        z = reduce_mod1(family.map(k - 1).invert(z, family.metric(k - 1)))
        pts[k - 1] = z
    return {k: pts[k] for k in range(start, stop + 1)}


def _sine(g: MetricTensor, a, b) -> float:
    """Sine of the angle between the lines spanned by ``a`` and ``b`` in metric ``g``."""
    na, nb = g.norm(a), g.norm(b)
    c = abs(g.inner(a, b)) / (na * nb)
    return float(math.sqrt(max(0.0, 1.0 - float(c) ** 2)))


def _cocycle(family, pts, i, n):
    """``D(f_i^n)`` along the stored orbit, rescaled to unit max-entry (only directions matter)."""
    dt = pts[i].dtype
    D = np.eye(2, dtype=dt)
    if n >= 0:
        for k in range(i, i + n):
            D = family.map(k).jacobian(pts[k]) @ D
            D = D / np.max(np.abs(D))
    else:
        for k in range(i - 1, i + n - 1, -1):
            D = inv2(family.map(k).jacobian(pts[k])) @ D
            D = D / np.max(np.abs(D))
    return D


def _least_expanded(C):
    """Right singular direction of the smaller singular value of a 2x2 matrix, plus the ratio s_min/s_max.

    Computed as the perpendicular of the dominant direction of ``C^T C``, which is
    well conditioned even when ``s_min / s_max`` is far below machine epsilon.
    """
    M = C.T @ C
    a, b, c = M[0, 0], M[0, 1], M[1, 1]
    phi = 0.5 * np.arctan2(2 * b, a - c)
    top = np.array([np.cos(phi), np.sin(phi)])
    sv = np.sort(np.abs(np.linalg.svd(C.astype(float), compute_uv=False)))
    ratio = float(sv[0] / sv[1]) if sv[1] > 0 else 1.0
    return np.array([-top[1], top[0]]), ratio


def _direction(family, pts, i, n):
    """Direction in ``T M_i`` least expanded by ``D(f_i^n)``, measured in the metrics ``g_i``, ``g_{i+n}``."""
    g0, g1 = family.metric(i), family.metric(i + n)
    S0i = g0.inv_sqrt()
    C = g1.sqrt() @ _cocycle(family, pts, i, n) @ S0i
    r, ratio = _least_expanded(C)
    v = S0i @ r
    return v / g0.norm(v), ratio


def _largest_positive(v):
    j = int(np.argmax(np.abs(v)))
    return v if v[j] > 0 else -v


def estimate_splitting(
    family: NsdsFamily,
    i: int,
    p: TorusPoint,
    depth: int = 30,
    tol: float = 1e-6,
    *,
    points: Mapping[int, np.ndarray] | None = None,
    dtype=float,
) -> SplittingFrame:
    """Estimate ``E^s_p`` and ``E^u_p`` from the depth-``depth`` cocycle on both sides.

    ``E^s`` is the direction least expanded by ``D(f_i^depth)`` and ``E^u`` the one
    least expanded by ``D(f_i^-depth)``, both in metric-orthonormal coordinates.
    For a genuine splitting these are the directions whose forward (backward)
    norms stay bounded.

    Parameters
    ----------
    family : NsdsFamily
    i : int
        Component of ``p``.
    p : TorusPoint
    depth : int
        Number of cocycle steps on each side; needs ``|i +- depth| <= window``.
    tol : float
        Largest accepted residual.  The residual is the larger of the sine between
        the depth and depth-1 estimates and the singular-value ratio of the cocycle,
        so families without a splitting (isometries) are rejected.
    points : mapping, optional
        Precomputed orbit coordinates covering ``[i - depth, i + depth]``.
    dtype : numpy dtype
        ``np.longdouble`` runs the products in extended precision.

    Raises
    ------
    InsufficientDepthError
        When the residual exceeds ``tol``.
    """
    if depth < 2:
        raise InsufficientDepthError(math.inf, tol, depth)
    family.check(i - depth, i + depth)
    pts = points if points is not None else orbit_points(family, i, p.xy, i - depth, i + depth, dtype)
    g = family.metric(i)
    es, rs = _direction(family, pts, i, depth)
    eu, ru = _direction(family, pts, i, -depth)
    es1, _ = _direction(family, pts, i, depth - 1)
    eu1, _ = _direction(family, pts, i, -(depth - 1))
    residual = max(_sine(g, es, es1), _sine(g, eu, eu1), rs, ru)
    if not residual <= tol:
        raise InsufficientDepthError(residual, tol, depth)

    eu = _largest_positive(eu)
    ip = float(g.inner(es, eu))
    if abs(ip) > 1e-12:
        es = es if ip > 0 else -es
    else:
        es = _largest_positive(es)
    cos_t = float(np.clip(g.inner(es, eu), -1.0, 1.0))

    J = family.map(i).jacobian(pts[i])
    g1 = family.metric(i + 1) if i + 1 <= family.window else g
    mu = float(g1.norm(J @ es))
    kappa = float(1.0 / g1.norm(J @ eu))
    return SplittingFrame(TorusPoint(i, pts[i].astype(float)), es, eu, math.acos(cos_t), mu, kappa, residual, depth)


def frames_along_orbit(
    family: NsdsFamily, p: TorusPoint, start: int, stop: int, depth: int = 30, tol: float = 1e-6, dtype=float
) -> dict:
    """Frames at ``f_i^{k-i}(p)`` for ``start <= k <= stop``, sharing one orbit computation."""
    i = p.component
    pts = orbit_points(family, i, p.xy, min(start, i) - depth, max(stop, i) + depth, dtype)
    out = {}
    for k in range(start, stop + 1):
        q = TorusPoint(k, pts[k].astype(float))
        out[k] = estimate_splitting(family, k, q, depth, tol, points=pts, dtype=dtype)
    return out


def collinearity_residual(family: NsdsFamily, frame: SplittingFrame, image: SplittingFrame) -> tuple:
    """Sines between ``Df(e_s)``, ``Df(e_u)`` and the frame at the image point."""
    i = frame.point.component
    J = family.map(i).jacobian(frame.point.xy)
    g = family.metric(i + 1)
    return _sine(g, J @ frame.e_s, image.e_s), _sine(g, J @ frame.e_u, image.e_u)


# ---------------------------------------------------------------------------
# Anosov certificate


@dataclass(frozen=True)
class AnosovCertificate:
    c: float
    lam: float
    samples_checked: int
    max_violation: float
    window_used: int
    horizon: int = 0
    worst: tuple = ()

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0.0


def verify_anosov(
    family: NsdsFamily,
    frames: Iterable[SplittingFrame],
    c: float,
    lam: float,
    horizon: int,
    slack: float = 1e-9,
) -> AnosovCertificate:
    """Check ``|D f^n e_s| <= c lam^n`` and ``|D f^{-n} e_u| <= c lam^n`` for ``1 <= n <= horizon``.

    ``max_violation`` is the largest ``|D f^{+-n} e| - c lam^n - slack`` over all
    samples; the slack absorbs rounding in the estimated directions.  Vectors are
    pushed in the precision of the frames, so frames estimated with
    ``dtype=np.longdouble`` certify tight rates over longer horizons.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if c < 1.0:
        raise ValueError(f"c must be >= 1, got {c}")
    worst = -math.inf
    where = ()
    count = 0
    reach = 0
    for fr in frames:
        i = fr.point.component
        family.check(i - horizon, i + horizon)
        count += 1
        reach = max(reach, abs(i) + horizon)
        v = as_real(fr.e_s)
        z = fr.point.xy.astype(v.dtype)
        for n in range(1, horizon + 1):
            f = family.map(i + n - 1)
            v = f.jacobian(z) @ v
            z = reduce_mod1(f.apply(z))
            viol = float(family.metric(i + n).norm(v)) - c * lam**n - slack
            if viol > worst:
                worst, where = viol, (i, "s", n)
        v = as_real(fr.e_u)
        z = fr.point.xy.astype(v.dtype)
        for n in range(1, horizon + 1):
            f = family.map(i - n)
            z = reduce_mod1(f.invert(z, family.metric(i - n)))
            v = inv2(f.jacobian(z)) @ v
            viol = float(family.metric(i - n).norm(v)) - c * lam**n - slack
            if viol > worst:
                worst, where = viol, (i, "u", n)
    return AnosovCertificate(float(c), float(lam), count, worst, reach, horizon, where)


def estimate_lambda(frames: Iterable[SplittingFrame]) -> float:
    """Largest one-step rate ``max(mu, kappa)`` over the given frames."""
    return max(max(fr.mu_local, fr.kappa_local) for fr in frames)


# ---------------------------------------------------------------------------
# angles


@dataclass(frozen=True)
class AngleSequence:
    indices: tuple
    theta: tuple
    cos: tuple

    def as_dict(self) -> dict:
        return {i: t for i, t in zip(self.indices, self.theta)}


def angles_sequence(family: NsdsFamily, frames_at: Mapping[int, Sequence[SplittingFrame] | SplittingFrame]) -> AngleSequence:
    """``theta_i`` = smallest sampled angle between ``E^s`` and ``E^u`` on ``M_i``."""
    idx, th, cs = [], [], []
    for i in sorted(frames_at):
        fr = frames_at[i]
        frs = [fr] if isinstance(fr, SplittingFrame) else list(fr)
        family.check(i)
        # recompute from the Gram expression so theta and cos agree to rounding
        cos_vals = []
        g = family.metric(i)
        for f in frs:
            cos_vals.append(float(g.inner(f.e_s, f.e_u) / (g.norm(f.e_s) * g.norm(f.e_u))))
        cmax = max(cos_vals, key=abs)
        idx.append(i)
        cs.append(cmax)
        th.append(math.acos(max(-1.0, min(1.0, cmax))))
    return AngleSequence(tuple(idx), tuple(th), tuple(cs))


def property_of_angles(thetas, margin: float = 1e-6) -> tuple:
    """``(holds, mu)`` where ``mu = max cos(theta_i)`` and ``holds`` iff ``mu < 1 - margin``."""
    vals = list(thetas.theta if isinstance(thetas, AngleSequence) else thetas)
    if not vals:
        raise ValueError("property_of_angles needs a nonempty sequence")
    mu = max(abs(math.cos(t)) for t in vals)
    if mu < 1e-15:
        mu = 0.0
    return mu < 1.0 - margin, mu


# ---------------------------------------------------------------------------
# adapted metric


def delta_constant(cos_theta: float, lam: float, zeta: float) -> float:
    """``Delta = (1 - cos theta) (zeta / (lam + zeta))^2``."""
    return (1.0 - cos_theta) * (zeta / (lam + zeta)) ** 2


@dataclass
class AdaptedMetric:
    zeta: float
    lam: float
    truncation_depth: int
    star_tensor_at: dict = field(default_factory=dict)
    delta_at: dict = field(default_factory=dict)
    measured_lower: dict = field(default_factory=dict)
    measured_upper: dict = field(default_factory=dict)
    orthogonality: dict = field(default_factory=dict)
    tail: dict = field(default_factory=dict)

    @property
    def bounds_hold(self) -> bool:
        return all(
            self.delta_at[n] <= self.measured_lower[n] and self.measured_upper[n] <= 2.0 for n in self.delta_at
        )


def adapted_metric(
    family: NsdsFamily,
    p: TorusPoint,
    indices: Iterable[int],
    zeta: float,
    lam: float,
    truncation_depth: int = 40,
    tail_tol: float = 1e-8,
    depth: int = 30,
    n_samples: int = 1000,
    seed: int = 0,
) -> AdaptedMetric:
    """Truncated Mather-type metric at the orbit points ``f_0^n(p)``, ``n in indices``.

    On ``E^s``: ``|v|_*^2 = sum_{k<=K} (lam+zeta)^{-2k} |D f^k v|^2``; on ``E^u``
    the same with ``f^{-k}``; the two subspaces are declared orthogonal.  Norms
    ``|D f^k e_s|`` are products of the one-step rates along the orbit, which is
    exact for an invariant splitting and avoids amplifying rounding in ``e_s``.
    The bound ``Delta_n |v|_* <= |v| <= 2 |v|_*`` is measured on ``n_samples``
    random vectors and reported, not asserted.
    """
    if not 0.0 < zeta < 1.0 - lam:
        raise ValueError(f"zeta must lie in (0, 1 - lambda) = (0, {1 - lam:.6g}), got {zeta}")
    K = int(truncation_depth)
    idx = sorted(set(int(n) for n in indices))
    frames = frames_along_orbit(family, p, idx[0] - K, idx[-1] + K, depth)
    base = lam + zeta
    out = AdaptedMetric(float(zeta), float(lam), K)
    rng = np.random.default_rng(seed)
    weights = base ** (-2.0 * np.arange(K + 1))
    for n in idx:
        fr = frames[n]
        mus = np.array([frames[n + k].mu_local for k in range(K)])
        kappas = np.array([frames[n - k - 1].kappa_local for k in range(K)])
        ts = np.concatenate([[1.0], np.cumprod(mus)]) ** 2 * weights
        tu = np.concatenate([[1.0], np.cumprod(kappas)]) ** 2 * weights
        S, U = float(ts.sum()), float(tu.sum())
        tail = 0.0
        for t, tot in ((ts, S), (tu, U)):
            r = t[-1] / t[-2] if K >= 1 and t[-2] > 0 else 0.0
            tail = max(tail, (t[-1] * r / (1.0 - r) if r < 1 else math.inf) / tot)
        if tail > tail_tol:
            raise TruncationError(tail, tail_tol, K)
        Qi = np.linalg.inv(fr.matrix())
        star = MetricTensor(Qi.T @ np.diag([S, U]) @ Qi, n)
        g = family.metric(n)
        vs = rng.normal(size=(n_samples, 2))
        ratio = g.norm(vs) / star.norm(vs)
        out.star_tensor_at[n] = star
        out.delta_at[n] = delta_constant(fr.cos_theta, lam, zeta)
        out.measured_lower[n] = float(ratio.min())
        out.measured_upper[n] = float(ratio.max())
        out.orthogonality[n] = float(abs(star.inner(fr.e_s, fr.e_u)))
        out.tail[n] = tail
    return out


# ---------------------------------------------------------------------------
# gathering


def gathering(family: NsdsFamily, length: int) -> NsdsFamily:
    """Family of blocks ``f~_i = f_{n(i+1)-1} o ... o f_{ni}`` on the components ``M_{ni}``."""
    n = int(length)
    if n < 1:
        raise ValueError(f"gathering length must be >= 1, got {length}")
    if n > family.window:
        raise WindowExceededError(n, family.window)
    if n == 1:
        return family

    def map_at(i):
        return ComposedMap(
            [family.map(n * i + k) for k in range(n)],
            [family.metric(n * i + k) for k in range(n + 1)],
        )

    return NsdsFamily(map_at, lambda i: family.metric(n * i).with_component(i), family.window // n, f"{family.name}^[{n}]")


def minimal_gathering_length(c: float, lam: float, limit: int = 10_000) -> int:
    """Least ``n >= 1`` with ``c lam^n <= lam``, by direct scan."""
    for n in range(1, limit + 1):
        if c * lam**n <= lam:
            return n
    raise ValueError(f"no gathering length up to {limit} for c={c}, lambda={lam}")
