"""
Non-stationary systems on flat 2-tori.

A family is a two-sided sequence of torus diffeomorphisms ``f_i: M_i -> M_{i+1}``
where every component ``M_i`` is the unit square torus carrying a constant
metric tensor ``g_i``.  Maps act on lifts in the plane; points are stored as
fundamental-domain representatives in ``[0, 1)^2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InversionError, WindowExceededError

TWO_PI = 2.0 * math.pi


_TWO_PI_EXT = 8 * np.arctan(np.longdouble(1))


def as_real(x) -> np.ndarray:
    """Float array, keeping ``longdouble`` inputs in extended precision."""
    a = np.asarray(x)
    return a if a.dtype == np.longdouble else a.astype(float)


def _two_pi(dtype):
    return _TWO_PI_EXT if dtype == np.longdouble else TWO_PI


def inv2(M):
    """Inverse of (stacks of) 2x2 matrices by the adjugate; works for ``longdouble``."""
    M = np.asarray(M)
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    adj = np.empty_like(M)
    adj[..., 0, 0] = M[..., 1, 1]
    adj[..., 1, 1] = M[..., 0, 0]
    adj[..., 0, 1] = -M[..., 0, 1]
    adj[..., 1, 0] = -M[..., 1, 0]
    return adj / det[..., None, None]


def solve2(M, r):
    return (inv2(M) @ np.asarray(r)[..., None])[..., 0]


def reduce_mod1(xy):
    """Reduce coordinates into [0, 1). Guards the ``-tiny % 1 == 1.0`` case."""
    r = np.mod(as_real(xy), 1.0)
    return np.where(r >= 1.0, r.dtype.type(0), r)


@dataclass(frozen=True)
class TorusPoint:
    component: int
    coords: tuple

    def __post_init__(self):
        c = reduce_mod1(np.asarray(self.coords, dtype=float).reshape(2))
        object.__setattr__(self, "coords", (float(c[0]), float(c[1])))
        object.__setattr__(self, "component", int(self.component))

    @property
    def xy(self) -> np.ndarray:
        return np.array(self.coords)


class MetricTensor:
    """Constant inner product ``<u, v> = u^T g v`` on one component."""

    def __init__(self, g, component: int = 0):
        g = np.array(g, dtype=float).reshape(2, 2)
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(g).max())):
            raise DomainError(f"metric tensor not symmetric: {g.tolist()}")
        g = 0.5 * (g + g.T)
        eig = np.linalg.eigvalsh(g)
        if eig[0] <= 0.0:
            raise DomainError(f"metric tensor not positive definite (eigenvalues {eig.tolist()})")
        g.setflags(write=False)
        self.g = g
        self.component = int(component)
        self.eigenvalues = eig
        self._basis = None

    def __repr__(self):
        return f"MetricTensor({self.g.tolist()}, component={self.component})"

    def __eq__(self, other):
        return (
            isinstance(other, MetricTensor)
            and self.component == other.component
            and np.array_equal(self.g, other.g)
        )

    def __hash__(self):
        return hash((self.component, self.g.tobytes()))

    def inner(self, u, v):
        u = as_real(u)
        v = as_real(v)
        return np.einsum("...i,ij,...j->...", u, self.g, v)

    def norm(self, v):
        return np.sqrt(np.maximum(self.inner(v, v), 0.0))

    def normalize(self, v):
        v = as_real(v)
        return v / self.norm(v)

    def sqrt(self) -> np.ndarray:
        """Symmetric square root, so that ``||v||_g = |sqrt(g) v|_2``."""
        w, V = np.linalg.eigh(self.g)
        return (V * np.sqrt(w)) @ V.T

    def inv_sqrt(self) -> np.ndarray:
        w, V = np.linalg.eigh(self.g)
        return (V / np.sqrt(w)) @ V.T

    def with_component(self, component: int) -> "MetricTensor":
        return MetricTensor(self.g, component)

    def scaled(self, factor: float) -> "MetricTensor":
        return MetricTensor(self.g * factor, self.component)

    def _reduced_basis(self) -> np.ndarray:
        """Gauss-Lagrange reduced basis of Z^2 for this inner product (columns)."""
        if self._basis is None:
            b1 = np.array([1, 0], dtype=np.int64)
            b2 = np.array([0, 1], dtype=np.int64)
            n = lambda v: float(self.inner(v.astype(float), v.astype(float)))
            if n(b1) > n(b2):
                b1, b2 = b2, b1
            while True:
                mu = int(round(float(self.inner(b1.astype(float), b2.astype(float))) / n(b1)))
                b2 = b2 - mu * b1
                if n(b2) >= n(b1):
                    break
                b1, b2 = b2, b1
            self._basis = np.column_stack([b1, b2])
        return self._basis

    def shortest_displacement(self, delta):
        """Nearest-lift representative of a torus displacement.

        Returns ``delta + k`` with ``k`` integer minimizing the g-norm; exact ties
        go to the lexicographically smaller ``k``.  Works on arrays ``(..., 2)``.
        """
        d = as_real(delta)
        flat = d.reshape(-1, 2)
        Bi = self._reduced_basis()
        B = Bi.astype(float)
        c0 = np.round(flat @ _int_inverse(Bi).T.astype(float))
        # candidates k = -B (c0 + o); a reduced basis keeps the optimum within |o| <= 1
        ks = -(c0[:, None, :] + _OFFSETS[None, :, :]) @ B.T
        cand = flat[:, None, :] + ks
        n2 = self.inner(cand, cand)
        m = flat.shape[0]
        rows = np.repeat(np.arange(m), _OFFSETS.shape[0])
        order = np.lexsort((ks[..., 1].ravel(), ks[..., 0].ravel(), n2.ravel(), rows))
        first = order[:: _OFFSETS.shape[0]]
        best = cand.reshape(-1, 2)[first]
        return best.reshape(d.shape)

    def torus_distance(self, a, b):
        return self.norm(self.shortest_displacement(as_real(b) - as_real(a)))


_OFFSETS = np.array(list(itertools.product(range(-2, 3), repeat=2)), dtype=float)


def distance(metric: MetricTensor, p: TorusPoint, q: TorusPoint) -> float:
    """Flat-torus distance between two points of the same component."""
    if not (p.component == q.component == metric.component):
        raise DomainError(
            f"distance needs one component: p in M_{p.component}, q in M_{q.component}, metric on M_{metric.component}"
        )
    return float(metric.torus_distance(p.xy, q.xy))


def injectivity_radius(metric: MetricTensor) -> float:
    """Half the g-length of the shortest nonzero lattice vector (flat-torus systole / 2)."""
    b1 = metric._reduced_basis()[:, 0].astype(float)
    return 0.5 * float(metric.norm(b1))


# ---------------------------------------------------------------------------
# maps


@dataclass(frozen=True)
class Perturbation:
    """One term ``amplitude * sin(2 pi <frequency, z> + phase)`` added to coordinate ``target``."""

    amplitude: float
    frequency: tuple
    target: int
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frequency", (int(self.frequency[0]), int(self.frequency[1])))
        if self.target not in (0, 1):
            raise DomainError(f"perturbation target must be 0 or 1, got {self.target}")


def _int_inverse(A: np.ndarray) -> np.ndarray:
    det = int(round(A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]))
    adj = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]], dtype=np.int64)
    return adj * det  # det = +-1 so 1/det == det


def _operator_norm(M: np.ndarray, g_dom: MetricTensor, g_tgt: MetricTensor) -> float:
    return float(np.linalg.norm(g_tgt.sqrt() @ M @ g_dom.inv_sqrt(), 2))


class TorusMap:
    """``z -> A z + epsilon * P(z)`` on the plane, descending to the torus.

    ``A`` is an integer matrix with ``|det A| = 1`` and ``P`` a finite
    trigonometric sum, so the Jacobian is available in closed form.
    """

    def __init__(self, linear, perturbations: Sequence[Perturbation] = (), epsilon: float = 0.0):
        A = np.array(linear)
        if A.shape != (2, 2) or not np.all(np.equal(np.round(A), A)):
            raise DomainError(f"linear part must be a 2x2 integer matrix, got {linear!r}")
        A = A.astype(np.int64)
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        if abs(det) != 1:
            raise DomainError(f"|det A| must be 1, got det = {det}")
        self.linear = A
        self.linear.setflags(write=False)
        self._A = A.astype(float)
        self._Ainv = _int_inverse(A).astype(float)
        self.perturbations = tuple(perturbations)
        self.epsilon = float(epsilon)
        if self.perturbations and self.epsilon != 0.0:
            self._amp = np.array([t.amplitude for t in self.perturbations], dtype=float)
            self._freq = np.array([t.frequency for t in self.perturbations], dtype=float)
            self._tgt = np.array([t.target for t in self.perturbations])
            self._phase = np.array([t.phase for t in self.perturbations], dtype=float)
            self._onehot = np.eye(2)[self._tgt]
        else:
            self.perturbations = ()
            self.epsilon = 0.0
        smin = np.linalg.svd(self._A, compute_uv=False)[-1]
        lip = self.epsilon * self.perturbation_lipschitz()
        if lip >= smin:
            raise DomainError(
                f"epsilon * Lip(P) = {lip:.6g} >= smallest singular value {smin:.6g} of A; invertibility not guaranteed"
            )

    @property
    def is_linear(self) -> bool:
        return not self.perturbations

    def __repr__(self):
        return f"TorusMap({self.linear.tolist()}, {list(self.perturbations)!r}, epsilon={self.epsilon})"

    def perturbation_lipschitz(self) -> float:
        """Euclidean Lipschitz bound of ``P``: each term contributes ``2 pi |amp| |k|``."""
        return sum(TWO_PI * abs(t.amplitude) * math.hypot(*t.frequency) for t in self.perturbations)

    def _phases(self, z):
        return _two_pi(z.dtype) * (z @ self._freq.T) + self._phase

    def apply(self, z):
        z = as_real(z)
        out = z @ self._A.T
        if self.perturbations:
            s = self.epsilon * self._amp * np.sin(self._phases(z))
            out = out + s @ self._onehot
        return out

    def displacement(self, z0, dz):
        """``f(z0 + dz) - f(z0)`` without cancellation for small ``dz``."""
        dz = as_real(dz)
        out = dz @ self._A.T
        if self.perturbations:
            z0 = as_real(z0)
            half = 0.5 * _two_pi(dz.dtype) * (dz @ self._freq.T)
            diff = 2.0 * np.cos(self._phases(z0) + half) * np.sin(half)
            out = out + (self.epsilon * self._amp * diff) @ self._onehot
        return out

    def jacobian(self, z):
        z = as_real(z)
        J = np.broadcast_to(self._A.astype(z.dtype), z.shape[:-1] + (2, 2)).copy()
        if self.perturbations:
            c = self.epsilon * self._amp * _two_pi(z.dtype) * np.cos(self._phases(z))
            # sum_t c_t * e_{target_t} k_t^T
            J = J + np.einsum("...t,ti,tj->...ij", c, self._onehot, self._freq)
        return J

    def invert(self, q, metric: MetricTensor | None = None, tol: float = 1e-14, max_iter: int = 60):
        """Lift ``z`` with ``f(z) = q`` modulo the lattice, by Newton from ``A^{-1} q``."""
        q = as_real(q)
        z = q @ self._Ainv.T
        if self.is_linear:
            return z
        if q.dtype == np.longdouble:
            tol = min(tol, 1e-18)
        step_norm = math.inf
        for it in range(1, max_iter + 1):
            r = self.apply(z) - q
            r = r - np.round(r)
            step = solve2(self.jacobian(z), r)
            z = z - step
            step_norm = float(np.max(metric.norm(step) if metric is not None else np.abs(step)))
            if step_norm <= tol:
                break
        else:
            raise InversionError(step_norm, max_iter)
        r = self.apply(z) - q
        r = r - np.round(r)
        if np.max(np.abs(r)) > 1e-12:
            raise InversionError(float(np.max(np.abs(r))), max_iter)
        return z

    def lipschitz_bound(self, g_dom: MetricTensor, g_tgt: MetricTensor) -> float:
        """Upper bound of ``sup_z ||Df_z||`` from ``g_dom`` to ``g_tgt``."""
        base = _operator_norm(self._A, g_dom, g_tgt)
        if self.is_linear:
            return base
        S = g_tgt.sqrt()
        Si = g_dom.inv_sqrt()
        extra = 0.0
        for t in self.perturbations:
            e = np.eye(2)[t.target]
            k = np.array(t.frequency, float)
            extra += TWO_PI * abs(t.amplitude) * np.linalg.norm(S @ e) * np.linalg.norm(Si @ k)
        return base + self.epsilon * extra

    def inverse(self) -> "InverseMap":
        return InverseMap(self)


class InverseMap:
    """``f^{-1}`` for a map exposing ``apply``/``invert``/``displacement``/``jacobian``."""

    def __init__(self, base):
        self.base = base
        self.linear = _int_inverse(np.asarray(base.linear))
        self.linear.setflags(write=False)
        self._Ainv = self.linear.astype(float)
        self._anchor = (None, None)

    @property
    def is_linear(self) -> bool:
        return self.base.is_linear

    def __repr__(self):
        return f"InverseMap({self.base!r})"

    def apply(self, z):
        return self.base.invert(z)

    def invert(self, q, metric=None, tol=1e-14, max_iter=60):
        return self.base.apply(q)

    def jacobian(self, z):
        return inv2(self.base.jacobian(self.base.invert(z)))

    def displacement(self, q0, dq, tol: float = 1e-15, max_iter: int = 60):
        dq = as_real(dq)
        if dq.dtype == np.longdouble:
            tol = 1e-19
        e = dq @ self._Ainv.T
        if self.is_linear:
            return e
        q0 = np.asarray(q0)
        key = (q0.dtype.str, q0.tobytes())
        if self._anchor[0] != key:
            self._anchor = (key, self.base.invert(q0))
        z0 = np.broadcast_to(self._anchor[1], e.shape)
        for _ in range(max_iter):
            r = self.base.displacement(z0, e) - dq
            step = solve2(self.base.jacobian(z0 + e), r)
            e = e - step
            if np.max(np.abs(step)) <= tol * max(1.0, float(np.max(np.abs(e)))):
                return e
        raise InversionError(float(np.max(np.abs(step))), max_iter)

    def lipschitz_bound(self, g_dom: MetricTensor, g_tgt: MetricTensor) -> float:
        if self.is_linear:
            return _operator_norm(self._Ainv, g_dom, g_tgt)
        base = self.base
        A = np.asarray(base.linear, float)
        smin = np.linalg.svd(A, compute_uv=False)[-1]
        lip = base.epsilon * base.perturbation_lipschitz() if hasattr(base, "perturbation_lipschitz") else 0.0
        euclid = 1.0 / (smin - lip)
        return euclid * float(np.linalg.norm(g_tgt.sqrt(), 2)) * float(np.linalg.norm(g_dom.inv_sqrt(), 2))

    def inverse(self):
        return self.base


class ComposedMap:
    """``maps[-1] o ... o maps[0]``, reducing mod 1 between factors exactly as ``compose`` does."""

    def __init__(self, maps: Sequence, metrics: Sequence[MetricTensor] | None = None):
        self.maps = tuple(maps)
        self.metrics = tuple(metrics) if metrics is not None else None
        L = np.eye(2, dtype=np.int64)
        for m in self.maps:
            L = np.asarray(m.linear, dtype=np.int64) @ L
        self.linear = L
        self.linear.setflags(write=False)

    @property
    def is_linear(self) -> bool:
        return all(m.is_linear for m in self.maps)

    def __repr__(self):
        return f"ComposedMap({list(self.maps)!r})"

    def apply(self, z):
        z = as_real(z)
        for m in self.maps[:-1]:
            z = reduce_mod1(m.apply(z))
        return self.maps[-1].apply(z)

    def displacement(self, z0, dz):
        z = as_real(z0)
        d = as_real(dz)
        for m in self.maps:
            d = m.displacement(z, d)
            z = reduce_mod1(m.apply(z))
        return d

    def jacobian(self, z):
        z = as_real(z)
        J = np.broadcast_to(np.eye(2, dtype=z.dtype), z.shape[:-1] + (2, 2))
        for m in self.maps:
            J = m.jacobian(z) @ J
            z = reduce_mod1(m.apply(z))
        return J

    def invert(self, q, metric=None, tol=1e-14, max_iter=60):
        q = as_real(q)
        for m in reversed(self.maps[1:]):
            q = reduce_mod1(m.invert(q, tol=tol, max_iter=max_iter))
        return self.maps[0].invert(q, metric, tol=tol, max_iter=max_iter)

    def lipschitz_bound(self, g_dom: MetricTensor, g_tgt: MetricTensor) -> float:
        if self.metrics is not None and len(self.metrics) == len(self.maps) + 1:
            return float(np.prod([m.lipschitz_bound(a, b) for m, a, b in zip(self.maps, self.metrics[:-1], self.metrics[1:])]))
        eye = MetricTensor(np.eye(2))
        bound = float(np.prod([m.lipschitz_bound(eye, eye) for m in self.maps]))
        return bound * float(np.linalg.norm(g_tgt.sqrt(), 2)) * float(np.linalg.norm(g_dom.inv_sqrt(), 2))

    def inverse(self):
        return InverseMap(self)


def inverse_map(map_, metric_domain: MetricTensor, q: TorusPoint) -> TorusPoint:
    """Preimage of ``q`` in the domain component of ``metric_domain``."""
    z = map_.invert(q.xy, metric_domain)
    return TorusPoint(metric_domain.component, z)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class NsdsFamily:
    """Two-sided sequence ``f_i: M_i -> M_{i+1}``, materialized lazily on ``[-window, window]``."""

    map_at: Callable[[int], object]
    metric_at: Callable[[int], MetricTensor]
    window: int
    name: str = ""
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def check(self, *indices: int) -> None:
        for i in indices:
            if abs(i) > self.window:
                raise WindowExceededError(i, self.window)

    def map(self, i: int):
        self.check(i)
        key = ("map", i)
        if key not in self._cache:
            self._cache[key] = self.map_at(i)
        return self._cache[key]

    def metric(self, i: int) -> MetricTensor:
        self.check(i)
        key = ("metric", i)
        if key not in self._cache:
            g = self.metric_at(i)
            if not isinstance(g, MetricTensor):
                g = MetricTensor(g, i)
            elif g.component != i:
                g = g.with_component(i)
            self._cache[key] = g
        return self._cache[key]


def _orbit_xy(family: NsdsFamily, i: int, n: int, xy):
    """Iterate raw coordinates; returns the reduced image in component ``i + n``."""
    family.check(i, i + n)
    z = reduce_mod1(xy)
    if n >= 0:
        for k in range(i, i + n):
            z = reduce_mod1(family.map(k).apply(z))
    else:
        for k in range(i - 1, i + n - 1, -1):
            z = reduce_mod1(family.map(k).invert(z, family.metric(k)))
    return z


def compose(family: NsdsFamily, i: int, n: int, p: TorusPoint) -> TorusPoint:
    """``f_i^n(p)``: forward composition for ``n > 0``, inverses for ``n < 0``."""
    if p.component != i:
        raise DomainError(f"point lives in M_{p.component}, composition starts at M_{i}")
    if n == 0:
        family.check(i)
        return p
    return TorusPoint(i + n, _orbit_xy(family, i, n, p.xy))


def orbit(family: NsdsFamily, i: int, p: TorusPoint, start: int, stop: int) -> dict:
    """Orbit points ``{k: f_i^{k-i}(p)}`` for ``start <= k <= stop``, iterating outward from ``i``.

    Points on the backward side are computed by inverting, never by re-composing
    forward, so each point is as accurate as the one next to it.
    """
    pts = {i: p}
    q = p
    for k in range(i, stop):
        q = compose(family, k, 1, q)
        pts[k + 1] = q
    q = p
    for k in range(i, start, -1):
        q = compose(family, k, -1, q)
        pts[k - 1] = q
    return {k: pts[k] for k in range(start, stop + 1)}


def derivative_cocycle(family: NsdsFamily, i: int, n: int, p: TorusPoint) -> np.ndarray:
    """Chain-rule product ``D(f_i^n)_p`` in standard coordinates."""
    if p.component != i:
        raise DomainError(f"point lives in M_{p.component}, cocycle starts at M_{i}")
    family.check(i, i + n)
    D = np.eye(2)
    z = p.xy
    if n >= 0:
        for k in range(i, i + n):
            f = family.map(k)
            D = f.jacobian(z) @ D
            z = reduce_mod1(f.apply(z))
    else:
        for k in range(i - 1, i + n - 1, -1):
            f = family.map(k)
            z = reduce_mod1(f.invert(z, family.metric(k)))
            D = inv2(f.jacobian(z)) @ D
    return D


def constant_family(map_, metric=None, window: int = 200, name: str = "") -> NsdsFamily:
    g = np.eye(2) if metric is None else np.asarray(metric.g if isinstance(metric, MetricTensor) else metric, float)
    return NsdsFamily(lambda i: map_, lambda i: MetricTensor(g, i), window, name)
