"""Ready-made families used by the scenarios, demos and tests."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import DomainError
from .family import MetricTensor, NsdsFamily, Perturbation, TorusMap, constant_family

CAT = np.array([[2, 1], [1, 1]])
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
#: contracting eigenvalue of the cat map, (3 - sqrt 5)/2
CAT_LAMBDA = (3.0 - math.sqrt(5.0)) / 2.0


def cat_eigenvectors():
    """Euclidean-unit eigenvectors ``(e_s, e_u)`` of the cat map.

    ``e_u`` spans the expanding direction ``(GOLDEN, 1)`` and ``e_s`` the
    contracting one ``(1 - GOLDEN, 1)``.
    """
    eu = np.array([GOLDEN, 1.0])
    es = np.array([1.0 - GOLDEN, 1.0])
    return es / np.linalg.norm(es), eu / np.linalg.norm(eu)


def cat_map() -> TorusMap:
    return TorusMap(CAT)


def perturbed_cat_map(epsilon: float = 0.05, amplitude: float = 1.0, frequency=(1, 0), target: int = 0, phase: float = 0.0):
    """``z -> A z + epsilon * amplitude * sin(2 pi <k, z> + phase) e_target``."""
    return TorusMap(CAT, [Perturbation(amplitude, frequency, target, phase)], epsilon)


def cat_family(window: int = 200) -> NsdsFamily:
    return constant_family(cat_map(), window=window, name="cat")


def perturbed_cat_family(epsilon: float = 0.05, window: int = 200, **kw) -> NsdsFamily:
    return constant_family(perturbed_cat_map(epsilon, **kw), window=window, name=f"perturbed-cat(eps={epsilon:g})")


def identity_family(window: int = 200, metric=None) -> NsdsFamily:
    return constant_family(TorusMap(np.eye(2, dtype=int)), metric, window=window, name="identity")


def diagonal_family(scale: float = 2.0, window: int = 100) -> NsdsFamily:
    """Identity maps whose metrics ``g_i = diag(scale^{2i}, scale^{-2i})`` make the cocycle
    act as ``diag(scale, 1/scale)`` in metric-unit coordinates.

    The first axis expands when ``scale > 1``.  ``g_0`` is the flat metric.
    """
    if scale <= 0 or scale == 1:
        raise DomainError(f"scale must be positive and != 1, got {scale}")
    if window * abs(math.log(scale)) > 300:
        raise DomainError("window too large: metric entries would overflow")
    ident = TorusMap(np.eye(2, dtype=int))
    return NsdsFamily(
        lambda i: ident,
        lambda i: MetricTensor(np.diag([scale ** (2 * i), scale ** (-2 * i)]), i),
        window,
        f"diagonal({scale:g})",
    )


def example23_metric(i: int, a: float, b: float) -> MetricTensor:
    """``||v||_i^2 = a^{2i} |v_s|^2 + b^{2i} |v_u|^2`` for ``i >= 0``, flat for ``i < 0``."""
    if i < 0:
        return MetricTensor(np.eye(2), i)
    es, eu = cat_eigenvectors()
    g = a ** (2 * i) * np.outer(es, es) + b ** (2 * i) * np.outer(eu, eu)
    return MetricTensor(g, i)


def example23_family(a: float = 0.9, b: float = 0.9, window: int = 200, map_=None) -> NsdsFamily:
    """Cat map on every component with metrics that rescale the splitting for ``i >= 0``.

    For ``a, b < 1`` the tori shrink, so forward orbits of any two points
    eventually approach each other while unstable pairs also approach backward.
    """
    if a <= 0 or b <= 0:
        raise DomainError("a and b must be positive")
    f = cat_map() if map_ is None else map_
    return NsdsFamily(lambda i: f, lambda i: example23_metric(i, a, b), window, f"example23(a={a:g},b={b:g})")


def zeta_law(kind: str, **params) -> Callable[[int], float]:
    """Sequences ``zeta_i`` in ``[0, 1)``.

    ``constant``: ``value``.  ``harmonic``: ``1 - 1/(|i| + offset)``.
    ``geometric``: ``1 - (1 - base) * ratio^|i|``.
    """
    if kind == "constant":
        v = float(params.get("value", 0.5))
        law = lambda i: v
    elif kind == "harmonic":
        off = float(params.get("offset", 2.0))
        if off <= 1:
            raise DomainError("harmonic zeta law needs offset > 1")
        law = lambda i: 1.0 - 1.0 / (abs(i) + off)
    elif kind == "geometric":
        base = float(params.get("base", 0.5))
        ratio = float(params.get("ratio", 0.9))
        if not 0 < ratio <= 1:
            raise DomainError("geometric zeta law needs ratio in (0, 1]")
        law = lambda i: 1.0 - (1.0 - base) * ratio ** abs(i)
    else:
        raise DomainError(f"unknown zeta law {kind!r}")
    for probe in (0, 1, 10):
        z = law(probe)
        if not 0.0 <= z < 1.0:
            raise DomainError(f"zeta law {kind!r} leaves [0, 1) at i={probe}: {z}")
    return law


def example24_metric(i: int, zeta: float) -> MetricTensor:
    """Inner product with Gram matrix ``[[1, zeta], [zeta, 1]]`` in the unit eigenbasis."""
    es, eu = cat_eigenvectors()
    P = np.column_stack([es, eu])
    Pinv = np.linalg.inv(P)
    B = np.array([[1.0, zeta], [zeta, 1.0]])
    return MetricTensor(Pinv.T @ B @ Pinv, i)


def example24_family(zeta: Callable[[int], float] | None = None, window: int = 200) -> NsdsFamily:
    law = zeta_law("constant", value=0.5) if zeta is None else zeta
    f = cat_map()
    return NsdsFamily(lambda i: f, lambda i: example24_metric(i, law(i)), window, "example24")
