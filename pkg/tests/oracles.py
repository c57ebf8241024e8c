"""Independent reference computations used by the tests.

Nothing here calls into the package's numerics: lattice minima are brute
forced, preimages come from a contraction iteration instead of Newton, and
closed forms are written out by hand.
"""

import itertools
import math

import numpy as np

SQRT5 = math.sqrt(5.0)
PHI = (1 + SQRT5) / 2
LAM = (3 - SQRT5) / 2  # contracting eigenvalue of [[2,1],[1,1]]
CAT = np.array([[2, 1], [1, 1]])


def cat_eigenlines():
    """Analytic unit eigenvectors (stable, unstable) of the cat map."""
    vs = np.array([(1 - SQRT5) / 2, 1.0])
    vu = np.array([(1 + SQRT5) / 2, 1.0])
    return vs / np.linalg.norm(vs), vu / np.linalg.norm(vu)


def brute_lattice_min(g, delta, K=40):
    """min over integer k in [-K, K]^2 of |delta + k|_g."""
    g = np.asarray(g, float)
    ks = np.array(list(itertools.product(range(-K, K + 1), repeat=2)), float)
    d = np.asarray(delta, float) + ks
    return float(np.sqrt(np.einsum("ij,jk,ik->i", d, g, d)).min())


def brute_systole(g, K=40):
    ks = np.array([k for k in itertools.product(range(-K, K + 1), repeat=2) if k != (0, 0)], float)
    return float(np.sqrt(np.einsum("ij,jk,ik->i", ks, g, ks)).min())


def sine_map(A, eps, z):
    """A z + eps (sin 2 pi x, 0)."""
    z = np.asarray(z, float)
    return np.asarray(A, float) @ z + eps * np.array([math.sin(2 * math.pi * z[0]), 0.0])


def preimage_by_contraction(A, eps, q, iters=400):
    """Solve A z + eps (sin 2 pi x, 0) = q (mod 1) by z <- A^{-1}(q - eps P(z))."""
    Ai = np.linalg.inv(np.asarray(A, float))
    q = np.asarray(q, float)
    z = Ai @ q
    for _ in range(iters):
        z = Ai @ (q - eps * np.array([math.sin(2 * math.pi * z[0]), 0.0]))
    return np.mod(z, 1.0)


def fd_jacobian(fn, z, h=1e-6):
    z = np.asarray(z, float)
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((fn(z + e) - fn(z - e)) / (2 * h))
    return np.column_stack(cols)


def omega_branches(mu, kappa, lam, gamma, lam_tilde):
    """The three terms of omega_n written out directly."""
    alpha = (1 / lam - 1) / 2
    b1 = (1 / kappa - mu) * alpha / (1 + alpha) ** 2
    b2 = (gamma / kappa - mu) / ((1 + alpha) * (1 + gamma))
    b3 = (2 * lam * lam_tilde / kappa - 1 - lam) / (1 + lam)
    return b1, b2, b3


def delta_closed_form(cos_theta, lam, zeta):
    """Delta = ((1/(1 - cos)) ((lam + zeta)/zeta)^2)^{-1}."""
    return 1.0 / ((1.0 / (1.0 - cos_theta)) * ((lam + zeta) / zeta) ** 2)


def gram_cos(g, u, v):
    g = np.asarray(g, float)
    return float(u @ g @ v / math.sqrt((u @ g @ u) * (v @ g @ v)))


def random_spd(rng, cond=20.0):
    Q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
    w = np.exp(rng.uniform(0, math.log(cond), size=2)) * rng.uniform(0.2, 2.0)
    return Q @ np.diag(w) @ Q.T
