"""Closed-form reference values, computed independently of the exact engine."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def iid_entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def iid_cross_entropy(qd, pd) -> float:
    """``-sum_a Q(a) log P(a)``, which equals ``s(Q) + s(Q|P)``."""
    qd, pd = np.asarray(qd, dtype=np.float64), np.asarray(pd, dtype=np.float64)
    m = qd > 0
    if np.any(pd[m] == 0):
        return math.inf
    return float(-(qd[m] * np.log(pd[m])).sum())


def iid_pressure(p, scale: float = 1.0) -> float:
    """Pressure of ``scale * U`` with ``U(a) = -log p(a)``: ``log sum_a p(a)^scale``."""
    p = np.asarray(p, dtype=np.float64)
    return float(math.log(np.sum(p[p > 0] ** scale)))


def bernoulli_theta2(p: float) -> float:
    return p * (1 - p) * math.log(p / (1 - p)) ** 2


def bernoulli_cumulant(p: float, q: float) -> float:
    """``W(q)`` for an i.i.d. Bernoulli field observed against itself."""
    if q >= -1:
        return math.log(p ** (1 - q) + (1 - p) ** (1 - q))
    return math.log(p**2 + (1 - p) ** 2)


def bernoulli_kl(r: float, p: float) -> float:
    out = 0.0
    for a, b in ((r, p), (1 - r, 1 - p)):
        if a > 0:
            out += a * math.log(a / b)
    return out


def cramer_surprisal_rate(p: float, u: float) -> float:
    """Cramer rate of the mean single-site surprisal ``-log p(sigma_0)`` at ``u``.

    Tilting to ``Bernoulli(r)`` with mean surprisal ``u`` gives ``KL(r || p)``.
    """
    a, b = -math.log(p), -math.log(1 - p)
    if a == b:
        return 0.0 if abs(u - a) < 1e-15 else math.inf
    r = (u - b) / (a - b)
    if not 0.0 <= r <= 1.0:
        return math.inf
    return bernoulli_kl(r, p)


def markov_entropy_rate(P) -> float:
    P = np.asarray(P, dtype=np.float64)
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi = pi / pi.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(P), 0.0)
    return float(-(pi[:, None] * terms).sum())


def onsager_pressure(K: float) -> float:
    """Free-field pressure of the zero-field square-lattice Ising model at coupling ``K = beta J``."""
    c, s = math.cosh(2 * K) ** 2, math.sinh(2 * K)

    def f(a, b):
        return math.log(c - s * (math.cos(a) + math.cos(b)))

    val, _ = integrate.dblquad(f, 0, math.pi, 0, math.pi, epsabs=1e-11, epsrel=1e-11)
    return math.log(2) + val / (2 * math.pi**2)


def single_site_hitting(prob: float, k: int, d: int) -> float:
    """``Pr(tau_A <= k)`` for a one-site pattern in an i.i.d. field."""
    return 1.0 - (1.0 - prob) ** ((k + 1) ** d - 1)


def expected_occurrences(prob: float, k: int, d: int) -> float:
    """``E N_k^A`` with the origin counted."""
    return (k + 1) ** d * prob
