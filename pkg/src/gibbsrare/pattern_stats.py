"""Occurrence, repetition and waiting times of patterns, and their summaries."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import Configuration, Pattern, cube, match_mask, restrict


@dataclass(frozen=True)
class Censored:
    """No occurrence up to the window cap."""

    cap: int

    def __repr__(self) -> str:
        return f"CENSORED({self.cap})"


def _check_window(sigma: Configuration, n: int, K: int) -> None:
    if K < 0:
        raise ValueError("window cap must be nonnegative")
    if not sigma.covers(cube(K + n, sigma.d)):
        raise ValueError(f"domain {sigma.box} does not contain C_{K + n} needed for cap {K}")


def _window_arrays(A: Pattern, sigma: Configuration, K: int):
    d, n = A.d, A.side
    side = K + n + 1
    win = restrict(sigma, cube(K + n, d)).values.ravel().astype(np.int8)
    strides = side ** np.arange(d - 1, -1, -1, dtype=np.int64)
    offs = np.indices((n + 1,) * d).reshape(d, -1).T
    return win, strides, offs @ strides


def first_occurrence(A: Pattern, sigma: Configuration, K: int, include_origin: bool = False):
    """Smallest ``k <= K`` with a match at some ``x`` in ``[0, k]^d`` (``x != 0``
    unless ``include_origin``), else :class:`Censored`.

    Shells ``k = 1, 2, ...`` are scanned in order and each shell in
    lexicographic order of ``x``; the first match ends the scan.
    """
    if A.d != sigma.d:
        raise ValueError("pattern and configuration dimensions differ")
    _check_window(sigma, A.side, K)
    win, strides, pat_off = _window_arrays(A, sigma, K)
    k = kernels.first_hit_window(win, strides, A.flat.astype(np.int8), pat_off, A.d, 0 if include_origin else 1, K)
    return int(k) if k >= 0 else Censored(K)


def count_occurrences(A: Pattern, sigma: Configuration, k: int, include_origin: bool = True) -> int:
    """``N_k^A``: matching placements ``x`` with ``0 <= x_i <= k``."""
    if A.d != sigma.d:
        raise ValueError("pattern and configuration dimensions differ")
    _check_window(sigma, A.side, k)
    mask = match_mask(A, restrict(sigma, cube(k + A.side, A.d)).as_configuration(), cube(k + A.side, A.d))
    total = int(mask.sum())
    if not include_origin and mask.size and mask.flat[0]:
        total -= 1
    return total


def first_repetition(sigma: Configuration, n: int, K: int):
    """``R_n``: first occurrence of the configuration's own initial ``n``-pattern."""
    _check_window(sigma, n, K)
    return first_occurrence(restrict(sigma, cube(n, sigma.d)), sigma, K)


def waiting_time(xi: Configuration, sigma: Configuration, n: int, K: int):
    """``W_n``: first occurrence in ``sigma`` of the initial ``n``-pattern of ``xi``."""
    if not xi.covers(cube(n, xi.d)):
        raise ValueError("xi does not contain C_n")
    return first_occurrence(restrict(xi, cube(n, xi.d)), sigma, K)


# ---------------------------------------------------------------------------
# badly self-repeating patterns
# ---------------------------------------------------------------------------


def _shifts(n: int, d: int, nonnegative_only: bool) -> list[tuple[int, ...]]:
    r = n // 2
    rng = range(0, r + 1) if nonnegative_only else range(-r, r + 1)
    out = []
    for x in itertools.product(rng, repeat=d):
        s = sum(abs(v) for v in x)
        if 0 < s and 2 * s <= n:
            # x and -x give the same overlap condition
            if nonnegative_only or x > tuple(-v for v in x):
                out.append(x)
    return out


def bad_mask(grids: np.ndarray, nonnegative_only: bool = False) -> np.ndarray:
    """Badly self-repeating flags for a stack of patterns ``(S, n+1, ..., n+1)``."""
    grids = np.asarray(grids)
    d = grids.ndim - 1
    n = grids.shape[1] - 1
    bad = np.zeros(grids.shape[0], dtype=bool)
    for x in _shifts(n, d, nonnegative_only):
        a = [slice(None)]
        b = [slice(None)]
        for v in x:
            a.append(slice(max(0, -v), n + 1 - max(0, v)))
            b.append(slice(max(0, v), n + 1 - max(0, -v)))
        same = grids[tuple(a)] == grids[tuple(b)]
        bad |= same.reshape(grids.shape[0], -1).all(axis=1)
    return bad


def is_badly_self_repeating(A: Pattern, nonnegative_only: bool = False) -> bool:
    """Is ``A`` consistent with one of its translates by ``0 < |x| <= n/2``?

    ``x`` ranges over all of ``Z^d``; ``nonnegative_only`` restricts it to
    nonnegative vectors.
    """
    return bool(bad_mask(A.values[None], nonnegative_only)[0])


# ---------------------------------------------------------------------------
# records and survival curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HittingRecord:
    replica: int
    pattern_hash: str
    value: int  # the hit, or the cap when censored
    censored: bool
    K: int

    def __post_init__(self):
        if not self.censored and self.value < 1:
            raise ValueError("an observed hitting time is at least 1")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replica", "pattern_hash", "value", "censored", "K"])
    for r in records:
        w.writerow([r.replica, r.pattern_hash, r.value, int(r.censored), r.K])
    return buf.getvalue()


def _z(level: float) -> float:
    from scipy.stats import norm

    return float(norm.ppf(0.5 + level / 2))


@dataclass
class SurvivalCurve:
    t: np.ndarray
    S: np.ndarray
    half_width: np.ndarray
    lam: float
    prob: float
    censored_fraction: float
    M: int
    d: int
    z: float = 1.96
    meta: dict = field(default_factory=dict)

    def gaps(self) -> np.ndarray:
        return np.abs(self.S - np.exp(-self.t))

    def sup_gap(self) -> float:
        return float(self.gaps().max()) if self.t.size else float("nan")

    def sup_gap_ci(self) -> tuple[float, float]:
        """Sup-gap with the half-width at the maximizing grid point."""
        g = self.gaps()
        i = int(np.argmax(g))
        return float(g[i]), float(self.half_width[i])

    def require_low_censoring(self, limit: float = 0.01) -> None:
        if self.censored_fraction > limit:
            raise RuntimeError(
                f"censoring fraction {self.censored_fraction:.4f} exceeds {limit}; raise the window cap"
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "S", "ci"])
        for t, s, h in zip(self.t, self.S, self.half_width):
            w.writerow([repr(float(t)), repr(float(s)), repr(float(h))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "t": self.t.tolist(),
            "S": self.S.tolist(),
            "ci": self.half_width.tolist(),
            "lambda": self.lam,
            "prob": self.prob,
            "censored_fraction": self.censored_fraction,
            "M": self.M,
            "sup_gap": self.sup_gap(),
        }


def survival_curve(taus, caps, probs, lam: float, d: int, t_grid, z: float = 1.96) -> SurvivalCurve:
    """Empirical ``Pr(tau > (t / (lam * Pr(A)))^(1/d))`` on ``t_grid``.

    ``taus`` holds hits with ``-1`` for censored replicas; ``caps`` and
    ``probs`` may be scalars or per-replica arrays.  Grid points where a
    censored replica cannot be classified are dropped.
    """
    taus = np.asarray(taus, dtype=np.int64)
    Mtot = taus.size
    caps = np.broadcast_to(np.asarray(caps, dtype=np.int64), taus.shape)
    probs = np.broadcast_to(np.asarray(probs, dtype=np.float64), taus.shape)
    cens = taus < 0
    t_grid = np.asarray(t_grid, dtype=np.float64)
    ts, ss = [], []
    for t in t_grid:
        r = np.floor((t / (lam * probs)) ** (1.0 / d) + 1e-12).astype(np.int64)
        if (cens & (r >= caps)).any():
            continue
        alive = np.where(cens, True, taus > r)
        ts.append(t)
        ss.append(alive.mean())
    S = np.asarray(ss)
    hw = z * np.sqrt(S * (1 - S) / max(Mtot, 1))
    mean_prob = float(np.mean(probs)) if Mtot else float("nan")
    return SurvivalCurve(np.asarray(ts), S, hw, float(lam), mean_prob, float(cens.mean()) if Mtot else 0.0, Mtot, d, z)


# ---------------------------------------------------------------------------
# lambda
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    t: float
    survival: float
    prob: float
    radius: int


def default_scale(prob: float, gamma: float = 0.5) -> int:
    """``f_A = floor(Pr(A)^(-gamma))``."""
    return int(math.floor(prob ** (-gamma)))


def placement_scale(prob: float, d: int) -> int:
    """Largest ``t = (m+1)^d - 1`` with ``t * Pr(A) <= 1/2``.

    Then ``floor(t^(1/d)) = m`` and the survival event involves exactly ``t``
    placements, which keeps the union bound inside the validity window.
    """
    m = 0
    while ((m + 2) ** d - 1) * prob <= 0.5:
        m += 1
    return (m + 1) ** d - 1


def lambda_estimate(survival: float, t: float, prob: float, d: int | None = None) -> LambdaEstimate:
    """``-log S / (t Pr(A))`` where ``S = Pr(tau_A > t^(1/d))``."""
    if not 0 < prob <= 1:
        raise ValueError("pattern probability must lie in (0, 1]")
    if t * prob > 0.5 * (1 + 1e-12):  # exact halves arrive with rounding error
        raise ValueError(f"t * Pr(A) = {t * prob:.4g} exceeds 1/2; choose a smaller t")
    if not 0.0 < survival < 1.0:
        raise ValueError(f"survival {survival} is uninformative at t = {t}; choose a different t")
    radius = int(math.floor(t ** (1.0 / d) + 1e-12)) if d else -1
    return LambdaEstimate(-math.log(survival) / (t * prob), float(t), float(survival), float(prob), radius)


def lambda_from_table(table, t: float, prob: float | None = None) -> LambdaEstimate:
    """Exact ``lambda`` from a brute-force hitting law."""
    d = table.pattern.d
    r = int(math.floor(t ** (1.0 / d) + 1e-12))
    if r > table.K:
        raise ValueError(f"table cap {table.K} is below the radius {r}")
    prob = table.pattern_prob if prob is None else prob
    return lambda_estimate(1.0 - float(table.prob[r]), t, prob, d)


def lambda_from_sample(taus, t: float, prob: float, d: int, K: int) -> LambdaEstimate:
    """``lambda`` from sampled hits (``-1`` marks censoring at ``K``)."""
    taus = np.asarray(taus)
    r = int(math.floor(t ** (1.0 / d) + 1e-12))
    if r >= K and (taus < 0).any():
        raise ValueError("censored replicas at the requested radius")
    surv = float(np.mean((taus < 0) | (taus > r)))
    return lambda_estimate(surv, t, prob, d)


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorizationResult:
    lhs: float
    rhs: float
    gap: float
    ci: float
    k: int
    delta: int
    M: int


def cube_origins(t_side: int, delta: int, k: int, d: int, start: int = 0) -> list[tuple[int, ...]]:
    """Origins of ``k`` cubes of side ``t_side`` along axis 0, ``delta`` apart."""
    if delta < 1:
        raise ValueError("cube separation must be at least 1")
    return [(start + j * (t_side + delta),) + (start,) * (d - 1) for j in range(k)]


def absence_matrix(configs, A: Pattern, t_side: int, delta: int, k: int, start: int = 0) -> np.ndarray:
    """``(M, k)`` flags: is ``A`` absent from each cube in each configuration?"""
    from .lattice import Box

    origins = cube_origins(t_side, delta, k, A.d, start)
    out = np.zeros((len(configs), k), dtype=bool)
    for i, sigma in enumerate(configs):
        for j, o in enumerate(origins):
            box = Box(o, t_side)
            if not sigma.covers(box):
                raise ValueError(f"domain {sigma.box} cannot hold cube {box}")
            out[i, j] = not match_mask(A, sigma, box).any()
    return out


def factorization_from_absence(absent: np.ndarray, delta: int, z: float = 1.96) -> FactorizationResult:
    Mrep, k = absent.shape
    lhs = float(absent.all(axis=1).mean())
    p = float(absent.mean())
    rhs = p**k
    se_l = math.sqrt(lhs * (1 - lhs) / Mrep)
    se_r = k * p ** (k - 1) * math.sqrt(p * (1 - p) / (k * Mrep)) if k > 1 else 0.0
    gap = abs(lhs - rhs)
    ci = 0.0 if k == 1 else z * math.sqrt(se_l**2 + se_r**2)
    return FactorizationResult(lhs, rhs, gap, ci, k, delta, Mrep)
