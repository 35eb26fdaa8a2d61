"""Exact computations on small systems by full enumeration or transfer matrices.

Everything here is an oracle for the Monte Carlo side: partition functions,
pressures, exact pattern probabilities, cylinder-event mixing probes, entropy
densities and exhaustive hitting-time laws.  Per-site quantities are
normalized by the number of sites of the volume, ``(n+1)**d`` for ``C_n``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigs
from scipy.special import logsumexp

from . import models as M
from .lattice import Box, Configuration, Pattern, cube
from .models import ENUM_BUDGET, FREE, PERIODIC, BudgetExceeded, Interaction, Model, _check_budget

CHUNK = 1 << 16
TRANSFER_MAX_STATES = 1 << 12


def _digits(idx: np.ndarray, nsites: int, q: int) -> np.ndarray:
    """Row-major symbols of state indices, most significant site first."""
    powers = q ** np.arange(nsites - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers) % q).astype(np.int8)


def iter_states(nsites: int, q: int, budget: int = ENUM_BUDGET, chunk: int = CHUNK):
    total = q**nsites
    _check_budget(total, f"enumeration of {q}^{nsites} states", budget)
    for start in range(0, total, chunk):
        yield _digits(np.arange(start, min(total, start + chunk), dtype=np.int64), nsites, q)


# ---------------------------------------------------------------------------
# partition functions and Gibbs distributions
# ---------------------------------------------------------------------------


def _volume(volume) -> Box:
    return volume if isinstance(volume, Box) else Box(*volume)


def partition_function(U: Interaction, volume: Box, boundary=FREE, budget: int = ENUM_BUDGET) -> float:
    """``log Z`` by exact log-space summation over all states of ``volume``."""
    ve = M.compile_volume(U, volume, boundary)
    parts = [logsumexp(-ve.energies(states)) for states in iter_states(volume.size, U.q, budget)]
    return float(logsumexp(parts))


def gibbs_log_probs(U: Interaction, volume: Box, boundary=FREE, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Log-probabilities of every state (row-major, most significant first)."""
    ve = M.compile_volume(U, volume, boundary)
    e = np.concatenate([ve.energies(s) for s in iter_states(volume.size, U.q, budget)])
    return -e - logsumexp(-e)


def window_log_probs(model: Model, side: int, budget: int = ENUM_BUDGET):
    """Yield ``(states, log_probs)`` chunks for the window ``[0, side-1]^d``.

    i.i.d. and Markov-product laws are exact.  For Gibbs fields the window is
    treated as a torus of the same side, which is exact for the torus measure
    and an approximation of the infinite-volume field.
    """
    d, q = model.d, model.q
    nsites = side**d
    if model.kind == "gibbs":
        lp = gibbs_log_probs(model.interaction, cube(side - 1, d), PERIODIC, budget)
        for i, states in enumerate(iter_states(nsites, q, budget)):
            yield states, lp[i * CHUNK : i * CHUNK + len(states)]
        return
    for states in iter_states(nsites, q, budget):
        yield states, _product_log_probs(model, states.reshape((-1,) + (side,) * d))


def _product_log_probs(model: Model, grids: np.ndarray) -> np.ndarray:
    """Exact log-probabilities of windows under i.i.d. or Markov-product laws."""
    with np.errstate(divide="ignore"):
        if model.kind == "iid":
            lp = np.log(model.probs)
            return lp[grids.astype(np.int64)].reshape(len(grids), -1).sum(axis=1)
        if model.kind == "markov_product":
            g = grids.astype(np.int64)
            lpi, lP = np.log(model.stationary), np.log(model.transition)
            out = lpi[g[:, :, 0]].sum(axis=1)
            out = out + lP[g[:, :, :-1], g[:, :, 1:]].sum(axis=(1, 2))
            return out
    raise ValueError(f"no closed form for model kind {model.kind!r}")


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------


@dataclass
class PressureEstimate:
    value: float
    method: str
    sizes: list
    values: list
    residual: float
    converged: bool
    raw: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("value", "method", "sizes", "values", "residual", "converged", "raw")}


def _transfer_direction_ok(U: Interaction) -> None:
    for t in U.terms:
        span = max(s[0] for s in t.shape) - min(s[0] for s in t.shape)
        if span > 1:
            raise ValueError("transfer matrix needs terms spanning at most two adjacent columns")


def transfer_matrix(U: Interaction, w: int) -> np.ndarray:
    """Column-to-column transfer matrix of a width-``w`` strip (free sides).

    ``d = 1`` uses single-site columns and ignores ``w``.  Columns are indexed
    along axis 0; a column state lists the symbols at transverse positions
    ``0..w-1`` (most significant first).
    """
    q, d = U.q, U.d
    if d == 1:
        w = 1
    elif d != 2:
        raise ValueError("transfer matrices are implemented for d = 1 and d = 2")
    _transfer_direction_ok(U)
    ns = q**w
    if ns > TRANSFER_MAX_STATES:
        raise BudgetExceeded(f"strip width {w} has {ns} column states, limit is {TRANSFER_MAX_STATES}")
    cols = _digits(np.arange(ns, dtype=np.int64), w, q).astype(np.int64)
    a = np.repeat(np.arange(ns), ns)
    b = np.tile(np.arange(ns), ns)
    pair = np.stack([cols[a], cols[b]])  # (2, ns*ns, w)
    energy = np.zeros(ns * ns)
    for t in U.terms:
        shp = np.asarray(t.shape)
        trans = shp[:, 1] if d == 2 else np.zeros(t.k, dtype=np.int64)
        lo = -trans.min()
        hi = (w - 1) - trans.max()
        for t1 in range(lo, hi + 1):
            code = np.zeros(ns * ns, dtype=np.int64)
            for i in range(t.k):
                c = int(shp[i, 0])
                pos = int(trans[i] + t1) if d == 2 else 0
                code = code * q + pair[c, :, pos]
            with np.errstate(invalid="ignore"):
                energy += t.table[code]
    return np.exp(-energy).reshape(ns, ns)


def log_dominant_eigenvalue(T: np.ndarray) -> float:
    if T.shape[0] <= 64:
        return float(np.log(np.max(np.abs(np.linalg.eigvals(T)))))
    vals = eigs(T, k=1, which="LM", return_eigenvectors=False, tol=1e-13, maxiter=100000)
    return float(np.log(np.abs(vals[0])))


def _fit_leading(Ls: list[int], logz: list[float], d: int) -> float:
    coef = np.polyfit(np.asarray(Ls, float), np.asarray(logz, float), d)
    return float(coef[0])


def pressure(U: Interaction, method: str = "transfer", sizes=None, budget: int = ENUM_BUDGET, tol: float = 1e-3) -> PressureEstimate:
    """Free-boundary pressure with finite-size sequence and extrapolation.

    ``enumeration``: ``log Z_{C_n}/(n+1)^d`` for the given ``n``; the value is
    the leading coefficient of a degree-``d`` polynomial fit of ``log Z`` in
    ``L = n+1`` over the last ``d+1`` sizes.  ``transfer``: ``log lambda_w / w``
    for strip widths ``w``; the value is the difference quotient of
    ``log lambda_w`` over the last two widths.
    """
    d, q = U.d, U.q
    if U.single_site_only and method == "closed":
        v = float(logsumexp(-U.single_site_energies()))
        return PressureEstimate(v, "closed", [], [v], 0.0, True)
    if method == "enumeration":
        if sizes is None:
            sizes = [n for n in range(0, 64) if q ** ((n + 1) ** d) <= budget]
        sizes = sorted(int(n) for n in sizes)
        logz = [partition_function(U, cube(n, d), FREE, budget) for n in sizes]
        Ls = [n + 1 for n in sizes]
        values = [z / L**d for z, L in zip(logz, Ls)]
        raw = [z / n**d if n > 0 else float("nan") for z, n in zip(logz, sizes)]
        if len(sizes) >= d + 1:
            value = _fit_leading(Ls[-(d + 1):], logz[-(d + 1):], d)
            prev = _fit_leading(Ls[-(d + 2):-1], logz[-(d + 2):-1], d) if len(sizes) >= d + 2 else float("nan")
        else:
            value, prev = values[-1], float("nan")
        residual = abs(value - prev) if np.isfinite(prev) else float("nan")
        return PressureEstimate(value, "enumeration-sequence", sizes, values, residual, bool(residual < tol), raw)
    if method == "transfer":
        if d == 1:
            v = log_dominant_eigenvalue(transfer_matrix(U, 1))
            return PressureEstimate(v, "transfer-matrix-strip", [1], [v], 0.0, True)
        if sizes is None:
            wmax = max(w for w in range(1, 32) if q**w <= 1 << 10)
            sizes = list(range(max(1, wmax - 3), wmax + 1))
        sizes = sorted(int(w) for w in sizes)
        logl = [log_dominant_eigenvalue(transfer_matrix(U, w)) for w in sizes]
        values = [v / w for v, w in zip(logl, sizes)]
        if len(sizes) >= 2:
            value = (logl[-1] - logl[-2]) / (sizes[-1] - sizes[-2])
            prev = (logl[-2] - logl[-3]) / (sizes[-2] - sizes[-3]) if len(sizes) >= 3 else float("nan")
        else:
            value, prev = values[-1], float("nan")
        residual = abs(value - prev) if np.isfinite(prev) else float("nan")
        return PressureEstimate(value, "transfer-matrix-strip", sizes, values, residual, bool(residual < tol), logl)
    raise ValueError(f"unknown pressure method {method!r}")


def pressure_value(U: Interaction) -> float:
    """Best available pressure: closed form, transfer matrix, or enumeration."""
    if U.single_site_only:
        return float(logsumexp(-U.single_site_energies()))
    if U.d <= 2:
        return pressure(U, "transfer").value
    return pressure(U, "enumeration").value


def model_pressure(model: Model, scale: float = 1.0) -> float:
    """``P(scale * U)`` for the model's interaction."""
    return pressure_value(model.interaction.scaled(scale))


# ---------------------------------------------------------------------------
# pattern probabilities and marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbabilityResult:
    value: float
    lo: float
    hi: float
    method: str
    volume: int = 0


def _gibbs_marginal(U: Interaction, volume: Box, boundary, idx: np.ndarray, target: np.ndarray, budget: int) -> float:
    ve = M.compile_volume(U, volume, boundary)
    num, den = [], []
    for states in iter_states(volume.size, U.q, budget):
        le = -ve.energies(states)
        den.append(logsumexp(le))
        hit = np.all(states[:, idx] == target, axis=1)
        num.append(logsumexp(le[hit]) if hit.any() else -np.inf)
    return float(np.exp(logsumexp(num) - logsumexp(den)))


def exact_pattern_probability(model: Model, A: Pattern, L: int | None = None, budget: int = ENUM_BUDGET) -> ProbabilityResult:
    """Probability of the cylinder of ``A``.

    Closed form for i.i.d. and Markov-product laws.  For Gibbs fields the
    value is the marginal on a torus of side ``L`` and ``[lo, hi]`` spans the
    torus value, the free boundary and every constant boundary condition on a
    box of the same size.
    """
    if A.d != model.d or A.alphabet != model.q:
        raise ValueError("pattern does not fit the model")
    if model.kind in ("iid", "markov_product"):
        v = float(np.exp(_product_log_probs(model, A.values[None])[0]))
        return ProbabilityResult(v, v, v, "closed-form", A.size)
    U = model.interaction
    R = max(U.range, 1)
    n, d = A.side, A.d
    L = n + 1 + 2 * R if L is None else L
    if L < n + 1 + R:
        raise ValueError("torus too small for the pattern and the interaction range")
    _check_budget(U.q ** (L**d), f"torus of side {L}", budget)
    vol = cube(L - 1, d)
    inner = np.indices(A.values.shape).reshape(d, -1).T + R
    strides = L ** np.arange(d - 1, -1, -1)
    idx = (inner * strides).sum(axis=1)
    target = A.flat
    torus = _gibbs_marginal(U, vol, PERIODIC, idx, target, budget)
    values = [torus, _gibbs_marginal(U, vol, FREE, idx, target, budget)]
    for a in range(U.q):
        zeta = Configuration(np.full((L + 2 * U.range,) * d, a, dtype=np.int8), U.q, (-U.range,) * d)
        values.append(_gibbs_marginal(U, vol, zeta, idx, target, budget))
    return ProbabilityResult(torus, min(values), max(values), "torus-enumeration", L**d)


def joint_marginal(model: Model, sites, budget: int = ENUM_BUDGET) -> np.ndarray:
    """Joint law of the symbols at ``sites`` as an array of shape ``(q,)*len(sites)``."""
    sites = np.asarray(sites, dtype=np.int64).reshape(-1, model.d)
    k, q = len(sites), model.q
    _check_budget(q**k, "joint marginal", budget)
    assign = _digits(np.arange(q**k, dtype=np.int64), k, q).astype(np.int64)
    if model.kind == "iid":
        p = np.prod(model.probs[assign], axis=1)
    elif model.kind == "markov_product":
        p = np.ones(len(assign))
        P, pi = model.transition, model.stationary
        for row in np.unique(sites[:, 0]):
            members = np.where(sites[:, 0] == row)[0]
            members = members[np.argsort(sites[members, 1], kind="stable")]
            cols = sites[members, 1]
            if len(set(cols.tolist())) != len(cols):
                raise ValueError("repeated site in joint marginal")
            p = p * pi[assign[:, members[0]]]
            for a, b in zip(members[:-1], members[1:]):
                step = np.linalg.matrix_power(P, int(sites[b, 1] - sites[a, 1]))
                p = p * step[assign[:, a], assign[:, b]]
    else:
        U = model.interaction
        R = max(U.range, 1)
        lo = sites.min(axis=0)
        span = int((sites.max(axis=0) - lo).max())
        L = span + 1 + 2 * R
        _check_budget(q ** (L**model.d), f"torus of side {L}", budget)
        local = sites - lo + R
        strides = L ** np.arange(model.d - 1, -1, -1)
        idx = (local * strides).sum(axis=1)
        lp = gibbs_log_probs(U, cube(L - 1, model.d), PERIODIC, budget)
        codes = np.zeros(len(lp), dtype=np.int64)
        states_iter = iter_states(L**model.d, q, budget)
        off = 0
        for states in states_iter:
            sub = states[:, idx].astype(np.int64)
            codes[off : off + len(states)] = sub @ (q ** np.arange(k - 1, -1, -1, dtype=np.int64))
            off += len(states)
        p = np.bincount(codes, weights=np.exp(lp), minlength=q**k)
    return p.reshape((q,) * k)


@dataclass(frozen=True)
class PhiProbe:
    value: float
    distance: int
    lower_bound: bool = True


def box_distance(A1: Box, A2: Box) -> int:
    s1, s2 = A1.sites(), A2.sites()
    return int(np.abs(s1[:, None, :] - s2[None, :, :]).sum(axis=2).min())


def mixing_phi_probe(model: Model, A1: Box, A2: Box, m: int | None = None, budget: int = ENUM_BUDGET) -> PhiProbe:
    """``max |P(E1|E2) - P(E1)| / |A1|`` over cylinder events on ``A1`` and ``A2``.

    This restricts the event class, so it is a lower bound on the mixing
    coefficient at distance ``dist(A1, A2)``.
    """
    dist = box_distance(A1, A2)
    if m is not None and m != dist:
        raise ValueError(f"boxes are at distance {dist}, not {m}")
    if dist == 0:
        raise ValueError("boxes overlap")
    sites = np.concatenate([A1.sites(), A2.sites()])
    joint = joint_marginal(model, sites, budget).reshape(model.q**A1.size, model.q**A2.size)
    p1 = joint.sum(axis=1)
    p2 = joint.sum(axis=0)
    ok = p2 > 0
    cond = joint[:, ok] / p2[ok]
    val = float(np.abs(cond - p1[:, None]).max()) / A1.size if ok.any() else 0.0
    return PhiProbe(val, dist)


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------


def _torus_side(U: Interaction, budget: int) -> int:
    L = max(2 * max(U.range, 1) + 1, 2)
    while U.q ** ((L + 1) ** U.d) <= budget:
        L += 1
    if U.q ** (L**U.d) > budget:
        raise BudgetExceeded("no torus fits the enumeration budget")
    return L


def mean_energy_density(model: Model, U: Interaction | None = None, budget: int = ENUM_BUDGET) -> float:
    """``E_model[f_U]`` (defaults to the model's own interaction)."""
    U = model.interaction if U is None else U
    if model.kind == "gibbs" and U.d <= 2:
        return pressure_slope(model.interaction, U)
    if model.kind == "gibbs" and U is model.interaction:
        L = _torus_side(U, budget)
        vol = cube(L - 1, U.d)
        ve = M.compile_volume(U, vol, PERIODIC)
        lp = gibbs_log_probs(U, vol, PERIODIC, budget)
        e = np.concatenate([ve.energies(s) for s in iter_states(vol.size, U.q, budget)])
        return float(np.exp(lp) @ e) / vol.size
    total = 0.0
    for t in U.terms:
        law = joint_marginal(model, np.asarray(t.shape), budget).reshape(-1)
        finite = np.isfinite(t.table)
        if (law[~finite] > 0).any():
            return float("inf")
        total += float(law[finite] @ t.table[finite])
    return total


def pressure_slope(V: Interaction, U: Interaction, h: float = 0.02) -> float:
    """``-d/dc P(V + cU)`` at ``c = 0``, the mean of ``f_U`` under the Gibbs
    measure of ``V``, by central differences at ``h`` and ``h/2`` and one
    Richardson step."""

    def D(step):
        return (pressure_value(V + U.scaled(step)) - pressure_value(V + U.scaled(-step))) / (2 * step)

    return -(4 * D(h / 2) - D(h)) / 3


def entropy(model: Model, budget: int = ENUM_BUDGET) -> float:
    """Entropy per site in nats."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if model.kind == "iid":
            p = model.probs[model.probs > 0]
            return float(-(p * np.log(p)).sum())
        if model.kind == "markov_product":
            P, pi = model.transition, model.stationary
            terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
            return float(-(pi[:, None] * terms).sum())
    return pressure_value(model.interaction) + mean_energy_density(model, budget=budget)


def relative_entropy(Q: Model, P: Model, budget: int = ENUM_BUDGET) -> float:
    """``s(Q|P) = P(U) + E_Q f_U - s(Q)`` with ``U`` the interaction of ``P``."""
    if Q.d != P.d or Q.q != P.q:
        raise ValueError("models live on different lattices or alphabets")
    U = P.interaction
    cross = mean_energy_density(Q, None if Q.digest == P.digest else U, budget)
    return pressure_value(U) + cross - entropy(Q, budget)


def cross_entropy(Q: Model, P: Model, budget: int = ENUM_BUDGET) -> float:
    """``s(Q) + s(Q|P)``, the almost-sure limit of the waiting-time estimator."""
    return entropy(Q, budget) + relative_entropy(Q, P, budget)


# ---------------------------------------------------------------------------
# exhaustive hitting laws
# ---------------------------------------------------------------------------


@dataclass
class HittingLawTable:
    pattern: Pattern
    K: int
    model_hash: str
    prob: np.ndarray  # Pr(tau <= k), x = 0 excluded
    prob_with_origin: np.ndarray  # Pr(some placement in [0,k]^d, x = 0 allowed)
    mean_N: np.ndarray  # E N_k, origin included
    mean_N2: np.ndarray
    mean_N_excl: np.ndarray  # origin excluded
    mean_N2_excl: np.ndarray
    pattern_prob: float  # Pr(window shows A at the origin)
    present_prob: float  # Pr(A present anywhere in the window)
    window_side: int
    states: int
    source: str

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.K + 1)

    @property
    def volume(self) -> int:
        return self.window_side**self.pattern.d

    def survival(self, k: int) -> float:
        return 1.0 - float(self.prob[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "prob"])
        for k, p in zip(self.k, self.prob):
            w.writerow([int(k), repr(float(p))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.flat.tolist(),
            "pattern_hash": self.pattern.digest,
            "n": self.pattern.side,
            "d": self.pattern.d,
            "K": self.K,
            "model_hash": self.model_hash,
            "budget_used": self.states,
            "source": self.source,
            "prob": self.prob.tolist(),
            "prob_with_origin": self.prob_with_origin.tolist(),
            "mean_N": self.mean_N.tolist(),
            "mean_N2": self.mean_N2.tolist(),
            "mean_N_excl": self.mean_N_excl.tolist(),
            "mean_N2_excl": self.mean_N2_excl.tolist(),
            "pattern_prob": self.pattern_prob,
            "present_prob": self.present_prob,
            "window_side": self.window_side,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def brute_force_hitting_law(model: Model, A: Pattern, K: int, budget: int = ENUM_BUDGET) -> HittingLawTable:
    """Exact law of the first occurrence of ``A`` up to ``K`` by enumerating the
    window ``C_{K+n}``; both origin conventions are reported."""
    if A.d != model.d or A.alphabet != model.q:
        raise ValueError("pattern does not fit the model")
    n, d, q = A.side, A.d, model.q
    side = K + n + 1
    _check_budget(q ** (side**d), f"window C_{K + n}", budget)
    xs = np.indices((K + 1,) * d).reshape(d, -1).T
    offs = np.indices((n + 1,) * d).reshape(d, -1).T
    strides = side ** np.arange(d - 1, -1, -1)
    idx = ((xs[:, None, :] + offs[None, :, :]) * strides).sum(axis=2)  # (X, m)
    shell = xs.max(axis=1)
    prob = np.zeros(K + 1)
    prob_o = np.zeros(K + 1)
    mN = np.zeros(K + 1)
    mN2 = np.zeros(K + 1)
    mNe = np.zeros(K + 1)
    mN2e = np.zeros(K + 1)
    p_origin = 0.0
    count = 0
    for states, lp in window_log_probs(model, side, budget):
        w = np.exp(lp)
        count += len(states)
        match = np.all(states[:, idx] == A.flat, axis=2)  # (S, X)
        p_origin += float(w @ match[:, 0])
        for k in range(K + 1):
            inside = shell <= k
            N = match[:, inside].sum(axis=1).astype(np.float64)
            Ne = N - match[:, 0]
            prob[k] += float(w @ (Ne > 0))
            prob_o[k] += float(w @ (N > 0))
            mN[k] += float(w @ N)
            mN2[k] += float(w @ N**2)
            mNe[k] += float(w @ Ne)
            mN2e[k] += float(w @ Ne**2)
    return HittingLawTable(
        A, K, model.digest, prob, prob_o, mN, mN2, mNe, mN2e, p_origin, float(prob_o[K]), side, count,
        "torus-enumeration" if model.kind == "gibbs" else "exact-enumeration",
    )


def bad_pattern_mass(model: Model, n: int, nonnegative_only: bool = False, budget: int = ENUM_BUDGET) -> float:
    """Total probability of badly self-repeating ``n``-patterns (closed-form laws)."""
    from .pattern_stats import bad_mask

    d, q = model.d, model.q
    m = (n + 1) ** d
    _check_budget(q**m, f"enumeration of {n}-patterns", budget)
    total = 0.0
    for states in iter_states(m, q, budget):
        grids = states.reshape((-1,) + (n + 1,) * d)
        bad = bad_mask(grids, nonnegative_only)
        if bad.any():
            total += float(np.exp(_product_log_probs(model, grids[bad])).sum())
    return total


def standard_fact_sum(model: Model, n: int, q_exp: float, budget: int = ENUM_BUDGET) -> float:
    """``(1/|C_n|) log sum_A Pr(A)^(1-q)`` by enumerating all ``n``-patterns."""
    d, q = model.d, model.q
    m = (n + 1) ** d
    parts = []
    for states in iter_states(m, q, budget):
        lp = _product_log_probs(model, states.reshape((-1,) + (n + 1,) * d))
        lp = lp[np.isfinite(lp)]
        parts.append(logsumexp((1.0 - q_exp) * lp) if lp.size else -np.inf)
    return float(logsumexp(parts)) / m
