"""Experiment drivers for the limit laws of occurrence, repetition and waiting times.

Each driver samples replicas (in fixed chunks, so results never depend on
the worker count), reduces them, and pairs the estimate with a target
produced by :mod:`gibbsrare.exact` or a closed form, labelled with its
provenance.  Per-site normalizations use ``|C_n| = (n+1)^d``; the ``n^d``
variants are reported alongside where they differ.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln, logsumexp

from . import exact, samplers
from .lattice import Pattern, cube, restrict
from .models import Model
from .pattern_stats import (
    absence_matrix,
    bad_mask,
    default_scale,
    factorization_from_absence,
    first_occurrence,
    lambda_estimate,
    lambda_from_sample,
    survival_curve,
)

PLACEMENT_BUDGET = 3e10
CHUNK = 64
DEFAULT_T_GRID = np.linspace(0.0, 4.0, 41)
DEFAULT_Q_GRID = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5)


class FeasibilityError(RuntimeError):
    """The requested experiment exceeds the placement budget."""


@dataclass
class Target:
    value: float
    provenance: str

    def to_dict(self) -> dict:
        return {"value": self.value, "provenance": self.provenance}


@dataclass
class ExperimentResult:
    kind: str
    models: dict
    n_range: list
    M: int
    per_n: list
    targets: dict
    passed: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "models": self.models,
            "n_range": self.n_range,
            "M": self.M,
            "per_n": self.per_n,
            "targets": {k: v.to_dict() for k, v in self.targets.items()},
            "passed": self.passed,
            "meta": self.meta,
        }


# ---------------------------------------------------------------------------
# costs and caps for i.i.d. fields
# ---------------------------------------------------------------------------


def _compositions(m: int, q: int):
    for cut in itertools.combinations(range(m + q - 1), q - 1):
        parts, prev = [], -1
        for c in cut + (m + q - 1,):
            parts.append(c - prev - 1)
            prev = c
        yield parts


def pattern_law(pattern_model: Model, field_model: Model, n: int):
    """Exact law of ``log Pr_field(A)`` for ``A`` drawn from ``pattern_model``.

    Returns ``(log_field_prob, weight)`` over symbol-count classes.
    """
    if pattern_model.kind != "iid" or field_model.kind != "iid":
        raise ValueError("closed-form pattern laws need iid models")
    q, m = field_model.q, (n + 1) ** field_model.d
    with np.errstate(divide="ignore"):
        lf, lq = np.log(field_model.probs), np.log(pattern_model.probs)
    lp, lw = [], []
    for counts in _compositions(m, q):
        c = np.asarray(counts, dtype=np.float64)
        mult = gammaln(m + 1) - gammaln(c + 1).sum()
        used = c > 0
        lp.append(float((c[used] * lf[used]).sum()))
        lw.append(float(mult + (c[used] * lq[used]).sum()))
    lp, lw = np.asarray(lp), np.asarray(lw)
    ok = np.isfinite(lw)
    return lp[ok], np.exp(lw[ok])


def censoring_probability(lp: np.ndarray, w: np.ndarray, K: int, d: int) -> float:
    """Approximate ``Pr(tau > K)`` with the exponential law at lambda = 1."""
    with np.errstate(over="ignore"):
        surv = np.exp(-np.exp(lp) * float((K + 1) ** d - 1))
    return float(w @ np.where(np.isfinite(lp), surv, 1.0))


def expected_cost(lp: np.ndarray, w: np.ndarray, K: int, d: int) -> float:
    """Expected placements scanned per replica with cap ``K``."""
    cap = float((K + 1) ** d)
    with np.errstate(over="ignore"):
        inv = np.exp(-lp)
        cost = np.where(np.isfinite(lp), inv * -np.expm1(-cap / inv), cap)
    return float(w @ np.minimum(cost, cap))


def choose_cap(lp: np.ndarray, w: np.ndarray, d: int, censor: float = 2e-3, kmax: int = (1 << 21) - 64) -> int:
    lo, hi = 1, 2
    while censoring_probability(lp, w, hi, d) > censor:
        hi *= 2
        if hi > kmax:
            return kmax
    while lo < hi:
        mid = (lo + hi) // 2
        if censoring_probability(lp, w, mid, d) > censor:
            lo = mid + 1
        else:
            hi = mid
    return lo


def plan(pattern_model: Model, field_model: Model, n: int, M: int, K: int | None = None,
         censor: float = 2e-3, budget: float = PLACEMENT_BUDGET) -> dict:
    """Cap and cost estimate; raises :class:`FeasibilityError` over budget."""
    lp, w = pattern_law(pattern_model, field_model, n)
    d = field_model.d
    K = choose_cap(lp, w, d, censor) if K is None else int(K)
    cost = M * expected_cost(lp, w, K, d)
    info = {"n": n, "K": K, "expected_placements": cost, "predicted_censoring": censoring_probability(lp, w, K, d)}
    if cost > budget:
        raise FeasibilityError(
            f"n={n}: about {cost:.3g} placement checks for M={M} exceed the budget {budget:.3g}"
        )
    return info


# ---------------------------------------------------------------------------
# replica batches
# ---------------------------------------------------------------------------


def _materialized_hits(model: Model, seed: int, replicas, n: int, K: int, mode: str, pattern=None, q_model=None):
    """Hits on explicitly sampled windows (Markov-product and Gibbs fields)."""
    side = K + n + 1 + 2 * max(model.interaction.range, 1)
    out, pats = [], []
    for r in replicas:
        spec = samplers.SamplerSpec(model, side, seed=seed, replica=int(r))
        if mode == "waiting":
            xi, sigma = samplers.sample_pair(samplers.SamplerSpec(q_model, side, replica=int(r)), spec, seed)
            A = restrict(xi, cube(n, model.d))
        else:
            sigma = samplers.sample(spec)
            A = restrict(sigma, cube(n, model.d)) if mode == "repetition" else pattern
        hit = first_occurrence(A, sigma, K)
        out.append(hit if isinstance(hit, int) else -1)
        pats.append(A.flat)
    return samplers.HitBatch(np.asarray(list(replicas)), np.asarray(out, dtype=np.int64), np.asarray(pats), np.full(len(out), K))


def run_hits(model: Model, seed: int, M: int, n: int, K: int, mode: str = "fixed", pattern: Pattern | None = None,
             q_model: Model | None = None, workers: int | None = 1, chunk: int = CHUNK) -> samplers.HitBatch:
    """First-occurrence radii for replicas ``0..M-1`` in fixed chunks."""
    implicit = model.kind == "iid" and (q_model is None or q_model.kind == "iid")

    def work(rs):
        if implicit:
            return samplers.implicit_hits(model, seed, rs, n, K, mode, pattern, q_model)
        return _materialized_hits(model, seed, rs, n, K, mode, pattern, q_model)

    parts = samplers.parallel_map(work, samplers.chunked(M, chunk), workers)
    return samplers.HitBatch(
        np.concatenate([p.replicas for p in parts]),
        np.concatenate([p.hits for p in parts]),
        np.concatenate([p.patterns for p in parts]),
        np.concatenate([p.K for p in parts]),
    )


def pattern_log_probs(model: Model, patterns: np.ndarray, n: int) -> np.ndarray:
    grids = np.asarray(patterns).reshape((-1,) + (n + 1,) * model.d)
    if model.kind in ("iid", "markov_product"):
        return exact._product_log_probs(model, grids)
    return np.array([math.log(exact.exact_pattern_probability(model, Pattern(g, model.q)).value) for g in grids])


def _mean_ci(x: np.ndarray, z: float = 1.96) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()) if x.size else float("nan"), float("nan")
    return float(math.fsum(x) / x.size), float(z * x.std(ddof=1) / math.sqrt(x.size))


# ---------------------------------------------------------------------------
# hitting law against enumeration
# ---------------------------------------------------------------------------


def hitting_oracle_experiment(model: Model, A: Pattern, K: int, M: int, seed: int, workers: int | None = 1) -> ExperimentResult:
    """Monte Carlo ``Pr(tau_A <= k)`` against the exhaustive table."""
    table = exact.brute_force_hitting_law(model, A, K)
    batch = run_hits(model, seed, M, A.side, K, "fixed", A, workers=workers)
    rows, ok = [], True
    for k in range(K + 1):
        p_hat = float(np.mean((batch.hits >= 1) & (batch.hits <= k)))
        p = float(table.prob[k])
        se = math.sqrt(max(p * (1 - p), 1e-300) / M)
        within = abs(p_hat - p) <= 4 * se if p * (1 - p) > 0 else p_hat == p
        ok &= bool(within)
        rows.append({"k": k, "mc": p_hat, "exact": p, "se": se, "z": (p_hat - p) / se if se > 0 else 0.0, "within_4se": bool(within)})
    return ExperimentResult(
        "hitting_oracle", {"P": model.describe()}, [A.side], M, rows,
        {"table": Target(float(table.prob[-1]), "exact-engine brute_force_hitting_law")},
        {"within_4se": bool(ok)}, {"seed": seed, "K": K, "pattern_hash": A.digest},
    )


# ---------------------------------------------------------------------------
# exponential law
# ---------------------------------------------------------------------------


@dataclass
class ExponentialLawResult:
    curve: object
    lam: float
    lam_t: float
    prob: float
    K: int
    hits: np.ndarray

    def to_dict(self) -> dict:
        return {"curve": self.curve.to_dict(), "lambda": self.lam, "lambda_t": self.lam_t, "prob": self.prob, "K": self.K}


def exponential_law_experiment(model: Model, A: Pattern, M: int, seed: int, t_grid=DEFAULT_T_GRID, lam="estimate",
                               gamma: float = 0.5, K: int | None = None, workers: int | None = 1) -> ExponentialLawResult:
    """Survival of ``tau_A`` rescaled by ``lambda * Pr(A)`` against ``exp(-t)``.

    ``lam="estimate"`` uses the empirical ``lambda`` at ``t = f_A``; ``lam=1``
    (or any number) fixes it.
    """
    prob = exact.exact_pattern_probability(model, A).value
    d = A.d
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if K is None:
        K = int(math.ceil((t_grid.max() / (0.25 * prob)) ** (1.0 / d))) + 2
    batch = run_hits(model, seed, M, A.side, K, "fixed", A, workers=workers)
    t_f = default_scale(prob, gamma)
    if lam == "estimate":
        est = lambda_from_sample(batch.hits, t_f, prob, d, K)
        lam_v = est.value
    else:
        lam_v = float(lam)
    curve = survival_curve(batch.hits, K, prob, lam_v, d, t_grid)
    curve.require_low_censoring()
    return ExponentialLawResult(curve, lam_v, float(t_f), prob, K, batch.hits)


def repetition_law_experiment(model: Model, n: int, M: int, seed: int, t_grid=DEFAULT_T_GRID, gamma: float = 0.5,
                              K: int | None = None, workers: int | None = 1) -> ExperimentResult:
    """Rescaled first repetition given a good initial pattern; bad patterns counted apart."""
    d = model.d
    if K is None:
        lp, w = pattern_law(model, model, n) if model.kind == "iid" else (None, None)
        K = choose_cap(lp, w, d) if lp is not None else int(math.ceil((8 * model.q ** ((n + 1) ** d)) ** (1 / d)))
    batch = run_hits(model, seed, M, n, K, "repetition", workers=workers)
    grids = batch.patterns.reshape((-1,) + (n + 1,) * d)
    bad = bad_mask(grids)
    good = ~bad
    if not good.any():
        raise RuntimeError("every sampled pattern is badly self-repeating")
    probs = np.exp(pattern_log_probs(model, batch.patterns[good], n))
    hits = batch.hits[good]
    t_r = np.floor(probs ** (-gamma))
    radius = np.floor(t_r ** (1.0 / d) + 1e-12)
    surv = float(np.mean((hits < 0) | (hits > radius)))
    lam = lambda_estimate(surv, float(np.mean(t_r * probs)), 1.0, None).value
    curve = survival_curve(hits, K, probs, lam, d, t_grid)
    bad_exact = exact.bad_pattern_mass(model, n) if model.kind != "gibbs" and model.q ** ((n + 1) ** d) <= 1 << 24 else float("nan")
    return ExperimentResult(
        "repetition", {"P": model.describe()}, [n], M,
        [{"n": n, "bad_fraction": float(bad.mean()), "curve": curve.to_dict(), "lambda": lam}],
        {"bad_mass": Target(bad_exact, "exact-engine bad_pattern_mass")},
        {}, {"seed": seed, "K": K, "censored_fraction": curve.censored_fraction},
    )


# ---------------------------------------------------------------------------
# entropy and waiting times
# ---------------------------------------------------------------------------


def _log_time_estimates(batch: samplers.HitBatch, n: int, d: int) -> dict:
    cens = batch.hits < 0
    vals = np.where(cens, batch.K, batch.hits).astype(np.float64)
    logs = np.log(np.maximum(vals, 1.0))
    m_site = (n + 1) ** d
    est, ci = _mean_ci(d * logs / m_site)
    raw, raw_ci = _mean_ci(d * logs / n**d)
    return {
        "n": n,
        "estimate": est,
        "ci": ci,
        "estimate_nd": raw,
        "ci_nd": raw_ci,
        "censored_fraction": float(cens.mean()),
        "K": int(batch.K.max()) if batch.K.size else 0,
        "mean_log_time": float(logs.mean()),
    }


def _log_time_experiment(kind: str, P: Model, Q: Model | None, n_range, M: int, seed: int, target: Target,
                         workers: int | None, caps: dict | None, budget: float) -> ExperimentResult:
    per_n = []
    pat_model = Q if Q is not None else P
    for n in n_range:
        if P.kind == "iid" and pat_model.kind == "iid":
            info = plan(pat_model, P, n, M, (caps or {}).get(n), budget=budget)
            K = info["K"]
        else:
            K = (caps or {}).get(n)
            if K is None:
                raise ValueError(f"give an explicit cap for n={n} with non-iid models")
            info = {"n": n, "K": K}
        batch = run_hits(P, seed, M, n, K, "waiting" if Q is not None else "repetition", q_model=Q, workers=workers)
        row = _log_time_estimates(batch, n, P.d)
        row["plan"] = info
        row["gap"] = abs(row["estimate"] - target.value)
        row["relative_gap"] = row["gap"] / abs(target.value) if target.value else row["gap"]
        row["censoring_ok"] = row["censored_fraction"] < 0.01
        per_n.append(row)
    models = {"P": P.describe()}
    if Q is not None:
        models["Q"] = Q.describe()
    return ExperimentResult(kind, models, list(n_range), M, per_n, {"limit": target}, {}, {"seed": seed})


def entropy_via_repetition(model: Model, n_range, M: int, seed: int, workers: int | None = 1, caps: dict | None = None,
                           budget: float = PLACEMENT_BUDGET) -> ExperimentResult:
    """``(d/|C_n|) log R_n`` per ``n`` against the entropy of the field."""
    target = Target(exact.entropy(model), "exact-engine entropy")
    return _log_time_experiment("entropy", model, None, n_range, M, seed, target, workers, caps, budget)


def waiting_time_experiment(Q: Model, P: Model, n_range, M: int, seed: int, workers: int | None = 1, caps: dict | None = None,
                            budget: float = PLACEMENT_BUDGET) -> ExperimentResult:
    """``(d/|C_n|) log W_n`` against ``s(Q) + s(Q|P)``."""
    target = Target(exact.cross_entropy(Q, P), "exact-engine entropy + relative_entropy")
    return _log_time_experiment("waiting", P, Q, n_range, M, seed, target, workers, caps, budget)


def strong_approximation_fractions(model: Model, n_range, M: int, seed: int, eps: float = 4.0, workers: int | None = 1) -> list[dict]:
    """Fraction of replicas with ``log(R_n^d Pr(sigma_{C_n}))`` in ``[-eps log n, log log n^eps]``."""
    out = []
    for n in n_range:
        info = plan(model, model, n, M)
        batch = run_hits(model, seed, M, n, info["K"], "repetition", workers=workers)
        lp = pattern_log_probs(model, batch.patterns, n)
        R = np.where(batch.hits < 0, batch.K, batch.hits).astype(np.float64)
        val = model.d * np.log(R) + lp
        lo, hi = -eps * math.log(n), math.log(eps * math.log(n))
        out.append({"n": n, "fraction": float(np.mean((val >= lo) & (val <= hi))), "lo": lo, "hi": hi,
                    "censored_fraction": float(np.mean(batch.hits < 0))})
    return out


# ---------------------------------------------------------------------------
# fluctuations
# ---------------------------------------------------------------------------


@dataclass
class ThetaSquared:
    value: float
    coarse: float
    residual: float
    stable: bool
    h: float


def theta_squared(model: Model, h: float = 0.05, tol: float = 1e-4) -> ThetaSquared:
    """Second derivative of ``q -> P((1-q) U)`` at 0: central differences at
    ``h`` and ``h/2`` combined by one Richardson step."""
    P = {}

    def f(x):
        if x not in P:
            P[x] = exact.model_pressure(model, 1.0 - x)
        return P[x]

    def D(step):
        return (f(step) - 2 * f(0.0) + f(-step)) / step**2

    coarse, fine = D(h), D(h / 2)
    value = (4 * fine - coarse) / 3
    residual = abs(value - fine)
    return ThetaSquared(value, coarse, residual, residual <= tol * max(1.0, abs(value)), h)


def clt_experiment(model: Model, n: int, M: int, seed: int, statistic: str = "surprisal", workers: int | None = 1,
                   K: int | None = None) -> ExperimentResult:
    """Standardized fluctuations ``(Y - mean Y) / |C_n|^(1/2)`` and their variance against theta^2.

    ``surprisal``: ``Y = -log Pr(sigma_{C_n})``; ``waiting``/``repetition``:
    ``Y = d log W_n`` or ``d log R_n``.
    """
    d = model.d
    m_site = (n + 1) ** d
    if statistic == "surprisal":
        if model.kind == "iid":
            keys = samplers.stream_keys(seed, range(M))
            pats = samplers.initial_patterns(model, keys, n)
        else:
            pats = np.stack([
                restrict(samplers.sample(samplers.SamplerSpec(model, n + 1 + 2 * model.interaction.range, seed=seed, replica=r)), cube(n, d)).flat
                for r in range(M)
            ])
        Y = -pattern_log_probs(model, pats, n)
    elif statistic in ("waiting", "repetition"):
        mode = statistic
        if K is None:
            K = plan(model, model, n, M)["K"]
        batch = run_hits(model, seed, M, n, K, mode, q_model=model if mode == "waiting" else None, workers=workers)
        Y = d * np.log(np.where(batch.hits < 0, batch.K, batch.hits).astype(np.float64))
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    Z = (Y - math.fsum(Y) / Y.size) / math.sqrt(m_site)
    var = float(np.var(Z, ddof=1))
    th = theta_squared(model)
    if var > 0:
        ks = stats.kstest(Z, "norm", args=(0.0, math.sqrt(var)))
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        ks_stat, ks_p = 0.0, 1.0
    rel = abs(var - th.value) / th.value if th.value > 1e-12 else abs(var - th.value)
    se_var = var * math.sqrt(2.0 / (M - 1))
    row = {"n": n, "variance": var, "variance_se": se_var, "relative_error": rel, "ks_statistic": ks_stat, "ks_pvalue": ks_p, "statistic": statistic}
    return ExperimentResult(
        "clt", {"P": model.describe()}, [n], M, [row],
        {"theta2": Target(th.value, f"finite-difference pressure (h={th.h}, Richardson residual {th.residual:.2e})")},
        {}, {"seed": seed, "theta_stable": th.stable},
    )


# ---------------------------------------------------------------------------
# large deviations
# ---------------------------------------------------------------------------


def predicted_cumulant(Q: Model, P: Model, q: float) -> float:
    """Limit of ``(1/|C_n|) log E W_n^{qd}`` for ``xi ~ Q``, ``sigma ~ P``.

    With ``V`` the interaction of ``Q`` and ``U`` that of ``P``:
    ``P(V - qU) - P(V) + q P(U)`` for ``q >= -1`` and
    ``P(V + U) - P(V) - P(U)`` below.  For ``Q = P`` this is
    ``P((1-q)U) + (q-1)P(U)`` and ``P(2U) - 2P(U)``.
    """
    U, V = P.interaction, Q.interaction
    pv, pu = exact.pressure_value(V), exact.pressure_value(U)
    if q >= -1:
        return exact.pressure_value(V + U.scaled(-q)) - pv + q * pu
    return exact.pressure_value(V + U) - pv - pu


def standard_fact_check(model: Model, n_values, q_values) -> list[dict]:
    """Exact ``(1/|C_n|) log sum_A Pr(A)^(1-q)`` against ``P((1-q)U) - (1-q)P(U)``."""
    pu = exact.pressure_value(model.interaction)
    rows = []
    for n in n_values:
        for q in q_values:
            lhs = exact.standard_fact_sum(model, n, q)
            rhs = exact.model_pressure(model, 1.0 - q) - (1.0 - q) * pu
            rows.append({"n": n, "q": q, "exact_sum": lhs, "pressure_formula": rhs, "gap": abs(lhs - rhs)})
    return rows


@dataclass
class CumulantCurve:
    q: np.ndarray
    n: list
    empirical: dict  # n -> array over q
    lower: dict
    upper: dict
    predicted: np.ndarray
    censoring: dict

    def gaps(self, n: int) -> np.ndarray:
        return np.abs(self.empirical[n] - self.predicted)

    def relative_gaps(self, n: int) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.gaps(n) / np.abs(self.predicted)

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "predicted": self.predicted.tolist(),
            "per_n": [
                {"n": n, "empirical": self.empirical[n].tolist(), "lower": self.lower[n].tolist(),
                 "upper": self.upper[n].tolist(), "censored_fraction": self.censoring[n]}
                for n in self.n
            ],
        }


def empirical_cumulant(hits: np.ndarray, caps: np.ndarray, q_grid, n: int, d: int):
    """``(1/|C_n|) log mean W^{qd}`` with brackets for censored replicas."""
    q_grid = np.asarray(q_grid, dtype=np.float64)
    cens = hits < 0
    logw = np.log(np.where(cens, caps, hits).astype(np.float64))
    m_site = (n + 1) ** d
    M = hits.size
    est, lo, hi = [], [], []
    for q in q_grid:
        if q == 0.0:
            est.append(0.0), lo.append(0.0), hi.append(0.0)
            continue
        terms = q * d * logw
        val = (logsumexp(terms) - math.log(M)) / m_site
        obs = terms[~cens]
        without = (logsumexp(obs) - math.log(M)) / m_site if obs.size else -np.inf
        est.append(float(val))
        if q > 0:
            lo.append(float(val))
            hi.append(float(val) if not cens.any() else float("inf"))
        else:
            lo.append(float(without))
            hi.append(float(val))
    return np.asarray(est), np.asarray(lo), np.asarray(hi)


def ldp_cumulant(Q: Model, P: Model, q_grid=DEFAULT_Q_GRID, n_range=(2, 3), M: int = 200, seed: int = 0,
                 workers: int | None = 1, budget: float = PLACEMENT_BUDGET, strict: bool = True) -> CumulantCurve:
    """Empirical cumulant curve of ``log W_n`` against the pressure formula.

    Positive ``q`` needs uncensored waiting times, so the cap is chosen for
    about 0.1% censoring and the run is refused when its expected cost
    exceeds ``budget``; with ``strict=False`` such ``n`` are skipped.
    """
    q_grid = np.asarray(q_grid, dtype=np.float64)
    predicted = np.array([predicted_cumulant(Q, P, q) for q in q_grid])
    emp, low, up, cens, used = {}, {}, {}, {}, []
    for n in n_range:
        try:
            info = plan(Q, P, n, M, censor=1e-3, budget=budget)
        except FeasibilityError:
            if strict:
                raise
            continue
        batch = run_hits(P, seed, M, n, info["K"], "waiting", q_model=Q, workers=workers)
        emp[n], low[n], up[n] = empirical_cumulant(batch.hits, batch.K, q_grid, n, P.d)
        cens[n] = float(np.mean(batch.hits < 0))
        used.append(n)
    return CumulantCurve(q_grid, used, emp, low, up, predicted, cens)


# ---------------------------------------------------------------------------
# rate functions
# ---------------------------------------------------------------------------


class NonConcaveObjective(RuntimeError):
    """The Legendre objective is not concave on the q-grid."""


@dataclass
class RateFunctionResult:
    u: np.ndarray
    I: np.ndarray
    q_star: np.ndarray
    convex: bool
    entropy: float

    def to_dict(self) -> dict:
        return {"u": self.u.tolist(), "I": self.I.tolist(), "q_star": self.q_star.tolist(), "convex": self.convex, "entropy": self.entropy}


def cumulant_function(model: Model):
    """``q -> P((1-q)U) + (q-1)P(U)``, vectorized where a closed form exists."""
    U = model.interaction
    pu = exact.pressure_value(U)
    if U.single_site_only:
        e = U.single_site_energies()

        def W(q):
            q = np.asarray(q, dtype=np.float64)
            return logsumexp(-np.multiply.outer(1.0 - q, e), axis=-1) + (q - 1.0) * pu

        return W

    def W(q):
        q = np.atleast_1d(np.asarray(q, dtype=np.float64))
        out = np.array([exact.pressure_value(U.scaled(1.0 - x)) + (x - 1.0) * pu for x in q])
        return out if out.size > 1 else out[0]

    return W


def rate_function(model: Model, u_grid, q_range=(-20.0, 20.0), q_points: int = 4001, q_min: float | None = None,
                  tol: float = 1e-9) -> RateFunctionResult:
    """``I(u) = sup_q {u q - W(q)}`` by grid maximization plus golden-section refinement.

    ``q_min`` restricts the supremum to ``q > q_min`` (``-1`` for the
    waiting-time variant).
    """
    W = cumulant_function(model)
    lo = q_range[0] if q_min is None else max(q_range[0], q_min + 1e-9)
    qs = np.linspace(lo, q_range[1], q_points)
    Wq = np.asarray(W(qs), dtype=np.float64)
    second = np.diff(Wq, 2)
    scale = max(1.0, float(np.abs(Wq).max()))
    convex = bool((second >= -1e-10 * scale).all())
    if not convex:
        raise NonConcaveObjective("cumulant function is not convex on the grid; refine the pressure grid")
    u_grid = np.atleast_1d(np.asarray(u_grid, dtype=np.float64))
    I, qstar = [], []
    for u in u_grid:
        obj = u * qs - Wq
        i = int(np.argmax(obj))
        if 0 < i < len(qs) - 1:
            res = optimize.minimize_scalar(
                lambda x: -(u * x - float(W(x))), bracket=(qs[i - 1], qs[i], qs[i + 1]), method="golden", tol=tol
            )
            best_q, best = float(res.x), float(-res.fun)
            if best < obj[i]:
                best_q, best = float(qs[i]), float(obj[i])
        else:
            best_q, best = float(qs[i]), float(obj[i])
        I.append(best)
        qstar.append(best_q)
    I = np.asarray(I)
    s = exact.entropy(model)
    return RateFunctionResult(u_grid, I, np.asarray(qstar), convex and _convex_values(u_grid, I), s)


def _convex_values(u: np.ndarray, I: np.ndarray, tol: float = 1e-9) -> bool:
    if u.size < 3:
        return True
    order = np.argsort(u)
    u, I = u[order], I[order]
    slopes = np.diff(I) / np.diff(u)
    return bool((np.diff(slopes) >= -tol * max(1.0, np.abs(slopes).max())).all())


def waiting_ld_exponent(model: Model, u: float, upper: bool = True, q_points: int = 4001) -> float:
    """``inf_{q > -1} {-(s +/- u) q + W(q)}`` for the waiting-time deviations."""
    s = exact.entropy(model)
    target = s + u if upper else s - u
    res = rate_function(model, [target], q_min=-1.0, q_points=q_points)
    return -float(res.I[0])


def waiting_u0(model: Model, h: float = 1e-5) -> dict:
    """``|W'(-1+) - s|`` by a one-sided difference; flagged approximate."""
    W = cumulant_function(model)
    deriv = (float(W(-1.0 + 2 * h)) - float(W(-1.0 + h))) / h
    return {"u0": abs(deriv - exact.entropy(model)), "approximate": True, "h": h}


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------


def factorization_diagnostic(model: Model, A: Pattern, t_side: int, delta: int, k: int, M: int, seed: int = 0,
                             thin: int = 10, burn_in: int | None = None):
    """Absence of ``A`` from ``k`` cubes of side ``t_side`` spaced ``delta`` apart:
    joint frequency against the product of the pooled marginal.

    i.i.d. and Markov-product fields are sampled independently per replica;
    Gibbs fields come from one heat-bath chain thinned every ``thin`` sweeps
    on a torus whose wrap-around gap is at least ``delta``.
    """
    span = (k - 1) * (t_side + delta) + t_side + A.side + 1
    if model.kind == "gibbs":
        configs = samplers.glauber_chain(model, span + delta, M, thin, burn_in, seed)
    else:
        configs = [samplers.sample(samplers.SamplerSpec(model, span, seed=seed, replica=r)) for r in range(M)]
    return factorization_from_absence(absence_matrix(configs, A, t_side, delta, k), delta)
