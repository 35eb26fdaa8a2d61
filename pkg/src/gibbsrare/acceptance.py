"""Built-in acceptance checks, one function per criterion.

Each ``criterion_<k>`` returns a :class:`CriterionResult`; :func:`run_suite`
runs a named subset and :func:`format_table` prints one row per criterion.
"""
from __future__ import annotations

import functools
import inspect
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import exact, laws, models, oracles, samplers
from .lattice import Pattern, cube
from .pattern_stats import lambda_estimate, lambda_from_table, placement_scale

SEED = 20240607


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": self.seconds, "data": self.data}


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    return wrapper


def _random_pattern(rng: np.random.Generator, n: int, d: int = 2, q: int = 2) -> Pattern:
    return Pattern(rng.integers(0, q, size=(n + 1,) * d).astype(np.int8), q)


# ---------------------------------------------------------------------------


@_timed
def criterion_1(M: int = 100_000, seed: int = SEED, workers: int | None = 1) -> CriterionResult:
    """Monte Carlo hitting law against exhaustive enumeration."""
    model = models.iid([0.5, 0.5], 2)
    A = Pattern(np.array([[1, 0], [0, 1]], dtype=np.int8), 2)
    res = laws.hitting_oracle_experiment(model, A, K=2, M=M, seed=seed, workers=workers)
    zs = [abs(r["z"]) for r in res.per_n]
    ok = res.passed["within_4se"]
    return CriterionResult(1, "hitting law vs enumeration", ok, f"max |z| = {max(zs):.2f} over k=0..2 (limit 4)",
                           data=res.to_dict())


def glauber_tv(beta: float = 0.2, L: int = 3, sweeps: int = 1_000_000, burn_in: int = 1000, seed: int = SEED) -> float:
    model = models.ising(beta, 1.0, 0.0, 2)
    counts = samplers.glauber_histogram(model, L, sweeps, burn_in, seed)
    lp = exact.gibbs_log_probs(model.interaction, cube(L - 1, 2), models.PERIODIC)
    return 0.5 * float(np.abs(counts / counts.sum() - np.exp(lp)).sum())


@_timed
def criterion_2(sweeps: int = 1_000_000, seed: int = SEED) -> CriterionResult:
    """Heat-bath state histogram on the 3x3 torus against the exact Gibbs law."""
    tv = glauber_tv(sweeps=sweeps, seed=seed)
    return CriterionResult(2, "Glauber TV distance", tv < 0.02, f"TV = {tv:.4f} (limit 0.02)", data={"tv": tv})


@_timed
def criterion_3(M: int = 5000, seed: int = SEED, workers: int | None = 1) -> CriterionResult:
    """Exponential law at n=2 and the sup-gap ordering between n=1 and n=3."""
    model = models.iid([0.5, 0.5], 2)
    rng = np.random.default_rng(seed)
    t_grid = laws.DEFAULT_T_GRID
    out = {}
    for n in (1, 2, 3):
        A = _random_pattern(rng, n)
        r = laws.exponential_law_experiment(model, A, M, seed + n, t_grid, workers=workers)
        g, hw = r.curve.sup_gap_ci()
        out[n] = {"sup_gap": g, "ci": hw, "lambda": r.lam, "pattern": A.flat.tolist()}
    main_ok = out[2]["sup_gap"] <= 0.05
    lo1, hi3 = out[1]["sup_gap"] - out[1]["ci"], out[3]["sup_gap"] + out[3]["ci"]
    hi1, lo3 = out[1]["sup_gap"] + out[1]["ci"], out[3]["sup_gap"] - out[3]["ci"]
    separated = lo1 > hi3 or lo3 > hi1
    order_ok = (out[1]["sup_gap"] > out[3]["sup_gap"]) if separated else True
    detail = (f"n=2 sup-gap {out[2]['sup_gap']:.4f} (limit 0.05); n=1 {out[1]['sup_gap']:.4f}±{out[1]['ci']:.4f}, "
              f"n=3 {out[3]['sup_gap']:.4f}±{out[3]['ci']:.4f}, CIs {'separate' if separated else 'overlap'}")
    return CriterionResult(3, "exponential law", main_ok and order_ok, detail, data={str(k): v for k, v in out.items()})


@_timed
def criterion_4(patterns: int = 50, M: int = 20_000, seed: int = SEED, workers: int | None = 1) -> CriterionResult:
    """lambda at the largest placement scale with t Pr(A) <= 1/2 stays in (0, 2.1]."""
    model = models.iid([0.5, 0.5], 2)
    rng = np.random.default_rng(seed)
    lams = []
    for i in range(patterns):
        n = 1 if i < patterns // 2 else 2
        A = _random_pattern(rng, n)
        prob = 0.5 ** A.size
        t = placement_scale(prob, 2)
        r = int(round(math.sqrt(t + 1))) - 1
        if n == 1:
            lam = lambda_from_table(exact.brute_force_hitting_law(model, A, r), t, prob).value
        else:
            batch = laws.run_hits(model, seed + i, M, n, r, "fixed", A, workers=workers)
            surv = float(np.mean(batch.hits < 0))
            lam = lambda_estimate(surv, t, prob, 2).value
        lams.append(lam)
    lams = np.asarray(lams)
    ok = bool(np.all((lams > 0) & (lams <= 2.1)))
    return CriterionResult(4, "lambda bounds", ok, f"lambda in [{lams.min():.3f}, {lams.max():.3f}] (need (0, 2.1])",
                           data={"lambda": lams.tolist()})


@_timed
def criterion_5() -> CriterionResult:
    """Exact bad-pattern mass for n = 1, 2, 3."""
    model = models.iid([0.5, 0.5], 2)
    mass = [exact.bad_pattern_mass(model, n) for n in (1, 2, 3)]
    decreasing = all(a > b for a, b in zip(mass, mass[1:]))
    with np.errstate(divide="ignore"):
        per_site = [math.log(m) / (n + 1) ** 2 if m > 0 else -math.inf for n, m in zip((1, 2, 3), mass)]
    superlinear = all(np.isfinite(per_site)) and all(a > b for a, b in zip(per_site, per_site[1:]))
    detail = "mass " + ", ".join(f"n={n}: {m:.6g}" for n, m in zip((1, 2, 3), mass))
    return CriterionResult(5, "bad-pattern decay", decreasing and superlinear, detail,
                           data={"mass": mass, "log_mass_per_site": [repr(v) for v in per_site]})


def _log_time_summary(res: laws.ExperimentResult, rel_tol: float = 0.10, min_n: int = 3):
    rows = [r for r in res.per_n if r["censoring_ok"]]
    if not rows:
        return False, "no n with censoring below 1%"
    last = rows[-1]
    gaps = [r["gap"] for r in rows]
    monotone = all(a >= b for a, b in zip(gaps, gaps[1:]))
    ok = last["n"] >= min_n and last["relative_gap"] <= rel_tol and monotone
    per_n = "; ".join(
        f"n={r['n']}: {r['estimate']:.4f}±{r['ci']:.4f} (n^d: {r['estimate_nd']:.4f}, censored {100 * r['censored_fraction']:.1f}%)"
        for r in res.per_n
    )
    return ok, f"{per_n}; target {res.targets['limit'].value:.4f}, gap at n={last['n']} {100 * last['relative_gap']:.1f}%"


@_timed
def criterion_6(M: int = 200, n_range=(2, 3, 4), seed: int = SEED, workers: int | None = 1) -> CriterionResult:
    """Entropy from first repetitions, Bernoulli(0.7)."""
    res = laws.entropy_via_repetition(models.bernoulli(0.7, 2), list(n_range), M, seed, workers)
    ok, detail = _log_time_summary(res)
    return CriterionResult(6, "entropy via repetition", ok, detail, data=res.to_dict())


@_timed
def criterion_7(M: int = 200, n_range=(2, 3, 4), seed: int = SEED, workers: int | None = 1) -> CriterionResult:
    """Waiting times, Q = Bernoulli(0.3) against P = Bernoulli(0.5)."""
    res = laws.waiting_time_experiment(models.bernoulli(0.3, 2), models.bernoulli(0.5, 2), list(n_range), M, seed, workers)
    ok, detail = _log_time_summary(res, min_n=1)
    return CriterionResult(7, "waiting-time cross entropy", ok, detail, data=res.to_dict())


@_timed
def criterion_8(M: int = 2000, n: int = 12, seed: int = SEED) -> CriterionResult:
    """Surprisal variance against theta^2, and the degenerate uniform case."""
    res = laws.clt_experiment(models.bernoulli(0.7, 2), n, M, seed)
    row = res.per_n[0]
    flat = laws.clt_experiment(models.iid([0.5, 0.5], 2), n, 200, seed)
    ok = row["relative_error"] <= 0.05 and flat.per_n[0]["variance"] < 1e-12
    detail = (f"var {row['variance']:.4f} vs theta^2 {res.targets['theta2'].value:.4f} "
              f"({100 * row['relative_error']:.2f}%, limit 5%); uniform var {flat.per_n[0]['variance']:.2e}")
    return CriterionResult(8, "CLT variance", ok, detail, data={"bernoulli": res.to_dict(), "uniform": flat.to_dict()})


@_timed
def criterion_9(M: int = 100, n_range=(4, 5, 6), seed: int = SEED, workers: int | None = 1) -> CriterionResult:
    """Cumulant of log waiting times for Bernoulli(0.6) against itself."""
    P = models.bernoulli(0.6, 2)
    q_grid = (-0.5, 0.0, 0.5, 1.0)
    curve = laws.ldp_cumulant(P, P, q_grid, n_range, M, seed, workers, strict=False)
    pred_left = laws.predicted_cumulant(P, P, -1.0)
    pred_right = laws.predicted_cumulant(P, P, -1.0 - 1e-15)
    continuous = abs(pred_left - pred_right) <= 1e-12
    zero_ok = all(curve.empirical[n][1] == 0.0 for n in curve.n) and curve.predicted[1] == 0.0
    missing = [n for n in n_range if n not in curve.n]
    sel = [0, 2, 3]
    within, rel = True, {}
    for n in curve.n:
        g = curve.relative_gaps(n)[sel]
        rel[n] = g.tolist()
        within &= bool(np.all(g <= 0.15))
    shrinking = all(max(rel[a]) >= max(rel[b]) for a, b in zip(curve.n, curve.n[1:]))
    ok = not missing and within and shrinking and zero_ok and continuous
    parts = [f"n={n}: rel gaps {', '.join(f'{v:.3f}' for v in rel[n])}" for n in curve.n]
    if missing:
        parts.append(f"n={missing} over the placement budget")
    detail = "; ".join(parts) + f"; W(0)=0 {zero_ok}; continuity at -1 {continuous}"
    return CriterionResult(9, "LDP cumulant", ok, detail, data=curve.to_dict())


@_timed
def criterion_10() -> CriterionResult:
    """Rate function for Bernoulli(0.6) against the scalar Cramer transform."""
    p = 0.6
    model = models.bernoulli(p, 2)
    s = exact.entropy(model)
    u = np.array([s - 0.1, s, s + 0.1])
    res = laws.rate_function(model, np.linspace(s - 0.15, s + 0.15, 31))
    at = laws.rate_function(model, u)
    cramer = np.array([oracles.cramer_surprisal_rate(p, x) for x in u[[0, 2]]])
    err = float(np.abs(at.I[[0, 2]] - cramer).max())
    ok = abs(at.I[1]) < 1e-6 and res.convex and bool(np.all(res.I >= -1e-12)) and err <= 1e-3
    detail = f"I(s) = {at.I[1]:.2e}, convex {res.convex}, max Cramer gap {err:.2e}"
    return CriterionResult(10, "rate function", ok, detail, data={"I": at.I.tolist(), "cramer": cramer.tolist()})


DETERMINISM_CONFIG = """
experiment = "entropy"
seed = 11
M = 96
n = [1, 2]

[model]
name = "bernoulli"
p1 = 0.7
d = 2
"""


@_timed
def criterion_11(worker_counts=(1, 2, 8)) -> CriterionResult:
    """Bit-identical result JSON across worker counts."""
    import tempfile
    from pathlib import Path

    from . import cli

    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "det.toml"
        cfg.write_text(DETERMINISM_CONFIG)
        for w in worker_counts:
            out = Path(tmp) / f"w{w}"
            code = cli.main(["run", str(cfg), "--workers", str(w), "--out", str(out), "--quiet"])
            if code != 0:
                return CriterionResult(11, "determinism", False, f"run exited {code} with {w} workers")
            blobs.append(b"".join(p.read_bytes() for p in sorted(out.glob("*.json"))))
    same = all(b == blobs[0] for b in blobs)
    return CriterionResult(11, "determinism", same, f"identical JSON for workers {list(worker_counts)}: {same}")


def invariant_violations(model: models.Model, A: Pattern, K: int) -> list[str]:
    """Volume bound, Cauchy-Schwarz bound, E N_k and Gibbs bounds on one enumeration."""
    tab = exact.brute_force_hitting_law(model, A, K)
    d, n = A.d, A.side
    pr = tab.pattern_prob
    bad = []
    tol = 1e-12
    for k in range(K + 1):
        vol = (k + 1) ** d
        if tab.prob_with_origin[k] > vol * pr + tol:
            bad.append(f"volume bound k={k}")
        if tab.mean_N2[k] > 0 and tab.prob_with_origin[k] < tab.mean_N[k] ** 2 / tab.mean_N2[k] - tol:
            bad.append(f"Cauchy-Schwarz k={k}")
        if abs(tab.mean_N[k] - vol * pr) > 1e-10 * max(1.0, vol * pr):
            bad.append(f"E N_k k={k}")
    c, c2 = models.surprisal_bounds(model.interaction)
    m = (n + 1) ** d
    if model.kind == "gibbs":
        probs = [pr]
    else:
        probs = [exact.exact_pattern_probability(model, A).value]
    for p in probs:
        if not (math.exp(-c2 * m) * (1 - 1e-12) <= p <= math.exp(-c * m) * (1 + 1e-12)):
            bad.append(f"Gibbs bounds Pr={p:.6g}")
    return bad


def invariant_fixtures():
    rng = np.random.default_rng(7)
    fixtures = []
    for model in (
        models.iid([0.5, 0.5], 2),
        models.bernoulli(0.7, 2),
        models.iid([0.2, 0.3, 0.5], 1),
        models.markov_product(np.array([[0.8, 0.2], [0.4, 0.6]])),
        models.ising(0.2, 1.0, 0.0, 2),
    ):
        K = 2 if model.q == 2 else 3
        for _ in range(3):
            fixtures.append((model, _random_pattern(rng, 1, model.d, model.q), K if model.d == 2 else 5))
    return fixtures


@_timed
def criterion_12() -> CriterionResult:
    """Zero invariant violations across the enumeration fixtures."""
    violations = []
    fx = invariant_fixtures()
    for model, A, K in fx:
        for v in invariant_violations(model, A, K):
            violations.append(f"{model.name}/{A.digest[:8]}: {v}")
    ok = not violations
    detail = f"{len(fx)} enumerations, {len(violations)} violations" + ("" if ok else f": {violations[:3]}")
    return CriterionResult(12, "invariant suite", ok, detail, data={"violations": violations})


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}

SUITES = {
    "oracle": (1, 2, 12),
    "exponential": (3, 4, 5),
    "entropy": (6, 7),
    "clt": (8,),
    "ldp": (9, 10),
    "all": tuple(range(1, 13)),
}


def run_suite(name: str, workers: int | None = 1, echo=None) -> list[CriterionResult]:
    if name not in SUITES:
        raise KeyError(name)
    out = []
    for k in SUITES[name]:
        fn = CRITERIA[k]
        kwargs = {"workers": workers} if "workers" in inspect.signature(fn).parameters else {}
        try:
            res = fn(**kwargs)
        except Exception as exc:  # report, keep going
            res = CriterionResult(k, fn.__doc__.strip().splitlines()[0] if fn.__doc__ else fn.__name__, False,
                                  f"error: {type(exc).__name__}: {exc}")
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out


def format_table(results: list[CriterionResult]) -> str:
    from .io import aligned_table

    return aligned_table(
        [{"#": r.number, "criterion": r.name, "result": r.passed, "seconds": round(r.seconds, 1), "detail": r.detail} for r in results],
        ["#", "criterion", "result", "seconds", "detail"],
    )
