"""Command-line front end.

Subcommands: ``run`` (config-driven experiment), ``verify`` (acceptance
suites), ``sample``, ``oracle`` and ``dobrushin``.  Exit codes: 0 on
success, 1 on usage or validation errors, 2 when a tolerance check fails.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import acceptance, exact, laws, models, samplers
from .io import aligned_table, canonical_json, config_hash, version_string, write_outputs
from .lattice import Pattern, cube, to_json, to_text
from .models import BudgetExceeded

OUTPUT_ENV = "GIBBSRARE_OUTPUT"
EXPERIMENTS = ("hitting", "exponential", "repetition", "entropy", "waiting", "clt", "ldp", "rate", "pressure", "glauber")


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    kind: type | tuple
    default: object = None
    check: object = None
    what: str = ""


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _ns(v):
    vals = v if isinstance(v, list) else [v]
    return bool(vals) and all(isinstance(x, int) and x >= 0 for x in vals)


def _floats(v):
    return isinstance(v, list) and all(isinstance(x, (int, float)) for x in v)


SCHEMA = {
    "experiment": Field(str, None, lambda v: v in EXPERIMENTS, f"one of {', '.join(EXPERIMENTS)}"),
    "seed": Field(int, 0, _nonneg, "a nonnegative integer"),
    "M": Field(int, 1000, _positive, "a positive integer"),
    "n": Field((int, list), 1, _ns, "a nonnegative integer or a list of them"),
    "K": Field(int, None, _positive, "a positive integer"),
    "L": Field(int, 3, _positive, "a positive integer"),
    "sweeps": Field(int, 100_000, _positive, "a positive integer"),
    "burn_in": Field(int, 1000, _nonneg, "a nonnegative integer"),
    "pattern": Field(list, None, None, "a nested list of symbols"),
    "statistic": Field(str, "surprisal", lambda v: v in ("surprisal", "waiting", "repetition"), "surprisal, waiting or repetition"),
    "lam": Field((str, float, int), "estimate", lambda v: v == "estimate" or (not isinstance(v, str) and v > 0), '"estimate" or a positive number'),
    "gamma": Field((float, int), 0.5, _positive, "a positive number"),
    "q_grid": Field(list, list(laws.DEFAULT_Q_GRID), _floats, "a list of numbers"),
    "t_grid": Field(list, None, _floats, "a list of numbers"),
    "u_grid": Field(list, None, _floats, "a list of numbers"),
    "output": Field(str, None, None, "a directory path"),
    "model": Field(dict, None, None, "a model table"),
    "q_model": Field(dict, None, None, "a model table"),
    "tolerances": Field(dict, None, None, "a table of tolerances"),
}
TOLERANCES = {
    "sup_gap": 0.05,
    "relative": 0.10,
    "variance": 0.05,
    "cumulant": 0.15,
    "z": 4.0,
    "tv": 0.02,
}


def _line_of(text: str, key: str) -> int | None:
    leaf = key.split(".")[-1]
    pat = re.compile(rf"^\s*(\"?){re.escape(leaf)}\1\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    head = re.compile(rf"^\s*\[\s*{re.escape(key)}\s*\]")
    for i, line in enumerate(text.splitlines(), 1):
        if head.match(line):
            return i
    return None


def _fail(source: str, text: str, key: str, msg: str):
    line = _line_of(text, key) if text else None
    where = f"{source}:{line}" if line else source
    raise ConfigError(f"{where}: {key}: {msg}")


def _parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``a.b=value`` overrides; values are parsed as TOML when possible."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p} is not a table")
        node[parts[-1]] = _parse_value(raw.strip())
    return cfg


def validate(raw: dict, text: str = "", source: str = "<config>") -> dict:
    """Resolved configuration with defaults filled in; raises :class:`ConfigError`."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        _fail(source, text, unknown[0], f"unknown key (allowed: {', '.join(sorted(SCHEMA))})")
    cfg = {}
    for key, f in SCHEMA.items():
        if key not in raw:
            if key == "experiment":
                raise ConfigError(f"{source}: experiment: required key missing")
            if f.default is not None:
                cfg[key] = f.default
            continue
        v = raw[key]
        kinds = f.kind if isinstance(f.kind, tuple) else (f.kind,)
        if isinstance(v, bool) or not isinstance(v, kinds):
            _fail(source, text, key, f"expected {f.what}, got {v!r}")
        if f.check is not None and not f.check(v):
            _fail(source, text, key, f"expected {f.what}, got {v!r}")
        cfg[key] = v
    if "tolerances" in cfg:
        bad = sorted(set(cfg["tolerances"]) - set(TOLERANCES))
        if bad:
            _fail(source, text, f"tolerances.{bad[0]}", f"unknown tolerance (allowed: {', '.join(sorted(TOLERANCES))})")
    cfg["tolerances"] = {**TOLERANCES, **cfg.get("tolerances", {})}
    for key in ("model", "q_model"):
        if key in cfg:
            try:
                models.from_spec(cfg[key])
            except (ValueError, KeyError, TypeError) as exc:
                _fail(source, text, key, str(exc))
    exp = cfg["experiment"]
    if "model" not in cfg:
        raise ConfigError(f"{source}: model: required for experiment {exp!r}")
    if exp == "waiting" and "q_model" not in cfg:
        raise ConfigError(f"{source}: q_model: required for experiment 'waiting'")
    if exp in ("hitting", "exponential") and "pattern" not in cfg:
        _fail(source, text, "pattern", f"required for experiment {exp!r}")
    return cfg


def load_config(path, overrides=()) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = apply_overrides(raw, overrides)
    return validate(raw, text, str(path))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _n_list(cfg) -> list[int]:
    n = cfg["n"]
    return list(n) if isinstance(n, list) else [n]


def _pattern(cfg, model) -> Pattern:
    try:
        return Pattern(np.asarray(cfg["pattern"], dtype=np.int64), model.q)
    except ValueError as exc:
        raise ConfigError(f"pattern: {exc}") from None


def _t_grid(cfg):
    return np.asarray(cfg["t_grid"], dtype=np.float64) if "t_grid" in cfg else laws.DEFAULT_T_GRID


def execute(cfg: dict, workers: int | None) -> tuple[dict, str | None, dict]:
    """Run one experiment; returns ``(result, csv, checks)``."""
    exp = cfg["experiment"]
    tol = cfg["tolerances"]
    P = models.from_spec(cfg["model"])
    seed, M = cfg["seed"], cfg["M"]
    caps = {n: cfg["K"] for n in _n_list(cfg)} if "K" in cfg else None
    if exp == "hitting":
        A = _pattern(cfg, P)
        res = laws.hitting_oracle_experiment(P, A, cfg.get("K", 2), M, seed, workers)
        rows = res.per_n
        checks = {"within_z": all(abs(r["z"]) <= tol["z"] for r in rows)}
        return res.to_dict(), _csv(rows), checks
    if exp == "exponential":
        A = _pattern(cfg, P)
        r = laws.exponential_law_experiment(P, A, M, seed, _t_grid(cfg), cfg["lam"], cfg["gamma"], cfg.get("K"), workers)
        return r.to_dict(), r.curve.to_csv(), {"sup_gap": r.curve.sup_gap() <= tol["sup_gap"]}
    if exp == "repetition":
        res = laws.repetition_law_experiment(P, _n_list(cfg)[0], M, seed, _t_grid(cfg), cfg["gamma"], cfg.get("K"), workers)
        gap = res.per_n[0]["curve"]["sup_gap"]
        return res.to_dict(), None, {"sup_gap": gap <= tol["sup_gap"]}
    if exp in ("entropy", "waiting"):
        if exp == "entropy":
            res = laws.entropy_via_repetition(P, _n_list(cfg), M, seed, workers, caps)
        else:
            res = laws.waiting_time_experiment(models.from_spec(cfg["q_model"]), P, _n_list(cfg), M, seed, workers, caps)
        last = res.per_n[-1]
        rows = [{k: r[k] for k in ("n", "estimate", "ci", "estimate_nd", "censored_fraction", "K", "relative_gap")} for r in res.per_n]
        return res.to_dict(), _csv(rows), {"relative": last["relative_gap"] <= tol["relative"], "censoring": last["censoring_ok"]}
    if exp == "clt":
        res = laws.clt_experiment(P, _n_list(cfg)[0], M, seed, cfg["statistic"], workers, cfg.get("K"))
        return res.to_dict(), _csv(res.per_n), {"variance": res.per_n[0]["relative_error"] <= tol["variance"]}
    if exp == "ldp":
        Q = models.from_spec(cfg["q_model"]) if "q_model" in cfg else P
        curve = laws.ldp_cumulant(Q, P, cfg["q_grid"], _n_list(cfg), M, seed, workers)
        rows = []
        for n in curve.n:
            for q, e, w in zip(curve.q, curve.empirical[n], curve.predicted):
                rows.append({"n": n, "q": float(q), "empirical": float(e), "predicted": float(w)})
        n_last = curve.n[-1]
        rel = curve.relative_gaps(n_last)
        finite = np.isfinite(rel)
        return curve.to_dict(), _csv(rows), {"cumulant": bool(np.all(rel[finite] <= tol["cumulant"]))}
    if exp == "rate":
        s = exact.entropy(P)
        u = np.asarray(cfg["u_grid"], dtype=np.float64) if "u_grid" in cfg else np.linspace(s - 0.2, s + 0.2, 41)
        res = laws.rate_function(P, u)
        rows = [{"u": float(a), "I": float(b), "q_star": float(c)} for a, b, c in zip(res.u, res.I, res.q_star)]
        return res.to_dict(), _csv(rows), {"convex": res.convex}
    if exp == "pressure":
        est = exact.pressure(P.interaction) if P.kind == "gibbs" else None
        out = {
            "pressure": exact.pressure_value(P.interaction),
            "entropy": exact.entropy(P),
            "theta2": laws.theta_squared(P).value,
            "estimate": est.to_dict() if est is not None else None,
        }
        return out, None, {"converged": est.converged if est is not None else True}
    if exp == "glauber":
        counts = samplers.glauber_histogram(P, cfg["L"], cfg["sweeps"], cfg["burn_in"], seed)
        lp = exact.gibbs_log_probs(P.interaction, cube(cfg["L"] - 1, P.d), models.PERIODIC)
        tv = 0.5 * float(np.abs(counts / counts.sum() - np.exp(lp)).sum())
        return {"tv": tv, "sweeps": cfg["sweeps"], "L": cfg["L"]}, None, {"tv": tv < tol["tv"]}
    raise ConfigError(f"experiment {exp!r} is not runnable")


def _csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _out_dir(arg, cfg=None) -> Path:
    if arg:
        return Path(arg)
    if cfg and cfg.get("output"):
        return Path(cfg["output"])
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    outdir = _out_dir(args.out, cfg)
    try:
        result, csv_text, checks = execute(cfg, args.workers)
    except (BudgetExceeded, laws.FeasibilityError) as exc:
        raise ConfigError(f"budget: {exc}") from None
    resolved = {k: v for k, v in cfg.items() if k != "output"}
    payload = {
        "config": resolved,
        "config_hash": config_hash(resolved),
        "version": version_string(),
        "checks": checks,
        "passed": all(checks.values()),
        "result": result,
    }
    stem = cfg["experiment"]
    text = aligned_table([{"check": k, "result": v} for k, v in checks.items()])
    header = f"# {stem} config_hash={payload['config_hash']} version={payload['version']}\n"
    csv_out = header + csv_text if csv_text else None
    write_outputs(outdir, stem, payload, csv_out, header + text)
    if not args.quiet:
        print(header + text, end="")
    return 0 if payload["passed"] else 2


def cmd_verify(args) -> int:
    if args.suite not in acceptance.SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose one of {', '.join(acceptance.SUITES)}")
    results = acceptance.run_suite(args.suite, args.workers, echo=None if args.quiet else print)
    print(acceptance.format_table(results), end="")
    if args.json:
        from .io import atomic_write

        atomic_write(args.json, canonical_json({"suite": args.suite, "version": version_string(),
                                                "criteria": [r.to_dict() for r in results]}))
    return 0 if all(r.passed for r in results) else 2


def _model_arg(text: str) -> models.Model:
    try:
        spec = json.loads(text)
    except json.JSONDecodeError:
        p = Path(text)
        if not p.exists():
            raise ConfigError(f"--model: neither JSON nor a readable file: {text!r}") from None
        spec = tomllib.loads(p.read_text()).get("model")
        if spec is None:
            raise ConfigError(f"{p}: no [model] table")
    try:
        return models.from_spec(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"--model: {exc}") from None


def cmd_sample(args) -> int:
    model = _model_arg(args.model)
    spec = samplers.SamplerSpec(model, args.L, burn_in=args.burn_in, seed=args.seed, replica=args.replica,
                                allow_nonunique=args.allow_nonunique)
    conf = samplers.sample(spec)
    text = to_json(conf) if args.format == "json" else to_text(conf)
    if args.out:
        from .io import atomic_write

        atomic_write(args.out, text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return 0


def cmd_oracle(args) -> int:
    model = _model_arg(args.model)
    if args.pattern is None:
        est = exact.pressure(model.interaction) if model.kind == "gibbs" else None
        out = {"pressure": exact.pressure_value(model.interaction), "entropy": exact.entropy(model)}
        if est is not None:
            out["estimate"] = est.to_dict()
        sys.stdout.write(canonical_json(out))
        return 0
    A = Pattern(np.asarray(json.loads(args.pattern), dtype=np.int64), model.q)
    table = exact.brute_force_hitting_law(model, A, args.K)
    sys.stdout.write(table.to_csv() if args.format == "csv" else canonical_json(table.to_dict()))
    return 0


def cmd_dobrushin(args) -> int:
    model = _model_arg(args.model)
    rep = models.check_dobrushin(model.interaction)
    ht = models.check_high_temperature(model.interaction)
    rows = [{"offset": str(k), "gamma": v} for k, v in sorted(rep.row.items())]
    print(aligned_table(rows, ["offset", "gamma"]), end="")
    print(f"row sum {rep.row_sum:.6g}: Dobrushin condition {'holds' if rep.satisfied else 'fails'}")
    print(f"high-temperature sum {ht.lhs:.6g}: {'holds' if ht.satisfied else 'fails'} (needs < 2)")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gibbsrare", description="Rare-pattern statistics for lattice Gibbs fields.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    workers_default = os.cpu_count() or 1

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a dotted config key")
    r.add_argument("--workers", type=int, default=workers_default)
    r.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a built-in acceptance suite")
    v.add_argument("suite", help=", ".join(acceptance.SUITES))
    v.add_argument("--workers", type=int, default=workers_default)
    v.add_argument("--json", help="also write the results as JSON")
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sample", help="dump a sampled configuration")
    s.add_argument("--model", required=True, help="model spec as JSON or a TOML file with [model]")
    s.add_argument("--L", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replica", type=int, default=0)
    s.add_argument("--burn-in", type=int, default=None)
    s.add_argument("--allow-nonunique", action="store_true")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    o = sub.add_parser("oracle", help="dump exact tables (hitting law or pressure)")
    o.add_argument("--model", required=True)
    o.add_argument("--pattern", help="pattern as a nested JSON list")
    o.add_argument("--K", type=int, default=2)
    o.add_argument("--format", choices=("csv", "json"), default="csv")
    o.set_defaults(func=cmd_oracle)

    d = sub.add_parser("dobrushin", help="print the uniqueness condition report")
    d.add_argument("--model", required=True)
    d.set_defaults(func=cmd_dobrushin)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "workers", 1) is not None and getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be positive")
        if args.command is None:
            parser.print_help()
            return 1
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BudgetExceeded as exc:
        print(f"error: budget: {exc}", file=sys.stderr)
        return 1
