"""Reproducible samplers: i.i.d. fields, Markov-product fields, heat-bath Glauber.

Every draw comes from a counter-based stream keyed by ``(seed, replica, tag)``
(see :mod:`gibbsrare.rng`), so a replica can be regenerated in isolation and
results do not depend on how replicas are spread over workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels, rng
from .lattice import Configuration, Pattern
from .models import Interaction, Model, check_dobrushin

METHODS = ("iid", "markov_product", "glauber")


@dataclass(frozen=True)
class SamplerSpec:
    model: Model
    L: int
    method: str | None = None
    burn_in: int | None = None
    seed: int = 0
    replica: int = 0
    allow_nonunique: bool = False

    def __post_init__(self):
        method = self.method or {"iid": "iid", "markov_product": "markov_product"}.get(self.model.kind, "glauber")
        if method not in METHODS:
            raise ValueError(f"unknown sampling method {method!r}")
        if method == "iid" and self.model.kind != "iid":
            raise ValueError("the iid sampler needs an iid model")
        if method == "markov_product" and self.model.kind != "markov_product":
            raise ValueError("the markov_product sampler needs a markov_product model")
        if self.L < 1:
            raise ValueError("domain side must be positive")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn-in must be nonnegative")
        object.__setattr__(self, "method", method)
        if self.burn_in is None and method == "glauber":
            object.__setattr__(self, "burn_in", 100 * self.L**2)
        rng.stream_key(self.seed, self.replica)  # range checks


def iid_thresholds(model: Model) -> np.ndarray:
    return rng.thresholds(rng.cdf_of(model.probs))


def iid_window(model: Model, key: int, L: int) -> np.ndarray:
    out = np.empty(L**model.d, dtype=np.int8)
    kernels.iid_window(np.uint64(key), iid_thresholds(model), np.full(model.d, L, dtype=np.int64), out)
    return out.reshape((L,) * model.d)


def markov_window(model: Model, key: int, L: int) -> np.ndarray:
    pi_thr = rng.thresholds(rng.cdf_of(model.stationary))
    p_thr = np.stack([rng.thresholds(rng.cdf_of(row)) for row in model.transition])
    out = np.empty((L, L), dtype=np.int8)
    kernels.markov_rows(np.uint64(key), pi_thr, p_thr, out)
    return out


# ---------------------------------------------------------------------------
# heat bath
# ---------------------------------------------------------------------------


@dataclass
class HeatBathSetup:
    nbr: np.ndarray
    ent_pos: np.ndarray
    ent_k: np.ndarray
    ent_rel: np.ndarray
    ent_tab: np.ndarray
    tables: np.ndarray
    q: int


def heat_bath_setup(U: Interaction, L: int) -> HeatBathSetup:
    """Neighbour table and term entries for single-site updates on a torus."""
    d, q = U.d, U.q
    rel = [(0,) * d] + U.neighborhood()
    rel_index = {r: i for i, r in enumerate(rel)}
    sites = np.indices((L,) * d).reshape(d, -1).T
    strides = L ** np.arange(d - 1, -1, -1)
    nbr = np.stack([(((sites + np.asarray(r)) % L) * strides).sum(axis=1) for r in rel], axis=1).astype(np.int64)
    entries = U.entries()
    kmax = max((len(offs) for _, _, offs in entries), default=1)
    ent_pos = np.zeros(len(entries), dtype=np.int64)
    ent_k = np.zeros(len(entries), dtype=np.int64)
    ent_rel = np.zeros((len(entries), kmax), dtype=np.int64)
    ent_tab = np.zeros(len(entries), dtype=np.int64)
    offsets = np.cumsum([0] + [t.table.size for t in U.terms])
    for e, (ti, pos, offs) in enumerate(entries):
        ent_pos[e], ent_k[e], ent_tab[e] = pos, len(offs), offsets[ti]
        for i, o in enumerate(offs):
            ent_rel[e, i] = rel_index[tuple(int(v) for v in o)]
    tables = np.concatenate([t.table for t in U.terms]) if U.terms else np.zeros(0)
    return HeatBathSetup(nbr, ent_pos, ent_k, ent_rel, ent_tab, np.ascontiguousarray(tables, dtype=np.float64), q)


def _run_heat_bath(setup: HeatBathSetup, state: np.ndarray, key: int, sweep0: int, sweeps: int, counts=None, trace=None):
    counts = np.zeros(0, dtype=np.int64) if counts is None else counts
    trace = np.zeros(0) if trace is None else trace
    kernels.heat_bath(
        state, setup.nbr, setup.ent_pos, setup.ent_k, setup.ent_rel, setup.ent_tab, setup.tables,
        setup.q, np.uint64(key), sweep0, sweeps, counts, trace,
    )
    return state


def _initial_state(q: int, nsites: int, seed: int, replica: int) -> np.ndarray:
    u = rng.uniforms(rng.stream_key(seed, replica, rng.TAG_INIT), np.arange(nsites, dtype=np.uint64))
    return np.minimum((u * q).astype(np.int8), q - 1)


def integrated_autocorrelation(x: np.ndarray, max_lag: int | None = None) -> float:
    """Integrated autocorrelation time with Sokal's self-consistent window."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 8 or np.var(x) == 0:
        return float("nan") if x.size < 8 else 1.0
    y = x - x.mean()
    f = np.fft.rfft(y, n=2 * x.size)
    acf = np.fft.irfft(f * np.conj(f))[: x.size]
    acf /= acf[0]
    max_lag = x.size // 2 if max_lag is None else max_lag
    tau = 1.0
    for lag in range(1, max_lag):
        tau += 2 * acf[lag]
        if lag >= 5 * tau:
            break
    return float(max(tau, 1.0))


def _uniqueness_warnings(spec: SamplerSpec) -> list[str]:
    report = check_dobrushin(spec.model.interaction)
    if report.satisfied:
        return []
    msg = f"Dobrushin condition fails (row sum {report.row_sum:.4f})"
    if not spec.allow_nonunique:
        raise ValueError(msg + "; set allow_nonunique to sample anyway")
    return [msg]


def sample(spec: SamplerSpec) -> Configuration:
    """Draw one configuration; metadata rides along in ``config.meta``."""
    m = spec.model
    meta = {"seed": spec.seed, "replica": spec.replica, "method": spec.method, "model_hash": m.digest, "warnings": []}
    if spec.method == "iid":
        key = rng.stream_key(spec.seed, spec.replica, rng.TAG_FIELD)
        return Configuration(iid_window(m, key, spec.L), m.q, meta={**meta, "burn_in": 0})
    if spec.method == "markov_product":
        key = rng.stream_key(spec.seed, spec.replica, rng.TAG_ROWS)
        return Configuration(markov_window(m, key, spec.L), m.q, meta={**meta, "burn_in": 0})
    meta["warnings"] = _uniqueness_warnings(spec)
    if spec.burn_in == 0:
        meta["warnings"].append("zero burn-in: the configuration is the uniform initial state")
    setup = heat_bath_setup(m.interaction, spec.L)
    state = _initial_state(m.q, spec.L**m.d, spec.seed, spec.replica)
    trace = np.zeros(spec.burn_in)
    _run_heat_bath(setup, state, rng.stream_key(spec.seed, spec.replica, rng.TAG_UPDATE), 0, spec.burn_in, trace=trace)
    meta["burn_in"] = spec.burn_in
    meta["autocorrelation"] = integrated_autocorrelation(trace[spec.burn_in // 2 :])
    return Configuration(state.reshape((spec.L,) * m.d), m.q, periodic=True, meta=meta)


def sample_pair(spec_q: SamplerSpec, spec_p: SamplerSpec, master_seed: int):
    """``(xi, sigma)`` from Q and P with seeds derived from ``master_seed``."""
    xi = sample(replace(spec_q, seed=rng.derive_seed(master_seed, "xi")))
    sigma = sample(replace(spec_p, seed=rng.derive_seed(master_seed, "sigma")))
    return xi, sigma


def glauber_histogram(model: Model, L: int, sweeps: int, burn_in: int, seed: int, replica: int = 0) -> np.ndarray:
    """Counts of torus states recorded after each of ``sweeps`` heat-bath sweeps.

    States are indexed row-major with the first site most significant, the
    same order as :func:`gibbsrare.exact.gibbs_log_probs`.
    """
    U = model.interaction
    nsites = L**U.d
    if U.q**nsites > 1 << 24:
        raise ValueError("state histogram too large")
    setup = heat_bath_setup(U, L)
    state = _initial_state(U.q, nsites, seed, replica)
    key = rng.stream_key(seed, replica, rng.TAG_UPDATE)
    _run_heat_bath(setup, state, key, 0, burn_in)
    counts = np.zeros(U.q**nsites, dtype=np.int64)
    _run_heat_bath(setup, state, key, burn_in, sweeps, counts=counts)
    return counts


def glauber_chain(model: Model, L: int, n_samples: int, thin: int, burn_in: int | None = None, seed: int = 0,
                  replica: int = 0) -> list[Configuration]:
    """Torus configurations taken every ``thin`` sweeps from one heat-bath chain."""
    spec = SamplerSpec(model, L, "glauber", burn_in, seed, replica)
    warnings = _uniqueness_warnings(spec)
    setup = heat_bath_setup(model.interaction, L)
    state = _initial_state(model.q, L**model.d, seed, replica)
    key = rng.stream_key(seed, replica, rng.TAG_UPDATE)
    _run_heat_bath(setup, state, key, 0, spec.burn_in)
    out, sweep = [], spec.burn_in
    for i in range(n_samples):
        _run_heat_bath(setup, state, key, sweep, thin)
        sweep += thin
        meta = {"seed": seed, "replica": replica, "method": "glauber", "sweep": sweep, "warnings": warnings}
        out.append(Configuration(state.reshape((L,) * model.d).copy(), model.q, periodic=True, meta=meta))
    return out


def heat_bath_kernel(U: Interaction, L: int, site: int) -> np.ndarray:
    """Exact transition matrix of one heat-bath update at ``site`` on a torus."""
    from .exact import _digits

    nsites = L**U.d
    q = U.q
    setup = heat_bath_setup(U, L)
    states = _digits(np.arange(q**nsites, dtype=np.int64), nsites, q).astype(np.int64)
    K = np.zeros((len(states), len(states)))
    powers = q ** np.arange(nsites - 1, -1, -1)
    for i, st in enumerate(states):
        energy = np.zeros(q)
        for c in range(q):
            for e in range(len(setup.ent_pos)):
                code = 0
                for j in range(setup.ent_k[e]):
                    sym = c if j == setup.ent_pos[e] else st[setup.nbr[site, setup.ent_rel[e, j]]]
                    code = code * q + sym
                energy[c] += setup.tables[setup.ent_tab[e] + code]
        w = np.exp(-(energy - energy.min()))
        w /= w.sum()
        for c in range(q):
            nxt = st.copy()
            nxt[site] = c
            K[i, int(nxt @ powers)] += w[c]
    return K


# ---------------------------------------------------------------------------
# implicit i.i.d. fields: hits without materializing the field
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IIDField:
    """An i.i.d. field on the nonnegative orthant evaluated lazily per site."""

    model: Model
    key: int

    @classmethod
    def from_seed(cls, model: Model, seed: int, replica: int = 0, tag: int = rng.TAG_FIELD) -> "IIDField":
        return cls(model, rng.stream_key(seed, replica, tag))

    def symbols(self, coords) -> np.ndarray:
        return rng.symbols_from_words(rng.words(self.key, rng.pack_coords(coords)), iid_thresholds(self.model))

    def window(self, L: int) -> Configuration:
        return Configuration(iid_window(self.model, self.key, L), self.model.q)

    def first_occurrence(self, A: Pattern, K: int, include_origin: bool = False) -> int:
        """Hit radius or ``-1`` if censored at ``K``."""
        pack = rng.pack_coords(np.indices(A.values.shape).reshape(A.d, -1).T)
        return int(kernels.first_hit_iid(
            np.uint64(self.key), iid_thresholds(self.model), A.flat.astype(np.int8), pack, A.d,
            0 if include_origin else 1, K,
        ))


def cube_offsets(n: int, d: int) -> np.ndarray:
    return np.indices((n + 1,) * d).reshape(d, -1).T


def initial_patterns(model: Model, keys: np.ndarray, n: int) -> np.ndarray:
    """``sigma_{C_n}`` for every stream key, shape ``(len(keys), (n+1)^d)``."""
    pack = rng.pack_coords(cube_offsets(n, model.d))
    thr = iid_thresholds(model)
    out = np.empty((len(keys), pack.size), dtype=np.int8)
    for i, k in enumerate(keys):
        out[i] = rng.symbols_from_words(rng.words(int(k), pack), thr)
    return out


def stream_keys(seed: int, replicas, tag: int = rng.TAG_FIELD) -> np.ndarray:
    return np.array([rng.stream_key(seed, int(r), tag) for r in replicas], dtype=np.uint64)


def pair_seeds(master_seed: int) -> tuple[int, int]:
    return rng.derive_seed(master_seed, "xi"), rng.derive_seed(master_seed, "sigma")


@dataclass
class HitBatch:
    replicas: np.ndarray
    hits: np.ndarray  # -1 when censored
    patterns: np.ndarray
    K: np.ndarray


def implicit_hits(
    model: Model,
    seed: int,
    replicas,
    n: int,
    K,
    mode: str = "fixed",
    pattern: Pattern | None = None,
    q_model: Model | None = None,
    include_origin: bool = False,
) -> HitBatch:
    """First-occurrence radii on lazily evaluated i.i.d. fields.

    ``mode`` selects the pattern: ``fixed`` (``pattern``), ``repetition``
    (each field's own ``sigma_{C_n}``) or ``waiting`` (``xi_{C_n}`` with ``xi``
    drawn from ``q_model``; the two fields use the seeds of :func:`pair_seeds`,
    exactly as :func:`sample_pair` does).  ``K`` may be a scalar or a
    per-replica array of caps.
    """
    if model.kind != "iid":
        raise ValueError("implicit fields are available for iid models only")
    replicas = np.asarray(list(replicas), dtype=np.int64)
    d = model.d
    if mode == "waiting":
        if q_model is None or q_model.kind != "iid":
            raise ValueError("waiting mode needs an iid q_model")
        s_xi, s_sigma = pair_seeds(seed)
        keys = stream_keys(s_sigma, replicas)
        pats = initial_patterns(q_model, stream_keys(s_xi, replicas), n)
    else:
        keys = stream_keys(seed, replicas)
        if mode == "repetition":
            pats = initial_patterns(model, keys, n)
        elif mode == "fixed":
            if pattern is None or pattern.side != n:
                raise ValueError("fixed mode needs an n-pattern")
            pats = np.tile(pattern.flat.astype(np.int8), (len(replicas), 1))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    caps = np.broadcast_to(np.asarray(K, dtype=np.int64), replicas.shape).copy()
    pack = rng.pack_coords(cube_offsets(n, d))
    thr = iid_thresholds(model)
    hits = np.empty(len(replicas), dtype=np.int64)
    kmin = 0 if include_origin else 1
    if caps.size and np.all(caps == caps[0]):
        kernels.first_hit_iid_batch(keys, thr, pats, pack, d, kmin, int(caps[0]), hits)
    else:
        for i in range(len(replicas)):
            hits[i] = kernels.first_hit_iid(keys[i], thr, pats[i], pack, d, kmin, int(caps[i]))
    return HitBatch(replicas, hits, pats, caps)


def chunked(M: int, chunk: int):
    return [range(s, min(M, s + chunk)) for s in range(0, M, chunk)]


def parallel_map(fn, items, workers: int | None = None):
    """Ordered map over ``items`` on a thread pool; the result never depends on
    ``workers`` because work units are fixed by the caller."""
    items = list(items)
    if workers is None:
        import os

        workers = os.cpu_count() or 1
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
