"""Finite-range translation-invariant interactions and the model presets.

An :class:`Interaction` is a list of terms ``(shape, table)``.  A term
contributes ``table[code]`` for every translate ``shape + t``, where ``code``
is the base-``q`` number formed by the symbols on ``shape + t`` read in shape
order (first site most significant).  Inverse temperature is already folded
into the tables.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import Box, Configuration, _vec, norm

ENUM_BUDGET = 1 << 24
FREE = "free"
PERIODIC = "periodic"


class BudgetExceeded(RuntimeError):
    """An exact enumeration would exceed its hard budget."""


def _check_budget(count: int, what: str, budget: int = ENUM_BUDGET) -> None:
    if count > budget:
        raise BudgetExceeded(f"{what} needs {count} evaluations, budget is {budget}")


# ---------------------------------------------------------------------------
# terms and interactions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Term:
    shape: tuple[tuple[int, ...], ...]
    table: np.ndarray

    @property
    def k(self) -> int:
        return len(self.shape)

    @property
    def diameter(self) -> int:
        return max(norm(np.subtract(a, b)) for a in self.shape for b in self.shape)

    def energy(self, symbols: Sequence[int], q: int) -> float:
        code = 0
        for s in symbols:
            code = code * q + int(s)
        return float(self.table[code])

    def oscillation(self) -> float:
        finite = self.table[np.isfinite(self.table)]
        if finite.size < self.table.size:
            return float("inf")
        return float(finite.max() - finite.min())


def make_term(shape, table, q: int) -> Term:
    """Build a term, sorting the shape and shifting it so its smallest site is 0.

    ``table`` is indexed by the symbols in the order ``shape`` is given; it may
    be flat (length ``q**k``) or nested ``(q,)*k``.
    """
    sites = [_vec(s) for s in shape]
    if not sites:
        raise ValueError("a term needs a nonempty shape")
    d = len(sites[0])
    if any(len(s) != d for s in sites):
        raise ValueError("term shape mixes dimensions")
    if len(set(sites)) != len(sites):
        raise ValueError(f"term shape has repeated sites: {sites}")
    k = len(sites)
    tab = np.asarray(table, dtype=np.float64).reshape((q,) * k) if k else np.asarray(table, float)
    order = sorted(range(k), key=lambda i: sites[i])
    tab = np.transpose(tab, order) if k > 1 else tab
    base = sites[order[0]]
    norm_shape = tuple(tuple(a - b for a, b in zip(sites[i], base)) for i in order)
    flat = np.ascontiguousarray(tab).reshape(-1).copy()
    if np.isnan(flat).any() or (flat == -np.inf).any():
        raise ValueError("term energies must be finite or +inf")
    flat.flags.writeable = False
    return Term(norm_shape, flat)


@dataclass(frozen=True, eq=False)
class Interaction:
    d: int
    q: int
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("alphabet size must be positive")
        merged: dict[tuple, np.ndarray] = {}
        for t in self.terms:
            if len(t.shape[0]) != self.d:
                raise ValueError("term dimension does not match the interaction")
            if t.table.size != self.q ** t.k:
                raise ValueError(f"term on {t.k} sites needs {self.q ** t.k} energies")
            merged[t.shape] = merged[t.shape] + t.table if t.shape in merged else t.table.copy()
        terms = []
        for shape in sorted(merged):
            tab = merged[shape]
            tab.flags.writeable = False
            terms.append(Term(shape, tab))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def zero(cls, d: int, q: int) -> "Interaction":
        return cls(d, q, ())

    @property
    def range(self) -> int:
        return max((t.diameter for t in self.terms), default=0)

    def scaled(self, c: float) -> "Interaction":
        """``c * U``; forbidden (+inf) energies stay forbidden."""
        terms = []
        for t in self.terms:
            hard = np.isinf(t.table)
            if hard.any() and c < 0:
                raise ValueError("cannot scale a hard-core interaction by a negative factor")
            terms.append(Term(t.shape, np.where(hard, np.inf, c * np.where(hard, 0.0, t.table))))
        return Interaction(self.d, self.q, tuple(terms))

    def __add__(self, other: "Interaction") -> "Interaction":
        if (self.d, self.q) != (other.d, other.q):
            raise ValueError("cannot add interactions on different lattices or alphabets")
        return Interaction(self.d, self.q, self.terms + other.terms)

    @property
    def single_site_only(self) -> bool:
        return all(t.k == 1 for t in self.terms)

    def single_site_energies(self) -> np.ndarray:
        e = np.zeros(self.q)
        for t in self.terms:
            if t.k == 1:
                e = e + t.table
        return e

    def entries(self):
        """Term placements containing the origin: ``(term, position, offsets)``.

        ``offsets[i]`` is the site of the i-th shape point relative to the
        origin, which sits at ``offsets[position] == 0``.
        """
        out = []
        for ti, t in enumerate(self.terms):
            shp = np.asarray(t.shape, dtype=np.int64)
            for pos in range(t.k):
                out.append((ti, pos, shp - shp[pos]))
        return out

    def neighborhood(self) -> list[tuple[int, ...]]:
        """Sites (other than 0) that share a term with the origin, sorted."""
        sites = set()
        for _, _, offs in self.entries():
            sites.update(tuple(int(v) for v in o) for o in offs)
        sites.discard((0,) * self.d)
        return sorted(sites)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "alphabet": self.q,
            "terms": [{"shape": [list(s) for s in t.shape], "table": [float(v) for v in t.table]} for t in self.terms],
        }

    @property
    def digest(self) -> str:
        h = hashlib.sha256(f"{self.d}:{self.q}".encode())
        for t in self.terms:
            h.update(repr(t.shape).encode())
            h.update(np.ascontiguousarray(t.table).tobytes())
        return h.hexdigest()[:16]


def interaction_from_list(d: int, q: int, terms: list[dict]) -> Interaction:
    """Custom interaction from ``[{"shape": [[..], ..], "table": [...]}, ...]``."""
    return Interaction(d, q, tuple(make_term(t["shape"], t["table"], q) for t in terms))


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

ISING_SPIN = np.array([-1.0, 1.0])


@dataclass(frozen=True, eq=False)
class Model:
    """A named random field: i.i.d., Markov-product or a general Gibbs field."""

    kind: str
    interaction: Interaction
    params: dict = field(default_factory=dict)
    probs: np.ndarray | None = None
    transition: np.ndarray | None = None
    stationary: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.interaction.d

    @property
    def q(self) -> int:
        return self.interaction.q

    @property
    def name(self) -> str:
        return self.params.get("name", self.kind)

    @property
    def digest(self) -> str:
        blob = json.dumps({"kind": self.kind, "params": self.params}, sort_keys=True, default=str)
        return hashlib.sha256((blob + self.interaction.digest).encode()).hexdigest()[:16]

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params, "hash": self.digest}


def _check_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size < 1 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError(f"probabilities must be nonnegative and sum to 1, got {p.tolist()}")
    return p


def _neglog(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -np.log(p)


def iid(p, d: int = 2) -> Model:
    """Product measure with single-site law ``p``; ``U({x}, s) = -log p_s``."""
    p = _check_probs(p)
    inter = Interaction(d, p.size, (make_term([(0,) * d], _neglog(p), p.size),))
    return Model("iid", inter, {"name": "iid", "p": p.tolist(), "d": d}, probs=p)


def bernoulli(p1: float, d: int = 2) -> Model:
    """Binary i.i.d. field with ``P(1) = p1``."""
    return iid([1.0 - p1, p1], d)


def ising(beta: float, J: float = 1.0, h: float = 0.0, d: int = 2) -> Model:
    """Nearest-neighbour Ising model; symbol 0 is spin -1, symbol 1 is spin +1."""
    bond = -beta * J * np.outer(ISING_SPIN, ISING_SPIN)
    terms = [make_term([(0,) * d, tuple(int(i == a) for i in range(d))], bond, 2) for a in range(d)]
    if h != 0.0:
        terms.append(make_term([(0,) * d], -beta * h * ISING_SPIN, 2))
    inter = Interaction(d, 2, tuple(terms))
    return Model("gibbs", inter, {"name": "ising", "beta": beta, "J": J, "h": h, "d": d})


def potts(beta: float, J: float = 1.0, states: int = 3, d: int = 2) -> Model:
    bond = -beta * J * np.eye(states)
    terms = [make_term([(0,) * d, tuple(int(i == a) for i in range(d))], bond, states) for a in range(d)]
    inter = Interaction(d, states, tuple(terms))
    return Model("gibbs", inter, {"name": "potts", "beta": beta, "J": J, "states": states, "d": d})


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eig(P.T)
    i = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, i])
    pi = pi / pi.sum()
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def markov_product(P) -> Model:
    """Rows along axis 0 are independent stationary chains running along axis 1."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise ValueError("transition matrix must be square")
    if (P < 0).any() or np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
        raise ValueError("transition matrix rows must be nonnegative and sum to 1 within 1e-12")
    q = P.shape[0]
    pi = stationary_distribution(P)
    inter = Interaction(2, q, (make_term([(0, 0), (0, 1)], _neglog(P), q),))
    return Model(
        "markov_product", inter, {"name": "markov_product", "transition": P.tolist(), "d": 2},
        transition=P, stationary=pi,
    )


def custom(d: int, alphabet: int, terms: list[dict], name: str = "custom") -> Model:
    inter = interaction_from_list(d, alphabet, terms)
    return Model("gibbs", inter, {"name": name, "d": d, "alphabet": alphabet, "terms": inter.to_dict()["terms"]})


def gibbs(inter: Interaction, name: str = "gibbs") -> Model:
    return Model("gibbs", inter, {"name": name, "d": inter.d, "alphabet": inter.q, "hash": inter.digest})


def from_spec(spec: dict) -> Model:
    """Model from a config mapping such as ``{"name": "ising", "beta": 0.2}``."""
    spec = dict(spec)
    name = spec.pop("name", None)
    d = int(spec.pop("d", 2))
    allowed = {
        "iid": {"p"},
        "bernoulli": {"p1"},
        "ising": {"beta", "J", "h"},
        "potts": {"beta", "J", "states"},
        "markov_product": {"transition"},
        "custom": {"alphabet", "terms"},
    }
    if name not in allowed:
        raise ValueError(f"unknown model preset {name!r}; choose one of {sorted(allowed)}")
    extra = set(spec) - allowed[name]
    if extra:
        raise ValueError(f"unknown keys for model {name!r}: {sorted(extra)}")
    if name == "iid":
        return iid(spec["p"], d)
    if name == "bernoulli":
        return bernoulli(float(spec["p1"]), d)
    if name == "ising":
        return ising(float(spec["beta"]), float(spec.get("J", 1.0)), float(spec.get("h", 0.0)), d)
    if name == "potts":
        return potts(float(spec["beta"]), float(spec.get("J", 1.0)), int(spec.get("states", 3)), d)
    if name == "markov_product":
        if d != 2:
            raise ValueError("markov_product fields are two-dimensional")
        return markov_product(spec["transition"])
    return custom(d, int(spec["alphabet"]), spec["terms"])


# ---------------------------------------------------------------------------
# finite volumes
# ---------------------------------------------------------------------------


@dataclass
class VolumeEnergy:
    """Energy of symbol assignments on a finite volume, term placement by placement.

    For each term, ``idx[p, i]`` is the volume index of the i-th site of
    placement ``p`` (or -1 when the site is fixed by the boundary) and
    ``const[p]`` is the part of the table code contributed by fixed sites.
    """

    q: int
    nsites: int
    groups: list = field(default_factory=list)  # (table, idx, weights, const)

    def energies(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states)
        if states.ndim == 1:
            states = states[None, :]
        out = np.zeros(states.shape[0])
        for table, idx, w, const in self.groups:
            safe = np.where(idx >= 0, idx, 0)
            sub = states[:, safe].astype(np.int64)  # (S, P, k)
            codes = (sub * np.where(idx >= 0, w, 0)).sum(axis=2) + const
            vals = table[codes]
            with np.errstate(invalid="ignore"):
                out += vals.sum(axis=1)
        return out

    def energy(self, state) -> float:
        return float(self.energies(np.asarray(state).ravel())[0])


def _volume_placements(term: Term, L: int, d: int, mode: str) -> np.ndarray:
    """Translations (relative to the volume origin) of ``term`` to include.

    ``mode`` is ``periodic`` (one per site), ``free`` (placements inside the
    volume) or ``meet`` (placements meeting the volume).
    """
    shp = np.asarray(term.shape)
    if mode == PERIODIC:
        return np.indices((L,) * d).reshape(d, -1).T
    lo = -shp.max(axis=0)
    hi = (L - 1) - shp.min(axis=0)
    grid = np.indices(tuple(hi - lo + 1)).reshape(d, -1).T + lo
    sites = grid[:, None, :] + shp[None, :, :]
    inside = np.all((sites >= 0) & (sites < L), axis=2)
    keep = inside.all(axis=1) if mode == FREE else inside.any(axis=1)
    return grid[keep]


def compile_volume(U: Interaction, volume: Box, boundary=FREE) -> VolumeEnergy:
    """Placements of every term meeting ``volume``.

    ``boundary`` is ``"free"`` (terms leaving the volume are dropped),
    ``"periodic"`` (the volume is a torus) or a :class:`Configuration` that
    supplies the symbols on the width-R annulus around the volume.
    """
    d, L = volume.d, volume.side + 1
    if d != U.d:
        raise ValueError("volume and interaction dimensions differ")
    R = U.range
    zeta = None
    if isinstance(boundary, Configuration):
        zeta = boundary
        need = Box(tuple(o - R for o in volume.origin), volume.side + 2 * R)
        if zeta.d != d or not zeta.covers(need):
            raise ValueError(f"boundary condition must cover {need}")
    elif boundary not in (FREE, PERIODIC):
        raise ValueError(f"unknown boundary condition {boundary!r}")
    strides = L ** np.arange(d - 1, -1, -1)
    ve = VolumeEnergy(U.q, L**d)
    for t in U.terms:
        shp = np.asarray(t.shape)
        mode = PERIODIC if boundary == PERIODIC else (FREE if zeta is None else "meet")
        trans = _volume_placements(t, L, d, mode)
        if trans.size == 0:
            continue
        sites = trans[:, None, :] + shp[None, :, :]
        w = U.q ** np.arange(t.k - 1, -1, -1, dtype=np.int64)
        if boundary == PERIODIC:
            idx = ((sites % L) * strides).sum(axis=2)
            const = np.zeros(len(trans), dtype=np.int64)
        else:
            inside = np.all((sites >= 0) & (sites < L), axis=2)
            idx = np.where(inside, (sites * strides).sum(axis=2), -1)
            const = np.zeros(len(trans), dtype=np.int64)
            if zeta is not None:
                for p in range(len(trans)):
                    for i in range(t.k):
                        if not inside[p, i]:
                            site = tuple(int(v) for v in sites[p, i] + np.asarray(volume.origin))
                            const[p] += zeta[site] * w[i]
        ve.groups.append((t.table, idx.astype(np.int64), w, const))
    return ve


def hamiltonian(U: Interaction, volume: Box, sigma: Configuration, boundary=FREE) -> float:
    """Energy of ``sigma`` on ``volume`` with the given boundary condition."""
    if sigma.d != U.d:
        raise ValueError("configuration and interaction dimensions differ")
    if boundary == PERIODIC:
        if not sigma.periodic or sigma.box != volume:
            raise ValueError("a periodic Hamiltonian needs the torus itself as configuration")
        vals = sigma.values
    else:
        if not sigma.covers(volume):
            raise ValueError(f"configuration does not cover the volume {volume}")
        start = [v - o for v, o in zip(volume.origin, sigma.origin)]
        vals = sigma.values[tuple(slice(s, s + volume.side + 1) for s in start)]
    return compile_volume(U, volume, boundary).energy(vals.ravel())


# ---------------------------------------------------------------------------
# single-site quantities
# ---------------------------------------------------------------------------


def _entry_arrays(U: Interaction):
    nb = U.neighborhood()
    pos_of = {s: i for i, s in enumerate(nb)}
    out = []
    for ti, pos, offs in U.entries():
        cols = [(-1 if i == pos else pos_of[tuple(int(v) for v in o)]) for i, o in enumerate(offs)]
        out.append((U.terms[ti], pos, np.asarray(cols)))
    return nb, out


def conditional_energies(U: Interaction, contexts: np.ndarray) -> np.ndarray:
    """Energies ``H_{0}(a | context)`` for every row of ``contexts``.

    ``contexts`` has one column per site of :meth:`Interaction.neighborhood`.
    Returns shape ``(len(contexts), q)``.
    """
    nb, ents = _entry_arrays(U)
    contexts = np.asarray(contexts, dtype=np.int64)
    if nb:
        contexts = contexts.reshape(-1, len(nb))
    else:  # single-site interactions have empty contexts
        contexts = contexts.reshape(contexts.shape[0] if contexts.ndim == 2 else 1, 0)
    S, q = contexts.shape[0], U.q
    out = np.zeros((S, q))
    cand = np.arange(q)
    for term, pos, cols in ents:
        k = term.k
        code = np.zeros((S, q), dtype=np.int64)
        for i in range(k):
            w = q ** (k - 1 - i)
            code += (cand[None, :] if i == pos else contexts[:, cols[i]][:, None]) * w
        with np.errstate(invalid="ignore"):
            out += term.table[code]
    return out


def _probs_from_energies(e: np.ndarray) -> np.ndarray:
    e = np.atleast_2d(e)
    m = e.min(axis=1, keepdims=True)
    if not np.isfinite(m).all():
        raise ValueError("conditional distribution has no admissible symbol")
    w = np.exp(-(e - m))
    return w / w.sum(axis=1, keepdims=True)


def _context_row(U: Interaction, site, context: Configuration) -> np.ndarray:
    site = _vec(site, U.d)
    row = []
    for off in U.neighborhood():
        y = tuple(a + b for a, b in zip(site, off))
        try:
            row.append(context[y])
        except IndexError:
            raise ValueError(f"context is missing the symbol at {y}") from None
    return np.asarray(row, dtype=np.int64)


def single_site_conditional(U: Interaction, site, context: Configuration) -> np.ndarray:
    """Law of the symbol at ``site`` given the symbols of ``context`` around it."""
    if context.d != U.d:
        raise ValueError("context and interaction dimensions differ")
    e = conditional_energies(U, _context_row(U, site, context)[None, :])
    return _probs_from_energies(e)[0]


def _all_contexts(U: Interaction, budget: int = ENUM_BUDGET) -> np.ndarray:
    m = len(U.neighborhood())
    _check_budget(U.q ** m * U.q, "context enumeration", budget)
    rows = list(itertools.product(range(U.q), repeat=m))
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), m)


def dobrushin_matrix_row(U: Interaction, x, y, budget: int = ENUM_BUDGET) -> float:
    """Largest total-variation change of the law at ``x`` caused by changing
    the symbol at ``y`` alone, maximized over all contexts."""
    x, y = _vec(x, U.d), _vec(y, U.d)
    off = tuple(b - a for a, b in zip(x, y))
    nb = U.neighborhood()
    if off not in nb:
        return 0.0
    j = nb.index(off)
    ctx = _all_contexts(U, budget)
    probs = _probs_from_energies(conditional_energies(U, ctx))
    q, m = U.q, len(nb)
    cube = probs.reshape((q,) * m + (q,))
    moved = np.moveaxis(cube, j, 0)  # symbol at y first
    best = 0.0
    for a in range(q):
        for b in range(a + 1, q):
            tv = 0.5 * np.abs(moved[a] - moved[b]).sum(axis=-1)
            best = max(best, float(tv.max()))
    return best


@dataclass(frozen=True)
class DobrushinReport:
    satisfied: bool
    row_sum: float
    row: dict


def check_dobrushin(U: Interaction, budget: int = ENUM_BUDGET) -> DobrushinReport:
    origin = (0,) * U.d
    row = {y: dobrushin_matrix_row(U, origin, y, budget) for y in U.neighborhood()}
    total = float(sum(row.values()))
    return DobrushinReport(total < 1.0, total, row)


@dataclass(frozen=True)
class HighTemperatureReport:
    satisfied: bool
    lhs: float


def check_high_temperature(U: Interaction, budget: int = ENUM_BUDGET) -> HighTemperatureReport:
    """Sum over term placements containing the origin of ``(|A|-1) * osc``."""
    lhs = 0.0
    for t in U.terms:
        _check_budget(t.table.size, "oscillation", budget)
        if t.k > 1:
            lhs += t.k * (t.k - 1) * t.oscillation()
    return HighTemperatureReport(lhs < 2.0, lhs)


def f_U(U: Interaction, context: Configuration, site=None) -> float:
    """Energy density ``sum_{A contains site} U(A, sigma) / |A|``."""
    site = (0,) * U.d if site is None else _vec(site, U.d)
    total = 0.0
    for ti, pos, offs in U.entries():
        t = U.terms[ti]
        syms = []
        for o in offs:
            y = tuple(int(a + b) for a, b in zip(site, o))
            try:
                syms.append(context[y])
            except IndexError:
                raise ValueError(f"context is missing the symbol at {y}") from None
        total += t.energy(syms, U.q) / t.k
    return total


def surprisal_bounds(U: Interaction, budget: int = ENUM_BUDGET) -> tuple[float, float]:
    """``(c, c')``: min and max over contexts and symbols of ``-log P(a | context)``."""
    probs = _probs_from_energies(conditional_energies(U, _all_contexts(U, budget)))
    with np.errstate(divide="ignore"):
        s = -np.log(probs)
    return float(s.min()), float(s.max())
