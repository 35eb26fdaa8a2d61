"""Boxes, configurations, patterns and occurrence predicates on Z^d.

A box of side ``n`` holds the sites ``origin + [0, n]^d`` so it has
``(n+1)**d`` sites.  Configurations live on cubic windows (or cubic tori) and
store their symbols as a read-only ``int8`` array indexed row-major by the
site offset from the window origin.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MAX_DIM = 3


def _vec(x, d: int | None = None) -> tuple[int, ...]:
    t = tuple(int(v) for v in np.atleast_1d(np.asarray(x)).ravel())
    if d is not None and len(t) != d:
        raise ValueError(f"expected a {d}-dimensional vector, got {len(t)} coordinates")
    return t


def norm(x: Sequence[int]) -> int:
    """l1 norm."""
    return int(sum(abs(int(v)) for v in x))


@dataclass(frozen=True)
class Box:
    """Sites ``origin + [0, side]^d``."""

    origin: tuple[int, ...]
    side: int

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec(self.origin))
        if self.side < 0:
            raise ValueError("box side must be nonnegative")
        if not 1 <= len(self.origin) <= MAX_DIM:
            raise ValueError(f"dimension must be between 1 and {MAX_DIM}")

    @property
    def d(self) -> int:
        return len(self.origin)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side + 1,) * self.d

    @property
    def size(self) -> int:
        return (self.side + 1) ** self.d

    @property
    def upper(self) -> tuple[int, ...]:
        return tuple(o + self.side for o in self.origin)

    def sites(self) -> np.ndarray:
        """All sites, row-major, shape ``(size, d)``."""
        grid = np.indices(self.shape).reshape(self.d, -1).T
        return grid + np.asarray(self.origin)

    def contains_box(self, other: "Box") -> bool:
        _same_dim(self.d, other.d)
        return all(a <= b for a, b in zip(self.origin, other.origin)) and all(
            a >= b for a, b in zip(self.upper, other.upper)
        )

    def contains(self, site: Sequence[int]) -> bool:
        site = _vec(site, self.d)
        return all(o <= s <= o + self.side for o, s in zip(self.origin, site))

    def shifted(self, x: Sequence[int]) -> "Box":
        x = _vec(x, self.d)
        return Box(tuple(o + v for o, v in zip(self.origin, x)), self.side)


def cube(n: int, d: int) -> Box:
    """C_n = [0, n]^d."""
    return Box((0,) * d, n)


def _same_dim(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def _frozen(values, alphabet: int) -> np.ndarray:
    arr = np.array(values, dtype=np.int8, copy=True)
    if arr.size and (arr.min() < 0 or arr.max() >= alphabet):
        raise ValueError(f"symbols must lie in [0, {alphabet})")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Configuration:
    """Symbols on a cubic window ``origin + [0, L-1]^d`` or on a cubic torus.

    ``values[i_1, ..., i_d]`` is the symbol at ``origin + i``.  On a torus the
    origin is always 0 and site coordinates are taken modulo ``L``.
    """

    values: np.ndarray
    alphabet: int
    origin: tuple[int, ...] = ()
    periodic: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.alphabet < 1:
            raise ValueError("alphabet size must be positive")
        vals = _frozen(self.values, self.alphabet)
        if vals.ndim < 1 or vals.ndim > MAX_DIM:
            raise ValueError(f"dimension must be between 1 and {MAX_DIM}")
        if len(set(vals.shape)) != 1 or vals.shape[0] < 1:
            raise ValueError(f"configurations live on cubic windows, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)
        origin = _vec(self.origin) if len(self.origin) else (0,) * vals.ndim
        _same_dim(len(origin), vals.ndim)
        if self.periodic and any(origin):
            raise ValueError("a torus has origin 0")
        object.__setattr__(self, "origin", origin)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def box(self) -> Box:
        return Box(self.origin, self.length - 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.origin == other.origin
            and self.periodic == other.periodic
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.alphabet, self.origin, self.periodic, self.values.tobytes()))

    def __getitem__(self, site) -> int:
        site = _vec(site, self.d)
        idx = tuple(s - o for s, o in zip(site, self.origin))
        if self.periodic:
            idx = tuple(i % self.length for i in idx)
        elif any(i < 0 or i >= self.length for i in idx):
            raise IndexError(f"site {site} lies outside the window {self.box}")
        return int(self.values[idx])

    def covers(self, box: Box) -> bool:
        return self.periodic or self.box.contains_box(box)


@dataclass(frozen=True, eq=False)
class Pattern:
    """Symbols on C_n."""

    values: np.ndarray
    alphabet: int

    def __post_init__(self):
        vals = _frozen(self.values, self.alphabet)
        if vals.ndim < 1 or vals.ndim > MAX_DIM or len(set(vals.shape)) != 1:
            raise ValueError(f"a pattern is supported on a cube, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def side(self) -> int:
        return self.values.shape[0] - 1

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pattern):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash((self.alphabet, self.values.tobytes()))

    @property
    def digest(self) -> str:
        """Short stable identifier used in per-replica records."""
        h = hashlib.sha256(f"{self.d}:{self.side}:{self.alphabet}:".encode() + self.values.tobytes())
        return h.hexdigest()[:16]

    def as_configuration(self) -> Configuration:
        return Configuration(self.values, self.alphabet)

    @classmethod
    def constant(cls, n: int, d: int, symbol: int, alphabet: int) -> "Pattern":
        return cls(np.full((n + 1,) * d, symbol, dtype=np.int8), alphabet)


def translate(config: Configuration, x: Sequence[int]) -> Configuration:
    """The configuration ``y -> config(x + y)``.

    On a window the result is the same symbols seen from a shifted origin, so
    any later access outside the shifted window is an error.  On a torus the
    values are rolled.
    """
    x = _vec(x, config.d)
    if config.periodic:
        vals = np.roll(config.values, tuple(-v for v in x), axis=tuple(range(config.d)))
        return Configuration(vals, config.alphabet, periodic=True, meta=config.meta)
    origin = tuple(o - v for o, v in zip(config.origin, x))
    return Configuration(config.values, config.alphabet, origin, meta=config.meta)


def _window(config: Configuration, box: Box) -> np.ndarray:
    _same_dim(config.d, box.d)
    start = [b - o for b, o in zip(box.origin, config.origin)]
    if config.periodic:
        idx = np.ix_(*[np.arange(s, s + box.side + 1) % config.length for s in start])
        return config.values[idx]
    if not config.box.contains_box(box):
        raise ValueError(f"box {box} is not contained in the domain {config.box}")
    return config.values[tuple(slice(s, s + box.side + 1) for s in start)]


def restrict(config: Configuration, box: Box):
    """Restriction to ``box``; a :class:`Pattern` when ``box`` is C_n."""
    vals = _window(config, box)
    if not any(box.origin):
        return Pattern(vals, config.alphabet)
    return Configuration(vals, config.alphabet, box.origin)


def match_mask(A: Pattern, config: Configuration, region: Box, wrap: bool = False) -> np.ndarray:
    """Matches of ``A`` at every placement inside ``region``.

    Entry ``i`` refers to the placement at ``lo + i`` where ``lo`` is the
    region origin clipped to the domain.  Without ``wrap`` a torus is read as
    its fundamental window, so placements never cross the seam.
    """
    _same_dim(A.d, config.d)
    _same_dim(A.d, region.d)
    n = A.side
    if config.periodic and wrap:
        vals = _window(config, region)
    else:
        inner = config.box
        lo = [max(r, o) for r, o in zip(region.origin, inner.origin)]
        hi = [min(r + region.side, o + inner.side) for r, o in zip(region.origin, inner.origin)]
        if any(h - l < n for l, h in zip(lo, hi)):
            return np.zeros((0,) * A.d, dtype=bool)
        vals = config.values[tuple(slice(l - o, h - o + 1) for l, h, o in zip(lo, hi, inner.origin))]
    if any(s < n + 1 for s in vals.shape):
        return np.zeros((0,) * A.d, dtype=bool)
    win = sliding_window_view(vals, A.values.shape)
    return np.all(win == A.values, axis=tuple(range(A.d, 2 * A.d)))


def pattern_present(A: Pattern, config: Configuration, region: Box, wrap: bool = False) -> bool:
    """Is there ``x`` with ``x + C_n`` inside ``region`` where ``config`` shows ``A``?"""
    return bool(match_mask(A, config, region, wrap).any())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def to_text(obj: Configuration | Pattern) -> str:
    """Header ``d n |A|`` (plus ``periodic`` / ``origin=..``), then rows of symbols."""
    vals = obj.values
    n = vals.shape[0] - 1
    head = [str(vals.ndim), str(n), str(obj.alphabet)]
    if isinstance(obj, Configuration):
        if obj.periodic:
            head.append("periodic")
        if any(obj.origin):
            head.append("origin=" + ",".join(str(o) for o in obj.origin))
    rows = vals.reshape(-1, vals.shape[-1])
    body = "\n".join(" ".join(str(int(v)) for v in row) for row in rows)
    return " ".join(head) + "\n" + body + "\n"


def from_text(text: str, kind: str = "configuration") -> Configuration | Pattern:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty configuration text")
    head = lines[0].split()
    if len(head) < 3:
        raise ValueError("line 1: header must read 'd n |A|'")
    d, n, q = (int(t) for t in head[:3])
    periodic, origin = False, (0,) * d
    for tok in head[3:]:
        if tok == "periodic":
            periodic = True
        elif tok.startswith("origin="):
            origin = _vec([int(v) for v in tok[7:].split(",")], d)
        else:
            raise ValueError(f"line 1: unknown header token {tok!r}")
    flat = [int(t) for ln in lines[1:] for t in ln.split()]
    if len(flat) != (n + 1) ** d:
        raise ValueError(f"expected {(n + 1) ** d} symbols, found {len(flat)}")
    vals = np.array(flat, dtype=np.int8).reshape((n + 1,) * d)
    if kind == "pattern":
        if periodic or any(origin):
            raise ValueError("line 1: a pattern has neither origin nor periodic flag")
        return Pattern(vals, q)
    return Configuration(vals, q, origin, periodic)


def to_json(obj: Configuration | Pattern) -> str:
    vals = obj.values
    doc = {
        "kind": "pattern" if isinstance(obj, Pattern) else "configuration",
        "d": vals.ndim,
        "n": vals.shape[0] - 1,
        "alphabet": obj.alphabet,
        "values": [int(v) for v in vals.ravel()],
    }
    if isinstance(obj, Configuration):
        doc["origin"] = list(obj.origin)
        doc["periodic"] = obj.periodic
    return json.dumps(doc, sort_keys=True)


def from_json(text: str) -> Configuration | Pattern:
    doc = json.loads(text)
    d, n = int(doc["d"]), int(doc["n"])
    vals = np.array(doc["values"], dtype=np.int8).reshape((n + 1,) * d)
    if doc.get("kind") == "pattern":
        return Pattern(vals, int(doc["alphabet"]))
    return Configuration(vals, int(doc["alphabet"]), tuple(doc.get("origin", (0,) * d)), bool(doc.get("periodic", False)))


def placements(k: int, d: int, include_origin: bool = False) -> np.ndarray:
    """Vectors x with 0 <= x_i <= k, lexicographic, optionally without 0."""
    grid = np.indices((k + 1,) * d).reshape(d, -1).T
    return grid if include_origin else grid[1:]


def iter_patterns(n: int, d: int, alphabet: int, chunk: int = 1 << 16) -> Iterable[np.ndarray]:
    """All n-patterns as flat rows (row-major digits, most significant first)."""
    m = (n + 1) ** d
    total = alphabet**m
    powers = alphabet ** np.arange(m - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        yield ((idx[:, None] // powers) % alphabet).astype(np.int8)
