"""Hot loops: shell scanning, heat-bath sweeps, Markov row sampling.

Each kernel has a compiled loop (``*_jit``) and a vectorized numpy fallback
(``*_np``).  Module-level names without suffix dispatch on
``_jit.NUMBA_ENABLED``.  Both paths consume the counter-based streams of
:mod:`gibbsrare.rng` identically, so for the scanning and row kernels they
return bit-identical results; the heat-bath paths agree up to the last ulp of
``exp``.
"""
from __future__ import annotations

import math

import numpy as np

from . import rng
from ._jit import NUMBA_ENABLED, njit

_G = np.uint64(rng.GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_CB = np.uint64(rng.COORD_BITS)
_INV53 = 2.0**-53


@njit(nogil=True, cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(nogil=True, cache=True)
def _word53(key, counter):
    return _mix64(key + counter * _G) >> _S11


@njit(nogil=True, cache=True)
def _uniform(key, counter):
    return np.float64(_word53(key, counter)) * _INV53


@njit(nogil=True, cache=True)
def _symbol(w53, thr):
    s = 0
    while s < thr.shape[0] and w53 >= thr[s]:
        s += 1
    return s


# ---------------------------------------------------------------------------
# first hit on an implicit i.i.d. field
# ---------------------------------------------------------------------------


@njit(nogil=True, cache=True)
def _first_hit_iid_jit(key, thr, pat, pat_pack, d, kmin, kmax):
    m = pat.shape[0]
    nprefix = d - 1
    prefix = np.zeros(max(nprefix, 1), np.int64)
    lastshift = _CB * np.uint64(nprefix)
    for k in range(kmin, kmax + 1):
        for i in range(nprefix):
            prefix[i] = 0
        while True:
            pm = 0
            base = np.uint64(0)
            for i in range(nprefix):
                if prefix[i] > pm:
                    pm = prefix[i]
                base += np.uint64(prefix[i]) << (_CB * np.uint64(i))
            lo = 0 if pm == k else k
            for last in range(lo, k + 1):
                pos = base + (np.uint64(last) << lastshift)
                ok = True
                for j in range(m):
                    if _symbol(_word53(key, pos + pat_pack[j]), thr) != pat[j]:
                        ok = False
                        break
                if ok:
                    return k
            i = nprefix - 1
            while i >= 0:
                prefix[i] += 1
                if prefix[i] <= k:
                    break
                prefix[i] = 0
                i -= 1
            if i < 0:
                break
    return -1


@njit(nogil=True, cache=True)
def _first_hit_iid_batch_jit(keys, thr, pats, pat_pack, d, kmin, kmax, out):
    for r in range(keys.shape[0]):
        out[r] = _first_hit_iid_jit(keys[r], thr, pats[r], pat_pack, d, kmin, kmax)
    return out


def _shell_coords(k: int, d: int) -> np.ndarray:
    """All x in [0,k]^d with max_i x_i == k, lexicographic."""
    if k == 0:
        return np.zeros((1, d), dtype=np.int64)
    pieces = []
    for i in range(d):
        ranges = [np.arange(k)] * i + [np.array([k])] + [np.arange(k + 1)] * (d - 1 - i)
        mesh = np.meshgrid(*ranges, indexing="ij")
        pieces.append(np.stack([m.ravel() for m in mesh], axis=1))
    out = np.concatenate(pieces)
    order = np.lexsort(out.T[::-1])
    return out[order]


def _shell_blocks(d: int, kmin: int, kmax: int, block: int = 1 << 16):
    k = kmin
    while k <= kmax:
        coords, shells = [], []
        size = 0
        while k <= kmax and size < block:
            c = _shell_coords(k, d)
            coords.append(c)
            shells.append(np.full(len(c), k, dtype=np.int64))
            size += len(c)
            k += 1
        yield np.concatenate(coords), np.concatenate(shells)


def _first_hit_iid_np(key, thr, pat, pat_pack, d, kmin, kmax):
    key = int(key)
    for coords, shells in _shell_blocks(d, kmin, kmax):
        packed = rng.pack_coords(coords)
        alive = np.arange(len(packed))
        for j in range(len(pat)):
            w = rng.words(key, packed[alive] + pat_pack[j])
            alive = alive[rng.symbols_from_words(w, thr) == pat[j]]
            if alive.size == 0:
                break
        if alive.size:
            return int(shells[alive].min())
    return -1


def _first_hit_iid_batch_np(keys, thr, pats, pat_pack, d, kmin, kmax, out):
    for r in range(len(keys)):
        out[r] = _first_hit_iid_np(keys[r], thr, pats[r], pat_pack, d, kmin, kmax)
    return out


# ---------------------------------------------------------------------------
# first hit on a materialized window
# ---------------------------------------------------------------------------


@njit(nogil=True, cache=True)
def _first_hit_window_jit(win, strides, pat, pat_off, d, kmin, kmax):
    m = pat.shape[0]
    nprefix = d - 1
    prefix = np.zeros(max(nprefix, 1), np.int64)
    for k in range(kmin, kmax + 1):
        for i in range(nprefix):
            prefix[i] = 0
        while True:
            pm = 0
            base = 0
            for i in range(nprefix):
                if prefix[i] > pm:
                    pm = prefix[i]
                base += prefix[i] * strides[i]
            lo = 0 if pm == k else k
            for last in range(lo, k + 1):
                pos = base + last * strides[nprefix]
                ok = True
                for j in range(m):
                    if win[pos + pat_off[j]] != pat[j]:
                        ok = False
                        break
                if ok:
                    return k
            i = nprefix - 1
            while i >= 0:
                prefix[i] += 1
                if prefix[i] <= k:
                    break
                prefix[i] = 0
                i -= 1
            if i < 0:
                break
    return -1


def _first_hit_window_np(win, strides, pat, pat_off, d, kmin, kmax):
    for coords, shells in _shell_blocks(d, kmin, kmax):
        base = coords @ strides
        alive = np.arange(len(base))
        for j in range(len(pat)):
            alive = alive[win[base[alive] + pat_off[j]] == pat[j]]
            if alive.size == 0:
                break
        if alive.size:
            return int(shells[alive].min())
    return -1


# ---------------------------------------------------------------------------
# materialized i.i.d. and Markov-row fields
# ---------------------------------------------------------------------------


@njit(nogil=True, cache=True)
def _iid_window_jit(key, thr, shape, out):
    d = shape.shape[0]
    n = out.shape[0]
    idx = np.zeros(d, np.int64)
    for flat in range(n):
        rem = flat
        for ax in range(d - 1, -1, -1):
            idx[ax] = rem % shape[ax]
            rem //= shape[ax]
        c = np.uint64(0)
        for ax in range(d):
            c += np.uint64(idx[ax]) << (_CB * np.uint64(ax))
        out[flat] = _symbol(_word53(key, c), thr)
    return out


def _iid_window_np(key, thr, shape, out):
    coords = np.indices(tuple(int(s) for s in shape)).reshape(len(shape), -1).T
    out[:] = rng.symbols_from_words(rng.words(int(key), rng.pack_coords(coords)), thr)
    return out


@njit(nogil=True, cache=True)
def _markov_rows_jit(key, pi_thr, p_thr, out):
    rows, cols = out.shape
    for r in range(rows):
        prev = _symbol(_word53(key, np.uint64(r)), pi_thr)
        out[r, 0] = prev
        for c in range(1, cols):
            counter = np.uint64(r) + (np.uint64(c) << _CB)
            prev = _symbol(_word53(key, counter), p_thr[prev])
            out[r, c] = prev
    return out


def _markov_rows_np(key, pi_thr, p_thr, out):
    rows, cols = out.shape
    coords = np.indices((rows, cols)).reshape(2, -1).T
    w = (rng.words(int(key), rng.pack_coords(coords)) >> np.uint64(11)).reshape(rows, cols)
    out[:, 0] = np.searchsorted(pi_thr, w[:, 0], side="right")
    for c in range(1, cols):
        thr = p_thr[out[:, c - 1].astype(np.int64)]
        out[:, c] = (w[:, c][:, None] >= thr).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# heat-bath (Glauber) sweeps
# ---------------------------------------------------------------------------


@njit(nogil=True, cache=True)
def _heat_bath_jit(state, nbr, ent_pos, ent_k, ent_rel, ent_tab, tables, q, key, sweep0, n_sweeps, counts, trace):
    nsites = state.shape[0]
    nent = ent_pos.shape[0]
    energy = np.empty(q)
    weight = np.empty(q)
    for sw in range(n_sweeps):
        for s in range(nsites):
            for c in range(q):
                tot = 0.0
                for e in range(nent):
                    code = 0
                    for i in range(ent_k[e]):
                        if i == ent_pos[e]:
                            sym = c
                        else:
                            sym = state[nbr[s, ent_rel[e, i]]]
                        code = code * q + sym
                    tot += tables[ent_tab[e] + code]
                energy[c] = tot
            emin = energy.min()
            if not np.isfinite(emin):
                raise ValueError("heat-bath conditional has no admissible symbol")
            total = 0.0
            for c in range(q):
                weight[c] = math.exp(-(energy[c] - emin))
                total += weight[c]
            u = _uniform(key, np.uint64((sweep0 + sw) * nsites + s)) * total
            c = 0
            acc = weight[0]
            while u >= acc and c < q - 1:
                c += 1
                acc += weight[c]
            state[s] = c
        if counts.shape[0] > 0:
            code = 0
            for i in range(nsites):
                code = code * q + state[i]
            counts[code] += 1
        if trace.shape[0] > 0:
            acc_sym = 0.0
            for i in range(nsites):
                acc_sym += state[i]
            trace[sw] = acc_sym / nsites
    return state


def _heat_bath_np(state, nbr, ent_pos, ent_k, ent_rel, ent_tab, tables, q, key, sweep0, n_sweeps, counts, trace):
    nsites = state.shape[0]
    cand = np.arange(q)
    powers = [q ** (ent_k[e] - 1 - np.arange(ent_k[e])) for e in range(len(ent_pos))]
    for sw in range(n_sweeps):
        u_all = rng.uniforms(int(key), (sweep0 + sw) * nsites + np.arange(nsites, dtype=np.uint64))
        for s in range(nsites):
            energy = np.zeros(q)
            for e in range(len(ent_pos)):
                syms = state[nbr[s, ent_rel[e, : ent_k[e]]]].astype(np.int64)
                base = int(syms @ powers[e]) - int(syms[ent_pos[e]]) * int(powers[e][ent_pos[e]])
                energy += tables[ent_tab[e] + base + cand * int(powers[e][ent_pos[e]])]
            emin = energy.min()
            if not np.isfinite(emin):
                raise ValueError("heat-bath conditional has no admissible symbol")
            weight = np.exp(-(energy - emin))
            cum = np.cumsum(weight)
            u = u_all[s] * cum[-1]
            c = 0
            while u >= cum[c] and c < q - 1:
                c += 1
            state[s] = c
        if counts.shape[0] > 0:
            counts[int(state.astype(np.int64) @ (q ** np.arange(nsites - 1, -1, -1, dtype=np.int64)))] += 1
        if trace.shape[0] > 0:
            trace[sw] = state.mean()
    return state


JIT = {
    "first_hit_iid": _first_hit_iid_jit,
    "first_hit_iid_batch": _first_hit_iid_batch_jit,
    "first_hit_window": _first_hit_window_jit,
    "iid_window": _iid_window_jit,
    "markov_rows": _markov_rows_jit,
    "heat_bath": _heat_bath_jit,
}
NUMPY = {
    "first_hit_iid": _first_hit_iid_np,
    "first_hit_iid_batch": _first_hit_iid_batch_np,
    "first_hit_window": _first_hit_window_np,
    "iid_window": _iid_window_np,
    "markov_rows": _markov_rows_np,
    "heat_bath": _heat_bath_np,
}
ACTIVE = JIT if NUMBA_ENABLED else NUMPY

first_hit_iid = ACTIVE["first_hit_iid"]
first_hit_iid_batch = ACTIVE["first_hit_iid_batch"]
first_hit_window = ACTIVE["first_hit_window"]
iid_window = ACTIVE["iid_window"]
markov_rows = ACTIVE["markov_rows"]
heat_bath = ACTIVE["heat_bath"]
