import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbsrare import exact, laws, models, samplers
from gibbsrare.lattice import Configuration, Pattern, cube, translate
from gibbsrare.pattern_stats import (
    Censored,
    HittingRecord,
    absence_matrix,
    bad_mask,
    count_occurrences,
    factorization_from_absence,
    first_occurrence,
    first_repetition,
    is_badly_self_repeating,
    lambda_estimate,
    lambda_from_sample,
    lambda_from_table,
    placement_scale,
    records_to_csv,
    survival_curve,
    waiting_time,
)

CHECKER = Pattern(np.array([[1, 0], [0, 1]]), 2)


def const(L, sym=0, q=2, d=2):
    return Configuration(np.full((L,) * d, sym), q)


def scan(A: Pattern, sigma: Configuration, K: int):
    """Direct shell-by-shell scan, independent of the kernels."""
    n, d = A.side, A.d
    for k in range(1, K + 1):
        for x in itertools.product(range(k + 1), repeat=d):
            if max(x) != k:
                continue
            win = sigma.values[tuple(slice(v, v + n + 1) for v in x)]
            if np.array_equal(win, A.values):
                return k
    return None


def test_constant_pattern_hits_at_one():
    assert first_occurrence(Pattern.constant(1, 2, 0, 2), const(6), 3) == 1


def test_absent_symbol_censored():
    res = first_occurrence(Pattern.constant(1, 2, 1, 2), const(6), 3)
    assert res == Censored(3)
    assert repr(res) == "CENSORED(3)"


def test_window_too_small():
    with pytest.raises(ValueError, match="does not contain"):
        first_occurrence(CHECKER, const(4), 3)
    with pytest.raises(ValueError):
        first_occurrence(CHECKER, const(8), -1)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        first_occurrence(Pattern.constant(1, 3, 0, 2), const(6), 2)


def test_origin_flag():
    sigma = Configuration(np.kron(np.ones((3, 3), dtype=int), [[1, 0], [0, 1]]), 2)
    assert first_occurrence(CHECKER, sigma, 3, include_origin=True) == 0
    # the tiling repeats along the diagonal, so (1, 1) already matches
    assert first_occurrence(CHECKER, sigma, 3) == 1


def test_first_occurrence_law_matches_enumeration():
    # every 4x4 window, weighted uniformly, against the exact table
    table = exact.brute_force_hitting_law(models.bernoulli(0.5), CHECKER, 2)
    counts = np.zeros(3)
    for bits in itertools.product((0, 1), repeat=16):
        res = first_occurrence(CHECKER, Configuration(np.array(bits).reshape(4, 4), 2), 2)
        if isinstance(res, int):
            counts[res:] += 1
    assert np.allclose(counts / 2**16, table.prob, atol=1e-15)


@given(st.integers(0, 2**20), st.integers(1, 5))
def test_kernel_matches_direct_scan(seed, K):
    rng = np.random.default_rng(seed)
    sigma = Configuration(rng.integers(0, 2, (K + 3, K + 3)), 2)
    A = Pattern(rng.integers(0, 2, (2, 2)), 2)
    got = first_occurrence(A, sigma, K)
    want = scan(A, sigma, K)
    assert got == (Censored(K) if want is None else want)


@given(st.integers(0, 2**20), st.integers(1, 4), st.integers(0, 3), st.integers(0, 3))
def test_translation_consistency(seed, K, x0, x1):
    rng = np.random.default_rng(seed)
    big = Configuration(rng.integers(0, 2, (K + 7, K + 7)), 2)
    A = Pattern(rng.integers(0, 2, (2, 2)), 2)
    shifted = translate(big, (x0, x1))
    direct = Configuration(big.values[x0 : x0 + K + 2, x1 : x1 + K + 2], 2)
    assert first_occurrence(A, shifted, K) == first_occurrence(A, direct, K)


@given(st.integers(0, 2**20), st.integers(1, 4))
def test_hit_iff_count_positive(seed, k):
    rng = np.random.default_rng(seed)
    sigma = Configuration(rng.integers(0, 2, (k + 2, k + 2)), 2)
    A = Pattern(rng.integers(0, 2, (2, 2)), 2)
    hit = isinstance(first_occurrence(A, sigma, k), int)
    assert hit == (count_occurrences(A, sigma, k, include_origin=False) >= 1)


@pytest.mark.parametrize("k,d", [(0, 2), (3, 2), (2, 3)])
def test_count_constant(k, d):
    A = Pattern.constant(1, d, 1, 2)
    assert count_occurrences(A, const(k + 2, 1, d=d), k) == (k + 1) ** d


def test_count_monotone_in_k():
    rng = np.random.default_rng(5)
    sigma = Configuration(rng.integers(0, 2, (12, 12)), 2)
    counts = [count_occurrences(CHECKER, sigma, k) for k in range(11)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_mean_count_matches_expectation():
    m = models.bernoulli(0.5)
    k, M = 3, 4000
    N = np.array([count_occurrences(CHECKER, samplers.IIDField.from_seed(m, 13, r).window(k + 2), k) for r in range(M)])
    want = (k + 1) ** 2 * 2.0**-4
    assert abs(N.mean() - want) < 4 * N.std(ddof=1) / math.sqrt(M)


def test_first_repetition_constant():
    assert first_repetition(const(5, 1), 1, 3) == 1


LISTED = np.array(
    [
        [0, 1, 1, 0, 1, 0],
        [1, 0, 0, 1, 1, 1],
        [0, 0, 1, 0, 0, 1],
        [1, 1, 0, 1, 0, 0],
        [0, 1, 0, 0, 1, 1],
        [1, 0, 1, 1, 0, 1],
    ]
)


def test_first_repetition_listed_configuration():
    sigma = Configuration(LISTED, 2)
    A = Pattern(LISTED[:2, :2], 2)
    # shell 1 has no match; within shell 2 the first match is x = (1, 2)
    assert first_repetition(sigma, 1, 4) == scan(A, sigma, 4) == 2


def test_repetition_is_occurrence_of_initial_pattern():
    rng = np.random.default_rng(2)
    for _ in range(20):
        sigma = Configuration(rng.integers(0, 2, (7, 7)), 2)
        assert first_repetition(sigma, 1, 5) == first_occurrence(Pattern(sigma.values[:2, :2], 2), sigma, 5)


def test_waiting_time_identities():
    assert waiting_time(const(5), const(5), 1, 3) == 1
    sigma = Configuration(LISTED, 2)
    xi = Configuration(np.pad(LISTED[:2, :2], ((0, 3), (0, 3))), 2)  # agrees with sigma on C_1 only
    assert waiting_time(xi, sigma, 1, 4) == first_repetition(sigma, 1, 4)


def test_mean_log_waiting_matches_enumeration():
    # W_1 for Q = Bernoulli(0.3) patterns in P = Bernoulli(0.5) fields, cap 2
    Q, P = models.bernoulli(0.3), models.bernoulli(0.5)
    K = 2
    want = 0.0
    for bits in itertools.product((0, 1), repeat=4):
        A = Pattern(np.array(bits).reshape(2, 2), 2)
        pa = np.prod([0.3 if b else 0.7 for b in bits])
        table = exact.brute_force_hitting_law(P, A, K)
        pk = np.diff(np.concatenate([[0.0], table.prob]))
        want += pa * (sum(pk[k] * math.log(k) for k in range(1, K + 1)) + (1 - table.prob[K]) * math.log(K))
    batch = samplers.implicit_hits(P, 21, range(20000), 1, K, mode="waiting", q_model=Q)
    logs = np.log(np.where(batch.hits < 0, K, batch.hits))
    assert abs(logs.mean() - want) < 4 * logs.std(ddof=1) / math.sqrt(logs.size)


# bad patterns


def test_constant_pattern_is_bad():
    for n in (2, 3, 4):
        assert is_badly_self_repeating(Pattern.constant(n, 2, 0, 2))


def test_n1_never_bad():
    for bits in itertools.product((0, 1), repeat=4):
        assert not is_badly_self_repeating(Pattern(np.array(bits).reshape(2, 2), 2))


def test_single_one_pattern():
    A = Pattern(np.pad([[1]], ((0, 4), (0, 4))), 2)
    # the mixed-sign shift (1, -1) never overlaps the 1 with a 0
    assert is_badly_self_repeating(A)
    assert not is_badly_self_repeating(A, nonnegative_only=True)


def test_bad_mask_brute_force():
    n = 2
    grids = np.array(list(itertools.product((0, 1), repeat=9))).reshape(-1, 3, 3)
    want = []
    for g in grids:
        bad = False
        for x in itertools.product(range(-1, 2), repeat=2):
            if 0 < abs(x[0]) + abs(x[1]) <= n / 2:
                ok = all(
                    g[i, j] == g[i + x[0], j + x[1]]
                    for i in range(3) for j in range(3)
                    if 0 <= i + x[0] < 3 and 0 <= j + x[1] < 3
                )
                bad |= ok
        want.append(bad)
    assert np.array_equal(bad_mask(grids), want)


def test_bad_mass_decreasing():
    masses = [exact.bad_pattern_mass(models.bernoulli(0.5), n) for n in (2, 3)]
    assert masses[0] > masses[1] > 0


# records and survival


def test_record_rejects_zero_hit():
    with pytest.raises(ValueError):
        HittingRecord(0, "h", 0, False, 3)
    HittingRecord(0, "h", 3, True, 3)


def test_records_csv():
    text = records_to_csv([HittingRecord(1, "abc", 2, False, 5), HittingRecord(2, "abc", 5, True, 5)])
    assert text.splitlines() == ["replica,pattern_hash,value,censored,K", "1,abc,2,0,5", "2,abc,5,1,5"]


@given(st.lists(st.integers(1, 30) | st.just(-1), min_size=1, max_size=200))
def test_survival_curve_properties(taus):
    curve = survival_curve(taus, 30, 0.05, 1.0, 2, np.linspace(0, 4, 21))
    assert curve.S[0] == 1.0
    assert np.all(np.diff(curve.S) <= 0)
    assert np.allclose(curve.half_width, curve.z * np.sqrt(curve.S * (1 - curve.S) / len(taus)))


def test_survival_censoring_truncates_and_fails_loudly():
    taus = [-1] * 5 + [1] * 95
    curve = survival_curve(taus, 3, 0.05, 1.0, 2, np.linspace(0, 4, 41))
    assert curve.t.max() < 4
    assert curve.censored_fraction == 0.05
    with pytest.raises(RuntimeError, match="censoring"):
        curve.require_low_censoring()


def test_survival_csv_header():
    curve = survival_curve([1, 2, 3], 5, 0.1, 1.0, 2, [0.0, 0.5])
    assert curve.to_csv().splitlines()[0] == "t,S,ci"


# lambda


def test_lambda_from_exact_table_in_bounds():
    m = models.bernoulli(0.5)
    for bits in itertools.product((0, 1), repeat=4):
        A = Pattern(np.array(bits).reshape(2, 2), 2)
        t = placement_scale(1 / 16, 2)
        table = exact.brute_force_hitting_law(m, A, 2)
        est = lambda_from_table(table, t)
        assert 0 < est.value <= 2
        assert est.t == t
        assert lambda_from_table(table, t).value == est.value


def test_lambda_errors():
    with pytest.raises(ValueError, match="exceeds 1/2"):
        lambda_estimate(0.5, 10, 0.1)
    with pytest.raises(ValueError, match="uninformative"):
        lambda_estimate(1.0, 2, 0.1)
    with pytest.raises(ValueError, match="uninformative"):
        lambda_estimate(0.0, 2, 0.1)
    with pytest.raises(ValueError):
        lambda_estimate(0.5, 1, 0.0)


def test_placement_scale_window():
    for prob in (1 / 16, 1 / 512, 0.3):
        t = placement_scale(prob, 2)
        assert t * prob <= 0.5
        m = round(math.sqrt(t + 1))
        assert ((m + 1) ** 2 - 1) * prob > 0.5


def test_lambda_monte_carlo_matches_table():
    # 2-pattern that does not overlap itself at any shift of norm <= 1
    A = Pattern(np.array([[1, 1, 0], [1, 0, 0], [0, 0, 0]]), 2)
    assert not is_badly_self_repeating(A)
    m = models.bernoulli(0.5)
    prob = 2.0**-9
    t = int(math.floor(prob**-0.5))  # 22, radius 4
    batch = samplers.implicit_hits(m, 4, range(40000), 2, 6, pattern=A)
    est = lambda_from_sample(batch.hits, t, prob, 2, 6)
    # exact survival at radius 4 is a 2^49-state problem; use the independent placement count instead
    r = est.radius
    S = est.survival
    se = math.sqrt(S * (1 - S) / 40000) / (S * t * prob)
    placements = (r + 1) ** 2 - 1
    lam_indep = -placements * math.log1p(-prob) / (t * prob)
    assert abs(est.value - lam_indep) < 4 * se + 0.15


# factorization


def test_factorization_single_cube_gap_zero():
    absent = np.random.default_rng(0).random((300, 1)) < 0.6
    res = factorization_from_absence(absent, 2)
    assert res.gap == 0 and res.ci == 0


def test_factorization_iid_small_gap():
    res = laws.factorization_diagnostic(models.bernoulli(0.5), CHECKER, 3, 2, 2, 2000, seed=3)
    assert res.gap < max(res.ci, 1e-9) * 1.5


def test_factorization_ising_gap_vs_delta():
    A = Pattern.constant(1, 2, 1, 2)
    res = [laws.factorization_diagnostic(models.ising(0.1), A, 2, delta, 2, 1500, seed=7, thin=4, burn_in=50)
           for delta in (1, 3, 5)]
    for a, b in zip(res, res[1:]):
        if a.gap - a.ci > b.gap + b.ci:
            assert a.gap > b.gap
    assert all(r.gap < 0.1 for r in res)


def test_absence_matrix_domain_check():
    with pytest.raises(ValueError):
        absence_matrix([const(4)], CHECKER, 3, 2, 2)
    with pytest.raises(ValueError):
        absence_matrix([const(20)], CHECKER, 3, 0, 2)
