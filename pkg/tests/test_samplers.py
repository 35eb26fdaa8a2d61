import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from gibbsrare import exact, kernels, models, rng, samplers
from gibbsrare.lattice import Configuration, Pattern, cube
from gibbsrare.models import PERIODIC
from gibbsrare.pattern_stats import first_occurrence
from gibbsrare.samplers import SamplerSpec


def test_iid_frequencies():
    p = np.array([0.2, 0.5, 0.3])
    cfg = samplers.sample(SamplerSpec(models.iid(p, 2), 1000, seed=3))
    freq = np.bincount(cfg.values.ravel(), minlength=3) / cfg.values.size
    se = np.sqrt(p * (1 - p) / cfg.values.size)
    assert np.all(np.abs(freq - p) < 4 * se)


def test_iid_dimension_three():
    cfg = samplers.sample(SamplerSpec(models.bernoulli(0.25, 3), 40, seed=1))
    assert cfg.values.shape == (40, 40, 40)
    assert abs(cfg.values.mean() - 0.25) < 4 * np.sqrt(0.25 * 0.75 / 40**3)


def test_same_seed_same_sample():
    spec = SamplerSpec(models.ising(0.2), 6, burn_in=20, seed=9, replica=4)
    assert samplers.sample(spec) == samplers.sample(spec)
    other = samplers.sample(SamplerSpec(models.ising(0.2), 6, burn_in=20, seed=9, replica=5))
    assert other != samplers.sample(spec)


def test_sample_metadata():
    cfg = samplers.sample(SamplerSpec(models.ising(0.1), 4, burn_in=10, seed=2))
    assert cfg.periodic
    assert cfg.meta["method"] == "glauber"
    assert cfg.meta["burn_in"] == 10
    assert cfg.meta["warnings"] == []


def test_zero_burn_in_warns():
    cfg = samplers.sample(SamplerSpec(models.ising(0.1), 4, burn_in=0))
    assert any("burn-in" in w for w in cfg.meta["warnings"])


def test_nonunique_refused_then_allowed():
    m = models.ising(0.6)
    with pytest.raises(ValueError, match="Dobrushin"):
        samplers.sample(SamplerSpec(m, 4, burn_in=5))
    cfg = samplers.sample(SamplerSpec(m, 4, burn_in=5, allow_nonunique=True))
    assert cfg.meta["warnings"]


@pytest.mark.parametrize("bad", [dict(L=0), dict(burn_in=-1), dict(method="metropolis"), dict(seed=-1)])
def test_spec_validation(bad):
    kw = dict(model=models.ising(0.1), L=4)
    kw.update(bad)
    with pytest.raises(ValueError):
        SamplerSpec(**kw)


def test_iid_sampler_needs_iid_model():
    with pytest.raises(ValueError):
        SamplerSpec(models.ising(0.1), 4, method="iid")


def test_glauber_beta_zero_is_uniform():
    # heat bath at zero coupling resamples each site uniformly
    counts = samplers.glauber_histogram(models.ising(0.0), 2, 20000, 5, seed=4)
    res = stats.chisquare(counts)
    assert res.pvalue > 1e-3


def test_glauber_matches_torus_law():
    m = models.ising(0.15)
    counts = samplers.glauber_histogram(m, 2, 40000, 100, seed=1)
    emp = counts / counts.sum()
    exact_p = np.exp(exact.gibbs_log_probs(m.interaction, cube(1, 2), PERIODIC))
    assert 0.5 * np.abs(emp - exact_p).sum() < 0.02


def test_heat_bath_detailed_balance():
    m = models.ising(0.3, 1.0, 0.2)
    pi = np.exp(exact.gibbs_log_probs(m.interaction, cube(1, 2), PERIODIC))
    for site in range(4):
        K = samplers.heat_bath_kernel(m.interaction, 2, site)
        assert np.allclose(K.sum(axis=1), 1.0)
        flow = pi[:, None] * K
        assert np.allclose(flow, flow.T, atol=1e-14)


def test_markov_identity_rows_constant():
    m = models.markov_product(np.eye(3))
    cfg = samplers.sample(SamplerSpec(m, 30, seed=8))
    assert np.all(cfg.values == cfg.values[:, :1])


def test_markov_rows_independent_stationary():
    P = np.array([[0.9, 0.1], [0.3, 0.7]])
    m = models.markov_product(P)
    cfg = samplers.sample(SamplerSpec(m, 400, seed=2)).values
    pi = models.stationary_distribution(P)
    assert abs(cfg.mean() - pi[1]) < 0.02
    a, b = cfg[:, :-1].ravel(), cfg[:, 1:].ravel()
    stay0 = np.mean(b[a == 0] == 0)
    assert abs(stay0 - 0.9) < 0.01


def test_sample_pair_deterministic_and_distinct():
    q = SamplerSpec(models.bernoulli(0.3), 20)
    p = SamplerSpec(models.bernoulli(0.3), 20)
    xi, sigma = samplers.sample_pair(q, p, 77)
    xi2, sigma2 = samplers.sample_pair(q, p, 77)
    assert xi == xi2 and sigma == sigma2
    assert xi != sigma
    # fields from the two derived seeds are uncorrelated
    r = np.corrcoef(xi.values.ravel(), sigma.values.ravel())[0, 1]
    assert abs(r) < 4 / 20


def test_glauber_chain_thinning():
    chain = samplers.glauber_chain(models.ising(0.1), 5, 4, thin=3, burn_in=10, seed=1)
    assert [c.meta["sweep"] for c in chain] == [13, 16, 19, 22]
    again = samplers.glauber_chain(models.ising(0.1), 5, 4, thin=3, burn_in=10, seed=1)
    assert chain == again


def test_integrated_autocorrelation_white_noise():
    x = np.random.default_rng(0).normal(size=20000)
    assert samplers.integrated_autocorrelation(x) == pytest.approx(1.0, abs=0.15)


def test_iid_window_kernels_agree():
    thr = samplers.iid_thresholds(models.iid([0.1, 0.6, 0.3]))
    a = np.empty(9 * 9 * 9, dtype=np.int8)
    b = np.empty_like(a)
    shape = np.array([9, 9, 9], dtype=np.int64)
    kernels.JIT["iid_window"](np.uint64(123), thr, shape, a)
    kernels.NUMPY["iid_window"](np.uint64(123), thr, shape, b)
    assert np.array_equal(a, b)


def test_markov_kernels_agree():
    m = models.markov_product(np.array([[0.5, 0.5], [0.2, 0.8]]))
    pi_thr = rng.thresholds(rng.cdf_of(m.stationary))
    p_thr = np.stack([rng.thresholds(rng.cdf_of(r)) for r in m.transition])
    a = np.empty((12, 12), dtype=np.int8)
    b = np.empty_like(a)
    kernels.JIT["markov_rows"](np.uint64(5), pi_thr, p_thr, a)
    kernels.NUMPY["markov_rows"](np.uint64(5), pi_thr, p_thr, b)
    assert np.array_equal(a, b)


def test_heat_bath_kernels_agree():
    U = models.potts(0.2, states=3).interaction
    setup = samplers.heat_bath_setup(U, 5)
    start = samplers._initial_state(3, 25, 1, 0)
    outs = []
    for impl in (kernels.JIT, kernels.NUMPY):
        state = start.copy()
        trace = np.zeros(15)
        impl["heat_bath"](state, setup.nbr, setup.ent_pos, setup.ent_k, setup.ent_rel, setup.ent_tab,
                          setup.tables, 3, np.uint64(42), 0, 15, np.zeros(0, dtype=np.int64), trace)
        outs.append((state, trace))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert np.allclose(outs[0][1], outs[1][1])


@given(st.integers(0, 2**63), st.integers(1, 2), st.integers(1, 6))
def test_first_hit_kernels_agree(seed, n, K):
    m = models.bernoulli(0.4)
    A = Pattern(np.arange((n + 1) ** 2).reshape(n + 1, n + 1) % 2, 2)
    key = np.uint64(rng.stream_key(seed))
    thr = samplers.iid_thresholds(m)
    pack = rng.pack_coords(samplers.cube_offsets(n, 2))
    pat = A.flat.astype(np.int8)
    assert kernels.JIT["first_hit_iid"](key, thr, pat, pack, 2, 1, K) == kernels.NUMPY["first_hit_iid"](
        key, thr, pat, pack, 2, 1, K
    )


@given(st.integers(0, 2**32), st.integers(0, 3))
def test_implicit_field_matches_window(seed, replica):
    m = models.bernoulli(0.5)
    field = samplers.IIDField.from_seed(m, seed, replica)
    win = field.window(7)
    A = Pattern(np.array([[1, 0], [0, 1]]), 2)
    got = field.first_occurrence(A, 5)
    want = first_occurrence(A, win, 5)
    assert got == (want if isinstance(want, int) else -1)


def test_implicit_hits_modes():
    m = models.bernoulli(0.5)
    batch = samplers.implicit_hits(m, 3, range(50), 1, 6, mode="repetition")
    for r, hit, pat in zip(batch.replicas, batch.hits, batch.patterns):
        win = samplers.IIDField.from_seed(m, 3, int(r)).window(8)
        assert np.array_equal(pat, win.values[:2, :2].ravel())
        want = first_occurrence(Pattern(pat.reshape(2, 2), 2), win, 6)
        assert hit == (want if isinstance(want, int) else -1)


def test_implicit_waiting_uses_pair_seeds():
    Q, P = models.bernoulli(0.3), models.bernoulli(0.5)
    batch = samplers.implicit_hits(P, 11, [0], 1, 4, mode="waiting", q_model=Q)
    xi, sigma = samplers.sample_pair(SamplerSpec(Q, 6), SamplerSpec(P, 6), 11)
    assert np.array_equal(batch.patterns[0], xi.values[:2, :2].ravel())
    want = first_occurrence(Pattern(xi.values[:2, :2], 2), sigma, 4)
    assert batch.hits[0] == (want if isinstance(want, int) else -1)


def test_implicit_hits_per_replica_caps():
    m = models.bernoulli(0.5)
    A = Pattern.constant(1, 2, 1, 2)
    fixed = samplers.implicit_hits(m, 1, range(20), 1, 5, pattern=A)
    varied = samplers.implicit_hits(m, 1, range(20), 1, np.full(20, 5), pattern=A)
    assert np.array_equal(fixed.hits, varied.hits)


def test_implicit_hits_reject_gibbs():
    with pytest.raises(ValueError):
        samplers.implicit_hits(models.ising(0.1), 1, range(3), 1, 4, mode="repetition")


def test_parallel_map_order_independent():
    items = list(range(17))
    one = samplers.parallel_map(lambda x: x * x, items, workers=1)
    many = samplers.parallel_map(lambda x: x * x, items, workers=4)
    assert one == many == [x * x for x in items]


def test_chunked_covers_range():
    parts = samplers.chunked(130, 64)
    assert [len(p) for p in parts] == [64, 64, 2]
    assert [i for p in parts for i in p] == list(range(130))


def test_configuration_values_read_only():
    cfg = samplers.sample(SamplerSpec(models.bernoulli(0.5), 4))
    assert isinstance(cfg, Configuration)
    with pytest.raises(ValueError):
        cfg.values[0, 0] = 1
