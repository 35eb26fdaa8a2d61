import math

import numpy as np
import pytest

from gibbsrare import exact, models, oracles


def test_iid_entropy_values():
    assert oracles.iid_entropy([0.5, 0.5]) == pytest.approx(math.log(2))
    assert oracles.iid_entropy([0.7, 0.3]) == pytest.approx(0.6108643, abs=1e-7)
    assert oracles.iid_entropy([1.0, 0.0]) == 0.0


def test_cross_entropy_examples():
    assert oracles.iid_cross_entropy([0.7, 0.3], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert oracles.iid_cross_entropy([0.5, 0.5], [0.3, 0.7]) == pytest.approx(0.7803238, abs=1e-7)
    assert oracles.iid_cross_entropy([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_pressure_scale_one_is_zero():
    # U = -log p makes the normalized measure its own Gibbs state
    assert oracles.iid_pressure([0.2, 0.8]) == pytest.approx(0.0, abs=1e-15)
    assert oracles.iid_pressure([0.2, 0.8], 0.0) == pytest.approx(math.log(2))


def test_theta2_matches_second_difference():
    p, h = 0.7, 1e-3
    f = lambda q: oracles.iid_pressure([p, 1 - p], 1 - q)  # noqa: E731
    fd = (f(h) - 2 * f(0) + f(-h)) / h**2
    assert oracles.bernoulli_theta2(p) == pytest.approx(fd, rel=1e-5)
    assert oracles.bernoulli_theta2(0.7) == pytest.approx(0.21 * math.log(7 / 3) ** 2)


def test_cumulant_branches_meet():
    for p in (0.3, 0.6):
        assert oracles.bernoulli_cumulant(p, -1.0) == pytest.approx(oracles.bernoulli_cumulant(p, -1.5), abs=1e-15)
        assert oracles.bernoulli_cumulant(p, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_cramer_rate_zero_at_mean():
    p = 0.6
    assert oracles.cramer_surprisal_rate(p, oracles.iid_entropy([p, 1 - p])) == pytest.approx(0.0, abs=1e-15)
    assert oracles.cramer_surprisal_rate(p, 10.0) == math.inf
    assert oracles.cramer_surprisal_rate(0.5, math.log(2)) == 0.0


def test_markov_entropy_rate():
    P = np.array([[0.9, 0.1], [0.3, 0.7]])
    pi = np.array([0.75, 0.25])
    want = -sum(pi[i] * P[i, j] * math.log(P[i, j]) for i in range(2) for j in range(2))
    assert oracles.markov_entropy_rate(P) == pytest.approx(want)


def test_onsager_limits():
    assert oracles.onsager_pressure(0.0) == pytest.approx(math.log(2), abs=1e-10)
    # high-temperature series: log 2 + log cosh^2 K + O(tanh^4 K)
    K = 0.05
    assert oracles.onsager_pressure(K) == pytest.approx(math.log(2) + 2 * math.log(math.cosh(K)), abs=1e-5)


def test_onsager_against_transfer_matrix():
    K = 0.2
    assert exact.pressure_value(models.ising(K).interaction) == pytest.approx(oracles.onsager_pressure(K), abs=1e-4)


def test_single_site_hitting_and_occurrences():
    assert oracles.single_site_hitting(0.5, 1, 2) == pytest.approx(1 - 0.5**3)
    assert oracles.expected_occurrences(0.25, 3, 2) == 4.0
