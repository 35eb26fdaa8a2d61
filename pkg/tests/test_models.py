import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbsrare import models
from gibbsrare.lattice import Box, Configuration, cube
from gibbsrare.models import (
    FREE,
    PERIODIC,
    Interaction,
    check_dobrushin,
    check_high_temperature,
    dobrushin_matrix_row,
    f_U,
    hamiltonian,
    make_term,
    single_site_conditional,
)


def ising_context(center=1, nbrs=(1, 1, 1, 1)):
    v = np.zeros((3, 3), dtype=np.int8)
    v[1, 1] = center
    v[0, 1], v[2, 1], v[1, 0], v[1, 2] = nbrs
    return Configuration(v, 2, origin=(-1, -1))


def test_zero_interaction_energy():
    U = Interaction.zero(2, 2)
    s = Configuration(np.array([[0, 1], [1, 1]], dtype=np.int8), 2)
    assert hamiltonian(U, cube(1, 2), s) == 0.0


def test_single_site_field_energy():
    beta, h = 0.3, 0.7
    U = models.ising(beta, 1.0, h, 1).interaction
    for sym, spin in ((0, -1), (1, 1)):
        s = Configuration(np.array([sym], dtype=np.int8), 2)
        assert hamiltonian(U, cube(0, 1), s) == pytest.approx(-beta * h * spin)


def test_two_site_ising_energy():
    beta, J, h = 0.4, 1.3, 0.2
    U = models.ising(beta, J, h, 1).interaction
    s = Configuration(np.array([1, 1], dtype=np.int8), 2)
    assert hamiltonian(U, cube(1, 1), s, FREE) == pytest.approx(-beta * J - 2 * beta * h)


@given(st.lists(st.integers(0, 1), min_size=9, max_size=9), st.floats(0.0, 1.0), st.floats(-1.0, 1.0))
def test_free_hamiltonian_matches_term_sum(bits, beta, h):
    U = models.ising(beta, 1.0, h, 2).interaction
    vals = np.asarray(bits, dtype=np.int8).reshape(3, 3)
    spin = 2.0 * vals - 1.0
    bonds = (spin[1:, :] * spin[:-1, :]).sum() + (spin[:, 1:] * spin[:, :-1]).sum()
    want = -beta * bonds - beta * h * spin.sum()
    got = hamiltonian(U, cube(2, 2), Configuration(vals, 2))
    assert got == pytest.approx(want, abs=1e-12)


def test_periodic_hamiltonian_counts_wrapping_bonds():
    U = models.ising(1.0, 1.0, 0.0, 2).interaction
    s = Configuration(np.ones((3, 3), dtype=np.int8), 2, periodic=True)
    assert hamiltonian(U, cube(2, 2), s, PERIODIC) == pytest.approx(-18.0)


def test_conditional_uniform_for_zero():
    U = Interaction.zero(2, 3)
    p = single_site_conditional(U, (0, 0), Configuration(np.zeros((1, 1), dtype=np.int8), 3))
    assert np.allclose(p, 1 / 3)


@pytest.mark.parametrize("nbrs", list(itertools.product((0, 1), repeat=4)))
def test_ising_conditional_closed_form(nbrs):
    beta, J = 0.37, 1.0
    U = models.ising(beta, J, 0.0, 2).interaction
    p = single_site_conditional(U, (0, 0), ising_context(0, nbrs))
    S = sum(2 * b - 1 for b in nbrs)
    assert p[1] == pytest.approx(1 / (1 + math.exp(-2 * beta * J * S)), abs=1e-12)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert (p > 0).all()


@given(st.floats(0.0, 2.0), st.floats(-1.0, 1.0), st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_conditionals_normalized_for_random_contexts(beta, h, nbrs):
    for m in (models.ising(beta, 1.0, h, 2), models.potts(beta, 1.0, 2, 2)):
        p = single_site_conditional(m.interaction, (0, 0), ising_context(0, nbrs))
        assert abs(p.sum() - 1) < 1e-12 and (p > 0).all()


def test_dobrushin_zero_interaction():
    U = Interaction.zero(2, 2)
    assert dobrushin_matrix_row(U, (0, 0), (1, 0)) == 0.0
    rep = check_dobrushin(U)
    assert rep.row_sum == 0.0 and rep.satisfied


def test_dobrushin_outside_range_is_zero():
    U = models.ising(0.3).interaction
    assert dobrushin_matrix_row(U, (0, 0), (2, 0)) == 0.0
    assert dobrushin_matrix_row(U, (0, 0), (1, 1)) == 0.0


@pytest.mark.parametrize("beta", [0.1, 0.3, 1.0])
def test_ising_dobrushin_entry_exhaustive(beta):
    U = models.ising(beta).interaction
    # exhaustive over the three other neighbours; flipping one neighbour moves
    # the local field by 2*beta
    best = 0.0
    for others in itertools.product((-1, 1), repeat=3):
        s = sum(others)
        p_plus = 1 / (1 + math.exp(-2 * beta * (s + 1)))
        p_minus = 1 / (1 + math.exp(-2 * beta * (s - 1)))
        best = max(best, abs(p_plus - p_minus))
    got = dobrushin_matrix_row(U, (0, 0), (1, 0))
    assert got == pytest.approx(best, abs=1e-12)
    assert got <= math.tanh(beta) + 1e-12


@pytest.mark.parametrize("beta", [0.15, 0.6])
def test_dobrushin_row_translation_invariant(beta):
    U = models.ising(beta).interaction
    for y in [(1, 0), (0, 1), (-1, 0), (0, -1)]:
        x = (3, -2)
        assert dobrushin_matrix_row(U, x, (x[0] + y[0], x[1] + y[1])) == dobrushin_matrix_row(U, (0, 0), y)


def test_dobrushin_ising_regimes():
    assert check_dobrushin(models.ising(0.1).interaction).satisfied
    assert not check_dobrushin(models.ising(1.0).interaction).satisfied


def test_high_temperature_examples():
    assert check_high_temperature(Interaction.zero(2, 2)).lhs == 0.0
    rep = check_high_temperature(models.ising(0.0, 1.0, 50.0).interaction)
    assert rep.lhs == 0.0 and rep.satisfied
    for bj in (0.05, 0.2, 0.3):
        rep = check_high_temperature(models.ising(bj).interaction)
        assert rep.lhs == pytest.approx(8 * bj)
        assert rep.satisfied == (bj < 0.25)


@pytest.mark.parametrize("model", [
    models.ising(0.05), models.ising(0.2), models.ising(0.3), models.potts(0.1, 1.0, 3),
    models.potts(0.4, 1.0, 3), models.bernoulli(0.7), models.markov_product([[0.9, 0.1], [0.2, 0.8]]),
])
def test_high_temperature_implies_dobrushin(model):
    if check_high_temperature(model.interaction).satisfied:
        assert check_dobrushin(model.interaction).satisfied


def test_f_U_examples():
    assert f_U(Interaction.zero(2, 2), ising_context()) == 0.0
    p = 0.3
    m = models.bernoulli(p)
    assert f_U(m.interaction, Configuration(np.ones((1, 1), dtype=np.int8), 2)) == pytest.approx(-math.log(p))
    beta, h = 0.25, 0.4
    U = models.ising(beta, 1.0, h).interaction
    assert f_U(U, ising_context()) == pytest.approx(-2 * beta - beta * h)


def test_make_term_normalizes_shape():
    t = make_term([(1, 1), (0, 1)], [[0.0, 1.0], [2.0, 3.0]], 2)
    assert t.shape == ((0, 0), (1, 0))
    # table was indexed (site (1,1), site (0,1)); after sorting it is transposed
    assert t.energy([0, 1], 2) == 2.0


def test_scaled_keeps_hard_constraints():
    U = Interaction(2, 2, (make_term([(0, 0)], [np.inf, 0.5], 2),))
    S = U.scaled(2.0)
    assert np.isinf(S.terms[0].table[0]) and S.terms[0].table[1] == 1.0
    with pytest.raises(ValueError):
        U.scaled(-1.0)


def test_from_spec_rejects_unknown_keys():
    assert models.from_spec({"name": "ising", "beta": 0.2}).params["beta"] == 0.2
    with pytest.raises(ValueError, match="unknown keys"):
        models.from_spec({"name": "ising", "beta": 0.2, "temperature": 3})
    with pytest.raises(ValueError, match="unknown model"):
        models.from_spec({"name": "heisenberg"})


def test_markov_rows_must_sum_to_one():
    with pytest.raises(ValueError):
        models.markov_product([[0.5, 0.5], [0.3, 0.6]])


def test_surprisal_bounds_iid():
    c, c2 = models.surprisal_bounds(models.bernoulli(0.8).interaction)
    assert c == pytest.approx(-math.log(0.8)) and c2 == pytest.approx(-math.log(0.2))
