import itertools
import math

import numpy as np
import pytest

from bosonlab import definetti_c as dc
from bosonlab.symfock import enumerate_basis, multinomial


def anticorrelated_pair():
    """m=2, N=2, uniform on the two mixed configurations (1,2) and (2,1)."""
    return dc.SymmetricClassicalState(2, 2, {(1, 1): 1.0})


def brute_force_df(state):
    """Configuration-level oracle for the empirical-mixture construction."""
    m, N = state.m, state.N
    out = {}
    for occ, w in state.weights.items():
        freq = np.array(occ) / N
        for config in itertools.product(range(m), repeat=N):
            p = w * float(np.prod([freq[x] for x in config]))
            out[config] = out.get(config, 0.0) + p
    return out


def config_marginal(config_probs, m, n):
    out = np.zeros((m,) * n)
    for config, p in config_probs.items():
        out[config[:n]] += p
    return out


def test_state_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        dc.SymmetricClassicalState(2, 2, {(1, 1): 0.5})
    with pytest.raises(ValueError, match="does not match"):
        dc.SymmetricClassicalState(2, 2, {(1, 0): 1.0})
    st = anticorrelated_pair()
    assert st.configuration_probability((0, 1)) == 0.5
    assert st.configuration_probability((0, 0)) == 0.0


def test_df_state_single_orbit_is_empirical_product():
    st = dc.SymmetricClassicalState(2, 4, {(3, 1): 1.0})
    out = dc.df_state(st)
    rho = np.array([0.75, 0.25])
    for occ in enumerate_basis(2, 4):
        want = multinomial(4, occ) * float(np.prod(rho ** np.array(occ)))
        assert abs(out.weights[occ] - want) <= 1e-12


def test_df_state_anticorrelated_example():
    out = dc.df_state(anticorrelated_pair())
    # uniform over the 4 configurations
    for config in itertools.product(range(2), repeat=2):
        assert abs(out.configuration_probability(config) - 0.25) <= 1e-12


def test_df_state_preserves_first_marginal():
    rng = np.random.default_rng(0)
    for m, N in [(2, 5), (3, 4)]:
        st = dc.random_symmetric_state(m, N, rng)
        out = dc.df_state(st)
        assert np.abs(dc.marginal(out, 1) - dc.marginal(st, 1)).max() <= 1e-12


def test_df_state_product_input_first_marginal_exact():
    rho = np.array([0.2, 0.5, 0.3])
    st = dc.product_classical_state(rho, 5)
    out = dc.df_state(st)
    assert np.abs(dc.marginal(out, 1) - rho).max() <= 1e-12


def test_df_state_cap_advises_marginals():
    st = dc.SymmetricClassicalState(6, 40, {(40, 0, 0, 0, 0, 0): 1.0})
    with pytest.raises(ValueError, match="df_marginals"):
        dc.df_state(st)


def test_df_marginals_closed_forms():
    st = anticorrelated_pair()
    m2 = dc.df_marginals(st, 2)
    assert np.abs(m2 - 0.25).max() <= 1e-12
    rng = np.random.default_rng(1)
    for m, N in [(2, 3), (3, 4)]:
        st = dc.random_symmetric_state(m, N, rng)
        assert np.abs(dc.df_marginals(st, 1) - dc.marginal(st, 1)).max() == 0.0
        got = dc.df_marginals(st, 2)
        want = dc.marginal(dc.df_state(st), 2)
        assert np.abs(got - want).max() <= 1e-12


def test_df_marginals_match_configuration_oracle():
    rng = np.random.default_rng(2)
    st = dc.random_symmetric_state(3, 4, rng)
    probs = brute_force_df(st)
    assert abs(sum(probs.values()) - 1.0) <= 1e-12
    for n in (1, 2):
        want = config_marginal(probs, 3, n)
        assert np.abs(dc.df_marginals(st, n) - want).max() <= 1e-12


def test_df_remainder_is_positive_measure():
    # mixture marginal minus the falling-factorial multiple of the original
    rng = np.random.default_rng(3)
    for m, N in [(2, 4), (3, 5)]:
        st = dc.random_symmetric_state(m, N, rng)
        for n in (1, 2):
            factor = math.perm(N, n) / N ** n
            rem = dc.df_marginals(st, n) - factor * dc.marginal(st, n)
            assert rem.min() >= -1e-12


def test_verify_df_bound_anticorrelated_exact():
    rep = dc.verify_df_bound(anticorrelated_pair(), 2)
    assert abs(rep.tv - 1.0) <= 1e-14
    assert rep.bound_general == 2.0
    assert rep.passes


def test_verify_df_bound_product_state():
    rho = np.array([0.3, 0.7])
    st = dc.product_classical_state(rho, 6)
    rep = dc.verify_df_bound(st, 2)
    assert rep.passes
    rep1 = dc.verify_df_bound(st, 1)
    assert rep1.tv <= 1e-14 and rep1.bound_general == 0.0


def test_verify_df_bound_random_sweep():
    rng = np.random.default_rng(4)
    for _ in range(60):
        m = int(rng.integers(2, 4))
        N = int(rng.integers(2, 9))
        st = dc.random_symmetric_state(m, N, rng)
        for n in (1, 2):
            assert dc.verify_df_bound(st, n).passes


def test_classical_gibbs_noninteracting_free_energy():
    V = np.array([0.0, 0.7, -0.2])
    w = np.zeros((3, 3))
    N, T = 6, 1.3
    _, F = dc.classical_gibbs(V, w, N, T)
    want = -N * T * math.log(np.sum(np.exp(-V / T)))
    assert abs(F - want) <= 1e-10


def test_classical_gibbs_matches_configuration_enumeration():
    V = np.array([0.0, 0.0])
    J = 0.8
    w = np.array([[0.0, J], [J, 0.0]])
    N, T = 2, 1.0
    state, F = dc.classical_gibbs(V, w, N, T)
    # direct sum over the four configurations: H = w(x1,x2)/(N-1)
    Z = 0.0
    for x1 in range(2):
        for x2 in range(2):
            Z += math.exp(-w[x1, x2] / T)
    assert abs(F - (-T * math.log(Z))) <= 1e-12
    assert abs(state.weights[(1, 1)] - 2 * math.exp(-J) / Z) <= 1e-12


def test_classical_gibbs_marginal_normalization():
    rng = np.random.default_rng(5)
    V = rng.normal(size=3)
    w = rng.normal(size=(3, 3))
    w = (w + w.T) / 2
    state, _ = dc.classical_gibbs(V, w, 7, 0.9)
    assert abs(dc.marginal(state, 1).sum() - 1.0) <= 1e-12
    assert abs(dc.marginal(state, 2).sum() - 1.0) <= 1e-12


def test_mf_free_energy_noninteracting():
    V = np.array([0.0, 0.5])
    w = np.zeros((2, 2))
    T = 0.7
    F, rho = dc.mf_free_energy(V, w, T)
    z = np.exp(-V / T)
    assert abs(F - (-T * math.log(z.sum()))) <= 1e-10
    assert np.abs(rho - z / z.sum()).max() <= 1e-10


def test_mf_free_energy_high_temperature_is_uniform():
    rng = np.random.default_rng(6)
    V = rng.normal(size=3)
    w = rng.normal(size=(3, 3))
    w = (w + w.T) / 2
    _, rho = dc.mf_free_energy(V, w, 1e6)
    assert np.abs(rho - 1 / 3).max() <= 1e-5


def test_mf_matches_gibbs_limit_ferromagnet():
    J = 1.0
    V = np.zeros(2)
    w = np.array([[0.0, J], [J, 0.0]])  # same-state attraction, T_c = J/2
    for T in (0.3, 0.8):
        F_MF, rho = dc.mf_free_energy(V, w, T)
        gaps = []
        for N in (50, 200):
            _, F_N = dc.classical_gibbs(V, w, N, T)
            gaps.append(abs(F_N / N - F_MF))
        assert gaps[1] < gaps[0]
        if T < 0.5:
            assert abs(rho[0] - rho[1]) > 0.5  # symmetry broken
        else:
            assert np.abs(rho - 0.5).max() <= 1e-8


def test_mf_fixed_point_is_critical_point():
    rng = np.random.default_rng(7)
    V = rng.normal(size=3)
    w = rng.normal(size=(3, 3))
    w = (w + w.T) / 2
    T = 1.1
    F, rho = dc.mf_free_energy(V, w, T)
    z = -(V + w @ rho) / T
    z -= z.max()
    target = np.exp(z) / np.exp(z).sum()
    assert np.abs(rho - target).max() <= 1e-11
    assert abs(dc.mf_functional(rho, V, w, T) - F) <= 1e-12
