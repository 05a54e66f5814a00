import math

import numpy as np
import pytest

from bosonlab import definetti_q as dq
from bosonlab import symfock as sf
from conftest import random_unit


def test_sampler_reproducibility_and_counter():
    s = dq.SphereSampler(3, 123)
    first = s.sample(8)
    assert s.counter == 8
    again = dq.SphereSampler(3, 123).sample(8)
    assert np.abs(first - again).max() == 0.0
    resumed = dq.SphereSampler(3, 123, counter=5).sample(3)
    assert np.abs(resumed - first[5:]).max() == 0.0


def test_sampler_stream_split_is_contiguous():
    for d in (2, 3, 5):
        s = dq.SphereSampler(d, 42)
        chunks = np.vstack([s.sample(7), s.sample(9), s.sample(4)])
        whole = dq.SphereSampler(d, 42).sample(20)
        assert np.abs(chunks - whole).max() == 0.0


def test_sampler_distinct_streams_decorrelate():
    a = dq.SphereSampler(2, 42, stream=0).sample(4)
    b = dq.SphereSampler(2, 42, stream=1).sample(4)
    assert np.abs(a - b).max() > 1e-3


def test_sampler_uniformity_moments():
    U = dq.SphereSampler(3, 7).sample(200000)
    assert np.abs(np.linalg.norm(U, axis=1) - 1.0).max() <= 1e-12
    # |u_i|^2 has mean 1/d under the uniform measure
    p = np.abs(U) ** 2
    se = p.std(axis=0) / math.sqrt(U.shape[0])
    assert np.all(np.abs(p.mean(axis=0) - 1 / 3) <= 3 * se)


def test_lower_symbol_product_state():
    rng = np.random.default_rng(0)
    d, N = 2, 4
    v = random_unit(d, rng)
    op = sf.pure_state_operator(sf.product_state(v, N), d, N)
    for _ in range(5):
        u = random_unit(d, rng)
        want = sf.sym_dimension(d, N) * abs(np.vdot(u, v)) ** (2 * N)
        assert abs(dq.lower_symbol(op, u) - want) <= 1e-10


def test_lower_symbol_maximally_mixed_is_one():
    d, N = 2, 3
    D = sf.sym_dimension(d, N)
    op = sf.SectorOperator(d, N, np.eye(D) / D)
    rng = np.random.default_rng(1)
    for _ in range(5):
        assert abs(dq.lower_symbol(op, random_unit(d, rng)) - 1.0) <= 1e-12


def test_lower_symbol_integrates_to_one():
    rng = np.random.default_rng(2)
    op = sf.random_density(2, 4, rng)
    vals = dq.lower_symbol_batch(op, dq.SphereSampler(2, 11).sample(10 ** 5))
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) <= 3 * se


def test_chiribella_n1_closed_form():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        N = 4
        op = sf.random_density(d, N, rng)
        marg = [sf.partial_trace(op, l) for l in range(2)]
        tilde = dq.chiribella_reduced(marg, N, d, 1)
        # compare in the one-body mode basis
        S1 = sf.embedding_isometry(d, 1)
        got = S1 @ tilde.matrix @ S1.conj().T
        gamma1 = S1 @ marg[1].matrix @ S1.conj().T
        want = (np.eye(d) + N * gamma1) / (N + d)
        assert np.abs(got - want).max() <= 1e-12
        assert abs(tilde.trace() - 1.0) <= 1e-10


def test_chiribella_n_equals_N_equals_one():
    rng = np.random.default_rng(4)
    for d in (2, 4):
        op = sf.random_density(d, 1, rng)
        tilde = dq.chiribella_reduced([sf.partial_trace(op, 0), op], 1, d, 1)
        assert abs(tilde.trace() - 1.0) <= 1e-12


def test_chiribella_trace_one_and_psd():
    rng = np.random.default_rng(5)
    for d, N, n in [(2, 3, 2), (2, 5, 2), (3, 4, 2), (2, 6, 3)]:
        op = sf.random_density(d, N, rng)
        marg = [sf.partial_trace(op, l) for l in range(n + 1)]
        tilde = dq.chiribella_reduced(marg, N, d, n)
        assert abs(tilde.trace() - 1.0) <= 1e-10
        assert np.linalg.eigvalsh(tilde.matrix).min() >= -1e-10


def test_chiribella_rejects_inconsistent_marginals():
    rng = np.random.default_rng(6)
    op = sf.random_density(2, 3, rng)
    marg = [sf.partial_trace(op, l) for l in range(3)]
    other = sf.random_density(2, 1, rng)
    with pytest.raises(ValueError, match="inconsistent"):
        dq.chiribella_reduced([marg[0], other, marg[2]], 3, 2, 2)


def test_chiribella_matches_mc_and_antiwick():
    rng = np.random.default_rng(7)
    d, N = 2, 3
    op = sf.random_density(d, N, rng)
    marg = [sf.partial_trace(op, l) for l in range(3)]
    closed = dq.chiribella_reduced(marg, N, d, 2)
    est, se = dq.ckmr_reduced_mc(op, 2, 10 ** 5, dq.SphereSampler(d, 42, stream=3))
    assert np.all(np.abs(est.matrix - closed.matrix) <= 3 * se + 1e-12)
    for _ in range(20):
        v = random_unit(d, rng)
        vn = sf.product_state(v, 2)
        elem = float(np.vdot(vn, closed.matrix @ vn).real)
        assert abs(elem - dq.antiwick_reduced_element(op, v, 2)) <= 1e-9


def test_ckmr_mc_maximally_mixed_marginal():
    d, N = 2, 4
    D = sf.sym_dimension(d, N)
    op = sf.SectorOperator(d, N, np.eye(D) / D)
    est, se = dq.ckmr_reduced_mc(op, 1, 2 * 10 ** 4, dq.SphereSampler(d, 9))
    assert np.all(np.abs(est.matrix - np.eye(2) / 2) <= 3 * se + 1e-12)


def test_ckmr_mc_product_state_closed_form():
    d, N = 2, 3
    e1 = np.array([1.0, 0.0])
    op = sf.pure_state_operator(sf.product_state(e1, N), d, N)
    marg = [sf.partial_trace(op, l) for l in range(2)]
    closed = dq.chiribella_reduced(marg, N, d, 1)
    est, se = dq.ckmr_reduced_mc(op, 1, 10 ** 5, dq.SphereSampler(d, 10))
    assert np.all(np.abs(est.matrix - closed.matrix) <= 3 * se + 1e-12)


def test_ckmr_mc_reproducible_and_clt_scaling():
    rng = np.random.default_rng(8)
    op = sf.random_density(2, 3, rng)
    a, _ = dq.ckmr_reduced_mc(op, 1, 2000, dq.SphereSampler(2, 5, stream=2))
    b, _ = dq.ckmr_reduced_mc(op, 1, 2000, dq.SphereSampler(2, 5, stream=2))
    assert np.abs(a.matrix - b.matrix).max() == 0.0
    norms = []
    for M in (10 ** 4, 4 * 10 ** 4, 16 * 10 ** 4):
        _, se = dq.ckmr_reduced_mc(op, 1, M, dq.SphereSampler(2, 6, stream=4))
        norms.append(np.linalg.norm(se))
    assert norms[0] > norms[1] > norms[2]
    for ratio in (norms[0] / norms[1], norms[1] / norms[2]):
        assert 1.5 <= ratio <= 2.5


def test_wick_to_antiwick_coefficients():
    assert dq.wick_to_antiwick_coeffs(1) == [1, 1]
    assert dq.wick_to_antiwick_coeffs(2) == [2, 4, 1]
    assert dq.wick_to_antiwick_coeffs(0) == [1]
    # closed form against a second exact expression: c_{n,k} = n!^2 / (k!^2 (n-k)!)
    for n in range(6):
        got = dq.wick_to_antiwick_coeffs(n)
        want = [
            math.factorial(n) ** 2 // (math.factorial(k) ** 2 * math.factorial(n - k))
            for k in range(n + 1)
        ]
        assert got == want


def test_wick_antiwick_matrix_identity():
    rng = np.random.default_rng(9)
    v = random_unit(2, rng)
    assert dq.wick_antiwick_identity_error(2, 3, 2, v) <= 1e-10


def test_antiwick_element_basics():
    rng = np.random.default_rng(10)
    op = sf.random_density(2, 3, rng)
    assert abs(dq.antiwick_reduced_element(op, random_unit(2, rng), 0) - 1.0) <= 1e-12
    for d in (2, 3):
        N = 4
        e1 = np.zeros(d)
        e1[0] = 1.0
        pure = sf.pure_state_operator(sf.product_state(e1, N), d, N)
        got = dq.antiwick_reduced_element(pure, e1, 1)
        assert abs(got - (N + 1) / (N + d)) <= 1e-12
    with pytest.raises(ValueError):
        dq.antiwick_reduced_element(op, np.array([1.0, 0.0]), 5)


def test_definetti_bound_values_and_pass():
    rng = np.random.default_rng(11)
    rep = dq.verify_definetti_bound(sf.random_density(2, 20, rng), 2)
    assert abs(rep.bound - 1.2) <= 1e-15
    assert rep.passes
    D = sf.sym_dimension(2, 8)
    mixed = sf.SectorOperator(2, 8, np.eye(D) / D)
    assert dq.verify_definetti_bound(mixed, 2).passes


def test_definetti_product_state_rate():
    # distance ~ C/N for product states: log-log slope near -1
    rng = np.random.default_rng(12)
    u = random_unit(2, rng)
    Ns = [10, 20, 40, 80]
    dist = []
    for N in Ns:
        op = sf.pure_state_operator(sf.product_state(u, N), 2, N)
        dist.append(dq.verify_definetti_bound(op, 2).distance)
    slope = np.polyfit(np.log(Ns), np.log(dist), 1)[0]
    assert 0.8 <= -slope <= 1.2
