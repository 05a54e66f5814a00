"""Exchangeable measures on finite state spaces: the empirical-mixture
construction, its exact low-order marginals, the total-variation bound
2n(n-1)/N, and the mean-field limit of finite-state Gibbs measures.

A symmetric probability on {1..m}^N is stored occupation-compressed: one
weight per occupation orbit, equal to the total probability of all
configurations in the permutation orbit.  Total variation follows the
unhalved convention (total mass of the absolute difference), which is the
convention the stated bounds are calibrated to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .symfock import enumerate_basis, multinomial, sym_dimension

DF_ENUMERATION_CAP = 10 ** 6
FINITE_STATE_C = 2.0


@dataclass
class SymmetricClassicalState:
    """Occupation-compressed exchangeable probability on {1..m}^N."""

    m: int
    N: int
    weights: dict = field(repr=False)

    def __post_init__(self):
        total = 0.0
        for occ, w in self.weights.items():
            if len(occ) != self.m or sum(occ) != self.N:
                raise ValueError(f"occupation {occ} does not match (m={self.m}, N={self.N})")
            if w < -1e-15:
                raise ValueError(f"negative orbit weight {w!r} at {occ}")
            total += w
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"orbit weights must sum to 1, got {total!r}")

    def weight_array(self) -> tuple[np.ndarray, np.ndarray]:
        """(counts matrix K x m, weights K) over the full orbit enumeration."""
        basis = enumerate_basis(self.m, self.N)
        counts = np.array(basis, dtype=np.int64)
        w = np.array([self.weights.get(occ, 0.0) for occ in basis])
        return counts, w

    def configuration_probability(self, config) -> float:
        """Probability of one configuration (tuple of states in 0..m-1)."""
        occ = [0] * self.m
        for x in config:
            occ[x] += 1
        w = self.weights.get(tuple(occ), 0.0)
        return w / multinomial(self.N, occ)


def product_classical_state(rho: np.ndarray, N: int) -> SymmetricClassicalState:
    """rho^{(x)N} in occupation compression."""
    rho = np.asarray(rho, dtype=float)
    if rho.min() < 0 or abs(rho.sum() - 1.0) > 1e-12:
        raise ValueError("rho must be a probability vector")
    m = rho.shape[0]
    weights = {}
    for occ in enumerate_basis(m, N):
        p = float(multinomial(N, occ)) * float(np.prod(rho ** np.array(occ)))
        weights[occ] = p
    total = sum(weights.values())
    return SymmetricClassicalState(m, N, {k: v / total for k, v in weights.items()})


def random_symmetric_state(m: int, N: int, rng: np.random.Generator) -> SymmetricClassicalState:
    basis = enumerate_basis(m, N)
    w = rng.dirichlet(np.ones(len(basis)))
    return SymmetricClassicalState(m, N, dict(zip(basis, w.tolist())))


def marginal(state: SymmetricClassicalState, n: int) -> np.ndarray:
    """n-th marginal (n in {1, 2}) from occupation expectations."""
    counts, w = state.weight_array()
    N = state.N
    if n == 1:
        return (w @ counts) / N
    if n == 2:
        if N < 2:
            raise ValueError("two-point marginal needs N >= 2")
        cross = np.einsum("k,ka,kb->ab", w, counts, counts)
        diag = np.diag(w @ (counts * (counts - 1)))
        off = cross - np.diag(np.einsum("k,ka->a", w, counts ** 2))
        return (off + diag) / (N * (N - 1))
    raise ValueError("only n in {1, 2} is supported")


def df_state(mu_N: SymmetricClassicalState) -> SymmetricClassicalState:
    """Empirical-measure mixture: integrate (n/N)^{(x)N} over the orbit law.

    Exact, but requires enumerating sym_dimension(m, N) orbits; above 10^6
    use the closed-form marginals (df_marginals) instead.
    """
    m, N = mu_N.m, mu_N.N
    if sym_dimension(m, N) > DF_ENUMERATION_CAP:
        raise ValueError(
            "orbit enumeration too large for df_state; use df_marginals, "
            "which needs no enumeration"
        )
    counts, w = mu_N.weight_array()
    logmult = np.array(
        [math.lgamma(N + 1) - sum(math.lgamma(c + 1) for c in occ) for occ in counts]
    )
    freqs = counts / N                                  # (K, m) empirical frequencies
    # out[j] = sum_k w[k] * mult[j] * prod_a freqs[k,a]^counts[j,a]
    out = np.zeros(len(counts))
    for k in range(len(counts)):
        if w[k] == 0.0:
            continue
        probs = np.exp(logmult) * np.prod(freqs[k][None, :] ** counts, axis=1)
        out += w[k] * probs
    out = np.clip(out, 0.0, None)
    out /= out.sum()
    basis = enumerate_basis(m, N)
    return SymmetricClassicalState(m, N, dict(zip(basis, out.tolist())))


def df_marginals(mu_N: SymmetricClassicalState, n: int) -> np.ndarray:
    """Closed-form marginals of the empirical-measure mixture.

    First marginal is unchanged; the second is
    (N-1)/N mu^{(2)} + (1/N) diag(mu^{(1)}).
    """
    if n == 1:
        return marginal(mu_N, 1)
    if n == 2:
        N = mu_N.N
        return (N - 1) / N * marginal(mu_N, 2) + np.diag(marginal(mu_N, 1)) / N
    raise ValueError("only n in {1, 2} is supported")


@dataclass
class DFBoundReport:
    N: int
    n: int
    tv: float
    bound_general: float
    bound_finite: float
    passes: bool
    empirical_ratio: float


def verify_df_bound(mu_N: SymmetricClassicalState, n: int) -> DFBoundReport:
    """Total-variation gap between mu^{(n)} and the mixture marginal.

    Asserts only the general bound 2n(n-1)/N; the finite-state bound
    C/N min(mn, n^2) has an unknown constant (reported with C=2) and the
    empirical ratio tv*N/min(mn, n^2) is logged, never asserted.
    """
    tv = float(np.abs(marginal(mu_N, n) - df_marginals(mu_N, n)).sum())
    bound_general = 2.0 * n * (n - 1) / mu_N.N
    scale = min(mu_N.m * n, n * n)
    bound_finite = FINITE_STATE_C * scale / mu_N.N
    return DFBoundReport(
        N=mu_N.N,
        n=n,
        tv=tv,
        bound_general=bound_general,
        bound_finite=bound_finite,
        passes=tv <= bound_general + 1e-12,
        empirical_ratio=tv * mu_N.N / scale,
    )


def interaction_energies(V: np.ndarray, w: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """(counts, H) over occupation orbits for the mean-field Hamiltonian
    H(n) = sum_a n_a V_a + (N-1)^{-1} (sum_{a<b} n_a n_b w_ab + sum_a C(n_a,2) w_aa).
    """
    V = np.asarray(V, dtype=float)
    w = np.asarray(w, dtype=float)
    m = V.shape[0]
    if w.shape != (m, m) or np.abs(w - w.T).max() > 1e-12:
        raise ValueError("w must be a symmetric m x m matrix")
    counts = np.array(enumerate_basis(m, N), dtype=np.int64)
    quad = np.einsum("ka,ab,kb->k", counts, w, counts)
    lin = counts @ np.diag(w)
    H = counts @ V + (quad - lin) / (2.0 * (N - 1))
    return counts, H


def classical_gibbs(
    V: np.ndarray, w: np.ndarray, N: int, T: float
) -> tuple[SymmetricClassicalState, float]:
    """Exact finite-state Gibbs measure in occupation compression.

    Orbit weight is proportional to multinomial(N; n) exp(-H(n)/T); the free
    energy -T log Z is evaluated with a log-sum-exp shift.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    if N < 2:
        raise ValueError("need N >= 2")
    counts, H = interaction_energies(V, w, N)
    logmult = np.array(
        [math.lgamma(N + 1) - sum(math.lgamma(c + 1) for c in occ) for occ in counts]
    )
    logw = logmult - H / T
    shift = logw.max()
    z = np.exp(logw - shift)
    Z = z.sum()
    F = -T * (shift + math.log(Z))
    basis = enumerate_basis(len(V), N)
    weights = dict(zip(basis, (z / Z).tolist()))
    return SymmetricClassicalState(len(V), N, weights), float(F)


def mf_functional(rho: np.ndarray, V: np.ndarray, w: np.ndarray, T: float) -> float:
    """F[rho] = sum V rho + (1/2) rho.w.rho + T sum rho log rho (0 log 0 = 0)."""
    rho = np.asarray(rho, dtype=float)
    ent = float(np.sum(rho[rho > 0] * np.log(rho[rho > 0])))
    return float(V @ rho + 0.5 * rho @ w @ rho + T * ent)


def mf_free_energy(
    V: np.ndarray,
    w: np.ndarray,
    T: float,
    starts: int = 5,
    seed: int = 0,
    tol: float = 1e-12,
    max_iter: int = 10 ** 5,
) -> tuple[float, np.ndarray]:
    """Minimize the mean-field free energy over the probability simplex.

    Damped fixed-point iteration rho <- softmax(-(V + w rho)/T), averaged
    with weight 1/2, from the uniform start plus random Dirichlet starts;
    the best converged point over all starts is returned.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    V = np.asarray(V, dtype=float)
    w = np.asarray(w, dtype=float)
    m = V.shape[0]
    best = None
    for s in range(starts):
        if s == 0:
            rho = np.ones(m) / m
        else:
            rho = np.random.default_rng(seed * 1000 + s).dirichlet(np.ones(m))
        converged = False
        for _ in range(max_iter):
            z = -(V + w @ rho) / T
            z -= z.max()
            target = np.exp(z)
            target /= target.sum()
            new = 0.5 * rho + 0.5 * target
            if np.abs(new - rho).sum() <= tol:
                rho = new
                converged = True
                break
            rho = new
        if not converged:
            raise RuntimeError(
                f"mean-field fixed point did not converge within {max_iter} iterations"
            )
        F = mf_functional(rho, V, w, T)
        if best is None or F < best[0]:
            best = (F, rho)
    return float(best[0]), best[1]
