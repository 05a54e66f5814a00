"""Mean-field / large-temperature limit in finite dimension.

At T = tN the N-body free energy splits as
    F_N = -T log dim(H_s^N) + N F_cl + O(d),
with F_cl = -t log int exp(-E_H[u]/t) du over the normalized uniform sphere
measure, and the Gibbs reduced matrices converge to coherent mixtures over
the classical Gibbs density.  Both convexity inequalities that drive the
proof (lower-symbol and positive-upper-symbol directions) are checkable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .definetti_q import SphereSampler, lower_symbol_batch
from .hartree import hartree_energy_batch
from .manybody import ModelSpec, assemble_hamiltonian, gibbs_state
from .symfock import (
    SectorOperator,
    partial_trace,
    product_state,
    product_state_batch,
    sym_dimension,
    trace_norm_distance,
)

QUAD_STABILITY_REL = 1e-8
MC_BATCH = 1 << 16


@dataclass
class ClassicalFreeEnergy:
    t: float
    value: float
    method: str
    stderr: float | None = None
    gridsize: int | None = None
    samples: int | None = None


def _sphere_grid_d2(n_p: int, n_phi: int):
    """Uniform pushforward coordinates for the d=2 sphere: |u_1|^2 is uniform
    on [0,1] and the relative phase uniform on [0, 2pi); trapezoid in p,
    periodic uniform grid in phi, weights normalized to mean."""
    ps = np.linspace(0.0, 1.0, n_p)
    wp = np.full(n_p, 1.0 / (n_p - 1))
    wp[0] *= 0.5
    wp[-1] *= 0.5
    phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 1.0 / n_phi)
    P, PHI = np.meshgrid(ps, phis, indexing="ij")
    W = np.outer(wp, wphi)
    U = np.stack(
        [np.sqrt(P), np.sqrt(1.0 - P) * np.exp(1j * PHI)], axis=-1
    ).reshape(-1, 2)
    return U, W.reshape(-1)


def classical_free_energy(
    model: ModelSpec,
    t: float,
    method: str = "quadrature2d",
    samples: int = 10 ** 5,
    gridsize: int = 65,
    sampler: SphereSampler | None = None,
    max_doublings: int = 12,
) -> ClassicalFreeEnergy:
    """F_cl = -t log E_u[exp(-E_H[u]/t)] over the uniform sphere.

    method "mc": plain Monte-Carlo with a delta-method standard error.
    method "quadrature2d" (d=2 only): tensor trapezoid grid on the uniform
    (p, phi) pushforward, doubled until the value is stable to 1e-8 relative.
    """
    if t <= 0:
        raise ValueError("need t > 0")
    if method == "mc":
        if sampler is None:
            raise ValueError("mc method needs a SphereSampler")
        if sampler.d != model.d:
            raise ValueError("sampler dimension does not match the model")
        chunks = []
        done = 0
        while done < samples:
            B = min(MC_BATCH, samples - done)
            chunks.append(hartree_energy_batch(sampler.sample(B), model))
            done += B
        E = np.concatenate(chunks)
        shift = float(E.min())
        x = np.exp(-(E - shift) / t)
        mean = float(x.mean())
        se_mean = float(x.std() / math.sqrt(samples))
        value = shift - t * math.log(mean)
        return ClassicalFreeEnergy(
            t=t, value=float(value), method="mc", stderr=t * se_mean / mean, samples=samples
        )
    if method == "quadrature2d":
        if model.d != 2:
            raise ValueError("quadrature2d is only available for d = 2")
        n_p = max(gridsize, 5)
        n_phi = 16
        prev = None
        for _ in range(max_doublings + 1):
            U, W = _sphere_grid_d2(n_p, n_phi)
            E = hartree_energy_batch(U, model)
            shift = float(E.min())
            mean = float(np.sum(W * np.exp(-(E - shift) / t)))
            value = shift - t * math.log(mean)
            if prev is not None and abs(value - prev) <= QUAD_STABILITY_REL * max(1.0, abs(value)):
                return ClassicalFreeEnergy(
                    t=t, value=value, method="quadrature2d", gridsize=n_p
                )
            prev = value
            n_p = 2 * (n_p - 1) + 1
            n_phi = min(2 * n_phi, 256)
        raise RuntimeError("quadrature2d did not stabilize to 1e-8 relative")
    raise ValueError(f"unknown method {method!r}")


def classical_gibbs_density(model: ModelSpec, t: float):
    """Unnormalized classical Gibbs weight u -> exp(-E_H[u]/t) (batched)."""

    def weight(U):
        E = hartree_energy_batch(np.atleast_2d(U), model)
        return np.exp(-E / t)

    return weight


@dataclass
class BerezinLiebReport:
    entropy_exact: float
    symbol_lower_bound: float
    stderr: float
    first_ok: bool
    second_bound: float | None = None
    second_stderr: float | None = None
    second_ok: bool | None = None


def _xlogx(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    mask = x > 0
    out[mask] = x[mask] * np.log(x[mask])
    return out


def berezin_lieb_check(
    gamma_N: SectorOperator,
    sampler: SphereSampler,
    samples: int,
    upper_symbol=None,
) -> BerezinLiebReport:
    """Convexity inequalities between tr[G log G] and its sphere symbols.

    Lower-symbol direction (any state):
        tr[G log G] >= E_u[mu log mu] - log dim,   mu = lower symbol.
    Upper-symbol direction (states given as coherent mixtures of a known
    positive density nu):
        tr[G log G] <= E_u[nu log nu] - log dim.
    Symbol sides are Monte-Carlo estimates; the verdicts use 3 standard errors.
    Tiny negative symbol values are clamped to zero before x log x.
    """
    lam = np.linalg.eigvalsh((gamma_N.matrix + gamma_N.matrix.conj().T) / 2)
    lam = np.clip(lam, 0.0, None)
    s_exact = float(np.sum(_xlogx(lam)))
    logdim = math.log(sym_dimension(gamma_N.d, gamma_N.N))

    def mc_symbol_entropy(fn):
        total, total_sq, done = 0.0, 0.0, 0
        while done < samples:
            B = min(MC_BATCH, samples - done)
            vals = _xlogx(np.clip(fn(sampler.sample(B)), 0.0, None))
            total += vals.sum()
            total_sq += (vals * vals).sum()
            done += B
        mean = total / samples
        var = max(total_sq / samples - mean * mean, 0.0)
        return mean, math.sqrt(var / samples)

    mean_low, se_low = mc_symbol_entropy(lambda U: lower_symbol_batch(gamma_N, U))
    bound = mean_low - logdim
    # 1e-12 absolute slack keeps exact-equality cases (constant symbols) green
    report = BerezinLiebReport(
        entropy_exact=s_exact,
        symbol_lower_bound=float(bound),
        stderr=float(se_low),
        first_ok=bool(s_exact >= bound - 3.0 * se_low - 1e-12),
    )
    if upper_symbol is not None:
        mean_up, se_up = mc_symbol_entropy(lambda U: np.asarray(upper_symbol(U), dtype=float))
        report.second_bound = float(mean_up - logdim)
        report.second_stderr = float(se_up)
        report.second_ok = bool(s_exact <= report.second_bound + 3.0 * se_up + 1e-12)
    return report


def coherent_mixture_state(
    density, N: int, n_p: int = 257, n_phi: int = 64
) -> SectorOperator:
    """State int |u^{(x)N}><u^{(x)N}| nu(u) du for an explicit density nu, d=2.

    `density` maps a batch of sphere points (B, 2) to nonnegative values with
    E_u[nu] = 1; the integral is evaluated on the uniform (p, phi) pushforward
    grid and renormalized to unit trace, so the output is an exact positive
    coherent mixture.
    """
    U, W = _sphere_grid_d2(n_p, n_phi)
    nu = np.asarray(density(U), dtype=float)
    if nu.min() < -1e-12:
        raise ValueError("upper symbol must be nonnegative")
    weights = W * np.clip(nu, 0.0, None)
    mass = weights.sum()
    if not mass > 0:
        raise ValueError("upper symbol has zero mass on the grid")
    V = product_state_batch(U, N)
    mat = np.einsum("b,bp,bq->pq", weights / mass, V, V.conj())
    op = SectorOperator(2, N, (mat + mat.conj().T) / 2)
    op.check_density(1e-8)
    return op


def appendixB_experiment(
    model: ModelSpec,
    t: float,
    N_list,
    fcl: ClassicalFreeEnergy | None = None,
    sampler: SphereSampler | None = None,
) -> list[dict]:
    """Free-energy expansion sweep at T = tN.

    Emits Delta_N = F_N + T log dim(H_s^N) - N F_cl and Delta_N / N; the
    expansion constant is bounded, so Delta_N/N must shrink along the sweep.
    """
    if fcl is None:
        if model.d == 2:
            fcl = classical_free_energy(model, t, method="quadrature2d")
        else:
            if sampler is None:
                raise ValueError("need a sampler for the Monte-Carlo route at d > 2")
            fcl = classical_free_energy(model, t, method="mc", samples=10 ** 6, sampler=sampler)
    rows = []
    for N in N_list:
        T = t * N
        H = assemble_hamiltonian(model, N)
        _, F_N = gibbs_state(H, T)
        logdim = math.log(sym_dimension(model.d, N))
        delta = F_N + T * logdim - N * fcl.value
        rows.append(
            {
                "N": N,
                "T": T,
                "F_N": F_N,
                "log_dim": logdim,
                "F_cl": fcl.value,
                "delta": delta,
                "delta_over_N": delta / N,
            }
        )
    return rows


def classical_limit_marginal(
    model: ModelSpec, t: float, n: int, samples: int, sampler: SphereSampler
) -> tuple[SectorOperator, np.ndarray]:
    """Self-normalized importance estimate of int |u^{(x)n}><u^{(x)n}| mu_cl du.

    Uniform sphere samples are weighted by exp(-(E_H - min E_H)/t); the shift
    keeps the weights in range at small t.
    """
    d = model.d
    Dn = sym_dimension(d, n)
    U_all = []
    E_all = []
    done = 0
    while done < samples:
        B = min(MC_BATCH, samples - done)
        U = sampler.sample(B)
        U_all.append(U)
        E_all.append(hartree_energy_batch(U, model))
        done += B
    E = np.concatenate(E_all)
    shift = float(E.min())
    w = np.exp(-(E - shift) / t)
    wsum = w.sum()
    acc = np.zeros((Dn, Dn), dtype=complex)
    acc_sq = np.zeros((Dn, Dn), dtype=float)
    offset = 0
    for U in U_all:
        B = U.shape[0]
        V = product_state_batch(U, n)
        wb = w[offset : offset + B]
        acc += np.einsum("b,bp,bq->pq", wb, V, V.conj())
        acc_sq += np.einsum("b,bp,bq->pq", wb * wb, np.abs(V) ** 2, np.abs(V) ** 2)
        offset += B
    mean = acc / wsum
    mean = (mean + mean.conj().T) / 2
    # standard error of the self-normalized estimator, entrywise
    wbar = wsum / samples
    second = acc_sq / samples
    var = np.clip(second / wbar ** 2 - np.abs(mean) ** 2, 0.0, None)
    stderr = np.sqrt(var / samples)
    return SectorOperator(d, n, mean), stderr


def gibbs_marginal_convergence(
    model: ModelSpec,
    t: float,
    N_list,
    n: int,
    samples: int,
    sampler: SphereSampler,
) -> list[dict]:
    """Trace-norm distance of Gibbs reduced matrices to the classical mixture."""
    if n not in (1, 2):
        raise ValueError("only n in {1, 2}")
    limit, stderr = classical_limit_marginal(model, t, n, samples, sampler)
    se_bound = float(
        3.0 * math.sqrt(limit.dim) * np.linalg.norm(stderr)
    )  # conservative 3 sigma slack on the trace norm
    rows = []
    for N in N_list:
        H = assemble_hamiltonian(model, N)
        rho, _ = gibbs_state(H, t * N)
        gam = partial_trace(rho, n)
        rows.append(
            {
                "N": N,
                "distance": trace_norm_distance(gam, limit),
                "mc_3sigma": se_bound,
            }
        )
    return rows
