"""Hartree energy on the unit sphere of C^d and its minimization.

E_H[u] = <u, h u> + (1/2) <u (x) u, w u (x) u> is the N -> infinity limit
of the ground energy per particle.  Minimization is projected gradient
descent with backtracking from several random sphere starts; the global
phase of the reported minimizer is fixed by making its largest-magnitude
component real positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .definetti_q import SphereSampler
from .manybody import ModelSpec, assemble_hamiltonian, ground_state
from .symfock import SectorOperator, partial_trace, pure_state_operator, trace_norm_distance

HARTREE_STREAM = 101  # fixed substream id for restart seeds


def hartree_energy(u: np.ndarray, model: ModelSpec) -> float:
    u = np.asarray(u, dtype=complex)
    norm = np.linalg.norm(u)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"hartree_energy requires a unit vector, got ||u|| = {norm!r}")
    uu = np.kron(u, u)
    val = np.vdot(u, model.h @ u) + 0.5 * np.vdot(uu, model.w @ uu)
    return float(val.real)


def hartree_energy_batch(U: np.ndarray, model: ModelSpec) -> np.ndarray:
    """Vectorized Hartree energy over rows of U (assumed unit vectors)."""
    U = np.asarray(U, dtype=complex)
    one = np.einsum("bi,ij,bj->b", U.conj(), model.h, U).real
    UU = np.einsum("bi,bj->bij", U, U).reshape(U.shape[0], -1)
    two = np.einsum("bi,ij,bj->b", UU.conj(), model.w, UU).real
    return one + 0.5 * two


def mean_field_matrix(u: np.ndarray, model: ModelSpec) -> np.ndarray:
    """K[u]_{ac} = sum_{bd} w_{ab,cd} conj(u_b) u_d."""
    d = model.d
    w4 = model.w.reshape(d, d, d, d)
    return np.einsum("abce,b,e->ac", w4, np.conj(u), u)


def hartree_gradient(u: np.ndarray, model: ModelSpec) -> np.ndarray:
    """Riemannian gradient 2 (Id - |u><u|) (h u + K[u] u) on the sphere."""
    u = np.asarray(u, dtype=complex)
    force = model.h @ u + mean_field_matrix(u, model) @ u
    return 2.0 * (force - u * np.vdot(u, force))


@dataclass
class HartreeResult:
    e_H: float
    u_H: np.ndarray
    grad_norm: float
    restarts_agree: bool
    restart_energies: list[float]


def _descend(u0, model, grad_tol, max_iter):
    """Projected gradient descent with Armijo backtracking, then a fixed-step
    polishing phase once energy differences fall below float resolution."""
    u = u0 / np.linalg.norm(u0)
    E = hartree_energy(u, model)
    step = 1.0
    for _ in range(max_iter):
        g = hartree_gradient(u, model)
        gn = np.linalg.norm(g)
        if gn <= grad_tol:
            return u, E, gn
        accepted = False
        while step >= 1e-18:
            cand = u - step * g
            cand /= np.linalg.norm(cand)
            E_cand = hartree_energy(cand, model)
            if E_cand <= E - 1e-4 * step * gn * gn:
                u, E = cand, E_cand
                step = min(step * 1.5, 1.0)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    # polishing: adaptive gradient steps keep shrinking the gradient even when
    # the energy decrease is below machine epsilon (Armijo can no longer see it)
    g = hartree_gradient(u, model)
    gn = np.linalg.norm(g)
    step = min(max(step, 1e-6), 1.0)
    for _ in range(20000):
        if gn <= grad_tol:
            break
        cand = u - step * g
        cand /= np.linalg.norm(cand)
        g_cand = hartree_gradient(cand, model)
        gn_cand = np.linalg.norm(g_cand)
        if gn_cand < gn:
            u, g, gn = cand, g_cand, gn_cand
            step = min(step * 1.5, 1.0)
        else:
            step *= 0.5
            if step < 1e-16:
                break
    E = hartree_energy(u, model)
    if gn > 1e-10:
        raise RuntimeError(
            f"hartree line search stalled at gradient norm {gn:.3e} (energy {E!r})"
        )
    return u, E, gn


def minimize_hartree(
    model: ModelSpec,
    restarts: int = 8,
    tol: float = 1e-12,
    seed: int = 42,
    max_iter: int = 20000,
) -> HartreeResult:
    sampler = SphereSampler(model.d, seed, stream=HARTREE_STREAM)
    starts = sampler.sample(restarts)
    results = []
    for r in range(restarts):
        results.append(_descend(starts[r], model, tol, max_iter))
    energies = [E for _, E, _ in results]
    best = int(np.argmin(energies))
    u, E, gn = results[best]
    k = int(np.argmax(np.abs(u)))
    u = u * (u[k].conjugate() / abs(u[k]))
    agree = all(abs(e - E) <= 1e-8 for e in energies)
    return HartreeResult(
        e_H=float(E),
        u_H=u,
        grad_norm=float(gn),
        restarts_agree=agree,
        restart_energies=[float(e) for e in energies],
    )


def two_body_sector_norm(model: ModelSpec) -> float:
    """Operator norm of the two-particle Hamiltonian h_1 + h_2 + w on sector 2."""
    H2 = assemble_hamiltonian(model, 2)
    return float(np.abs(np.linalg.eigvalsh(H2.matrix)).max())


def convergence_report(
    model: ModelSpec,
    N_list,
    restarts: int = 8,
    seed: int = 42,
    hartree: HartreeResult | None = None,
) -> list[dict]:
    """Per-N table: E(N)/N, its gap to e_H, and a certified lower bound.

    The lower bound combines the two-body rewriting of the energy with the
    de Finetti trace-norm estimate at n=2:
        E(N)/N >= e_H - (1/2) ||H_2||_op * 4 (d+4) / N.
    """
    if list(N_list) != sorted(N_list) or any(N < 2 for N in N_list):
        raise ValueError("N_list must be ascending with N >= 2")
    res = hartree if hartree is not None else minimize_hartree(model, restarts, seed=seed)
    h2norm = two_body_sector_norm(model)
    rows = []
    for N in N_list:
        H = assemble_hamiltonian(model, N)
        gs = ground_state(H)
        eper = gs.energy / N
        rows.append(
            {
                "N": N,
                "energy_per_particle": eper,
                "e_H": res.e_H,
                "gap": res.e_H - eper,
                "lower_bound": res.e_H - 0.5 * h2norm * 2.0 * 2.0 * (model.d + 4.0) / N,
            }
        )
    return rows


def ground_state_one_body_distance(model: ModelSpec, N: int, u_H: np.ndarray) -> float:
    """Trace distance between the N-body ground state's one-body matrix and |u_H><u_H|."""
    H = assemble_hamiltonian(model, N)
    gs = ground_state(H)
    gamma1 = partial_trace(pure_state_operator(gs.vector, model.d, N), 1)
    target_vec = np.asarray(u_H, dtype=complex)
    target = pure_state_operator(
        _one_body_in_sector_basis(target_vec), model.d, 1
    )
    return trace_norm_distance(gamma1, target)


def _one_body_in_sector_basis(u: np.ndarray) -> np.ndarray:
    """Coefficients of a one-body vector in the sector-1 occupation basis."""
    from .symfock import product_state

    return product_state(u / np.linalg.norm(u), 1)
