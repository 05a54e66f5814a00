"""Fock-space localization of N-body states by orthogonal projectors.

Localizing a state with a projector P produces a block-diagonal state on the
truncated Fock space, one positive block G_k per particle number k, with
total trace one.  Sector blocks are kept over the full one-body space (their
support automatically lies inside range(P)^{(x)k}).  The computation rotates
the one-body basis so that range(P) is spanned by leading modes, where the
splitting of occupations into inside/outside parts is exact combinatorics;
this avoids ever forming the d^N tensor power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .symfock import (
    TOL_CHAIN,
    TOL_EXACT,
    SectorOperator,
    _partial_trace_raw,
    basis_index,
    enumerate_basis,
    multinomial,
    sector_power,
    sym_dimension,
)


@dataclass
class DiagonalFockState:
    """Block-diagonal state G_0 (+) ... (+) G_N on the truncated Fock space."""

    d: int
    N: int
    sectors: list = field(repr=False)  # sectors[k] is a D_k x D_k ndarray

    def __post_init__(self):
        if len(self.sectors) != self.N + 1:
            raise ValueError(f"need {self.N + 1} sector blocks, got {len(self.sectors)}")
        total = 0.0
        for k, G in enumerate(self.sectors):
            G = np.asarray(G, dtype=complex)
            D = sym_dimension(self.d, k)
            if G.shape != (D, D):
                raise ValueError(f"sector {k} block must be {D}x{D}, got {G.shape}")
            self.sectors[k] = G
            total += float(np.trace(G).real)
        if abs(total - 1.0) > TOL_CHAIN:
            raise ValueError(f"sector traces must sum to 1, got {total!r}")

    def sector_traces(self) -> np.ndarray:
        return np.array([float(np.trace(G).real) for G in self.sectors])

    def total_trace(self) -> float:
        return float(self.sector_traces().sum())


def _projector_frame(P: np.ndarray) -> tuple[np.ndarray, int]:
    """Unitary U with U P U^+ = diag(1_r, 0); returns (U, rank)."""
    P = np.asarray(P, dtype=complex)
    d = P.shape[0]
    if P.shape != (d, d):
        raise ValueError("projector must be square")
    if np.abs(P - P.conj().T).max() > TOL_EXACT:
        raise ValueError("localization operator must be self-adjoint")
    if np.abs(P @ P - P).max() > TOL_EXACT:
        raise ValueError(
            "localization requires an orthogonal projector (P^2 = P); "
            "general 0 <= A <= 1 is not supported"
        )
    w, V = np.linalg.eigh(P)
    order = np.argsort(-w)  # range vectors first
    w, V = w[order], V[:, order]
    r = int(np.sum(w > 0.5))
    return V.conj().T, r


def localize(gamma_N: SectorOperator, P: np.ndarray) -> DiagonalFockState:
    """Sector decomposition G_k = C(N,k) tr_{k+1..N}[Pi_k Gamma Pi_k] where
    Pi_k = P^{(x)k} (x) P_perp^{(x)(N-k)}.

    Each G_k is positive and the traces sum to one; tr G_k is the probability
    of finding exactly k particles inside range(P).
    """
    gamma_N.check_density()
    d, N = gamma_N.d, gamma_N.N
    U, r = _projector_frame(P)
    if np.abs(U.conj().T @ U - np.eye(d)).max() > 1e-12:
        raise RuntimeError("projector eigenbasis is not unitary")
    R = sector_power(U, N)
    rotated = R @ gamma_N.matrix @ R.conj().T
    index_N = basis_index(d, N)
    blocks = []
    for k in range(N + 1):
        Dk = sym_dimension(d, k)
        G = np.zeros((Dk, Dk), dtype=complex)
        inside = enumerate_basis(r, k) if r > 0 else ((),) if k == 0 else ()
        outside = (
            enumerate_basis(d - r, N - k) if d - r > 0 else ((),) if k == N else ()
        )
        if len(inside) and len(outside):
            index_k = basis_index(d, k)
            ins_full = [p + (0,) * (d - r) for p in inside]
            ins_idx = [index_k[p] for p in ins_full]
            ins_mult = [multinomial(k, p) for p in inside]
            out_full = [(0,) * r + m for m in outside]
            out_mult = [multinomial(N - k, m) for m in outside]
            for mi, m in enumerate(out_full):
                rows = np.array(
                    [index_N[tuple(p[i] + m[i] for i in range(d))] for p in ins_full]
                )
                tot_mult = np.array(
                    [
                        multinomial(N, tuple(p[i] + m[i] for i in range(d)))
                        for p in ins_full
                    ],
                    dtype=float,
                )
                c = np.sqrt(np.array(ins_mult, dtype=float) * out_mult[mi] / tot_mult)
                sub = rotated[np.ix_(rows, rows)]
                G[np.ix_(ins_idx, ins_idx)] += np.outer(c, c) * sub
            G *= math.comb(N, k)
        back = sector_power(U.conj().T, k)
        G = back @ G @ back.conj().T
        blocks.append((G + G.conj().T) / 2)
    return DiagonalFockState(d, N, blocks)


def fock_reduced_matrix(state: DiagonalFockState, n: int) -> SectorOperator:
    """n-th reduced matrix C(N,n)^{-1} sum_{k>=n} C(k,n) tr_{n+1..k} G_k.

    Normalized so a pure N-particle input reduces to the ordinary trace-one
    reduced matrix; general diagonal states give trace <= 1.
    """
    if not 0 <= n <= state.N:
        raise ValueError(f"need 0 <= n <= N, got n={n}")
    d = state.d
    Dn = sym_dimension(d, n)
    out = np.zeros((Dn, Dn), dtype=complex)
    for k in range(n, state.N + 1):
        out += math.comb(k, n) * _partial_trace_raw(state.sectors[k], d, k, n)
    return SectorOperator(d, n, out / math.comb(state.N, n))


def duality_gap(gamma_N: SectorOperator, P: np.ndarray) -> float:
    """max_k |tr G_k^P - tr G_{N-k}^{P_perp}|."""
    d = gamma_N.d
    tr_P = localize(gamma_N, P).sector_traces()
    tr_Q = localize(gamma_N, np.eye(d) - np.asarray(P)).sector_traces()
    return float(np.abs(tr_P - tr_Q[::-1]).max())


def verify_duality(gamma_N: SectorOperator, P: np.ndarray) -> bool:
    """Whether the probability of k inside particles equals that of N-k outside."""
    return duality_gap(gamma_N, P) <= TOL_CHAIN


def mass_distribution(state: DiagonalFockState, f) -> float:
    """sum_k f(k/N) tr G_k for a function f on [0, 1]."""
    traces = state.sector_traces()
    ks = np.arange(state.N + 1) / state.N
    return float(sum(f(lam) * tr for lam, tr in zip(ks, traces)))
