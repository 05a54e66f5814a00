"""Mean-field Hamiltonians on bosonic sectors: ground states and Gibbs states.

The N-body Hamiltonian is H_N = sum_j h_j + (N-1)^{-1} sum_{i<j} w_ij,
assembled in second-quantized form on the occupation basis:

    H_N = sum_{ab} h_ab a_a^+ a_b
        + (2(N-1))^{-1} sum_{abcd} w_{ab,cd} a_a^+ a_b^+ a_d a_c

with w indexed row-major by (a*d+b, c*d+d').  For N=1 the interaction
coefficient is undefined and H_1 is the one-body operator alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigsh

from .symfock import (
    TOL_CHAIN,
    TOL_EXACT,
    SectorOperator,
    mode_creation,
    sym_dimension,
)

DENSE_EIG_CAP = 2000


def swap_matrix(d: int) -> np.ndarray:
    """Two-particle swap on C^d (x) C^d."""
    S = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            S[a * d + b, b * d + a] = 1.0
    return S


@dataclass
class ModelSpec:
    """One-body operator h (d x d) and swap-symmetric two-body operator w (d^2 x d^2)."""

    d: int
    h: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        self.w = np.asarray(self.w, dtype=complex)
        d = self.d
        if self.h.shape != (d, d):
            raise ValueError(f"h must be {d}x{d}, got {self.h.shape}")
        if self.w.shape != (d * d, d * d):
            raise ValueError(f"w must be {d * d}x{d * d}, got {self.w.shape}")
        if np.abs(self.h - self.h.conj().T).max() > TOL_EXACT:
            raise ValueError("h is not Hermitian")
        if np.abs(self.w - self.w.conj().T).max() > TOL_EXACT:
            raise ValueError("w is not Hermitian")
        S = swap_matrix(d)
        if np.abs(S @ self.w @ S - self.w).max() > TOL_EXACT:
            raise ValueError("w does not commute with the two-particle swap")

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "h": {"re": self.h.real.tolist(), "im": self.h.imag.tolist()},
                "w": {"re": self.w.real.tolist(), "im": self.w.imag.tolist()},
            }
        )

    @staticmethod
    def from_json(text: str) -> "ModelSpec":
        obj = json.loads(text)
        if not isinstance(obj, dict) or "d" not in obj:
            raise ValueError("model JSON must be an object with a 'd' field")
        d = int(obj["d"])
        h = _matrix_from_json(obj.get("h"), (d, d), "h")
        wspec = obj.get("w")
        if isinstance(wspec, dict) and "preset" in wspec:
            w = _w_from_preset(wspec, d)
        else:
            w = _matrix_from_json(wspec, (d * d, d * d), "w")
        return ModelSpec(d, h, w)


def _matrix_from_json(spec, shape, name):
    if not isinstance(spec, dict) or "re" not in spec:
        raise ValueError(f"model field '{name}' must be {{'re': [[..]], 'im': [[..]]}}")
    re = np.asarray(spec["re"], dtype=float)
    im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
    mat = re + 1j * im
    if mat.shape != shape:
        raise ValueError(f"model field '{name}' must have shape {shape}, got {mat.shape}")
    return mat


def _w_from_preset(spec, d):
    preset = spec["preset"]
    if preset == "rank_one_pair":
        g = float(spec["g"])
        w = np.zeros((d * d, d * d))
        w[0, 0] = g            # g |e1 (x) e1><e1 (x) e1|
        return w
    if preset == "density_density":
        g = np.asarray(spec["g"], dtype=float)
        if g.shape != (d, d):
            raise ValueError(f"density_density preset needs a {d}x{d} 'g' matrix")
        if np.abs(g - g.T).max() > TOL_EXACT:
            raise ValueError("density_density coupling matrix must be symmetric")
        return np.diag(g.reshape(-1))
    raise ValueError(f"unknown w preset {preset!r}")


def rank_one_pair_model(d: int, h: np.ndarray, g: float) -> ModelSpec:
    w = np.zeros((d * d, d * d))
    w[0, 0] = g
    return ModelSpec(d, h, w)


def benchmark_model(g: float = 2.0) -> ModelSpec:
    """Two-mode benchmark: h = diag(0, 1), pair interaction g on mode 1."""
    return rank_one_pair_model(2, np.diag([0.0, 1.0]), g)


def assemble_hamiltonian(model: ModelSpec, N: int) -> SectorOperator:
    """Sector-N mean-field Hamiltonian; Hermitian to 1e-12."""
    if N < 1:
        raise ValueError(f"need N >= 1, got N={N}")
    d = model.d
    cre = [mode_creation(d, i, N - 1) for i in range(d)]       # N-1 -> N
    D = sym_dimension(d, N)
    H = np.zeros((D, D), dtype=complex)
    for a in range(d):
        for b in range(d):
            if model.h[a, b] != 0:
                H += model.h[a, b] * (cre[a] @ cre[b].conj().T).toarray()
    if N >= 2:
        cre2 = [mode_creation(d, i, N - 2) for i in range(d)]  # N-2 -> N-1
        # ladder[x][y] = a_x a_y : sector N -> N-2
        ladder = [
            [(cre2[x].conj().T @ cre[y].conj().T).tocsr() for y in range(d)]
            for x in range(d)
        ]
        coef = 1.0 / (2.0 * (N - 1))
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    for e in range(d):
                        wv = model.w[a * d + b, c * d + e]
                        if wv != 0:
                            # a_a^+ a_b^+ a_e a_c = (a_b a_a)^+ (a_e a_c)
                            H += (coef * wv) * (
                                ladder[b][a].conj().T @ ladder[e][c]
                            ).toarray()
    H = np.asarray(H)
    op = SectorOperator(d, N, (H + H.conj().T) / 2)
    if np.abs(H - H.conj().T).max() > TOL_EXACT * max(1.0, np.abs(H).max()):
        raise ValueError("assembled Hamiltonian is not Hermitian")
    return op


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


def spectral_decomposition(H: SectorOperator) -> SpectralData:
    """Full dense eigendecomposition with an explicit residual guard."""
    H.check_hermitian(TOL_EXACT * max(1.0, float(np.abs(H.matrix).max())))
    lam, V = np.linalg.eigh(H.matrix)
    scale = max(np.abs(lam).max(), 1.0)
    resid = np.abs(H.matrix @ V - V * lam[None, :]).max()
    if resid > 1e-8 * scale:
        raise RuntimeError(f"eigendecomposition residual {resid:.3e} exceeds 1e-8*||H||")
    return SpectralData(lam, V)


@dataclass
class GroundStateResult:
    energy: float
    vector: np.ndarray
    degeneracy: int
    residual: float


def ground_state(H: SectorOperator) -> GroundStateResult:
    """Lowest eigenpair with deterministic tie-breaking.

    Within a degenerate lowest eigenspace the returned vector is the
    normalized projection of the first basis vector with nonnegligible
    component; the global phase makes its largest-magnitude coefficient
    real positive.
    """
    D = H.dim
    if D <= DENSE_EIG_CAP:
        spec = spectral_decomposition(H)
        lam, V = spec.eigenvalues, spec.eigenvectors
    else:
        v0 = np.ones(D) / math.sqrt(D)
        k = min(6, D - 1)
        lam, V = eigsh(H.matrix, k=k, which="SA", v0=v0, tol=1e-12, maxiter=5000)
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
        resid = np.abs(H.matrix @ V[:, :1] - lam[0] * V[:, :1]).max()
        scale = max(abs(lam[0]), 1.0)
        if resid > 1e-8 * scale:
            raise RuntimeError(
                f"iterative eigensolver residual {resid:.3e} exceeds 1e-8*||H||"
            )
    E = float(lam[0])
    tol = 1e-10 * max(1.0, float(np.abs(lam).max()))
    sel = np.where(lam <= E + tol)[0]
    basisV = V[:, sel]
    # deterministic representative of the eigenspace
    psi = None
    for j in range(D):
        cand = basisV @ basisV[j, :].conj()
        nrm = np.linalg.norm(cand)
        if nrm > 1e-6:
            psi = cand / nrm
            break
    if psi is None:
        raise RuntimeError("degenerate eigenspace projection failed")
    k = int(np.argmax(np.abs(psi)))
    phase = psi[k] / abs(psi[k])
    psi = psi / phase
    resid = float(np.linalg.norm(H.matrix @ psi - E * psi))
    return GroundStateResult(E, psi, int(sel.size), resid)


def gibbs_state(H: SectorOperator, T: float) -> tuple[SectorOperator, float]:
    """Gibbs density exp(-H/T)/Z and free energy F = -T log Z, both stabilized.

    Z is summed after shifting by the smallest eigenvalue, so F stays finite
    at any positive temperature.
    """
    if T <= 0:
        raise ValueError(f"temperature must be positive, got T={T}")
    spec = spectral_decomposition(H)
    lam, V = spec.eigenvalues, spec.eigenvectors
    lam0 = lam[0]
    z = np.exp(-(lam - lam0) / T)
    Z = z.sum()
    p = z / Z
    rho = (V * p[None, :]) @ V.conj().T
    rho = (rho + rho.conj().T) / 2
    F = float(lam0 - T * math.log(Z))
    op = SectorOperator(H.d, H.N, rho)
    op.check_density(TOL_CHAIN)
    return op, F


def free_energy_functional(H: SectorOperator, gamma: SectorOperator, T: float) -> float:
    """tr[H Gamma] + T tr[Gamma log Gamma], with 0 log 0 = 0."""
    lam = np.linalg.eigvalsh((gamma.matrix + gamma.matrix.conj().T) / 2)
    lam = np.clip(lam, 0.0, None)
    ent = float(np.sum(lam[lam > 0] * np.log(lam[lam > 0])))
    return float(np.trace(H.matrix @ gamma.matrix).real) + T * ent
