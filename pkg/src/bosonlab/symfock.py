"""Symmetric (bosonic) tensor algebra over a d-dimensional one-particle space.

Everything is expressed in the occupation-number basis of the N-particle
sector, whose dimension is C(N+d-1, d-1).  Creation/annihilation operators
carry the standard sqrt(n+1) normalization, so the canonical commutation
relations hold exactly as matrix identities.  Basis order is lexicographic
ascending on occupation tuples, which makes indices reproducible across runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse

# Tolerance ladder, reused across the package:
#   TOL_EXACT for exact algebraic identities, TOL_CHAIN for chained linear
#   algebra, Monte-Carlo assertions use 3 observed standard errors.
TOL_EXACT = 1e-12
TOL_CHAIN = 1e-10

_INT64_MAX = 2 ** 63


def sym_dimension(d: int, N: int) -> int:
    """Dimension C(N+d-1, d-1) of the bosonic N-particle sector."""
    if d < 1:
        raise ValueError(f"need d >= 1, got d={d}")
    if N < 0:
        raise ValueError(f"need N >= 0, got N={N}")
    dim = math.comb(N + d - 1, d - 1)
    if dim >= _INT64_MAX:
        raise OverflowError(f"sym_dimension({d}, {N}) = {dim} exceeds 2^63")
    return dim


@lru_cache(maxsize=None)
def enumerate_basis(d: int, N: int) -> tuple[tuple[int, ...], ...]:
    """All occupation vectors (n_1..n_d) with sum N, lexicographic ascending."""
    sym_dimension(max(d, 1), N)  # surfaces overflow/argument errors
    if d == 0:
        return ((),) if N == 0 else ()
    if d == 1:
        return ((N,),)
    out = []
    for k in range(N + 1):
        for rest in enumerate_basis(d - 1, N - k):
            out.append((k,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def basis_index(d: int, N: int) -> dict:
    """Occupation tuple -> position in enumerate_basis(d, N)."""
    return {occ: i for i, occ in enumerate(enumerate_basis(d, N))}


def multinomial(N: int, counts) -> int:
    """Exact N! / prod(counts_i!)."""
    out = math.factorial(N)
    for c in counts:
        out //= math.factorial(c)
    return out


@lru_cache(maxsize=None)
def mode_creation(d: int, mode: int, N: int) -> sparse.csr_matrix:
    """Sparse a_mode^dagger from sector N to sector N+1: |n> -> sqrt(n_i+1)|n+e_i>."""
    src = enumerate_basis(d, N)
    tgt_index = basis_index(d, N + 1)
    rows, cols, vals = [], [], []
    for j, occ in enumerate(src):
        lifted = list(occ)
        lifted[mode] += 1
        rows.append(tgt_index[tuple(lifted)])
        cols.append(j)
        vals.append(math.sqrt(occ[mode] + 1))
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(sym_dimension(d, N + 1), sym_dimension(d, N))
    )


def creation_matrix(f: np.ndarray, N: int) -> sparse.csr_matrix:
    """a*(f) = sum_i f_i a_i^dagger, mapping sector N to sector N+1."""
    f = np.asarray(f, dtype=complex)
    if f.ndim != 1:
        raise ValueError("one-body vector must be 1-dimensional")
    d = f.shape[0]
    out = sparse.csr_matrix(
        (sym_dimension(d, N + 1), sym_dimension(d, N)), dtype=complex
    )
    for i in range(d):
        if f[i] != 0:
            out = out + f[i] * mode_creation(d, i, N)
    return out


def annihilation_matrix(f: np.ndarray, N: int) -> sparse.csr_matrix:
    """a(f): sector N -> N-1, the exact conjugate transpose of a*(f) on N-1."""
    if N < 1:
        raise ValueError(f"annihilation needs N >= 1, got N={N}")
    return creation_matrix(f, N - 1).conj().T.tocsr()


def product_state(u: np.ndarray, N: int) -> np.ndarray:
    """Coefficients of u^{(x)N} in the occupation basis.

    Coefficient on occupation n is sqrt(multinomial(N; n)) prod_i u_i^{n_i}.
    Requires ||u|| = 1 within 1e-12.
    """
    u = np.asarray(u, dtype=complex)
    norm = np.linalg.norm(u)
    if abs(norm - 1.0) > TOL_EXACT:
        raise ValueError(f"product_state requires a unit vector, got ||u|| = {norm!r}")
    d = u.shape[0]
    basis = enumerate_basis(d, N)
    out = np.empty(len(basis), dtype=complex)
    for i, occ in enumerate(basis):
        c = math.sqrt(multinomial(N, occ))
        for j, n in enumerate(occ):
            if n:
                c = c * u[j] ** n
        out[i] = c
    return out


def product_state_batch(U: np.ndarray, N: int) -> np.ndarray:
    """Row b of the output holds product_state(U[b], N); U rows must be unit."""
    U = np.asarray(U, dtype=complex)
    d = U.shape[1]
    counts = np.array(enumerate_basis(d, N), dtype=np.int64)  # (D, d)
    roots = np.sqrt([multinomial(N, occ) for occ in enumerate_basis(d, N)])
    return roots[None, :] * np.prod(U[:, None, :] ** counts[None, :, :], axis=2)


@dataclass
class SectorOperator:
    """Dense operator on the bosonic N-particle sector of a d-mode space."""

    d: int
    N: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        D = sym_dimension(self.d, self.N)
        if self.matrix.shape != (D, D):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match sector "
                f"dimension {D} for (d={self.d}, N={self.N})"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def check_hermitian(self, tol: float = TOL_EXACT):
        defect = self.hermiticity_defect()
        if defect > tol:
            raise ValueError(f"operator is not Hermitian (defect {defect:.3e})")

    def check_density(self, tol: float = TOL_CHAIN, check_psd: bool = False):
        self.check_hermitian(tol)
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density operator must have trace 1, got {tr!r}")
        if check_psd:
            lam = np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)
            if lam.min() < -tol:
                raise ValueError(f"density operator has eigenvalue {lam.min():.3e}")

    def to_json(self) -> str:
        flat = self.matrix.reshape(-1)
        data = np.empty(2 * flat.size)
        data[0::2] = flat.real
        data[1::2] = flat.imag
        return json.dumps(
            {"d": self.d, "N": self.N, "D": self.dim, "data": data.tolist()}
        )

    @staticmethod
    def from_json(text: str) -> "SectorOperator":
        obj = json.loads(text)
        D = obj["D"]
        data = np.asarray(obj["data"], dtype=float)
        mat = (data[0::2] + 1j * data[1::2]).reshape(D, D)
        return SectorOperator(obj["d"], obj["N"], mat)


def pure_state_operator(psi: np.ndarray, d: int, N: int) -> SectorOperator:
    psi = np.asarray(psi, dtype=complex)
    return SectorOperator(d, N, np.outer(psi, psi.conj()))


def random_density(d: int, N: int, rng: np.random.Generator) -> SectorOperator:
    """Full-rank random density operator (Wishart normalized to trace one)."""
    D = sym_dimension(d, N)
    X = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    G = X @ X.conj().T
    return SectorOperator(d, N, G / np.trace(G).real)


@lru_cache(maxsize=None)
def _partial_trace_tables(d: int, N: int, n: int):
    """Index/coefficient tables for the sector-N -> sector-n partial trace.

    For occupation p in sector n and s in sector N-n:
      idx[p, s]   = basis index of s+p in sector N
      coeff[p, s] = sqrt(prod_i (s_i+p_i)! / s_i!)
    """
    basis_n = enumerate_basis(d, n)
    basis_env = enumerate_basis(d, N - n)
    index_N = basis_index(d, N)
    Dn, De = len(basis_n), len(basis_env)
    idx = np.empty((Dn, De), dtype=np.int64)
    coeff = np.empty((Dn, De), dtype=float)
    for pi, p in enumerate(basis_n):
        for si, s in enumerate(basis_env):
            total = tuple(s[i] + p[i] for i in range(d))
            idx[pi, si] = index_N[total]
            ff = 1
            for i in range(d):
                if p[i]:
                    ff *= math.factorial(s[i] + p[i]) // math.factorial(s[i])
            coeff[pi, si] = math.sqrt(ff)
    roots = np.sqrt([multinomial(n, p) for p in basis_n])
    return idx, coeff, roots


def _partial_trace_raw(matrix: np.ndarray, d: int, N: int, n: int) -> np.ndarray:
    """Linear partial trace over the last N-n particles, no density validation."""
    if n == N:
        return matrix.copy()
    idx, coeff, roots = _partial_trace_tables(d, N, n)
    gathered = matrix[idx[:, None, :], idx[None, :, :]]          # (Dn, Dn, De)
    summed = np.einsum("ps,qs,pqs->pq", coeff, coeff, gathered)
    scale = math.factorial(N - n) / math.factorial(N)
    return scale * roots[:, None] * roots[None, :] * summed


def partial_trace(op: SectorOperator, n: int) -> SectorOperator:
    """Reduced density matrix on sector n, normalized to trace one."""
    if not 0 <= n <= op.N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={op.N}")
    op.check_density()
    return SectorOperator(op.d, n, _partial_trace_raw(op.matrix, op.d, op.N, n))


def annihilation_chain(v: np.ndarray, N: int, n: int) -> sparse.csr_matrix:
    """a(v)^n as a sparse map from sector N down to sector N-n."""
    v = np.asarray(v, dtype=complex)
    d = v.shape[0]
    out = sparse.identity(sym_dimension(d, N), dtype=complex, format="csr")
    for k in range(n):
        out = annihilation_matrix(v, N - k) @ out
    return out


def creation_chain(v: np.ndarray, N: int, n: int) -> sparse.csr_matrix:
    """a*(v)^n as a sparse map from sector N up to sector N+n."""
    v = np.asarray(v, dtype=complex)
    d = v.shape[0]
    out = sparse.identity(sym_dimension(d, N), dtype=complex, format="csr")
    for k in range(n):
        out = creation_matrix(v, N + k) @ out
    return out


def wick_reduced_element(op: SectorOperator, v: np.ndarray, n: int) -> float:
    """<v^{(x)n}, gamma^{(n)} v^{(x)n}> = (N-n)!/N! tr[a*(v)^n a(v)^n Gamma]."""
    if not 0 <= n <= op.N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={op.N}")
    if n == 0:
        return op.trace()
    A = annihilation_chain(v, op.N, n)
    val = np.trace((A.conj().T @ A).toarray() @ op.matrix)
    val *= math.factorial(op.N - n) / math.factorial(op.N)
    if abs(val.imag) > TOL_CHAIN:
        raise ValueError(f"Wick element has imaginary residue {val.imag:.3e}")
    return float(val.real)


def trace_norm_distance(a: SectorOperator, b: SectorOperator) -> float:
    """Sum of singular values of a - b; the two operators must share a sector."""
    if (a.d, a.N) != (b.d, b.N):
        raise ValueError(
            f"sector mismatch: (d={a.d}, N={a.N}) vs (d={b.d}, N={b.N})"
        )
    return float(np.linalg.svd(a.matrix - b.matrix, compute_uv=False).sum())


def sector_power(X: np.ndarray, k: int) -> np.ndarray:
    """Restriction of X^{(x)k} to the symmetric sector, in the occupation basis.

    Built column by column from the intertwining relation
    X^{(x)k} a_j^dagger = sum_i X_ij a_i^dagger X^{(x)(k-1)}.
    Works for any one-body operator X (unitary or not).
    """
    X = np.asarray(X, dtype=complex)
    d = X.shape[0]
    if X.shape != (d, d):
        raise ValueError("one-body operator must be square")
    R = np.ones((1, 1), dtype=complex)
    for j in range(1, k + 1):
        basis = enumerate_basis(d, j)
        prev_index = basis_index(d, j - 1)
        out = np.zeros((len(basis), len(basis)), dtype=complex)
        cre = [mode_creation(d, i, j - 1) for i in range(d)]
        for col, occ in enumerate(basis):
            mode = next(i for i, c in enumerate(occ) if c)
            lowered = list(occ)
            lowered[mode] -= 1
            w = R[:, prev_index[tuple(lowered)]]
            acc = np.zeros(len(basis), dtype=complex)
            for i in range(d):
                if X[i, mode] != 0:
                    acc += X[i, mode] * (cre[i] @ w)
            out[:, col] = acc / math.sqrt(occ[mode])
        R = out
    return R


def embedding_isometry(d: int, N: int) -> np.ndarray:
    """Isometry from the symmetric sector into the full d^N tensor power.

    Column of occupation n spreads 1/sqrt(multinomial) over the distinct
    arrangements.  Only for small d^N (guarded at 2^20 entries).
    """
    full = d ** N
    if full > 2 ** 20:
        raise ValueError(f"full tensor space of size {d}^{N} is too large")
    basis = enumerate_basis(d, N)
    index = basis_index(d, N)
    S = np.zeros((full, len(basis)), dtype=complex)
    for prod_i in range(full):
        rem, occ = prod_i, [0] * d
        for _ in range(N):
            occ[rem % d] += 1
            rem //= d
        col = index[tuple(occ)]
        S[prod_i, col] = 1.0 / math.sqrt(multinomial(N, occ))
    return S
