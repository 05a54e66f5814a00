"""Quantitative quantum de Finetti toolkit.

The coherent-state machinery on the unit sphere of C^d: lower symbols,
the reduced matrices of the coherent-mixture state built from a lower
symbol (closed form, Monte-Carlo integral, and anti-normal-order trace,
three independent routes), and the trace-norm error bound 2n(d+2n)/N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .symfock import (
    TOL_CHAIN,
    SectorOperator,
    _partial_trace_raw,
    annihilation_chain,
    creation_chain,
    embedding_isometry,
    partial_trace,
    product_state,
    product_state_batch,
    sym_dimension,
)

MC_BATCH = 1 << 16  # fixed batch size keeps reductions deterministic


class SphereSampler:
    """Seeded counter-based stream of uniform points on the unit sphere of C^d.

    Each sample owns a fixed whole number of Philox counter blocks (one block
    yields four doubles), and normals come from Box-Muller on fixed pairs of
    uniforms, so a stream position is addressable: identical
    (seed, stream, counter) always reproduce the same samples.
    """

    def __init__(self, d: int, seed: int, stream: int = 0, counter: int = 0):
        if d < 1:
            raise ValueError("need d >= 1")
        self.d = d
        self.seed = int(seed)
        self.stream = int(stream)
        self.counter = int(counter)
        self._blocks_per_sample = -(-2 * d // 4)  # Philox blocks of 4 doubles

    def sample(self, count: int) -> np.ndarray:
        """Draw `count` unit vectors, shape (count, d); advances the counter."""
        bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream], dtype=np.uint64)
        )
        bitgen.advance(self.counter * self._blocks_per_sample)
        gen = np.random.Generator(bitgen)
        raw = gen.random((count, 4 * self._blocks_per_sample))[:, : 2 * self.d]
        # Box-Muller on fixed pairs: 2d uniforms -> 2d normals per sample
        u1, u2 = raw[:, 0::2], raw[:, 1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)], axis=1)
        vec = z[:, : self.d] + 1j * z[:, self.d :]
        vec /= np.linalg.norm(vec, axis=1, keepdims=True)
        self.counter += count
        return vec

    def split(self, stream: int) -> "SphereSampler":
        """Fresh sampler on an independent substream of the same seed."""
        return SphereSampler(self.d, self.seed, stream=stream, counter=0)


def lower_symbol(gamma_N: SectorOperator, u: np.ndarray) -> float:
    """dim(H_s^N) <u^{(x)N}, Gamma_N u^{(x)N}>, clamped at zero.

    This is a probability density with respect to the normalized uniform
    measure on the sphere; it integrates to one by the Schur resolution.
    """
    coeffs = product_state(u, gamma_N.N)
    val = float(np.vdot(coeffs, gamma_N.matrix @ coeffs).real)
    val *= sym_dimension(gamma_N.d, gamma_N.N)
    return max(val, 0.0)


def lower_symbol_batch(gamma_N: SectorOperator, U: np.ndarray) -> np.ndarray:
    V = product_state_batch(U, gamma_N.N)
    vals = np.einsum("bi,ij,bj->b", V.conj(), gamma_N.matrix, V).real
    return np.clip(vals * sym_dimension(gamma_N.d, gamma_N.N), 0.0, None)


def _place_on_slots(block: np.ndarray, d: int, n: int, slots: tuple[int, ...]) -> np.ndarray:
    """Embed an operator on len(slots) tensor factors into d^n, identity elsewhere."""
    l = len(slots)
    term = np.kron(block, np.eye(d ** (n - l), dtype=complex))
    order = list(slots) + [i for i in range(n) if i not in slots]
    perm = [0] * n
    for pos, slot in enumerate(order):
        perm[slot] = pos
    t = term.reshape((d,) * (2 * n))
    t = np.transpose(t, perm + [p + n for p in perm])
    return t.reshape(d ** n, d ** n)


def chiribella_reduced(
    gammas: list[SectorOperator], N: int, d: int, n: int
) -> SectorOperator:
    """Closed form for the reduced matrices of the lower-symbol coherent mixture.

    gamma~^{(n)} = C(N+n+d-1, n)^{-1} sum_l C(N, l) [gamma^{(l)} (x)_s Id^{(n-l)}],
    where the symmetrized product is the sum over the C(n, l) placements of
    gamma^{(l)} among the n tensor slots, compressed to the symmetric sector.

    `gammas` must hold the reduced matrices gamma^{(0)} .. gamma^{(n)} of one
    density operator; consistency under partial trace is checked to 1e-8.
    """
    import itertools

    if n > N:
        raise ValueError(f"need n <= N, got n={n}, N={N}")
    if len(gammas) < n + 1:
        raise ValueError(f"need marginals gamma^(0..{n}), got {len(gammas)}")
    for l in range(n + 1):
        if (gammas[l].d, gammas[l].N) != (d, l):
            raise ValueError(f"gammas[{l}] is not a sector-{l} operator on d={d}")
    for l in range(n):
        down = _partial_trace_raw(gammas[l + 1].matrix, d, l + 1, l)
        if np.abs(down - gammas[l].matrix).max() > 1e-8:
            raise ValueError(
                f"input marginals are inconsistent: tr_{l + 2}[gamma^({l + 1})] "
                f"differs from gamma^({l}) by {np.abs(down - gammas[l].matrix).max():.3e}"
            )
    Y = np.zeros((d ** n, d ** n), dtype=complex)
    for l in range(n + 1):
        if l == 0:
            block = np.array([[1.0 + 0j]])
        else:
            S_l = embedding_isometry(d, l)
            block = S_l @ gammas[l].matrix @ S_l.conj().T
        weight = math.comb(N, l)
        for slots in itertools.combinations(range(n), l):
            Y += weight * _place_on_slots(block, d, n, slots)
    S_n = embedding_isometry(d, n)
    out = (S_n.conj().T @ Y @ S_n) / math.comb(N + n + d - 1, n)
    out = (out + out.conj().T) / 2
    op = SectorOperator(d, n, out)
    op.check_density(TOL_CHAIN)
    return op


def ckmr_reduced_mc(
    gamma_N: SectorOperator, n: int, samples: int, sampler: SphereSampler
) -> tuple[SectorOperator, np.ndarray]:
    """Monte-Carlo estimate of the coherent-mixture marginal.

    gamma~^{(n)} = dim(H_s^N) E_u[ <u^{(x)N}, Gamma_N u^{(x)N}> |u^{(x)n}><u^{(x)n}| ]
    over the uniform sphere.  Returns (estimate, entrywise standard error).
    """
    if samples < 1000:
        raise ValueError("need at least 10^3 samples")
    if sampler.d != gamma_N.d:
        raise ValueError("sampler dimension does not match the state")
    d, N = gamma_N.d, gamma_N.N
    Dn = sym_dimension(d, n)
    acc = np.zeros((Dn, Dn), dtype=complex)
    acc_sq = np.zeros((Dn, Dn), dtype=float)
    done = 0
    while done < samples:
        B = min(MC_BATCH, samples - done)
        U = sampler.sample(B)
        f = lower_symbol_batch(gamma_N, U) / sym_dimension(d, N)
        V = product_state_batch(U, n)
        scaled = V * f[:, None]
        acc += np.einsum("bp,bq->pq", scaled, V.conj())
        acc_sq += np.einsum("b,bp,bq->pq", f * f, np.abs(V) ** 2, np.abs(V) ** 2)
        done += B
    dim = sym_dimension(d, N)
    mean = dim * acc / samples
    second = dim * dim * acc_sq / samples
    var = np.clip(second - np.abs(mean) ** 2, 0.0, None)
    stderr = np.sqrt(var / samples)
    est = SectorOperator(d, n, (mean + mean.conj().T) / 2)
    return est, stderr


def wick_to_antiwick_coeffs(n: int) -> list[int]:
    """Coefficients c_{n,k} = C(n,k) n!/k! of the normal-ordered expansion.

    a(v)^n a*(v)^n = sum_k c_{n,k} a*(v)^k a(v)^k for any unit v; these are
    the coefficients of n! L_n(-x) with L_n the n-th Laguerre polynomial.
    """
    if n < 0:
        raise ValueError("need n >= 0")
    out = []
    for k in range(n + 1):
        c = math.comb(n, k) * (math.factorial(n) // math.factorial(k))
        if c >= 2 ** 63:
            raise OverflowError(f"coefficient c_{{{n},{k}}} exceeds 2^63")
        out.append(c)
    return out


def wick_antiwick_identity_error(d: int, N: int, n: int, v: np.ndarray) -> float:
    """Max-norm defect of the normal/anti-normal ordering identity on sector N."""
    v = np.asarray(v, dtype=complex)
    C = creation_chain(v, N, n)
    lhs = (C.conj().T @ C).toarray()
    rhs = np.zeros_like(lhs)
    coeffs = wick_to_antiwick_coeffs(n)
    for k in range(min(n, N) + 1):
        A = annihilation_chain(v, N, k)
        rhs += coeffs[k] * (A.conj().T @ A).toarray()
    return float(np.abs(lhs - rhs).max())


def antiwick_reduced_element(gamma_N: SectorOperator, v: np.ndarray, n: int) -> float:
    """<v^{(x)n}, gamma~^{(n)} v^{(x)n}> via the anti-normal-order trace.

    Equals (N+d-1)!/(N+n+d-1)! tr[a(v)^n a*(v)^n Gamma_N]; requires unit v and
    builds sector N+n operators, so n is capped at 4.
    """
    if n > 4:
        raise ValueError("anti-normal route builds sector N+n; capped at n <= 4")
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ValueError("v must be a unit vector")
    d, N = gamma_N.d, gamma_N.N
    if n == 0:
        return gamma_N.trace()
    C = creation_chain(v, N, n)
    val = np.trace((C.conj().T @ C).toarray() @ gamma_N.matrix)
    val *= math.factorial(N + d - 1) / math.factorial(N + n + d - 1)
    out = float(val.real)
    return max(out, 0.0) if out > -1e-12 else out


@dataclass
class DeFinettiReport:
    d: int
    N: int
    n: int
    distance: float
    bound: float
    passes: bool
    bound_sharper: float
    sharper_holds: bool


def verify_definetti_bound(gamma_N: SectorOperator, n: int) -> DeFinettiReport:
    """Trace-norm distance between gamma^{(n)} and the coherent-mixture marginal.

    Asserts the proven bound 2n(d+2n)/N.  The sharper 2nd/N is reported and
    measured but never asserted.
    """
    d, N = gamma_N.d, gamma_N.N
    if n > N:
        raise ValueError(f"need n <= N, got n={n}, N={N}")
    marginals = [partial_trace(gamma_N, l) for l in range(n + 1)]
    tilde = chiribella_reduced(marginals, N, d, n)
    diff = marginals[n].matrix - tilde.matrix
    distance = float(np.linalg.svd(diff, compute_uv=False).sum())
    bound = 2.0 * n * (d + 2 * n) / N
    sharper = 2.0 * n * d / N
    return DeFinettiReport(
        d=d,
        N=N,
        n=n,
        distance=distance,
        bound=bound,
        passes=distance <= bound + 1e-10,
        bound_sharper=sharper,
        sharper_holds=distance <= sharper + 1e-10,
    )
