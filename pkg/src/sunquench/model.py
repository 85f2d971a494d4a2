"""SU(N) generators, the Heisenberg bond operator, and power-law disorder.

The chain Hamiltonian is H = sum_i J_i S_i . S_{i+1} with S the SU(N)
generators in the fundamental representation (spin-1/2 operators for N=2,
halved Gell-Mann matrices for N=3) and antiferromagnetic couplings J_i drawn
from P(J) = alpha * J^(alpha-1) on (0, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class UnsupportedFlavorError(ValueError):
    """Requested an SU(N) flavor count outside {2, 3}."""


@dataclass(frozen=True)
class GeneratorSet:
    """The N^2 - 1 Hermitian generators T^a, normalized Tr(T^a T^b) = delta/2."""

    n: int
    matrices: np.ndarray  # shape (N^2 - 1, N, N)

    def casimir_scalar(self) -> float:
        """Eigenvalue of sum_a (T^a)^2 on the fundamental: (N^2 - 1) / (2N)."""
        return (self.n**2 - 1) / (2.0 * self.n)


def _gell_mann() -> np.ndarray:
    lam = np.zeros((8, 3, 3), dtype=np.complex128)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1] = -1j
    lam[1][1, 0] = 1j
    lam[2][0, 0] = 1
    lam[2][1, 1] = -1
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2] = -1j
    lam[4][2, 0] = 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2] = -1j
    lam[6][2, 1] = 1j
    lam[7] = np.diag([1.0, 1.0, -2.0]) / np.sqrt(3.0)
    return lam


@lru_cache(maxsize=None)
def su_generators(n: int) -> GeneratorSet:
    """Standard generator basis for SU(2) or SU(3)."""
    if n == 2:
        sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
        sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
        sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
        mats = np.stack([sx, sy, sz]) / 2.0
    elif n == 3:
        mats = _gell_mann() / 2.0
    else:
        raise UnsupportedFlavorError(f"only N in {{2, 3}} is supported, got {n}")
    mats.flags.writeable = False
    return GeneratorSet(n, mats)


@lru_cache(maxsize=None)
def heisenberg_bond(n: int) -> np.ndarray:
    """Two-site bond operator h = sum_a T^a (x) T^a, as an N^2 x N^2 matrix.

    Spectrum: +1/2 (1 - 1/N) on the symmetric subspace (dim N(N+1)/2) and
    -1/2 (1 + 1/N) on the antisymmetric one (dim N(N-1)/2).
    """
    gens = su_generators(n)
    h = np.zeros((n * n, n * n), dtype=np.complex128)
    for t in gens.matrices:
        h += np.kron(t, t)
    h.flags.writeable = False
    return h


def bond_extremes(n: int) -> tuple[float, float]:
    """(min, max) eigenvalues of the bond operator: the correlator range."""
    return (-0.5 * (1.0 + 1.0 / n), 0.5 * (1.0 - 1.0 / n))


@dataclass(frozen=True)
class SubspaceWeights:
    """Weights of a two-site state in the symmetric/antisymmetric subspaces."""

    n: int
    p_sym: float
    p_anti: float

    def __post_init__(self):
        if self.p_sym < -1e-12 or self.p_anti < -1e-12:
            raise ValueError("subspace weights must be nonnegative")
        if abs(self.p_sym + self.p_anti - 1.0) > 1e-10:
            raise ValueError(
                f"weights must sum to 1, got {self.p_sym + self.p_anti}"
            )

    @property
    def d_sym(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def d_anti(self) -> int:
        return self.n * (self.n - 1) // 2


def spin_spin_from_weights(w: SubspaceWeights) -> float:
    """<S_i . S_j> = (p_S - p_A - 1/N) / 2."""
    return 0.5 * (w.p_sym - w.p_anti - 1.0 / w.n)


@dataclass(frozen=True)
class DisorderRealization:
    """One sampled coupling sequence J_1 .. J_{L-1}, reproducible from the key."""

    alpha: float
    length: int
    seed: int
    couplings: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.couplings, dtype=np.float64)
        c.flags.writeable = False
        object.__setattr__(self, "couplings", c)
        if c.shape != (self.length - 1,):
            raise ValueError(
                f"expected {self.length - 1} couplings, got shape {c.shape}"
            )
        if np.any(c <= 0.0) or np.any(c > 1.0):
            raise ValueError("couplings must lie in (0, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "L": self.length,
                "seed": self.seed,
                "couplings": [float(j) for j in self.couplings],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DisorderRealization":
        d = json.loads(text)
        return cls(
            alpha=float(d["alpha"]),
            length=int(d["L"]),
            seed=int(d["seed"]),
            couplings=np.array(d["couplings"], dtype=np.float64),
        )


def _uniform_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` uniforms of the counter-based Philox stream keyed by seed.

    The i-th variate is a pure function of (seed, i): Philox is counter-based
    and each double consumes a fixed 64-bit word, so the sequence does not
    depend on how draws are batched.
    """
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    return gen.random(count)


def coupling_from_uniform(u, alpha: float):
    """Inverse CDF of P(J) = alpha J^(alpha-1): J = U^(1/alpha)."""
    return np.power(u, 1.0 / alpha)


def sample_couplings(alpha: float, length: int, seed: int) -> DisorderRealization:
    """Draw J_i i.i.d. from P(J) = alpha * J^(alpha-1) by inverse transform.

    U = 1 - raw maps the stream's [0, 1) raw draws onto (0, 1], so
    J = U^(1/alpha) lies in (0, 1] and the chain never disconnects.
    alpha = inf gives the uniform chain J_i = 1.
    """
    if not (alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")
    if length < 2:
        raise ValueError(f"chain length must be >= 2, got {length}")
    if math.isinf(alpha):
        couplings = np.ones(length - 1)
    else:
        raw = _uniform_stream(seed, length - 1)
        couplings = coupling_from_uniform(1.0 - raw, alpha)
    return DisorderRealization(alpha, length, seed, couplings)


def coupling_at(alpha: float, seed: int, index: int) -> float:
    """Regenerate the single coupling J_index for (alpha, seed) in O(1).

    Philox advances in blocks of four 64-bit outputs, so jump to the block
    containing ``index`` and discard the in-block prefix.
    """
    if not (alpha > 0):
        raise ValueError(f"alpha must be positive, got {alpha}")
    if math.isinf(alpha):
        return 1.0
    bg = np.random.Philox(key=np.uint64(seed))
    bg.advance(index // 4)
    gen = np.random.Generator(bg)
    raw = gen.random(index % 4 + 1)[-1]
    return float(coupling_from_uniform(1.0 - raw, alpha))


def chain_energy(state, realization: DisorderRealization) -> float:
    """E = sum_i J_i <S_i . S_{i+1}> for an MPS over this realization."""
    if state.length != realization.length:
        raise ValueError(
            f"state length {state.length} != realization length {realization.length}"
        )
    correlators = state.bond_expectations(heisenberg_bond(state.phys_dim))
    return float(np.dot(realization.couplings, correlators))
