"""Weakly entangled global-singlet initial states for SU(2) and SU(3) chains.

SU(2): chains of independent 4-site blocks.  Within a block the two
nearest-neighbor pairs each form a spin triplet and the two triplets are
fused to total spin zero, so odd bonds carry <S.S> = +1/4 and the block is
an exact singlet.

SU(3): chains of independent 9-site super-blocks plus a final antisymmetric
3-site singlet.  Each super-block fuses three consecutive 3-site blocks,
each projected into the fully symmetric 10-dimensional multiplet, into the
unique overall SU(3) singlet of that triple product.  (The two-block
intermediate channel is necessarily the conjugate 10-bar; no adjoint channel
exists in the product of two symmetric triples.)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ed import dense_to_mps
from .model import heisenberg_bond, su_generators
from .mps import MatrixProductState, concatenate_factors

SU2_TAG = "su2-triplet-singlet"
SU3_TAG = "su3-symmetric-blocks"

FINGERPRINT_TOL = 1e-9

# Expected <S_i . S_{i+1}> per bond class.
BOND_CLASS_VALUES = {
    "triplet": 0.25,        # SU(2) pair fused to spin 1
    "middle": -0.5,         # SU(2) bond between the two triplets of a block
    "junction": 0.0,        # bond between independent singlet factors
    "sym": 1.0 / 3.0,       # SU(3) bond inside a symmetric 3-site block
    "interblock": -1.0 / 3.0,  # SU(3) bond between symmetric blocks
    "antisym": -2.0 / 3.0,  # SU(3) bond inside the antisymmetric triple
}

EXTREMAL_CLASSES = ("sym", "antisym")


class InvalidLengthError(ValueError):
    """Chain length incompatible with the block structure."""


@dataclass(frozen=True)
class InitialStateSpec:
    n: int
    length: int
    tag: str = ""

    def __post_init__(self):
        if self.n == 2:
            if self.length % 4 != 0 or self.length < 4:
                raise InvalidLengthError(
                    f"SU(2) initial state needs L = 0 (mod 4), got {self.length}")
            object.__setattr__(self, "tag", SU2_TAG)
        elif self.n == 3:
            if self.length % 9 != 3 or self.length < 12:
                raise InvalidLengthError(
                    f"SU(3) initial state needs L = 3 (mod 9) and L >= 12, "
                    f"got {self.length}")
            object.__setattr__(self, "tag", SU3_TAG)
        else:
            raise InvalidLengthError(f"unsupported N = {self.n}")


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude coefficient real positive."""
    idx = int(np.argmax(np.abs(vec)))
    phase = vec[idx] / abs(vec[idx])
    return vec / phase


@lru_cache(maxsize=None)
def _su2_block_mps() -> MatrixProductState:
    """4-site block: (12) and (34) triplets fused to total spin 0."""
    # |1,m> in the two-site basis (index 0 = up).
    triplet = {
        1: {(0, 0): 1.0},
        0: {(0, 1): 1 / np.sqrt(2), (1, 0): 1 / np.sqrt(2)},
        -1: {(1, 1): 1.0},
    }
    vec = np.zeros(16, dtype=np.complex128)
    for m in (1, 0, -1):
        cg = (-1.0) ** (1 - m) / np.sqrt(3.0)
        for (a, b), ca in triplet[m].items():
            for (c, d), cb in triplet[-m].items():
                vec[((a * 2 + b) * 2 + c) * 2 + d] += cg * ca * cb
    return dense_to_mps(_fix_phase(vec), 2)


def build_su2_initial(length: int) -> MatrixProductState:
    """Product of independent 4-site triplet-pair singlets."""
    spec = InitialStateSpec(2, length)
    block = _su2_block_mps()
    return concatenate_factors([block] * (spec.length // 4))


@lru_cache(maxsize=None)
def _symmetric_three_site_basis() -> np.ndarray:
    """Orthonormal basis (27 x 10) of the fully symmetric 3-site subspace."""
    projector = np.zeros((27, 27))
    for perm in itertools.permutations(range(3)):
        for idx in itertools.product(range(3), repeat=3):
            src = (idx[0] * 3 + idx[1]) * 3 + idx[2]
            permuted = tuple(idx[p] for p in perm)
            dst = (permuted[0] * 3 + permuted[1]) * 3 + permuted[2]
            projector[dst, src] += 1.0 / 6.0
    w, v = np.linalg.eigh(projector)
    basis = v[:, w > 0.5]
    if basis.shape[1] != 10:
        raise RuntimeError("symmetric subspace dimension != 10")
    return basis


def _symmetric_block_generators(basis: np.ndarray) -> np.ndarray:
    """The eight (30)-representation matrices, 10 x 10 each."""
    gens = su_generators(3).matrices
    eye = np.eye(3)
    out = np.empty((8, 10, 10), dtype=np.complex128)
    for a, t in enumerate(gens):
        total = (np.kron(np.kron(t, eye), eye)
                 + np.kron(np.kron(eye, t), eye)
                 + np.kron(np.kron(eye, eye), t))
        out[a] = basis.conj().T @ total @ basis
    return out


@lru_cache(maxsize=None)
def _su3_superblock_vector() -> np.ndarray:
    """The unique singlet of three symmetric 3-site blocks, as a 3^9 vector.

    Work in the reduced 10x10x10 space of (30) blocks; the total quadratic
    Casimir there has a one-dimensional null space (the next multiplet sits
    at Casimir 3), whose vector is expanded back to the site basis.
    """
    basis = _symmetric_three_site_basis()
    block_gens = _symmetric_block_generators(basis)
    eye10 = np.eye(10)
    casimir = np.zeros((1000, 1000), dtype=np.complex128)
    for t in block_gens:
        collective = (np.kron(np.kron(t, eye10), eye10)
                      + np.kron(np.kron(eye10, t), eye10)
                      + np.kron(np.kron(eye10, eye10), t))
        casimir += collective @ collective
    w, v = np.linalg.eigh(casimir)
    if not (w[0] < 1e-8 and w[1] > 2.5):
        raise RuntimeError(
            f"singlet not isolated: lowest Casimir eigenvalues {w[:2]}")
    reduced = v[:, 0].reshape(10, 10, 10)
    full = np.einsum("ax,by,cz,xyz->abc", basis, basis, basis, reduced,
                     optimize=True).reshape(3**9)
    full = full / np.linalg.norm(full)
    return _fix_phase(full)


@lru_cache(maxsize=None)
def _su3_superblock_mps() -> MatrixProductState:
    return dense_to_mps(_su3_superblock_vector(), 3)


@lru_cache(maxsize=None)
def _su3_antisym_triple_mps() -> MatrixProductState:
    """(1/sqrt6) sum_abc eps_abc |a b c> on three sites."""
    vec = np.zeros(27, dtype=np.complex128)
    for a, b, c in itertools.permutations(range(3)):
        sign = np.linalg.det(np.eye(3)[[a, b, c]])
        vec[(a * 3 + b) * 3 + c] = sign / np.sqrt(6.0)
    return dense_to_mps(_fix_phase(vec), 3)


def build_su3_initial(length: int) -> MatrixProductState:
    """Product of 9-site symmetric-block singlets plus the final
    antisymmetric triple."""
    spec = InitialStateSpec(3, length)
    factors = [_su3_superblock_mps()] * ((spec.length - 3) // 9)
    factors.append(_su3_antisym_triple_mps())
    return concatenate_factors(factors)


def build_initial_state(n: int, length: int) -> MatrixProductState:
    if n == 2:
        return build_su2_initial(length)
    if n == 3:
        return build_su3_initial(length)
    raise InvalidLengthError(f"unsupported N = {n}")


def initial_bond_classes(spec: InitialStateSpec) -> list[str]:
    """Class label of every nearest-neighbor bond (0-based bond b = sites b, b+1)."""
    classes = []
    if spec.n == 2:
        for b in range(spec.length - 1):
            pos = b % 4
            if pos in (0, 2):
                classes.append("triplet")
            elif pos == 1:
                classes.append("middle")
            else:
                classes.append("junction")
    else:
        body = spec.length - 3
        for b in range(spec.length - 1):
            if b >= body:          # inside the final antisymmetric triple
                classes.append("antisym")
            elif b == body - 1:    # junction to the final triple
                classes.append("junction")
            else:
                pos = b % 9
                if pos == 8:
                    classes.append("junction")
                elif pos in (2, 5):
                    classes.append("interblock")
                else:
                    classes.append("sym")
    return classes


def _factor_ranges(spec: InitialStateSpec) -> list[range]:
    if spec.n == 2:
        return [range(k, k + 4) for k in range(0, spec.length, 4)]
    body = spec.length - 3
    ranges = [range(k, k + 9) for k in range(0, body, 9)]
    ranges.append(range(body, spec.length))
    return ranges


@dataclass
class InitialStateReport:
    spec: InitialStateSpec
    correlation_matrix: np.ndarray
    total_casimir: float
    energy: float
    checks: list = field(default_factory=list)  # (name, value, expected, tol)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if abs(c[1] - c[2]) > c[3]]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [
            f"initial state N={self.spec.n} L={self.spec.length} ({self.spec.tag})",
            f"  total Casimir: {self.total_casimir:.3e}",
            f"  energy (J=1): {self.energy:.12f}",
        ]
        for name, value, expected, tol in self.checks:
            ok = abs(value - expected) <= tol
            lines.append(f"  [{'PASS' if ok else 'FAIL'}] {name}: "
                         f"{value:.12f} (expected {expected:.12f})")
        return "\n".join(lines)


def verify_initial_state(state: MatrixProductState,
                         spec: InitialStateSpec,
                         couplings: np.ndarray | None = None) -> InitialStateReport:
    """Measure the full correlation fingerprint of a constructed initial state.

    Emits the <S_i . S_j> matrix (diagonal: single-site Casimir), the global
    Casimir, the energy for the given couplings (default uniform J = 1), and
    per-bond pass/fail checks against the construction's expected values,
    including vanishing correlations across distinct singlet factors.
    """
    if state.length != spec.length or state.phys_dim != spec.n:
        raise ValueError("state does not match the spec")
    length = spec.length
    bond = heisenberg_bond(spec.n)
    cas_scalar = su_generators(spec.n).casimir_scalar()

    corr = np.zeros((length, length))
    for i in range(length):
        corr[i, i] = cas_scalar
    for i in range(length):
        for j in range(i + 1, length):
            corr[i, j] = corr[j, i] = state.two_site_expectation(i, j, bond)

    total_casimir = float(length * cas_scalar
                          + 2.0 * np.sum(np.triu(corr, k=1)))
    if couplings is None:
        couplings = np.ones(length - 1)
    energy = float(np.dot(couplings,
                          [corr[b, b + 1] for b in range(length - 1)]))

    checks = [("total Casimir", total_casimir, 0.0,
               1e-8 if spec.n == 3 else FINGERPRINT_TOL)]
    for b, cls in enumerate(initial_bond_classes(spec)):
        checks.append((f"bond {b} [{cls}]", float(corr[b, b + 1]),
                       BOND_CLASS_VALUES[cls], FINGERPRINT_TOL))
    factors = _factor_ranges(spec)
    worst = 0.0
    for fa, fb in itertools.combinations(factors, 2):
        for i in fa:
            for j in fb:
                worst = max(worst, abs(corr[i, j]))
    checks.append(("max cross-factor |<S_i.S_j>|", worst, 0.0, 1e-10))
    return InitialStateReport(spec, corr, total_casimir, energy, checks)
