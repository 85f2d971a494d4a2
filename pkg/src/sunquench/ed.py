"""Exact dense references for small chains.

Everything here exists to certify the MPS engine: dense Hamiltonians,
exact propagators (eigendecomposition and adaptive Lanczos), dense
observables, and MPS <-> state-vector conversion.  Caps keep memory at
desk scale: full diagonalization up to dimension 4096, Krylov up to 2^20.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sparse

from .model import DisorderRealization, heisenberg_bond, su_generators
from .mps import MatrixProductState, entropy_from_eigenvalues
from .tensor import svd_truncate

EIG_DIM_CAP = 4096
KRYLOV_DIM_CAP = 2**20


class CapExceededError(ValueError):
    """State-space dimension exceeds the configured oracle cap."""


class KrylovConvergenceError(RuntimeError):
    """Adaptive Lanczos propagation failed to reach the tolerance."""


def _check_cap(dim: int, cap: int) -> None:
    if dim > cap:
        raise CapExceededError(f"dimension {dim} exceeds cap {cap}")


def dense_hamiltonian(realization: DisorderRealization, n: int,
                      as_sparse: bool = False):
    """H = sum_i J_i S_i . S_{i+1} embedded on the full N^L space."""
    length = realization.length
    dim = n**length
    _check_cap(dim, KRYLOV_DIM_CAP)
    if not as_sparse:
        _check_cap(dim, EIG_DIM_CAP)
    bond = sparse.csr_matrix(heisenberg_bond(n))
    ham = sparse.csr_matrix((dim, dim), dtype=np.complex128)
    for b, coupling in enumerate(realization.couplings):
        left = sparse.identity(n**b, format="csr", dtype=np.complex128)
        right = sparse.identity(n**(length - b - 2), format="csr",
                                dtype=np.complex128)
        ham = ham + coupling * sparse.kron(sparse.kron(left, bond), right,
                                           format="csr")
    return ham if as_sparse else np.asarray(ham.todense())


class EigenPropagator:
    """exp(-i H t) acting on vectors, with H diagonalized once."""

    def __init__(self, ham: np.ndarray):
        ham = np.asarray(ham)
        _check_cap(ham.shape[0], EIG_DIM_CAP)
        self.eigvals, self.eigvecs = np.linalg.eigh(ham)

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        coeff = self.eigvecs.conj().T @ psi
        return self.eigvecs @ (np.exp(-1j * self.eigvals * t) * coeff)


def krylov_evolve(ham, psi: np.ndarray, t: float, tol: float = 1e-10,
                  max_basis: int = 40, max_substeps: int = 100000) -> np.ndarray:
    """exp(-i H t) |psi> by Lanczos with adaptive substepping.

    The substep is halved whenever the standard residual estimate
    beta_m * |last component of exp(-i dt T) e_1| exceeds the tolerance.
    """
    _check_cap(psi.shape[0], KRYLOV_DIM_CAP)
    if t == 0.0:
        return psi.copy()
    matvec = (ham.dot if sparse.issparse(ham)
              else (lambda v: np.asarray(ham) @ v))
    psi = psi.astype(np.complex128)
    remaining = float(t)
    dt = remaining
    steps = 0
    while remaining > 1e-14 * abs(t):
        dt = min(dt, remaining)
        basis = [psi / np.linalg.norm(psi)]
        alphas: list[float] = []
        betas: list[float] = []
        breakdown = False
        for m in range(max_basis):
            w = matvec(basis[-1])
            a = float(np.real(np.vdot(basis[-1], w)))
            w = w - a * basis[-1]
            if m > 0:
                w = w - betas[-1] * basis[-2]
            # full reorthogonalization keeps the small basis numerically clean
            for v in basis:
                w = w - np.vdot(v, w) * v
            alphas.append(a)
            b = float(np.linalg.norm(w))
            if b < 1e-14:
                breakdown = True
                break
            betas.append(b)
            basis.append(w / b)
        m_eff = len(alphas)
        tri_w, tri_v = scipy.linalg.eigh_tridiagonal(
            alphas, betas[:m_eff - 1])
        small = tri_v @ (np.exp(-1j * tri_w * dt) * tri_v[0, :].conj())
        err = 0.0 if breakdown else abs(betas[-1]) * abs(small[-1]) * abs(dt)
        if err > tol and not breakdown:
            dt *= 0.5
            steps += 1
            if steps > max_substeps:
                raise KrylovConvergenceError(
                    f"no convergence after {max_substeps} substep adjustments")
            continue
        nrm = np.linalg.norm(psi)
        psi = nrm * sum(c * v for c, v in zip(small[:len(basis)], basis))
        remaining -= dt
        steps += 1
        if steps > max_substeps:
            raise KrylovConvergenceError(
                f"no convergence after {max_substeps} substeps")
        if err < 0.1 * tol:
            dt *= 1.5
    return psi


def exact_evolve(psi: np.ndarray, ham, t: float, method: str = "auto",
                 tol: float = 1e-10) -> np.ndarray:
    """exp(-i H t) |psi>, eigendecomposition below the cap, Lanczos above."""
    dim = psi.shape[0]
    _check_cap(dim, KRYLOV_DIM_CAP)
    if method == "auto":
        method = "eigen" if dim <= EIG_DIM_CAP else "krylov"
    if method == "eigen":
        dense = np.asarray(ham.todense()) if sparse.issparse(ham) else ham
        return EigenPropagator(dense).evolve(psi, t)
    if method == "krylov":
        return krylov_evolve(ham, psi, t, tol=tol)
    raise ValueError(f"unknown method {method!r}")


def exact_extremal_energies(realization: DisorderRealization,
                            n: int) -> tuple[float, float]:
    """(E_GS, E_highest) of H, validating E_highest(J) = -E_GS(-J).

    The identity follows from H(-J) = -H(J); both diagonalizations are run
    and the residual checked to 1e-10.
    """
    ham = dense_hamiltonian(realization, n)
    w = np.linalg.eigvalsh(ham)
    w_neg = np.linalg.eigvalsh(-ham)
    scale = max(1.0, float(np.max(np.abs(w))))
    residual = max(abs(w[-1] + w_neg[0]), abs(w[0] + w_neg[-1]))
    if residual > 1e-10 * scale:
        raise RuntimeError(
            f"negation identity violated: residual {residual:.3e}")
    return float(w[0]), float(w[-1])


# -- MPS <-> dense conversion -------------------------------------------------

def mps_to_dense(state: MatrixProductState,
                 max_dim: int = KRYLOV_DIM_CAP) -> np.ndarray:
    """Contract an MPS into the full N^L amplitude vector."""
    _check_cap(state.phys_dim**state.length, max_dim)
    vec = state.tensors[0].reshape(state.phys_dim, -1)
    for t in state.tensors[1:]:
        vec = np.tensordot(vec, t, axes=(vec.ndim - 1, 0))
        vec = vec.reshape(-1, t.shape[2])
    return np.ascontiguousarray(vec[:, 0])


def dense_to_mps(vec: np.ndarray, phys_dim: int,
                 chi_max: int | None = None,
                 eps_max: float = 0.0) -> MatrixProductState:
    """Compress an amplitude vector into a left-canonical MPS via repeated SVD."""
    vec = np.asarray(vec, dtype=np.complex128)
    length = int(round(np.log(vec.size) / np.log(phys_dim)))
    if phys_dim**length != vec.size:
        raise ValueError(f"vector size {vec.size} is not a power of {phys_dim}")
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise ValueError("cannot convert the zero vector")
    remainder = vec / nrm
    tensors = []
    left = 1
    for _ in range(length - 1):
        mat = remainder.reshape(left * phys_dim, -1)
        u, s, vh, _ = svd_truncate(mat, chi_max, eps_max)
        tensors.append(u.reshape(left, phys_dim, -1))
        remainder = s[:, None] * vh
        left = s.size
    last = remainder.reshape(left, phys_dim, 1)
    last_norm = np.linalg.norm(last)
    tensors.append(last / last_norm)
    return MatrixProductState(tensors, center=length - 1)


# -- dense observables (oracle side) ------------------------------------------

def dense_two_site_expectation(vec: np.ndarray, n: int, i: int, j: int,
                               op: np.ndarray) -> complex:
    """<psi| op_{i,j} |psi> on a dense state, i < j."""
    length = int(round(np.log(vec.size) / np.log(n)))
    # op[a, b, c, d] = <a b| op |c d>, (a, c) on site i and (b, d) on site j.
    op = np.asarray(op, dtype=np.complex128).reshape(n, n, n, n)
    shaped = vec.reshape(n**i, n, n**(j - i - 1), n, n**(length - j - 1))
    applied = np.einsum("abcd,ucvdw->uavbw", op, shaped, optimize=True)
    return complex(np.vdot(shaped, applied))


def dense_nn_correlators(vec: np.ndarray, n: int) -> np.ndarray:
    length = int(round(np.log(vec.size) / np.log(n)))
    bond = heisenberg_bond(n)
    return np.array([
        dense_two_site_expectation(vec, n, b, b + 1, bond).real
        for b in range(length - 1)
    ])


def dense_block_rdm(vec: np.ndarray, n: int, start: int,
                    size: int) -> np.ndarray:
    length = int(round(np.log(vec.size) / np.log(n)))
    shaped = vec.reshape(n**start, n**size, n**(length - start - size))
    rho = np.einsum("apb,aqb->pq", shaped, shaped.conj(), optimize=True)
    return 0.5 * (rho + rho.conj().T)


def dense_block_entropy(vec: np.ndarray, n: int, start: int,
                        size: int) -> float:
    rho = dense_block_rdm(vec, n, start, size)
    return entropy_from_eigenvalues(np.linalg.eigvalsh(rho))


def dense_total_casimir(vec: np.ndarray, n: int) -> float:
    """<sum_a (sum_i T_i^a)^2> on a dense state."""
    length = int(round(np.log(vec.size) / np.log(n)))
    gens = su_generators(n)
    bond = heisenberg_bond(n)
    total = length * gens.casimir_scalar()
    for i in range(length):
        for j in range(i + 1, length):
            total += 2.0 * dense_two_site_expectation(vec, n, i, j, bond).real
    return float(total)
