"""Matrix product states: canonical forms, gates, reduced density matrices.

Site tensors are rank-3 complex arrays with index order
(left bond, physical, right bond); boundary bonds have dimension 1.
States are values: every mutating operation returns a new
MatrixProductState sharing the unmodified site tensors.  All public
constructors and operations keep the global norm at 1.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _fastops
from .tensor import SvdTruncation, svd_truncate

CHECKPOINT_MAGIC = b"MPSC"
CHECKPOINT_VERSION = 1

RDM_DIM_CAP = 4096

# Density-matrix eigenvalues below this are excluded from entropy sums
# (0 ln 0 := 0); they sit below the truncation floor.
ENTROPY_EIGVAL_FLOOR = 1e-14


class CenterMisplacedError(RuntimeError):
    """A two-site gate was applied away from the orthogonality center."""


class RdmCapError(ValueError):
    """Requested block density matrix exceeds the dimension cap."""


class CheckpointFormatError(ValueError):
    """Checkpoint bytes failed the magic/version/hash check."""


def entropy_from_eigenvalues(eigvals: np.ndarray) -> float:
    """Von Neumann entropy in nats; eigenvalues below the floor are dropped."""
    lam = np.asarray(eigvals, dtype=np.float64)
    lam = lam[lam > ENTROPY_EIGVAL_FLOOR]
    if lam.size == 0:
        return 0.0
    return float(-np.sum(lam * np.log(lam)))


@dataclass(frozen=True)
class BlockRdm:
    """Reduced density matrix of a contiguous block of sites."""

    block_start: int  # 0-based leftmost site
    block_size: int
    matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def entropy(self) -> float:
        return entropy_from_eigenvalues(self.eigenvalues())


def _qr_shift_right(tensors: list[np.ndarray], site: int) -> None:
    """Make tensors[site] left-isometric, absorbing R into site+1."""
    l, d, r = tensors[site].shape
    q, rmat = _fastops.qr_reduced(tensors[site].reshape(l * d, r))
    tensors[site] = q.reshape(l, d, -1)
    nxt = tensors[site + 1]
    rn, dn, rr = nxt.shape
    tensors[site + 1] = _fastops.matmul(rmat, nxt.reshape(rn, dn * rr)).reshape(
        -1, dn, rr)


def _qr_shift_left(tensors: list[np.ndarray], site: int) -> None:
    """Make tensors[site] right-isometric, absorbing R into site-1."""
    l, d, r = tensors[site].shape
    q, rmat = _fastops.qr_reduced(tensors[site].reshape(l, d * r).T)
    k = q.shape[1]
    tensors[site] = np.ascontiguousarray(q.T.reshape(k, d, r))
    prv = tensors[site - 1]
    ll, dp, _ = prv.shape
    tensors[site - 1] = _fastops.matmul(prv.reshape(ll * dp, l),
                                        rmat.T).reshape(ll, dp, k)


def _as_two_site_gate(op: np.ndarray, d: int) -> np.ndarray:
    op = np.asarray(op, dtype=np.complex128)
    if op.shape == (d, d, d, d):
        return op
    if op.shape == (d * d, d * d):
        return op.reshape(d, d, d, d)
    raise ValueError(f"two-site operator has shape {op.shape}, expected "
                     f"({d},{d},{d},{d}) or ({d * d},{d * d})")


class MatrixProductState:
    """An open-boundary MPS with an explicitly tracked orthogonality center."""

    def __init__(self, tensors, center: int | None = None,
                 bond_spectra: list | None = None):
        self.tensors = [np.asarray(t, dtype=np.complex128) for t in tensors]
        self.length = len(self.tensors)
        if self.length < 1:
            raise ValueError("MPS needs at least one site")
        self.phys_dim = self.tensors[0].shape[1]
        self.center = center
        self.bond_spectra = (list(bond_spectra) if bond_spectra is not None
                             else [None] * (self.length - 1))
        self._validate_shapes()

    def _validate_shapes(self) -> None:
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for i, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise ValueError(f"site {i}: tensor rank {t.ndim} != 3")
            if t.shape[1] != self.phys_dim:
                raise ValueError(f"site {i}: physical dim {t.shape[1]} != "
                                 f"{self.phys_dim}")
            if i and self.tensors[i - 1].shape[2] != t.shape[0]:
                raise ValueError(f"bond {i - 1}: mismatched extents "
                                 f"{self.tensors[i - 1].shape[2]} vs {t.shape[0]}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def product_state(cls, vectors) -> "MatrixProductState":
        """Normalized product state from one local vector per site."""
        tensors = []
        for v in vectors:
            v = np.asarray(v, dtype=np.complex128)
            v = v / np.linalg.norm(v)
            tensors.append(v.reshape(1, -1, 1))
        return cls(tensors, center=len(tensors) - 1)

    @classmethod
    def random_product_state(cls, phys_dim: int, length: int,
                             seed: int) -> "MatrixProductState":
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        vecs = rng.normal(size=(length, phys_dim)) + 1j * rng.normal(
            size=(length, phys_dim))
        return cls.product_state(vecs)

    # -- basic properties --------------------------------------------------

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "MatrixProductState":
        return MatrixProductState(list(self.tensors), self.center,
                                  list(self.bond_spectra))

    def norm(self) -> float:
        return float(np.sqrt(abs(self.overlap(self))))

    # -- gauge -------------------------------------------------------------

    def canonicalize(self, center: int) -> "MatrixProductState":
        """Return a mixed-canonical copy with the center at ``center``.

        Left of the center every tensor is left-isometric, right of it
        right-isometric; the center tensor is normalized, so the state this
        represents is unchanged for normalized input.
        """
        if not 0 <= center < self.length:
            raise ValueError(f"center {center} out of range")
        tensors = list(self.tensors)
        for i in range(center):
            _qr_shift_right(tensors, i)
        for i in range(self.length - 1, center, -1):
            _qr_shift_left(tensors, i)
        nrm = np.linalg.norm(tensors[center])
        tensors[center] = tensors[center] / nrm
        return MatrixProductState(tensors, center, list(self.bond_spectra))

    def move_center_to(self, center: int) -> "MatrixProductState":
        """Shift the center by successive QR steps (center must be set)."""
        if self.center is None:
            return self.canonicalize(center)
        if not 0 <= center < self.length:
            raise ValueError(f"center {center} out of range")
        tensors = list(self.tensors)
        c = self.center
        while c < center:
            _qr_shift_right(tensors, c)
            c += 1
        while c > center:
            _qr_shift_left(tensors, c)
            c -= 1
        return MatrixProductState(tensors, center, list(self.bond_spectra))

    def isometry_defect(self) -> float:
        """Max deviation from the isometry conditions about the center."""
        if self.center is None:
            return np.inf
        worst = 0.0
        for i, t in enumerate(self.tensors):
            l, d, r = t.shape
            if i < self.center:
                m = t.reshape(l * d, r)
                worst = max(worst, float(np.max(np.abs(
                    m.conj().T @ m - np.eye(r)))))
            elif i > self.center:
                m = t.reshape(l, d * r)
                worst = max(worst, float(np.max(np.abs(
                    m @ m.conj().T - np.eye(l)))))
        return worst

    # -- gates -------------------------------------------------------------

    def apply_two_site_gate(
        self,
        bond: int,
        gate: np.ndarray,
        chi_max: int | None = None,
        eps_max: float = 0.0,
        absorb: str = "right",
    ) -> tuple["MatrixProductState", SvdTruncation]:
        """Apply a two-site gate at ``bond`` (sites bond, bond+1) and truncate.

        The orthogonality center must already sit on one of the two sites;
        moving it implicitly would hide gauge bugs, so a misplaced center is
        an error.  After the SVD the kept singular values are rescaled to
        unit norm, re-establishing <psi|psi> = 1; the returned SvdTruncation
        carries the raw spectrum and the discarded weight for this bond.
        """
        if not 0 <= bond < self.length - 1:
            raise ValueError(f"bond {bond} out of range")
        if self.center not in (bond, bond + 1):
            raise CenterMisplacedError(
                f"center is {self.center}, gate at bond {bond} needs it at "
                f"{bond} or {bond + 1}")
        if absorb not in ("left", "right"):
            raise ValueError(f"absorb must be 'left' or 'right', got {absorb!r}")
        d = self.phys_dim
        gate = _as_two_site_gate(gate, d)

        a, b = self.tensors[bond], self.tensors[bond + 1]
        l, r = a.shape[0], b.shape[2]
        rb = a.shape[2]
        theta = _fastops.matmul(a.reshape(l * d, rb),
                                b.reshape(rb, d * r)).reshape(l, d, d, r)
        theta = _fastops.apply_gate_to_theta(gate, theta)    # (l, d, d, r)
        u, s, vh, info = svd_truncate(theta.reshape(l * d, d * r),
                                      chi_max, eps_max)
        s_unit = s / np.linalg.norm(s)
        if absorb == "right":
            new_a = u.reshape(l, d, -1)
            new_b = (s_unit[:, None] * vh).reshape(-1, d, r)
            new_center = bond + 1
        else:
            new_a = (u * s_unit).reshape(l, d, -1)
            new_b = vh.reshape(-1, d, r)
            new_center = bond

        tensors = list(self.tensors)
        tensors[bond] = np.ascontiguousarray(new_a)
        tensors[bond + 1] = np.ascontiguousarray(new_b)
        spectra = list(self.bond_spectra)
        spectra[bond] = s_unit**2
        return MatrixProductState(tensors, new_center, spectra), info

    # -- overlaps and expectation values ------------------------------------

    def overlap(self, other: "MatrixProductState") -> complex:
        """<self|other>."""
        if (other.length != self.length
                or other.phys_dim != self.phys_dim):
            raise ValueError("overlap requires equal length and physical dim")
        env = np.ones((1, 1), dtype=np.complex128)
        for ta, tb in zip(self.tensors, other.tensors):
            x = np.tensordot(env, tb, axes=(1, 0))           # (la, d, rb)
            env = np.tensordot(ta.conj(), x, axes=([0, 1], [0, 1]))
        return complex(env[0, 0])

    def bond_expectations(self, op: np.ndarray) -> np.ndarray:
        """<op> on every nearest-neighbor pair, in one left-to-right sweep."""
        d = self.phys_dim
        gate = _as_two_site_gate(op, d)
        hermitian = np.allclose(gate.reshape(d * d, d * d),
                                gate.reshape(d * d, d * d).conj().T,
                                atol=1e-12)
        work = self.canonicalize(0)
        tensors = list(work.tensors)
        values = np.empty(self.length - 1, dtype=np.complex128)
        for b in range(self.length - 1):
            a, bt = tensors[b], tensors[b + 1]
            l, _, rb = a.shape
            r = bt.shape[2]
            theta = _fastops.matmul(a.reshape(l * d, rb),
                                    bt.reshape(rb, d * r)).reshape(l, d, d, r)
            values[b] = np.vdot(theta, _fastops.apply_gate_to_theta(gate, theta))
            if b < self.length - 2:
                _qr_shift_right(tensors, b)
        if hermitian:
            if np.max(np.abs(values.imag)) > 1e-10:
                raise ValueError("Hermitian operator produced a complex value")
            return values.real.copy()
        return values

    def two_site_expectation(self, i: int, j: int, op: np.ndarray):
        """<psi| op_{i,j} |psi> for sites i < j (not necessarily adjacent).

        For Hermitian op the (tiny) imaginary part is checked and dropped.
        """
        if not (0 <= i < j < self.length):
            raise IndexError(f"site pair ({i}, {j}) out of range for L={self.length}")
        d = self.phys_dim
        gate = _as_two_site_gate(op, d)
        mat = gate.reshape(d * d, d * d)
        hermitian = np.allclose(mat, mat.conj().T, atol=1e-12)

        work = self.canonicalize(i)
        if j == i + 1:
            theta = np.tensordot(work.tensors[i], work.tensors[j], axes=(2, 0))
            op_theta = np.tensordot(gate, theta, axes=([2, 3], [1, 2]))
            val = complex(np.vdot(theta, op_theta.transpose(2, 0, 1, 3)))
        else:
            # Operator-Schmidt split op = sum_k P_k (x) Q_k across the two
            # sites; gate[a, b, c, d] = <a b| op |c d> with (a, c) on site i.
            m2 = gate.transpose(0, 2, 1, 3).reshape(d * d, d * d)
            uu, ss, vv = np.linalg.svd(m2)
            keep = ss > 1e-14 * ss[0]
            p_ops = (uu[:, keep] * ss[keep]).T.reshape(-1, d, d)
            q_ops = vv[keep, :].reshape(-1, d, d)

            a = work.tensors[i]
            # env[k, m, r]: environment between sites i and i+1 with P_k at i.
            env = np.einsum("lsm,kst,ltr->kmr", a.conj(), p_ops, a,
                            optimize=True)
            for s_idx in range(i + 1, j):
                t = work.tensors[s_idx]
                env = np.einsum("mdx,kmr,rdy->kxy", t.conj(), env, t,
                                optimize=True)
            t = work.tensors[j]
            val = complex(np.einsum("kmr,msx,kst,rtx->", env, t.conj(),
                                    q_ops, t, optimize=True))
        if hermitian:
            if abs(val.imag) > 1e-10:
                raise ValueError(
                    f"Hermitian operator gave imaginary part {val.imag:.3e}")
            return float(val.real)
        return val

    # -- reduced density matrices -------------------------------------------

    def reduced_density_matrix(self, start: int, size: int,
                               max_dim: int = RDM_DIM_CAP) -> BlockRdm:
        """Partial trace of |psi><psi| onto sites [start, start + size)."""
        if size < 1 or start < 0 or start + size > self.length:
            raise ValueError(f"block [{start}, {start + size}) out of range")
        dim = self.phys_dim**size
        if dim > max_dim:
            raise RdmCapError(
                f"block dimension N^l = {dim} exceeds the cap {max_dim}")
        work = self.canonicalize(start)
        rho = _block_rdm_from_canonical(work.tensors, start, size, self.phys_dim)
        return BlockRdm(start, size, rho)

    def block_entropy_sweep(
        self,
        positions_by_size: dict[int, list[int]],
        max_dim: int = RDM_DIM_CAP,
    ) -> dict[tuple[int, int], float]:
        """Entropies of many contiguous blocks in one canonicalization sweep.

        ``positions_by_size`` maps block size to the list of 0-based start
        positions.  Returns {(start, size): entropy in nats}.
        """
        wanted: dict[int, list[int]] = {}
        for size, starts in positions_by_size.items():
            dim = self.phys_dim**size
            if dim > max_dim:
                raise RdmCapError(
                    f"block dimension N^l = {dim} exceeds the cap {max_dim}")
            for start in starts:
                if start < 0 or start + size > self.length:
                    raise ValueError(
                        f"block [{start}, {start + size}) out of range")
                wanted.setdefault(start, []).append(size)
        if not wanted:
            return {}
        starts = sorted(wanted)
        work = self.canonicalize(starts[0])
        tensors = list(work.tensors)
        center = starts[0]
        out: dict[tuple[int, int], float] = {}
        for start in starts:
            while center < start:
                _qr_shift_right(tensors, center)
                center += 1
            sizes = sorted(wanted[start])
            block = tensors[start]
            grown = 1
            for size in sizes:
                while grown < size:
                    nxt = tensors[start + grown]
                    chi = nxt.shape[0]
                    block = _fastops.matmul(
                        block.reshape(-1, chi),
                        nxt.reshape(chi, -1)).reshape(
                            block.shape[:-1] + nxt.shape[1:])
                    grown += 1
                chi_l = block.shape[0]
                chi_r = block.shape[-1]
                k = block.reshape(chi_l, self.phys_dim**size, chi_r)
                k = np.ascontiguousarray(k.transpose(1, 0, 2)).reshape(
                    self.phys_dim**size, chi_l * chi_r)
                rho = _fastops.gram(k)
                out[(start, size)] = entropy_from_eigenvalues(
                    np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)))
        return out

    # -- serialization -------------------------------------------------------

    def save(self, path, metadata: dict | None = None) -> Path:
        """Write the binary checkpoint plus a JSON metadata sidecar.

        Layout: magic "MPSC", u32 version, u32 L, u32 N, L shape triples
        (u32 each), then the raw complex128 little-endian entries of every
        site tensor in row-major order.
        """
        path = Path(path)
        parts = [CHECKPOINT_MAGIC,
                 struct.pack("<III", CHECKPOINT_VERSION, self.length,
                             self.phys_dim)]
        for t in self.tensors:
            parts.append(struct.pack("<III", *t.shape))
        for t in self.tensors:
            parts.append(np.ascontiguousarray(t, dtype="<c16").tobytes())
        payload = b"".join(parts)
        path.write_bytes(payload)
        side = dict(metadata or {})
        side["center"] = self.center
        side["payload_sha256"] = hashlib.sha256(payload).hexdigest()
        side["format_version"] = CHECKPOINT_VERSION
        sidecar_path(path).write_text(json.dumps(side, indent=1, sort_keys=True))
        return path

    @classmethod
    def load(cls, path) -> tuple["MatrixProductState", dict]:
        path = Path(path)
        payload = path.read_bytes()
        meta = json.loads(sidecar_path(path).read_text())
        if meta.get("payload_sha256") != hashlib.sha256(payload).hexdigest():
            raise CheckpointFormatError("checkpoint payload hash mismatch")
        if payload[:4] != CHECKPOINT_MAGIC:
            raise CheckpointFormatError("bad magic bytes")
        version, length, phys_dim = struct.unpack_from("<III", payload, 4)
        if version != CHECKPOINT_VERSION:
            raise CheckpointFormatError(f"unsupported format version {version}")
        offset = 16
        shapes = []
        for _ in range(length):
            shapes.append(struct.unpack_from("<III", payload, offset))
            offset += 12
        tensors = []
        for shape in shapes:
            count = shape[0] * shape[1] * shape[2]
            t = np.frombuffer(payload, dtype="<c16", count=count, offset=offset)
            offset += count * 16
            tensors.append(t.reshape(shape).astype(np.complex128))
        if any(s[1] != phys_dim for s in shapes):
            raise CheckpointFormatError("inconsistent physical dimensions")
        center = meta.get("center")
        return cls(tensors, center=center), meta


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _block_rdm_from_canonical(tensors, start: int, size: int,
                              phys_dim: int) -> np.ndarray:
    """rho for sites [start, start+size) given the center at ``start``."""
    block = tensors[start]
    for s in range(start + 1, start + size):
        block = np.tensordot(block, tensors[s], axes=(block.ndim - 1, 0))
    chi_l = block.shape[0]
    chi_r = block.shape[-1]
    k = block.reshape(chi_l, phys_dim**size, chi_r)
    k = k.transpose(1, 0, 2).reshape(phys_dim**size, chi_l * chi_r)
    rho = k @ k.conj().T
    return 0.5 * (rho + rho.conj().T)


def concatenate_factors(factors: list[MatrixProductState]) -> MatrixProductState:
    """Product state of independent normalized MPS factors (bond dim 1 joins).

    Every factor must be fully left-canonical up to its last tensor; since a
    normalized tensor with right bond dimension 1 is itself left-isometric,
    the concatenation is left-canonical with the center at the final site.
    """
    tensors = []
    for f in factors:
        tensors.extend(f.tensors)
    return MatrixProductState(tensors, center=len(tensors) - 1)
