"""Hot-path linear algebra with an optional torch backend.

The bundled OpenBLAS has slow complex GEMM/QR kernels on some hosts; when
torch is importable its MKL-backed kernels are used instead.  Everything
takes and returns numpy arrays, results are deterministic for a fixed
environment, and the numpy fallback keeps torch a purely optional
dependency.  SVD stays on LAPACK zgesdd (numpy) either way.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import torch

    # One intra-op thread: these kernels are small enough that pool sync and
    # contention with the BLAS used by LAPACK cost more than they gain.
    torch.set_num_threads(int(os.environ.get("SUNQUENCH_TORCH_THREADS", "1")))
    HAVE_TORCH = True
except ImportError:  # pragma: no cover - exercised on torch-less installs
    torch = None
    HAVE_TORCH = False


def _t(a: np.ndarray):
    a = np.ascontiguousarray(a)
    if not a.flags.writeable:
        a = a.copy()
    return torch.from_numpy(a)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if HAVE_TORCH:
        return (_t(a) @ _t(b)).numpy()
    return a @ b


def qr_reduced(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if HAVE_TORCH:
        q, r = torch.linalg.qr(_t(m), mode="reduced")
        return q.numpy(), r.numpy()
    return np.linalg.qr(m)


def apply_gate_to_theta(gate: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """out[l,a,b,r] = sum_{c,d} gate[a,b,c,d] theta[l,c,d,r]."""
    if HAVE_TORCH:
        return torch.einsum("abcd,lcdr->labr", _t(gate), _t(theta)).numpy()
    return np.tensordot(gate, theta, axes=([2, 3], [1, 2])).transpose(2, 0, 1, 3)


def gram(k: np.ndarray) -> np.ndarray:
    """k @ k^dagger."""
    if HAVE_TORCH:
        tk = _t(k)
        return (tk @ tk.conj().T).numpy()
    return k @ k.conj().T
