"""Dense complex tensor algebra: contraction, truncated SVD, Hermitian exponentials.

All routines operate on complex128 ndarrays in row-major layout and are pure
functions of their inputs. This module is the numeric substrate for the MPS
layer; nothing here knows about chains or physics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Relative floor below which singular values are treated as exact zeros
# (numerical noise, not physical rank).
SV_RELATIVE_FLOOR = 1e-14

HERMITICITY_TOL = 1e-12


class ShapeMismatchError(ValueError):
    """Contraction was asked to pair axes with unequal extents."""


class ZeroMatrixError(ValueError):
    """SVD truncation of an (effectively) zero matrix was requested."""


class NonHermitianError(ValueError):
    """Matrix exponential of a non-Hermitian input was requested."""


@dataclass(frozen=True)
class SvdTruncation:
    """Result of one truncated SVD on a bond.

    ``kept_singular_values`` are the raw (unnormalized) kept values, sorted
    nonincreasing.  ``discarded_weight`` is eps = 1 - sum_k w_k with w_k the
    squared singular values normalized to unit total square.
    """

    kept_rank: int
    kept_singular_values: np.ndarray
    discarded_weight: float

    @property
    def pre_truncation_norm(self) -> float:
        """Frobenius norm of the input matrix, recovered from kept data."""
        kept_sq = float(np.sum(self.kept_singular_values**2))
        return float(np.sqrt(kept_sq / max(1.0 - self.discarded_weight, 1e-300)))


def contract(a: np.ndarray, a_axes, b: np.ndarray, b_axes) -> np.ndarray:
    """Contract tensors ``a`` and ``b`` over paired axes.

    Remaining axes are ordered as (free axes of a, then free axes of b).
    Raises ShapeMismatchError naming the first offending axis pair.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    a_axes = [int(x) for x in np.atleast_1d(a_axes)]
    b_axes = [int(x) for x in np.atleast_1d(b_axes)]
    if len(a_axes) != len(b_axes):
        raise ShapeMismatchError(
            f"axis lists have different lengths: {len(a_axes)} vs {len(b_axes)}"
        )
    for ax_a, ax_b in zip(a_axes, b_axes):
        if a.shape[ax_a] != b.shape[ax_b]:
            raise ShapeMismatchError(
                f"axis pair (a axis {ax_a}, b axis {ax_b}): "
                f"extents {a.shape[ax_a]} != {b.shape[ax_b]}"
            )
    return np.tensordot(a, b, axes=(a_axes, b_axes))


def _robust_svd(m: np.ndarray):
    """SVD with a gesvd fallback for the rare gesdd convergence failure."""
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(
    m: np.ndarray,
    chi_max: int | None = None,
    eps_max: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, SvdTruncation]:
    """Truncated SVD m = U @ diag(s) @ Vh with a dual truncation criterion.

    Keeps the smallest rank M whose discarded weight (on singular values
    normalized to unit total square) is <= eps_max, then caps at chi_max.
    When the eps target is unreachable within chi_max, chi_max values are
    kept and the resulting discarded weight reported.  Singular values below
    ``SV_RELATIVE_FLOOR`` relative to the largest are treated as zero.

    Returns (U, s, Vh, SvdTruncation) with raw kept singular values in s.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if chi_max is not None and chi_max < 1:
        raise ValueError(f"chi_max must be positive, got {chi_max}")
    if eps_max < 0:
        raise ValueError(f"eps_max must be nonnegative, got {eps_max}")

    u, s, vh = _robust_svd(m)
    total_sq = float(np.sum(s**2))
    if total_sq <= 0.0:
        raise ZeroMatrixError("cannot truncate a zero matrix")

    w = s**2 / total_sq
    # Effective rank after dropping numerical noise.
    effective_rank = int(np.count_nonzero(s >= SV_RELATIVE_FLOOR * s[0]))
    effective_rank = max(effective_rank, 1)

    # tail[k] = discarded weight when keeping the first k values.
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])
    kept = effective_rank
    for rank in range(1, effective_rank + 1):
        if tail[rank] <= eps_max:
            kept = rank
            break
    if chi_max is not None:
        kept = min(kept, chi_max)

    eps = float(tail[kept])
    info = SvdTruncation(kept, s[:kept].copy(), eps)
    return u[:, :kept], s[:kept], vh[:kept, :], info


def hermitian_exponential(h: np.ndarray, scale: complex) -> np.ndarray:
    """exp(scale * h) for Hermitian h, via eigendecomposition.

    For purely imaginary ``scale`` the result is unitary to machine accuracy.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    deviation = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    tol = HERMITICITY_TOL * max(1.0, float(np.max(np.abs(h))) if h.size else 0.0)
    if deviation > tol:
        raise NonHermitianError(
            f"matrix is not Hermitian: max |h - h^dag| = {deviation:.3e}"
        )
    w, v = np.linalg.eigh(h)
    return (v * np.exp(scale * w)) @ v.conj().T
