"""Measurement and aggregation: correlators, windowed entropies, distributions.

Entropies are computed and stored in nats; the ln 2 / ln N normalizations
used for reporting and classification are applied here, at the edges, and
nowhere deeper in the stack.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import bond_extremes, heisenberg_bond, su_generators
from .mps import MatrixProductState

LN2 = math.log(2.0)

HIST_DEFAULT_DX = 0.01

# Classification thresholds on S_ent(8) in ln 2 units (volume-law ceiling 8).
CLASS_LOWEST_BELOW = 4.0
CLASS_HIGHEST_ABOVE = 6.0

RANGE_CLAMP_TOL = 1e-9


class WindowError(ValueError):
    """Block-entropy averaging window is empty or ill-defined."""


class MismatchedGridError(ValueError):
    """Per-realization time series disagree on their sample grid."""


class UnknownBondClassError(ValueError):
    """Extremal-bond filtering needs the initial construction's bond classes."""


@dataclass(frozen=True)
class EvolutionRecord:
    """One sampled measurement row of a trajectory."""

    t: float
    correlators: tuple          # <S_i . S_{i+1}> for every bond
    entropies: dict             # block size -> windowed average, nats
    eps_cum: float
    max_chi: int

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "c": list(self.correlators),
            "S": {str(k): v for k, v in sorted(self.entropies.items())},
            "eps_cum": self.eps_cum,
            "chi_max_seen": self.max_chi,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EvolutionRecord":
        return cls(
            t=float(d["t"]),
            correlators=tuple(float(x) for x in d["c"]),
            entropies={int(k): float(v) for k, v in d["S"].items()},
            eps_cum=float(d["eps_cum"]),
            max_chi=int(d["chi_max_seen"]),
        )


@dataclass(frozen=True)
class RealizationSummary:
    index: int
    seed: int
    final_entropies: dict       # block size -> nats, at the final sample
    localized_fraction: float | None = None

    @property
    def s5_ln2(self) -> float:
        return self.final_entropies[5] / LN2

    @property
    def s8_ln2(self) -> float:
        return self.final_entropies[8] / LN2


def classify_realization(summary: RealizationSummary) -> str:
    """lowest / intermediate / highest by S_ent(8) in ln 2 units."""
    s8 = summary.s8_ln2
    if s8 < CLASS_LOWEST_BELOW:
        return "lowest"
    if s8 > CLASS_HIGHEST_ABOVE:
        return "highest"
    return "intermediate"


# -- correlators ---------------------------------------------------------------

def nn_correlators(state: MatrixProductState) -> np.ndarray:
    """<S_i . S_{i+1}> on every bond."""
    return state.bond_expectations(heisenberg_bond(state.phys_dim))


def total_casimir(state: MatrixProductState) -> float:
    """<sum_a (sum_i T_i^a)^2>; exactly zero on global singlets."""
    n = state.phys_dim
    bond = heisenberg_bond(n)
    total = state.length * su_generators(n).casimir_scalar()
    for i in range(state.length):
        for j in range(i + 1, state.length):
            total += 2.0 * state.two_site_expectation(i, j, bond)
    return float(total)


# -- block entropy window ------------------------------------------------------

def entropy_window(length: int, block_size: int) -> range:
    """0-based block start positions kept by the edge-exclusion window.

    L/6 sites are dropped on each end: starts run from L/6 to 5L/6 - l
    (0-based, inclusive), i.e. the paper's kappa in [L/6 + 1, 5L/6 - l + 1].
    """
    if length % 6 != 0:
        raise WindowError(f"chain length {length} is not divisible by 6")
    first = length // 6
    last = 5 * length // 6 - block_size
    if last < first:
        raise WindowError(
            f"window empty for L={length}, block size {block_size}")
    return range(first, last + 1)


def block_count(length: int, block_size: int) -> int:
    return len(entropy_window(length, block_size))


def averaged_block_entropy(state: MatrixProductState,
                           block_size: int) -> tuple[float, list[float]]:
    """Windowed average of block entropies (nats) and the per-block values."""
    window = entropy_window(state.length, block_size)
    values = state.block_entropy_sweep({block_size: list(window)})
    per_block = [values[(start, block_size)] for start in window]
    return float(np.mean(per_block)), per_block


def windowed_entropies(state: MatrixProductState,
                       block_sizes) -> dict[int, float]:
    """Windowed averages for several block sizes in one sweep."""
    positions = {l: list(entropy_window(state.length, l))
                 for l in sorted(set(block_sizes))}
    values = state.block_entropy_sweep(positions)
    return {l: float(np.mean([values[(k, l)] for k in positions[l]]))
            for l in positions}


# -- histograms ----------------------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    """Normalized density over half-open bins (edge_k, edge_{k+1}]."""

    edges: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    total_count: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def mass(self) -> float:
        return float(np.sum(self.densities * self.widths))

    def bin_mass(self, k: int) -> float:
        return float(self.densities[k] * self.widths[k])

    @classmethod
    def from_values(cls, values, edges) -> "Histogram":
        edges = np.asarray(edges, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        lo, hi = edges[0], edges[-1]
        below = values < lo
        above = values > hi
        if np.any(values < lo - RANGE_CLAMP_TOL) or np.any(
                values > hi + RANGE_CLAMP_TOL):
            worst = float(np.max(np.maximum(lo - values, values - hi)))
            raise ValueError(
                f"values outside histogram range by {worst:.3e}")
        if np.any(below) or np.any(above):
            warnings.warn("clamping values within 1e-9 of the histogram range")
            values = np.clip(values, lo, hi)
        idx = np.searchsorted(edges, values, side="left") - 1
        idx = np.clip(idx, 0, len(edges) - 2)
        counts = np.bincount(idx, minlength=len(edges) - 1).astype(np.int64)
        total = int(counts.sum())
        widths = np.diff(edges)
        densities = (counts / (total * widths)) if total else np.zeros_like(widths)
        return cls(edges, densities, counts, total)


def grid_aligned_edges(lo: float, hi: float, dx: float) -> np.ndarray:
    """Bin edges on the multiples-of-dx grid, with partial end bins when the
    range limits are off-grid (the SU(3) case)."""
    inner_lo = math.ceil(lo / dx - 1e-9) * dx
    inner_hi = math.floor(hi / dx + 1e-9) * dx
    inner = np.round(np.arange(round((inner_hi - inner_lo) / dx) + 1)
                     * dx + inner_lo, 12)
    edges = list(inner)
    if edges[0] > lo + 1e-12:
        edges.insert(0, lo)
    else:
        edges[0] = lo
    if edges[-1] < hi - 1e-12:
        edges.append(hi)
    else:
        edges[-1] = hi
    return np.asarray(edges)


def correlator_histogram(values, n: int,
                         dx: float = HIST_DEFAULT_DX) -> Histogram:
    """Histogram of <S_i . S_{i+1}> over the bond-spectrum range for SU(N).

    Bins are half-open (lo, hi] on the dx grid, so the SU(2) top bin is
    exactly (0.24, 0.25].
    """
    lo, hi = bond_extremes(n)
    return Histogram.from_values(values, grid_aligned_edges(lo, hi, dx))


def localized_fraction(hist: Histogram) -> float:
    """Mass of the top bin: bonds still pinned at the triplet value."""
    return hist.bin_mass(len(hist.edges) - 2)


# -- aggregation over realizations ---------------------------------------------

def entropy_statistics(summaries, block_size: int = 5,
                       bin_width: float = 0.25) -> tuple[Histogram, float]:
    """Distribution (in ln 2 units) and unbiased variance of final entropies."""
    values = np.array([s.final_entropies[block_size] / LN2 for s in summaries])
    if values.size < 2:
        raise ValueError("need at least 2 realizations for statistics")
    lo = math.floor(values.min() / bin_width) * bin_width
    hi = math.ceil(values.max() / bin_width) * bin_width
    if hi - lo < bin_width:
        hi = lo + bin_width
    edges = np.round(np.arange(round((hi - lo) / bin_width) + 1) * bin_width
                     + lo, 12)
    hist = Histogram.from_values(values, edges)
    variance = float(np.var(values, ddof=1))
    return hist, variance


def lowest_quartile_growth(series) -> tuple[np.ndarray, np.ndarray]:
    """Mean S_ent(5) series of the 25% realizations with the lowest final value.

    ``series`` is a sequence of (times, values) pairs on a common grid;
    ties on the final value break by position in the input.
    """
    series = [(np.asarray(t, dtype=float), np.asarray(v, dtype=float))
              for t, v in series]
    if len(series) < 4:
        raise ValueError(f"need >= 4 realizations, got {len(series)}")
    times0 = series[0][0]
    for t, _ in series[1:]:
        if t.shape != times0.shape or np.max(np.abs(t - times0)) > 1e-9:
            raise MismatchedGridError("sample grids differ between realizations")
    keep = len(series) // 4
    order = sorted(range(len(series)), key=lambda k: (series[k][1][-1], k))
    chosen = order[:keep]
    mean = np.mean([series[k][1] for k in chosen], axis=0)
    return times0.copy(), mean


def extremal_bond_filter(records, bond_classes,
                         extremal=("sym", "antisym")) -> tuple[np.ndarray, list[int]]:
    """Correlator values restricted to bonds initialized at +1/3 or -2/3.

    ``records`` is a sequence of EvolutionRecords (or bare correlator
    sequences); ``bond_classes`` the per-bond class labels of the initial
    construction.  Returns (filtered values, extremal bond indices).
    """
    known = set(bond_classes)
    if not known.intersection(extremal):
        raise UnknownBondClassError(
            f"no extremal bond classes among {sorted(known)}")
    indices = [i for i, c in enumerate(bond_classes) if c in extremal]
    values = []
    for rec in records:
        corr = rec.correlators if isinstance(rec, EvolutionRecord) else rec
        if len(corr) != len(bond_classes):
            raise UnknownBondClassError(
                f"record has {len(corr)} bonds, classes list has "
                f"{len(bond_classes)}")
        values.extend(corr[i] for i in indices)
    return np.asarray(values, dtype=float), indices
