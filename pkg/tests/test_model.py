import json
import math

import numpy as np
import pytest
import scipy.stats

from sunquench.ed import dense_to_mps
from sunquench.model import (DisorderRealization, SubspaceWeights,
                             UnsupportedFlavorError, bond_extremes,
                             chain_energy, coupling_at, coupling_from_uniform,
                             heisenberg_bond, sample_couplings,
                             spin_spin_from_weights, su_generators)
from sunquench.initial import build_su2_initial


class TestGenerators:
    @pytest.mark.parametrize("n,count,casimir", [(2, 3, 0.75), (3, 8, 4.0 / 3.0)])
    def test_count_and_casimir(self, n, count, casimir):
        gens = su_generators(n)
        assert gens.matrices.shape[0] == count
        total = sum(t @ t for t in gens.matrices)
        assert np.max(np.abs(total - casimir * np.eye(n))) < 1e-14
        # closed form (N^2 - 1) / 2N
        assert abs(gens.casimir_scalar() - (n * n - 1) / (2 * n)) < 1e-15

    @pytest.mark.parametrize("n", [2, 3])
    def test_normalization_and_tracelessness(self, n):
        mats = su_generators(n).matrices
        for a, ta in enumerate(mats):
            assert abs(np.trace(ta)) < 1e-14
            assert np.max(np.abs(ta - ta.conj().T)) < 1e-14
            for b, tb in enumerate(mats):
                expected = 0.5 if a == b else 0.0
                assert abs(np.trace(ta @ tb) - expected) < 1e-14

    @pytest.mark.parametrize("n", [2, 3])
    def test_commutator_closure(self, n):
        # [T^a, T^b] must lie in the span of {i T^c}
        mats = su_generators(n).matrices
        basis = np.stack([1j * t for t in mats]).reshape(len(mats), -1)
        for a in range(len(mats)):
            for b in range(len(mats)):
                comm = (mats[a] @ mats[b] - mats[b] @ mats[a]).reshape(-1)
                coeff, *_ = np.linalg.lstsq(basis.T, comm, rcond=None)
                residual = basis.T @ coeff - comm
                assert np.max(np.abs(residual)) < 1e-12

    def test_unsupported_flavor(self):
        with pytest.raises(UnsupportedFlavorError):
            su_generators(4)


class TestHeisenbergBond:
    def test_su2_spectrum(self):
        evals = np.sort(np.linalg.eigvalsh(heisenberg_bond(2)))
        assert np.max(np.abs(evals - [-0.75, 0.25, 0.25, 0.25])) < 1e-12

    def test_su3_spectrum(self):
        evals = np.sort(np.linalg.eigvalsh(heisenberg_bond(3)))
        expected = [-2 / 3] * 3 + [1 / 3] * 6
        assert np.max(np.abs(evals - expected)) < 1e-12

    @pytest.mark.parametrize("n", [2, 3])
    def test_traceless(self, n):
        assert abs(np.trace(heisenberg_bond(n))) < 1e-13

    @pytest.mark.parametrize("n", [2, 3])
    def test_su_n_symmetry(self, n):
        h = heisenberg_bond(n)
        eye = np.eye(n)
        for t in su_generators(n).matrices:
            collective = np.kron(t, eye) + np.kron(eye, t)
            comm = h @ collective - collective @ h
            assert np.max(np.abs(comm)) < 1e-12

    @pytest.mark.parametrize("n", [2, 3])
    def test_bond_extremes_match_spectrum(self, n):
        evals = np.linalg.eigvalsh(heisenberg_bond(n))
        lo, hi = bond_extremes(n)
        assert abs(evals[0] - lo) < 1e-13 and abs(evals[-1] - hi) < 1e-13


class TestDisorderSampler:
    def test_inverse_cdf_formula(self):
        # alpha = 0.5: J = U^(1/alpha) = U^2
        assert abs(coupling_from_uniform(0.25, 0.5) - 0.0625) < 1e-15

    def test_uniform_special_case_mean(self):
        r = sample_couplings(1.0, 10**6 + 1, seed=123)
        assert abs(np.mean(r.couplings) - 0.5) < 0.002

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
    def test_mean_matches_closed_form(self, alpha):
        n = 10**6
        r = sample_couplings(alpha, n + 1, seed=99)
        mean = np.mean(r.couplings)
        expected = alpha / (alpha + 1.0)
        stderr = np.std(r.couplings, ddof=1) / np.sqrt(n)
        assert abs(mean - expected) < 3 * stderr

    def test_log_ratio_of_sorted_pairs(self):
        # typical ratio exp<ln J2/J1> = e^(1/alpha) over sorted pairs
        alpha = 0.3
        r = sample_couplings(alpha, 2 * 10**6 + 1, seed=7)
        pairs = r.couplings.reshape(-1, 2)
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        mean_log_ratio = np.mean(np.log(hi / lo))
        assert abs(mean_log_ratio - 1 / alpha) < 0.01 / alpha

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
    def test_kolmogorov_smirnov_against_cdf(self, alpha):
        r = sample_couplings(alpha, 10**5 + 1, seed=31)
        result = scipy.stats.kstest(r.couplings, lambda x: np.power(x, alpha))
        assert result.pvalue > 0.01

    def test_bit_exact_reproducibility(self):
        a = sample_couplings(0.5, 64, seed=2024)
        b = sample_couplings(0.5, 64, seed=2024)
        assert np.array_equal(a.couplings, b.couplings)

    def test_per_index_regeneration(self):
        r = sample_couplings(0.7, 40, seed=11)
        for i in range(39):
            assert coupling_at(0.7, 11, i) == r.couplings[i]

    def test_couplings_in_half_open_unit_interval(self):
        r = sample_couplings(0.3, 20001, seed=5)
        assert np.all(r.couplings > 0.0) and np.all(r.couplings <= 1.0)

    def test_json_round_trip_bit_exact(self):
        r = sample_couplings(0.4, 16, seed=77)
        back = DisorderRealization.from_json(r.to_json())
        assert back.alpha == r.alpha and back.seed == r.seed
        assert np.array_equal(back.couplings, r.couplings)

    def test_uniform_chain_limit(self):
        r = sample_couplings(math.inf, 8, seed=0)
        assert np.array_equal(r.couplings, np.ones(7))

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            sample_couplings(0.0, 10, seed=0)
        with pytest.raises(ValueError):
            sample_couplings(-1.0, 10, seed=0)


class TestSubspaceWeights:
    @pytest.mark.parametrize("n", [2, 3])
    def test_infinite_temperature_gives_zero(self, n):
        w = SubspaceWeights(n, p_sym=n * (n + 1) / 2 / n**2,
                            p_anti=n * (n - 1) / 2 / n**2)
        assert abs(spin_spin_from_weights(w)) < 1e-15

    def test_su2_triplet_value(self):
        assert abs(spin_spin_from_weights(SubspaceWeights(2, 1.0, 0.0)) - 0.25) < 1e-15

    def test_su3_antisymmetric_value(self):
        assert abs(spin_spin_from_weights(SubspaceWeights(3, 0.0, 1.0)) + 2 / 3) < 1e-15

    @pytest.mark.parametrize("n", [2, 3])
    def test_range_endpoints_match_bond_extremes(self, n):
        lo, hi = bond_extremes(n)
        assert abs(spin_spin_from_weights(SubspaceWeights(n, 1.0, 0.0)) - hi) < 1e-15
        assert abs(spin_spin_from_weights(SubspaceWeights(n, 0.0, 1.0)) - lo) < 1e-15

    def test_dimension_bookkeeping(self):
        w = SubspaceWeights(3, 0.5, 0.5)
        assert w.d_sym == 6 and w.d_anti == 3
        assert w.d_sym + w.d_anti == 9

    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            SubspaceWeights(2, 0.7, 0.7)


class TestChainEnergy:
    def test_su2_uniform_block_energy_is_zero(self):
        state = build_su2_initial(4)
        r = DisorderRealization(1.0, 4, 0, np.array([1.0, 1.0, 1.0]))
        assert abs(chain_energy(state, r)) < 1e-10

    def test_su2_closed_form_for_random_couplings(self):
        state = build_su2_initial(8)
        r = sample_couplings(0.5, 8, seed=3)
        j = r.couplings
        expected = (0.25 * (j[0] + j[2]) - 0.5 * j[1]
                    + 0.25 * (j[4] + j[6]) - 0.5 * j[5])
        assert abs(chain_energy(state, r) - expected) < 1e-10

    def test_length_mismatch_rejected(self):
        state = build_su2_initial(4)
        r = sample_couplings(0.5, 8, seed=3)
        with pytest.raises(ValueError):
            chain_energy(state, r)
