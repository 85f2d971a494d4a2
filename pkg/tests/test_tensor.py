import numpy as np
import pytest

from sunquench.tensor import (NonHermitianError, ShapeMismatchError,
                              ZeroMatrixError, contract,
                              hermitian_exponential, svd_truncate)


def _random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


class TestContract:
    def test_identity_times_vector(self):
        v = np.array([1.0, 2.0, -3.0 + 1j])
        out = contract(np.eye(3), [1], v, [0])
        assert np.allclose(out, v, atol=1e-15)

    def test_self_inner_product_is_norm_squared(self):
        x = np.array([1.0 + 1j, 2.0, -1j])
        out = contract(x.conj(), [0], x, [0])
        assert out.ndim == 0
        assert abs(out - np.sum(np.abs(x) ** 2)) < 1e-14

    def test_matrix_product_against_triple_loop(self):
        rng = np.random.default_rng(42)
        a = _random_complex(rng, (3, 4))
        b = _random_complex(rng, (4, 5))
        expected = np.zeros((3, 5), dtype=complex)
        for i in range(3):
            for j in range(5):
                for k in range(4):
                    expected[i, j] += a[i, k] * b[k, j]
        assert np.max(np.abs(contract(a, [1], b, [0]) - expected)) < 1e-13

    def test_multi_axis_contraction_matches_tensordot_loops(self):
        rng = np.random.default_rng(3)
        a = _random_complex(rng, (2, 3, 4))
        b = _random_complex(rng, (4, 3, 5))
        out = contract(a, [1, 2], b, [1, 0])
        expected = np.zeros((2, 5), dtype=complex)
        for i in range(2):
            for j in range(5):
                for k in range(3):
                    for l in range(4):
                        expected[i, j] += a[i, k, l] * b[l, k, j]
        assert np.max(np.abs(out - expected)) < 1e-13

    @pytest.mark.parametrize("seed", range(4))
    def test_bilinearity(self, seed):
        rng = np.random.default_rng(seed)
        a = _random_complex(rng, (3, 4))
        b = _random_complex(rng, (4, 2))
        scale = complex(rng.normal(), rng.normal())
        lhs = contract(scale * a, [1], b, [0])
        rhs = scale * contract(a, [1], b, [0])
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_shape_mismatch_names_axis_pair(self):
        with pytest.raises(ShapeMismatchError, match=r"a axis 1, b axis 0"):
            contract(np.ones((2, 3)), [1], np.ones((4, 2)), [0])


class TestSvdTruncate:
    def test_keep_all_diagonal(self):
        u, s, vh, info = svd_truncate(np.diag([1.0, 0.0]))
        assert info.discarded_weight == 0.0
        assert np.allclose(info.kept_singular_values[0], 1.0)

    def test_direct_discarded_weight(self):
        # singular values (sqrt(.9), sqrt(.1)); keeping one discards 0.1
        m = np.diag([np.sqrt(0.9), np.sqrt(0.1)])
        _, s, _, info = svd_truncate(m, chi_max=1)
        assert info.kept_rank == 1
        assert abs(info.discarded_weight - 0.1) < 1e-14

    def test_reconstruction_of_random_matrix(self):
        rng = np.random.default_rng(7)
        m = _random_complex(rng, (8, 8))
        u, s, vh, info = svd_truncate(m, chi_max=8, eps_max=0.0)
        assert np.max(np.abs((u * s) @ vh - m)) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_unlimited_rank_reconstructs(self, seed):
        rng = np.random.default_rng(seed)
        m = _random_complex(rng, (12, 7))
        u, s, vh, _ = svd_truncate(m)
        err = np.linalg.norm((u * s) @ vh - m) / np.linalg.norm(m)
        assert err < 1e-11

    def test_isometry_of_kept_factors(self):
        rng = np.random.default_rng(11)
        m = _random_complex(rng, (10, 6))
        u, s, vh, _ = svd_truncate(m, chi_max=3, eps_max=0.0)
        assert np.max(np.abs(u.conj().T @ u - np.eye(3))) < 1e-13
        assert np.max(np.abs(vh @ vh.conj().T - np.eye(3))) < 1e-13

    @pytest.mark.parametrize("keep", [1, 2, 3, 5])
    def test_discarded_weight_additivity(self, keep):
        # eps from keeping M ranks equals the sum of discarded normalized
        # squared singular values, and equals 1 - sum of kept ones
        rng = np.random.default_rng(keep)
        m = _random_complex(rng, (6, 6))
        full = np.linalg.svd(m, compute_uv=False)
        w = full**2 / np.sum(full**2)
        _, _, _, info = svd_truncate(m, chi_max=keep)
        assert abs(info.discarded_weight - np.sum(w[keep:])) < 1e-13
        assert abs(info.discarded_weight - (1.0 - np.sum(w[:keep]))) < 1e-13

    def test_eps_target_selects_minimal_rank(self):
        m = np.diag([2.0, 1.0, 0.5, 0.1])
        w = np.array([4.0, 1.0, 0.25, 0.01])
        w = w / w.sum()
        _, s, _, info = svd_truncate(m, eps_max=float(w[2] + w[3]) + 1e-15)
        assert info.kept_rank == 2

    def test_chi_cap_wins_when_eps_unreachable(self):
        m = np.diag([1.0, 1.0, 1.0, 1.0])
        _, s, _, info = svd_truncate(m, chi_max=2, eps_max=1e-10)
        assert info.kept_rank == 2
        assert abs(info.discarded_weight - 0.5) < 1e-14

    def test_noise_floor_drops_spurious_rank(self):
        m = np.diag([1.0, 1e-16])
        _, s, _, info = svd_truncate(m)
        assert info.kept_rank == 1

    def test_zero_matrix_raises(self):
        with pytest.raises(ZeroMatrixError):
            svd_truncate(np.zeros((3, 3)))

    def test_nonincreasing_singular_values(self):
        rng = np.random.default_rng(2)
        _, s, _, info = svd_truncate(_random_complex(rng, (9, 9)))
        assert np.all(np.diff(info.kept_singular_values) <= 1e-15)


class TestHermitianExponential:
    def test_zero_matrix_gives_identity(self):
        out = hermitian_exponential(np.zeros((3, 3)), -1j * 0.7)
        assert np.max(np.abs(out - np.eye(3))) < 1e-14

    def test_diagonal_case(self):
        h = np.diag([0.3, -1.2])
        out = hermitian_exponential(h, 0.5 - 0.25j)
        expected = np.diag(np.exp((0.5 - 0.25j) * np.array([0.3, -1.2])))
        assert np.max(np.abs(out - expected)) < 1e-13

    def test_against_taylor_series(self):
        rng = np.random.default_rng(5)
        h = _random_complex(rng, (4, 4))
        h = h + h.conj().T
        scale = -0.1j
        series = np.zeros((4, 4), dtype=complex)
        term = np.eye(4, dtype=complex)
        for k in range(21):
            series += term
            term = term @ (scale * h) / (k + 1)
        out = hermitian_exponential(h, scale)
        assert np.max(np.abs(out - series)) < 1e-12

    @pytest.mark.parametrize("seed,t", [(0, 0.3), (1, 1.0), (2, 0.05)])
    def test_unitarity_roundtrip(self, seed, t):
        rng = np.random.default_rng(seed)
        h = _random_complex(rng, (5, 5))
        h = h + h.conj().T
        forward = hermitian_exponential(h, -1j * t)
        back = hermitian_exponential(h, 1j * t)
        assert np.max(np.abs(forward @ back - np.eye(5))) < 1e-11

    def test_non_hermitian_rejected(self):
        m = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(NonHermitianError):
            hermitian_exponential(m, 1.0)
