import numpy as np
import pytest

from sunquench import ed
from sunquench.model import heisenberg_bond
from sunquench.mps import (CenterMisplacedError, CheckpointFormatError,
                           MatrixProductState, RdmCapError)
from sunquench.tensor import hermitian_exponential


def random_mps(phys_dim, length, seed, chi=None):
    """Generic low-rank normalized MPS from a seeded dense vector."""
    rng = np.random.default_rng(seed)
    vec = rng.normal(size=phys_dim**length) + 1j * rng.normal(
        size=phys_dim**length)
    return ed.dense_to_mps(vec / np.linalg.norm(vec), phys_dim, chi_max=chi)


def su2_singlet_pair():
    vec = np.zeros(4, dtype=complex)
    vec[1] = 1 / np.sqrt(2)
    vec[2] = -1 / np.sqrt(2)
    return ed.dense_to_mps(vec, 2)


def su2_triplet_pair():
    return MatrixProductState.product_state([[1, 0], [1, 0]])


class TestCanonicalize:
    def test_product_state_unchanged_up_to_phase(self):
        psi = MatrixProductState.random_product_state(2, 5, seed=1)
        for center in (0, 2, 4):
            can = psi.canonicalize(center)
            assert abs(abs(can.overlap(psi)) - 1) < 1e-12
            assert can.bond_dims == [1, 1, 1, 1]

    def test_overlap_preserved_after_two_moves(self):
        psi = random_mps(2, 6, seed=3)
        moved = psi.canonicalize(3).canonicalize(0)
        assert abs(moved.overlap(psi)) >= 1 - 1e-10

    def test_idempotent_up_to_phase(self):
        psi = random_mps(2, 6, seed=4)
        once = psi.canonicalize(2)
        twice = once.canonicalize(2)
        assert abs(abs(twice.overlap(once)) - 1) < 1e-12

    @pytest.mark.parametrize("center", [0, 3, 5])
    def test_isometry_conditions(self, center):
        psi = random_mps(2, 6, seed=5)
        can = psi.canonicalize(center)
        assert can.isometry_defect() < 1e-10

    def test_norm_restored(self):
        psi = random_mps(3, 4, seed=6)
        assert abs(psi.canonicalize(1).norm() - 1) < 1e-8

    def test_move_center_matches_full_canonicalize(self):
        psi = random_mps(2, 6, seed=7).canonicalize(0)
        via_moves = psi.move_center_to(4)
        assert via_moves.isometry_defect() < 1e-10
        assert abs(abs(via_moves.overlap(psi)) - 1) < 1e-10


class TestTwoSiteGate:
    def test_identity_gate_keeps_state(self):
        psi = random_mps(2, 4, seed=8).canonicalize(1)
        gate = np.eye(4).reshape(2, 2, 2, 2)
        out, info = psi.apply_two_site_gate(1, gate)
        assert info.discarded_weight == 0.0
        assert abs(abs(out.overlap(psi)) - 1) < 1e-12

    def test_triplet_pair_acquires_global_phase(self):
        # |up,up> is a +1/4 eigenstate of S.S: gate exp(-i dt J h) is a phase
        dt, coupling = 0.1, 0.8
        psi = su2_triplet_pair().canonicalize(0)
        gate = hermitian_exponential(heisenberg_bond(2),
                                     -1j * dt * coupling).reshape(2, 2, 2, 2)
        out, info = psi.apply_two_site_gate(0, gate)
        overlap = out.overlap(psi)
        assert abs(overlap - np.exp(1j * dt * coupling * 0.25).conjugate()) < 1e-12
        assert abs(out.bond_expectations(heisenberg_bond(2))[0] - 0.25) < 1e-12

    def test_random_gate_matches_dense_application(self):
        rng = np.random.default_rng(9)
        psi = random_mps(2, 4, seed=9).canonicalize(2)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        gate = hermitian_exponential(h + h.conj().T, -0.3j)
        out, _ = psi.apply_two_site_gate(2, gate.reshape(2, 2, 2, 2))

        vec = ed.mps_to_dense(psi)
        shaped = vec.reshape(4, 2, 2)
        dense = np.einsum("abcd,ucd...->uab...", gate.reshape(2, 2, 2, 2),
                          shaped).reshape(-1)
        got = ed.mps_to_dense(out)
        phase = np.vdot(got, dense)
        phase /= abs(phase)
        assert np.max(np.abs(got * phase - dense)) < 1e-11

    def test_unitary_gate_preserves_norm(self):
        psi = random_mps(2, 6, seed=10).canonicalize(3)
        gate = hermitian_exponential(heisenberg_bond(2), -0.25j).reshape(2, 2, 2, 2)
        out, _ = psi.apply_two_site_gate(3, gate)
        assert abs(out.norm() - 1) < 1e-12

    def test_truncation_reports_eps_and_renormalizes(self):
        psi = random_mps(2, 6, seed=11).canonicalize(2)
        gate = np.eye(4).reshape(2, 2, 2, 2)
        out, info = psi.apply_two_site_gate(2, gate, chi_max=2)
        assert info.kept_rank <= 2
        assert info.discarded_weight > 0
        assert abs(out.norm() - 1) < 1e-12

    def test_center_misplacement_is_an_error(self):
        psi = random_mps(2, 6, seed=12).canonicalize(0)
        gate = np.eye(4).reshape(2, 2, 2, 2)
        with pytest.raises(CenterMisplacedError):
            psi.apply_two_site_gate(3, gate)

    def test_gauge_invariance_of_expectations(self):
        psi = random_mps(2, 6, seed=13)
        bond = heisenberg_bond(2)
        reference = psi.bond_expectations(bond)
        for center in (0, 2, 5, 1):
            psi = psi.canonicalize(center)
            assert np.max(np.abs(psi.bond_expectations(bond) - reference)) < 1e-10


class TestOverlapAndExpectations:
    def test_self_overlap_is_one(self):
        psi = random_mps(2, 5, seed=14)
        assert abs(psi.overlap(psi) - 1) < 1e-12

    def test_orthogonal_product_states(self):
        a = MatrixProductState.product_state([[1, 0]] * 3)
        b = MatrixProductState.product_state([[1, 0], [1, 0], [0, 1]])
        assert abs(a.overlap(b)) < 1e-15

    def test_overlap_matches_dense_inner_product(self):
        a = random_mps(2, 5, seed=15)
        b = random_mps(2, 5, seed=16)
        dense = np.vdot(ed.mps_to_dense(a), ed.mps_to_dense(b))
        assert abs(a.overlap(b) - dense) < 1e-12

    def test_triplet_and_singlet_pair_values(self):
        bond = heisenberg_bond(2)
        assert abs(su2_triplet_pair().two_site_expectation(0, 1, bond) - 0.25) < 1e-12
        assert abs(su2_singlet_pair().two_site_expectation(0, 1, bond) + 0.75) < 1e-12

    def test_cross_block_correlator_vanishes(self):
        # sites in different exact singlet factors are uncorrelated
        from sunquench.initial import build_su2_initial
        psi = build_su2_initial(8)
        bond = heisenberg_bond(2)
        assert abs(psi.two_site_expectation(2, 5, bond)) < 1e-12

    @pytest.mark.parametrize("i,j", [(0, 1), (0, 3), (1, 4), (2, 5)])
    def test_general_pairs_match_dense(self, i, j):
        psi = random_mps(2, 6, seed=17)
        bond = heisenberg_bond(2)
        dense = ed.dense_two_site_expectation(ed.mps_to_dense(psi), 2, i, j, bond)
        assert abs(psi.two_site_expectation(i, j, bond) - dense.real) < 1e-11

    def test_non_hermitian_operator_returns_complex(self):
        rng = np.random.default_rng(18)
        op = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        psi = random_mps(2, 4, seed=18)
        val = psi.two_site_expectation(0, 1, op)
        dense = ed.dense_two_site_expectation(ed.mps_to_dense(psi), 2, 0, 1, op)
        assert isinstance(val, complex)
        assert abs(val - dense) < 1e-11

    def test_index_out_of_range(self):
        psi = random_mps(2, 4, seed=19)
        with pytest.raises(IndexError):
            psi.two_site_expectation(2, 4, heisenberg_bond(2))


class TestReducedDensityMatrix:
    def test_product_state_is_pure(self):
        psi = MatrixProductState.random_product_state(2, 5, seed=20)
        rdm = psi.reduced_density_matrix(1, 2)
        evals = np.sort(rdm.eigenvalues())
        assert abs(evals[-1] - 1) < 1e-12
        assert rdm.entropy() < 1e-12

    def test_su2_block_single_site_maximally_mixed(self):
        from sunquench.initial import build_su2_initial
        rdm = build_su2_initial(4).reduced_density_matrix(0, 1)
        assert np.max(np.abs(rdm.matrix - np.eye(2) / 2)) < 1e-12

    def test_su2_block_pair_is_triplet_projector(self):
        from sunquench.initial import build_su2_initial
        rdm = build_su2_initial(4).reduced_density_matrix(0, 2)
        evals = np.sort(rdm.eigenvalues())
        assert np.max(np.abs(evals - [0, 1 / 3, 1 / 3, 1 / 3])) < 1e-12
        assert abs(rdm.entropy() - np.log(3)) < 1e-10

    @pytest.mark.parametrize("start,size", [(0, 1), (1, 2), (2, 3), (0, 3)])
    def test_matches_dense_partial_trace(self, start, size):
        psi = random_mps(2, 6, seed=21)
        dense_rho = ed.dense_block_rdm(ed.mps_to_dense(psi), 2, start, size)
        rdm = psi.reduced_density_matrix(start, size)
        assert np.max(np.abs(rdm.matrix - dense_rho)) < 1e-10

    def test_invariants(self):
        psi = random_mps(2, 8, seed=22, chi=6)
        rdm = psi.reduced_density_matrix(2, 3)
        assert np.max(np.abs(rdm.matrix - rdm.matrix.conj().T)) < 1e-10
        assert abs(np.trace(rdm.matrix).real - 1) < 1e-10
        assert np.min(rdm.eigenvalues()) > -1e-10
        assert 0 <= rdm.entropy() <= 3 * np.log(2) + 1e-12

    def test_cap_error_names_dimension(self):
        psi = random_mps(2, 8, seed=23, chi=4)
        with pytest.raises(RdmCapError, match="256"):
            psi.reduced_density_matrix(0, 8, max_dim=128)

    def test_sweep_agrees_with_single_blocks(self):
        psi = random_mps(2, 8, seed=24, chi=8)
        positions = {2: [0, 3, 5], 3: [1, 4]}
        swept = psi.block_entropy_sweep(positions)
        for size, starts in positions.items():
            for start in starts:
                single = psi.reduced_density_matrix(start, size).entropy()
                assert abs(swept[(start, size)] - single) < 1e-10


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path):
        psi = random_mps(3, 5, seed=25, chi=7).canonicalize(2)
        path = tmp_path / "state.ckpt"
        psi.save(path, metadata={"seed": 25, "alpha": 0.5, "t_reached": 1.5})
        back, meta = MatrixProductState.load(path)
        assert meta["seed"] == 25 and meta["t_reached"] == 1.5
        assert back.center == 2
        assert all(np.array_equal(a, b)
                   for a, b in zip(psi.tensors, back.tensors))

    def test_corrupt_payload_detected(self, tmp_path):
        psi = random_mps(2, 4, seed=26)
        path = tmp_path / "state.ckpt"
        psi.save(path)
        raw = bytearray(path.read_bytes())
        raw[40] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointFormatError):
            MatrixProductState.load(path)

    def test_bad_magic_detected(self, tmp_path):
        psi = random_mps(2, 4, seed=27)
        path = tmp_path / "state.ckpt"
        psi.save(path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        # hash check fires first; both are format errors
        with pytest.raises(CheckpointFormatError):
            MatrixProductState.load(path)

    def test_magic_bytes_and_layout(self, tmp_path):
        psi = MatrixProductState.product_state([[1, 0], [0, 1]])
        path = tmp_path / "state.ckpt"
        psi.save(path)
        raw = path.read_bytes()
        assert raw[:4] == b"MPSC"
        version, length, phys = np.frombuffer(raw[4:16], dtype="<u4")
        assert (version, length, phys) == (1, 2, 2)
