import numpy as np
import pytest

from platoonsec.graph import (Spectrum, Topology, builtin, eigenvalues_symmetric,
                              extended_laplacian, h_matrix, is_leader_connected,
                              laplacian)

from conftest import charpoly_eigenvalues, random_topology

EXTENDED_BD = np.array([
    [1, -1, 0, 0, 0, 0, 0],
    [-1, 2, -1, 0, 0, 0, 0],
    [0, -1, 2, -1, 0, 0, 0],
    [0, 0, -1, 2, -1, 0, 0],
    [0, 0, 0, -1, 2, -1, 0],
    [0, 0, 0, 0, -1, 2, -1],
    [0, 0, 0, 0, 0, -1, 1],
], dtype=float)

EXTENDED_SWITCHED = np.array([
    [3, -1, -1, -1, 0, 0, 0],
    [-1, 2, 0, 0, -1, 0, 0],
    [-1, 0, 2, 0, 0, -1, 0],
    [-1, 0, 0, 2, 0, 0, -1],
    [0, -1, 0, 0, 1, 0, 0],
    [0, 0, -1, 0, 0, 1, 0],
    [0, 0, 0, -1, 0, 0, 1],
], dtype=float)


def two_path():
    return Topology(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.0, 0.0]))


class TestLaplacian:
    def test_two_follower_line(self):
        L = laplacian(two_path())
        assert np.array_equal(L, [[1, -1], [-1, 1]])

    def test_bd_row_sums_zero(self, bd_topology):
        assert np.allclose(laplacian(bd_topology).sum(axis=1), 0.0)

    def test_bd_matches_extended_minus_leader_and_pinning(self, bd_topology):
        L = laplacian(bd_topology)
        reduced = EXTENDED_BD[1:, 1:] - np.diag(bd_topology.pinning)
        assert np.array_equal(L, reduced)


class TestHMatrix:
    def test_single_pinned_follower(self):
        t = Topology(np.zeros((1, 1)), np.array([1.0]))
        assert np.array_equal(h_matrix(t), [[1.0]])

    def test_bd_equals_extended_with_leader_deleted(self, bd_topology):
        assert np.array_equal(h_matrix(bd_topology), EXTENDED_BD[1:, 1:])

    def test_switched_equals_extended_with_leader_deleted(self, switched_topology):
        assert np.array_equal(h_matrix(switched_topology), EXTENDED_SWITCHED[1:, 1:])


class TestExtendedLaplacian:
    def test_bd_reference_matrix(self, bd_topology):
        assert np.array_equal(extended_laplacian(bd_topology), EXTENDED_BD)

    def test_switched_reference_matrix(self, switched_topology):
        assert np.array_equal(extended_laplacian(switched_topology), EXTENDED_SWITCHED)

    def test_no_pinning_gives_zero_leader_row(self):
        ext = extended_laplacian(two_path())
        assert np.array_equal(ext[0], np.zeros(3))
        assert np.array_equal(ext[:, 0], np.zeros(3))


class TestEigenvaluesSymmetric:
    def test_bd_extreme_eigenvalues(self, bd_topology):
        spec = eigenvalues_symmetric(h_matrix(bd_topology), tag="H")
        assert spec.lam_min == pytest.approx(0.058, abs=1e-3)
        assert spec.lam_max == pytest.approx(3.77, abs=1e-2)

    def test_identity(self):
        spec = eigenvalues_symmetric(np.eye(3))
        assert spec.eigenvalues == (1.0, 1.0, 1.0)

    def test_switched_peak_matches_charpoly_oracle(self, switched_topology):
        spec = eigenvalues_symmetric(h_matrix(switched_topology))
        # the switched graph is three copies of one pinned pair, so its
        # spectrum is the 2x2 block spectrum with multiplicity three; the
        # polynomial oracle is only accurate on the simple block roots
        block = np.array([[2.0, -1.0], [-1.0, 1.0]])
        oracle = charpoly_eigenvalues(block)
        assert spec.lam_max == pytest.approx(oracle[-1], abs=1e-8)
        assert spec.lam_min == pytest.approx(oracle[0], abs=1e-8)
        # frozen from the oracle: (3 + sqrt(5)) / 2
        assert spec.lam_max == pytest.approx(2.618033988749895, abs=1e-9)

    def test_rejects_non_symmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            eigenvalues_symmetric(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_matches_charpoly_oracle_on_small_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            m = rng.normal(size=(n, n))
            m = (m + m.T) / 2
            ours = np.array(eigenvalues_symmetric(m).eigenvalues)
            oracle = charpoly_eigenvalues(m)
            assert np.max(np.abs(ours - oracle)) < 1e-8

    def test_eigenvalue_sum_equals_trace(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            m = rng.normal(size=(n, n)) * 10.0
            m = (m + m.T) / 2
            spec = eigenvalues_symmetric(m)
            assert sum(spec.eigenvalues) == pytest.approx(np.trace(m), abs=1e-9 * max(1, abs(np.trace(m))))

    def test_spectrum_is_ascending_with_multiplicity(self, switched_topology):
        spec = eigenvalues_symmetric(h_matrix(switched_topology))
        vals = np.array(spec.eigenvalues)
        assert len(vals) == 6
        assert np.all(np.diff(vals) >= -1e-12)
        # triple eigenvalue pair is preserved, not deduplicated
        assert np.sum(np.isclose(vals, vals[0], atol=1e-9)) == 3


class TestConnectivity:
    def test_bd_connected(self, bd_topology):
        assert is_leader_connected(bd_topology)

    def test_no_pinning_disconnected(self):
        assert not is_leader_connected(two_path())

    def test_disconnected_pairs_one_pinned(self):
        adj = np.zeros((4, 4))
        adj[0, 1] = adj[1, 0] = 1.0
        adj[2, 3] = adj[3, 2] = 1.0
        t = Topology(adj, np.array([1.0, 0.0, 0.0, 0.0]))
        assert not is_leader_connected(t)


class TestBuiltin:
    def test_bd_shape(self, bd_topology):
        assert bd_topology.n_followers == 6
        assert np.array_equal(bd_topology.pinning, [1, 0, 0, 0, 0, 0])
        assert bd_topology.edges() == [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]

    def test_switched_shape(self, switched_topology):
        assert np.array_equal(switched_topology.pinning, [1, 1, 1, 0, 0, 0])
        assert switched_topology.edges() == [(0, 3), (1, 4), (2, 5)]

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown builtin"):
            builtin("ring")

    def test_builtins_are_fixed_size(self):
        with pytest.raises(TypeError):
            builtin("BD", n=1)


class TestTopologyValidation:
    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            Topology(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros(2))

    def test_rejects_self_loops(self):
        with pytest.raises(ValueError, match="diagonal"):
            Topology(np.eye(2), np.zeros(2))

    def test_rejects_bad_pinning(self):
        with pytest.raises(ValueError, match="pinning"):
            Topology(np.zeros((2, 2)), np.array([2.0, 0.0]))


class TestInvariants:
    def test_h_matrix_is_extended_minus_leader_everywhere(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            t = random_topology(rng)
            ext = extended_laplacian(t)
            assert np.array_equal(h_matrix(t), ext[1:, 1:])

    def test_connected_spectra_positive(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            t = random_topology(rng)
            spec = eigenvalues_symmetric(h_matrix(t))
            assert spec.lam_min > 0

    def test_spectrum_rejects_descending(self):
        with pytest.raises(ValueError, match="ascending"):
            Spectrum((2.0, 1.0))
