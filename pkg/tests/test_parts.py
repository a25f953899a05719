import numpy as np
import pytest

from partforge.errors import (
    DimensionMismatchError,
    EmptyPartError,
    SingularCovarianceError,
    TooFewClustersError,
)
from partforge.oracles import oracle_lda, random_feasible_assignment
from partforge.parts import (
    compute_lda_stats,
    init_parts,
    matching_matrix,
    objective,
    part_models,
    part_models_normalized,
)


class TestLdaStats:
    def test_two_point_hand_case(self):
        X = np.array([[1.0, -1.0], [0.0, 0.0]])
        stats = compute_lda_stats(X, ridge=0.1)
        np.testing.assert_array_equal(stats.mu, [0.0, 0.0])
        np.testing.assert_allclose(stats.sigma, np.diag([1.0, 0.0]), atol=1e-15)
        np.testing.assert_allclose(stats.sigma_inv, np.diag([1 / 1.1, 10.0]), atol=1e-12)

    def test_identical_columns(self):
        X = np.tile([[2.0], [3.0]], (1, 5))
        stats = compute_lda_stats(X, ridge=0.5)
        np.testing.assert_allclose(stats.sigma, 0.0, atol=1e-12)
        np.testing.assert_allclose(stats.sigma_inv, np.eye(2) / 0.5, atol=1e-12)

    def test_inverse_residual(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((20, 200))
        stats = compute_lda_stats(X)
        residual = stats.sigma_inv @ (stats.sigma + stats.ridge * np.eye(20)) - np.eye(20)
        assert np.abs(residual).max() < 1e-6

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        stats = compute_lda_stats(rng.standard_normal((8, 50)))
        assert np.abs(stats.sigma - stats.sigma.T).max() < 1e-10

    def test_zero_ridge_singular(self):
        X = np.tile([[1.0], [1.0]], (1, 4))
        with pytest.raises(SingularCovarianceError):
            compute_lda_stats(X, ridge=0.0)


class TestPartModels:
    def _identity_stats(self, dim, ridge=1e-9):
        from partforge.parts import LdaStats
        return LdaStats(mu=np.zeros(dim), sigma=np.eye(dim),
                        sigma_inv=np.eye(dim), ridge=ridge)

    def test_mean_of_assigned_descriptors(self):
        # identity whitening, zero mean: each part model is the mean of
        # its one assigned region per image
        X = np.array([[1.0, 0.0, 3.0, 0.0], [0.0, 2.0, 0.0, 4.0]])
        A = np.array([[1.0, 0.0, 1.0, 0.0]])  # 2 images, 2 regions each
        W = part_models(A, X, self._identity_stats(2), n_images=2)
        np.testing.assert_allclose(W[:, 0], [(1 + 3) / 2, 0.0])

    def test_zero_row_raises(self):
        X = np.ones((2, 4))
        A = np.zeros((2, 4))
        A[0, 0] = 1.0
        with pytest.raises(EmptyPartError):
            part_models(A, X, self._identity_stats(2), n_images=1)

    def test_matrix_path_equals_normalized_path_on_feasible(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            dim, regions, images = 6, 5, 3
            n_parts = int(rng.integers(1, 5))
            X = rng.standard_normal((dim, regions * images))
            A = random_feasible_assignment(n_parts, regions, images, rng)
            stats = compute_lda_stats(X, ridge=0.2)
            fast = part_models(A, X, stats, images)
            normalized = part_models_normalized(A, X, stats)
            np.testing.assert_allclose(fast, normalized, atol=1e-8)

    def test_linearity_offset_algebra(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((4, 12))
        stats = compute_lda_stats(X, ridge=0.3)
        A1 = rng.uniform(0.1, 1.0, size=(3, 12))
        A2 = rng.uniform(0.1, 1.0, size=(3, 12))
        joint = part_models(A1 + A2, X, stats, n_images=4)
        offset = stats.sigma_inv @ (stats.mu[:, None] @ np.ones((1, 3)))
        split = part_models(A1, X, stats, 4) + part_models(A2, X, stats, 4) + offset
        np.testing.assert_allclose(joint, split, atol=1e-9)


class TestMatchingMatrix:
    def test_basis_vectors(self):
        W = np.array([[1.0], [0.0], [0.0]])
        X = np.eye(3)
        np.testing.assert_array_equal(matching_matrix(W, X), [[1.0, 0.0, 0.0]])

    def test_shape_contract(self):
        rng = np.random.default_rng(4)
        M = matching_matrix(rng.standard_normal((5, 2)), rng.standard_normal((5, 3)))
        assert M.shape == (2, 3)

    def test_scalar_recomputation(self):
        rng = np.random.default_rng(5)
        W = rng.standard_normal((7, 4))
        X = rng.standard_normal((7, 9))
        M = matching_matrix(W, X)
        for _ in range(20):
            p = int(rng.integers(4))
            r = int(rng.integers(9))
            scalar = sum(float(W[i, p]) * float(X[i, r]) for i in range(7))
            assert abs(M[p, r] - scalar) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            matching_matrix(np.ones((3, 2)), np.ones((4, 5)))


class TestObjective:
    def test_zero_assignment(self):
        assert objective(np.zeros((2, 3)), np.ones((2, 3))) == 0.0

    def test_identity_trace(self):
        assert objective(np.eye(2), np.array([[2.0, 1.0], [1.0, 3.0]])) == 5.0

    def test_elementwise_sum_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            A = rng.uniform(size=(10, 50))
            M = rng.standard_normal((10, 50))
            slow = sum(float(A[i, j]) * float(M[i, j])
                       for i in range(10) for j in range(50))
            assert abs(objective(A, M) - slow) < 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            objective(np.ones((2, 2)), np.ones((2, 3)))

    def test_composed_objective_equals_scalar_form(self):
        # <A, W(A)^T X> via the composed calls equals the explicit double sum
        rng = np.random.default_rng(7)
        X = rng.standard_normal((5, 12))
        stats = compute_lda_stats(X, ridge=0.2)
        A = random_feasible_assignment(3, 4, 3, rng)
        W = part_models(A, X, stats, 3)
        M = matching_matrix(W, X)
        composed = objective(A, M)
        scalar = 0.0
        for p in range(3):
            for r in range(12):
                dot = sum(float(W[i, p]) * float(X[i, r]) for i in range(5))
                scalar += float(A[p, r]) * dot
        assert abs(composed - scalar) < 1e-8

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(8)
        W = rng.standard_normal((6, 4))
        X = rng.standard_normal((6, 10))
        A = rng.uniform(size=(4, 10))
        perm = rng.permutation(4)
        np.testing.assert_array_equal(matching_matrix(W[:, perm], X),
                                      matching_matrix(W, X)[perm])
        M = matching_matrix(W, X)
        assert objective(A[perm], M[perm]) == pytest.approx(objective(A, M), abs=1e-12)


class TestOracleLda:
    def test_matches_matrix_path(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            dim = int(rng.integers(2, 9))
            regions = int(rng.integers(2, 6))
            images = int(rng.integers(1, 4))
            n_parts = int(rng.integers(1, regions + 1))
            X = rng.standard_normal((dim, regions * images))
            stats = compute_lda_stats(X, ridge=0.15)
            A = random_feasible_assignment(n_parts, regions, images, rng)
            slow = oracle_lda(A, X, stats.mu, stats.sigma_inv)
            fast = part_models(A, X, stats, images)
            assert np.abs(slow - fast).max() < 1e-8

    def test_single_region_identity(self):
        X = np.array([[2.0, 5.0], [1.0, -1.0]])
        A = np.array([[1.0, 0.0]])
        W = oracle_lda(A, X, np.zeros(2), np.eye(2))
        np.testing.assert_allclose(W[:, 0], [2.0, 1.0])

    def test_permuting_parts_permutes_columns(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((3, 6))
        A = random_feasible_assignment(2, 3, 2, rng)
        W = oracle_lda(A, X, np.zeros(3), np.eye(3))
        W_swapped = oracle_lda(A[::-1], X, np.zeros(3), np.eye(3))
        np.testing.assert_array_equal(W_swapped, W[:, ::-1])


class TestInitParts:
    def _setup(self, seed=0):
        rng = np.random.default_rng(seed)
        dim = 8
        prototype = np.zeros(dim)
        prototype[0] = 4.0
        images = []
        in_group = []
        for i in range(6):
            regions = rng.standard_normal((dim, 10)) * 0.3
            if i < 3:  # group images carry the prototype
                regions[:, 0] = prototype
            images.append(regions)
            in_group.append(i < 3)
        group_regions = np.hstack([images[i] for i in range(3)])
        stats = compute_lda_stats(np.hstack(images), ridge=0.5)
        return group_regions, images, np.array(in_group), stats

    def test_discriminative_candidate_ranked_first(self):
        group_regions, images, in_group, stats = self._setup()
        bank = init_parts(group_regions, images, in_group, stats, n_parts=1,
                          seed=0, candidate_factor=3)
        # best part must respond to the planted prototype direction
        responses = [float((bank[:, 0] @ img).max()) for img in images]
        inside = np.mean([r for r, g in zip(responses, in_group) if g])
        outside = np.mean([r for r, g in zip(responses, in_group) if not g])
        assert inside > outside

    def test_too_few_clusters(self):
        group_regions, images, in_group, stats = self._setup()
        with pytest.raises(TooFewClustersError):
            init_parts(group_regions[:, :3], images, in_group, stats,
                       n_parts=5, seed=0)

    def test_deterministic(self):
        group_regions, images, in_group, stats = self._setup()
        first = init_parts(group_regions, images, in_group, stats, 3, seed=7)
        second = init_parts(group_regions, images, in_group, stats, 3, seed=7)
        np.testing.assert_array_equal(first, second)

    def test_planted_coverage_beats_random_pick(self):
        # candidates chosen by response ratio should cover the planted
        # prototypes at least as well as randomly chosen centroids
        from partforge.grouping import kmeans as km

        wins = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            dim, n_proto = 10, 3
            prototypes = rng.standard_normal((n_proto, dim))
            prototypes *= 3.0 / np.linalg.norm(prototypes, axis=1, keepdims=True)
            images, in_group = [], []
            for i in range(8):
                regions = rng.standard_normal((dim, 12)) * 0.4
                if i < 4:
                    for p in range(n_proto):
                        regions[:, p] = prototypes[p] + 0.05 * rng.standard_normal(dim)
                images.append(regions)
                in_group.append(i < 4)
            group_regions = np.hstack(images[:4])
            stats = compute_lda_stats(np.hstack(images), ridge=0.5)
            bank = init_parts(group_regions, images, np.array(in_group), stats,
                              n_parts=n_proto, seed=seed)

            def coverage(candidate_matrix):
                raw = (np.linalg.inv(stats.sigma_inv) @ candidate_matrix
                       + stats.mu[:, None])
                nearest = np.argmin(
                    ((raw.T[:, None, :] - prototypes[None, :, :]) ** 2).sum(axis=2),
                    axis=1)
                return len(set(nearest.tolist()))

            pool = km(group_regions.T, 3 * n_proto, seed=seed).vectors
            pick = rng.choice(pool.shape[0], size=n_proto, replace=False)
            random_candidates = stats.sigma_inv @ (pool[pick].T - stats.mu[:, None])
            if coverage(bank) >= coverage(random_candidates):
                wins += 1
        assert wins >= 15
