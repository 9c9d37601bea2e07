import numpy as np
import pytest

from trdecomp.core import (
    core_unfolding,
    mode_n_unfolding,
    rotation_modes,
    subchain_tensor,
    subchain_unfolding,
    tr_reconstruct,
)
from trdecomp.sampling import (
    SamplingSpec,
    check_prob_vector,
    complete_sample_batch,
    core_dist_euclidean,
    core_dist_leverage,
    core_distributions,
    leverage_scores,
    optimal_distribution_oracle,
    product_row_distribution,
    sample_rows_batch,
    sample_subchain_fibers,
    uniform_dist,
    variance_functional,
)

from helpers import leverage_by_svd, linear_pos, product_dist_by_enumeration


def random_cores(rng, dims, ranks):
    n = len(dims)
    return [
        rng.standard_normal((ranks[k], dims[k], ranks[(k + 1) % n]))
        for k in range(n)
    ]


class TestSamplingSpec:
    def test_validation(self):
        SamplingSpec("leverage", "sweep")
        with pytest.raises(ValueError):
            SamplingSpec("bogus")
        with pytest.raises(ValueError):
            SamplingSpec("uniform", "hourly")


class TestLeverageScores:
    def test_orthonormal_rows_given(self):
        m = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_allclose(leverage_scores(m), [1.0, 1.0, 0.0], atol=1e-14)

    def test_orthonormal_columns(self):
        rng = np.random.default_rng(0)
        q, _ = np.linalg.qr(rng.standard_normal((7, 3)))
        np.testing.assert_allclose(
            leverage_scores(q), (q * q).sum(axis=1), atol=1e-13)

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((6, 2))
        expected, rank = leverage_by_svd(m)
        scores = leverage_scores(m)
        np.testing.assert_allclose(scores, expected, atol=1e-12)
        assert scores.sum() == pytest.approx(rank, abs=1e-10)

    def test_zero_matrix(self):
        np.testing.assert_array_equal(leverage_scores(np.zeros((4, 2))), np.zeros(4))


class TestCoreDistributions:
    def test_leverage_orthonormal_block(self):
        # unfolding rows: 2x2 identity stacked over a zero row
        mat = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        core = mat.reshape(3, 2, 1, order="F").transpose(1, 0, 2)
        assert core_unfolding(core).shape == (3, 2)
        np.testing.assert_array_equal(core_unfolding(core), mat)
        np.testing.assert_allclose(core_dist_leverage(core), [0.5, 0.5, 0.0], atol=1e-14)

    def test_leverage_rank_one(self):
        v = np.array([1.0, -2.0, 3.0])
        core = v.reshape(1, 3, 1)
        np.testing.assert_allclose(
            core_dist_leverage(core), v**2 / np.sum(v**2), atol=1e-14)

    def test_leverage_matches_oracle(self):
        rng = np.random.default_rng(2)
        core = rng.standard_normal((2, 6, 2))
        scores, rank = leverage_by_svd(core_unfolding(core))
        np.testing.assert_allclose(
            core_dist_leverage(core), scores / rank, atol=1e-12)

    def test_leverage_zero_core(self):
        with pytest.raises(ValueError):
            core_dist_leverage(np.zeros((2, 3, 2)))

    def test_euclidean_examples(self):
        rng = np.random.default_rng(3)
        slices = [rng.standard_normal((2, 2)) for _ in range(2)]
        slices = [s / np.linalg.norm(s) for s in slices]  # equal-norm slices
        core = np.stack(slices, axis=1)
        p = core_dist_euclidean(core)
        np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)

        core = np.zeros((1, 2, 1))
        core[0, :, 0] = [1.0, np.sqrt(3.0)]  # squared slice norms 1 and 3
        np.testing.assert_allclose(core_dist_euclidean(core), [0.25, 0.75], atol=1e-14)

        single = np.full((2, 1, 2), 0.3)
        np.testing.assert_allclose(core_dist_euclidean(single), [1.0])

        with pytest.raises(ValueError):
            core_dist_euclidean(np.zeros((2, 2, 2)))

    def test_prob_vector_invariants(self):
        rng = np.random.default_rng(4)
        cores = random_cores(rng, (4, 5, 3), (2, 2, 2))
        for kind in ("uniform", "leverage", "euclidean"):
            for mode in range(3):
                dists = core_distributions(cores, mode, kind)
                assert dists[mode] is None
                for k in rotation_modes(mode, 3):
                    p = check_prob_vector(dists[k])
                    assert np.all(p >= 0)
                    assert abs(p.sum() - 1.0) < 1e-12


@pytest.mark.parametrize("kind", ["leverage", "euclidean"])
def test_product_distribution_dominates_subchain_distribution(kind):
    # product of per-core distributions vs the brute-force distribution of the
    # merged subchain, with the corresponding constant beta
    rng = np.random.default_rng(5)
    for trial in range(6):
        n = 3 if trial % 2 == 0 else 4
        dims = tuple(rng.integers(2, 7, size=n))
        ranks = (2,) * n
        cores = random_cores(rng, dims, ranks)
        for mode in range(n):
            dists = core_distributions(cores, mode, kind)
            q = product_row_distribution(cores, mode, dists)
            sub = subchain_tensor(cores, mode)
            mat = subchain_unfolding(sub)
            if kind == "leverage":
                scores, rank = leverage_by_svd(mat)
                p_sub = scores / rank
                others = [k for k in range(n) if k not in (mode, (mode + 1) % n)]
                beta = 1.0 / (
                    ranks[mode] * ranks[(mode + 1) % n]
                    * np.prod([ranks[k] ** 2 for k in others])
                )
            else:
                slice_sq = np.einsum("rjs,rjs->j", sub, sub)
                p_sub = slice_sq / slice_sq.sum()
                beta = 1.0 / np.prod(
                    [np.linalg.norm(cores[k]) ** 2 for k in range(n) if k != mode])
            assert np.all(q + 1e-12 >= beta * p_sub)
            # weaker fallback: q is positive wherever the subchain distribution is
            assert np.all(q[p_sub > 1e-15] > 0)


class TestProductRowDistribution:
    def test_matches_enumeration(self):
        rng = np.random.default_rng(6)
        dims = (3, 4, 2)
        cores = random_cores(rng, dims, (2, 2, 2))
        for mode in range(3):
            dists = core_distributions(cores, mode, "euclidean")
            q = product_row_distribution(cores, mode, dists)
            rot = rotation_modes(mode, 3)
            expected = product_dist_by_enumeration(
                [dists[k] for k in rot], [dims[k] for k in rot])
            np.testing.assert_allclose(q, expected, atol=1e-14)
            assert abs(q.sum() - 1.0) < 1e-12


class TestSampleSubchainFibers:
    def test_degenerate_distributions(self):
        rng = np.random.default_rng(7)
        dims = (3, 4, 2)
        cores = random_cores(rng, dims, (2, 2, 2))
        x = tr_reconstruct(cores)
        mode = 0
        dists = [None] + [
            np.eye(dims[k])[0] for k in (1, 2)
        ]
        batch = sample_subchain_fibers(cores, x, mode, 5, dists, rng)
        np.testing.assert_array_equal(batch.probs, np.ones(5))
        for f in range(5):
            np.testing.assert_allclose(
                batch.subchain[:, f, :], cores[1][:, 0, :] @ cores[2][:, 0, :],
                atol=1e-14)
            np.testing.assert_array_equal(batch.fibers[:, f], x[:, 0, 0])

    def test_rows_match_subchain_and_fibers_match_columns(self):
        rng = np.random.default_rng(8)
        dims = (3, 4, 5)
        cores = random_cores(rng, dims, (2, 3, 2))
        x = rng.standard_normal(dims)
        for mode in range(3):
            dists = core_distributions(cores, mode, "euclidean")
            batch = sample_subchain_fibers(cores, x, mode, 50, dists, rng)
            sub = subchain_tensor(cores, mode)
            xn = mode_n_unfolding(x, mode)
            rot = rotation_modes(mode, 3)
            dims_rot = [dims[k] for k in rot]
            for f in range(50):
                idx = batch.idxs[f]
                j = linear_pos(idx, dims_rot)
                np.testing.assert_allclose(
                    batch.subchain[:, f, :], sub[:, j, :], atol=1e-13)
                np.testing.assert_array_equal(batch.fibers[:, f], xn[:, j])
                expected_p = np.prod([dists[k][idx[c]] for c, k in enumerate(rot)])
                assert batch.probs[f] == pytest.approx(expected_p, rel=1e-15)

    def test_empirical_frequencies_uniform(self):
        rng = np.random.default_rng(9)
        dims = (4, 3, 2)  # J_0 = 6
        cores = random_cores(rng, dims, (2, 2, 2))
        x = tr_reconstruct(cores)
        dists = [None, uniform_dist(3), uniform_dist(2)]
        draws = 100_000
        batch = sample_subchain_fibers(cores, x, 0, draws, dists, rng)
        np.testing.assert_allclose(batch.probs, 1.0 / 6.0, rtol=1e-15)
        rot = rotation_modes(0, 3)
        dims_rot = [dims[k] for k in rot]
        rows = np.array([linear_pos(idx, dims_rot) for idx in batch.idxs])
        counts = np.bincount(rows, minlength=6)
        p = 1.0 / 6.0
        se = np.sqrt(draws * p * (1 - p))
        assert np.all(np.abs(counts - draws * p) <= 5 * se)

    def test_with_fibers_false(self):
        rng = np.random.default_rng(10)
        cores = random_cores(rng, (3, 4), (2, 2))
        x = tr_reconstruct(cores)
        dists = [None, uniform_dist(4)]
        batch = sample_subchain_fibers(cores, x, 0, 3, dists, rng, with_fibers=False)
        assert batch.fibers is None

    def test_bad_batch_size(self):
        rng = np.random.default_rng(11)
        cores = random_cores(rng, (3, 4), (2, 2))
        x = tr_reconstruct(cores)
        with pytest.raises(ValueError):
            sample_subchain_fibers(cores, x, 0, 0, [None, uniform_dist(4)], rng)


class TestCompleteSampleBatch:
    def test_covers_everything(self):
        rng = np.random.default_rng(12)
        dims = (3, 4, 2)
        cores = random_cores(rng, dims, (2, 2, 2))
        x = rng.standard_normal(dims)
        for mode in range(3):
            batch = complete_sample_batch(cores, x, mode)
            j_total = x.size // dims[mode]
            assert batch.probs.shape == (j_total,)
            np.testing.assert_allclose(batch.probs, 1.0 / j_total)
            np.testing.assert_array_equal(
                batch.subchain, subchain_tensor(cores, mode))
            np.testing.assert_array_equal(
                batch.fibers, mode_n_unfolding(x, mode))


class TestSampleRowsBatch:
    def test_rows_and_probs(self):
        rng = np.random.default_rng(13)
        dims = (3, 4, 2)
        cores = random_cores(rng, dims, (2, 2, 2))
        x = rng.standard_normal(dims)
        q = rng.dirichlet(np.ones(8))
        batch = sample_rows_batch(cores, x, 0, 40, q, rng)
        sub = subchain_tensor(cores, 0)
        xn = mode_n_unfolding(x, 0)
        rot = rotation_modes(0, 3)
        dims_rot = [dims[k] for k in rot]
        for f in range(40):
            j = linear_pos(batch.idxs[f], dims_rot)
            np.testing.assert_array_equal(batch.subchain[:, f, :], sub[:, j, :])
            np.testing.assert_array_equal(batch.fibers[:, f], xn[:, j])
            assert batch.probs[f] == q[j]


class TestOptimalDistribution:
    def test_uniform_when_weights_equal(self):
        residual = np.eye(3)  # columns all unit norm
        subchain = np.ones((3, 2))
        np.testing.assert_allclose(
            optimal_distribution_oracle(residual, subchain), np.full(3, 1 / 3))

    def test_normalization_with_zeros(self):
        residual = np.array([[2.0, 0.0, 2.0]])
        subchain = np.ones((3, 1))
        np.testing.assert_allclose(
            optimal_distribution_oracle(residual, subchain), [0.5, 0.0, 0.5])

    def test_all_zero_weights(self):
        with pytest.raises(ValueError):
            optimal_distribution_oracle(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_minimizes_variance_functional(self):
        rng = np.random.default_rng(14)
        residual = rng.standard_normal((4, 6))
        subchain = rng.standard_normal((6, 3))
        q_opt = optimal_distribution_oracle(residual, subchain)
        v_opt = variance_functional(residual, subchain, q_opt, 2)
        for _ in range(100):
            q = rng.dirichlet(np.ones(6))
            if np.all(q > 0):
                assert variance_functional(residual, subchain, q, 2) >= v_opt - 1e-9
        # closed-form minimum
        w = np.linalg.norm(residual, axis=0) * np.linalg.norm(subchain, axis=1)
        grad = residual @ subchain
        v_closed = (w.sum() ** 2 - np.linalg.norm(grad) ** 2) / 2
        assert v_opt == pytest.approx(v_closed, rel=1e-12)


class TestVarianceFunctional:
    def test_zero_residual(self):
        subchain = np.ones((4, 2))
        assert variance_functional(np.zeros((3, 4)), subchain, uniform_dist(4), 2) == 0.0

    def test_hand_expanded_uniform(self):
        residual = np.array([[1.0, -2.0], [0.5, 1.0]])
        subchain = np.array([[2.0, 0.0], [1.0, 1.0]])
        q = uniform_dist(2)
        batch = 2
        # explicit expansion of the defining sum
        total = 0.0
        for j in range(2):
            rj = np.linalg.norm(residual[:, j]) ** 2
            sj = np.linalg.norm(subchain[j, :]) ** 2
            total += rj * sj / q[j]
        expected = (total - np.linalg.norm(residual @ subchain) ** 2) / batch
        assert variance_functional(residual, subchain, q, batch) == pytest.approx(
            expected, rel=1e-14)

    def test_zero_probability_with_weight(self):
        residual = np.array([[1.0, 1.0]])
        subchain = np.ones((2, 1))
        with pytest.raises(ValueError):
            variance_functional(residual, subchain, np.array([1.0, 0.0]), 1)
