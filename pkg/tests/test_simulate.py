import numpy as np
import pytest
import scipy.sparse as sp

from stark.simulate import (
    downsample_counts,
    make_synthetic,
    row_normalize,
    sample_counts,
    sample_expression,
    sample_reads,
    subsample_pixels,
)


class TestSynthetic:
    def test_single_region(self):
        img = make_synthetic(5, 4, 6, regions=1, seed=0)
        np.testing.assert_allclose(img.F_star, np.tile(img.F_star[0], (20, 1)), rtol=1e-14)

    def test_hard_boundary(self):
        img = make_synthetic(10, 10, 6, regions=3, sharpness=1e9, seed=2)
        for lab in np.unique(img.labels):
            rows = img.F_star[img.labels == lab]
            np.testing.assert_allclose(rows, np.tile(rows[0], (len(rows), 1)), atol=1e-12)

    def test_rows_in_simplex(self):
        img = make_synthetic(7, 9, 5, regions=2, seed=1)
        assert np.all(img.F_star >= 0)
        np.testing.assert_allclose(img.F_star.sum(axis=1), 1.0, atol=1e-12)
        assert img.pixels.shape == (63, 2)

    def test_deterministic(self):
        a = make_synthetic(6, 6, 4, seed=11)
        b = make_synthetic(6, 6, 4, seed=11)
        np.testing.assert_array_equal(a.F_star, b.F_star)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_rejects_too_many_regions(self):
        with pytest.raises(ValueError):
            make_synthetic(4, 4, 2, regions=3)


class TestReads:
    def test_zero_reads(self):
        assert np.all(sample_reads(0, m=5) == 0)

    def test_single_pixel(self):
        assert sample_reads(123, m=1, seed=4).tolist() == [123]

    def test_poisson_family(self):
        r = sample_reads(10000, m=4, family="poisson", seed=1)
        assert r.shape == (4,) and abs(r.sum() - 10000) < 500

    def test_moments(self):
        R, m = 10**6, 100
        draws = np.array([sample_reads(R, m=m, seed=s) for s in range(200)])
        sd = np.sqrt(R * (1 / m) * (1 - 1 / m))
        se = sd / np.sqrt(200)
        assert np.all(np.abs(draws.mean(axis=0) - R / m) <= 4 * se)
        assert np.all(draws.sum(axis=1) == R)

    def test_invalid_u(self):
        with pytest.raises(ValueError):
            sample_reads(10, u=[0.5, 0.6])

    def test_reproducible(self):
        np.testing.assert_array_equal(sample_reads(5000, m=30, seed=9), sample_reads(5000, m=30, seed=9))


class TestExpression:
    def test_zero_read_row(self):
        F = np.array([[0.5, 0.5], [0.2, 0.8]])
        Y = sample_expression(F, [0, 10], seed=1)
        np.testing.assert_array_equal(Y[0], [0, 0])

    def test_basis_vector(self):
        F = np.array([[0.0, 1.0, 0.0]])
        np.testing.assert_array_equal(sample_expression(F, [17], seed=3), F)

    def test_rows_exactly_in_simplex(self, rng):
        F = rng.dirichlet(np.ones(6), size=20)
        reads = rng.integers(1, 50, size=20)
        C = sample_counts(F, reads, seed=2)
        np.testing.assert_array_equal(C.sum(axis=1), reads)
        Y = sample_expression(F, reads, seed=2)
        np.testing.assert_allclose(Y.sum(axis=1), 1.0, atol=1e-15)
        np.testing.assert_allclose(Y * reads[:, None], np.round(Y * reads[:, None]), atol=1e-12)

    def test_rejects_non_simplex(self):
        with pytest.raises(ValueError):
            sample_expression(np.array([[0.5, 0.6]]), [3])

    @pytest.mark.parametrize("R", [1, 5, 50])
    def test_expected_noise_norm(self, R):
        f = np.array([0.5, 0.3, 0.2])
        n = 10**4
        Y = sample_expression(np.tile(f, (n, 1)), np.full(n, R), seed=R)
        sq = np.sum((Y - f) ** 2, axis=1)
        expected = (1 - f @ f) / R
        assert abs(sq.mean() - expected) <= 3 * sq.std(ddof=1) / np.sqrt(n)


class TestDownsample:
    def test_full_and_empty(self):
        C = sp.csr_matrix(np.array([[3, 0, 2], [1, 4, 0]]))
        np.testing.assert_array_equal(downsample_counts(C, 10).toarray(), C.toarray())
        assert downsample_counts(C, 0).nnz == 0

    def test_bounds(self, rng):
        C = rng.integers(0, 20, size=(6, 5))
        D = downsample_counts(C, 40, seed=3)
        assert D.sum() == 40 and np.all(D <= C) and np.all(D >= 0)

    def test_rejects_excess(self):
        with pytest.raises(ValueError):
            downsample_counts(np.array([[1, 2]]), 4)

    def test_hypergeometric_mean(self):
        C = np.array([[6, 4]])
        n = 10**5
        first = np.array([downsample_counts(C, 5, seed=s)[0, 0] for s in range(n)])
        var = 5 * 0.6 * 0.4 * (10 - 5) / (10 - 1)
        assert abs(first.mean() - 3.0) <= 3 * np.sqrt(var / n)

    def test_composition_consistency(self):
        C = np.array([[5, 3], [2, 6]])
        n = 10**4
        once = np.array([downsample_counts(C, 6, seed=(s, 0)).ravel() for s in range(n)])
        twice = np.array([
            downsample_counts(downsample_counts(C, 11, seed=(s, 1)), 6, seed=(s, 2)).ravel()
            for s in range(n)
        ])
        for moment in (1, 2):
            a, b = once.astype(float) ** moment, twice.astype(float) ** moment
            se = np.sqrt(a.var(axis=0) / n + b.var(axis=0) / n)
            assert np.all(np.abs(a.mean(axis=0) - b.mean(axis=0)) <= 4 * se)


class TestSubsample:
    def test_full(self, rng):
        Y = rng.random((5, 3))
        P = rng.random((5, 2))
        Ys, Ps, idx = subsample_pixels(Y, P, 5)
        np.testing.assert_array_equal(idx, np.arange(5))
        np.testing.assert_array_equal(Ys, Y)

    def test_single(self, rng):
        Y = rng.random((5, 3))
        Ys, Ps, idx = subsample_pixels(Y, rng.random((5, 2)), 1, seed=4)
        np.testing.assert_array_equal(Ys[0], Y[idx[0]])

    def test_out_of_range(self, rng):
        with pytest.raises(ValueError):
            subsample_pixels(np.zeros((3, 2)), np.zeros((3, 2)), 4)

    def test_uniform_frequency(self):
        n = 10**4
        counts = np.zeros(10)
        Y = np.zeros((10, 1))
        P = np.zeros((10, 2))
        for s in range(n):
            counts[subsample_pixels(Y, P, 3, seed=s)[2]] += 1
        freq = counts / n
        assert np.all(np.abs(freq - 0.3) <= 3 * np.sqrt(0.3 * 0.7 / n))


def test_row_normalize_zero_rows():
    C = np.array([[0, 0], [1, 3]])
    np.testing.assert_array_equal(row_normalize(C), [[0, 0], [0.25, 0.75]])
    S = row_normalize(sp.csr_matrix(C))
    np.testing.assert_array_equal(S.toarray(), [[0, 0], [0.25, 0.75]])
