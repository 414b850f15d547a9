import numpy as np
import pytest

from app.exceptions import (
    DegenerateSpectrumError,
    InputError,
    RangeError,
    ShapeError,
    UndefinedSimilarityError,
)
from app.services import linalg_service

# Rank-2 factors printed alongside the example reconstruction.
U2 = [[-0.37, 0.67], [-0.64, -0.15], [-0.28, -0.72], [-0.62, 0.08]]
S2 = [[14.59, 0.0], [0.0, 3.22]]
V2T = [[-0.51, -0.51, -0.47, -0.51], [-0.81, 0.07, 0.20, 0.55]]

# User-mean filled version of the 4 x 4 example.
R_FILLED = [
    [1.0, 3.0, 8 / 3, 4.0],
    [5.0, 14 / 3, 4.0, 5.0],
    [4.0, 7 / 3, 2.0, 1.0],
    [4.0, 4.0, 3.0, 5.0],
]


class TestVectorOps:
    def test_hadamard(self):
        """Element-wise product keeps the shape."""
        result = linalg_service.hadamard([[1, 2], [3, 4]], [[0, 1], [1, 0]])
        np.testing.assert_array_equal(result, [[0, 2], [3, 0]])

    @pytest.mark.parametrize("seed", range(20))
    def test_hadamard_commutes(self, seed):
        rng = np.random.default_rng(seed)
        shape = tuple(int(d) for d in rng.integers(1, 9, size=2))
        a, b = rng.normal(size=shape), rng.normal(size=shape)
        np.testing.assert_array_equal(linalg_service.hadamard(a, b), linalg_service.hadamard(b, a))

    def test_hadamard_shape_mismatch(self):
        with pytest.raises(ShapeError):
            linalg_service.hadamard([1, 2, 3], [1, 2])

    def test_dot(self):
        assert linalg_service.dot([2.87, 0, 0, 0], [0.98, 5.14, 3.94, 0]) == pytest.approx(2.8126)

    def test_cosine_is_clamped(self):
        """Parallel vectors give exactly 1."""
        assert linalg_service.cosine([1e-3, 2e-3], [3.0, 6.0]) <= 1.0
        assert linalg_service.cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_cosine_of_zero_vector(self):
        with pytest.raises(UndefinedSimilarityError):
            linalg_service.cosine([0.0, 0.0], [1.0, 2.0])


class TestSvd:
    @pytest.mark.parametrize(
        "matrix",
        [
            R_FILLED,
            np.arange(12, dtype=float).reshape(3, 4),
            np.arange(12, dtype=float).reshape(4, 3) ** 1.5,
            [[3.0]],
        ],
    )
    def test_matches_numpy(self, matrix):
        """Singular values agree with LAPACK and the factors reconstruct the input."""
        result = linalg_service.svd(matrix)
        expected = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
        np.testing.assert_allclose(result.singular_values, expected, atol=1e-9)
        np.testing.assert_allclose(result.reconstruct(), matrix, atol=1e-9)

    @pytest.mark.parametrize("seed", range(200))
    def test_random_matrices(self, seed):
        """Orthonormal factors and a faithful reconstruction up to 64 x 64."""
        rng = np.random.default_rng(seed)
        m, n = (int(d) for d in rng.integers(1, 65, size=2))
        matrix = rng.normal(size=(m, n))
        result = linalg_service.svd(matrix)
        r = min(m, n)
        assert np.max(np.abs(result.U.T @ result.U - np.eye(r))) <= 1e-10
        assert np.max(np.abs(result.V.T @ result.V - np.eye(r))) <= 1e-10
        error = np.linalg.norm(matrix - result.reconstruct()) / np.linalg.norm(matrix)
        assert error <= 1e-8
        assert np.all(np.diff(result.singular_values) <= 0)

    def test_factors_are_orthonormal(self):
        result = linalg_service.svd(R_FILLED)
        np.testing.assert_allclose(result.U.T @ result.U, np.eye(4), atol=1e-9)
        np.testing.assert_allclose(result.V.T @ result.V, np.eye(4), atol=1e-9)

    def test_sign_convention(self):
        """The largest-magnitude entry of every U column is nonnegative."""
        result = linalg_service.svd(R_FILLED)
        for k in range(result.U.shape[1]):
            column = result.U[:, k]
            assert column[np.argmax(np.abs(column))] >= 0

    def test_rank_deficient_input(self):
        """Zero singular values still come with an orthonormal U."""
        matrix = np.outer([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])
        result = linalg_service.svd(matrix)
        assert result.singular_values[1] == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(result.U.T @ result.U, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(result.reconstruct(), matrix, atol=1e-9)

    def test_result_is_read_only(self):
        result = linalg_service.svd(R_FILLED)
        with pytest.raises(ValueError):
            result.U[0, 0] = 1.0

    def test_input_not_modified(self):
        matrix = np.array(R_FILLED)
        linalg_service.svd(matrix)
        np.testing.assert_array_equal(matrix, R_FILLED)

    def test_non_finite_input(self):
        with pytest.raises(InputError):
            linalg_service.svd([[1.0, np.nan], [0.0, 1.0]])

    def test_empty_input(self):
        with pytest.raises(ShapeError):
            linalg_service.svd(np.zeros((0, 3)))


class TestRankSelection:
    def test_energy_of_printed_spectrum(self):
        """Two of four singular values hold about 99.42% of the energy."""
        energy = linalg_service.energy([14.59, 3.22, 1.11, 0.23], 2)
        assert energy == pytest.approx(0.9942, abs=5e-4)

    def test_rank_by_energy(self):
        assert linalg_service.rank_by_energy([4.0, 3.0], 0.6) == 1
        assert linalg_service.rank_by_energy([4.0, 3.0], 0.95) == 2
        assert linalg_service.rank_by_energy([14.59, 3.22, 1.11, 0.23], 0.99) == 2

    @pytest.mark.parametrize("seed", range(10))
    def test_rank_by_energy_is_monotone(self, seed):
        """A higher threshold never selects a smaller rank."""
        rng = np.random.default_rng(seed)
        spectrum = np.sort(np.abs(rng.normal(size=int(rng.integers(1, 20)))))[::-1]
        ranks = [linalg_service.rank_by_energy(spectrum, t) for t in np.linspace(0.01, 1.0, 100)]
        assert ranks == sorted(ranks)

    def test_rank_by_energy_threshold_range(self):
        with pytest.raises(RangeError):
            linalg_service.rank_by_energy([1.0], 0.0)

    def test_rank_by_ratio(self):
        assert linalg_service.rank_by_ratio([10.0, 1.0, 1.0], 10.0) == 2
        assert linalg_service.rank_by_ratio([10.0, 1.0, 1.0], 4.0) == 1

    def test_rank_by_ratio_never_reached(self):
        """A flat spectrum keeps every value."""
        assert linalg_service.rank_by_ratio([1.0, 1.0, 1.0], 10.0) == 3

    def test_all_zero_spectrum(self):
        with pytest.raises(DegenerateSpectrumError):
            linalg_service.rank_by_energy([0.0, 0.0])

    def test_unsorted_spectrum(self):
        with pytest.raises(InputError):
            linalg_service.energy([1.0, 2.0], 1)


class TestTruncation:
    def test_printed_factors_reproduce_reconstruction(self, r_star):
        """The two-decimal factors reproduce R* up to their rounding."""
        reconstructed = linalg_service.reconstruct(U2, S2, np.array(V2T).T)
        np.testing.assert_allclose(reconstructed, r_star, atol=0.065)

    def test_truncate_keeps_leading_factors(self):
        result = linalg_service.svd(R_FILLED)
        truncated = linalg_service.truncate(result, 2)
        assert truncated.f == 2
        assert truncated.U_f.shape == (4, 2)
        assert truncated.V_f.shape == (4, 2)
        np.testing.assert_allclose(np.diag(truncated.S_f), result.singular_values[:2])

    def test_full_rank_truncation_is_exact(self):
        result = linalg_service.svd(R_FILLED)
        truncated = linalg_service.truncate(result, 4)
        np.testing.assert_allclose(truncated.reconstruct(), R_FILLED, atol=1e-9)

    def test_truncation_error_is_trailing_energy(self):
        """Frobenius error of the rank-f approximation is the dropped singular mass."""
        result = linalg_service.svd(R_FILLED)
        truncated = linalg_service.truncate(result, 2)
        error = np.linalg.norm(np.asarray(R_FILLED) - truncated.reconstruct())
        assert error == pytest.approx(np.sqrt(np.sum(result.singular_values[2:] ** 2)))

    @pytest.mark.parametrize("f", [0, 5])
    def test_truncate_out_of_range(self, f):
        with pytest.raises(RangeError):
            linalg_service.truncate(linalg_service.svd(R_FILLED), f)

    @pytest.mark.parametrize("seed", range(10))
    def test_no_rank_k_matrix_does_better(self, seed):
        """Rank-2 plus noise: the rank-2 truncation beats random and nearby rank-2 matrices."""
        rng = np.random.default_rng(seed)
        matrix = rng.normal(size=(8, 2)) @ rng.normal(size=(2, 6)) + 0.05 * rng.normal(size=(8, 6))
        result = linalg_service.svd(matrix)
        best = linalg_service.truncate(result, 2)
        best_error = np.linalg.norm(matrix - best.reconstruct())
        assert best_error <= np.linalg.norm(matrix - linalg_service.truncate(result, 1).reconstruct())
        for _ in range(20):
            other = rng.normal(size=(8, 2)) @ rng.normal(size=(2, 6))
            assert best_error <= np.linalg.norm(matrix - other)
            nearby = linalg_service.reconstruct(
                best.U_f + 1e-3 * rng.normal(size=best.U_f.shape), best.S_f, best.V_f
            )
            assert best_error <= np.linalg.norm(matrix - nearby) + 1e-12
