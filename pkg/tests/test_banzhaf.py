import numpy as np
import pytest

from services.banzhaf import (
    SubsetSample,
    all_subsets,
    banzhaf_regression,
    exact_banzhaf,
    fit_banzhaf,
)


def _samples(value_fn, n):
    return [SubsetSample(m, float(value_fn(m))) for m in all_subsets(n)]


def test_all_subsets_enumerates_bits():
    subsets = all_subsets(3)
    assert subsets.shape == (8, 3)
    assert len({row.tobytes() for row in subsets}) == 8
    np.testing.assert_array_equal(subsets[5], [True, False, True])


def test_additive_game_is_fit_exactly():
    a = np.array([1.0, 2.0, 3.0])
    solution = banzhaf_regression(_samples(lambda m: a @ m + 5.0, 3))
    np.testing.assert_allclose(solution.w, a, atol=1e-9)
    assert solution.c == pytest.approx(5.0, abs=1e-9)
    np.testing.assert_allclose(exact_banzhaf(lambda m: a @ m + 5.0, 3), a, atol=1e-12)


def test_and_game_gives_half():
    def value(m):
        return float(m[0] and m[1])

    np.testing.assert_allclose(banzhaf_regression(_samples(value, 2)).w, [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(exact_banzhaf(value, 2), [0.5, 0.5])


def test_duplicated_samples_give_the_same_solution():
    rng = np.random.default_rng(1)
    membership = rng.random((40, 5)) < 0.5
    values = rng.normal(size=40)
    once = fit_banzhaf(membership, values)
    twice = fit_banzhaf(np.vstack([membership, membership]), np.concatenate([values, values]))
    np.testing.assert_allclose(twice.w, once.w, atol=1e-9)
    assert twice.c == pytest.approx(once.c, abs=1e-9)


def test_constant_game_is_null():
    np.testing.assert_allclose(banzhaf_regression(_samples(lambda m: 4.0, 3)).w, np.zeros(3), atol=1e-9)
    np.testing.assert_array_equal(exact_banzhaf(lambda m: 4.0, 3), np.zeros(3))


def test_regression_over_all_subsets_equals_exact_values():
    rng = np.random.default_rng(12)
    n = 10
    subsets = all_subsets(n)
    for _ in range(50):
        table = rng.normal(size=2**n)
        codes = subsets @ (1 << np.arange(n))

        def value(m):
            return table[int(m @ (1 << np.arange(n)))]

        solution = fit_banzhaf(subsets, table[codes])
        np.testing.assert_allclose(solution.w, exact_banzhaf(value, n), atol=1e-8)


def test_single_sample_gives_zero_weights():
    solution = banzhaf_regression([SubsetSample(np.array([1.0, 0.0, 1.0]), 2.5)])
    np.testing.assert_array_equal(solution.w, np.zeros(3))
    assert solution.c == 2.5


def test_identical_samples_fall_back_to_the_mean():
    membership = np.ones((4, 3), dtype=bool)
    solution = fit_banzhaf(membership, [1.0, 2.0, 3.0, 6.0])
    np.testing.assert_array_equal(solution.w, np.zeros(3))
    assert solution.c == 3.0


def test_argument_errors():
    with pytest.raises(ValueError):
        fit_banzhaf(np.ones((0, 2)), [])
    with pytest.raises(ValueError):
        fit_banzhaf(np.ones((3, 2)), [1.0, 2.0])
    with pytest.raises(ValueError):
        banzhaf_regression([SubsetSample(np.ones(2), 1.0), SubsetSample(np.ones(3), 1.0)])
    with pytest.raises(ValueError):
        exact_banzhaf(lambda m: 0.0, 17)
