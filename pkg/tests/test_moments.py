import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from free_mimo.moments import (capacity_from_eigenvalues, capacity_from_moments,
                               capacity_from_spectrum, capacity_of_channel,
                               capacity_taylor, power_sums_to_elementary,
                               trace_moments)

from conftest import random_rank_r


def brute_elementary(lams, k):
    return sum(math.prod(c) for c in combinations(lams, k))


def power_sums(lams, r):
    return [sum(x ** k for x in lams) for k in range(1, r + 1)]


class TestTraceMoments:
    def test_identity(self):
        np.testing.assert_allclose(trace_moments(np.eye(3), 4), [1, 1, 1, 1])

    def test_diagonal(self):
        # direct power sums of (1, 2, 3) over n = 3
        expected = [6 / 3, 14 / 3, 36 / 3]
        np.testing.assert_allclose(trace_moments(np.diag([1.0, 2.0, 3.0]), 3), expected)

    def test_zero(self):
        np.testing.assert_array_equal(trace_moments(np.zeros((3, 3)), 2), [0, 0])

    def test_matches_eigenvalues(self, rng):
        H = random_rank_r(rng, 5, 7, 3)
        G = H @ H.conj().T / 7
        lam = np.linalg.eigvalsh(G)
        expected = [np.mean(lam ** k) for k in range(1, 5)]
        np.testing.assert_allclose(trace_moments(G, 4), expected, rtol=1e-12)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            trace_moments(np.zeros((2, 3)), 2)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            trace_moments(np.array([[1.0, 2.0], [0.0, 1.0]]), 2)

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError):
            trace_moments(np.eye(2), 0)


class TestNewtonGirard:
    def test_ones(self):
        # lambda = (1, 1, 1); the misprinted -7 coefficient would give P3 = -5
        np.testing.assert_allclose(power_sums_to_elementary([3, 3, 3]), [3, 3, 1])

    def test_one_two_three(self):
        lams = [1, 2, 3]
        S = power_sums(lams, 3)
        assert S == [6, 14, 36]
        expected = [brute_elementary(lams, k) for k in (1, 2, 3)]
        np.testing.assert_allclose(power_sums_to_elementary(S), expected)

    @pytest.mark.parametrize("a", [0.5, 2.0, 7.0])
    def test_single_eigenvalue(self, a):
        np.testing.assert_allclose(power_sums_to_elementary([a, a * a, a ** 3]),
                                   [a, 0, 0], atol=1e-12)

    def test_rank_four(self):
        lams = [0.3, 1.7, 2.2, 4.0]
        expected = [brute_elementary(lams, k) for k in range(1, 5)]
        np.testing.assert_allclose(power_sums_to_elementary(power_sums(lams, 4)),
                                   expected, rtol=1e-12)

    @pytest.mark.parametrize("r", [0, 5])
    def test_rank_out_of_range(self, r):
        with pytest.raises(ValueError):
            power_sums_to_elementary(np.ones(r))

    def test_batched(self):
        S = np.array([[3, 3, 3], [6, 14, 36]], dtype=float)
        np.testing.assert_allclose(power_sums_to_elementary(S), [[3, 3, 1], [6, 11, 6]])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=1, max_size=4))
    def test_matches_brute_force(self, lams):
        r = len(lams)
        got = power_sums_to_elementary(power_sums(lams, r))
        expected = [brute_elementary(lams, k) for k in range(1, r + 1)]
        scale = [max(1.0, max(lams) ** k) for k in range(1, r + 1)]
        np.testing.assert_allclose(np.asarray(got) / scale, np.asarray(expected) / scale,
                                   atol=1e-10)


class TestCapacity:
    def test_single_unit_eigenvalue(self):
        assert capacity_from_spectrum([1.0], 1.0, 2) == pytest.approx(0.5)

    @pytest.mark.parametrize("sigma2", [0.01, 1.0, 5.0])
    def test_zero_channel(self, sigma2):
        assert capacity_from_spectrum([0.0], sigma2, 3) == 0.0

    def test_one_two_three(self):
        # eigenvalues (1, 2, 3) at sigma2 = 1: log2(2 * 3 * 4) / 10
        expected = math.log2(24) / 10
        assert capacity_from_spectrum([6, 11, 6], 1.0, 10) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(0.45849, abs=1e-5)

    def test_clamp_flag(self):
        cap, clamped = capacity_from_spectrum([-5.0], 1.0, 2, with_flag=True)
        assert clamped
        assert cap == pytest.approx(math.log2(1e-12) / 2)
        cap, clamped = capacity_from_spectrum([1.0], 1.0, 2, with_flag=True)
        assert not clamped

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            capacity_from_spectrum([1.0], 0.0, 2)

    @pytest.mark.parametrize("r", [1, 2, 3, 4])
    def test_moment_path_matches_eigendecomposition(self, rng, r):
        for _ in range(20):
            H = random_rank_r(rng, 6, 5, r)
            G = H @ H.conj().T / 5
            direct = capacity_of_channel(H, 0.3)
            via_moments = capacity_from_moments(trace_moments(G, r), 0.3, 6)
            assert via_moments == pytest.approx(direct, abs=1e-9)

    def test_eigenvalue_form(self):
        assert capacity_from_eigenvalues([1.0, 0.0], 1.0) == pytest.approx(0.5)


class TestTaylor:
    def test_zero_channel(self):
        assert capacity_taylor([0, 0, 0, 0], 0.3, 4) == 0

    def test_unit_moments(self):
        expected = (0.1 - 0.005 + 0.001 / 3 - 0.000025) / math.log(2)
        got = capacity_taylor([1, 1, 1, 1], 0.1, 4)
        assert got == pytest.approx(expected, rel=1e-14)
        assert got == pytest.approx(0.137501, abs=1e-6)
        assert got == pytest.approx(math.log2(1.1), abs=1e-4)

    def test_first_order(self):
        assert capacity_taylor([2.0, 9.0], 0.05, 1) == pytest.approx(2.0 * 0.05 / math.log(2))

    def test_too_many_terms(self):
        with pytest.raises(ValueError):
            capacity_taylor([1, 1], 0.1, 3)

    @pytest.mark.parametrize("K", [1, 2, 3, 4])
    def test_remainder_bound(self, rng, K):
        for _ in range(10):
            H = random_rank_r(rng, 4, 4, 3)
            G = H @ H.conj().T / 4
            lam = np.linalg.eigvalsh(G)
            rho = 0.1 / lam.max()
            mom = trace_moments(G, K + 1)
            exact = capacity_from_eigenvalues(np.clip(lam, 0, None), 1 / rho)
            bound = mom[K] * rho ** (K + 1) / (K + 1) / math.log(2)
            assert abs(capacity_taylor(mom, rho, K) - exact) <= bound * (1 + 1e-9)
