import itertools
import math

import numpy as np
import pytest

from mfcf.gains import (GainConfig, GainError, NotPositiveDefiniteError,
                        gaussian_gain, logdet, lrt_statistic, similarity_gain,
                        validated_gaussian_gain)


def random_correlation(rng, p, extra=5):
    A = rng.standard_normal((p, p + extra))
    S = A @ A.T / (p + extra)
    d = np.sqrt(np.diag(S))
    S = S / np.outer(d, d)
    np.fill_diagonal(S, 1.0)
    return np.ascontiguousarray((S + S.T) / 2.0)


class TestSimilarityGain:
    def W(self):
        W = np.zeros((4, 4))
        W[0, 3] = W[3, 0] = 0.9
        W[1, 3] = W[3, 1] = 0.5
        W[2, 3] = W[3, 2] = 0.1
        return W

    def test_top_two_members_selected(self):
        r = similarity_gain(self.W(), (0, 1, 2), 3, 2)
        assert r.separator == (0, 1)
        assert r.gain == pytest.approx(2 * (0.9 + 0.5))

    def test_all_zero_weights_still_returns_max_subset(self):
        r = similarity_gain(np.zeros((5, 5)), (0, 1, 2), 4, 2)
        assert r.gain == 0.0
        assert r.separator == (0, 1)  # ties break to lowest indices

    def test_full_expansion_gain(self):
        W = np.zeros((3, 3))
        W[0, 2] = W[2, 0] = 0.3
        W[1, 2] = W[2, 1] = 0.4
        r = similarity_gain(W, (0, 1), 2, 2)
        assert r.separator == (0, 1)
        assert r.gain == pytest.approx(2 * 0.7)

    def test_asymmetric_rejected(self):
        W = np.zeros((3, 3))
        W[0, 1] = 1.0
        with pytest.raises(GainError, match="symmetric"):
            similarity_gain(W, (0,), 1, 1)

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(GainError, match="diagonal"):
            similarity_gain(np.eye(3), (0,), 1, 1)

    def test_threshold_filters_members(self):
        r = similarity_gain(self.W(), (0, 1, 2), 3, 2, threshold=0.4)
        assert r.separator == (0, 1)
        r = similarity_gain(self.W(), (0, 1, 2), 3, 2, threshold=0.8)
        assert r.separator == (0,)
        r = similarity_gain(self.W(), (0, 1, 2), 3, 2, threshold=2.0)
        assert r.separator == () and r.gain == 0.0


class TestLogdet:
    def test_identity(self):
        assert logdet(np.eye(3)) == 0.0

    def test_two_by_two(self):
        assert logdet(np.array([[1, .5], [.5, 1]])) == \
            pytest.approx(math.log(0.75), abs=1e-12)

    def test_singular_rejected(self):
        with pytest.raises(NotPositiveDefiniteError, match="not PD"):
            logdet(np.array([[1.0, 1.0], [1.0, 1.0]]))

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            logdet(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestGaussianGain:
    def cfg(self, mn=1, mx=4):
        return GainConfig(min_clique_size=mn, max_clique_size=mx)

    def test_single_member_closed_form(self):
        S = np.array([[1.0, 0.5], [0.5, 1.0]])
        r = gaussian_gain(S, (0,), 1, self.cfg())
        assert r.separator == (0,)
        assert r.gain == pytest.approx(-0.5 * math.log(0.75), abs=1e-12)

    def test_uncorrelated_vertex_zero_gain(self):
        S = np.eye(4)
        r = gaussian_gain(S, (0, 1, 2), 3, self.cfg())
        assert r.gain == pytest.approx(0.0, abs=1e-12)

    def test_gain_matches_logdet_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            S = random_correlation(rng, 6)
            r = gaussian_gain(S, (0, 1, 2, 3), 4, self.cfg(mx=4))
            idx = list(r.separator)
            expect = 0.5 * (logdet(S[np.ix_(idx, idx)])
                            - logdet(S[np.ix_(idx + [4], idx + [4])]))
            assert r.gain == pytest.approx(expect, abs=1e-9)

    def test_greedy_close_to_exhaustive_oracle(self):
        # Oracle: enumerate every subset of size <= 2 and take the best.
        rng = np.random.default_rng(42)
        agree = 0
        trials = 100
        for _ in range(trials):
            S = random_correlation(rng, 4)
            r = gaussian_gain(S, (0, 1, 2), 3, self.cfg(mx=3))
            best_gain, best_sep = -np.inf, None
            for size in (1, 2):
                for sub in itertools.combinations((0, 1, 2), size):
                    idx = list(sub)
                    g = 0.5 * (logdet(S[np.ix_(idx, idx)])
                               - logdet(S[np.ix_(idx + [3], idx + [3])]))
                    if g > best_gain:
                        best_gain, best_sep = g, sub
            if best_sep == r.separator:
                agree += 1
            else:
                assert best_gain >= r.gain - 1e-12
        assert agree >= 95

    def test_separator_growth_never_decreases_gain(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            S = random_correlation(rng, 5)
            g2 = gaussian_gain(S, (0, 1, 2, 3), 4, self.cfg(mx=3)).gain
            g3 = gaussian_gain(S, (0, 1, 2, 3), 4, self.cfg(mx=4)).gain
            assert g3 >= g2 - 1e-12

    def test_pure_function(self):
        rng = np.random.default_rng(5)
        S = random_correlation(rng, 5)
        a = gaussian_gain(S, (0, 1, 2), 4, self.cfg())
        b = gaussian_gain(S, (0, 1, 2), 4, self.cfg())
        assert a.gain == b.gain and a.separator == b.separator


class TestLrtStatistic:
    def test_identical_matrices_zero(self):
        S = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert lrt_statistic(S, S, 100) == pytest.approx(0.0, abs=1e-9)

    def test_two_by_two_closed_form(self):
        S1 = np.array([[1.0, 0.5], [0.5, 1.0]])
        u = lrt_statistic(np.eye(2), S1, 50)
        expect = 50 * (-math.log(0.75) + 2 / 0.75 - 2)
        assert u == pytest.approx(expect, abs=1e-9)
        assert u == pytest.approx(47.7174369559, abs=1e-6)

    def test_raw_variant_keeps_literal_formula(self):
        S = np.array([[1.0, 0.2], [0.2, 1.0]])
        assert lrt_statistic(S, S, 10, raw=True) == pytest.approx(20.0)

    def test_dimension_mismatch(self):
        with pytest.raises(GainError, match="mismatch"):
            lrt_statistic(np.eye(2), np.eye(3), 10)

    def test_symbolic_two_by_two(self):
        # nu (-log(1 - r1^2) + log(1 - r0^2) + trace term - 2)
        r0, r1, nu = 0.3, 0.6, 80.0
        S0 = np.array([[1, r0], [r0, 1.0]])
        S1 = np.array([[1, r1], [r1, 1.0]])
        tr = np.trace(np.linalg.inv(S1) @ S0)
        expect = nu * (math.log(1 - r0 ** 2) - math.log(1 - r1 ** 2) + tr - 2)
        assert lrt_statistic(S0, S1, nu) == pytest.approx(expect, abs=1e-9)


class TestValidatedGain:
    def cfg(self, mx=4, pv=0.05):
        return GainConfig(mode="gauss_loglik_validated", min_clique_size=1,
                          max_clique_size=mx, p_value=pv)

    def test_strong_correlation_accepted(self):
        S = np.array([[1.0, 0.9], [0.9, 1.0]])
        r = validated_gaussian_gain(S, (0,), 1, 500, self.cfg())
        assert r.separator == (0,)
        # deviance = 2 * 500 * (-0.5 ln(1 - 0.81)) = 830.4 >> 3.84
        assert 2 * 500 * r.gain > 100.0

    def test_weak_correlation_rejected(self):
        S = np.array([[1.0, 0.05], [0.05, 1.0]])
        r = validated_gaussian_gain(S, (0,), 1, 25, self.cfg())
        assert r.gain == 0.0
        assert r.separator == ()
        # deviance 2 * 25 * 0.00125 = 0.063 < chi2_1(0.95) = 3.841
        dev = -25 * math.log(1 - 0.05 ** 2)
        assert dev < 3.841

    def test_missing_nu_rejected(self):
        with pytest.raises(GainError, match="nu"):
            validated_gaussian_gain(np.eye(2), (0,), 1, None, self.cfg())

    def test_pvalue_near_one_recovers_unvalidated_separator(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            S = random_correlation(rng, 5)
            plain = gaussian_gain(S, (0, 1, 2, 3), 4,
                                  GainConfig(min_clique_size=1,
                                             max_clique_size=4))
            val = validated_gaussian_gain(S, (0, 1, 2, 3), 4, 50,
                                          self.cfg(pv=0.999999))
            assert val.separator == plain.separator
            assert val.gain == pytest.approx(plain.gain, abs=1e-12)

    def test_empty_separator_gain_is_exactly_zero(self):
        S = np.eye(3)
        r = validated_gaussian_gain(S, (0, 1), 2, 10, self.cfg())
        assert r.gain == 0.0 and r.separator == ()
