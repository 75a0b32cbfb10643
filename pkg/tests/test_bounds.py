"""Tests for criterion sup gains, certified rates, and error bounds."""

import numpy as np
import pytest

from lmsbound import bounds, presets
from lmsbound.bounds import (
    CriterionKind,
    GainTooLarge,
    InvalidRate,
    asymptotic_bound,
    finite_k_bound,
    initial_error_second_moment,
    initial_v,
    max_chi,
    max_chi_search,
    pencil_max_eigenvalue,
    protocol_gain,
    sup_gain,
)
from lmsbound.moments import UnsupportedOperator, explicit_moment_model

K = CriterionKind


def model(name):
    return presets.benchmark_model(name)


class TestCriterionKind:
    @pytest.mark.parametrize("kind", list(K))
    def test_name_round_trip(self, kind):
        assert K.from_name(kind.value) is kind

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown criterion"):
            K.from_name("widrow")


class TestLiteratureSups:
    # closed forms: 2/lambda_max, 2/trace, 2*lambda_min/lambda_max^2
    @pytest.mark.parametrize("name,expected", [
        ("1A", 2.0), ("1B", 0.5), ("1C", 2.0 / 1.5), ("1D", 1.0)])
    def test_widrow_lambda_max(self, name, expected):
        assert sup_gain(model(name), K.WIDROW_LAMBDA_MAX).sup_gain == pytest.approx(
            expected, abs=1e-12)

    @pytest.mark.parametrize("name,expected", [
        ("1A", 1.0), ("1B", 0.4), ("1C", 1.0), ("1D", 1.0)])
    def test_widrow_trace(self, name, expected):
        assert sup_gain(model(name), K.WIDROW_TRACE).sup_gain == pytest.approx(
            expected, abs=1e-12)

    @pytest.mark.parametrize("name,expected", [
        ("1A", 2.0), ("1B", 0.125), ("1C", 2.0 * 0.5 / 1.5**2)])
    def test_zhu(self, name, expected):
        assert sup_gain(model(name), K.ZHU).sup_gain == pytest.approx(
            expected, abs=1e-12)

    def test_zhu_singular_second_moment_is_inapplicable(self):
        res = sup_gain(model("1D"), K.ZHU)
        assert res.inapplicable
        assert res.sup_gain == 0.0

    def test_printed_matrix_model_values(self):
        reed = model("reed")
        assert sup_gain(reed, K.WIDROW_LAMBDA_MAX).sup_gain == pytest.approx(
            0.1169, abs=1e-4)
        assert sup_gain(reed, K.WIDROW_TRACE).sup_gain == pytest.approx(
            0.1066, abs=1e-4)
        assert sup_gain(reed, K.ZHU).sup_gain == pytest.approx(0.0007, abs=1e-4)


class TestIdentityCertificateSup:
    # sup over {a : lambda_max(a*M4 - 2*S) < 0}; exact values by hand
    @pytest.mark.parametrize("name,expected", [
        ("1A", 0.5), ("1B", 2.0 / 13.0), ("1C", 0.4)])
    def test_gaussian_cases(self, name, expected):
        res = sup_gain(model(name), K.COROLLARY2)
        assert res.sup_gain == pytest.approx(expected, abs=1e-5)
        assert not res.tolerance_limited
        assert res.certificate is not None

    def test_degenerate_case_relaxed(self):
        res = sup_gain(model("1D"), K.COROLLARY2, mode="relaxed")
        assert res.sup_gain == pytest.approx(1.0 / 3.0, abs=1e-5)
        assert res.tolerance_limited

    def test_degenerate_case_strict(self):
        res = sup_gain(model("1D"), K.COROLLARY2, mode="strict")
        assert res.strictly_infeasible
        assert res.sup_gain == 0.0
        assert "no feasible gain" in res.note

    def test_printed_matrix_model(self):
        res = sup_gain(model("reed"), K.COROLLARY2)
        assert res.sup_gain == pytest.approx(0.0716, abs=1e-4)
        # cross-check against the generalized-eigenvalue closed form
        reed = model("reed")
        mu = np.max(np.real(np.linalg.eigvals(
            np.linalg.solve(reed.second_moment, reed.m4))))
        assert res.sup_gain == pytest.approx(2.0 / mu, abs=1e-4)

    def test_pencil_sign_change_at_sup(self):
        m = model("1B")
        assert pencil_max_eigenvalue(m, 2.0 / 13.0 - 1e-6) < 0
        assert pencil_max_eigenvalue(m, 2.0 / 13.0 + 1e-6) > 0


class TestFreeCertificateSup:
    # hand-derived optima of the free-matrix drift inequality
    @pytest.mark.parametrize("name,expected", [
        ("1A", 0.5),
        ("1B", (15.0 - np.sqrt(97.0)) / 32.0),
        ("1C", 1.0 - 1.0 / np.sqrt(3.0))])
    def test_gaussian_cases(self, name, expected):
        res = sup_gain(model(name), K.THEOREM1)
        assert res.sup_gain == pytest.approx(expected, abs=5e-4)
        assert not res.tolerance_limited

    def test_free_matrix_dominates_identity(self):
        for name in ("1A", "1B", "1C"):
            free = sup_gain(model(name), K.THEOREM1).sup_gain
            pinned = sup_gain(model(name), K.COROLLARY2).sup_gain
            assert free >= pinned - 1e-5

    def test_degenerate_case_relaxed(self):
        res = sup_gain(model("1D"), K.THEOREM1, mode="relaxed")
        assert res.sup_gain == pytest.approx(1.0 / 3.0, abs=5e-3)
        assert res.tolerance_limited

    def test_needs_fourth_moment_operator(self):
        m = explicit_moment_model(np.eye(2), 4.0 * np.eye(2))
        with pytest.raises(UnsupportedOperator):
            sup_gain(m, K.THEOREM1)


class TestProtocolGain:
    def test_rounds_then_subtracts(self):
        assert protocol_gain(0.5) == pytest.approx(0.4999, abs=1e-12)
        assert protocol_gain(0.153846) == pytest.approx(0.1537, abs=1e-12)
        assert protocol_gain(2.0 * 0.5 / 1.5**2) == pytest.approx(0.4443, abs=1e-12)
        assert protocol_gain(0.160971) == pytest.approx(0.1609, abs=1e-12)

    def test_custom_offset(self):
        assert protocol_gain(0.5, xi=1e-2) == pytest.approx(0.49, abs=1e-12)

    def test_zero_gain_rejected(self):
        with pytest.raises(GainTooLarge):
            protocol_gain(1e-5)


class TestMaxChi:
    def test_identity_rate_closed_form(self):
        # chi = -lambda_max(a*M4 - 2*S) at the working gain
        cases = [("1A", 0.4999, 0.0004), ("1B", 0.1537, 0.0076),
                 ("1C", 0.3999, 0.00075)]
        for name, a, expected in cases:
            res = max_chi_search(model(name), K.COROLLARY2, a)
            assert res.chi == pytest.approx(expected, abs=1e-10)
            assert not res.tolerance_limited
            assert np.array_equal(res.p_matrix, np.eye(2))

    def test_identity_rate_degenerate(self):
        res = max_chi_search(model("1D"), K.COROLLARY2, 0.3332)
        assert res.chi == 0.0
        assert res.tolerance_limited
        with pytest.raises(GainTooLarge):
            max_chi_search(model("1D"), K.COROLLARY2, 0.3332, mode="strict")

    def test_identity_rate_beyond_range(self):
        with pytest.raises(GainTooLarge):
            max_chi_search(model("1A"), K.COROLLARY2, 0.6)

    def test_rejects_nonpositive_gain(self):
        with pytest.raises(GainTooLarge):
            max_chi_search(model("1A"), K.THEOREM1, 0.0)

    def test_rejects_literature_kinds(self):
        with pytest.raises(ValueError, match="certificate criteria"):
            max_chi_search(model("1A"), K.WIDROW_TRACE, 0.1)

    def test_free_rate_values(self):
        cases = [("1A", 0.4999, 0.0004, 5e-5),
                 ("1B", 0.1537, 0.313857, 2e-3),
                 ("1C", 0.3999, 0.140049, 2e-3)]
        for name, a, expected, tol in cases:
            res = max_chi_search(model(name), K.THEOREM1, a)
            assert res.chi == pytest.approx(expected, abs=tol), name
            assert not res.tolerance_limited
            assert res.certificate is not None

    def test_free_rate_beats_identity_rate(self):
        for name, a in [("1B", 0.1537), ("1C", 0.3999)]:
            free = max_chi_search(model(name), K.THEOREM1, a).chi
            pinned = max_chi_search(model(name), K.COROLLARY2, a).chi
            assert free > pinned

    def test_free_rate_degenerate_is_floor(self):
        res = max_chi_search(model("1D"), K.THEOREM1, 0.3332)
        assert res.chi == pytest.approx(1e-5, abs=1e-6)
        assert res.tolerance_limited

    def test_max_chi_wrapper(self):
        chi, p = max_chi(model("1A"), K.COROLLARY2, 0.4999)
        assert chi == pytest.approx(0.0004, abs=1e-10)
        assert np.array_equal(p, np.eye(2))


class TestAsymptoticBound:
    def test_identity_certificate_values(self):
        # (a/chi) * sigma^2 * tr(S)
        s = model("1A").second_moment
        assert asymptotic_bound(K.COROLLARY2, 0.4999, 0.0004, None, s, 0.1) \
            == pytest.approx(24.995, rel=1e-9)
        s = model("1B").second_moment
        assert asymptotic_bound(K.COROLLARY2, 0.1537, 0.0076, None, s, 0.1) \
            == pytest.approx(0.1537 * 0.01 * 5.0 / 0.0076, rel=1e-12)

    def test_identity_certificate_zero_rate_is_infinite(self):
        s = model("1D").second_moment
        assert asymptotic_bound(K.COROLLARY2, 0.3332, 0.0, None, s, 0.1) \
            == float("inf")

    def test_zhu_values(self):
        s = model("1A").second_moment
        assert asymptotic_bound(K.ZHU, 0.4999, None, None, s, 0.1) \
            == pytest.approx(0.004999, rel=1e-12)
        s = model("1B").second_moment
        assert asymptotic_bound(K.ZHU, 0.1537, None, None, s, 0.1) \
            == pytest.approx(0.0038425, rel=1e-12)

    def test_zhu_singular_is_infinite(self):
        s = model("1D").second_moment
        assert asymptotic_bound(K.ZHU, 0.3332, None, None, s, 0.1) \
            == float("inf")

    def test_free_certificate_identity_p_matches_identity_route(self):
        # with P = I the free-matrix bound reduces to the identity bound
        s = model("1B").second_moment
        free = asymptotic_bound(K.THEOREM1, 0.1537, 0.0076, np.eye(2), s, 0.1)
        pinned = asymptotic_bound(K.COROLLARY2, 0.1537, 0.0076, None, s, 0.1)
        assert free == pytest.approx(pinned, rel=1e-12)

    def test_free_certificate_requires_arguments(self):
        s = model("1A").second_moment
        with pytest.raises(ValueError, match="chi and P"):
            asymptotic_bound(K.THEOREM1, 0.1, None, None, s, 0.1)
        with pytest.raises(ValueError, match="corollary2"):
            asymptotic_bound(K.COROLLARY2, 0.1, None, None, s, 0.1)

    def test_widrow_kinds_have_no_bound(self):
        s = model("1A").second_moment
        for kind in (K.WIDROW_LAMBDA_MAX, K.WIDROW_TRACE):
            with pytest.raises(ValueError, match="no error bound"):
                asymptotic_bound(kind, 0.1, None, None, s, 0.1)


class TestFiniteKBound:
    def test_hand_value(self):
        # contraction 0.9; inject a*sigma^2*tr(P S) = 0.002
        val = finite_k_bound(0.1, 1.0, np.eye(2), np.eye(2), 0.1, 3.0, 1)
        assert val == pytest.approx(2.7002, abs=1e-12)

    def test_k_zero_is_initial_energy_over_min_eig(self):
        p = np.diag([2.0, 5.0])
        val = finite_k_bound(0.1, 1.0, p, np.eye(2), 0.1, 3.0, 0)
        assert val == pytest.approx(1.5, abs=1e-12)

    def test_limit_matches_asymptotic_identity_bound(self):
        s = model("1B").second_moment
        val = finite_k_bound(0.1537, 0.0076, np.eye(2), s, 0.1, 5.0, 10**7)
        expected = asymptotic_bound(K.COROLLARY2, 0.1537, 0.0076, None, s, 0.1)
        assert val == pytest.approx(expected, rel=1e-4)

    def test_monotone_decreasing_when_start_above_floor(self):
        s = model("1B").second_moment
        vals = [finite_k_bound(0.1537, 0.0076, np.eye(2), s, 0.1, 5.0, k)
                for k in (0, 10, 100, 1000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_invalid_rate(self):
        with pytest.raises(InvalidRate):
            finite_k_bound(0.1, 25.0, np.eye(2), np.eye(2), 0.1, 3.0, 1)
        with pytest.raises(InvalidRate):
            finite_k_bound(0.1, 0.0, np.eye(2), np.eye(2), 0.1, 3.0, 1)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError, match="k must be nonnegative"):
            finite_k_bound(0.1, 1.0, np.eye(2), np.eye(2), 0.1, 3.0, -1)
        with pytest.raises(ValueError, match="positive definite"):
            finite_k_bound(0.1, 1.0, np.diag([1.0, -1.0]), np.eye(2), 0.1, 3.0, 1)


class TestInitialEnergy:
    def test_random_start_law(self):
        theta = np.array([1.0, 1.0])
        m0 = initial_error_second_moment(theta)
        assert np.allclose(m0, np.eye(2) + np.ones((2, 2)), atol=1e-14)

    def test_fixed_start(self):
        theta = np.array([1.0, 1.0])
        m0 = initial_error_second_moment(theta, init=np.array([0.0, 0.0]))
        assert np.allclose(m0, np.ones((2, 2)), atol=1e-14)

    def test_unknown_law(self):
        with pytest.raises(ValueError, match="unknown init law"):
            initial_error_second_moment(np.array([1.0]), init="uniform")

    def test_initial_v_is_trace_form(self):
        theta = np.array([1.0, 1.0])
        p = np.diag([2.0, 3.0])
        # tr(P (I + theta theta^T)) = (2+3) + (2+3)
        assert initial_v(p, theta) == pytest.approx(10.0, abs=1e-12)
        assert initial_v(p, theta, init=np.zeros(2)) == pytest.approx(
            5.0, abs=1e-12)
