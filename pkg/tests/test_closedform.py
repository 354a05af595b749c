import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfree_secure import closedform as cf
from cellfree_secure import estimation, harness, sinr
from cellfree_secure.harness import Thresholds
from cellfree_secure.netgen import LargeScale
from oracles import equal_power_ref, random_instance


def ctx_from(omega, omega_b, varpi, varpi_b, eta_cap):
    return cf.EqualPowerContext(np.atleast_1d(np.asarray(omega, float)),
                                np.atleast_1d(np.asarray(omega_b, float)),
                                float(varpi), float(varpi_b), float(eta_cap))


@pytest.fixture(scope="module")
def instances():
    return [random_instance(6, 3, s) for s in range(8)]


class TestContext:
    def test_hand_values(self):
        stats = estimation.ChannelStats(np.array([[1.0]]), np.array([0.0]), np.array([0.0]),
                                        LargeScale(np.array([[1.0]]), np.array([1.0])), 1.0, 0.0, 1)
        eq = cf.equal_power_context(stats, 1.0, 1.0)
        assert eq.omega_k.tolist() == [1.0]
        assert eq.omega_breve_k.tolist() == [1.0]
        assert eq.eta_cap == 1.0

    def test_matches_loop_reference(self, instances):
        for inst in instances:
            st_ = inst.stats
            ref = equal_power_ref(st_.gamma_mk, st_.beta_mk, st_.beta_me, st_.alpha_m,
                                  inst.ctx.rho_s, inst.ctx.rho_max)
            eq = inst.equal
            np.testing.assert_allclose(eq.omega_k, ref[0], rtol=1e-12)
            np.testing.assert_allclose(eq.omega_breve_k, ref[1], rtol=1e-12)
            assert eq.varpi == pytest.approx(ref[2], rel=1e-12)
            assert eq.varpi_breve == pytest.approx(ref[3], rel=1e-12)
            assert eq.eta_cap == pytest.approx(ref[4], rel=1e-12)

    def test_no_attack_reduction(self):
        inst = random_instance(5, 3, 0, p_e_w=0.0)
        st_ = inst.stats
        want = inst.ctx.rho_s * np.sum(st_.gamma_mk[:, 0] * st_.beta_me)
        assert inst.equal.varpi == pytest.approx(want, rel=1e-13)

    def test_reduced_snrs_match_general_evaluator(self, instances):
        for inst in instances:
            eq = inst.equal
            for frac in (1e-4, 0.3, 1.0):
                eta = frac * eq.eta_cap
                psi = np.full(inst.ctx.shape, math.sqrt(eta))
                np.testing.assert_allclose(eq.snr_users(eta), sinr.snr_users(inst.ctx, psi), rtol=1e-12)
                assert float(eq.snr_eve(eta)) == pytest.approx(sinr.snr_eve(inst.ctx, psi), rel=1e-12)

    def test_cap_saturates_some_ap(self, instances):
        for inst in instances:
            psi = np.full(inst.ctx.shape, math.sqrt(inst.equal.eta_cap))
            values, feasible, _ = sinr.per_ap_power(inst.ctx, psi)
            assert feasible
            assert values.max() == pytest.approx(inst.ctx.power_cap, rel=1e-12)


class TestP1Bar:
    def test_power_limited_regime(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 1.0, 0.5, 4.0)
        sol = cf.solve_p1_bar(eq, [0.1], theta_e=2.0)  # theta_e >= varpi / varpi_breve
        assert sol.eta_star == 4.0 and sol.binding == "power cap"

    def test_eve_cap_binding(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 1.0, 0.5, 4.0)
        sol = cf.solve_p1_bar(eq, [0.1], theta_e=0.5)
        assert sol.eta_star == pytest.approx(0.5 / (1.0 - 0.25), rel=1e-14)
        assert sol.binding == "eve cap"

    def test_user_floor_violating_necessary_condition(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 1.0, 0.5, 4.0)
        sol = cf.solve_p1_bar(eq, [3.0], theta_e=2.0)
        assert not sol.feasible
        assert ("theta_2 < omega/omega_breve", False) in sol.conditions_checked

    def test_eve_cap_below_user_floor(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 1.0, 0.5, 4.0)
        sol = cf.solve_p1_bar(eq, [1.0], theta_e=0.01)
        assert not sol.feasible and sol.binding == "eve cap"

    @settings(max_examples=50)
    @given(st.floats(1e-3, 1e3), st.floats(0.0, 1e3), st.floats(1e-6, 1.0))
    def test_objective_strictly_increasing(self, w, wb, cap):
        eq = ctx_from([w], [wb], 1.0, 1.0, cap)
        eta = np.linspace(0, cap, 257)
        snr = eq.snr_users(eta)[:, 0]
        assert np.all(np.diff(snr) > 0)

    def test_rejects_bad_thresholds(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 1.0, 0.5, 4.0)
        with pytest.raises(ValueError):
            cf.solve_p1_bar(eq, [0.1, 0.1], theta_e=1.0)
        with pytest.raises(ValueError):
            cf.solve_p1_bar(eq, [-0.1], theta_e=1.0)
        with pytest.raises(ValueError):
            cf.solve_p1_bar(eq, [0.1], theta_e=0.0)


class TestQ1Bar:
    def test_no_eavesdropper_term(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 0.0, 0.5, 4.0)
        sol = cf.solve_q1_bar(eq, [0.1])
        assert sol.eta_star == 4.0

    def test_interior_maximiser(self):
        # SNR_1 saturates at 1, SNR_E at 5: the ratio peaks strictly inside
        eq = ctx_from([1.0], [1.0], 0.5, 0.1, 100.0)
        sol = cf.solve_q1_bar(eq, [])
        assert sol.binding == "stationary point"
        eta = np.linspace(0, 100.0, 1_000_001)
        ratio = eq.secrecy_ratio(eta)
        best = eta[np.argmax(ratio)]
        assert abs(sol.eta_star - best) <= 1e-4 * 100.0
        assert sol.objective == pytest.approx(float(ratio.max()), abs=1e-8)
        # stationary point of the log-ratio, by hand: 1/(1+2e)/(1+e) ... solved numerically
        h = 1e-6
        assert (eq.secrecy_ratio(sol.eta_star + h) - eq.secrecy_ratio(sol.eta_star - h)) / (2 * h) == pytest.approx(0.0, abs=1e-6)

    def test_infeasible_floor(self):
        eq = ctx_from([2.0, 3.0], [1.0, 1.0], 0.5, 0.5, 4.0)
        assert not cf.solve_q1_bar(eq, [5.0]).feasible


class TestR1Bar:
    def test_hand_value(self):
        eq = ctx_from([2.0], [1.0], 1.0, 1.0, 10.0)
        sol = cf.solve_r1_bar(eq, [0.5], theta_e=1e6)
        assert sol.eta_star == pytest.approx(1 / 3, rel=1e-14)
        assert sol.objective == sol.eta_star
        assert sol.binding == "user 1 floor"

    def test_vanishing_thresholds(self):
        eq = ctx_from([2.0, 1.0], [1.0, 0.5], 1.0, 1.0, 10.0)
        etas = [cf.solve_r1_bar(eq, [t, t], theta_e=1e6).eta_star for t in (1e-2, 1e-5, 1e-9)]
        assert etas[0] > etas[1] > etas[2] > 0
        assert etas[2] < 1e-8

    def test_power_cap_infeasible(self):
        eq = ctx_from([2.0], [1.0], 1.0, 1.0, 0.1)
        sol = cf.solve_r1_bar(eq, [0.5], theta_e=1e6)
        assert not sol.feasible
        assert ("user floors reachable within power cap", False) in sol.conditions_checked


class TestS1Bar:
    def test_phi_one_has_no_constant_term(self):
        eq = ctx_from([2.0], [1.0], 1.0, 0.5, 3.0)
        a, b, c = cf.secrecy_quadratic(eq, 1.0)
        assert c == 0.0

    def test_quadratic_roots_hand_case(self):
        assert cf._quad_roots(-1.0, 0.0, 1.0) == [-1.0, 1.0]
        assert cf._quad_roots(0.0, 2.0, -1.0) == [0.5]
        assert cf._quad_roots(1.0, 0.0, 1.0) == []

    def test_matches_direct_ratio_check(self):
        eq = ctx_from([2.0, 1.0], [1.0, 0.5], 1.0, 0.5, 3.0)
        for phi in (0.5, 1.0, 1.05, 1.2):
            sol = cf.solve_s1_bar(eq, [0.05], phi)
            eta = np.linspace(0, 3.0, 300_001)
            ok = (eq.secrecy_ratio(eta) >= phi) & (eq.snr_users(eta)[:, 1] >= 0.05)
            if not ok.any():
                assert not sol.feasible
                continue
            assert sol.feasible
            assert abs(sol.eta_star - eta[np.argmax(ok)]) <= 3.0 / 300_000

    def test_unreachable_secrecy(self):
        eq = ctx_from([1.0, 1.0], [1.0, 1.0], 5.0, 0.1, 3.0)
        sol = cf.solve_s1_bar(eq, [0.01], 2.0)
        assert not sol.feasible
        assert ("secrecy floor reachable", False) in sol.conditions_checked

    def test_rejects_nonpositive_phi(self):
        with pytest.raises(ValueError):
            cf.solve_s1_bar(ctx_from([1.0], [1.0], 1.0, 1.0, 1.0), [], 0.0)


THRESHOLDS = [Thresholds(theta_k=2e-4, theta_1=0.1, theta_e=1e-4, r_phi=0.0),
              Thresholds(theta_k=0.02, theta_1=0.1, theta_e=0.002, r_phi=0.3)]


class TestAgainstGrid:
    @pytest.mark.parametrize("program", harness.EQUAL_PROGRAMS)
    def test_grid_oracle(self, program, instances):
        for inst in instances:
            for thr in THRESHOLDS:
                sol = harness.solve_closed_form(inst.equal, program, thr)
                grid = harness.oracle_grid_1d(inst.equal, program, thr, grid_points=100_000)
                assert sol.feasible == grid.feasible
                if not sol.feasible:
                    continue
                assert abs(sol.eta_star - grid.eta) <= 1e-5 * inst.equal.eta_cap
                assert sol.objective == pytest.approx(grid.objective, rel=1e-8, abs=1e-8)

    @pytest.mark.parametrize("program", harness.EQUAL_PROGRAMS)
    def test_solution_satisfies_constraints(self, program, instances):
        for inst in instances:
            for thr in THRESHOLDS:
                sol = harness.solve_closed_form(inst.equal, program, thr)
                if not sol.feasible:
                    continue
                assert 0 <= sol.eta_star <= inst.equal.eta_cap
                psi = np.full(inst.ctx.shape, math.sqrt(sol.eta_star))
                rep = sinr.rate_report(inst.ctx, psi)
                assert sinr.per_ap_power(inst.ctx, psi)[1]
                floors = np.array(thr.users(3))
                assert np.all(rep.snr_k[1:] >= floors * (1 - 1e-8))
                if program in ("P1_bar", "R1_bar"):
                    assert rep.snr_e <= thr.theta_e * (1 + 1e-8)
                if program == "R1_bar":
                    assert rep.snr_k[0] >= thr.theta_1 * (1 - 1e-8)
                if program == "S1_bar":
                    assert rep.r_sec >= thr.r_phi - 1e-8


def test_json():
    eq = ctx_from([2.0, 3.0], [1.0, 1.0], 1.0, 0.5, 4.0)
    d = json.loads(cf.solve_p1_bar(eq, [0.1], 2.0).to_json())
    assert d["program"] == "P1_bar" and d["feasible"] and d["eta_star"] == 4.0
    assert all(isinstance(ok, bool) for _, ok in d["conditions_checked"])
    d = json.loads(cf.solve_p1_bar(eq, [3.0], 2.0).to_json())
    assert d["eta_star"] is None and not d["feasible"]
