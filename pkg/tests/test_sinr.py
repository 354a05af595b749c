import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfree_secure import estimation, sinr
from cellfree_secure.netgen import LargeScale
from oracles import make_context, snr_eve_ref, snr_user_ref


def hand_context(gamma=1.0, beta=1.0, beta_e=1.0, alpha=0.0, rho_s=1.0, rho_max=1.0):
    """M=1, K=1 context with directly chosen statistics."""
    g = np.array([[gamma]])
    stats = estimation.ChannelStats(g, np.array([alpha * gamma]), np.array([alpha]),
                                    LargeScale(np.array([[beta]]), np.array([beta_e])),
                                    1.0, 0.0, 1)
    return sinr.build_context(stats, rho_s, rho_max, 1.0)


def random_context(rng, m, k):
    beta = 10 ** rng.uniform(-12.5, -9, size=(m, k))
    be = 10 ** rng.uniform(-12.5, -9, size=m)
    return make_context(beta, be, p_s=rng.uniform(0.1, 1), p_u=rng.uniform(0.1, 1),
                        p_e=rng.uniform(0.01, 1), pilot_len=max(k, 12))


def random_psi(rng, ctx):
    return np.sqrt(rng.uniform(0, 1, ctx.shape) * ctx.power_cap / ctx.stats.gamma_mk / ctx.shape[1])


class TestContext:
    def test_hand_values(self):
        ctx = hand_context(beta=0.25)
        assert ctx.a.tolist() == [[1.0]]
        assert ctx.A[0, 0].tolist() == [0.5]

    def test_no_attack_eve_diagonal(self, rng):
        beta = rng.uniform(0.1, 1, (4, 3))
        be = rng.uniform(0.1, 1, 4)
        ls = LargeScale(beta, be)
        st_ = estimation.channel_stats(ls, 2.0, 0.0, 3)
        ctx = sinr.build_context(st_, 1.5, 2.0)
        np.testing.assert_allclose(ctx.b_e, np.sqrt(1.5 * st_.gamma_mk[:, 0] * be), rtol=1e-15)

    def test_eve_diagonal_identity(self, rng):
        for _ in range(20):
            ctx = random_context(rng, 6, 3)
            st_ = ctx.stats
            g1 = st_.gamma_mk[:, 0]
            want = ctx.rho_s * g1 * (st_.alpha_m * g1 + st_.beta_me)
            np.testing.assert_allclose(ctx.b_e ** 2, want, rtol=1e-13)

    def test_nonnegative_entries(self, rng):
        ctx = random_context(rng, 5, 4)
        for arr in (ctx.a, ctx.A, ctx.b_e, ctx.b_k):
            assert np.all(arr >= 0)
        assert np.all(ctx.b_k[:, 0] == 0)

    def test_rejects_nonpositive_rho_s(self):
        ctx = hand_context()
        with pytest.raises(ValueError):
            sinr.build_context(ctx.stats, 0.0, 1.0)


class TestSnr:
    def test_zero_power(self, rng):
        ctx = random_context(rng, 4, 3)
        psi = np.zeros(ctx.shape)
        assert np.all(sinr.snr_users(ctx, psi) == 0)
        assert sinr.snr_eve(ctx, psi) == 0

    def test_hand_user_value(self):
        assert sinr.snr_user(hand_context(), [[1.0]], 0) == pytest.approx(0.5, rel=1e-15)

    def test_user_one_unpowered(self, rng):
        ctx = random_context(rng, 4, 3)
        psi = random_psi(rng, ctx)
        psi[:, 0] = 0
        assert sinr.snr_eve(ctx, psi) == 0

    def test_single_user_eve_has_no_interference(self, rng):
        ctx = random_context(rng, 5, 1)
        psi = random_psi(rng, ctx)
        assert sinr.phi_eve(ctx, psi) == 1.0
        assert sinr.snr_eve(ctx, psi) == pytest.approx(np.sum((ctx.b_e * psi[:, 0]) ** 2), rel=1e-15)

    def test_matrix_matches_loop_reference(self, rng):
        for _ in range(10):
            ctx = random_context(rng, 5, 3)
            psi = random_psi(rng, ctx)
            st_ = ctx.stats
            eta = psi ** 2
            for k in range(3):
                want = snr_user_ref(st_.gamma_mk, st_.beta_mk, ctx.rho_s, eta, k)
                assert sinr.snr_user(ctx, psi, k) == pytest.approx(want, rel=1e-12)
            want = snr_eve_ref(st_.gamma_mk, st_.beta_me, st_.alpha_m, ctx.rho_s, eta)
            assert sinr.snr_eve(ctx, psi) == pytest.approx(want, rel=1e-12)

    def test_matrix_matches_scalar_form(self, rng):
        for _ in range(50):
            m, k = rng.integers(1, 9), rng.integers(1, 6)
            ctx = random_context(rng, m, k)
            psi = random_psi(rng, ctx)
            np.testing.assert_allclose(sinr.snr_users(ctx, psi), sinr.snr_users_scalar(ctx, psi), rtol=1e-12)
            assert sinr.snr_eve(ctx, psi) == pytest.approx(sinr.snr_eve_scalar(ctx, psi), rel=1e-12, abs=1e-300)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1.0, 10.0))
    def test_scaling_up_never_hurts(self, seed, c):
        r = np.random.default_rng(seed)
        ctx = random_context(r, 4, 3)
        psi = random_psi(r, ctx)
        assert np.all(sinr.snr_users(ctx, c * psi) >= sinr.snr_users(ctx, psi) * (1 - 1e-12))
        assert sinr.snr_eve(ctx, c * psi) >= sinr.snr_eve(ctx, psi) * (1 - 1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_denominators_at_least_one(self, seed):
        r = np.random.default_rng(seed)
        ctx = random_context(r, 3, 4)
        psi = random_psi(r, ctx) * r.uniform(0, 5)
        assert np.all(sinr.phi_users(ctx, psi) >= 1.0)
        assert sinr.phi_eve(ctx, psi) >= 1.0


class TestRateReport:
    def test_zero_power(self, rng):
        ctx = random_context(rng, 3, 2)
        rep = sinr.rate_report(ctx, np.zeros(ctx.shape))
        assert np.all(rep.rate_k == 0) and rep.rate_e == 0 and rep.r_sec == 0

    def test_hand_case_formula_value(self):
        rep = sinr.rate_report(hand_context(), [[1.0]])
        assert rep.rate_k[0] == pytest.approx(math.log(1.5), rel=1e-15)
        assert rep.snr_e == pytest.approx(1.0, rel=1e-15)
        assert rep.rate_e == pytest.approx(math.log(2.0), rel=1e-15)
        assert rep.r_sec == pytest.approx(math.log(0.75), rel=1e-14)
        assert rep.r_sec_clamped == 0.0

    def test_equal_snrs_give_zero_secrecy(self):
        rep = sinr.rate_report(hand_context(beta_e=0.5), [[1.0]])
        assert rep.snr_e == pytest.approx(rep.snr_k[0], rel=1e-15)
        assert rep.r_sec == pytest.approx(0.0, abs=1e-15)

    def test_rejects_bad_psi(self, rng):
        ctx = random_context(rng, 3, 2)
        with pytest.raises(ValueError):
            sinr.rate_report(ctx, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            sinr.rate_report(ctx, -np.ones(ctx.shape))

    def test_serialisation(self, rng):
        ctx = random_context(rng, 3, 2)
        rep = sinr.rate_report(ctx, random_psi(rng, ctx))
        d = json.loads(rep.to_json())
        assert d["r_sec"] == rep.r_sec and len(d["snr_k"]) == 2
        text = sinr.reports_to_csv([rep, rep])
        lines = text.strip().splitlines()
        assert len(lines) == 3
        assert lines[0].split(",") == ["snr_1", "snr_2", "snr_e", "rate_1", "rate_2", "rate_e",
                                       "r_sec", "max_ap_power", "total_power_w"]
        assert sinr.reports_to_csv([]) == ""

    def test_bits(self):
        assert float(sinr.to_bits(math.log(2.0))) == pytest.approx(1.0, rel=1e-15)


class TestPerApPower:
    def test_zero(self, rng):
        ctx = random_context(rng, 3, 2)
        values, feasible, total = sinr.per_ap_power(ctx, np.zeros(ctx.shape))
        assert np.all(values == 0) and feasible and total == 0

    def test_hand_value(self):
        ctx = hand_context(gamma=0.5)
        values, feasible, total = sinr.per_ap_power(ctx, [[math.sqrt(2.0)]])
        assert values[0] == pytest.approx(1.0, rel=1e-15)
        assert feasible
        assert total == pytest.approx(1.0, rel=1e-15)

    def test_infeasible_detected(self):
        ctx = hand_context(gamma=0.5)
        assert not sinr.per_ap_power(ctx, [[2.0]])[1]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 10.0))
    def test_homogeneous(self, seed, c):
        r = np.random.default_rng(seed)
        ctx = random_context(r, 4, 3)
        psi = random_psi(r, ctx)
        np.testing.assert_allclose(sinr.per_ap_power(ctx, c * psi)[0],
                                   c * c * sinr.per_ap_power(ctx, psi)[0], rtol=1e-13)

    def test_total_in_watts(self, rng):
        ctx = random_context(rng, 4, 3)
        psi = random_psi(rng, ctx)
        values, _, total = sinr.per_ap_power(ctx, psi)
        p_s = ctx.rho_s * ctx.noise_w
        assert total == pytest.approx(p_s * values.sum(), rel=1e-13)


class TestMonteCarlo:
    def test_user_snr_matches_closed_form(self):
        r = np.random.default_rng(7)
        ctx = random_context(r, 4, 3)
        psi = random_psi(r, ctx)
        for k in range(3):
            mc = sinr.mc_user_snr(ctx, psi, k, np.random.default_rng(100 + k), 100_000)
            assert mc == pytest.approx(sinr.snr_user(ctx, psi, k), rel=0.02)

    def test_eve_moments_small_run(self):
        r = np.random.default_rng(8)
        ctx = random_context(r, 4, 3)
        psi = random_psi(r, ctx)
        bu, ui, coherent = sinr.mc_eve_moments(ctx, psi, np.random.default_rng(1), 50_000)
        assert bu == pytest.approx(float(np.sum((ctx.b_e * psi[:, 0]) ** 2)), rel=0.03)
        np.testing.assert_allclose(ui[1:], np.sum((ctx.b_k * psi) ** 2, axis=0)[1:], rtol=0.03)
        assert math.isnan(ui[0])
        assert coherent >= bu * 0.97
