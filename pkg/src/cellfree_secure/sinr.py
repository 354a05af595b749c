"""SNR, rate and secrecy-rate evaluation for a power-control matrix.

The power-control matrix ``psi`` is an (M, K) array with
``psi[m, k] = sqrt(eta_mk)``; column ``k`` is the beam weight vector
``u_k``.  User index 0 is the user whose pilot is spoofed.

Two evaluators are provided for each SNR: the matrix form used by the
optimisers (``snr_users``, ``snr_eve``) and the explicit scalar sums
(``snr_users_scalar``, ``snr_eve_scalar``).  They are algebraically
identical and are cross-checked in the test suite.

Rates are in nats/s/Hz throughout.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .estimation import ATTACKED, ChannelStats


@dataclass(frozen=True)
class SinrContext:
    """Precomputed vectors and diagonal matrices for fast SNR evaluation.

    a : (M, K)
        Column k is ``a_k = sqrt(rho_s) * gamma[:, k]``.
    A : (K, K, M)
        ``A[k, kp]`` is the diagonal of ``A_{k kp}``,
        ``sqrt(rho_s * beta[:, k] * gamma[:, kp])``.
    b_e : (M,)
        Diagonal of ``B_E``.
    b_k : (M, K)
        Column kp is the diagonal of ``B_kp``; column 0 is zero since the
        attacked stream is not interference at Eve.
    """

    a: np.ndarray
    A: np.ndarray
    b_e: np.ndarray
    b_k: np.ndarray
    rho_s: float
    rho_max: float
    stats: ChannelStats
    noise_w: float = float("nan")

    @property
    def shape(self):
        return self.a.shape

    @property
    def power_cap(self) -> float:
        """Per-AP bound on ``sum_k psi^2 gamma`` (``rho_max / rho_s``)."""
        return self.rho_max / self.rho_s


@dataclass(frozen=True)
class RateReport:
    snr_k: np.ndarray
    snr_e: float
    rate_k: np.ndarray
    rate_e: float
    r_sec: float
    max_ap_power: float
    total_power_w: float

    @property
    def r_sec_clamped(self) -> float:
        return max(self.r_sec, 0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_k"] = [float(v) for v in self.snr_k]
        d["rate_k"] = [float(v) for v in self.rate_k]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> dict:
        row = {f"snr_{k + 1}": float(v) for k, v in enumerate(self.snr_k)}
        row["snr_e"] = self.snr_e
        row.update({f"rate_{k + 1}": float(v) for k, v in enumerate(self.rate_k)})
        row.update(rate_e=self.rate_e, r_sec=self.r_sec,
                   max_ap_power=self.max_ap_power,
                   total_power_w=self.total_power_w)
        return row


def to_bits(nats):
    return np.asarray(nats) / math.log(2.0)


def build_context(stats: ChannelStats, rho_s: float, rho_max: float,
                  noise_w: float = float("nan")) -> SinrContext:
    if rho_s <= 0:
        raise ValueError("rho_s must be positive")
    gamma = stats.gamma_mk
    beta = stats.beta_mk
    be = stats.beta_me
    g1 = gamma[:, ATTACKED]
    a = math.sqrt(rho_s) * gamma
    # A[k, kp, m] = sqrt(rho_s * beta[m, k] * gamma[m, kp])
    A = np.sqrt(rho_s * beta.T[:, None, :] * gamma.T[None, :, :])
    b_e = np.sqrt(rho_s * g1 * (stats.gamma_me + be))
    b_k = np.sqrt(rho_s * be[:, None] * gamma)
    b_k[:, ATTACKED] = 0.0
    return SinrContext(a, A, b_e, b_k, float(rho_s), float(rho_max), stats,
                       float(noise_w))


def check_psi(ctx: SinrContext, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != ctx.shape:
        raise ValueError(f"psi must have shape {ctx.shape}, got {psi.shape}")
    if np.any(psi < 0) or not np.all(np.isfinite(psi)):
        raise ValueError("psi entries must be finite and nonnegative")
    return psi


def phi_users(ctx: SinrContext, psi) -> np.ndarray:
    """``phi_k = sum_kp ||A_{k kp} u_kp||^2 + 1`` for every user k."""
    psi = np.asarray(psi, dtype=float)
    # sum over kp and m of A[k, kp, m]^2 * psi[m, kp]^2
    return np.einsum("kpm,mp->k", ctx.A**2, psi**2) + 1.0


def phi_eve(ctx: SinrContext, psi) -> float:
    psi = np.asarray(psi, dtype=float)
    return float(np.sum((ctx.b_k * psi) ** 2) + 1.0)


def signal_users(ctx: SinrContext, psi) -> np.ndarray:
    """``a_k^T u_k`` for every user."""
    return np.einsum("mk,mk->k", ctx.a, np.asarray(psi, dtype=float))


def snr_users(ctx: SinrContext, psi) -> np.ndarray:
    return signal_users(ctx, psi) ** 2 / phi_users(ctx, psi)


def snr_user(ctx: SinrContext, psi, k: int) -> float:
    return float(snr_users(ctx, psi)[k])


def snr_eve(ctx: SinrContext, psi) -> float:
    psi = np.asarray(psi, dtype=float)
    num = float(np.sum((ctx.b_e * psi[:, ATTACKED]) ** 2))
    return num / phi_eve(ctx, psi)


def snr_users_scalar(ctx: SinrContext, psi) -> np.ndarray:
    """Explicit sum form of the user SNRs, written in terms of eta."""
    st = ctx.stats
    eta = np.asarray(psi, dtype=float) ** 2
    gamma, beta = st.gamma_mk, st.beta_mk
    num = ctx.rho_s * np.sum(np.sqrt(eta) * gamma, axis=0) ** 2
    # interference seen by user k: sum_kp sum_m eta_mkp gamma_mkp beta_mk
    den = ctx.rho_s * (beta.T @ np.sum(eta * gamma, axis=1)) + 1.0
    return num / den


def snr_eve_scalar(ctx: SinrContext, psi) -> float:
    st = ctx.stats
    eta = np.asarray(psi, dtype=float) ** 2
    gamma, be, alpha = st.gamma_mk, st.beta_me, st.alpha_m
    g1 = gamma[:, ATTACKED]
    num = ctx.rho_s * np.sum(eta[:, ATTACKED] * g1 * (alpha * g1 + be))
    others = np.delete(np.arange(gamma.shape[1]), ATTACKED)
    den = ctx.rho_s * np.sum(eta[:, others] * gamma[:, others] * be[:, None]) + 1.0
    return float(num / den)


def per_ap_power(ctx: SinrContext, psi):
    """Return ``(values, feasible, total_w)``.

    ``values[m] = sum_k psi[m, k]^2 gamma[m, k]`` is the AP's transmit
    power divided by ``P_s``; it is feasible when it does not exceed
    ``rho_max / rho_s`` by more than a relative 1e-12 (rounding).  ``total_w`` converts the sum over APs to watts
    and is NaN when the context carries no noise power.
    """
    psi = np.asarray(psi, dtype=float)
    values = np.sum(psi**2 * ctx.stats.gamma_mk, axis=1)
    feasible = bool(np.all(values <= ctx.power_cap * (1.0 + 1e-12)))
    total_w = float(np.sum(values) * ctx.rho_s * ctx.noise_w)
    return values, feasible, total_w


def rate_report(ctx: SinrContext, psi) -> RateReport:
    psi = check_psi(ctx, psi)
    snr_k = snr_users(ctx, psi)
    snr_e = snr_eve(ctx, psi)
    rate_k = np.log1p(snr_k)
    rate_e = math.log1p(snr_e)
    values, _, total_w = per_ap_power(ctx, psi)
    return RateReport(snr_k, snr_e, rate_k, rate_e,
                      float(rate_k[ATTACKED] - rate_e),
                      float(values.max()), total_w)


def reports_to_csv(reports) -> str:
    rows = [r.csv_row() for r in reports]
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# -- Monte Carlo validators -------------------------------------------------
#
# These draw small-scale fading and estimate the moments that the closed
# forms above are built from.  They are slow and meant for tests.

def _draw_estimates(stats: ChannelStats, rng, n_draws):
    from .estimation import mmse_estimate, simulate_training
    obs = simulate_training(stats.beta, stats.rho_u, stats.rho_e,
                            stats.pilot_len, rng, n_draws)
    g_hat, g_hat_e = mmse_estimate(obs, stats)
    return obs, g_hat, g_hat_e


def mc_eve_moments(ctx: SinrContext, psi, rng, n_draws: int = 100_000,
                   chunk: int = 20_000):
    """Monte Carlo estimates of Eve's signal and leakage moments.

    Returns ``(bu, ui, bu_coherent)``:

    bu
        ``rho_s * sum_m eta_m1 * E|g_mE conj(g_hat_m1)|^2``, the per-AP
        moment sum that the closed-form SNR_E numerator evaluates.
    ui : (K,)
        ``E|UI_{E,k'}|^2`` for every k' (entry 0 unused, set to NaN).
    bu_coherent
        ``E|BU_{E,1}|^2`` of the full coherent sum over APs.  It exceeds
        ``bu`` because ``g_mE`` and ``g_hat_m1`` are correlated under the
        spoofing attack, so the cross-AP terms do not vanish.
    """
    psi = np.asarray(psi, dtype=float)
    m, k = psi.shape
    rs = ctx.rho_s
    acc_bu = 0.0
    acc_coh = 0.0
    acc_ui = np.zeros(k)
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        obs, g_hat, _ = _draw_estimates(ctx.stats, rng, n)
        prod1 = obs.g_e * np.conj(g_hat[:, :, ATTACKED])           # (n, M)
        acc_bu += np.sum(np.abs(prod1) ** 2, axis=0) @ psi[:, ATTACKED] ** 2
        coh = np.sqrt(rs) * (prod1 @ psi[:, ATTACKED])
        acc_coh += np.sum(np.abs(coh) ** 2)
        ui = np.sqrt(rs) * np.einsum("nm,nmk,mk->nk", obs.g_e,
                                     np.conj(g_hat), psi)
        acc_ui += np.sum(np.abs(ui) ** 2, axis=0)
        done += n
    ui_mean = acc_ui / n_draws
    ui_mean[ATTACKED] = np.nan
    return rs * acc_bu / n_draws, ui_mean, acc_coh / n_draws


def mc_user_snr(ctx: SinrContext, psi, k: int, rng, n_draws: int = 100_000,
                chunk: int = 20_000) -> float:
    """Sampled ``|DS|^2 / (E|BU|^2 + sum E|UI|^2 + 1)`` for user ``k``."""
    psi = np.asarray(psi, dtype=float)
    rs = ctx.rho_s
    kk = psi.shape[1]
    s_ds = 0.0
    s_ds2 = 0.0
    s_ui = np.zeros(kk)
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        obs, g_hat, _ = _draw_estimates(ctx.stats, rng, n)
        # effective gain of stream kp at user k, per draw
        gain = np.sqrt(rs) * np.einsum("nm,nmp,mp->np", obs.g[:, :, k],
                                       np.conj(g_hat), psi)
        s_ds += np.sum(gain[:, k])
        s_ds2 += np.sum(np.abs(gain[:, k]) ** 2)
        s_ui += np.sum(np.abs(gain) ** 2, axis=0)
        done += n
    ds = s_ds / n_draws
    bu = s_ds2 / n_draws - abs(ds) ** 2
    ui = np.delete(s_ui / n_draws, k).sum()
    return float(abs(ds) ** 2 / (bu + ui + 1.0))
