"""Uplink training under a pilot-spoofing eavesdropper.

Eve always replays the pilot of user 1, which is index 0 in every array
here.  Pilots are never materialised: with orthogonal pilots only the
post-projection signals ``y_km`` matter.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .netgen import LargeScale

ATTACKED = 0  # Eve spoofs the pilot of user 1


@dataclass(frozen=True)
class ChannelStats:
    """Second-order statistics of the MMSE channel estimates.

    ``gamma_mk[m, k] = E|g_hat_mk|^2``; ``gamma_me = alpha_m * gamma_m1``
    is the variance of Eve's channel estimate implied by the spoofed pilot.
    """

    gamma_mk: np.ndarray
    gamma_me: np.ndarray
    alpha_m: np.ndarray
    beta: LargeScale
    rho_u: float
    rho_e: float
    pilot_len: int

    @property
    def beta_mk(self):
        return self.beta.beta_mk

    @property
    def beta_me(self):
        return self.beta.beta_me

    @property
    def shape(self):
        return self.gamma_mk.shape


@dataclass(frozen=True)
class TrainingObservation:
    """Post-projection training signals for ``n`` independent snapshots.

    ``y`` has shape (n, M, K).  The true channels that produced it are kept
    alongside so Monte Carlo checks can compare estimates with reality.
    """

    y: np.ndarray
    g: np.ndarray
    g_e: np.ndarray
    attacked_pilot: int = ATTACKED


@dataclass(frozen=True)
class DetectionReport:
    y_stat: float
    threshold: float
    attack_detected: bool
    rho_e_estimate: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "y_stat": self.y_stat,
            "threshold": self.threshold,
            "detected": self.attack_detected,
            "rho_e_estimate": self.rho_e_estimate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def channel_stats(ls: LargeScale, rho_u: float, rho_e: float,
                  pilot_len: int) -> ChannelStats:
    if rho_u <= 0 or rho_e < 0 or pilot_len < 1:
        raise ValueError("need rho_u > 0, rho_e >= 0 and pilot_len >= 1")
    t = float(pilot_len)
    beta = ls.beta_mk
    b1 = beta[:, ATTACKED]
    be = ls.beta_me
    gamma = t * rho_u * beta**2 / (t * rho_u * beta + 1.0)
    gamma[:, ATTACKED] = t * rho_u * b1**2 / (t * rho_u * b1 + t * rho_e * be + 1.0)
    alpha = rho_e * be**2 / (rho_u * b1**2)
    return ChannelStats(gamma, alpha * gamma[:, ATTACKED], alpha, ls,
                        float(rho_u), float(rho_e), int(pilot_len))


def _cn(rng, shape, var):
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(np.asarray(var) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def simulate_training(ls: LargeScale, rho_u: float, rho_e: float,
                      pilot_len: int, rng: np.random.Generator,
                      n_snapshots: int = 1) -> TrainingObservation:
    """Draw channels and the projected pilot signals at every AP."""
    m, k = ls.beta_mk.shape
    n = n_snapshots
    g = _cn(rng, (n, m, k), ls.beta_mk)
    g_e = _cn(rng, (n, m), ls.beta_me)
    noise = _cn(rng, (n, m, k), 1.0)
    y = np.sqrt(pilot_len * rho_u) * g + noise
    y[:, :, ATTACKED] += np.sqrt(pilot_len * rho_e) * g_e
    return TrainingObservation(y, g, g_e)


def mmse_estimate(obs: TrainingObservation, stats: ChannelStats):
    """Return ``(g_hat, g_hat_e)`` with shapes (n, M, K) and (n, M)."""
    t = stats.pilot_len
    ru, re = stats.rho_u, stats.rho_e
    beta = stats.beta_mk
    b1, be = beta[:, ATTACKED], stats.beta_me
    scale = np.sqrt(t * ru) * beta / (t * ru * beta + 1.0)
    scale[:, ATTACKED] = np.sqrt(t * ru) * b1 / (t * ru * b1 + t * re * be + 1.0)
    g_hat = scale * obs.y
    g_hat_e = np.sqrt(re / ru) * (be / b1) * g_hat[:, :, ATTACKED]
    return g_hat, g_hat_e


def expected_pilot_energy(ls: LargeScale, rho_u: float, rho_e: float,
                          pilot_len: int) -> np.ndarray:
    """E|y_1m|^2 per AP."""
    t = pilot_len
    return t * rho_u * ls.beta_mk[:, ATTACKED] + t * rho_e * ls.beta_me + 1.0


def sample_pilot_energy(ls: LargeScale, rho_u: float, rho_e: float,
                        pilot_len: int, rng: np.random.Generator,
                        n_snapshots: int) -> np.ndarray:
    """Per-AP sample mean of |y_1m|^2 over independent training snapshots."""
    m = ls.beta_me.shape[0]
    g1 = _cn(rng, (n_snapshots, m), ls.beta_mk[:, ATTACKED])
    ge = _cn(rng, (n_snapshots, m), ls.beta_me)
    w = _cn(rng, (n_snapshots, m), 1.0)
    y1 = np.sqrt(pilot_len * rho_u) * g1 + np.sqrt(pilot_len * rho_e) * ge + w
    return np.mean(np.abs(y1) ** 2, axis=0)


def detect_attack(ls: LargeScale, rho_u: float, pilot_len: int,
                  energies, tau_det: float = 0.05) -> DetectionReport:
    """Energy test on the attacked pilot.

    Flags an attack when the summed per-AP energy exceeds its no-attack
    value by more than the relative guard ``tau_det``; ``tau_det = 0`` is
    the exact-expectation rule.
    """
    energies = np.asarray(energies, dtype=float)
    if not np.all(np.isfinite(energies)):
        raise ValueError("pilot energies must be finite")
    if np.any(energies < 0):
        raise ValueError("pilot energies must be nonnegative")
    y_stat = float(np.sum(energies))
    # summed per AP like the statistic so H0 expectations match bit for bit
    threshold = float(np.sum(pilot_len * rho_u * ls.beta_mk[:, ATTACKED] + 1.0))
    detected = y_stat > threshold * (1.0 + tau_det)
    rho_hat = None
    if detected:
        rho_hat = (y_stat - threshold) / (pilot_len * float(np.sum(ls.beta_me)))
    return DetectionReport(y_stat, threshold, bool(detected), rho_hat)
