"""Network geometry, Hata-COST231 path loss, shadowing and noise power.

Distances are in km and powers in W at this layer.  Everything downstream
works with noise-normalised powers (``rho = P / N0``), produced here by
:func:`normalized_powers`.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BOLTZMANN = 1.38e-23  # J/K, value used by the reference setup


class ConfigError(ValueError):
    """Raised for invalid simulation or experiment configuration."""


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulated deployment.

    Antenna heights (20 m at the APs, 1.5 m at users and Eve) and the
    1900 MHz carrier are baked into the path-loss constants and have no
    field of their own.
    """

    m_aps: int = 50
    k_users: int = 8
    area_km: float = 1.0
    bandwidth_hz: float = 20e6
    noise_figure_db: float = 9.0
    noise_temp_k: float = 290.0
    shadow_sigma_db: float = 8.0
    p_max_w: float = 1.0
    p_s_w: float = 0.8
    p_u_w: float = 0.3
    p_e_w: float = 0.1
    pilot_len: int = 12
    rng_seed: int = 0

    def __post_init__(self):
        if self.m_aps < 1:
            raise ConfigError(f"m_aps must be >= 1, got {self.m_aps}")
        if self.k_users < 1:
            raise ConfigError(f"k_users must be >= 1, got {self.k_users}")
        if self.pilot_len < self.k_users:
            raise ConfigError(
                f"pilot_len ({self.pilot_len}) must be >= k_users "
                f"({self.k_users}) for orthogonal pilots")
        if self.area_km <= 0:
            raise ConfigError("area_km must be positive")
        for name in ("p_max_w", "p_s_w", "p_u_w"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        # p_e_w = 0 encodes the no-attack hypothesis
        if self.p_e_w < 0:
            raise ConfigError("p_e_w must be nonnegative")
        if self.bandwidth_hz <= 0 or self.noise_temp_k <= 0:
            raise ConfigError("bandwidth_hz and noise_temp_k must be positive")
        if self.shadow_sigma_db < 0:
            raise ConfigError("shadow_sigma_db must be nonnegative")

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> SimConfig:
    """Read a flat JSON object whose keys are :class:`SimConfig` field names."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return SimConfig.from_dict(data)


@dataclass(frozen=True)
class NormalizedPowers:
    """Transmit powers divided by the noise power N0."""

    rho_u: float
    rho_e: float
    rho_s: float
    rho_max: float
    noise_w: float


@dataclass(frozen=True)
class NetworkGeometry:
    ap_xy: np.ndarray    # (M, 2) km
    user_xy: np.ndarray  # (K, 2) km
    eve_xy: np.ndarray   # (2,) km
    d_mk: np.ndarray     # (M, K) km
    d_me: np.ndarray     # (M,) km


@dataclass(frozen=True)
class LargeScale:
    """Linear-scale large-scale fading towards users (M, K) and Eve (M,)."""

    beta_mk: np.ndarray
    beta_me: np.ndarray

    @property
    def shape(self):
        return self.beta_mk.shape


def path_loss_db(d):
    """Three-slope Hata-COST231 path loss in dB for distance ``d`` in km.

    The far and middle slopes do not meet exactly at 50 m (a ~0.02 dB
    step); that matches the published model and is kept as is.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    with np.errstate(divide="ignore"):
        logd = np.log10(np.where(d > 0, d, 1.0))
    pl = np.where(
        d > 0.05, -139.4 - 35.0 * logd,
        np.where(d > 0.01, -119.9 - 20.0 * logd, -79.9))
    return pl if pl.ndim else float(pl)


def thermal_noise_w(bandwidth_hz, noise_figure_db=9.0, noise_temp_k=290.0):
    """bandwidth * k_B * T0 * NF, with the noise figure given in dB."""
    return bandwidth_hz * BOLTZMANN * noise_temp_k * 10.0 ** (noise_figure_db / 10.0)


def noise_power_w(cfg: SimConfig) -> float:
    return thermal_noise_w(cfg.bandwidth_hz, cfg.noise_figure_db, cfg.noise_temp_k)


def normalized_powers(cfg: SimConfig) -> NormalizedPowers:
    n0 = noise_power_w(cfg)
    return NormalizedPowers(
        rho_u=cfg.p_u_w / n0,
        rho_e=cfg.p_e_w / n0,
        rho_s=cfg.p_s_w / n0,
        rho_max=cfg.p_max_w / n0,
        noise_w=n0,
    )


def drop_rngs(seed: int, n_drops: int) -> list[np.random.Generator]:
    """Independent generators, one per Monte Carlo drop, from a single seed."""
    children = np.random.SeedSequence(seed).spawn(n_drops)
    return [np.random.default_rng(c) for c in children]


def geometry_from_positions(ap_xy, user_xy, eve_xy) -> NetworkGeometry:
    ap_xy = np.atleast_2d(np.asarray(ap_xy, dtype=float))
    user_xy = np.atleast_2d(np.asarray(user_xy, dtype=float))
    eve_xy = np.asarray(eve_xy, dtype=float).reshape(2)
    d_mk = np.linalg.norm(ap_xy[:, None, :] - user_xy[None, :, :], axis=-1)
    d_me = np.linalg.norm(ap_xy - eve_xy[None, :], axis=-1)
    return NetworkGeometry(ap_xy, user_xy, eve_xy, d_mk, d_me)


def gen_geometry(cfg: SimConfig, rng: np.random.Generator) -> NetworkGeometry:
    """Drop APs, users and Eve i.i.d. uniformly over the square area."""
    side = cfg.area_km
    ap_xy = rng.uniform(0.0, side, size=(cfg.m_aps, 2))
    user_xy = rng.uniform(0.0, side, size=(cfg.k_users, 2))
    eve_xy = rng.uniform(0.0, side, size=2)
    return geometry_from_positions(ap_xy, user_xy, eve_xy)


def gen_large_scale(geo: NetworkGeometry, cfg: SimConfig,
                    rng: np.random.Generator) -> LargeScale:
    """beta = 10^((S + PL(d))/10) with S ~ N(0, sigma^2) dB per link."""
    sigma = cfg.shadow_sigma_db
    m, k = geo.d_mk.shape
    shadow_mk = sigma * rng.standard_normal((m, k))
    shadow_me = sigma * rng.standard_normal(m)
    beta_mk = 10.0 ** ((shadow_mk + path_loss_db(geo.d_mk)) / 10.0)
    beta_me = 10.0 ** ((shadow_me + path_loss_db(geo.d_me)) / 10.0)
    return LargeScale(beta_mk, beta_me)


def write_large_scale_csv(ls: LargeScale, path) -> None:
    """One row per AP; user columns first, Eve in the last column."""
    m, k = ls.beta_mk.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ap"] + [f"user_{j + 1}" for j in range(k)] + ["eve"])
        for i in range(m):
            w.writerow([i + 1] + [repr(float(v)) for v in ls.beta_mk[i]]
                       + [repr(float(ls.beta_me[i]))])


def read_large_scale_csv(path) -> LargeScale:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return LargeScale(body[:, :-1].copy(), body[:, -1].copy())
