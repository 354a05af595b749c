"""Closed-form power control when every AP uses one common coefficient.

With ``eta_mk = eta`` for all m, k every SNR collapses to a ratio of two
affine functions of the scalar ``eta``::

    SNR_k = eta * omega_k / (eta * omega_breve_k + 1)
    SNR_E = eta * varpi   / (eta * varpi_breve   + 1)

and the four programs become one-dimensional.  Each constraint then
restricts ``eta`` to a half-line, so every program reduces to an interval
``[alpha_lower, eta_upper]`` plus, for the secrecy programs, one scalar
objective or one quadratic inequality.

The raw aggregates span many orders of magnitude (``eta`` is of order
1e12 in noise-normalised units), so all arithmetic below runs on
``nu = eta / eta_cap`` in [0, 1].
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimation import ATTACKED, ChannelStats

GUARD = 1e-12  # relative slack at branch points


@dataclass(frozen=True)
class EqualPowerContext:
    """Aggregate channel quantities for the equal-power programs.

    omega_k, omega_breve_k : (K,)
        Signal and interference-plus-self-interference aggregates per user.
    varpi, varpi_breve : float
        The same pair for the eavesdropper.
    eta_cap : float
        Largest common ``eta`` allowed by every AP's power budget.
    """

    omega_k: np.ndarray
    omega_breve_k: np.ndarray
    varpi: float
    varpi_breve: float
    eta_cap: float

    @property
    def k_users(self) -> int:
        return self.omega_k.size

    def snr_users(self, eta):
        """Reduced user SNRs; ``eta`` may be an array (result shape (..., K))."""
        e = np.asarray(eta, dtype=float)[..., None]
        return e * self.omega_k / (e * self.omega_breve_k + 1.0)

    def snr_eve(self, eta):
        e = np.asarray(eta, dtype=float)
        return e * self.varpi / (e * self.varpi_breve + 1.0)

    def secrecy_ratio(self, eta):
        """``(1 + SNR_1) / (1 + SNR_E)``."""
        return (1.0 + self.snr_users(eta)[..., ATTACKED]) / (1.0 + self.snr_eve(eta))


@dataclass
class ClosedFormSolution:
    """Result of one equal-power program.

    ``eta_star`` is None when the program is infeasible.  ``objective`` is
    SNR_1 for the max-SNR program, the secrecy ratio for the max-secrecy
    program, and ``eta`` itself for the two power-minimisation programs.
    """

    program: str
    eta_star: Optional[float]
    objective: Optional[float]
    binding: str
    conditions_checked: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.eta_star is not None

    def to_dict(self) -> dict:
        return {
            "program": self.program,
            "eta_star": self.eta_star,
            "objective": self.objective,
            "binding": self.binding,
            "feasible": self.feasible,
            "conditions_checked": [[n, bool(ok)] for n, ok in self.conditions_checked],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def equal_power_context(stats: ChannelStats, rho_s: float,
                        rho_max: float) -> EqualPowerContext:
    gamma = stats.gamma_mk
    beta = stats.beta_mk
    be = stats.beta_me
    g1 = gamma[:, ATTACKED]
    omega = rho_s * gamma.sum(axis=0) ** 2
    # sum_kp sum_m gamma[m, kp] beta[m, k]
    omega_b = rho_s * (beta.T @ gamma.sum(axis=1))
    varpi = rho_s * float(np.sum(g1 * (stats.alpha_m * g1 + be)))
    others = np.delete(gamma, ATTACKED, axis=1)
    varpi_b = rho_s * float(np.sum(others * be[:, None]))
    eta_cap = float(np.min((rho_max / rho_s) / gamma.sum(axis=1)))
    return EqualPowerContext(omega, omega_b, varpi, varpi_b, eta_cap)


def _thresholds(ctx: EqualPowerContext, theta, include_first: bool) -> np.ndarray:
    """Return a length-K array of user thresholds, NaN where unconstrained.

    ``theta`` holds K values when user 1 is constrained and K-1 values
    (users 2..K) otherwise.
    """
    k = ctx.k_users
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    want = k if include_first else k - 1
    if theta.size != want:
        raise ValueError(f"expected {want} user thresholds, got {theta.size}")
    if np.any(theta <= 0) or not np.all(np.isfinite(theta)):
        raise ValueError("user thresholds must be positive and finite")
    if include_first:
        return theta.copy()
    return np.insert(theta, ATTACKED, np.nan)


class _Scaled:
    """Aggregates multiplied by ``eta_cap`` so that ``nu = eta / eta_cap``."""

    def __init__(self, ctx: EqualPowerContext):
        c = ctx.eta_cap
        self.w = ctx.omega_k * c
        self.wb = ctx.omega_breve_k * c
        self.v = ctx.varpi * c
        self.vb = ctx.varpi_breve * c


def _user_interval(sc: _Scaled, theta):
    """Lower bound on ``nu`` from the user SNR floors.

    Returns ``(nu_lo, conditions)``; ``nu_lo`` is inf when some floor is
    unreachable at any power.
    """
    conds = []
    nu_lo = 0.0
    for k, th in enumerate(theta):
        if np.isnan(th):
            continue
        slope = sc.w[k] - th * sc.wb[k]
        ok = slope > 0
        conds.append((f"theta_{k + 1} < omega/omega_breve", ok))
        if not ok:
            return math.inf, conds
        nu_lo = max(nu_lo, th / slope)
    conds.append(("user floors reachable within power cap", nu_lo <= 1.0 + GUARD))
    return nu_lo, conds


def _eve_upper(sc: _Scaled, theta_e: float):
    """Upper bound on ``nu`` from the eavesdropper SNR cap (may be inf)."""
    if theta_e <= 0:
        raise ValueError("theta_e must be positive")
    slope = sc.v - theta_e * sc.vb
    if slope <= 0:
        return math.inf, ("theta_e >= varpi/varpi_breve", True)
    return theta_e / slope, ("theta_e >= varpi/varpi_breve", False)


def _solution(ctx, program, nu, objective, binding, conds):
    if nu is None:
        return ClosedFormSolution(program, None, None, binding, conds)
    return ClosedFormSolution(program, float(nu * ctx.eta_cap), objective,
                              binding, conds)


def solve_p1_bar(ctx: EqualPowerContext, theta_k, theta_e: float) -> ClosedFormSolution:
    """Maximise SNR_1 subject to power, user floors (k >= 2) and the Eve cap.

    SNR_1 grows with ``eta`` so the answer is the top of the feasible
    interval.
    """
    sc = _Scaled(ctx)
    theta = _thresholds(ctx, theta_k, include_first=False)
    nu_lo, conds = _user_interval(sc, theta)
    if not math.isfinite(nu_lo) or nu_lo > 1.0 + GUARD:
        return _solution(ctx, "P1_bar", None, None, "user floor", conds)
    nu_e, c_e = _eve_upper(sc, theta_e)
    conds.append(c_e)
    ok = nu_e >= nu_lo * (1.0 - GUARD)
    conds.append(("eve cap compatible with user floors", ok))
    if not ok:
        return _solution(ctx, "P1_bar", None, None, "eve cap", conds)
    if nu_e < 1.0:
        nu, binding = max(nu_e, nu_lo), "eve cap"
    else:
        nu, binding = 1.0, "power cap"
    obj = float(ctx.snr_users(nu * ctx.eta_cap)[ATTACKED])
    return _solution(ctx, "P1_bar", nu, obj, binding, conds)


def _secrecy_roots(sc: _Scaled, lo: float, hi: float) -> list:
    """Stationary points of the secrecy ratio inside ``[lo, hi]``.

    The log-derivative vanishes where ``omega_1 * N2 * D2 = varpi * N1 * D1``
    with ``N1 = nu (omega_1 + omega_b1) + 1``, ``D1 = nu omega_b1 + 1``,
    ``N2 = nu varpi_b + 1`` and ``D2 = nu (varpi + varpi_b) + 1``; that is a
    polynomial of degree at most two.
    """
    w1, wb1 = sc.w[ATTACKED], sc.wb[ATTACKED]
    v, vb = sc.v, sc.vb
    # omega_1 * (vb nu + 1)((v + vb) nu + 1)
    left = w1 * np.array([vb * (v + vb), vb + v + vb, 1.0])
    right = v * np.array([(w1 + wb1) * wb1, w1 + wb1 + wb1, 1.0])
    coeffs = np.trim_zeros(left - right, "f")
    if coeffs.size < 2:
        return []
    roots = np.roots(coeffs)
    return [float(r.real) for r in roots
            if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and lo <= r.real <= hi]


def solve_q1_bar(ctx: EqualPowerContext, theta_k) -> ClosedFormSolution:
    """Maximise the secrecy ratio over the interval allowed by power and floors."""
    sc = _Scaled(ctx)
    theta = _thresholds(ctx, theta_k, include_first=False)
    nu_lo, conds = _user_interval(sc, theta)
    if not math.isfinite(nu_lo) or nu_lo > 1.0 + GUARD:
        return _solution(ctx, "Q1_bar", None, None, "user floor", conds)
    nu_lo = min(nu_lo, 1.0)
    cands = [(nu_lo, "lower end"), (1.0, "power cap")]
    cands += [(r, "stationary point") for r in _secrecy_roots(sc, nu_lo, 1.0)]
    vals = [float(ctx.secrecy_ratio(nu * ctx.eta_cap)) for nu, _ in cands]
    best = int(np.argmax(vals))
    nu, binding = cands[best]
    return _solution(ctx, "Q1_bar", nu, vals[best], binding, conds)


def solve_r1_bar(ctx: EqualPowerContext, theta_k_all, theta_e: float) -> ClosedFormSolution:
    """Minimise ``eta`` subject to every user's floor, power and the Eve cap."""
    sc = _Scaled(ctx)
    theta = _thresholds(ctx, theta_k_all, include_first=True)
    nu_lo, conds = _user_interval(sc, theta)
    if not math.isfinite(nu_lo) or nu_lo > 1.0 + GUARD:
        return _solution(ctx, "R1_bar", None, None, "user floor", conds)
    nu_e, c_e = _eve_upper(sc, theta_e)
    conds.append(c_e)
    ok = nu_e >= nu_lo * (1.0 - GUARD)
    conds.append(("eve cap compatible with user floors", ok))
    if not ok:
        return _solution(ctx, "R1_bar", None, None, "eve cap", conds)
    nu = min(nu_lo, 1.0)
    k_bind = int(np.nanargmax(theta / (sc.w - theta * sc.wb)))
    return _solution(ctx, "R1_bar", nu, float(nu * ctx.eta_cap),
                     f"user {k_bind + 1} floor", conds)


def secrecy_quadratic(ctx: EqualPowerContext, phi: float):
    """Coefficients ``(a, b, c)`` of ``a eta^2 + b eta + c >= 0``.

    The inequality is the cross-multiplied form of
    ``(1 + SNR_1) / (1 + SNR_E) >= phi``.
    """
    w1, wb1 = ctx.omega_k[ATTACKED], ctx.omega_breve_k[ATTACKED]
    v, vb = ctx.varpi, ctx.varpi_breve
    a = vb * (w1 + wb1) - phi * wb1 * (vb + v)
    b = w1 + wb1 + vb - phi * (wb1 + vb + v)
    c = 1.0 - phi
    return a, b, c


def _quad_roots(a, b, c):
    """Real roots of ``a x^2 + b x + c`` (linear when ``a`` is zero)."""
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return []
    s = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(s, b))
    roots = []
    if q != 0.0:
        roots += [q / a, c / q]
    else:
        roots += [0.0]
    return sorted(roots)


def solve_s1_bar(ctx: EqualPowerContext, theta_k, phi: float) -> ClosedFormSolution:
    """Minimise ``eta`` subject to floors (k >= 2), power and a secrecy-ratio floor.

    ``phi`` is the required ``(1 + SNR_1) / (1 + SNR_E)``; a secrecy-rate
    floor ``r`` in nats corresponds to ``phi = exp(r)``.  The smallest
    feasible ``eta`` is the lower end of the interval when the quadratic
    holds there, otherwise the first root above it.
    """
    if phi <= 0:
        raise ValueError("phi must be positive")
    sc = _Scaled(ctx)
    theta = _thresholds(ctx, theta_k, include_first=False)
    nu_lo, conds = _user_interval(sc, theta)
    if not math.isfinite(nu_lo) or nu_lo > 1.0 + GUARD:
        return _solution(ctx, "S1_bar", None, None, "user floor", conds)
    nu_lo = min(nu_lo, 1.0)
    c = ctx.eta_cap
    a, b, cc = secrecy_quadratic(ctx, phi)
    an, bn = a * c * c, b * c  # coefficients in nu
    scale = abs(an) + abs(bn) + abs(cc)

    def q(nu):
        return an * nu * nu + bn * nu + cc

    disc = bn * bn - 4.0 * an * cc
    cases = {
        (True, True): "a>0, disc<=0",
        (True, False): "a>0, disc>0",
        (False, True): "a<=0, disc<=0",
        (False, False): "a<=0, disc>0",
    }
    case = cases[(an > 0, disc <= 0)]
    cands = [(nu_lo, "lower end")]
    cands += [(r, "quadratic root") for r in _quad_roots(an, bn, cc)
              if nu_lo < r <= 1.0 + GUARD]
    for nu, binding in sorted(cands):
        if q(nu) >= -GUARD * scale:
            nu = min(nu, 1.0)
            conds.append(("secrecy floor reachable", True))
            return _solution(ctx, "S1_bar", nu, float(nu * c),
                             f"{binding} ({case})", conds)
    conds.append(("secrecy floor reachable", False))
    return _solution(ctx, "S1_bar", None, None, f"secrecy floor ({case})", conds)
