"""Path-following (successive convex approximation) power control.

Four programs are supported:

``P1``  maximise SNR_1 subject to power, SNR floors for users 2..K and a
        cap on the eavesdropper's SNR.
``Q1``  maximise the secrecy rate ``ln(1+SNR_1) - ln(1+SNR_E)`` subject to
        power and the floors for users 2..K.
``R1``  minimise total transmit power subject to power, SNR floors for all
        users and the eavesdropper cap.
``S1``  minimise total transmit power subject to power, floors for users
        2..K and a secrecy-rate floor ``r_phi`` (nats).

Each outer iteration replaces the nonconvex parts by convex surrogates
that are tight at the current point and solves the resulting convex
subproblem with :mod:`cvx`.

Internally the optimisation variable is ``x = psi / s`` with
``s[m, k] = sqrt(rho_max / (rho_s * gamma[m, k]))``.  In ``x`` the per-AP
budget is the unit ball ``sum_k x[m, k]^2 <= 1`` and every coefficient is
of moderate size, which keeps the interior-point solver well scaled.
Flattening is row-major: variable ``m * K + k``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import cvx
from .estimation import ATTACKED
from .sinr import (RateReport, SinrContext, phi_eve, phi_users, rate_report,
                   signal_users, snr_eve, snr_users)

KINDS = ("P1", "Q1", "R1", "S1")
MAX_KINDS = ("P1", "Q1")


class DegenerateExpansionPoint(ValueError):
    """The attacked user's stream is switched off at the expansion point."""


# -- problem description -----------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Which program to solve and its thresholds.

    ``theta_k`` holds K values for R1 (every user has a floor) and K-1
    values (users 2..K) for the other kinds.  ``theta_e`` is required by P1
    and R1, ``r_phi`` (nats) by S1.
    """

    kind: str
    theta_k: tuple
    theta_e: Optional[float] = None
    r_phi: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        theta = tuple(float(t) for t in np.atleast_1d(self.theta_k))
        object.__setattr__(self, "theta_k", theta)
        if any(not (t > 0 and math.isfinite(t)) for t in theta):
            raise ValueError("user thresholds must be positive and finite")
        if self.kind in ("P1", "R1"):
            if self.theta_e is None or not self.theta_e > 0:
                raise ValueError(f"{self.kind} needs a positive theta_e")
        elif self.theta_e is not None:
            raise ValueError(f"{self.kind} takes no theta_e")
        if self.kind == "S1":
            if self.r_phi is None or not math.isfinite(self.r_phi):
                raise ValueError("S1 needs a finite r_phi")
        elif self.r_phi is not None:
            raise ValueError(f"{self.kind} takes no r_phi")

    @property
    def maximise(self) -> bool:
        return self.kind in MAX_KINDS

    def user_thresholds(self, k_users: int) -> np.ndarray:
        """Length-K thresholds, NaN for users without a floor."""
        theta = np.array(self.theta_k, dtype=float)
        if self.kind == "R1":
            if theta.size != k_users:
                raise ValueError(f"R1 needs {k_users} thresholds, got {theta.size}")
            return theta
        if theta.size != k_users - 1:
            raise ValueError(f"{self.kind} needs {k_users - 1} thresholds, got {theta.size}")
        return np.insert(theta, ATTACKED, np.nan)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theta_k": list(self.theta_k),
                "theta_e": self.theta_e, "r_phi": self.r_phi}


@dataclass(frozen=True)
class PathFollowOptions:
    tol_obj: float = 1e-6       # relative true-objective improvement
    max_outer: int = 100
    max_init: int = 50
    init_progress: float = 1e-9
    eps_trust: float = 1e-9     # trust regions kept >= this
    eps_degenerate: float = 1e-6
    tol_feas: float = 1e-6      # relative residual accepted on true constraints
    monotone_slack: float = 1e-9
    init_margin: float = 1e-6   # strict margin sought by the feasibility phases
    cvx_tol_kkt: float = cvx.TOL_KKT
    cvx_max_iter: int = cvx.MAX_ITER


@dataclass(frozen=True)
class SurrogateCoeffs:
    """Coefficients of the surrogates built at ``psi_kappa``.

    ``a_kappa``/``b_kappa`` belong to the SNR_1 minorant (P1) or the
    log-rate minorant (Q1/S1); ``c_kappa``/``d_kappa`` to the majorant of
    Eve's log-rate.  Unused entries are NaN.
    """

    a_kappa: float
    b_kappa: float
    c_kappa: float
    d_kappa: float
    t_kappa: float
    t_e_kappa: float
    psi_kappa: np.ndarray


# -- surrogates in psi space -----------------------------------------------------

def surrogate_p1(ctx: SinrContext, psi_kappa):
    """Minorant of SNR_1 that is linear in ``a_1^T u_1`` minus a convex quadratic.

    Returns ``(coeffs, f1)`` with ``f1(psi) = a a_1^T u_1 - b phi_1(psi)``,
    which satisfies ``f1 <= SNR_1`` everywhere and equality at ``psi_kappa``.
    """
    psi_kappa = np.asarray(psi_kappa, dtype=float)
    xb = float(signal_users(ctx, psi_kappa)[ATTACKED])
    yb = float(phi_users(ctx, psi_kappa)[ATTACKED])
    a = 2.0 * xb / yb
    b = (a / 2.0) ** 2
    nan = float("nan")
    coeffs = SurrogateCoeffs(a, b, nan, nan, xb * xb / yb, nan, psi_kappa)

    def f1(psi):
        return (a * float(signal_users(ctx, psi)[ATTACKED])
                - b * float(phi_users(ctx, psi)[ATTACKED]))

    return coeffs, f1


def surrogate_phi_e(ctx: SinrContext, psi_kappa):
    """First-order expansion of Eve's interference term; a global minorant."""
    psi_kappa = np.asarray(psi_kappa, dtype=float)
    bk2 = ctx.b_k ** 2

    def phi_e_k(psi):
        psi = np.asarray(psi, dtype=float)
        return float(np.sum(bk2 * psi_kappa * (2.0 * psi - psi_kappa)) + 1.0)

    return phi_e_k


def surrogate_q1(ctx: SinrContext, psi_kappa):
    """Minorant ``f`` of ``ln(1+SNR_1)`` and majorant ``g`` of ``ln(1+SNR_E)``.

    Returns ``(coeffs, f, g, in_trust)``.  Both bounds hold inside the trust
    region reported by ``in_trust(psi)``.
    """
    psi_kappa = np.asarray(psi_kappa, dtype=float)
    xb = float(signal_users(ctx, psi_kappa)[ATTACKED])
    if xb <= 0:
        raise DegenerateExpansionPoint("a_1^T u_1 is zero at the expansion point")
    yb = float(phi_users(ctx, psi_kappa)[ATTACKED])
    t = xb * xb / yb
    a = math.log1p(t)
    b = t / (1.0 + t)
    phi_e_k = surrogate_phi_e(ctx, psi_kappa)
    t_e = snr_eve(ctx, psi_kappa)
    c = math.log1p(t_e) - t_e / (1.0 + t_e)
    d = 1.0 / (1.0 + t_e)
    coeffs = SurrogateCoeffs(a, b, c, d, t, t_e, psi_kappa)

    def f(psi):
        x = float(signal_users(ctx, psi)[ATTACKED])
        y = float(phi_users(ctx, psi)[ATTACKED])
        return a + b * (2.0 - y / yb - xb * xb / (2.0 * xb * x - xb * xb))

    def g(psi):
        num = float(np.sum((ctx.b_e * np.asarray(psi)[:, ATTACKED]) ** 2))
        return c + d * num / phi_e_k(psi)

    def in_trust(psi):
        x = float(signal_users(ctx, psi)[ATTACKED])
        return 2.0 * xb * x - xb * xb > 0 and phi_e_k(psi) > 0

    return coeffs, f, g, in_trust


# -- scaled problem data ---------------------------------------------------------

class _Scaled:
    """Coefficients of every SNR term in the scaled variable ``x``."""

    def __init__(self, ctx: SinrContext):
        st = ctx.stats
        rm = ctx.rho_max
        gamma = st.gamma_mk
        self.ctx = ctx
        self.m, self.k = gamma.shape
        self.n = self.m * self.k
        self.scale = np.sqrt(rm / (ctx.rho_s * gamma))
        self.sig = np.sqrt(rm * gamma)                 # a_k^T u_k = sum_m sig x
        self.beta_rho = rm * st.beta_mk                # phi_k weight of AP m
        self.ce = rm * (st.gamma_me + st.beta_me)      # ||B_E u_1||^2 weights
        self.be_rho = rm * st.beta_me                  # ||B_k u_k||^2 weights
        self.p_max_w = rm * ctx.noise_w

    def psi(self, x):
        return self.scale * x.reshape(self.m, self.k)

    def x_from_psi(self, psi):
        return (np.asarray(psi, dtype=float) / self.scale).ravel()

    def idx(self, k):
        return np.arange(self.m) * self.k + k

    # true quantities, all on flat x
    def signal(self, x):
        return np.sum(self.sig * x.reshape(self.m, self.k), axis=0)

    def phi(self, x):
        load = np.sum(x.reshape(self.m, self.k) ** 2, axis=1)
        return self.beta_rho.T @ load + 1.0

    def eve_num(self, x):
        return float(self.ce @ x.reshape(self.m, self.k)[:, ATTACKED] ** 2)

    def phi_e(self, x):
        xx = x.reshape(self.m, self.k).copy()
        xx[:, ATTACKED] = 0.0
        return float(self.be_rho @ np.sum(xx**2, axis=1) + 1.0)

    def phi_e_affine(self, xk):
        """``(g, h)`` with ``phi_E^(kappa)(x) = g @ x + h``."""
        xx = xk.reshape(self.m, self.k).copy()
        xx[:, ATTACKED] = 0.0
        g = (2.0 * self.be_rho[:, None] * xx).ravel()
        h = 1.0 - float(self.be_rho @ np.sum(xx**2, axis=1))
        return g, h

    def snr(self, x):
        return self.signal(x) ** 2 / self.phi(x)

    def snr_e(self, x):
        return self.eve_num(x) / self.phi_e(x)

    def r_sec(self, x):
        return math.log1p(float(self.snr(x)[ATTACKED])) - math.log1p(self.snr_e(x))

    def load(self, x):
        return np.sum(x.reshape(self.m, self.k) ** 2, axis=1)


def _pad(v, n_total):
    out = np.zeros(n_total)
    out[:v.size] = v
    return out


class _Builder:
    """Assembles the convex subproblems for one instance and one spec."""

    def __init__(self, sc: _Scaled, spec: ProblemSpec, opts: PathFollowOptions):
        self.sc = sc
        self.spec = spec
        self.opts = opts
        self.theta = spec.user_thresholds(sc.k)
        n = sc.n
        self.n_aux = n + 2  # x, r, s for the secrecy programs
        # phi_1 as a diagonal quadratic on x: sum beta_rho[m, 0] * x[m, kp]^2 + 1
        self.phi1_d = np.repeat(sc.beta_rho[:, ATTACKED], sc.k)
        self.sig1 = np.zeros(n)
        self.sig1[sc.idx(ATTACKED)] = sc.sig[:, ATTACKED]
        self.eve_d = np.zeros(n)
        self.eve_d[sc.idx(ATTACKED)] = sc.ce

    def base_constraints(self, n_total, users=None):
        """Per-AP power balls and the SOC floors; returns (quads, socs, lins)."""
        sc = self.sc
        quads, socs, lins = [], [], []
        for m in range(sc.m):
            d = np.zeros(n_total)
            d[m * sc.k:(m + 1) * sc.k] = 1.0
            quads.append(cvx.QuadConstraint(d, np.zeros(n_total), -1.0, f"power_{m + 1}"))
        theta = self.theta if users is None else users
        for k in range(sc.k):
            if np.isnan(theta[k]):
                continue
            g = np.zeros(n_total)
            g[sc.idx(k)] = sc.sig[:, k] / math.sqrt(theta[k])
            w = _pad(np.repeat(np.sqrt(sc.beta_rho[:, k]), sc.k), n_total)
            socs.append(cvx.SocConstraint(g, 0.0, w, np.zeros((1, n_total)),
                                          np.array([1.0]), f"snr_floor_{k + 1}"))
            lins.append(cvx.QuadConstraint(np.zeros(n_total), -g, 0.0,
                                           f"signal_nonneg_{k + 1}"))
        return quads, socs, lins

    def eve_cap(self, xk, n_total):
        ge, he = self.sc.phi_e_affine(xk)
        return cvx.QuadConstraint(_pad(self.eve_d / self.spec.theta_e, n_total),
                                  _pad(-ge, n_total), -he, "eve_cap")

    # -- feasibility phase for the Eve cap --------------------------------
    def init_eve(self, xk):
        n = self.sc.n
        ge, he = self.sc.phi_e_affine(xk)
        quads, socs, lins = self.base_constraints(n)
        return cvx.ConvexSubproblem(n, -ge, self.eve_d / self.spec.theta_e, -he, "min",
                                    quads, socs, lins, self.sc.k)

    # -- P1 / R1 ---------------------------------------------------------------
    def p1(self, xk):
        sc = self.sc
        n = sc.n
        xb = float(sc.signal(xk)[ATTACKED])
        yb = float(sc.phi(xk)[ATTACKED])
        a = 2.0 * xb / yb
        b = (a / 2.0) ** 2
        quads, socs, lins = self.base_constraints(n)
        quads.append(self.eve_cap(xk, n))
        p = cvx.ConvexSubproblem(n, a * self.sig1, -b * self.phi1_d, -b, "max",
                                 quads, socs, lins, sc.k)

        def surrogate(x):
            return a * float(sc.signal(x)[ATTACKED]) - b * float(sc.phi(x)[ATTACKED])

        return p, surrogate

    def r1(self, xk):
        n = self.sc.n
        quads, socs, lins = self.base_constraints(n)
        quads.append(self.eve_cap(xk, n))
        p = cvx.ConvexSubproblem(n, np.zeros(n), np.ones(n), 0.0, "min", quads, socs, lins,
                                 self.sc.k)
        return p, lambda x: float(x @ x)

    # -- Q1 / S1 -----------------------------------------------------------
    def secrecy_terms(self, xk):
        """Coefficients and convex pieces shared by Q1 and S1.

        Returns ``(coef, quads, socs, lins, surrogate)`` where the variable
        vector is ``(x, r, s)`` with ``r >= xb^2 / l(x)`` and
        ``s >= ||B_E u_1||^2 / phi_E^(kappa)(x)``.
        """
        sc = self.sc
        n, nt = sc.n, self.n_aux
        ir, is_ = n, n + 1
        xb = float(sc.signal(xk)[ATTACKED])
        if xb <= 0:
            raise DegenerateExpansionPoint("a_1^T u_1 is zero at the expansion point")
        yb = float(sc.phi(xk)[ATTACKED])
        t = xb * xb / yb
        A, B = math.log1p(t), t / (1.0 + t)
        t_e = sc.snr_e(xk)
        C, D = math.log1p(t_e) - t_e / (1.0 + t_e), 1.0 / (1.0 + t_e)
        ge, he = sc.phi_e_affine(xk)
        eps = self.opts.eps_trust

        quads, socs, lins = self.base_constraints(nt)
        # r * l(x) >= xb^2 with l(x) = 2 xb sig1 @ x - xb^2
        lg = _pad(2.0 * xb * self.sig1, nt)
        g = lg.copy()
        g[ir] = 1.0
        R = np.zeros((2, nt))
        R[0] = -lg
        R[0, ir] = 1.0
        socs.append(cvx.SocConstraint(g, -xb * xb, np.zeros(nt), R,
                                      np.array([xb * xb, 2.0 * xb]), "rate_minorant"))
        # s * phi_E^(kappa)(x) >= ||B_E u_1||^2
        g = _pad(ge, nt)
        g[is_] = 1.0
        R = -_pad(ge, nt)[None, :]
        R[0, is_] = 1.0
        w = _pad(2.0 * np.sqrt(self.eve_d), nt)
        socs.append(cvx.SocConstraint(g, he, w, R, np.array([-he]), "eve_majorant"))
        # trust regions
        lins.append(cvx.QuadConstraint(np.zeros(nt), -lg, xb * xb + eps, "trust_signal"))
        lins.append(cvx.QuadConstraint(np.zeros(nt), -_pad(ge, nt), eps - he, "trust_eve"))

        coef = dict(A=A, B=B, C=C, D=D, yb=yb, xb=xb)

        def surrogate(x):
            xs = x[:n]
            sig = float(sc.signal(xs)[ATTACKED])
            f = A + B * (2.0 - float(sc.phi(xs)[ATTACKED]) / yb
                         - xb * xb / (2.0 * xb * sig - xb * xb))
            g_ = C + D * sc.eve_num(xs) / float(ge @ xs + he)
            return f - g_

        return coef, quads, socs, lins, surrogate

    def secrecy_objective(self, coef):
        """``B phi_1(x) / yb + B r + D s``; minimising it maximises f - g."""
        nt = self.n_aux
        B, D, yb = coef["B"], coef["D"], coef["yb"]
        d = _pad(B / yb * self.phi1_d, nt)
        q = np.zeros(nt)
        q[self.sc.n] = B
        q[self.sc.n + 1] = D
        return d, q, B / yb

    def q1(self, xk):
        coef, quads, socs, lins, surrogate = self.secrecy_terms(xk)
        d, q, c = self.secrecy_objective(coef)
        p = cvx.ConvexSubproblem(self.n_aux, q, d, c, "min", quads, socs, lins,
                                 self.sc.k)
        return p, surrogate

    def s1(self, xk):
        coef, quads, socs, lins, surrogate = self.secrecy_terms(xk)
        d, q, c = self.secrecy_objective(coef)
        const = c + self.spec.r_phi - coef["A"] - 2.0 * coef["B"] + coef["C"]
        quads.append(cvx.QuadConstraint(d, q, const, "secrecy_floor"))
        n = self.sc.n
        obj_d = _pad(np.ones(n), self.n_aux)
        p = cvx.ConvexSubproblem(self.n_aux, np.zeros(self.n_aux), obj_d, 0.0, "min",
                                 quads, socs, lins, self.sc.k)
        return p, lambda x: float(x[:n] @ x[:n])

    def start_point(self, xk, p):
        """Start vector for ``p`` built from ``xk`` (auxiliaries made strict)."""
        if p.n_vars == self.sc.n:
            return xk.copy()
        sc = self.sc
        xb = float(sc.signal(xk)[ATTACKED])
        ge, he = sc.phi_e_affine(xk)
        r = xb * xb / (2.0 * xb * float(sc.signal(xk)[ATTACKED]) - xb * xb)
        s = sc.eve_num(xk) / float(ge @ xk + he)
        # r and s enter linearly, so a start well inside their cones is free
        return np.concatenate([xk, [2.0 * r + 1.0, 2.0 * s + 1.0]])


# -- true objectives and residuals -------------------------------------------------

def _true_objective(sc: _Scaled, kind: str, x) -> float:
    if kind == "P1":
        return float(sc.snr(x)[ATTACKED])
    if kind == "Q1":
        return sc.r_sec(x)
    return float(sc.p_max_w * (x @ x)) if math.isfinite(sc.p_max_w) else float(x @ x)


def _residual(sc: _Scaled, spec: ProblemSpec, theta, x) -> float:
    """Largest relative violation of the true constraints of ``spec``."""
    res = [float(np.max(sc.load(x))) - 1.0, -float(np.min(x))]
    snr = sc.snr(x)
    for k in range(sc.k):
        if not np.isnan(theta[k]):
            res.append((theta[k] - snr[k]) / theta[k])
    if spec.kind in ("P1", "R1"):
        res.append((sc.snr_e(x) - spec.theta_e) / spec.theta_e)
    if spec.kind == "S1":
        res.append(spec.r_phi - sc.r_sec(x))
    return max(0.0, max(res))


# -- feasibility ----------------------------------------------------------------

def _bisect_towards(x_old, x_new, ok):
    """Smallest step ``t`` in (0, 1] with ``ok(x_old + t (x_new - x_old))``."""
    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if ok(x_old + mid * (x_new - x_old)):
            hi = mid
        else:
            lo = mid
    return x_old + hi * (x_new - x_old)


def _undegenerate(sc: _Scaled, x, eps):
    """Nudge the attacked user's stream off zero, staying inside the power balls."""
    if float(sc.signal(x)[ATTACKED]) > 0:
        return x
    xx = x.reshape(sc.m, sc.k).copy()
    xx[:, ATTACKED] += eps
    load = np.sum(xx**2, axis=1)
    xx /= np.sqrt(np.maximum(load, 1.0))[:, None]
    return xx.ravel()


def _convex_start(b: _Builder, users=None):
    """A strictly feasible point for the power balls and SNR floors."""
    sc = b.sc
    x0 = np.full(sc.n, 0.999 / math.sqrt(sc.k))
    quads, socs, lins = b.base_constraints(sc.n, users)
    p = cvx.ConvexSubproblem(sc.n, np.zeros(sc.n), np.zeros(sc.n), 0.0, "min",
                             quads, socs, lins, sc.k)
    x, iters, _ = cvx.find_interior_point(p, x0, b.opts.cvx_tol_kkt,
                                          max_iter=b.opts.cvx_max_iter)
    return x, iters


def _eve_gap(sc, theta_e, x):
    return sc.eve_num(x) / theta_e - sc.phi_e(x)


def _find_feasible_x(b: _Builder, trace=None):
    """Returns ``(x, iterations, status)`` for the builder's spec.

    ``trace``, if given, receives the number of outer feasibility steps and,
    for P1/R1, the eavesdropper gap before and after each step.
    """
    sc, spec, opts = b.sc, b.spec, b.opts
    x, iters = _convex_start(b)
    if x is None:
        return None, iters, "infeasible"
    if spec.kind in ("P1", "R1"):
        gap = _eve_gap(sc, spec.theta_e, x)
        gaps = [gap]
        n_it = 0
        while gap > 0:
            if n_it >= opts.max_init:
                return None, iters, "infeasible"
            sol = cvx.solve(b.init_eve(x), x, opts.cvx_tol_kkt, max_iter=opts.cvx_max_iter)
            iters += sol.iterations
            n_it += 1
            x_new = np.maximum(sol.x, 0.0)
            gap_new = _eve_gap(sc, spec.theta_e, x_new)
            if gap_new <= 0:
                # stop as close to the previous point as the margin allows
                target = -opts.init_margin * sc.phi_e(x_new)
                if gap_new <= target:
                    x_new = _bisect_towards(
                        x, x_new, lambda z: _eve_gap(sc, spec.theta_e, z) <= target)
                x, gap = x_new, _eve_gap(sc, spec.theta_e, x_new)
                gaps.append(gap)
                break
            if gap - gap_new < opts.init_progress * max(1.0, abs(gap)):
                return None, iters, "infeasible"
            x, gap = x_new, gap_new
            gaps.append(gap)
        if trace is not None:
            trace["init_outer"] = n_it
            trace["eve_gaps"] = gaps
        return x, iters, "ok"
    x = _undegenerate(sc, x, opts.eps_degenerate)
    if spec.kind == "Q1":
        return x, iters, "ok"
    # S1: climb the secrecy rate with Q1 steps until the floor is cleared
    target = spec.r_phi + opts.init_margin
    q_spec = ProblemSpec("Q1", spec.theta_k)
    qb = _Builder(sc, q_spec, opts)
    r = sc.r_sec(x)
    n_it = 0
    while r < target:
        if n_it >= opts.max_init:
            return None, iters, "infeasible"
        p, surrogate = qb.q1(x)
        sol = cvx.solve(p, qb.start_point(x, p), opts.cvx_tol_kkt,
                        max_iter=opts.cvx_max_iter)
        iters += sol.iterations
        n_it += 1
        x_new = np.maximum(sol.x[:sc.n], 0.0)
        if sol.status == "infeasible" or surrogate(sol.x) < surrogate(qb.start_point(x, p)):
            return None, iters, "infeasible"
        r_new = sc.r_sec(x_new)
        if r_new >= target:
            x = _bisect_towards(x, x_new, lambda z: sc.r_sec(z) >= target)
            break
        if r_new - r < opts.init_progress * max(1.0, abs(r)):
            return None, iters, "infeasible"
        x, r = x_new, r_new
    if trace is not None:
        trace["init_outer"] = n_it
    return x, iters, "ok"


def find_feasible(ctx: SinrContext, spec: ProblemSpec,
                  opts: PathFollowOptions = PathFollowOptions(), trace=None):
    """Feasible power matrix for ``spec`` and the solver iterations spent.

    Returns ``(psi, iterations)``; ``psi`` is None when the search fails.
    """
    sc = _Scaled(ctx)
    b = _Builder(sc, spec, opts)
    x, iters, status = _find_feasible_x(b, trace)
    if x is None:
        return None, iters
    return sc.psi(x), iters


# -- outer loop ------------------------------------------------------------------

@dataclass
class SolveReport:
    kind: str
    status: str  # converged | max_outer | infeasible | stalled | internal_error
    psi_star: Optional[np.ndarray]
    objective_trace: list = field(default_factory=list)
    feasibility_trace: list = field(default_factory=list)
    kkt_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    init_iterations: int = 0
    solver_iterations: int = 0
    rate_report: Optional[RateReport] = None
    total_power_w: float = float("nan")
    wall_time_s: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.psi_star is not None

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "converged": self.converged,
            "iterations": self.iterations,
            "init_iterations": self.init_iterations,
            "solver_iterations": self.solver_iterations,
            "objective_trace": list(self.objective_trace),
            "feasibility_trace": list(self.feasibility_trace),
            "kkt_trace": list(self.kkt_trace),
            "total_power_w": self.total_power_w,
            "wall_time_s": self.wall_time_s,
            "psi_star": None if self.psi_star is None else self.psi_star.tolist(),
            "rate_report": None if self.rate_report is None else self.rate_report.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["iteration", "objective", "feasibility_residual", "kkt_residual"])
        for i, (o, f, k) in enumerate(zip(self.objective_trace, self.feasibility_trace,
                                          self.kkt_trace)):
            w.writerow([i, repr(o), repr(f), repr(k)])
        return buf.getvalue()


def _report(sc, kind, status, x, rep: SolveReport):
    rep.status = status
    rep.converged = status == "converged"
    if x is not None:
        psi = sc.psi(x)
        rep.psi_star = psi
        rep.rate_report = rate_report(sc.ctx, psi)
        rep.total_power_w = rep.rate_report.total_power_w
    return rep


def _try_user_one_off(sc: _Scaled, spec: ProblemSpec, theta, x, obj, rep, opts):
    """Switch the attacked user's stream off when that is feasible and better.

    With user 1 silent both SNR_1 and SNR_E vanish, so the secrecy rate is
    exactly zero.  The surrogates cannot be expanded there, so the outer
    loop only creeps towards this point when the best secrecy rate is
    non-positive.
    """
    x0 = x.reshape(sc.m, sc.k).copy()
    x0[:, ATTACKED] = 0.0
    x0 = x0.ravel()
    resid = _residual(sc, spec, theta, x0)
    obj0 = _true_objective(sc, spec.kind, x0)
    better = obj0 > obj if spec.maximise else obj0 < obj
    if resid > opts.tol_feas or not better:
        return x, obj
    rep.objective_trace.append(obj0)
    rep.feasibility_trace.append(resid)
    rep.kkt_trace.append(float("nan"))
    return x0, obj0


def solve_program(ctx: SinrContext, spec: ProblemSpec,
                  opts: PathFollowOptions = PathFollowOptions()) -> SolveReport:
    """Run the path-following iterations for ``spec`` from a feasible start.

    The iterate only moves when the convex subproblem's solution improves
    the surrogate over its value at the current point; since the surrogate
    is tight there and bounds the true objective, the true objective is
    monotone.  A violation of that (beyond ``monotone_slack``) is reported
    as ``internal_error``.
    """
    t0 = time.perf_counter()
    sc = _Scaled(ctx)
    b = _Builder(sc, spec, opts)
    rep = SolveReport(spec.kind, "infeasible", None)
    x, init_iters, status = _find_feasible_x(b)
    rep.init_iterations = init_iters
    rep.solver_iterations = init_iters
    if x is None:
        rep.wall_time_s = time.perf_counter() - t0
        return rep
    build = {"P1": b.p1, "Q1": b.q1, "R1": b.r1, "S1": b.s1}[spec.kind]
    sign = 1.0 if spec.maximise else -1.0
    obj = _true_objective(sc, spec.kind, x)
    rep.objective_trace.append(obj)
    rep.feasibility_trace.append(_residual(sc, spec, b.theta, x))
    rep.kkt_trace.append(float("nan"))
    status = "max_outer"
    for _ in range(opts.max_outer):
        if spec.kind in ("Q1", "S1"):
            x = _undegenerate(sc, x, opts.eps_degenerate)
        p, surrogate = build(x)
        start = b.start_point(x, p)
        sol = cvx.solve(p, start, opts.cvx_tol_kkt, max_iter=opts.cvx_max_iter)
        rep.solver_iterations += sol.iterations
        if sol.status == "infeasible":
            status = "stalled"
            break
        x_new = np.maximum(sol.x[:sc.n], 0.0)
        z_new = np.concatenate([x_new, sol.x[sc.n:]])
        gain = sign * (surrogate(z_new) - surrogate(start))
        resid = _residual(sc, spec, b.theta, x_new)
        if gain < 0:
            # no surrogate improvement within solver accuracy
            status = "converged"
            break
        if resid > opts.tol_feas:
            status = "stalled"
            break
        obj_new = _true_objective(sc, spec.kind, x_new)
        if sign * (obj_new - obj) < -opts.monotone_slack * max(1.0, abs(obj)):
            status = "internal_error"
            break
        rel = abs(obj_new - obj) / max(abs(obj), 1e-300)
        x, obj = x_new, obj_new
        rep.iterations += 1
        rep.objective_trace.append(obj)
        rep.feasibility_trace.append(resid)
        rep.kkt_trace.append(sol.kkt_residual)
        if rel < opts.tol_obj:
            status = "converged"
            break
    if spec.kind in ("Q1", "S1") and status != "internal_error":
        x, obj = _try_user_one_off(sc, spec, b.theta, x, obj, rep, opts)
    rep.wall_time_s = time.perf_counter() - t0
    return _report(sc, spec.kind, status, x, rep)
