"""Primal-dual interior-point solver for the path-following subproblems.

Every subproblem produced by the path-following algorithms has

* a linear plus diagonal-quadratic objective,
* diagonal convex quadratic constraints ``sum(d * x**2) + q @ x + c <= 0``,
* second-order cone constraints ``g @ x + h >= ||[w * x, R @ x + r0]||``,
* nonnegative variables.

Cones are handled through the smooth convex function
``||y||^2 / t - t <= 0`` on the domain ``t > 0``, which describes the same
set as ``t >= ||y||`` and keeps every constraint function convex, so the
standard primal-dual method applies unchanged.  A phase-I problem (minimise
a shared slack, bounded above by a big-M cap of ten times the initial
violation) supplies a strictly feasible start when none is given.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

TOL_KKT = 1e-7
TOL_FEAS = 1e-8
MAX_ITER = 200
BARRIER_REDUCTION = 0.2
# starts closer than this to a constraint boundary are re-centred by phase I
NEAR_BOUNDARY = 1e-6


@dataclass
class QuadConstraint:
    """``sum(d * x**2) + q @ x + c <= 0`` with ``d >= 0``."""

    d: np.ndarray
    q: np.ndarray
    c: float
    name: str = ""


@dataclass
class SocConstraint:
    """``g @ x + h >= ||concat(w * x, R @ x + r0)||``.

    ``w`` weights a diagonal block (one entry per variable, zeros allowed)
    and ``R``/``r0`` give a few dense rows.
    """

    g: np.ndarray
    h: float
    w: np.ndarray
    R: np.ndarray
    r0: np.ndarray
    name: str = ""

    def t(self, x):
        return float(self.g @ x + self.h)

    def y(self, x):
        return np.concatenate([self.w * x, self.R @ x + self.r0])


@dataclass
class ConvexSubproblem:
    """Variables are nonnegative; ``objective = sum(obj_d * x**2) + obj_q @ x + obj_c``.

    With ``sense="max"`` the quadratic part must be concave (``obj_d <= 0``).
    ``block_size`` groups consecutive variables into blocks for the linear
    algebra; it changes speed only, never the answer.
    """

    n_vars: int
    obj_q: np.ndarray
    obj_d: np.ndarray
    obj_c: float = 0.0
    sense: str = "min"
    quad_constraints: list = field(default_factory=list)
    soc_constraints: list = field(default_factory=list)
    linear_constraints: list = field(default_factory=list)
    block_size: int = 1

    def __post_init__(self):
        n = self.n_vars
        self.obj_q = np.asarray(self.obj_q, dtype=float).reshape(n)
        self.obj_d = np.asarray(self.obj_d, dtype=float).reshape(n)
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        sign = 1.0 if self.sense == "min" else -1.0
        if np.any(sign * self.obj_d < 0):
            raise ValueError("objective quadratic part is not convex in the min sense")
        for qc in self.quad_constraints + self.linear_constraints:
            qc.d = np.asarray(qc.d, dtype=float).reshape(n)
            qc.q = np.asarray(qc.q, dtype=float).reshape(n)
            if np.any(qc.d < 0):
                raise ValueError(f"quadratic constraint {qc.name!r} is not convex")
        for lc in self.linear_constraints:
            if np.any(lc.d != 0):
                raise ValueError("linear constraints must have zero quadratic part")
        for sc in self.soc_constraints:
            sc.g = np.asarray(sc.g, dtype=float).reshape(n)
            sc.w = np.asarray(sc.w, dtype=float).reshape(n)
            sc.r0 = np.atleast_1d(np.asarray(sc.r0, dtype=float))
            sc.R = np.asarray(sc.R, dtype=float).reshape(sc.r0.size, n)

    def objective(self, x) -> float:
        return float(self.obj_d @ (x * x) + self.obj_q @ x + self.obj_c)

    def violation(self, x) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        v = [max(0.0, -float(np.min(x)))] if x.size else [0.0]
        for qc in self.quad_constraints + self.linear_constraints:
            v.append(max(0.0, float(qc.d @ (x * x) + qc.q @ x + qc.c)))
        for sc in self.soc_constraints:
            v.append(max(0.0, float(np.linalg.norm(sc.y(x))) - sc.t(x)))
        return max(v)


@dataclass
class CvxSolution:
    x: np.ndarray
    objective_value: float
    kkt_residual: float
    iterations: int
    status: str  # "optimal" | "infeasible" | "max_iter"
    violation: float = 0.0
    phase1_iterations: int = 0


class _Compiled:
    """All inequality constraints stacked for vectorised evaluation.

    Row order: quadratic and linear constraints, then (phase I only) the
    big-M cap on the slack, then cones.  Bounds ``x >= 0`` are kept apart.
    In phase I the last variable is the shifted slack ``s' = s + shift``
    and the objective is ``s'``.

    The Newton matrix is assembled as block-diagonal plus low rank.  Rows whose
    gradient lives inside one block of ``block_size`` consecutive variables
    go into the blocks; cones and coupling rows form the low-rank part.
    """

    def __init__(self, p: ConvexSubproblem, phase1_shift=None, big_m=None):
        rows = p.quad_constraints + p.linear_constraints
        nb = p.n_vars
        slack = phase1_shift is not None
        n = nb + 1 if slack else nb
        self.n = n
        self.slack = slack
        self.shift = float(phase1_shift) if slack else 0.0
        nq = len(rows)
        Dq = np.zeros((nq, n))
        Q = np.zeros((nq, n))
        if rows:
            Dq[:, :nb] = np.array([r.d for r in rows])
            Q[:, :nb] = np.array([r.q for r in rows])
        cq = np.array([r.c for r in rows], dtype=float)
        slack_coef = np.zeros(nq)
        const_extra = np.zeros(nq)
        if slack:
            slack_coef[:] = -1.0
            const_extra[:] = phase1_shift
            # big-M cap: s' - shift - big_m <= 0
            cap_q = np.zeros(n)
            cap_q[-1] = 1.0
            Dq = np.vstack([Dq, np.zeros(n)])
            Q = np.vstack([Q, cap_q])
            cq = np.append(cq, -phase1_shift - big_m)
            slack_coef = np.append(slack_coef, 0.0)
            const_extra = np.append(const_extra, 0.0)
            nq += 1
            self.f0_d = np.zeros(n)
            self.f0_q = cap_q
            self.f0_c = 0.0
        else:
            sign = 1.0 if p.sense == "min" else -1.0
            self.f0_d = sign * p.obj_d
            self.f0_q = sign * p.obj_q
            self.f0_c = sign * p.obj_c
        self.nq = nq
        self.Dq, self.Q, self.cq = Dq, Q, cq + const_extra
        self.slack_coef = slack_coef
        pad = (lambda v: np.append(v, 0.0)) if slack else (lambda v: v)
        self.socs = [(pad(sc.g), float(sc.h), pad(sc.w),
                      np.hstack([sc.R, np.zeros((sc.R.shape[0], n - nb))]),
                      sc.r0) for sc in p.soc_constraints]
        self.n_con = nq + len(self.socs)
        if self.socs:
            self.soc_g = np.array([s[0] for s in self.socs])
            self.soc_h = np.array([s[1] for s in self.socs])
        else:
            self.soc_g = np.zeros((0, n))
            self.soc_h = np.zeros(0)
        # block layout over the base variables; the remainder are singletons
        bs = max(1, int(p.block_size))
        self.bs = bs
        self.n_blk = (nb // bs) * bs
        self.n_blocks = self.n_blk // bs
        support = (Dq[:, :nb] != 0) | (Q[:, :nb] != 0)
        local = np.zeros(nq, dtype=bool)
        block_of = np.zeros(nq, dtype=int)
        for i in range(nq):
            cols = np.flatnonzero(support[i])
            if cols.size and cols[-1] < self.n_blk and cols[0] // bs == cols[-1] // bs:
                local[i] = True
                block_of[i] = cols[0] // bs
        self.local = np.flatnonzero(local)
        self.local_block = block_of[self.local]
        self.coupling = np.flatnonzero(~local)

    def in_domain(self, x) -> bool:
        if np.any(x <= 0):
            return False
        return bool(np.all(self.soc_g @ x + self.soc_h > 0))

    def f0(self, x):
        return float(self.f0_d @ (x * x) + self.f0_q @ x + self.f0_c)

    def grad_f0(self, x):
        return 2.0 * self.f0_d * x + self.f0_q

    def values(self, x):
        return self.evaluate(x, grads=False)[0]

    def evaluate(self, x, grads=True):
        """Constraint values, gradients and per-cone intermediates."""
        nq = self.nq
        f = np.empty(self.n_con)
        f[:nq] = self.Dq @ (x * x) + self.Q @ x + self.cq
        if self.slack:
            f[:nq] += self.slack_coef * x[-1]
        G = None
        cones = []
        if grads:
            G = np.empty((self.n_con, self.n))
            G[:nq] = 2.0 * self.Dq * x + self.Q
            if self.slack:
                G[:nq, -1] += self.slack_coef
        for j, (g, h, w, R, r0) in enumerate(self.socs):
            t = g @ x + h
            zd = w * x
            zr = R @ x + r0
            ss = zd @ zd + zr @ zr
            f[nq + j] = ss / t - t
            if self.slack:
                f[nq + j] -= x[-1] - self.shift
            if grads:
                v = w * zd + R.T @ zr
                G[nq + j] = 2.0 * v / t - g * (ss / t**2 + 1.0)
                if self.slack:
                    G[nq + j, -1] -= 1.0
                cones.append((t, ss, v))
        return f, G, cones

    def newton_solve(self, x, lam, lam_b, f, G, cones, rhs):
        """Solve ``H dx = rhs`` for the reduced primal-dual Newton matrix

        ``H = hess f0 + sum lam_i hess f_i + sum (lam_i / -f_i) grad f_i grad f_i^T
        + diag(lam_b / x)``, assembled as block-diagonal plus low rank.
        """
        n, nq, bs = self.n, self.nq, self.bs
        omega = lam / -f
        diag = 2.0 * self.f0_d + lam_b / x + 2.0 * (lam[:nq] @ self.Dq)
        cols = []
        cmats = []
        for j, (g, h, w, R, r0) in enumerate(self.socs):
            t, ss, v = cones[j]
            lj = lam[nq + j]
            c = 2.0 * lj / t
            om = omega[nq + j]
            diag += c * w * w
            # lam * hess of the cone row in the basis (g, v), then its
            # gradient outer product (which also carries the phase-I slack)
            cols += [g, v, G[nq + j]]
            cmats.append(np.array([[c * ss / t**2, -c / t, 0.0],
                                   [-c / t, 0.0, 0.0],
                                   [0.0, 0.0, om]]))
            if R.shape[0]:
                cols += list(R)
                cmats.append(c * np.eye(R.shape[0]))
        # coupling quadratic rows
        for i in self.coupling:
            cols.append(G[i])
            cmats.append(np.array([[omega[i]]]))
        # block-local rows; their slack entries (phase I) are split off
        blocks = np.zeros((self.n_blocks, bs, bs))
        if self.local.size:
            lb = self.local_block
            gl = G[self.local][:, :self.n_blk].reshape(self.local.size, self.n_blocks, bs)
            gl = gl[np.arange(self.local.size), lb]          # (L, bs)
            wl = omega[self.local]
            np.add.at(blocks, lb, wl[:, None, None] * gl[:, :, None] * gl[:, None, :])
            if self.slack:
                coef = self.slack_coef[self.local]
                diag[-1] += float(np.sum(wl * coef * coef))
                hvec = np.zeros(n)
                hb = (wl * coef)[:, None] * gl                 # (L, bs)
                hv = np.zeros((self.n_blocks, bs))
                np.add.at(hv, lb, hb)
                hvec[:self.n_blk] = hv.ravel()
                if np.any(hvec):
                    es = np.zeros(n)
                    es[-1] = 1.0
                    cols += [es, hvec]
                    cmats.append(np.array([[0.0, 1.0], [1.0, 0.0]]))
        idx = np.arange(bs)
        blocks[:, idx, idx] += diag[:self.n_blk].reshape(self.n_blocks, bs)
        H = np.zeros((n, n))
        for j in range(self.n_blocks):
            sl = slice(j * bs, (j + 1) * bs)
            H[sl, sl] = blocks[j]
        tail = np.arange(self.n_blk, n)
        H[tail, tail] = diag[self.n_blk:]
        if cols:
            U = np.array(cols).T
            H += U @ linalg.block_diag(*cmats) @ U.T
        # symmetric diagonal equilibration before factoring; Woodbury
        # updates are unstable here since omega grows without bound
        d = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
        Hs = H * d[:, None] * d[None, :]
        try:
            fac = linalg.cho_factor(Hs, check_finite=False)
            dx = d * linalg.cho_solve(fac, d * rhs, check_finite=False)
        except linalg.LinAlgError:
            dx = d * linalg.lstsq(Hs, d * rhs, check_finite=False)[0]
        return dx


def _primal_dual(prob: _Compiled, x, tol_kkt, max_iter, stop=None):
    """Primal-dual interior-point iterations from a strictly feasible ``x``.

    Returns ``(x, kkt, iterations, converged)``.  ``stop(x)`` ends the
    iteration early; phase I uses it once the slack turns negative.
    """
    mu = 1.0 / BARRIER_REDUCTION
    alpha, beta = 0.01, 0.5
    f = prob.values(x)
    # dual start scaled to the objective gradient so the first duality gap
    # is commensurate with the objective
    s0 = max(1.0, float(np.max(np.abs(prob.grad_f0(x) * x))))
    lam = s0 / -f
    lam_b = s0 / x
    m_tot = f.size + x.size
    kkt = np.inf
    for it in range(max_iter):
        if stop is not None and stop(x):
            return x, kkt, it, True
        f, G, cones = prob.evaluate(x)
        g0 = prob.grad_f0(x)
        gap = float(-f @ lam + x @ lam_b)
        r_dual = g0 + G.T @ lam - lam_b
        kkt = max(float(np.max(np.abs(r_dual))) / (1.0 + float(np.max(np.abs(g0)))),
                  gap / (1.0 + abs(prob.f0(x))))
        if kkt <= tol_kkt:
            return x, kkt, it, True
        t = mu * m_tot / gap
        r_cent = -lam * f - 1.0 / t
        r_cent_b = lam_b * x - 1.0 / t
        rhs = -r_dual - G.T @ (r_cent / f) - r_cent_b / x
        dx = prob.newton_solve(x, lam, lam_b, f, G, cones, rhs)
        dlam = (r_cent - lam * (G @ dx)) / f
        dlam_b = -(r_cent_b + lam_b * dx) / x
        s = 1.0
        neg = dlam < 0
        if np.any(neg):
            s = min(s, float(np.min(-lam[neg] / dlam[neg])))
        neg = dlam_b < 0
        if np.any(neg):
            s = min(s, float(np.min(-lam_b[neg] / dlam_b[neg])))
        s *= 0.99
        while s > 1e-16:
            xn = x + s * dx
            if prob.in_domain(xn) and np.all(prob.values(xn) < 0):
                break
            s *= beta
        else:
            return x, kkt, it, False
        res0 = np.sqrt(r_dual @ r_dual + r_cent @ r_cent + r_cent_b @ r_cent_b)
        while s > 1e-16:
            xn = x + s * dx
            ln = lam + s * dlam
            lbn = lam_b + s * dlam_b
            fn, Gn, _ = prob.evaluate(xn)
            rd = prob.grad_f0(xn) + Gn.T @ ln - lbn
            rc = -ln * fn - 1.0 / t
            rcb = lbn * xn - 1.0 / t
            if np.sqrt(rd @ rd + rc @ rc + rcb @ rcb) <= (1.0 - alpha * s) * res0:
                break
            s *= beta
        else:
            return x, kkt, it, False
        x, lam, lam_b = xn, ln, lbn
    return x, kkt, max_iter, False


def find_interior_point(p: ConvexSubproblem, x0, tol_kkt=TOL_KKT,
                        tol_feas=TOL_FEAS, max_iter=MAX_ITER):
    """Phase I: minimise a common slack ``s`` with ``f_i(x) <= s``.

    Returns ``(x, iterations, infeasibility)`` where ``x`` is strictly
    feasible, or None when the slack cannot be pushed below zero.
    """
    x0 = np.maximum(np.asarray(x0, dtype=float), 1e-12)
    base = _Compiled(p)
    if any(g @ x0 + h <= 0 for g, h, *_ in base.socs):
        raise ValueError("start point must satisfy t(x) > 0 for every cone")
    f = base.values(x0)
    viol = float(np.max(f)) if f.size else -1.0
    if viol < -NEAR_BOUNDARY:
        return x0, 0, viol
    margin = max(1e-3 * abs(viol), 1e-6)
    s0 = viol + margin
    big_m = 10.0 * max(viol, margin)
    shift = 1.0 + s0 + big_m
    aug = _Compiled(p, phase1_shift=shift, big_m=big_m)
    target = -1e-3 * max(1.0, abs(viol))
    z, _, iters, _ = _primal_dual(aug, np.append(x0, s0 + shift), tol_kkt * 1e-2,
                                  max_iter, stop=lambda z: z[-1] - shift < target)
    x = z[:-1]
    infeas = float(np.max(base.values(x))) if base.n_con else -1.0
    if infeas < 0:
        return x, iters, infeas
    return None, iters, infeas


def solve(p: ConvexSubproblem, x0=None, tol_kkt=TOL_KKT, tol_feas=TOL_FEAS,
          max_iter=MAX_ITER) -> CvxSolution:
    """Solve ``p`` to a KKT point.

    ``x0`` need not be feasible, but every cone's ``t(x0)`` must be
    positive.  Without ``x0`` the start is a vector of ones.
    """
    n = p.n_vars
    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=float)
    x, it1, infeas = find_interior_point(p, x0, tol_kkt, tol_feas, max_iter)
    if x is None:
        status = "infeasible" if infeas > tol_feas else "max_iter"
        xb = np.maximum(x0, 0.0)
        return CvxSolution(xb, p.objective(xb), np.inf, it1, status,
                           p.violation(xb), it1)
    prob = _Compiled(p)
    x, kkt, it2, ok = _primal_dual(prob, x, tol_kkt, max_iter)
    viol = p.violation(x)
    if kkt <= tol_kkt and viol <= tol_feas:
        status = "optimal"
    else:
        status = "max_iter"
    return CvxSolution(x, p.objective(x), float(kkt), it1 + it2, status, viol, it1)


# -- text dump ---------------------------------------------------------------

def dump_subproblem(p: ConvexSubproblem) -> str:
    """Serialise ``p`` as self-describing JSON text."""
    def qc(c):
        return {"name": c.name, "d": c.d.tolist(), "q": c.q.tolist(), "c": float(c.c)}

    doc = {
        "format": "convex-subproblem/1",
        "n_vars": p.n_vars,
        "block_size": p.block_size,
        "variable_bounds": "x >= 0",
        "objective": {"sense": p.sense, "linear": p.obj_q.tolist(),
                      "diag_quadratic": p.obj_d.tolist(), "constant": float(p.obj_c)},
        "quad_constraints": [qc(c) for c in p.quad_constraints],
        "linear_constraints": [qc(c) for c in p.linear_constraints],
        "soc_constraints": [
            {"name": s.name, "t_linear": s.g.tolist(), "t_constant": float(s.h),
             "y_diag": s.w.tolist(), "y_rows": s.R.tolist(), "y_constant": s.r0.tolist()}
            for s in p.soc_constraints],
    }
    return json.dumps(doc, indent=1)


def load_subproblem(text: str) -> ConvexSubproblem:
    doc = json.loads(text)
    obj = doc["objective"]

    def qc(c):
        return QuadConstraint(np.array(c["d"]), np.array(c["q"]), c["c"], c["name"])

    socs = [SocConstraint(np.array(s["t_linear"]), s["t_constant"], np.array(s["y_diag"]),
                          np.array(s["y_rows"]), np.array(s["y_constant"]), s["name"])
            for s in doc["soc_constraints"]]
    return ConvexSubproblem(doc["n_vars"], np.array(obj["linear"]),
                            np.array(obj["diag_quadratic"]), obj["constant"], obj["sense"],
                            [qc(c) for c in doc["quad_constraints"]], socs,
                            [qc(c) for c in doc["linear_constraints"]],
                            doc.get("block_size", 1))
