import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellfree_secure import cvx
from cellfree_secure.cvx import ConvexSubproblem, QuadConstraint, SocConstraint
from oracles import projected_gradient


def ball(n, idx, weights=None, name="ball"):
    d = np.zeros(n)
    d[idx] = 1.0 if weights is None else weights
    return QuadConstraint(d, np.zeros(n), -1.0, name)


def random_problem(rng, n_blocks=2, bs=3, n_soc=2, n_lin=1, sense="min"):
    """Feasible random subproblem with the path-following structure.

    Built around a strictly feasible point so every instance has an interior.
    """
    n = n_blocks * bs
    x_in = rng.uniform(0.05, 0.3, n)
    quads = [ball(n, slice(b * bs, (b + 1) * bs), rng.uniform(0.5, 2.0, bs))
             for b in range(n_blocks)]
    socs = []
    for j in range(n_soc):
        g = rng.uniform(0, 1, n) * (rng.uniform(size=n) < 0.6)
        w = rng.uniform(0, 1, n) * (rng.uniform(size=n) < 0.5)
        R = rng.uniform(-1, 1, (1, n))
        r0 = rng.uniform(-0.5, 0.5, 1)
        y = np.concatenate([w * x_in, R @ x_in + r0])
        h = np.linalg.norm(y) - g @ x_in + rng.uniform(0.05, 0.5)
        socs.append(SocConstraint(g, h, w, R, r0, f"cone{j}"))
    lins = []
    for j in range(n_lin):
        q = rng.uniform(-1, 1, n)
        lins.append(QuadConstraint(np.zeros(n), q, -(q @ x_in) - rng.uniform(0.01, 0.2), f"lin{j}"))
    q = rng.uniform(-1, 1, n)
    d = rng.uniform(0, 1, n)
    if sense == "max":
        d = -d
    return ConvexSubproblem(n, q, d, 0.0, sense, quads, socs, lins, bs)


def cvxpy_reference(p):
    cp = pytest.importorskip("cvxpy")
    x = cp.Variable(p.n_vars, nonneg=True)
    obj = p.obj_d @ cp.square(x) + p.obj_q @ x + p.obj_c
    cons = []
    for c in p.quad_constraints + p.linear_constraints:
        cons.append(c.d @ cp.square(x) + c.q @ x + c.c <= 0)
    for s in p.soc_constraints:
        y = cp.hstack([cp.multiply(s.w, x), s.R @ x + s.r0])
        cons.append(cp.SOC(s.g @ x + s.h, y))
    prob = cp.Problem(cp.Minimize(obj) if p.sense == "min" else cp.Maximize(obj), cons)
    prob.solve(solver="CLARABEL")
    return prob.status, prob.value


class TestExamples:
    def test_unconstrained_at_boundary(self):
        p = ConvexSubproblem(1, [0.0], [1.0])
        sol = cvx.solve(p, [0.5])
        assert sol.status == "optimal"
        # complementarity x * lambda = 2 x^2 is driven below the KKT tolerance
        assert sol.objective_value <= cvx.TOL_KKT
        assert 0 <= sol.x[0] <= math.sqrt(cvx.TOL_KKT)

    def test_hand_kkt(self):
        lin = QuadConstraint(np.zeros(2), [-1.0, -1.0], 2.0, "sum>=2")
        p = ConvexSubproblem(2, [0.0, 0.0], [1.0, 1.0], linear_constraints=[lin])
        sol = cvx.solve(p)
        assert sol.status == "optimal"
        np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-6)
        assert sol.objective_value == pytest.approx(2.0, rel=1e-7)

    def test_power_ball_against_grid(self):
        c = np.array([0.7, 1.3])
        gamma = np.array([2.0, 0.5])
        p = ConvexSubproblem(2, c, [0.0, 0.0], sense="max",
                             quad_constraints=[QuadConstraint(gamma, [0.0, 0.0], -1.0)])
        sol = cvx.solve(p)
        assert sol.status == "optimal"
        theta = np.linspace(0, math.pi / 2, 200_001)
        pts = np.stack([np.cos(theta) / math.sqrt(gamma[0]), np.sin(theta) / math.sqrt(gamma[1])], 1)
        vals = pts @ c
        best = pts[np.argmax(vals)]
        np.testing.assert_allclose(sol.x, best, atol=1e-4)
        # closed form x_i = lambda c_i / gamma_i
        lam = 1.0 / math.sqrt(np.sum(c * c / gamma))
        np.testing.assert_allclose(sol.x, lam * c / gamma, rtol=1e-6)

    def test_infeasible(self):
        lin = QuadConstraint(np.zeros(2), [-1.0, -1.0], 3.0, "sum>=3")
        p = ConvexSubproblem(2, [1.0, 1.0], [0.0, 0.0], quad_constraints=[ball(2, slice(0, 2))],
                             linear_constraints=[lin])
        sol = cvx.solve(p)
        assert sol.status == "infeasible"

    def test_cone_start_needs_positive_t(self):
        soc = SocConstraint([1.0], -1.0, [1.0], np.zeros((0, 1)), np.zeros(0))
        p = ConvexSubproblem(1, [1.0], [0.0], soc_constraints=[soc])
        with pytest.raises(ValueError):
            cvx.solve(p, [0.5])

    def test_bad_problem_rejected(self):
        with pytest.raises(ValueError):
            ConvexSubproblem(1, [1.0], [-1.0], sense="min")
        with pytest.raises(ValueError):
            ConvexSubproblem(1, [1.0], [0.0], sense="sideways")
        with pytest.raises(ValueError):
            ConvexSubproblem(1, [1.0], [0.0], quad_constraints=[QuadConstraint([-1.0], [0.0], 0.0)])


class TestOracles:
    def test_projected_gradient_agreement(self):
        rng = np.random.default_rng(0)
        for _ in range(15):
            bs, nb = 3, 4
            n = bs * nb
            q = rng.uniform(-1, 1, n)
            d = rng.uniform(0, 1, n)
            p = ConvexSubproblem(n, q, d, quad_constraints=[ball(n, slice(b * bs, (b + 1) * bs))
                                                            for b in range(nb)], block_size=bs)
            sol = cvx.solve(p)
            _, ref = projected_gradient(q, d, bs)
            assert sol.status == "optimal"
            assert sol.objective_value == pytest.approx(ref, rel=1e-5, abs=1e-9)

    @pytest.mark.parametrize("sense", ["min", "max"])
    def test_cvxpy_agreement(self, sense):
        rng = np.random.default_rng(1 if sense == "min" else 2)
        for _ in range(12):
            p = random_problem(rng, sense=sense)
            status, ref = cvxpy_reference(p)
            assert status == "optimal"
            sol = cvx.solve(p)
            assert sol.status == "optimal"
            assert sol.objective_value == pytest.approx(ref, rel=1e-5, abs=1e-7)
            assert sol.violation <= cvx.TOL_FEAS

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_optimal_implies_small_residuals(self, seed):
        p = random_problem(np.random.default_rng(seed))
        sol = cvx.solve(p)
        if sol.status == "optimal":
            assert sol.kkt_residual <= cvx.TOL_KKT
            assert p.violation(sol.x) <= cvx.TOL_FEAS


class TestMechanics:
    def test_deterministic(self):
        p = random_problem(np.random.default_rng(5))
        a, b = cvx.solve(p), cvx.solve(p)
        assert a.x.tobytes() == b.x.tobytes()
        assert a.iterations == b.iterations

    def test_block_size_does_not_change_answer(self):
        p = random_problem(np.random.default_rng(6))
        q = cvx.load_subproblem(cvx.dump_subproblem(p))
        q.block_size = 1
        assert cvx.solve(p).objective_value == pytest.approx(cvx.solve(q).objective_value, rel=1e-7)

    def test_dump_round_trip(self):
        p = random_problem(np.random.default_rng(7), sense="max")
        text = cvx.dump_subproblem(p)
        assert '"format": "convex-subproblem/1"' in text
        q = cvx.load_subproblem(text)
        assert cvx.dump_subproblem(q) == text
        assert cvx.solve(q).x.tobytes() == cvx.solve(p).x.tobytes()

    def test_phase_one_from_infeasible_start(self):
        p = random_problem(np.random.default_rng(8))
        x0 = np.full(p.n_vars, 3.0)
        assert p.violation(x0) > 0
        x, _, infeas = cvx.find_interior_point(p, x0)
        assert x is not None and infeas < 0
        assert p.violation(x) == 0

    @pytest.mark.parametrize("phase1", [False, True])
    def test_newton_matches_dense_hessian(self, phase1):
        rng = np.random.default_rng(9)
        p = random_problem(rng, n_blocks=3, bs=2, n_soc=3, n_lin=2)
        prob = cvx._Compiled(p, phase1_shift=3.0, big_m=2.0) if phase1 else cvx._Compiled(p)
        x = rng.uniform(0.05, 0.2, prob.n)
        if phase1:
            x[-1] = 3.5
        f, G, cones = prob.evaluate(x)
        lam = rng.uniform(0.1, 2, f.size)
        lam_b = rng.uniform(0.1, 2, x.size)
        # dense reduced Newton matrix from first principles
        H = np.diag(2 * prob.f0_d + lam_b / x + 2 * (lam[:prob.nq] @ prob.Dq))
        for j, (g, h, w, R, r0) in enumerate(prob.socs):
            t = g @ x + h
            zd, zr = w * x, R @ x + r0
            ss = zd @ zd + zr @ zr
            v = w * zd + R.T @ zr
            Hj = (2 * (np.diag(w * w) + R.T @ R) / t
                  - 2 * (np.outer(v, g) + np.outer(g, v)) / t**2 + 2 * ss * np.outer(g, g) / t**3)
            H += lam[prob.nq + j] * Hj
        H += G.T @ ((lam / -f)[:, None] * G)
        rhs = rng.standard_normal(x.size)
        dx = prob.newton_solve(x, lam, lam_b, f, G, cones, rhs)
        assert np.linalg.norm(H @ dx - rhs) <= 1e-9 * np.linalg.norm(rhs)
