"""Seeded Monte Carlo sweeps, CSV/JSON output and brute-force oracles.

A plan fixes a base :class:`~cellfree_secure.netgen.SimConfig`, one swept
parameter, the programs to solve and their thresholds.  Every drop gets
its own seed stream, shared by all sweep points so that neighbouring
points see the same deployments (common random numbers); this keeps
trends across the sweep visible with few drops.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import closedform as cf
from . import estimation, netgen, pathfollow, sinr
from .estimation import ATTACKED
from .netgen import ConfigError, SimConfig

SWEEP_AXES = {
    "p_s": "p_s_w",
    "p_u": "p_u_w",
    "p_e": "p_e_w",
    "m_aps": "m_aps",
    "k_users": "k_users",
}
PATH_PROGRAMS = pathfollow.KINDS
EQUAL_PROGRAMS = ("P1_bar", "Q1_bar", "R1_bar", "S1_bar")
PROGRAMS = PATH_PROGRAMS + EQUAL_PROGRAMS
_ALIASES = {"P̲1": "P1_bar", "Q̲1": "Q1_bar", "R̲1": "R1_bar", "S̲1": "S1_bar"}
RATE_COLUMNS = ("mean_r_sec", "se_r_sec", "mean_rate_1", "mean_rate_e")


# -- plan ----------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    """Threshold policy shared by all programs of a plan.

    ``theta_k`` is the SNR floor of users 2..K, either one value for all
    of them or an explicit list.  ``theta_1`` is user 1's floor (used only
    by the power-minimisation program with an eavesdropper cap).
    ``theta_e`` is the cap on the eavesdropper's SNR and ``r_phi`` the
    secrecy-rate floor in nats.
    """

    theta_k: object = None
    theta_1: Optional[float] = None
    theta_e: Optional[float] = None
    r_phi: Optional[float] = None

    @classmethod
    def from_dict(cls, data: dict) -> "Thresholds":
        known = {"theta_k", "theta_1", "theta_e", "phi", "r_phi"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown threshold keys: {sorted(unknown)}")
        theta_k = data.get("theta_k")
        if isinstance(theta_k, list):
            theta_k = tuple(float(v) for v in theta_k)
        elif theta_k is not None:
            theta_k = float(theta_k)
        theta_1 = data.get("theta_1")
        theta_1 = None if theta_1 is None else float(theta_1)
        theta_e = data.get("theta_e")
        if isinstance(theta_e, str):
            theta_e = _ratio_policy(theta_e, theta_1, theta_k)
        elif theta_e is not None:
            theta_e = float(theta_e)
        if "phi" in data and "r_phi" in data:
            raise ConfigError("give either phi or r_phi, not both")
        r_phi = data.get("r_phi")
        if "phi" in data:
            phi = float(data["phi"])
            if phi <= 0:
                raise ConfigError("phi must be positive")
            r_phi = math.log(phi)
        r_phi = None if r_phi is None else float(r_phi)
        return cls(theta_k, theta_1, theta_e, r_phi)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.theta_k, tuple):
            d["theta_k"] = list(self.theta_k)
        return d

    def users(self, k_users: int) -> tuple:
        """Floors for users 2..K."""
        if self.theta_k is None:
            raise ConfigError("thresholds.theta_k is required")
        if isinstance(self.theta_k, tuple):
            if len(self.theta_k) != k_users - 1:
                raise ConfigError(f"theta_k lists {len(self.theta_k)} values, "
                                  f"need {k_users - 1}")
            return self.theta_k
        return (self.theta_k,) * (k_users - 1)

    def _need(self, name, program):
        v = getattr(self, name)
        if v is None:
            raise ConfigError(f"program {program} needs thresholds.{name}")
        return v

    def spec(self, program: str, k_users: int) -> pathfollow.ProblemSpec:
        """Path-following problem for ``program`` (bar suffix ignored)."""
        kind = program.replace("_bar", "")
        users = self.users(k_users)
        if kind == "P1":
            return pathfollow.ProblemSpec("P1", users, theta_e=self._need("theta_e", program))
        if kind == "Q1":
            return pathfollow.ProblemSpec("Q1", users)
        if kind == "R1":
            theta_1 = self._need("theta_1", program)
            return pathfollow.ProblemSpec("R1", (theta_1,) + users,
                                          theta_e=self._need("theta_e", program))
        return pathfollow.ProblemSpec("S1", users, r_phi=self._need("r_phi", program))


def _ratio_policy(text: str, theta_1, theta_k) -> float:
    """Evaluate ``"theta_1/50"`` or ``"theta_k/50"``."""
    m = re.fullmatch(r"\s*(theta_1|theta_k)\s*/\s*([0-9.eE+-]+)\s*", text)
    if not m:
        raise ConfigError(f"theta_e must be a number or 'theta_1/<d>' / "
                          f"'theta_k/<d>', got {text!r}")
    ref = theta_1 if m.group(1) == "theta_1" else theta_k
    if ref is None or isinstance(ref, tuple):
        raise ConfigError(f"theta_e refers to {m.group(1)}, which must be a single number")
    div = float(m.group(2))
    if div <= 0:
        raise ConfigError("theta_e divisor must be positive")
    return ref / div


@dataclass(frozen=True)
class ExperimentPlan:
    """One sweep: base deployment, swept axis, programs and thresholds.

    ``detection_snapshots`` is the number of training snapshots the APs
    average to form the pilot energies; 0 uses exact expectations.
    """

    base: SimConfig
    sweep_axis: str
    sweep_values: tuple
    programs: tuple
    drops: int
    thresholds: Thresholds
    detection_snapshots: int = 0
    tau_det: float = 0.05

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {sorted(SWEEP_AXES)}, "
                              f"got {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ConfigError("sweep_values must be nonempty")
        progs = tuple(_ALIASES.get(p, p) for p in self.programs)
        bad = [p for p in progs if p not in PROGRAMS]
        if bad or not progs:
            raise ConfigError(f"programs must be a nonempty subset of {PROGRAMS}, got {bad}")
        object.__setattr__(self, "programs", progs)
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        if int(self.drops) < 1:
            raise ConfigError("drops must be >= 1")
        if self.detection_snapshots < 0:
            raise ConfigError("detection_snapshots must be >= 0")
        if self.tau_det < 0:
            raise ConfigError("tau_det must be nonnegative")
        # surface threshold and config errors before any drop runs
        for v in self.sweep_values:
            cfg = self.config_at(v)
            for p in progs:
                self.thresholds.spec(p, cfg.k_users)

    def config_at(self, value) -> SimConfig:
        name = SWEEP_AXES[self.sweep_axis]
        if name in ("m_aps", "k_users"):
            if float(value) != int(value):
                raise ConfigError(f"{self.sweep_axis} values must be integers")
            value = int(value)
            if name == "k_users" and value > self.base.pilot_len:
                return self.base.replace(k_users=value, pilot_len=value)
        else:
            value = float(value)
        return self.base.replace(**{name: value})

    def with_drops(self, drops: int) -> "ExperimentPlan":
        return ExperimentPlan(self.base, self.sweep_axis, self.sweep_values,
                              self.programs, drops, self.thresholds,
                              self.detection_snapshots, self.tau_det)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "sweep_axis": self.sweep_axis,
            "sweep_values": list(self.sweep_values),
            "programs": list(self.programs),
            "drops": self.drops,
            "thresholds": self.thresholds.to_dict(),
            "detection_snapshots": self.detection_snapshots,
            "tau_det": self.tau_det,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        known = {"base", "sweep_axis", "sweep_values", "programs", "drops",
                 "thresholds", "detection_snapshots", "tau_det"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
        try:
            return cls(
                base=SimConfig.from_dict(data.get("base", {})),
                sweep_axis=data["sweep_axis"],
                sweep_values=tuple(data["sweep_values"]),
                programs=tuple(data["programs"]),
                drops=int(data.get("drops", 20)),
                thresholds=Thresholds.from_dict(data.get("thresholds", {})),
                detection_snapshots=int(data.get("detection_snapshots", 0)),
                tau_det=float(data.get("tau_det", 0.05)),
            )
        except KeyError as exc:
            raise ConfigError(f"plan is missing {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_plan(path) -> ExperimentPlan:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read plan {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("plan file must hold a JSON object")
    return ExperimentPlan.from_dict(data)


# -- one drop --------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """Everything derived from one drop at one sweep point."""

    config: SimConfig
    large_scale: netgen.LargeScale
    stats: estimation.ChannelStats
    ctx: sinr.SinrContext
    equal: cf.EqualPowerContext
    detection: estimation.DetectionReport


def _drop_seeds(seed: int, drops: int):
    return np.random.SeedSequence(seed).spawn(drops)


def _children(seed_seq: np.random.SeedSequence, n: int):
    """The first ``n`` children of ``seed_seq`` without advancing its spawn counter.

    ``SeedSequence.spawn`` is stateful, so reusing one drop's sequence at
    several sweep points would otherwise hand each point different streams.
    """
    return [np.random.SeedSequence(seed_seq.entropy, spawn_key=seed_seq.spawn_key + (i,),
                                   pool_size=seed_seq.pool_size) for i in range(n)]


def build_instance(cfg: SimConfig, seed_seq: np.random.SeedSequence,
                   detection_snapshots: int = 0, tau_det: float = 0.05) -> Instance:
    """Geometry, large-scale fading, statistics, detection and contexts.

    Deployment and detection draw from separate child streams so that the
    deployment does not depend on the detection settings.
    """
    geo_ss, det_ss = _children(seed_seq, 2)
    rng = np.random.default_rng(geo_ss)
    geo = netgen.gen_geometry(cfg, rng)
    ls = netgen.gen_large_scale(geo, cfg, rng)
    pw = netgen.normalized_powers(cfg)
    stats = estimation.channel_stats(ls, pw.rho_u, pw.rho_e, cfg.pilot_len)
    if detection_snapshots > 0:
        energies = estimation.sample_pilot_energy(
            ls, pw.rho_u, pw.rho_e, cfg.pilot_len, np.random.default_rng(det_ss),
            detection_snapshots)
    else:
        energies = estimation.expected_pilot_energy(ls, pw.rho_u, pw.rho_e, cfg.pilot_len)
    det = estimation.detect_attack(ls, pw.rho_u, cfg.pilot_len, energies, tau_det)
    ctx = sinr.build_context(stats, pw.rho_s, pw.rho_max, pw.noise_w)
    eq = cf.equal_power_context(stats, pw.rho_s, pw.rho_max)
    return Instance(cfg, ls, stats, ctx, eq, det)


def solve_closed_form(eq: cf.EqualPowerContext, program: str,
                      thr: Thresholds) -> cf.ClosedFormSolution:
    users = thr.users(eq.k_users)
    if program == "P1_bar":
        return cf.solve_p1_bar(eq, users, thr._need("theta_e", program))
    if program == "Q1_bar":
        return cf.solve_q1_bar(eq, users)
    if program == "R1_bar":
        return cf.solve_r1_bar(eq, (thr._need("theta_1", program),) + users,
                               thr._need("theta_e", program))
    if program == "S1_bar":
        return cf.solve_s1_bar(eq, users, math.exp(thr._need("r_phi", program)))
    raise ValueError(f"not an equal-power program: {program}")


@dataclass(frozen=True)
class DropOutcome:
    program: str
    ok: bool
    r_sec: float = float("nan")
    total_power_w: float = float("nan")
    rate_1: float = float("nan")
    rate_e: float = float("nan")
    solver_iterations: int = 0


def solve_instance(inst: Instance, program: str, thr: Thresholds,
                   opts: pathfollow.PathFollowOptions = pathfollow.PathFollowOptions()
                   ) -> DropOutcome:
    """Solve one program on one instance; solver failures become ``ok=False``."""
    k = inst.config.k_users
    try:
        if program in EQUAL_PROGRAMS:
            sol = solve_closed_form(inst.equal, program, thr)
            if not sol.feasible:
                return DropOutcome(program, False)
            psi = np.full(inst.ctx.shape, math.sqrt(sol.eta_star))
            rep, iters = sinr.rate_report(inst.ctx, psi), 0
        else:
            res = pathfollow.solve_program(inst.ctx, thr.spec(program, k), opts)
            if not res.feasible or res.status == "internal_error":
                return DropOutcome(program, False, solver_iterations=res.solver_iterations)
            rep, iters = res.rate_report, res.solver_iterations
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return DropOutcome(program, False)
    return DropOutcome(program, True, rep.r_sec, rep.total_power_w,
                       float(rep.rate_k[ATTACKED]), rep.rate_e, int(iters))


def _run_task(args):
    plan, value, seed_seq = args
    inst = build_instance(plan.config_at(value), seed_seq,
                          plan.detection_snapshots, plan.tau_det)
    outcomes = [solve_instance(inst, p, plan.thresholds) for p in plan.programs]
    return inst.detection.attack_detected, outcomes


# -- aggregation -------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    """Means over the successful drops of one (sweep value, program) pair.

    Rates are in nats/s/Hz; ``se_*`` are standard errors of the mean (NaN
    with fewer than two successful drops).
    """

    sweep_value: float
    program: str
    drops: int
    drops_failed: int
    mean_r_sec: float
    se_r_sec: float
    mean_total_power_w: float
    se_total_power_w: float
    mean_rate_1: float
    mean_rate_e: float
    detection_rate: float
    solver_iterations_mean: float

    @property
    def all_failed(self) -> bool:
        return self.drops_failed == self.drops


RESULT_COLUMNS = tuple(f for f in ResultRow.__dataclass_fields__)


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return mean, se


def aggregate(value, program: str, outcomes, detected) -> ResultRow:
    """Reduce per-drop outcomes (given in drop order) to one row."""
    good = [o for o in outcomes if o.ok]
    r_mean, r_se = _mean_se([o.r_sec for o in good])
    p_mean, p_se = _mean_se([o.total_power_w for o in good])
    return ResultRow(
        sweep_value=float(value),
        program=program,
        drops=len(outcomes),
        drops_failed=len(outcomes) - len(good),
        mean_r_sec=r_mean,
        se_r_sec=r_se,
        mean_total_power_w=p_mean,
        se_total_power_w=p_se,
        mean_rate_1=_mean_se([o.rate_1 for o in good])[0],
        mean_rate_e=_mean_se([o.rate_e for o in good])[0],
        detection_rate=float(np.mean(detected)),
        solver_iterations_mean=_mean_se([o.solver_iterations for o in good])[0],
    )


def run_plan(plan: ExperimentPlan, seed: int = 0, drops: Optional[int] = None,
             n_jobs: int = 1) -> list:
    """Run every (sweep value, drop) pair and aggregate per program.

    Rows come out sweep-major in plan order.  Results do not depend on
    ``n_jobs``: tasks are independent and reduced in drop order.
    """
    if drops is not None:
        plan = plan.with_drops(drops)
    seeds = _drop_seeds(seed, plan.drops)
    tasks = [(plan, v, s) for v in plan.sweep_values for s in seeds]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        results = [_run_task(t) for t in tasks]
    rows = []
    for i, value in enumerate(plan.sweep_values):
        chunk = results[i * plan.drops:(i + 1) * plan.drops]
        detected = [d for d, _ in chunk]
        for j, program in enumerate(plan.programs):
            rows.append(aggregate(value, program, [o[j] for _, o in chunk], detected))
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(rows, units: str = "nats") -> str:
    """CSV text with a header line; floats are written with ``repr``."""
    if units not in ("nats", "bits"):
        raise ConfigError("units must be 'nats' or 'bits'")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        d = asdict(r)
        if units == "bits":
            for c in RATE_COLUMNS:
                d[c] = float(sinr.to_bits(d[c]))
        w.writerow([_fmt(d[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def read_results_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            rows.append(ResultRow(
                sweep_value=float(rec["sweep_value"]), program=rec["program"],
                drops=int(rec["drops"]), drops_failed=int(rec["drops_failed"]),
                **{c: float(rec[c]) for c in RESULT_COLUMNS
                   if c not in ("sweep_value", "program", "drops", "drops_failed")}))
    return rows


def write_outputs(rows, plan: ExperimentPlan, out_dir, seed: int,
                  units: str = "nats") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(rows, units))
    echo = {"plan": plan.to_dict(), "seed": seed, "units": units,
            "columns": list(RESULT_COLUMNS)}
    (out / "plan_echo.json").write_text(json.dumps(echo, indent=2) + "\n")


# -- oracles -------------------------------------------------------------------------

@dataclass
class GridOracleResult:
    """Best grid point of an equal-power program (``eta`` None if infeasible)."""

    program: str
    eta: Optional[float]
    objective: Optional[float]
    n_feasible: int
    grid_points: int

    @property
    def feasible(self) -> bool:
        return self.eta is not None

    def to_dict(self) -> dict:
        return asdict(self) | {"feasible": self.feasible}


def _grid_eval(eq: cf.EqualPowerContext, program: str, thr: Thresholds, nu):
    """Feasibility mask and objective on a grid of ``nu = eta / eta_cap``."""
    eta = nu * eq.eta_cap
    snr = eq.snr_users(eta)
    users = np.array(thr.users(eq.k_users))
    feas = np.all(snr[:, 1:] >= users, axis=1) if users.size else np.ones(nu.size, bool)
    if program in ("P1_bar", "R1_bar"):
        feas &= eq.snr_eve(eta) <= thr._need("theta_e", program)
    if program == "R1_bar":
        feas &= snr[:, ATTACKED] >= thr._need("theta_1", program)
    if program == "S1_bar":
        feas &= eq.secrecy_ratio(eta) >= math.exp(thr._need("r_phi", program))
    if program == "P1_bar":
        obj = snr[:, ATTACKED]
    elif program == "Q1_bar":
        obj = eq.secrecy_ratio(eta)
    else:
        obj = eta
    return feas, obj


def _grid_best(program, nu, feas, obj):
    idx = np.flatnonzero(feas)
    if not idx.size:
        return None
    if program in ("R1_bar", "S1_bar"):
        return int(idx[0])
    return int(idx[np.argmax(obj[idx])])


def oracle_grid_1d(eq: cf.EqualPowerContext, program: str, thresholds: Thresholds,
                   grid_points: int = 10**6, refine: bool = True,
                   refine_points: int = 10**4, rel_width: float = 1e-14) -> GridOracleResult:
    """Exhaustive scan of ``eta`` over ``[0, eta_cap]``.

    Constraints are checked by direct evaluation of the reduced SNRs.  With
    ``refine``, grids of ``refine_points`` are laid over the two cells
    around the incumbent until the cell width falls below ``rel_width``
    times the incumbent, so small optima are resolved to relative accuracy.
    """
    program = _ALIASES.get(program, program)
    if program not in EQUAL_PROGRAMS:
        raise ValueError(f"grid oracle handles {EQUAL_PROGRAMS}, got {program!r}")
    if grid_points < 1000:
        raise ValueError("grid_points must be >= 1000")
    minimise = program in ("R1_bar", "S1_bar")
    nu = np.linspace(0.0, 1.0, grid_points)
    feas, obj = _grid_eval(eq, program, thresholds, nu)
    n_feas = int(np.count_nonzero(feas))
    best = _grid_best(program, nu, feas, obj)
    if best is None:
        return GridOracleResult(program, None, None, 0, grid_points)
    nu_best, obj_best = float(nu[best]), float(obj[best])
    lo, hi = nu[max(best - 1, 0)], nu[min(best + 1, grid_points - 1)]
    for _ in range(8 if refine else 0):
        if hi - lo <= rel_width * max(nu_best, 1e-300):
            break
        fine = np.linspace(lo, hi, refine_points)
        ff, fo = _grid_eval(eq, program, thresholds, fine)
        fb = _grid_best(program, fine, ff, fo)
        if fb is None:
            break
        if (fo[fb] < obj_best) if minimise else (fo[fb] > obj_best):
            nu_best, obj_best = float(fine[fb]), float(fo[fb])
        step = fine[1] - fine[0]
        lo, hi = max(nu_best - step, 0.0), min(nu_best + step, 1.0)
    return GridOracleResult(program, nu_best * eq.eta_cap, obj_best, n_feas, grid_points)


@dataclass
class RandomSearchResult:
    """Best feasible sample (``psi`` None when no sample was feasible)."""

    kind: str
    psi: Optional[np.ndarray]
    objective: Optional[float]
    n_feasible: int
    samples: int

    @property
    def feasible(self) -> bool:
        return self.psi is not None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "objective": self.objective,
                "n_feasible": self.n_feasible, "samples": self.samples,
                "feasible": self.feasible,
                "psi": None if self.psi is None else self.psi.tolist()}


def sample_power_region(ctx: sinr.SinrContext, n: int, rng: np.random.Generator):
    """``n`` matrices drawn uniformly from the per-AP power region.

    Each AP's row satisfies ``sum_k psi^2 gamma <= rho_max / rho_s``; in
    the rescaled coordinates ``u = psi sqrt(gamma rho_s / rho_max)`` that
    region is the nonnegative part of the unit ball, sampled exactly by a
    folded Gaussian direction and a ``U^(1/K)`` radius.
    """
    if not ctx.rho_max > 0:
        raise ValueError("power region is empty when rho_max <= 0")
    m, k = ctx.shape
    d = np.abs(rng.standard_normal((n, m, k)))
    d /= np.linalg.norm(d, axis=2, keepdims=True)
    r = rng.uniform(size=(n, m, 1)) ** (1.0 / k)
    scale = np.sqrt(ctx.power_cap / ctx.stats.gamma_mk)
    return r * d * scale


def batch_metrics(ctx: sinr.SinrContext, psi):
    """User SNRs (n, K), Eve's SNR (n,) and normalised power (n,) for a batch."""
    sig = np.einsum("mk,nmk->nk", ctx.a, psi)
    phi = np.einsum("kpm,nmp->nk", ctx.A**2, psi**2) + 1.0
    num_e = np.sum((ctx.b_e * psi[:, :, ATTACKED]) ** 2, axis=1)
    den_e = np.sum((ctx.b_k * psi) ** 2, axis=(1, 2)) + 1.0
    load = np.einsum("nmk,mk->n", psi**2, ctx.stats.gamma_mk)
    return sig**2 / phi, num_e / den_e, load


def oracle_random_search(ctx: sinr.SinrContext, spec: pathfollow.ProblemSpec,
                         samples: int, rng: np.random.Generator,
                         batch: int = 2000) -> RandomSearchResult:
    """Best feasible objective among ``samples`` random power matrices.

    Objectives match :func:`pathfollow.solve_program`: SNR_1 (P1), secrecy
    rate in nats (Q1) and total transmit power in W (R1, S1).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    theta = spec.user_thresholds(ctx.shape[1])
    floors = ~np.isnan(theta)
    maximise = spec.maximise
    watts = ctx.rho_s * (ctx.noise_w if math.isfinite(ctx.noise_w) else 1.0 / ctx.rho_max)
    best_obj, best_psi, n_feas = None, None, 0
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        psi = sample_power_region(ctx, n, rng)
        snr, snr_e, load = batch_metrics(ctx, psi)
        ok = np.all(snr[:, floors] >= theta[floors], axis=1)
        if spec.kind in ("P1", "R1"):
            ok &= snr_e <= spec.theta_e
        r_sec = np.log1p(snr[:, ATTACKED]) - np.log1p(snr_e)
        if spec.kind == "S1":
            ok &= r_sec >= spec.r_phi
        obj = {"P1": snr[:, ATTACKED], "Q1": r_sec}.get(spec.kind, load * watts)
        idx = np.flatnonzero(ok)
        n_feas += idx.size
        if idx.size:
            j = idx[np.argmax(obj[idx]) if maximise else np.argmin(obj[idx])]
            if best_obj is None or (obj[j] > best_obj if maximise else obj[j] < best_obj):
                best_obj, best_psi = float(obj[j]), psi[j].copy()
        done += n
    return RandomSearchResult(spec.kind, best_psi, best_obj, n_feas, samples)
