"""Constrained optimization of operating conditions and unit geometry.

Sequential mode optimizes the five operating decisions on fixed geometry
for specific capture energy; simultaneous mode adds the six geometry
decisions and minimizes capture cost. Both run an augmented Lagrangian
outer loop over box-constrained L-BFGS-B inner solves with
finite-difference gradients, globalized by Latin-hypercube multistart.
Each start owns an isolated flowsheet evaluator, so starts can run in any
order (or in parallel) with identical results for a fixed seed.

Failed flowsheet evaluations are absorbed by a feasibility-restoration
penalty (flagged, never silently large); every reported optimum satisfies
the scaled constraints to 1e-4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .column import RpbGeometry
from .constants import R_GAS, celsius_to_kelvin
from .economics import EconomicParams, evaluate_costs
from .errors import AllStartsFailedError, RpbcapError
from .flowsheet import FlowsheetEvaluator, OperatingPoint, ProcessScenario
from .properties import SolventState, default_package
from .sizing import SizingAssumptions, estimate_solvent_flow, min_inner_radius
from .streams import StreamState

OPERATING_NAMES = ("solvent_flow", "reboiler_t", "stripper_p", "abs_rpm", "str_rpm")
DESIGN_NAMES = ("abs_r_inner", "abs_r_outer", "abs_height",
                "str_r_inner", "str_r_outer", "str_height")

CONSTRAINT_TOL = 1e-4     # scaled feasibility at reported optima
ACTIVITY_TOL = 1e-3
MIN_ANNULUS = 0.05        # m, mechanical gap between the radii
FLOOD_LIMIT = 80.0        # %
OBJECTIVE_SCALE = {"sequential": 4.0, "simultaneous": 80.0}


@dataclass(frozen=True)
class DecisionBounds:
    names: tuple
    lower: np.ndarray
    upper: np.ndarray

    @property
    def dim(self):
        return len(self.names)

    def scale_to_unit(self, x):
        return (np.asarray(x, float) - self.lower) / (self.upper - self.lower)

    def scale_from_unit(self, z):
        return self.lower + np.clip(np.asarray(z, float), 0.0, 1.0) * (self.upper - self.lower)


@dataclass
class StartRecord:
    start_index: int
    start_point: list
    status: str
    objective: float = math.inf
    decision: list = field(default_factory=list)
    max_violation: float = math.inf
    evaluations: int = 0


@dataclass
class OptimizationResult:
    mode: str
    best_decision: dict
    objective: float
    constraint_activity: dict
    per_start: list
    total_evaluations: int
    best_solution: object = None
    best_costs: object = None


class OptimizationProblem:
    """Objective/constraint evaluator over the decision box."""

    supports_polish = True

    def __init__(self, scenario: ProcessScenario, mode="sequential",
                 econ: EconomicParams = None, package=None,
                 sizing_assumptions: SizingAssumptions = None):
        if mode not in ("sequential", "simultaneous"):
            raise ValueError("mode must be sequential or simultaneous")
        self.scenario = scenario
        self.mode = mode
        self.econ = econ or EconomicParams()
        self.package = package or default_package()
        self.assume = sizing_assumptions or SizingAssumptions(
            mea_mass_frac=scenario.mea_mass_frac
        )
        self.bounds = self._build_bounds()
        self.flowsheet_solves = 0
        self._cache = {}
        self._best_feasible_obj = None
        self._evaluator = FlowsheetEvaluator(scenario, self.package, fast=True)
        self._fail_count = 0
        self._last_good_x = None

    def spawn(self):
        """Fresh problem with an isolated evaluator and empty cache."""
        return OptimizationProblem(self.scenario, self.mode, self.econ,
                                   self.package, self.assume)

    # ------------------------------------------------------------------
    def _solvent_estimate_kg_s(self):
        n_sol = estimate_solvent_flow(self.scenario.flue_gas, self.assume)
        lean = StreamState.solvent(1.0, self.assume.mea_mass_frac,
                                   self.assume.lean_loading, 313.15, 1e5)
        return n_sol / lean.total_molar_flow

    def _flue_volume_flow(self):
        flue = self.scenario.flue_gas
        return flue.total_molar_flow * R_GAS * flue.temperature / flue.pressure

    def _build_bounds(self):
        f_est = self._solvent_estimate_kg_s()
        lo = [0.5 * f_est, celsius_to_kelvin(100.0), 1.0e5, 100.0, 100.0]
        hi = [2.0 * f_est, celsius_to_kelvin(120.0), 2.5e5, 1500.0, 1500.0]
        names = OPERATING_NAMES
        if self.mode == "simultaneous":
            gp = self.package.gas_properties(self.scenario.flue_gas)
            rho_l = self.package.liquid_properties(
                SolventState(self.scenario.mea_mass_frac, self.assume.lean_loading, 313.15)
            )["density"]
            r_min_abs = min_inner_radius(
                self.assume.engineering_factor * self._flue_volume_flow(),
                gp["density"], rho_l, self.assume,
            )
            names = OPERATING_NAMES + DESIGN_NAMES
            lo += [r_min_abs, r_min_abs + MIN_ANNULUS, 0.05, 0.02, 0.02 + MIN_ANNULUS, 0.05]
            hi += [3.0, 3.0, 3.0, 3.0, 3.0, 3.0]
        return DecisionBounds(tuple(names), np.array(lo, float), np.array(hi, float))

    # ------------------------------------------------------------------
    def decision_dict(self, x):
        return {name: float(v) for name, v in zip(self.bounds.names, x)}

    def _operating(self, x):
        return OperatingPoint(
            solvent_flow=float(x[0]), reboiler_temperature=float(x[1]),
            stripper_pressure=float(x[2]), absorber_rpm=float(x[3]),
            stripper_rpm=float(x[4]),
        )

    def _scenario_at(self, x):
        sc = self.scenario.with_operating(self._operating(x))
        if self.mode == "simultaneous":
            pack = self.scenario.absorber.packing
            absorber = RpbGeometry(float(x[5]), float(x[6]), float(x[7]), pack)
            stripper = RpbGeometry(float(x[8]), float(x[9]), float(x[10]), pack)
            sc = sc.with_geometry(absorber=absorber, stripper=stripper)
        return sc

    @property
    def n_constraints(self):
        return 3 if self.mode == "sequential" else 9

    def constraint_names(self):
        names = ["capture_target", "flooding_abs", "flooding_str"]
        if self.mode == "simultaneous":
            names += ["aspect_abs", "aspect_str", "r_min_abs", "r_min_str",
                      "radii_abs", "radii_str"]
        return names

    def evaluate(self, x):
        """(scaled objective, scaled constraints g<=0, solution, ok)."""
        key = tuple(np.round(np.asarray(x, float), 10))
        if key in self._cache:
            return self._cache[key]
        self.flowsheet_solves += 1
        try:
            sc = self._scenario_at(x)
            self._evaluator.scenario = sc
            solution = self._evaluator.solve(sc.operating)
            ok = True
        except (RpbcapError, ValueError, FloatingPointError):
            # feasibility restoration: the penalty grows with distance from
            # the last good point, so descent points back into solvable land
            self._fail_count += 1
            base = self._best_feasible_obj if self._best_feasible_obj is not None else 10.0
            penalty = base + 5.0
            if self._last_good_x is not None:
                span = self.bounds.upper - self.bounds.lower
                dist = (np.asarray(x, float) - self._last_good_x) / span
                penalty += float(dist @ dist)
            out = (penalty, np.ones(self.n_constraints), None, False)
            self._cache[key] = out
            return out

        g = self._constraints(sc, solution)
        self._last_good_x = np.asarray(x, float).copy()
        if self.mode == "sequential":
            obj = solution.capture_energy / OBJECTIVE_SCALE["sequential"]
        else:
            obj = evaluate_costs(solution, self.econ).capture_cost / OBJECTIVE_SCALE["simultaneous"]
        if np.all(g <= CONSTRAINT_TOL) and (
            self._best_feasible_obj is None or obj < self._best_feasible_obj
        ):
            self._best_feasible_obj = obj
        out = (obj, g, solution, True)
        self._cache[key] = out
        return out

    def _constraints(self, sc, solution):
        g = [
            (sc.target_capture - solution.capture_rate) / sc.target_capture,
            (solution.absorber_profile.peak_flooding() - FLOOD_LIMIT) / 100.0,
            (solution.stripper_profile.peak_flooding() - FLOOD_LIMIT) / 100.0,
        ]
        if self.mode == "simultaneous":
            lean_in = solution.streams["lean_in"]
            rho_l = self.package.liquid_properties(
                SolventState(sc.mea_mass_frac, lean_in.co2_loading, lean_in.temperature)
            )["density"]
            gp = self.package.gas_properties(sc.flue_gas)
            r_min_a = min_inner_radius(
                self.assume.engineering_factor * self._flue_volume_flow(),
                gp["density"], rho_l, self.assume,
            )
            vap_in = solution.stripper_profile.vapor_inlet
            g_vol_s = vap_in.total_molar_flow * R_GAS * vap_in.temperature / vap_in.pressure
            rho_vs = vap_in.pressure * vap_in.molar_mass / (R_GAS * vap_in.temperature) \
                if vap_in.total_molar_flow > 0 else gp["density"]
            r_min_s = min_inner_radius(self.assume.engineering_factor * g_vol_s,
                                       rho_vs, rho_l, self.assume)
            abs_g, str_g = sc.absorber, sc.stripper
            g += [
                abs_g.aspect_ratio - 0.5,
                str_g.aspect_ratio - 0.5,
                (r_min_a - abs_g.r_inner) / max(r_min_a, 1e-6),
                (r_min_s - str_g.r_inner) / max(r_min_s, 1e-6),
                abs_g.r_inner + MIN_ANNULUS - abs_g.r_outer,
                str_g.r_inner + MIN_ANNULUS - str_g.r_outer,
            ]
        return np.array(g)

    # convenience wrappers aligned with the module interface ---------------
    def objective_sequential(self, x):
        """Specific capture energy, GJ/t (penalized value when flagged)."""
        obj, _g, _sol, ok = self.evaluate(x)
        return obj * OBJECTIVE_SCALE["sequential"] if ok else obj

    def objective_simultaneous(self, x):
        """Capture cost, $/t (penalized value when flagged)."""
        obj, _g, _sol, ok = self.evaluate(x)
        return obj * OBJECTIVE_SCALE["simultaneous"] if ok else obj

    def constraints(self, x):
        """Signed scaled residuals with an activity report."""
        _obj, g, _sol, _ok = self.evaluate(x)
        return {
            name: {"residual": float(gi), "active": bool(abs(gi) <= ACTIVITY_TOL)}
            for name, gi in zip(self.constraint_names(), g)
        }


def local_solve(problem: OptimizationProblem, start, outer_iterations=4,
                inner_iterations=12, mu0=10.0, max_evals_per_outer=None):
    """Augmented Lagrangian descent from one start point.

    Deterministic for a fixed start; returns a StartRecord carrying the
    best point seen, its violation and the evaluation count. The solvent
    flow is snapped onto the capture target at the end (a reduced-space
    polish: below-target flow is infeasible, above-target flow wastes
    energy, so the constraint is active at any optimum).
    """
    bounds = problem.bounds
    z = np.clip(bounds.scale_to_unit(np.asarray(start, float)), 0.0, 1.0)
    lam = np.zeros(problem.n_constraints)
    mu = mu0
    record = StartRecord(start_index=-1, start_point=[float(v) for v in start],
                         status="running")
    evals_before = problem.flowsheet_solves

    def auglag(zv):
        x = bounds.scale_from_unit(zv)
        obj, g, _sol, _ok = problem.evaluate(x)
        shifted = np.maximum(0.0, lam / mu + g)
        return obj + 0.5 * mu * float(shifted @ shifted) - float(lam @ lam) / (2.0 * mu)

    options = {"maxiter": inner_iterations, "eps": 1e-6, "ftol": 1e-10}
    if max_evals_per_outer is not None:
        options["maxfun"] = max_evals_per_outer
    best_feasible = None   # (obj, x)
    best_infeasible = None  # (viol, obj, x)

    def consider(x):
        nonlocal best_feasible, best_infeasible
        obj, g, _sol, ok = problem.evaluate(x)
        viol = float(np.max(g)) if len(g) else 0.0
        if ok:
            if viol <= CONSTRAINT_TOL:
                if best_feasible is None or obj < best_feasible[0]:
                    best_feasible = (obj, np.asarray(x, float).copy())
            elif best_infeasible is None or viol < best_infeasible[0]:
                best_infeasible = (viol, obj, np.asarray(x, float).copy())
        return obj, g, viol, ok

    for _outer in range(outer_iterations):
        res = minimize(
            auglag, z, method="L-BFGS-B",
            bounds=[(0.0, 1.0)] * bounds.dim, options=options,
        )
        z = np.clip(res.x, 0.0, 1.0)
        x = bounds.scale_from_unit(z)
        _obj, g, viol, _ok = consider(x)
        lam = np.maximum(0.0, lam + mu * g)
        mu = min(mu * (2.0 if viol <= CONSTRAINT_TOL else 5.0), 1e5)

    # reduced-space polish: snap the capture constraint via the solvent
    # flow, then walk the absorber speed down toward the flooding bound
    # while it keeps paying
    anchor = best_feasible[1] if best_feasible is not None else (
        best_infeasible[2] if best_infeasible is not None else None
    )
    if not getattr(problem, "supports_polish", False):
        anchor = None
    if anchor is not None:
        x_snap = _snap_capture(problem, anchor, consider)
        if x_snap is not None:
            if problem.mode == "sequential":
                x_polished = _walk_to_flooding(problem, x_snap, consider)
            else:
                x_polished = _pin_design_bounds(problem, x_snap, consider)
            if x_polished is not None:
                obj_p, g_p, _sol, ok_p = problem.evaluate(x_polished)
                viol_p = float(np.max(g_p)) if len(g_p) else 0.0
                if ok_p and viol_p <= CONSTRAINT_TOL and (
                    best_feasible is None or obj_p <= best_feasible[0] + 2.5e-4
                ):
                    # accept a tie-sized give-back for the bound-active point
                    best_feasible = (obj_p, np.asarray(x_polished, float).copy())

    record.evaluations = problem.flowsheet_solves - evals_before
    if best_feasible is not None:
        record.objective = float(best_feasible[0])
        record.decision = [float(v) for v in best_feasible[1]]
        record.max_violation = 0.0
        record.status = "feasible"
    elif best_infeasible is not None:
        record.max_violation, record.objective = best_infeasible[0], float(best_infeasible[1])
        record.decision = [float(v) for v in best_infeasible[2]]
        record.status = "infeasible"
    else:
        record.status = "failed"
    return record


def _snap_capture(problem, x_anchor, consider, iterations=6):
    """Secant on the solvent flow toward exact target capture.

    Returns the snapped decision vector, or None when the secant left
    solvable territory.
    """
    target = problem.scenario.target_capture
    lo, hi = problem.bounds.lower[0], problem.bounds.upper[0]

    def capture_at(flow):
        x = np.asarray(x_anchor, float).copy()
        x[0] = min(max(flow, lo), hi)
        _obj, g, _viol, ok = consider(x)
        if not ok:
            return None, x
        return target - g[0] * target, x  # invert the scaled residual

    f0 = float(x_anchor[0])
    c0, x_last = capture_at(f0)
    if c0 is None:
        return None
    f1 = min(max(f0 * (1.02 if c0 < target else 0.98), lo), hi)
    c1, x_last = capture_at(f1)
    if c1 is None:
        return None
    for _ in range(iterations):
        if abs(c1 - target) < 1e-5 or abs(c1 - c0) < 1e-9:
            break
        f2 = f1 + (target * (1.0 + 2e-5) - c1) * (f1 - f0) / (c1 - c0)
        f2 = min(max(f2, lo), hi)
        f0, c0 = f1, c1
        c1, x_new = capture_at(f2)
        if c1 is None:
            break
        f1, x_last = f2, x_new
    return x_last


def _walk_to_flooding(problem, x_start, consider, rounds=6):
    """Reduce the absorber speed onto the flooding bound when it pays.

    Secant rounds on speed (phi is roughly inversely proportional to it),
    re-snapping the capture constraint each move; a move sticks only if a
    feasible lower objective results. Afterwards the reboiler temperature
    is pushed to its cap whenever that does not cost anything (ties break
    toward the bound).
    """
    rpm_lo, rpm_hi = problem.bounds.lower[3], problem.bounds.upper[3]
    obj_ref, g_ref, _sol, ok = problem.evaluate(x_start)
    if not ok or float(np.max(g_ref)) > CONSTRAINT_TOL:
        return
    x_cur = np.asarray(x_start, float).copy()
    target = FLOOD_LIMIT - 0.02
    for _ in range(rounds):
        _obj, g, sol, ok = problem.evaluate(x_cur)
        if not ok or sol is None:
            break
        phi = sol.absorber_profile.peak_flooding()
        if abs(phi - FLOOD_LIMIT) <= 0.08:
            break
        x_try = x_cur.copy()
        x_try[3] = min(max(x_try[3] * max(phi, 5.0) / target, rpm_lo), rpm_hi)
        if abs(x_try[3] - x_cur[3]) < 0.5:
            break
        x_snap = _snap_capture(problem, x_try, consider)
        if x_snap is None:
            break
        obj_new, g_new, _sol2, ok2 = problem.evaluate(x_snap)
        if not ok2 or float(np.max(g_new)) > CONSTRAINT_TOL or obj_new >= obj_ref:
            break
        obj_ref, x_cur = obj_new, np.asarray(x_snap, float)

    x_cur = _prefer_reboiler_cap(problem, x_cur, consider, obj_ref)
    return x_cur


def _prefer_reboiler_cap(problem, x_cur, consider, obj_ref):
    """Move the reboiler temperature onto its cap when (nearly) free."""
    t_hi = problem.bounds.upper[1]
    if x_cur[1] < t_hi - 1e-9:
        x_try = np.asarray(x_cur, float).copy()
        x_try[1] = t_hi
        x_snap = _snap_capture(problem, x_try, consider)
        if x_snap is not None:
            obj_new, g_new, _sol2, ok2 = problem.evaluate(x_snap)
            if ok2 and float(np.max(g_new)) <= CONSTRAINT_TOL and obj_new <= obj_ref + 2.5e-4:
                return np.asarray(x_snap, float)
    return np.asarray(x_cur, float)


def _pin_design_bounds(problem, x_start, consider):
    """Simultaneous-mode polish: pin the aspect and minimum-radius bounds.

    The rotor purchase law prices diameter, not height, so the stout-rotor
    aspect bound is active at any cost optimum; likewise the inner radii
    sit on their eye-velocity minimum. Each pin re-snaps the capture
    constraint and is kept only when (nearly) free.
    """
    obj_ref, g_ref, sol, ok = problem.evaluate(x_start)
    if not ok or sol is None or float(np.max(g_ref)) > CONSTRAINT_TOL:
        return x_start
    x_cur = np.asarray(x_start, float).copy()

    def try_pin(mutate):
        nonlocal x_cur, obj_ref
        x_try = x_cur.copy()
        mutate(x_try)
        x_try = np.clip(x_try, problem.bounds.lower, problem.bounds.upper)
        x_snap = _snap_capture(problem, x_try, consider)
        if x_snap is None:
            return
        obj_new, g_new, _sol, ok2 = problem.evaluate(x_snap)
        if ok2 and float(np.max(g_new)) <= CONSTRAINT_TOL and obj_new <= obj_ref + 2.5e-4:
            x_cur = np.asarray(x_snap, float)
            obj_ref = min(obj_ref, obj_new)

    # aspect H = r_outer on both units (H / 2 r_outer = 0.5)
    try_pin(lambda x: (x.__setitem__(7, x[6]), x.__setitem__(10, x[9])))
    # inner radii at the eye-velocity minimum (from the current solution)
    _obj, g_cur, sol, ok = problem.evaluate(x_cur)
    if ok and sol is not None:
        # back the r_min values out of the scaled residuals g = (r_min - r_i)/r_min
        r_min_a = x_cur[5] / max(1.0 - g_cur[5], 1e-6)
        r_min_s = x_cur[8] / max(1.0 - g_cur[6], 1e-6)
        try_pin(lambda x: (x.__setitem__(5, r_min_a * 1.0003),
                           x.__setitem__(8, r_min_s * 1.0003)))
    x_cur = _prefer_reboiler_cap(problem, x_cur, consider, obj_ref)
    return x_cur


def latin_hypercube(n, dim, rng):
    """Stratified unit-cube samples, one stratum per axis and sample."""
    grid = (np.arange(n)[:, None] + rng.random((n, dim))) / n
    for j in range(dim):
        grid[:, j] = grid[rng.permutation(n), j]
    return grid


def _run_start(args):
    problem, start, index, outer_iterations, inner_iterations, max_evals = args
    rec = local_solve(problem, start, outer_iterations, inner_iterations,
                      max_evals_per_outer=max_evals)
    rec.start_index = index
    return rec


def scenario_start(problem: OptimizationProblem):
    """Decision vector at the scenario's own operating point and geometry."""
    sc = problem.scenario
    op = sc.operating
    x = [op.solvent_flow, op.reboiler_temperature, op.stripper_pressure,
         op.absorber_rpm, op.stripper_rpm]
    if problem.mode == "simultaneous":
        x += [sc.absorber.r_inner, sc.absorber.r_outer, sc.absorber.height,
              sc.stripper.r_inner, sc.stripper.r_outer, sc.stripper.height]
    return np.clip(np.asarray(x, float), problem.bounds.lower, problem.bounds.upper)


def multistart_solve(problem: OptimizationProblem, n_starts=20, seed=0,
                     outer_iterations=4, inner_iterations=12,
                     max_evals_per_outer=None, jobs=1,
                     include_scenario_start=True):
    """Best feasible local optimum over Latin-hypercube starts.

    Start 0 defaults to the scenario's own design point (the heuristic
    baseline); the remaining starts are Latin-hypercube samples. Ties
    break toward the lower objective, then the lexicographically smaller
    decision vector; raises AllStartsFailedError when no start yields a
    feasible point. Each start runs on an isolated problem copy, so the
    merge is order-independent (and parallelizable over jobs) for a fixed
    seed.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    rng = np.random.default_rng(seed)
    starts = []
    if include_scenario_start:
        starts.append(scenario_start(problem))
    n_lhs = n_starts - len(starts)
    if n_lhs > 0:
        unit = latin_hypercube(n_lhs, problem.bounds.dim, rng)
        starts += [problem.bounds.scale_from_unit(unit[i]) for i in range(n_lhs)]
    starts = starts[:n_starts]
    tasks = [
        (problem.spawn(), starts[i], i, outer_iterations, inner_iterations,
         max_evals_per_outer)
        for i in range(n_starts)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_start, tasks))
    else:
        records = [_run_start(t) for t in tasks]
    records.sort(key=lambda r: r.start_index)
    total_evals = sum(r.evaluations for r in records)
    feasible = [r for r in records if r.status == "feasible"]
    if not feasible:
        raise AllStartsFailedError(
            "no feasible optimum found", per_start=[r.__dict__ for r in records]
        )
    feasible.sort(key=lambda r: (round(r.objective, 12), tuple(r.decision)))
    best = feasible[0]
    x_best = np.array(best.decision)

    final = problem.spawn()
    obj, _g, solution, _ok = final.evaluate(x_best)
    activity = final.constraints(x_best)
    total_evals += final.flowsheet_solves
    names = final.bounds.names
    span = final.bounds.upper - final.bounds.lower
    for name, val, lo, hi, sp in zip(names, x_best, final.bounds.lower,
                                     final.bounds.upper, span):
        if abs(val - hi) <= ACTIVITY_TOL * sp:
            activity[f"{name}_upper"] = {"residual": float((val - hi) / sp), "active": True}
        if abs(val - lo) <= ACTIVITY_TOL * sp:
            activity[f"{name}_lower"] = {"residual": float((val - lo) / sp), "active": True}
    costs = evaluate_costs(solution, final.econ) if solution is not None else None
    return OptimizationResult(
        mode=final.mode,
        best_decision=final.decision_dict(x_best),
        objective=float(obj * OBJECTIVE_SCALE[final.mode]),
        constraint_activity=activity,
        per_start=[r.__dict__ for r in records],
        total_evaluations=total_evals,
        best_solution=solution,
        best_costs=costs,
    )
