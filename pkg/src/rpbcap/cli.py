"""Command-line front end.

Subcommands: simulate, design, optimize, tea, sensitivity, validate. Every
run writes a manifest (scenario path, subcommand, seed, tool version,
config hash) and machine-readable outputs whose first line carries the
manifest hash; identical inputs and seed give bit-identical files.

Exit codes: 0 ok, 2 configuration, 3 convergence, 4 infeasible
optimization, 5 internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .config import load_scenario, shipped_scenario_path
from .constants import kelvin_to_celsius
from .economics import evaluate_costs, sensitivity_sweep
from .errors import (
    ConfigError,
    InfeasibleOptimizationError,
    NonConvergenceError,
    RpbcapError,
)
from .flowsheet import FlowsheetEvaluator, validate_against_dataset
from .column import PbGeometry
from .optimizer import OptimizationProblem, multistart_solve
from .sizing import sequential_design

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_INFEASIBLE = 4
EXIT_INTERNAL = 5


@dataclass(frozen=True)
class RunManifest:
    scenario_path: str
    subcommand: str
    seed: int
    output_dir: str
    tool_version: str
    config_hash: str

    @property
    def hash(self):
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def _write_json(path, payload, manifest: RunManifest):
    body = {"manifest_hash": manifest.hash, **payload}
    with open(path, "w") as fh:
        json.dump(body, fh, sort_keys=True, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _write_csv(path, header, rows, manifest: RunManifest):
    with open(path, "w") as fh:
        fh.write(f"# manifest_hash: {manifest.hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit_manifest(manifest: RunManifest, outdir):
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump({**asdict(manifest), "manifest_hash": manifest.hash},
                  fh, sort_keys=True, indent=1)
        fh.write("\n")


def _solution_outputs(solution, costs, outdir, manifest):
    _write_json(os.path.join(outdir, "kpis.json"), solution.kpi_dict(), manifest)
    solution.absorber_profile.to_csv(
        os.path.join(outdir, "absorber_profile.csv"), manifest.hash
    )
    solution.stripper_profile.to_csv(
        os.path.join(outdir, "stripper_profile.csv"), manifest.hash
    )
    rows = []
    for name, stream in sorted(solution.streams.items()):
        rows.append(
            [name, stream.phase, repr(stream.temperature), repr(stream.pressure)]
            + [repr(stream.flow(c)) for c in ("co2", "h2o", "n2", "o2", "mea")]
        )
    _write_csv(
        os.path.join(outdir, "streams.csv"),
        ["stream", "phase", "temperature [K]", "pressure [Pa]",
         "co2 [mol/s]", "h2o [mol/s]", "n2 [mol/s]", "o2 [mol/s]", "mea [mol/s]"],
        rows, manifest,
    )
    if costs is not None:
        _write_json(os.path.join(outdir, "tea.json"), costs.as_dict(), manifest)


def cmd_simulate(loaded, args, manifest):
    solution = FlowsheetEvaluator(loaded.scenario).solve()
    costs = evaluate_costs(solution, loaded.economics)
    _solution_outputs(solution, costs, args.output, manifest)
    print(f"capture {solution.capture_rate:.4f}, SRD {solution.srd:.3f} GJ/t, "
          f"capture cost {costs.capture_cost:.1f} $/t")
    return EXIT_OK


def cmd_design(loaded, args, manifest):
    result = sequential_design(loaded.scenario.flue_gas, loaded.sizing)
    rows = []
    for unit in ("absorber", "stripper"):
        r = result[unit]
        rows.append([
            unit, repr(r.geometry.r_inner), repr(r.geometry.r_outer),
            repr(r.geometry.height), repr(r.geometry.packing_volume),
            repr(r.pressure_drop), repr(r.u_flood_inner), repr(r.gas_flow_design),
        ])
    _write_csv(
        os.path.join(args.output, "design.csv"),
        ["unit", "r_inner [m]", "r_outer [m]", "height [m]", "packing_volume [m3]",
         "pressure_drop [Pa]", "u_flood_inner [m/s]", "gas_flow_design [m3/s]"],
        rows, manifest,
    )
    _write_json(
        os.path.join(args.output, "design.json"),
        {
            unit: {
                "r_inner_m": result[unit].geometry.r_inner,
                "r_outer_m": result[unit].geometry.r_outer,
                "height_m": result[unit].geometry.height,
                "packing_volume_m3": result[unit].geometry.packing_volume,
                "pressure_drop_pa": result[unit].pressure_drop,
            }
            for unit in ("absorber", "stripper")
        },
        manifest,
    )
    g = result["absorber"].geometry
    print(f"absorber {g.r_inner:.3f}/{g.r_outer:.3f}/{g.height:.3f} m")
    return EXIT_OK


def cmd_optimize(loaded, args, manifest):
    problem = OptimizationProblem(loaded.scenario, mode=args.mode,
                                  econ=loaded.economics,
                                  sizing_assumptions=loaded.sizing)
    result = multistart_solve(
        problem, n_starts=args.n_starts, seed=args.seed,
        outer_iterations=args.outer_iterations,
        inner_iterations=args.inner_iterations,
        max_evals_per_outer=args.max_evals_per_outer,
        jobs=args.jobs,
    )
    solution, costs = result.best_solution, result.best_costs
    payload = {
        "mode": result.mode,
        "objective": result.objective,
        "objective_units": "GJ/tCO2" if result.mode == "sequential" else "USD/tCO2",
        "best_decision": result.best_decision,
        "constraint_activity": result.constraint_activity,
        "total_evaluations": result.total_evaluations,
        "per_start": result.per_start,
    }
    _write_json(os.path.join(args.output, "optimization.json"), payload, manifest)
    _solution_outputs(solution, costs, args.output, manifest)

    # Table-6-shaped summary; trailing * marks an active constraint
    act = result.constraint_activity
    star_eta = "*" if act.get("capture_target", {}).get("active") else ""
    star_treb = "*" if any(k.startswith("reboiler_t_upper") for k in act) else ""
    star_flood = "*" if act.get("flooding_abs", {}).get("active") else ""
    aspect_star = "*" if act.get("aspect_abs", {}).get("active") else ""
    dec = result.best_decision
    rows = [
        ["solvent_flowrate_kg_s", repr(dec["solvent_flow"]), ""],
        ["reboiler_temperature_c", repr(kelvin_to_celsius(dec["reboiler_t"])), star_treb],
        ["stripper_pressure_kpa", repr(dec["stripper_p"] / 1e3), ""],
        ["abs_rotation_rpm", repr(dec["abs_rpm"]), ""],
        ["str_rotation_rpm", repr(dec["str_rpm"]), ""],
        ["co2_capture_rate_pct", repr(100.0 * solution.capture_rate), star_eta],
        ["lean_loading_mol_mol", repr(solution.lean_loading), ""],
        ["rich_loading_mol_mol", repr(solution.rich_loading), ""],
        ["abs_pressure_drop_kpa", repr(solution.absorber_profile.pressure_drop() / 1e3), ""],
        ["abs_flooding_pct", repr(solution.absorber_profile.peak_flooding()), star_flood],
        ["srd_gj_t", repr(solution.srd), ""],
        ["sre_gje_t", repr(solution.sre), ""],
        ["capture_energy_gj_t", repr(solution.capture_energy), ""],
        ["capture_cost_usd_t", repr(costs.capture_cost), ""],
    ]
    if result.mode == "simultaneous":
        rows.insert(0, ["abs_outer_radius_m", repr(dec["abs_r_outer"]), aspect_star])
        rows.insert(0, ["abs_inner_radius_m", repr(dec["abs_r_inner"]),
                        "*" if act.get("r_min_abs", {}).get("active") else ""])
        rows.insert(2, ["abs_height_m", repr(dec["abs_height"]), aspect_star])
        rows.insert(3, ["str_inner_radius_m", repr(dec["str_r_inner"]),
                        "*" if act.get("r_min_str", {}).get("active") else ""])
        rows.insert(4, ["str_outer_radius_m", repr(dec["str_r_outer"]),
                        "*" if act.get("aspect_str", {}).get("active") else ""])
        rows.insert(5, ["str_height_m", repr(dec["str_height"]),
                        "*" if act.get("aspect_str", {}).get("active") else ""])
    _write_csv(os.path.join(args.output, "table_summary.csv"),
               ["variable", "value", "constraint_active"], rows, manifest)
    print(f"{result.mode} optimum: {result.objective:.4g} "
          f"{'GJ/t' if result.mode == 'sequential' else '$/t'} "
          f"({result.total_evaluations} flowsheet solves)")
    return EXIT_OK


def cmd_tea(loaded, args, manifest):
    solution = FlowsheetEvaluator(loaded.scenario).solve()
    costs = evaluate_costs(solution, loaded.economics)
    _solution_outputs(solution, costs, args.output, manifest)
    tonnes = costs.annual_tonnes
    stack = [
        ["capital", repr(costs.acc / tonnes)],
        ["fixed", repr(costs.fixed * loaded.economics.general_expense_factor / tonnes)],
        ["steam", repr(costs.utility["steam"] * loaded.economics.general_expense_factor / tonnes)],
        ["electricity", repr(costs.utility["electricity"] * loaded.economics.general_expense_factor / tonnes)],
        ["cooling_water", repr(costs.utility["cooling_water"] * loaded.economics.general_expense_factor / tonnes)],
        ["total", repr(costs.capture_cost)],
    ]
    _write_csv(os.path.join(args.output, "cost_stack.csv"),
               ["component", "usd_per_tonne"], stack, manifest)
    volume_rows = []
    for unit in ("absorber", "stripper"):
        geom = getattr(loaded.scenario, unit)
        kind = "pb" if isinstance(geom, PbGeometry) else "rpb"
        volume_rows.append([unit, kind, repr(geom.packing_volume)])
    _write_csv(os.path.join(args.output, "volume_bars.csv"),
               ["unit", "bed_type", "packing_volume_m3"], volume_rows, manifest)
    print(f"capture cost {costs.capture_cost:.2f} $/t "
          f"({costs.annual_tonnes:.0f} t/y)")
    return EXIT_OK


def cmd_sensitivity(loaded, args, manifest):
    solution = FlowsheetEvaluator(loaded.scenario).solve()
    rows = sensitivity_sweep(solution, loaded.economics, span=args.span)
    _write_csv(
        os.path.join(args.output, "tornado.csv"),
        ["parameter", "low", "base", "high", "span"],
        [[r["parameter"], repr(r["low"]), repr(r["base"]), repr(r["high"]), repr(r["span"])]
         for r in rows],
        manifest,
    )
    print("tornado (largest first):",
          ", ".join(f"{r['parameter']}={r['span']:.2f}" for r in rows[:3]))
    return EXIT_OK


def cmd_validate(loaded, args, manifest):
    report = validate_against_dataset(args.dataset)
    _write_json(os.path.join(args.output, "mare.json"), {"mare": report["mare"]}, manifest)
    per_run = report["per_run"]
    _write_csv(
        os.path.join(args.output, "per_run.csv"),
        ["run", "model_capture_pct", "measured_capture_pct",
         "model_rich_t_c", "measured_rich_t_c"],
        [[p["run"], repr(p["model_capture_pct"]), repr(p["measured_capture_pct"]),
          repr(p["model_rich_t_c"]), repr(p["measured_rich_t_c"])] for p in per_run],
        manifest,
    )
    print("MARE:", {k: round(v, 4) for k, v in report["mare"].items()})
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "design": cmd_design,
    "optimize": cmd_optimize,
    "tea": cmd_tea,
    "sensitivity": cmd_sensitivity,
    "validate": cmd_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rpbcap",
        description="Rotating packed bed CO2 capture: simulate, size, optimize, cost",
    )
    parser.add_argument("--version", action="version", version=f"rpbcap {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=(name != "validate"),
                       help="scenario YAML path or shipped name (e.g. rpb_30wt)")
        p.add_argument("--output", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        if name == "optimize":
            p.add_argument("--mode", choices=["sequential", "simultaneous"],
                           default="sequential")
            p.add_argument("--n-starts", type=int, default=20, dest="n_starts")
            p.add_argument("--jobs", type=int, default=1)
            p.add_argument("--outer-iterations", type=int, default=2,
                           dest="outer_iterations")
            p.add_argument("--inner-iterations", type=int, default=8,
                           dest="inner_iterations")
            p.add_argument("--max-evals-per-outer", type=int, default=40,
                           dest="max_evals_per_outer")
        if name == "sensitivity":
            p.add_argument("--span", type=float, default=0.20)
        if name == "validate":
            p.add_argument("--dataset", required=True, help="pilot runs CSV")
    return parser


def _resolve_scenario(arg):
    if arg and not os.path.exists(arg) and "/" not in arg and not arg.endswith(".yaml"):
        shipped = shipped_scenario_path(arg)
        if shipped.is_file():
            return str(shipped)
    return arg


def main(argv=None):
    default_dir = os.environ.get("RPBCAP_CONFIG_DIR")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario_arg = getattr(args, "scenario", None)
        if scenario_arg is None:
            scenario_path = "<none>"
            loaded = None
        else:
            if default_dir and not os.path.exists(scenario_arg):
                candidate = os.path.join(default_dir, scenario_arg)
                if os.path.exists(candidate):
                    scenario_arg = candidate
            scenario_path = _resolve_scenario(scenario_arg)
            loaded = load_scenario(scenario_path)
        os.makedirs(args.output, exist_ok=True)
        manifest = RunManifest(
            scenario_path=os.path.basename(str(scenario_path)),
            subcommand=args.subcommand,
            seed=args.seed,
            output_dir=os.path.basename(os.path.normpath(args.output)),
            tool_version=__version__,
            config_hash=loaded.config_hash if loaded else "",
        )
        _emit_manifest(manifest, args.output)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = COMMANDS[args.subcommand](loaded, args, manifest)
        return code
    except ConfigError as exc:
        _error_document(args, "config", exc)
        return EXIT_CONFIG
    except InfeasibleOptimizationError as exc:
        _error_document(args, "infeasible", exc)
        return EXIT_INFEASIBLE
    except NonConvergenceError as exc:
        _error_document(args, "convergence", exc)
        return EXIT_CONVERGENCE
    except RpbcapError as exc:
        _error_document(args, "internal", exc)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - the CLI boundary
        _error_document(args, "internal", exc)
        return EXIT_INTERNAL


def _error_document(args, kind, exc):
    out = getattr(args, "output", ".")
    try:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "error.json"), "w") as fh:
            json.dump(
                {"error_class": kind, "exception": type(exc).__name__,
                 "message": str(exc)},
                fh, sort_keys=True, indent=1,
            )
            fh.write("\n")
    except OSError:
        pass
    print(f"error[{kind}]: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
