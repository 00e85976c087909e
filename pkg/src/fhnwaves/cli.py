"""Command-line front end: regime reports, wave solves, simulation, sweeps.

Subcommands
    regime    closed-form constants and regime classification (JSON)
    front     solve the traveling front (``--reversed`` for the opposite one)
    pulse     solve the traveling pulse
    simulate  direct PDE runs (front | reversed | pulse | both)
    sweep     solve fronts over a list of diffusion ratios
    validate  re-run profile validation on saved wave files

Exit codes: 0 success, 1 invalid input, 2 regime not admissible for the
requested wave, 3 solver failure.  Configuration precedence is flags over
config file over defaults; every resolved value is echoed into the report.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .model import (
    HypothesisError,
    ModelParams,
    RegimeError,
    classify_regime,
    derive_constants,
)
from .pde_sim import SimConfig, run_experiment
from .wave_solver import (
    SolverError,
    WaveProblem,
    WaveSolution,
    d_sweep,
    residual_in_original_system,
    solve_front,
    solve_pulse,
    solve_reversed_front,
    validate_profile,
)
from .weighted_space import Profile, WeightedGrid, load_profile_csv, save_profile_csv

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_INADMISSIBLE = 2
EXIT_SOLVER = 3


def _jsonable(obj):
    """Recursively convert reports and numpy scalars for stable JSON."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def _dump_json(payload, path=None):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")
    return text


def _read_config_file(path):
    """key=value lines; '#' comments; values parsed as numbers when possible."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


def _resolve_params(args) -> ModelParams:
    cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}
    beta = args.beta if args.beta is not None else cfg.get("beta")
    gamma = args.gamma if args.gamma is not None else cfg.get("gamma")
    d = args.d if args.d is not None else cfg.get("d")
    if beta is None or gamma is None or d is None:
        raise ValueError("beta, gamma and d must be given (flags or config file)")
    return ModelParams(float(beta), float(gamma), float(d))


def _add_param_flags(sub):
    sub.add_argument("--beta", type=float, default=None)
    sub.add_argument("--gamma", type=float, default=None)
    sub.add_argument("--d", type=float, default=None)
    sub.add_argument("--config", type=str, default=None,
                     help="key=value config file (flags take precedence)")
    sub.add_argument("--output-dir", type=str, default=".")


def _wave_payload(sol: WaveSolution, params: ModelParams) -> dict:
    report = sol.meta.get("validation")
    checks = {}
    if report is not None:
        for name, chk in report.checks.items():
            checks[name] = {
                "passed": chk.passed, "measured": chk.measured,
                "bound": chk.bound, "note": chk.note,
            }
    return {
        "params": {"beta": params.beta, "gamma": params.gamma, "d": params.d},
        "kind": sol.kind,
        "c": sol.c,
        "kappa": sol.kappa,
        "sigma_lab": sol.c * math.sqrt(params.d),
        "J_value": sol.J_value,
        "el_residual": sol.el_residual,
        "decay_fits": sol.decay_fits,
        "newton_iterations": sol.newton_iterations,
        "status": sol.status,
        "failed_checks": sol.failed_checks,
        "validation": checks,
        "speed_scan": sol.meta.get("speed_scan"),
        "window": [sol.u.grid.z_left, sol.u.grid.z_right, sol.u.grid.n],
    }


def cmd_regime(args) -> int:
    try:
        params = _resolve_params(args)
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        constants = derive_constants(params)
        report = classify_regime(params, constants)
        payload = {
            "params": dataclasses.asdict(params),
            "constants": dataclasses.asdict(constants),
            "regime": dataclasses.asdict(report),
        }
    except RegimeError:
        report = classify_regime(params)
        payload = {
            "params": dataclasses.asdict(params),
            "constants": None,
            "regime": dataclasses.asdict(report),
        }
    _dump_json(payload)
    admissible = (report.regime in ("subcritical", "supercritical", "critical")
                  and report.h1_holds and report.h2_holds)
    return EXIT_OK if admissible else EXIT_INADMISSIBLE


def _run_wave(args, kind: str) -> int:
    try:
        params = _resolve_params(args)
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if kind == "front" and getattr(args, "reversed", False):
            sol = solve_reversed_front(params)
        elif kind == "front":
            sol = solve_front(params)
        else:
            sol = solve_pulse(params)
    except (SolverError, RegimeError, HypothesisError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    payload = _wave_payload(sol, params)
    if sol.kind == "reversed_front":
        payload["residual_in_original_system"] = residual_in_original_system(sol, params)
    if kind == "pulse" and args.compare_front:
        try:
            front = solve_front(params)
            payload["c_front"] = front.c
            payload["pulse_faster_than_front"] = bool(sol.c > front.c)
        except SolverError as exc:
            payload["c_front"] = None
            payload["front_error"] = str(exc)
    _dump_json(payload, out / "wave.json")
    save_profile_csv(out / "profile.csv", sol.u.grid.nodes, sol.u.values, sol.v.values)
    print(f"wrote {out / 'wave.json'} and {out / 'profile.csv'} "
          f"(c={sol.c:.8g}, status={sol.status})")
    return EXIT_OK if sol.status == "validated" else EXIT_SOLVER


def cmd_front(args) -> int:
    return _run_wave(args, "front")


def cmd_pulse(args) -> int:
    return _run_wave(args, "pulse")


def cmd_simulate(args) -> int:
    try:
        params = _resolve_params(args)
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kinds = {"front": ["front"], "reversed": ["reversed_front"],
             "pulse": ["pulse"], "both": ["front", "reversed_front"]}[args.kind]
    reports = {}
    code = EXIT_OK
    for kind in kinds:
        seed = None
        sigma_pred = None
        if kind == "front" and args.seed_bvp:
            try:
                seed = solve_front(params)
                sigma_pred = seed.c * math.sqrt(params.d)
            except SolverError as exc:
                print(f"solver failure while seeding: {exc}", file=sys.stderr)
                return EXIT_SOLVER
        cfg = SimConfig(kind=kind, params=params, length=args.length,
                        n=args.n, dtau=args.dtau, tau_max=args.tau_max,
                        sigma_predicted=sigma_pred, seed_wave=seed)
        try:
            rep = run_experiment(cfg)
        except (ValueError, FloatingPointError) as exc:
            print(f"simulation failure ({kind}): {exc}", file=sys.stderr)
            code = EXIT_SOLVER
            continue
        reports[kind] = {
            "outcome": rep.outcome,
            "sigma_measured": rep.sigma_measured,
            "sigma_predicted": rep.sigma_predicted,
            "relative_error": rep.relative_error,
            "fit_residual": rep.fit_residual,
            "tau_final": rep.tau_final,
        }
        track = np.asarray(rep.level_track, dtype=float)
        if track.size:
            with open(out / f"track_{kind}.csv", "w") as fh:
                fh.write("tau,y\n")
                for t, y in track:
                    fh.write(f"{t!r},{y!r}\n")
        if rep.outcome in ("undetermined", "collapsed") and kind != "pulse":
            code = EXIT_SOLVER
    _dump_json({"params": dataclasses.asdict(params), "runs": reports},
               out / "simulation.json")
    print(f"wrote {out / 'simulation.json'}")
    return code


def cmd_sweep(args) -> int:
    try:
        if args.beta is None or args.gamma is None:
            raise ValueError("sweep needs --beta and --gamma")
        d_list = [float(tok) for tok in args.d_list.split(",")]
        if not d_list:
            raise ValueError("empty --d-list")
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = d_sweep(args.beta, args.gamma, d_list)
    with open(out / "sweep.csv", "w") as fh:
        fh.write("d,c,dc2,sup_u,v_at_zetaM\n")
        for row in rows:
            if "error" in row:
                fh.write(f"{row['d']!r},,,,\n")
            else:
                fh.write(",".join(repr(float(row[k]))
                                  for k in ("d", "c", "dc2", "sup_u", "v_at_zetaM")) + "\n")
    _dump_json({"beta": args.beta, "gamma": args.gamma, "rows": rows},
               out / "sweep.json")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK if all("error" not in r for r in rows) else EXIT_SOLVER


def cmd_validate(args) -> int:
    try:
        params = _resolve_params(args)
        wave = json.loads(Path(args.input).read_text())
        csv_path = Path(args.input).with_name("profile.csv")
        header, cols = load_profile_csv(csv_path)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    z, u, v = cols[0], cols[1], cols[2]
    grid = WeightedGrid(float(z[0]), float(z[-1]), len(z))
    kind = wave["kind"]
    problem = (WaveProblem.reversed_from_params(params)
               if kind == "reversed_front" else WaveProblem.from_params(params))
    if kind == "reversed_front":
        # validation runs on the reflected system where the wave is a front
        dc = derive_constants(params)
        u = dc.mu3 - u
        v = dc.mu3 / params.gamma - v
        kind = "front"
    sol = WaveSolution(
        c=wave["c"], kappa=wave["kappa"], u=Profile(grid, u), v=Profile(grid, v),
        J_value=wave["J_value"], el_residual=wave["el_residual"],
        decay_fits=wave["decay_fits"], kind=kind)
    report = validate_profile(sol, problem)
    payload = {name: {"passed": c.passed, "measured": c.measured,
                      "bound": c.bound, "note": c.note}
               for name, c in report.checks.items()}
    _dump_json({"input": str(args.input), "validation": payload,
                "all_passed": report.all_passed})
    return EXIT_OK if report.all_passed else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhnwaves",
        description="Traveling fronts and pulses of the FitzHugh-Nagumo system")
    subs = parser.add_subparsers(dest="command", required=True)

    p_regime = subs.add_parser("regime", help="constants and regime report")
    _add_param_flags(p_regime)
    p_regime.set_defaults(func=cmd_regime)

    p_front = subs.add_parser("front", help="solve the traveling front")
    _add_param_flags(p_front)
    p_front.add_argument("--reversed", action="store_true",
                         help="solve the opposite-direction front")
    p_front.set_defaults(func=cmd_front)

    p_pulse = subs.add_parser("pulse", help="solve the traveling pulse")
    _add_param_flags(p_pulse)
    p_pulse.add_argument("--compare-front", action="store_true",
                         help="also solve the front and report c_p > c_f")
    p_pulse.set_defaults(func=cmd_pulse)

    p_sim = subs.add_parser("simulate", help="direct PDE time integration")
    _add_param_flags(p_sim)
    p_sim.add_argument("--kind", choices=["front", "reversed", "pulse", "both"],
                       default="front")
    p_sim.add_argument("--length", type=float, default=800.0)
    p_sim.add_argument("--n", type=int, default=2 ** 14)
    p_sim.add_argument("--dtau", type=float, default=0.2)
    p_sim.add_argument("--tau-max", type=float, default=40000.0)
    p_sim.add_argument("--seed-bvp", action="store_true",
                       help="seed the forward front run from the refined wave")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = subs.add_parser("sweep", help="front solves over several d")
    p_sweep.add_argument("--beta", type=float, default=None)
    p_sweep.add_argument("--gamma", type=float, default=None)
    p_sweep.add_argument("--d-list", type=str, required=True,
                         help="comma-separated diffusion ratios")
    p_sweep.add_argument("--output-dir", type=str, default=".")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = subs.add_parser("validate", help="re-validate a saved wave")
    _add_param_flags(p_val)
    p_val.add_argument("--input", type=str, required=True,
                       help="path to wave.json (profile.csv beside it)")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
