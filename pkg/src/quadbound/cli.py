"""Command-line front end: simulate, find-gait, trace and sweep."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .continuation import ContinuationOptions, SpecialKind, bounds_rule, switch_branch, trace
from .dynamics import DynamicsError
from .export import read_branch_json, read_solution_json, write_branch_csv, write_branch_json, write_solution_json
from .gaitlib import classify, label_function, seed_vertical_gait
from .integrate import IntegratorOptions, simulate_free
from .model import HybridState, ModelError, ModelParams, load_config, parse_inertia
from .shoot import Z_NAMES, ConvergenceError, InfeasibleError, fix_component, residual, solve

log = logging.getLogger("quadbound")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# where the named branch points sit for the default parameters (coordinate, value)
LANDMARKS = {
    "A": ("y", 1.70), "B": ("y", 1.61), "C": ("xdot", 1.43), "D": ("xdot", 9.79), "E": ("y", 1.02),
}


class Settings:
    def __init__(self, params: ModelParams, integ: IntegratorOptions, cont: ContinuationOptions):
        self.params, self.integ, self.cont = params, integ, cont


def load_settings(args) -> Settings:
    sections = load_config(args.config) if args.config else {"model": {}, "integrator": {}, "continuation": {}}
    model = dict(sections["model"])
    if args.inertia is not None:
        model["J"] = args.inertia
    params = ModelParams.from_mapping(model)
    integ = IntegratorOptions.from_mapping(sections["integrator"])
    cont = ContinuationOptions.from_mapping(sections["continuation"])
    if getattr(args, "step", None) is not None:
        cont = ContinuationOptions(**{**cont.__dict__, "step": args.step})
    return Settings(params, integ, cont)


# --- simulate ---


def cmd_simulate(args, st: Settings) -> int:
    if args.state:
        z, p_file = read_solution_json(args.state)
        params = p_file if p_file is not None and args.config is None and args.inertia is None else st.params
        initial = z.initial_state(params)
        duration = args.duration if args.duration is not None else z.t_stride
    else:
        params = st.params
        initial = HybridState([0.0, args.drop, 0.0, 0.0, 0.0], np.zeros(5))
        duration = args.duration if args.duration is not None else 3.0
    traj = simulate_free(initial, duration, params, st.integ, raise_on_error=False)
    out = args.out or "trajectory.csv"
    traj.to_csv(out)
    if traj.status != 0:
        err = DynamicsError(traj.status, traj.t[-1] if len(traj) else None)
        print(f"error: {err}; partial trajectory written to {out}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"wrote {len(traj)} samples, {len(traj.events)} events to {out}")
    return EXIT_OK


# --- find-gait ---


def cmd_find_gait(args, st: Settings) -> int:
    params = st.params
    if args.seed in ("pp", "bp"):
        if args.apex is None:
            raise ModelError("--apex is required with --seed pp|bp")
        guess = seed_vertical_gait(args.seed.upper(), args.apex, params)
    else:
        if not args.file:
            raise ModelError("--seed file needs --file PATH")
        guess, _ = read_solution_json(args.file)
    anchor = args.anchor
    z = solve(guess, params, [fix_component(anchor, float(getattr(guess, anchor)))], options=st.integ)
    label = str(classify(z, params))
    res = float(np.max(np.abs(residual(z, params, st.integ))))
    out = args.out or "gait.json"
    write_solution_json(z, params, out, label)
    print(f"{label}: |T| = {res:.2e}, written to {out}")
    return EXIT_OK


# --- trace ---


def _until_rules(specs, start):
    rules = []
    for spec in specs or ():
        if "=" not in spec:
            raise ModelError(f"--until expects NAME=VALUE, got {spec!r}")
        name, raw = spec.split("=", 1)
        name = name.strip()
        if name not in Z_NAMES and name.endswith("0") and name[:-1] in Z_NAMES:
            name = name[:-1]
        if name not in Z_NAMES:
            raise ModelError(f"--until: unknown solution component {name!r}")
        try:
            value = float(raw)
        except ValueError:
            raise ModelError(f"--until: cannot parse {raw!r}") from None
        if getattr(start, name) < value:
            rules.append(bounds_rule(name, hi=value))
        else:
            rules.append(bounds_rule(name, lo=value))
    return tuple(rules)


def _pick_pitchfork(branch, key: str):
    forks = branch.specials(SpecialKind.PITCHFORK)
    if not forks:
        raise ModelError("the branch file has no branch points")
    if key.upper() in LANDMARKS:
        name, value = LANDMARKS[key.upper()]
        return min(forks, key=lambda s: abs(getattr(s.z, name) - value))
    if "=" in key:
        name, raw = key.split("=", 1)
        name = name[:-1] if name not in Z_NAMES and name.endswith("0") else name
        if name not in Z_NAMES:
            raise ModelError(f"--switch-at: unknown component {name!r}")
        return min(forks, key=lambda s: abs(getattr(s.z, name) - float(raw)))
    try:
        return forks[int(key)]
    except (ValueError, IndexError):
        raise ModelError(f"--switch-at: no branch point {key!r} ({len(forks)} available)") from None


def cmd_trace(args, st: Settings) -> int:
    params, cont = st.params, st.cont
    sign = -1 if args.direction == "-" else 1
    d = cont.step
    if args.source:
        parent = read_branch_json(args.source)
        if args.config is None and args.inertia is None:
            params = parent.params
        if not args.switch_at:
            raise ModelError("--from needs --switch-at")
        bif = _pick_pitchfork(parent, args.switch_at)
        s1, s2 = switch_branch(parent, bif, params, sign=sign, integ=st.integ, eps=args.eps,
                               orient=args.orient)
    elif args.seed in ("pp", "bp"):
        if args.apex is None:
            raise ModelError("--apex is required with --seed pp|bp")
        h2 = args.apex + sign * max(d, 1e-3)
        s1 = seed_vertical_gait(args.seed.upper(), args.apex, params)
        s2 = seed_vertical_gait(args.seed.upper(), h2, params)
    elif args.seed == "file":
        if not args.file or len(args.file) != 2:
            raise ModelError("--seed file needs --file PATH PATH (two nearby converged gaits)")
        s1, _ = read_solution_json(args.file[0])
        s2, _ = read_solution_json(args.file[1])
    else:
        raise ModelError("give --seed pp|bp|file or --from BRANCH --switch-at POINT")
    if args.max_points:
        cont = ContinuationOptions(**{**cont.__dict__, "max_points": args.max_points})
    br = trace(s1, s2, params, step=d, stop_rules=_until_rules(args.until, s2), options=cont, integ=st.integ,
               label_fn=label_function(params), name=args.name or "")
    out = Path(args.out or "branch.json")
    write_branch_json(br, out)
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    write_branch_csv(br, csv_path)
    print(f"{len(br)} points, stop: {br.termination}")
    for s in br.special:
        print(f"  {s.kind.value:<11} #{s.index:<5} E={s.energy:.4f} y={s.z.y:.4f} xdot={s.z.xdot:.4f}")
    return EXIT_OK


# --- sweep ---


def cmd_sweep(args, st: Settings) -> int:
    from .sweep import BracketError, SweepReport, census, find_critical_inertia, fold_drift, pronking_reference

    params = st.params
    ref = pronking_reference(params, step=st.cont.step if args.step else 0.02, integ=st.integ)
    out = args.out or "sweep.json"
    if args.bracket:
        probes = []
        rep = SweepReport(params, probes)
        try:
            Jc = find_critical_inertia(args.event, tuple(args.bracket), params, tol=args.tol, ref=ref,
                                       integ=st.integ, probes=probes)
        except BracketError as exc:
            rep.notes.append(str(exc))
            rep.write(out)
            print(f"error: {exc}", file=sys.stderr)
            for pr in exc.probes:
                print(f"  J={pr.J:g}: {pr.to_dict()}", file=sys.stderr)
            return EXIT_CONFIG
        rep.critical[args.event] = Jc
        rep.write(out)
        print(f"{args.event}: J_crit = {Jc:.4f}  ({len(probes)} probes), report in {out}")
        return EXIT_OK
    grid = [parse_inertia(v) for v in (args.grid or ["inf", "1.2", "0.9", "0.45"])]
    rep = census(grid, params, ref, integ=st.integ)
    drift = fold_drift(rep.probes)
    if drift["J"]:
        rep.notes.append({"fold_drift": drift})
    rep.write(out)
    from .sweep import regime

    for pr in rep.probes:
        print(f"J={pr.J:g}: {regime(pr)}")
    print(f"report in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadbound", description=__doc__)
    ap.add_argument("--config", help="INI file with [model], [integrator], [continuation] sections")
    ap.add_argument("--inertia", help="body pitch inertia J (number or 'inf'); overrides the config")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="event-driven simulation to a trajectory CSV")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--state", help="gait JSON whose apex state starts the run")
    g.add_argument("--drop", type=float, help="drop the body from rest at this height")
    p.add_argument("--duration", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("find-gait", help="converge one periodic gait")
    p.add_argument("--seed", choices=("pp", "bp", "file"), default="pp")
    p.add_argument("--apex", type=float)
    p.add_argument("--file")
    p.add_argument("--anchor", default="y", choices=Z_NAMES, help="component held fixed while converging")
    p.add_argument("--out")
    p.set_defaults(func=cmd_find_gait)

    p = sub.add_parser("trace", help="follow a branch of gaits")
    p.add_argument("--seed", choices=("pp", "bp", "file"))
    p.add_argument("--apex", type=float)
    p.add_argument("--file", nargs="+")
    p.add_argument("--from", dest="source", help="branch JSON to switch from")
    p.add_argument("--switch-at", help="branch point: A-E, an index, or NAME=VALUE (nearest)")
    p.add_argument("--direction", choices=("+", "-"), default="+")
    p.add_argument("--orient", choices=Z_NAMES, help="component whose sign '+' selects when switching")
    p.add_argument("--eps", type=float, help="switching offset (default 10 steps)")
    p.add_argument("--until", action="append", help="stop when NAME reaches VALUE, e.g. y0=2.0")
    p.add_argument("--step", type=float)
    p.add_argument("--max-points", type=int)
    p.add_argument("--name")
    p.add_argument("--out", "--json", dest="out", help="branch JSON (default branch.json)")
    p.add_argument("--csv", help="plot CSV path (default: the JSON path with .csv)")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("sweep", help="branch census over J or bisection for a critical inertia")
    p.add_argument("--event", choices=("merge", "turning_points"), default="merge")
    p.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--grid", nargs="+", help="inertia values for a census (default: inf 1.2 0.9 0.45)")
    p.add_argument("--tol", type=float, default=5e-3)
    p.add_argument("--step", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        st = load_settings(args)
        return args.func(args, st)
    except (ModelError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DynamicsError, InfeasibleError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
