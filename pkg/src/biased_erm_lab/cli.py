"""Command line front end: sweeps, experiments, verification, and tables.

Four subcommands:

* ``region``     sweep two parameters, write the verdict grid as CSV and a
                 blue/red SVG with the exact boundary dashed in black
* ``experiment`` run finite-sample repetitions and write JSON/CSV results
* ``verify``     run the analytic verification suites; exit 0 iff all pass
* ``table``      emit the intervention-by-corruption recovery matrix

Every run that writes files also writes ``manifest.json`` recording the
command, resolved parameters, seed, version, outputs, and duration, which is
enough to replay the run bit-for-bit.  Exit codes: 0 success, 1 runtime or
verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .bias import BiasParams
from .distribution import TrueModel
from .errors import RangeError
from .fairness import ConstraintKind, Criterion, empirical_tolerance
from .recovery import AxisSpec, recovery_region, sweep_to_csv
from .simulate import (
    ExperimentConfig,
    Intervention,
    TableCell,
    default_table_cells,
    intervention_table,
    result_to_csv,
    result_to_dict,
    run_experiment,
    table_to_csv,
    table_to_markdown,
)
from .verify import SUITE_NAMES, run_all

_AXIS_ALIASES = {"beta": "beta_pos"}

_CRITERIA = {
    "eo": Criterion.EQUAL_OPPORTUNITY,
    "eodds": Criterion.EQUALIZED_ODDS,
    "dp": Criterion.DEMOGRAPHIC_PARITY,
}


class UsageError(ValueError):
    pass


def _add_model_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--r", type=float, default=None, help="group B share")
    sub.add_argument("--p", type=float, default=None, help="positive region mass")
    sub.add_argument("--eta", type=float, default=None, help="label noise rate")
    sub.add_argument("--beta-pos", type=float, default=None,
                     help="retention rate of apparent B positives")
    sub.add_argument("--beta-neg", type=float, default=None,
                     help="retention rate of apparent B negatives")
    sub.add_argument("--nu", type=float, default=None,
                     help="flip rate of kept apparent B positives")


_MODEL_DEFAULTS = {
    "r": 1.0 / 3.0,
    "p": 0.5,
    "eta": 0.2,
    "beta_pos": 1.0,
    "beta_neg": 1.0,
    "nu": 0.0,
}


def _resolve(args: argparse.Namespace, file_values: dict, keys: dict) -> dict:
    """flag > config file > default, per key."""
    out = {}
    for key, default in keys.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_values:
            out[key] = file_values[key]
        else:
            out[key] = default
    return out


def _model_bias(values: dict) -> tuple[TrueModel, BiasParams]:
    model = TrueModel(r=values["r"], p=values["p"], eta=values["eta"])
    bias = BiasParams(
        beta_pos=values["beta_pos"],
        beta_neg=values["beta_neg"],
        nu=values["nu"],
    )
    return model, bias


def _parse_axis(text: str, steps: int, flag: str) -> AxisSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{flag} must look like name:start:stop, got {text!r}")
    name = _AXIS_ALIASES.get(parts[0], parts[0])
    try:
        start, stop = float(parts[1]), float(parts[2])
    except ValueError:
        raise UsageError(f"{flag} has non-numeric bounds in {text!r}") from None
    return AxisSpec(name, start, stop, steps)


def _write_manifest(out_dir: str, command: str, params: dict, seed: int,
                    outputs: list[str], started: float) -> str:
    path = os.path.join(out_dir, "manifest.json")
    manifest = {
        "command": command,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "duration_seconds": time.perf_counter() - started,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _formats(args: argparse.Namespace, default: tuple[str, ...],
             allowed: tuple[str, ...]) -> tuple[str, ...]:
    chosen = tuple(args.format) if args.format else default
    for fmt in chosen:
        if fmt not in allowed:
            raise UsageError(
                f"--format {fmt} not supported here (choose from {allowed})"
            )
    return chosen


def cmd_region(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    values = _resolve(args, {}, _MODEL_DEFAULTS)
    model, bias = _model_bias(values)
    axis1 = _parse_axis(args.x, args.steps, "--x")
    axis2 = _parse_axis(args.y, args.steps, "--y")
    sweep = recovery_region(model, bias, axis1, axis2)

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for fmt in _formats(args, ("csv", "svg"), ("csv", "svg")):
        path = os.path.join(args.out, f"region.{fmt}")
        if fmt == "csv":
            sweep_to_csv(sweep, path)
        else:
            from .plotting import save_region_svg

            save_region_svg(sweep, path)
        outputs.append(path)
    params = dict(values, x=args.x, y=args.y, steps=args.steps)
    _write_manifest(args.out, "region", params, args.seed, outputs, started)
    print(f"wrote {', '.join(os.path.basename(p) for p in outputs)} to {args.out}")
    return 0


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return raw


_EXPERIMENT_KEYS = dict(
    _MODEL_DEFAULTS,
    intervention="none",
    constraint="none",
    tolerance=None,
    n=None,
    reps=None,
    grid=101,
    recovery_tol=0.02,
    held_out=0,
)


def _build_experiment(values: dict, seed: int) -> ExperimentConfig:
    for field in ("n", "reps"):
        if values[field] is None:
            raise UsageError(f"missing required field --{field}")
    model, bias = _model_bias(values)
    name = values["intervention"]
    if name == "constraint":
        crit = values["constraint"]
        if crit == "none":
            raise UsageError(
                "--intervention constraint needs --constraint eo, eodds, or dp"
            )
        tolerance = values["tolerance"]
        if tolerance is None:
            tolerance = empirical_tolerance(int(values["n"]))
        intervention = Intervention.constrained(
            ConstraintKind(_CRITERIA[crit], float(tolerance))
        )
    elif name == "none":
        intervention = Intervention.none()
    elif name == "reweight-ur":
        intervention = Intervention.reweight_underrep()
    elif name == "reweight-lb":
        intervention = Intervention.reweight_labelbias()
    else:
        raise UsageError(f"unknown intervention {name!r}")
    return ExperimentConfig(
        model=model,
        bias=bias,
        intervention=intervention,
        n_train=int(values["n"]),
        n_reps=int(values["reps"]),
        threshold_grid=int(values["grid"]),
        seed=seed,
        recovery_tol=float(values["recovery_tol"]),
        held_out_n=int(values["held_out"]),
    )


def cmd_experiment(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    file_values = _load_config_file(args.config)
    unknown = set(file_values) - set(_EXPERIMENT_KEYS)
    if unknown:
        raise UsageError(
            f"config file field(s) {sorted(unknown)} not recognized; "
            f"valid fields: {sorted(_EXPERIMENT_KEYS)}"
        )
    values = _resolve(args, file_values, _EXPERIMENT_KEYS)
    config = _build_experiment(values, args.seed)
    result = run_experiment(config)

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for fmt in _formats(args, ("json", "csv"), ("json", "csv")):
        path = os.path.join(args.out, f"experiment.{fmt}")
        with open(path, "w") as fh:
            if fmt == "json":
                json.dump(result_to_dict(result), fh, indent=2)
                fh.write("\n")
            else:
                fh.write(result_to_csv(result))
        outputs.append(path)
    _write_manifest(args.out, "experiment", values, args.seed, outputs, started)
    print(
        f"recovery rate {result.recovery_rate:.3f} over {config.n_reps} reps "
        f"(mean true error {result.mean_true_error:.6f}, "
        f"{result.n_infeasible} infeasible)"
    )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    names = tuple(args.suite) if args.suite else None
    results = run_all(names, trials=args.trials, seed=args.seed)
    for result in results:
        print(result.summary())
        for failure in result.failures:
            print(f"  counterexample: {failure}")
    all_passed = all(r.passed for r in results)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "verify.json")
        with open(path, "w") as fh:
            json.dump(
                [
                    {
                        "suite": r.name,
                        "passed": r.passed,
                        "checks": r.checks,
                        "failures": r.failures,
                    }
                    for r in results
                ],
                fh,
                indent=2,
            )
            fh.write("\n")
        params = {"suites": list(names or SUITE_NAMES), "trials": args.trials}
        _write_manifest(args.out, "verify", params, args.seed, [path], started)
    return 0 if all_passed else 1


def _table_cells_from_file(path: str, n: int, reps: int, seed: int) -> list[TableCell]:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise UsageError(f"table config {path} must hold a JSON array of cells")
    cells = []
    for k, entry in enumerate(raw):
        values = dict(_EXPERIMENT_KEYS)
        values.update({"n": n, "reps": reps})
        values.update({key: entry[key] for key in entry if key in values})
        unknown = set(entry) - set(values) - {"row", "column"}
        if unknown:
            raise UsageError(f"table config cell {k}: unknown field(s) {sorted(unknown)}")
        config = _build_experiment(values, seed + k)
        cells.append(
            TableCell(
                row=str(entry.get("row", values["intervention"])),
                column=str(entry.get("column", f"cell{k}")),
                config=config,
            )
        )
    return cells


def cmd_table(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    n = args.n if args.n is not None else 50_000
    reps = args.reps if args.reps is not None else 20
    if args.config:
        cells = _table_cells_from_file(args.config, n, reps, args.seed)
    else:
        cells = default_table_cells(n_train=n, n_reps=reps, seed=args.seed)
    table = intervention_table(cells, analytic_only=args.analytic_only)

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for fmt in _formats(args, ("csv", "md"), ("csv", "md")):
        path = os.path.join(args.out, f"table.{fmt}")
        with open(path, "w") as fh:
            fh.write(table_to_csv(table) if fmt == "csv" else table_to_markdown(table))
        outputs.append(path)
    params = {"n": n, "reps": reps, "analytic_only": args.analytic_only,
              "config": args.config}
    _write_manifest(args.out, "table", params, args.seed, outputs, started)
    print(table_to_markdown(table), end="")

    bad = table.disagreements()
    if bad:
        for cell in bad:
            print(
                f"analytic/empirical disagreement at ({cell.row}, {cell.column}): "
                f"{cell.analytic} vs {cell.empirical} "
                f"(margin {cell.analytic_margin!r}, rate {cell.empirical_rate!r})",
                file=sys.stderr,
            )
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biased-erm-lab",
        description="analytic and sampled recovery experiments for fairness-"
        "constrained learning from biased data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    region = commands.add_parser("region", help="sweep two parameters")
    _add_model_flags(region)
    region.add_argument("--x", required=True, help="first axis, name:start:stop")
    region.add_argument("--y", required=True, help="second axis, name:start:stop")
    region.add_argument("--steps", type=int, default=100, help="cells per axis")
    region.add_argument("--seed", type=int, default=0)
    region.add_argument("--out", default=".", help="output directory")
    region.add_argument("--format", action="append", choices=("csv", "svg"))
    region.set_defaults(func=cmd_region)

    experiment = commands.add_parser("experiment", help="finite-sample runs")
    _add_model_flags(experiment)
    experiment.add_argument("--config", default=None, help="JSON config file")
    experiment.add_argument("--intervention", default=None,
                            choices=("none", "constraint", "reweight-ur", "reweight-lb"))
    experiment.add_argument("--constraint", default=None,
                            choices=("eo", "eodds", "dp", "none"))
    experiment.add_argument("--tolerance", type=float, default=None,
                            help="constraint tolerance (default scales with n)")
    experiment.add_argument("--n", type=int, default=None, help="sample size per rep")
    experiment.add_argument("--reps", type=int, default=None, help="repetitions")
    experiment.add_argument("--grid", type=int, default=None,
                            help="threshold grid points per group")
    experiment.add_argument("--recovery-tol", dest="recovery_tol", type=float,
                            default=None)
    experiment.add_argument("--held-out", dest="held_out", type=int, default=None,
                            help="held-out sample size for sanity scoring")
    experiment.add_argument("--seed", type=int, default=0)
    experiment.add_argument("--out", default=".", help="output directory")
    experiment.add_argument("--format", action="append", choices=("json", "csv"))
    experiment.set_defaults(func=cmd_experiment)

    verify = commands.add_parser("verify", help="run verification suites")
    verify.add_argument("--suite", action="append", choices=SUITE_NAMES,
                        help="run one suite (repeatable); default all")
    verify.add_argument("--trials", type=int, default=None,
                        help="override randomized trial count")
    verify.add_argument("--seed", type=int, default=20240819)
    verify.add_argument("--out", default=None, help="optional output directory")
    verify.set_defaults(func=cmd_verify)

    table = commands.add_parser("table", help="intervention recovery matrix")
    table.add_argument("--config", default=None, help="JSON list of custom cells")
    table.add_argument("--n", type=int, default=None, help="sample size per rep")
    table.add_argument("--reps", type=int, default=None, help="repetitions per cell")
    table.add_argument("--analytic-only", action="store_true",
                       help="skip the Monte Carlo column")
    table.add_argument("--seed", type=int, default=20240)
    table.add_argument("--out", default=".", help="output directory")
    table.add_argument("--format", action="append", choices=("csv", "md"))
    table.set_defaults(func=cmd_table)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except (UsageError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
