"""Command-line front end.

Subcommands: ``critical``, ``truedisp``, ``simulate``, ``analyze``,
``experiment`` and ``replay``. Every command that writes files drops a
``manifest.json`` in its output directory; ``replay`` re-runs from it.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure,
3 every member of some experiment cell failed.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .dispersion import (
    LinearRDModel,
    classify,
    default_kgrid,
    dispersion_curve,
    dominant_mode,
    make_kgrid,
)
from .estimator import (
    TIME_STENCILS,
    WindowPlan,
    analyze_window,
    fluctuations,
    split_windows,
)
from .experiments import (
    EXPERIMENTS,
    default_workers,
    experiment_grid,
    run_ensemble,
    summarize,
)
from .io import (
    ConfigError,
    DatasetError,
    load_sim_config,
    mode_document,
    read_dataset,
    sim_config_document,
    write_curve_csv,
    write_dataset,
    write_experiment_cell,
    write_json,
)
from .model import (
    ModelParams,
    critical_wavenumber,
    jacobian,
    saddle_node_p,
    stable_state,
    turing_p,
    vegetated_states,
)
from .sim import simulate, subsample
from .stats import format_mean_std

log = logging.getLogger("spatial_ews")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_ALL_FAILED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _manifest(args: argparse.Namespace, out: Path, outputs, **extra) -> Path:
    resolved = {k: v for k, v in vars(args).items() if k not in ("func",)}
    resolved["out"] = str(out)
    doc = {
        "subcommand": args.command,
        "version": __version__,
        "arguments": resolved,
        "outputs": sorted(str(Path(p).relative_to(out)) for p in outputs),
        **extra,
    }
    return write_json(out / "manifest.json", doc)


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args) -> ModelParams:
    try:
        return ModelParams(p=getattr(args, "p", 0.0), m=args.m, h=args.h, delta=args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands ---------------------------------------------------------------

def cmd_critical(args) -> int:
    params = _params(args)
    p_sn = saddle_node_p(params.m, params.h)
    p_t = turing_p(params.m, params.h, params.delta)
    k_c = None
    if p_t is not None:
        at = params.with_p(p_t)
        k_c = critical_wavenumber(jacobian(at, stable_state(at)), params.delta)
    first = "turing" if p_t is not None and p_t > p_sn else "saddle-node"
    rows = [("p_SN", p_sn), ("p_T", p_t), ("k_c", k_c), ("first", first)]
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for name, val in rows:
            w.writerow([name, "none" if val is None else
                        (val if isinstance(val, str) else "%.17g" % val)])
    else:
        for name, val in rows:
            text = "none" if val is None else (val if isinstance(val, str) else f"{val:.6g}")
            print(f"{name}={text}")
    return EXIT_OK


def cmd_truedisp(args) -> int:
    params = _params(args)
    states = vegetated_states(params)
    if states is None:
        raise UsageError(
            f"no vegetated state for p={params.p}: requires "
            f"p >= p_SN={saddle_node_p(params.m, params.h):.6g}")
    jac = jacobian(params, states[1])
    model = LinearRDModel.from_jacobian(jac, params.delta)
    if args.kmax is None:
        kgrid = default_kgrid(k_c=critical_wavenumber(jac, params.delta), num=args.knum)
    else:
        kgrid = make_kgrid(args.kmax, args.knum)
    curve = dispersion_curve(model, kgrid)
    mode = dominant_mode(curve, refine=True)
    doc = mode_document(mode, args.k_threshold)
    doc["params"] = {"p": params.p, "m": params.m, "h": params.h, "delta": params.delta}
    doc["state"] = {"u": states[1].u, "v": states[1].v}
    doc["jacobian"] = {"a": jac.a, "b": jac.b, "c": jac.c, "d": jac.d}
    print(f"k_star={mode.k_star:.6g} lambda_star={mode.lambda_star:.6g} "
          f"class={doc['classification']}")
    if args.out:
        out = _outdir(args.out)
        files = [write_curve_csv(out / "curve.csv", curve), write_json(out / "mode.json", doc)]
        _manifest(args, out, files)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = load_sim_config(args.config, seed=args.seed, t_end=args.t_end)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    out = _outdir(args.out)
    data = simulate(cfg)
    files = write_dataset(data, out / "data.csv")
    _manifest(args, out, files, config=sim_config_document(cfg))
    log.info("wrote %d frames x %d nodes to %s", data.times.size, data.xs.size, out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        data = read_dataset(args.dataset)
    except DatasetError as exc:
        raise UsageError(str(exc)) from exc
    data = subsample(data, args.time_keep, args.space_keep)
    Z = fluctuations(data)
    if args.window_span is None:
        plan = WindowPlan()
    else:
        plan = WindowPlan.from_span(args.window_span, data.dt_record, args.window_stride)
    try:
        windows = split_windows(Z, plan)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    kgrid = default_kgrid(dx=data.dx_effective, num=args.knum)

    out = _outdir(args.out)
    rows, curves = [], []
    for i, sl in enumerate(windows):
        fit, curve, mode = analyze_window(Z[:, sl], data.dt_record, data.dx_effective,
                                          kgrid, args.stencil)
        A, D = fit.model.A, fit.model.D
        row = {
            "window": i,
            "t_start": float(data.times[sl.start]),
            "t_end": float(data.times[sl.stop - 1]),
            "a": A[0, 0], "b": A[0, 1], "c": A[1, 0], "d": A[1, 1],
            "D_u": D[0], "delta": D[1],
            "k_star": mode.k_star, "lambda_star": mode.lambda_star,
            "classification": classify(mode, args.k_threshold).value,
            "negative_diffusion": fit.negative_diffusion,
            "residual_rms_u": fit.residual_rms[0], "residual_rms_v": fit.residual_rms[1],
            "condition": fit.condition_max,
            "n_samples": fit.n_samples,
        }
        rows.append(row)
        curves.append(curve)
    with (out / "windows.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("%.17g" % v if isinstance(v, float) else v)
                        for k, v in row.items()})
    files = [out / "windows.csv"]
    for i, curve in enumerate(curves):
        files.append(write_curve_csv(out / f"curve_{i:03d}.csv", curve))
    summary = {
        "dataset": str(args.dataset),
        "dt_record": data.dt_record,
        "dx_effective": data.dx_effective,
        "n_windows": len(rows),
        "windows": rows,
    }
    files.append(write_json(out / "summary.json", summary))
    _manifest(args, out, files, dt_record=data.dt_record, dx_effective=data.dx_effective)
    for row in rows:
        print(f"window {row['window']}: k_star={row['k_star']:.4g} "
              f"lambda_star={row['lambda_star']:.4g} {row['classification']}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.members < 1:
        raise UsageError("--members must be >= 1")
    settings = experiment_grid(args.name, delta=args.delta)
    seeds = list(range(args.seed_offset, args.seed_offset + args.members))
    out = _outdir(args.out)
    files, index = [], []
    all_failed = False
    theta_rows = []
    for setting in settings:
        log.info("running %s (%d members)", setting.label, len(seeds))
        result = run_ensemble(setting, seeds, workers=args.workers)
        cell_dir = out / setting.label
        if not result.successful:
            all_failed = True
            cell_dir.mkdir(parents=True, exist_ok=True)
            files.append(write_json(cell_dir / "stats.json", {
                "setting": setting.label, "cell": setting.cell,
                "n_members": len(result.members), "n_failed": result.n_failed,
                "failures": {str(m.seed): m.error for m in result.members}}))
            index.append({"cell": setting.label, "n_failed": result.n_failed})
            continue
        summary = summarize(result, k_threshold=args.k_threshold)
        write_experiment_cell(cell_dir, result, summary)
        files += [cell_dir / f for f in ("scatter.csv", "curves.csv", "stats.json")]
        index.append({"cell": setting.label, "parameters": setting.cell,
                      "n_failed": result.n_failed,
                      "delta_k_star": summary.delta_k, "delta_lambda_star": summary.delta_lambda})
        theta_rows.append([setting.label] + [
            format_mean_std(summary.theta_mean[k], summary.theta_std[k])
            for k in ("a", "b", "c", "d", "delta")])
    with (out / "theta_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "a", "b", "c", "d", "delta"])
        w.writerows(theta_rows)
    files.append(out / "theta_table.csv")
    files.append(write_json(out / "index.json", {"experiment": args.name, "seeds": seeds,
                                                 "cells": index}))
    _manifest(args, out, files, seeds=seeds)
    return EXIT_ALL_FAILED if all_failed else EXIT_OK


def cmd_replay(args) -> int:
    doc = json.loads(Path(args.manifest).read_text())
    argv = _argv_from_manifest(doc, args.out)
    log.info("replaying: %s", " ".join(argv))
    return main(argv)


def _argv_from_manifest(doc: dict, out: str | None) -> list[str]:
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices[doc["subcommand"]]
    arguments = dict(doc["arguments"])
    if out is not None:
        arguments["out"] = out
    argv = [doc["subcommand"]]
    for action in sub._actions:
        if action.dest in ("help",) or action.dest not in arguments:
            continue
        value = arguments[action.dest]
        if not action.option_strings:
            argv.append(str(value))
        elif value is None:
            continue
        elif isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(action.option_strings[0])
        else:
            argv += [action.option_strings[0], repr(value) if isinstance(value, float)
                     else str(value)]
    return argv


# -- parser --------------------------------------------------------------------

def _model_args(p, with_p: bool):
    if with_p:
        p.add_argument("--p", type=float, required=True, help="rainfall")
    p.add_argument("--m", type=float, default=0.5, help="mortality (default 0.5)")
    p.add_argument("--h", type=float, default=0.1, help="carrying-capacity parameter")
    p.add_argument("--delta", type=float, default=0.01, help="diffusion ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spatial-ews", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("critical", help="saddle-node and Turing thresholds")
    _model_args(p, with_p=False)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_critical)

    p = subs.add_parser("truedisp", help="true dispersion relation of the vegetated state")
    _model_args(p, with_p=True)
    p.add_argument("--kmax", type=float, default=None)
    p.add_argument("--knum", type=int, default=513)
    p.add_argument("--k-threshold", type=float, default=0.2)
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_truedisp)

    p = subs.add_parser("simulate", help="one stochastic simulation to a dataset file")
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--t-end", type=float, default=None, help="overrides time.t_end")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("analyze", help="fit windows of a dataset and report (k*, lambda*)")
    p.add_argument("--dataset", required=True, help="dataset CSV or its directory")
    p.add_argument("--time-keep", type=float, default=1.0)
    p.add_argument("--space-keep", type=float, default=1.0)
    p.add_argument("--window-span", type=float, default=None,
                   help="window length in time units (default: whole dataset)")
    p.add_argument("--window-stride", type=float, default=None,
                   help="hop between windows in time units (default: span)")
    p.add_argument("--stencil", choices=TIME_STENCILS, default="forward")
    p.add_argument("--knum", type=int, default=513)
    p.add_argument("--k-threshold", type=float, default=0.2)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("experiment", help="run an experiment grid as seeded ensembles")
    p.add_argument("--name", required=True, choices=EXPERIMENTS)
    p.add_argument("--members", type=int, default=100)
    p.add_argument("--seed-offset", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.01,
                   help="diffusion ratio for exp1-exp3 (0.01 Turing, 0.5 saddle-node)")
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--k-threshold", type=float, default=0.2)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)

    p = subs.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="write to this directory instead")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spatial-ews {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level reporting
        log.debug("failure", exc_info=True)
        print(f"spatial-ews {args.command}: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
