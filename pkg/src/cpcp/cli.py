"""Command line front end.

Subcommands: generate, solve, certify, phase-grid, validate-lemmas. Every
subcommand accepts --config <path> (flat key = value file), --seed <u64>,
--out <dir>, --threads <n>, and repeated --set key=value overrides. Exit
codes: 0 success, 1 I/O or configuration error, 2 premise or validation
failure.
"""

import argparse
import os
import sys

import numpy as np

from . import formats
from .certificate import PremiseViolation, build_schedule, certify_instance
from .experiments import (
    ExperimentConfig,
    GridCellResult,
    config_from_mapping,
    parse_config,
    relative_error,
    run_phase_grid,
    trial_seed,
    validate_lemmas,
    write_grid_csv,
    write_resolved_config,
)
from .generate import GenParams, assemble, load_bundle, save_bundle
from .solver import solve_cpcp

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; our contract reserves 2 for
    # premise/validation failures, so remap usage errors to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _load_config(args):
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    flat = cfg.to_flat()
    for kv in args.set or []:
        if "=" not in kv:
            raise ValueError(f"--set expects KEY=VALUE, got {kv!r}")
        key, _, value = kv.partition("=")
        flat[key.strip()] = value.strip()
    if args.seed is not None:
        flat["seed"] = str(args.seed)
    return config_from_mapping(flat)


def _ensure_out(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_generate(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    write_resolved_config(os.path.join(out, "resolved_config.txt"), cfg)
    bundles = []
    for cell_index, cell in enumerate(cfg.cells()):
        for trial in range(cfg.trials):
            seed = trial_seed(cfg.seed, cell_index, trial)
            params = GenParams(
                m=cell["m"], n=cell["n"], r=cell["r"], rho=cell["rho"], p=cell["p"],
                magnitude=cfg.magnitude, qmodel=cfg.qmodel,
            )
            inst = assemble(params, seed)
            name = f"bundle_c{cell_index:03d}_t{trial:02d}"
            path = os.path.join(out, name)
            save_bundle(inst, path)
            bundles.append(name)
    formats.write_json(
        os.path.join(out, "manifest.json"),
        {"count": len(bundles), "bundles": bundles},
    )
    print(f"wrote {len(bundles)} bundle(s) under {out}")
    return EXIT_OK


def cmd_solve(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    inst = load_bundle(args.bundle)
    opts = cfg.solver_options(record_trace=args.trace_csv is not None)
    result = solve_cpcp(inst.D, inst.qperp, opts)
    payload = {
        "bundle": args.bundle,
        "pcp_path": len(inst.qperp) == 0,
        "status": result.status,
        "iters": result.iters,
        "lam": result.lam,
        "objective": result.objective,
        "primal_residual": result.primal_residual,
        "rel_err_L": relative_error(result.L_hat, inst.L0),
        "rel_err_S": relative_error(result.S_hat, inst.S0),
    }
    formats.write_json(os.path.join(out, "solve_result.json"), payload)
    if args.trace_csv:
        with open(args.trace_csv, "w", encoding="ascii") as f:
            f.write("iter,primal_residual,objective\n")
            for it, res, obj in result.trace:
                f.write(f"{it},{res:.17g},{obj:.17g}\n")
    print(formats.dumps_json(payload))
    return EXIT_OK


def cmd_certify(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    inst = load_bundle(args.bundle)
    try:
        if inst.params.rho <= 0.0 or inst.omega.count == 0:
            # degenerate support: certify against an empty schedule support
            report, schedule, trace = _certify_degenerate(inst, cfg)
        else:
            report, schedule, trace = certify_instance(
                inst, lam=cfg.lam, mode=args.mode, seed=cfg.seed
            )
    except PremiseViolation as exc:
        payload = {
            "bundle": args.bundle,
            "error": "premise_violation",
            "description": exc.description,
            "measured": exc.measured,
            "limit": exc.limit,
        }
        formats.write_json(os.path.join(out, "certificate.json"), payload)
        print(formats.dumps_json(payload), file=sys.stderr)
        return EXIT_VALIDATION
    payload = report.to_dict()
    payload.update(
        {
            "bundle": args.bundle,
            "schedule": {"j0": schedule.j0, "q": schedule.q, "mode": schedule.mode},
            "golfing_trace": [{"fro": a, "inf": b} for a, b in trace],
        }
    )
    formats.write_json(os.path.join(out, "certificate.json"), payload)
    print(formats.dumps_json(payload))
    return EXIT_OK if report.verdict else EXIT_VALIDATION


def _certify_degenerate(inst, cfg):
    from .certificate import construct_WL, construct_WQ, construct_WS, verify
    from .subspaces import SupportSet

    lam = cfg.lam if cfg.lam is not None else 1.0 / np.sqrt(inst.params.m)
    omega = SupportSet.empty(*inst.omega.shape)
    schedule = build_schedule(omega, 1e-9, inst.params.m, cfg.seed, mode="retrofit")
    wl, trace = construct_WL(inst.tangent, omega, schedule, inst.qperp)
    ws = construct_WS(np.zeros(omega.shape), omega, inst.tangent, inst.qperp, lam)
    wq = construct_WQ(inst.tangent, omega, inst.qperp)
    report = verify(wl, ws, wq, inst.tangent, omega, np.zeros(omega.shape), inst.qperp, lam)
    return report, schedule, trace


def cmd_phase_grid(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    write_resolved_config(os.path.join(out, "resolved_config.txt"), cfg)
    results = run_phase_grid(cfg, threads=args.threads)
    path = os.path.join(out, "grid.csv")
    write_grid_csv(path, results)
    print(f"wrote {path} with {len(results)} cell(s)")
    return EXIT_OK


def cmd_validate_lemmas(args):
    cfg = _load_config(args)
    out = _ensure_out(args)
    write_resolved_config(os.path.join(out, "resolved_config.txt"), cfg)
    report = validate_lemmas(cfg, threads=args.threads)
    path = os.path.join(out, "lemmas.json")
    formats.write_json(path, report)
    for name, entry in report["lemmas"].items():
        print(f"{name}: {'pass' if entry['verdict'] else 'FAIL'}")
    return EXIT_OK if report["verdict"] else EXIT_VALIDATION


def _add_common(sub):
    sub.add_argument("--config", help="flat key = value configuration file")
    sub.add_argument("--seed", type=int, default=None, help="base seed override")
    sub.add_argument("--out", help="output directory (default: current)")
    sub.add_argument("--threads", type=int, default=None, help="worker pool size")
    sub.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def build_parser():
    parser = _Parser(prog="cpcp", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("generate", help="write instance bundles for a grid")
    _add_common(sub)
    sub.set_defaults(func=cmd_generate)

    sub = subs.add_parser("solve", help="solve one instance bundle")
    _add_common(sub)
    sub.add_argument("bundle", help="bundle directory")
    sub.add_argument("--trace-csv", help="write iter,primal_residual,objective")
    sub.set_defaults(func=cmd_solve)

    sub = subs.add_parser("certify", help="build and verify a dual certificate")
    _add_common(sub)
    sub.add_argument("bundle", help="bundle directory")
    sub.add_argument(
        "--mode", choices=("retrofit", "cogenerate"), default="retrofit",
        help="schedule coupling for the golfing batches",
    )
    sub.set_defaults(func=cmd_certify)

    sub = subs.add_parser("phase-grid", help="run a recovery grid, write CSV")
    _add_common(sub)
    sub.set_defaults(func=cmd_phase_grid)

    sub = subs.add_parser("validate-lemmas", help="empirical lemma checks")
    _add_common(sub)
    sub.set_defaults(func=cmd_validate_lemmas)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
