"""Command-line entry point: ``crnshare <subcommand> ...``.

Exit codes: 0 success, 1 validation failure, 2 infeasible configuration,
3 bad input.
"""

import argparse
import json
import sys

from .ergodic import VARIANTS, train_offline
from .frame_solver import SolverOptions, solve_frame, solve_relay_free, solve_sensing_free
from .harness import presets
from .harness.experiments import KINDS, ExperimentSpec, run_experiment
from .harness.validate import validate
from .netmodel import FadingParams, Nsi, SystemConfig

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_BAD_INPUT = 0, 1, 2, 3

FRAME_SOLVERS = {"proposed": solve_frame, "relay-free": solve_relay_free, "sensing-free": solve_sensing_free}


class BadInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _load(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadInput(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise BadInput(f"{path} must hold a JSON object")
    return doc


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _config(doc, default):
    return SystemConfig.from_dict(doc["config"]) if "config" in doc else default


def cmd_solve_frame(args):
    doc = _load(args.config)
    cfg = _config(doc, presets.fig4_config())
    nsi = Nsi.from_dict(doc["nsi"]) if "nsi" in doc else presets.fig4_nsi()
    opts = SolverOptions.from_dict(doc.get("options", {}))
    strategy = doc.get("strategy", "proposed")
    if strategy not in FRAME_SOLVERS:
        raise BadInput(f"strategy must be one of {sorted(FRAME_SOLVERS)}")
    rep = FRAME_SOLVERS[strategy](nsi.check(cfg), cfg, opts)
    _emit(rep.to_json(indent=1), args.out)
    return EXIT_INFEASIBLE if rep.status == "Infeasible" else EXIT_OK


def cmd_train(args):
    doc = _load(args.config)
    cfg = _config(doc, presets.fig6_config())
    variant = doc.get("variant", "two-sensing")
    if variant not in VARIANTS:
        raise BadInput(f"variant must be one of {sorted(VARIANTS)}")
    policy = train_offline(
        cfg, args.seed, int(doc.get("n_train", 2000)), SolverOptions.from_dict(doc.get("options", {})),
        variant=variant, fading=FadingParams(**doc.get("fading", {})),
    )
    _emit(policy.to_json(indent=1), args.out)
    return EXIT_INFEASIBLE if policy.status == "Infeasible" else EXIT_OK


def cmd_run(args):
    doc = _load(args.config)
    doc["kind"] = args.experiment
    doc["seed"] = args.seed
    if args.frames is not None:
        doc["frames"] = args.frames
    spec = ExperimentSpec.from_dict(doc)
    res = run_experiment(spec)
    _emit(res.to_csv() if args.format == "csv" else res.to_json(), args.out)
    return EXIT_OK


def cmd_validate(args):
    report = validate(args.seed, quick=args.quick)
    if args.out:
        _emit(json.dumps(report.to_dict(), indent=1), args.out)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def template(kind):
    """Starter JSON for ``run --experiment kind`` (or for solve-frame / train)."""
    if kind == "solve-frame":
        return {"config": presets.fig4_config().to_dict(), "nsi": presets.fig4_nsi().to_dict(),
                "strategy": "proposed", "options": {"step_rule": "ellipsoid", "max_iter": 5000, "tol": 1e-10}}
    if kind == "train":
        return {"config": presets.fig6_config().to_dict(), "variant": "two-sensing", "n_train": 2000,
                "fading": {"snr_sd_db": 5.0, "snr_relay_db": 17.0}}
    spec = ExperimentSpec(kind)
    base = presets.fig4_config() if kind == "frame" else presets.fig6_config()
    doc = {"grid": list(spec.grid), "strategies": list(spec.strategies), "config": base.to_dict()}
    if kind != "frame":
        doc.update(frames=spec.frames, n_train=spec.n_train, fading={"snr_sd_db": 5.0, "snr_relay_db": 17.0})
    if spec.levels:
        doc["levels"] = list(spec.levels)
    return doc


def cmd_template(args):
    _emit(json.dumps(template(args.experiment), indent=1), args.out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="crnshare", description="Spectrum sharing for a relay network next to ad-hoc traffic.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON input document")
        sp.add_argument("--seed", type=int, default=0, help="master seed (non-negative)")
        sp.add_argument("--out", help="output path (default: stdout)")

    sp = sub.add_parser("solve-frame", help="solve one frame")
    common(sp)
    sp.set_defaults(func=cmd_solve_frame)

    sp = sub.add_parser("train", help="train ergodic multipliers off-line")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("run", help="run a sweep experiment")
    common(sp)
    sp.add_argument("--experiment", choices=KINDS, required=True)
    sp.add_argument("--frames", type=int)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("validate", help="check closed forms and solvers against oracles")
    common(sp, config=False)
    sp.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("emit-config-template", help="print a starter JSON input")
    sp.add_argument("--experiment", choices=KINDS + ("solve-frame", "train"), default="ergodic")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_template)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", 0) < 0:
        print("crnshare: error: --seed must be non-negative", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        return args.func(args)
    except (BadInput, ValueError, KeyError, TypeError) as exc:
        print(f"crnshare: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
