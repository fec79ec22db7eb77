"""Command-line front end.

Subcommands: gen-data, train, eval, scenario-sweep, check-gradients, plot.
Exit codes: 0 success, 1 configuration error, 2 runtime error. Environment
variables FEDVLP_SEED and FEDVLP_OUTPUT_DIR override the seed and output
directory only.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import experiment
from .config import ConfigError, load_config, save_config
from .nn.gradcheck import check_gradients


def _add_common(parser, needs_out=True):
    parser.add_argument("--config", "-c", default=None,
                        help="YAML config file (defaults used when omitted)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the global seed")
    if needs_out:
        parser.add_argument("--out", "-o", default=None,
                            help="output directory")
        parser.add_argument("--force", action="store_true",
                            help="allow writing into a non-empty directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedvlp",
        description="Simulate cooperative visible-light positioning: synthesize "
                    "fingerprints from the optical channel, train position "
                    "regressors federatively, and evaluate under nonstationary "
                    "environments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate per-UE fingerprint datasets")
    _add_common(p)

    p = sub.add_parser("train", help="run the federated training loop")
    _add_common(p)
    p.add_argument("--rounds", type=int, default=None,
                   help="override federation.rounds")
    p.add_argument("--workers", type=int, default=None,
                   help="override federation.workers (results are identical "
                        "for any value)")
    p.add_argument("--scenario", default=None,
                   choices=["stationary", "ambient", "blackout", "aging"],
                   help="override the scenario")
    p.add_argument("--model", default=None, choices=["cvposnet", "mlp"],
                   help="override model.type")
    p.add_argument("--resume", default=None, metavar="CHECKPOINT",
                   help="continue from a checkpoint (same config and seed)")
    p.add_argument("--quiet", action="store_true",
                   help="suppress per-round progress lines")

    p = sub.add_parser("eval", help="evaluate a stored checkpoint")
    _add_common(p)
    p.add_argument("checkpoint", help="path to a .wts checkpoint")
    p.add_argument("--round", type=int, default=None,
                   help="environment round to evaluate under "
                        "(default: the checkpoint's round)")

    p = sub.add_parser("scenario-sweep",
                       help="compare adaptive vs frozen arms under every "
                            "nonstationary scenario")
    _add_common(p)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--pretrained", default=None, metavar="CHECKPOINT",
                   help="reuse an existing pre-trained checkpoint")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("check-gradients",
                       help="verify analytic gradients against finite "
                            "differences")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--instances", type=int, default=3)

    p = sub.add_parser("plot", help="render SVG charts from run CSVs")
    p.add_argument("csv", help="rounds.csv, cdf.csv, or comparison.csv")
    p.add_argument("--out", "-o", default=None, help="output SVG path")

    return parser


_SCENARIO_ALIASES = {
    "stationary": "stationary",
    "ambient": "ambient_drift",
    "blackout": "led_blackout",
    "aging": "device_aging",
}


def _resolve_config(args) -> dict:
    overrides: dict = {}
    env_seed = os.environ.get("FEDVLP_SEED")
    if env_seed is not None:
        try:
            overrides["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"FEDVLP_SEED must be an integer, got {env_seed!r}")
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        overrides.setdefault("federation", {})["rounds"] = args.rounds
    if getattr(args, "workers", None) is not None:
        overrides.setdefault("federation", {})["workers"] = args.workers
    if getattr(args, "scenario", None) is not None:
        overrides.setdefault("scenario", {})["kinds"] = \
            [_SCENARIO_ALIASES[args.scenario]]
    if getattr(args, "model", None) is not None:
        overrides.setdefault("model", {})["type"] = args.model
    return load_config(args.config, overrides)


def _resolve_out_dir(args, default_name: str) -> Path:
    out = getattr(args, "out", None) or os.environ.get("FEDVLP_OUTPUT_DIR")
    if out is None:
        out = f"runs/{default_name}"
    out_dir = Path(out)
    if out_dir.exists() and any(out_dir.iterdir()) and not args.force:
        raise ConfigError(
            f"output directory {out_dir} is not empty (pass --force to reuse)")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _echo_config(cfg: dict, out_dir: Path) -> None:
    save_config(cfg, out_dir / "config.yaml")


def cmd_gen_data(args) -> int:
    cfg = _resolve_config(args)
    out_dir = _resolve_out_dir(args, "dataset")
    _echo_config(cfg, out_dir)
    datasets = experiment.generate_datasets(cfg, out_dir)
    total = sum(len(ds) for ds in datasets)
    print(f"wrote {len(datasets)} UE datasets ({total} samples) to {out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out_dir = _resolve_out_dir(args, "train")
    _echo_config(cfg, out_dir)

    progress = None
    if not args.quiet:
        def progress(entry):
            rep = entry.eval
            mean = f"{rep.mean_m:.4f} m" if rep is not None else "n/a"
            print(f"round {entry.t:4d}  mean_err={mean}  "
                  f"loss={entry.train_loss:.6f}", flush=True)

    init_weights = None
    start_round = 0
    if args.resume is not None:
        from .nn.weights import load_weights
        from .sensing import read_manifest
        init_weights = load_weights(args.resume)
        sidecar = Path(args.resume).with_suffix(".json")
        if not sidecar.exists():
            raise ConfigError(f"checkpoint sidecar {sidecar} not found")
        start_round = int(read_manifest(sidecar)["round"])
        print(f"resuming after round {start_round}")

    setup, log = experiment.run_training(
        cfg, out_dir, workers=getattr(args, "workers", None),
        init_weights=init_weights, start_round=start_round, progress=progress)
    final = log[-1]
    if final.eval is not None:
        print(f"final round {final.t}: mean={final.eval.mean_m:.4f} m  "
              f"median={final.eval.median_m:.4f} m  "
              f"p95={final.eval.p95_m:.4f} m")
    print(f"artifacts in {out_dir}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    out_dir = _resolve_out_dir(args, "eval")
    _echo_config(cfg, out_dir)
    report = experiment.evaluate_checkpoint(cfg, args.checkpoint, out_dir,
                                            round_index=args.round)
    print(f"round {report.round}: mean={report.mean_m:.4f} m  "
          f"median={report.median_m:.4f} m  p95={report.p95_m:.4f} m")
    print(f"artifacts in {out_dir}")
    return 0


def cmd_scenario_sweep(args) -> int:
    cfg = _resolve_config(args)
    out_dir = _resolve_out_dir(args, "sweep")
    _echo_config(cfg, out_dir)
    progress = None
    if not args.quiet:
        def progress(entry):
            print(f"  round {entry.t:4d}  done", flush=True)
    results = experiment.run_scenario_sweep(
        cfg, out_dir, pretrained_path=args.pretrained,
        workers=getattr(args, "workers", None), progress=progress)
    for kind, arms in results.items():
        adaptive = arms["adaptive"][-1].mean_m
        frozen = arms["frozen"][-1].mean_m
        print(f"{kind:14s} final mean error: adaptive={adaptive:.4f} m  "
              f"frozen={frozen:.4f} m")
    print(f"artifacts in {out_dir}")
    return 0


def cmd_check_gradients(args) -> int:
    report = check_gradients(tolerance=args.tolerance, seed=args.seed,
                             instances=args.instances)
    print(report.summary())
    if report.all_passed:
        print("all gradient checks passed")
        return 0
    print("gradient check FAILED", file=sys.stderr)
    return 2


def cmd_plot(args) -> int:
    from . import plotting
    out = args.out or str(Path(args.csv).with_suffix(".svg"))
    plotting.plot_csv(args.csv, out)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "scenario-sweep": cmd_scenario_sweep,
    "check-gradients": cmd_check_gradients,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: stable exit code for scripts
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
