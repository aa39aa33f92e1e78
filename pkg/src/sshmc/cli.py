"""Command line entry point: ``sshmc {run,ess,gen-data,gradcheck}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from sshmc.config import parse_config
from sshmc.diagnostics import ess
from sshmc.errors import ConfigError, DegenerateVarianceError
from sshmc.gradcheck import gradcheck
from sshmc.harness import (
    build_model,
    data_csv,
    generate_data,
    read_embedded_config,
    read_trace,
    run_experiment,
    write_outputs,
)

def _load_config(args):
    path = Path(args.config)
    text = path.read_text(encoding="utf-8")
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"experiment.seed={args.seed}")
    if text.lstrip().startswith("#"):
        # an output file: rerun from its embedded config
        base = read_embedded_config(path)
        return base.with_overrides(overrides) if overrides else base
    return parse_config(text, overrides=overrides)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    _, summary = run_experiment(cfg, args.out)
    diag = summary["diagnostics"]
    print(
        f"{cfg.model}/{cfg.sampler_kind}: acceptance {diag['acceptance_rate']:.3f}, "
        f"min ESS {diag['ess_min']:.1f}, gradients {diag['gradient_evaluations']}, "
        f"outputs in {args.out}"
    )
    return 0


def cmd_ess(args) -> int:
    names, samples, accepted = read_trace(args.trace)
    values = {}
    for j, name in enumerate(names):
        try:
            values[name] = ess(samples[:, j])
        except DegenerateVarianceError:
            values[name] = None
    finite = [v for v in values.values() if v is not None]
    report = {
        "ess": values,
        "ess_min": min(finite) if finite else None,
        "ess_median": float(np.median(finite)) if finite else None,
        "ess_max": max(finite) if finite else None,
        "acceptance_rate": float(np.mean(accepted)),
        "retained": int(samples.shape[0]),
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        write_outputs(args.out, {"ess.json": text})
    else:
        sys.stdout.write(text)
    return 0 if finite else 1


def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    if args.data_seed is not None:
        cfg = cfg.with_overrides([f"model.data_seed={args.data_seed}"])
    data = generate_data(cfg)
    write_outputs(args.out, {f"{cfg.model}_data.csv": data_csv(cfg, data)})
    print(f"wrote {len(data['y'])} {cfg.model} observations to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    built = build_model(cfg)
    results = gradcheck(built.target, built.mass, points=args.points, seed=cfg.experiment["seed"])
    worst = {}
    for r in results:
        worst[r.name] = max(worst.get(r.name, 0.0), r.error)
    failed = [r for r in results if not r.passed]
    for name, err in worst.items():
        print(f"{name:22s} max relative error {err:.2e}  {'ok' if err < results[0].tolerance else 'FAIL'}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sshmc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def config_args(p, need_out=True):
        p.add_argument("--config", required=True, help="INI config, or an output file with an embedded config")
        if need_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override experiment.seed")
        p.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE")

    p = sub.add_parser("run", help="run one chain and write its outputs")
    config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ess", help="recompute diagnostics from a trace file")
    p.add_argument("trace")
    p.add_argument("--out", help="write ess.json here instead of stdout")
    p.set_defaults(func=cmd_ess)

    p = sub.add_parser("gen-data", help="write a synthetic SV or LGCPP data set")
    config_args(p)
    p.add_argument("--data-seed", type=int, help="override model.data_seed")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("gradcheck", help="finite-difference audit of a model's gradients")
    config_args(p, need_out=False)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  any module error is a failed run
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
