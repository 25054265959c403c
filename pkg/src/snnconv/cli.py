"""Command-line entry point: ``snnconv <subcommand>`` or ``python -m snnconv``.

Exit codes: 0 success, 2 config error, 3 data error, 4 reference-trace mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import ErrorReport
from .ann import CheckpointError, export_checkpoint, import_checkpoint
from .convert import convert, export_snn, import_snn
from .data import DataError
from .pipeline import ConfigError, ExperimentConfig, PipelineError, load_dataset, repro_figures, run_pipeline, run_sweep, train_ann
from .snn import simulate

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_REPRO = 4


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def _out_dir(cfg):
    out = Path(cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args):
    cfg = _config(args)
    train_set, test_set = load_dataset(cfg)
    net, log = train_ann(cfg, train_set)
    out = _out_dir(cfg)
    (out / "ann.snnc").write_bytes(export_checkpoint(net))
    (out / "train_log.json").write_text(json.dumps(log.to_dict(), indent=2))
    print(f"final loss {log.loss[-1]:.4f}, lambdas {net.lambdas}; wrote {out / 'ann.snnc'}")
    return 0


def cmd_convert(args):
    ann = import_checkpoint(Path(args.checkpoint).read_bytes())
    snn = convert(ann, args.mode, args.v0)
    Path(args.output).write_bytes(export_snn(snn))
    print(f"thresholds {[layer.theta for layer in snn.hidden]}, mode {snn.mode.value}; wrote {args.output}")
    return 0


def cmd_simulate(args):
    cfg = _config(args)
    snn = import_snn(Path(args.checkpoint).read_bytes())
    _, test_set = load_dataset(cfg)
    sim = simulate(snn, test_set.inputs, args.T, record_potentials=args.record_potentials)
    acc = float(np.mean(sim.predictions() == test_set.labels))
    record = dict(sim.to_json(include_potentials=args.record_potentials), accuracy=acc)
    out = _out_dir(cfg) / f"sim_T{args.T}.json"
    out.write_text(json.dumps(record))
    print(f"T={args.T} accuracy {acc:.4f}; wrote {out}")
    return 0


def cmd_analyze(args):
    cfg = _config(args)
    ann = import_checkpoint(Path(args.checkpoint).read_bytes()) if args.checkpoint else None
    bundle = run_pipeline(cfg, ann=ann, write=False)
    out = _out_dir(cfg)
    bundle.write(out)
    for run in bundle.payload["runs"]:
        for cell in run["snn"]:
            report = ErrorReport.from_json(cell["errors"])
            (out / f"errors_L{cell['L']}_T{cell['T']}_{cell['mode']}.csv").write_text(report.to_csv())
    sys.stdout.write(bundle.to_csv())
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    L_list = args.L_list or cfg.L_list
    bundle = run_sweep(cfg, L_list, write=False)
    bundle.write(_out_dir(cfg))
    sys.stdout.write(bundle.to_csv())
    return 0


def cmd_repro(args):
    return 0 if repro_figures() else EXIT_REPRO


def build_parser():
    parser = argparse.ArgumentParser(prog="snnconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        return p

    with_config(sub.add_parser("train", help="train the QCFS ANN")).set_defaults(fn=cmd_train)

    p = sub.add_parser("convert", help="convert an ANN checkpoint to an SNN checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--mode", choices=["IF", "DTN"], default="DTN")
    p.add_argument("--v0", default="half_theta", help="zero, half_theta or a number")
    p.add_argument("-o", "--output", default="snn.snnc")
    p.set_defaults(fn=cmd_convert)

    p = with_config(sub.add_parser("simulate", help="simulate an SNN checkpoint on the test split"))
    p.add_argument("checkpoint")
    p.add_argument("-T", type=int, required=True)
    p.add_argument("--record-potentials", action="store_true")
    p.set_defaults(fn=cmd_simulate)

    p = with_config(sub.add_parser("analyze", help="full pipeline with per-layer error reports"))
    p.add_argument("--checkpoint", help="skip training and use this ANN checkpoint")
    p.set_defaults(fn=cmd_analyze)

    p = with_config(sub.add_parser("sweep", help="repeat the pipeline for several L"))
    p.add_argument("--L-list", type=int, nargs="+", dest="L_list")
    p.set_defaults(fn=cmd_sweep)

    sub.add_parser("repro-figures", help="check the dual-threshold and unevenness examples").set_defaults(fn=cmd_repro)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as exc:
        if isinstance(exc.__cause__, (DataError, CheckpointError, OSError)):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        raise


if __name__ == "__main__":
    sys.exit(main())
