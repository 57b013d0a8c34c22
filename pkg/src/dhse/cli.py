"""Command line entry point: ``dhse extract|train|cs|synth|eval|ingest``.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import types
import typing
from pathlib import Path

from . import pipeline
from .datasets import SynthParams, ingest_ogbn_arxiv, synth
from .models import TrainingDiverged
from .pipeline import RunConfig

log = logging.getLogger("dhse")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _base_type(tp):
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    if isinstance(tp, types.UnionType) or typing.get_origin(tp) is typing.Union:
        return args[0]
    return tp


def _add_dataclass_flags(p: argparse.ArgumentParser, cls) -> None:
    """One override flag per dataclass field; unset flags stay None."""
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        tp = _base_type(hints[f.name])
        if tp is bool:
            p.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(_flag(f.name), dest=f.name, type=tp, default=None)


def _run_config(args) -> RunConfig:
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            raw[f.name] = v
    return RunConfig.from_dict(raw)


def _report(cfg: RunConfig, rows, stem: str) -> None:
    text = pipeline.format_table(rows)
    print(text)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.txt").write_text(text + "\n")
    (out / f"{stem}.csv").write_text(pipeline.format_csv(rows))


def cmd_synth(args) -> None:
    raw = {f.name: getattr(args, f.name) for f in dataclasses.fields(SynthParams) if getattr(args, f.name) is not None}
    root = synth(args.out, SynthParams(**raw))
    print(f"wrote dataset to {root}")


def cmd_extract(args) -> None:
    cfg = _run_config(args)
    s, d = pipeline.cmd_extract(cfg)
    print(f"wrote {s} and {d}")


def cmd_train(args) -> None:
    cfg = _run_config(args)
    results = [pipeline.cmd_train(cfg, seed) for seed in range(cfg.seed, cfg.seed + cfg.num_seeds)]
    _report(cfg, pipeline.summary_rows(cfg.model_name(), results), "train_report")


def cmd_cs(args) -> None:
    cfg = _run_config(args)
    seeds = range(cfg.seed, cfg.seed + cfg.num_seeds)
    checkpoints = [args.checkpoint] if args.checkpoint else [pipeline._checkpoint_path(cfg, s) for s in seeds]
    ds = pipeline.load_dataset(cfg.data_dir)
    results = []
    for i, ck in enumerate(checkpoints):
        r = pipeline.cmd_cs(cfg, ck, ds)
        results.append(pipeline.SeedResult(i, [], float("nan"), r["base_valid"], r["base_test"],
                                           r["cs_valid"], r["cs_test"]))
    _report(cfg, pipeline.summary_rows(cfg.model_name(), results), "cs_report")


def cmd_eval(args) -> None:
    cfg = _run_config(args)
    results = pipeline.cmd_eval(cfg)
    _report(cfg, pipeline.summary_rows(cfg.model_name(), results), "eval_report")


def cmd_ingest(args) -> None:
    root = ingest_ogbn_arxiv(args.raw, args.out)
    print(f"wrote dataset to {root}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("extract", cmd_extract, "compute structure and distance feature caches"),
        ("train", cmd_train, "train GAT/AGDN on the encoded features"),
        ("cs", cmd_cs, "apply Correct and Smooth to trained checkpoints"),
        ("eval", cmd_eval, "train + Correct and Smooth over seeds, report mean ± std"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON run configuration")
        _add_dataclass_flags(p, RunConfig)
        if name == "cs":
            p.add_argument("--checkpoint", help="checkpoint file (default: one per seed in out_dir)")
        p.set_defaults(func=fn)

    p = sub.add_parser("synth", help="generate a planted-partition dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    _add_dataclass_flags(p, SynthParams)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="convert a downloaded ogbn-arxiv directory")
    p.add_argument("--raw", required=True, help="ogbn_arxiv directory containing raw/ and split/")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except OSError as exc:
        print(f"dhse: I/O error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TrainingDiverged) as exc:
        print(f"dhse: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
