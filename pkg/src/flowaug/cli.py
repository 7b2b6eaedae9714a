"""Command-line front door.

Subcommands: synth (generate a dataset), augment (transform a dataset file),
train (one training run), bench (the full grid), cdchart (statistics plus
chart from a results CSV). Machine-readable output goes to stdout as JSON or
into files; diagnostics go to stderr; exit status is 0 exactly when nothing
failed. A config file may pre-set any flag (`section key=value` lines);
explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import __version__
from .augment import AugmentationSpec, apply, format_spec, parse_spec
from .bench import load_plan, make_method, run
from .dataio import SynthConfig, FORMAT_VERSION, load, save, split, synthesize
from .model import (
    CHECKPOINT_SCHEMA,
    TrainConfig,
    evaluate,
    save_checkpoint,
    train,
)
from .rng import RngStream, mix_seed
from .sampling import SamplerConfig
from .stats import build_report, load_runresult, report_to_json, save_report_json
from .cdchart import save_cd_chart


class CliError(ValueError):
    """User-facing invocation problem; message printed, exit code 1."""


def _load_config(path: str) -> dict[str, dict[str, str]]:
    """Parse `section key=value ...` lines; later lines extend earlier ones."""
    sections: dict[str, dict[str, str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            section, _, rest = line.partition(" ")
            entries = sections.setdefault(section, {})
            for tok in rest.split():
                if "=" not in tok:
                    raise CliError(f"{path}: line {line_no}: expected key=value, got {tok!r}")
                key, _, value = tok.partition("=")
                entries[key] = value
    return sections


class _Resolver:
    """Flag > config file > builtin default, with typed conversion."""

    def __init__(self, args: argparse.Namespace, config: dict[str, dict[str, str]]):
        self._args = args
        self._config = config

    def get(self, section: str, key: str, default, conv=str):
        flag = getattr(self._args, key.replace("-", "_"), None)
        if flag is not None:
            return flag
        raw = self._config.get(section, {}).get(key)
        if raw is not None:
            try:
                return conv(raw)
            except ValueError:
                raise CliError(f"config {section}.{key}: bad value {raw!r}") from None
        return default

    def seed(self) -> int:
        return int(self.get("global", "seed", 0, int))


def _bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _pair(raw) -> tuple[float, float]:
    if isinstance(raw, tuple):
        return raw
    lo, sep, hi = str(raw).partition(":")
    if not sep:
        raise ValueError(raw)
    return float(lo), float(hi)


def _pair_arg(raw: str) -> tuple[float, float]:
    try:
        return _pair(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {raw!r}") from None


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, allow_nan=False) + "\n")


def _note(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message, file=sys.stderr)


# --- subcommands -------------------------------------------------------------


def cmd_synth(args, resolver: _Resolver) -> int:
    base = SynthConfig()
    config = SynthConfig(
        classes=int(resolver.get("synth", "classes", base.classes, int)),
        total=int(resolver.get("synth", "total", base.total, int)),
        zipf=float(resolver.get("synth", "zipf", base.zipf, float)),
        series_len=int(resolver.get("synth", "series-len", base.series_len, int)),
        seed=resolver.seed(),
        size_mu=_pair(resolver.get("synth", "size-mu", base.size_mu, _pair)),
        size_sigma=float(resolver.get("synth", "size-sigma", base.size_sigma, float)),
        iat_mu=_pair(resolver.get("synth", "iat-mu", base.iat_mu, _pair)),
        iat_sigma=float(resolver.get("synth", "iat-sigma", base.iat_sigma, float)),
        dir_flip=_pair(resolver.get("synth", "dir-flip", base.dir_flip, _pair)),
    )
    out = resolver.get("synth", "out", None)
    if out is None:
        raise CliError("synth needs --out")
    dataset = synthesize(config)
    save(dataset, out)
    _emit(
        {
            "out": str(out),
            "classes": len(dataset.labels),
            "records": len(dataset),
            "class_counts": list(dataset.class_counts),
            "seed": config.seed,
        }
    )
    return 0


def _augment_dataset(dataset, spec: AugmentationSpec, seed: int):
    """Augment every record once, deterministically in (dataset, seed, spec).

    Cutmix partners come from a per-class seeded cycle: each class's indices
    are shuffled once and each sample borrows from its successor in the
    cycle (a singleton class partners with itself, an identity cutmix).
    """
    root = RngStream(seed)
    partner_of: dict[int, int] = {}
    if spec.kind == "cutmix":
        for c, members in enumerate(dataset.class_indices()):
            order = [members[int(i)] for i in root.child("pairs", c).permutation(len(members))]
            for j, idx in enumerate(order):
                partner_of[idx] = order[(j + 1) % len(order)]
    out = []
    for i, sample in enumerate(dataset.samples):
        rng = root.child("sample", i)
        partner = dataset.samples[partner_of[i]] if spec.kind == "cutmix" else None
        out.append(apply(spec, sample, rng, partner=partner))
    return dataclasses.replace(dataset, samples=tuple(out))


def cmd_augment(args, resolver: _Resolver) -> int:
    in_path = resolver.get("augment", "in", None)
    out_path = resolver.get("augment", "out", None)
    aug = resolver.get("augment", "aug", None)
    if in_path is None or out_path is None:
        raise CliError("augment needs --in and --out")
    if aug is None:
        raise CliError("augment needs --aug \"kind key=value ...\"")
    spec = parse_spec(aug) if isinstance(aug, str) else aug
    dataset = load(in_path)
    seed = resolver.seed()
    augmented = _augment_dataset(dataset, spec, seed)
    save(augmented, out_path)
    _emit(
        {
            "out": str(out_path),
            "records": len(augmented),
            "spec": format_spec(spec),
            "seed": seed,
        }
    )
    return 0


def cmd_train(args, resolver: _Resolver) -> int:
    data = resolver.get("train", "data", None)
    if data is None:
        raise CliError("train needs --data")
    method_text = resolver.get("train", "method", "noaug")
    method = make_method(method_text)
    seed = resolver.seed()
    fractions = _fractions(resolver.get("train", "fractions", (0.7, 0.15, 0.15), _fractions))
    config = TrainConfig(
        epochs=int(resolver.get("train", "epochs", 30, int)),
        lr=float(resolver.get("train", "lr", 1e-3, float)),
        beta1=float(resolver.get("train", "beta1", 0.9, float)),
        beta2=float(resolver.get("train", "beta2", 0.999, float)),
        eps=float(resolver.get("train", "eps", 1e-8, float)),
        seed=mix_seed(seed, "cell", method.name),
    )
    batch_size = int(resolver.get("train", "batch-size", 32, int))
    dataset = load(data)
    train_set, val_set, test_set = split(dataset, fractions, seed=seed)
    sampler_config = SamplerConfig(mode=method.sampler_mode, batch_size=batch_size)
    _note(args, f"training {method.name} on {data} (seed {seed}, {config.epochs} epochs)")
    best, history = train(train_set, val_set, sampler_config, method.spec, config)
    report = evaluate(best, test_set)
    checkpoint = resolver.get("train", "save-checkpoint", None)
    if checkpoint is not None:
        save_checkpoint(best, checkpoint)
    _emit(
        {
            "method": method.name,
            "seed": seed,
            "weighted_f1": report.weighted_f1,
            "report": report.to_dict(),
            "history": history,
            "config": {
                "data": str(data),
                "spec": format_spec(method.spec),
                "sampler": method.sampler_mode,
                "batch_size": batch_size,
                "fractions": list(fractions),
                "epochs": config.epochs,
                "lr": config.lr,
                "beta1": config.beta1,
                "beta2": config.beta2,
                "eps": config.eps,
                "checkpoint": None if checkpoint is None else str(checkpoint),
            },
        }
    )
    return 0


def _fractions(raw) -> tuple[float, float, float]:
    if isinstance(raw, tuple):
        return raw
    parts = [float(p) for p in str(raw).replace(",", " ").split()]
    if len(parts) != 3:
        raise ValueError(raw)
    return parts[0], parts[1], parts[2]


def cmd_bench(args, resolver: _Resolver) -> int:
    plan_path = resolver.get("bench", "plan", None)
    out = resolver.get("bench", "out", None)
    if plan_path is None or out is None:
        raise CliError("bench needs --plan and --out")
    parallelism = int(resolver.get("bench", "parallelism", 1, int))
    plan = load_plan(plan_path)

    def progress(method, seed, status):
        if args.verbose:
            print(f"[{method} seed={seed}] {status}", file=sys.stderr)

    outcome = run(
        plan,
        out,
        parallelism=parallelism,
        resume=not getattr(args, "fresh", False),
        progress=progress,
    )
    payload = {
        "csv": str(out),
        "cells_total": len(plan.methods) * len(plan.seeds),
        "computed": outcome.computed,
        "failures": [
            {"method": m, "seed": s, "error": e} for m, s, e in outcome.failures
        ],
    }
    if outcome.result is not None:
        payload["methods"] = list(outcome.result.methods)
        payload["seeds"] = list(outcome.result.seeds)
        means = outcome.result.scores.mean(axis=0)
        payload["mean_weighted_f1"] = {
            m: float(v) for m, v in zip(outcome.result.methods, means)
        }
    _emit(payload)
    return 1 if outcome.failures else 0


def cmd_cdchart(args, resolver: _Resolver) -> int:
    results = resolver.get("cdchart", "results", None)
    if results is None:
        raise CliError("cdchart needs --results")
    stem = os.path.splitext(str(results))[0]
    out_json = resolver.get("cdchart", "out-json", stem + ".cd.json")
    out_svg = resolver.get("cdchart", "out-svg", stem + ".cd.svg")
    alpha = float(resolver.get("cdchart", "alpha", 0.05, float))
    tie_correction = _bool(resolver.get("cdchart", "tie-correction", False, _bool))
    result = load_runresult(results)
    report = build_report(result, alpha=alpha, tie_correction=tie_correction)
    save_report_json(report, out_json)
    save_cd_chart(report, out_svg)
    _note(args, f"wrote {out_json} and {out_svg}")
    sys.stdout.write(report_to_json(report))
    return 0


# --- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowaug",
        description="Packet-series augmentation toolkit: synth, augment, train, bench, cdchart.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"flowaug {__version__} (dataset-format {FORMAT_VERSION}, "
        f"checkpoint-schema {CHECKPOINT_SCHEMA})",
    )
    parser.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    parser.add_argument("--config", default=None, help="config file with section key=value lines")
    loud = parser.add_mutually_exclusive_group()
    loud.add_argument("--quiet", action="store_true", help="suppress diagnostics")
    loud.add_argument("--verbose", action="store_true", help="progress details on stderr")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic imbalanced dataset")
    p.add_argument("--out", default=None, help="output JSONL path")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--total", type=int, default=None)
    p.add_argument("--zipf", type=float, default=None, help="imbalance exponent (0 = balanced)")
    p.add_argument("--series-len", type=int, default=None)
    p.add_argument("--size-mu", type=_pair_arg, default=None, metavar="LO:HI")
    p.add_argument("--size-sigma", type=float, default=None)
    p.add_argument("--iat-mu", type=_pair_arg, default=None, metavar="LO:HI")
    p.add_argument("--iat-sigma", type=float, default=None)
    p.add_argument("--dir-flip", type=_pair_arg, default=None, metavar="LO:HI")

    p = sub.add_parser("augment", help="apply one augmentation to every record of a dataset")
    p.add_argument("--in", dest="in", default=None, help="input JSONL path")
    p.add_argument("--out", default=None, help="output JSONL path")
    p.add_argument("--aug", default=None, help='augmentation spec, e.g. "flip" or "wrap p_edit=0.2"')

    p = sub.add_parser("train", help="train once and print the evaluation report")
    p.add_argument("--data", default=None, help="dataset JSONL path")
    p.add_argument("--method", default=None, help="noaug, noaug_nosampler, or an augmentation spec")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--fractions", default=None, help="train val test, e.g. 0.7,0.15,0.15")
    p.add_argument("--save-checkpoint", default=None, help="write model parameters here (.npz)")

    p = sub.add_parser("bench", help="run the benchmark grid from a plan file")
    p.add_argument("--plan", default=None, help="plan file path")
    p.add_argument("--out", default=None, help="results CSV path (also the resume checkpoint)")
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint")

    p = sub.add_parser("cdchart", help="Friedman/Nemenyi report and chart from a results CSV")
    p.add_argument("--results", default=None, help="results CSV path")
    p.add_argument("--out-json", default=None)
    p.add_argument("--out-svg", default=None)
    p.add_argument("--alpha", type=float, default=None, help="0.05 or 0.10")
    p.add_argument("--tie-correction", action="store_true", default=None)

    return parser


_HANDLERS = {
    "synth": cmd_synth,
    "augment": cmd_augment,
    "train": cmd_train,
    "bench": cmd_bench,
    "cdchart": cmd_cdchart,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for --help/--version/usage errors
        return int(exc.code or 0)
    try:
        config = _load_config(args.config) if args.config else {}
        resolver = _Resolver(args, config)
        return _HANDLERS[args.command](args, resolver)
    except Exception as exc:
        kind = type(exc).__name__
        detail = str(exc) or kind
        print(f"error: {detail}" if isinstance(exc, (CliError, ValueError)) else
              f"error ({kind}): {detail}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
