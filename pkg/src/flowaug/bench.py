"""Benchmark grid orchestration over (method, seed) cells.

A plan file names the dataset (a file or a synthesizer config), the methods,
the seeds and the training settings. Every cell splits the dataset with the
seed shared across methods (so per-seed ranks compare like with like),
derives its own training seed from (seed, method name), trains, and reports
the test weighted F1 of the best-validation epoch.

Cells are independent, so they run in any order and in parallel. Finished
cells are appended to the output CSV immediately (the resume source); when
the grid completes, the CSV is rewritten in canonical method-major order so
the final artifact is byte-deterministic regardless of scheduling. A JSON
manifest next to the CSV records the plan hash, progress and failures.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import datetime
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .augment import AugmentationSpec, format_spec, parse_spec
from .dataio import SynthConfig, load, split, synthesize
from .flow import Dataset
from .model import TrainConfig, evaluate, train
from .rng import mix_seed
from .sampling import SAMPLER_MODES, SamplerConfig
from .stats import CSV_HEADER, RunResult, save_runresult

MANIFEST_VERSION = 1

# Baseline presets: identity augmentation with and without the weighted
# sampler. Everything else trains weighted, per the doubling protocol.
PRESETS = {
    "noaug": ("weighted", "identity"),
    "noaug_nosampler": ("uniform", "identity"),
}


class PlanError(ValueError):
    """A plan file that cannot be parsed or is internally inconsistent."""


@dataclass(frozen=True)
class Method:
    """One column of the grid: a sampler mode plus an augmentation spec."""

    name: str
    sampler_mode: str
    spec: AugmentationSpec

    def __post_init__(self):
        if not self.name or any(ch.isspace() or ch == "," for ch in self.name):
            raise PlanError(
                f"method name must be non-empty without spaces or commas, got {self.name!r}"
            )
        if self.sampler_mode not in SAMPLER_MODES:
            raise PlanError(f"sampler mode must be one of {SAMPLER_MODES}")


@dataclass(frozen=True)
class BenchPlan:
    """The full grid description; exactly one data source must be set."""

    methods: tuple[Method, ...]
    seeds: tuple[int, ...]
    dataset_path: str | None = None
    synth: SynthConfig | None = None
    train: TrainConfig = TrainConfig()
    batch_size: int = 32
    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def __post_init__(self):
        if (self.dataset_path is None) == (self.synth is None):
            raise PlanError("exactly one of dataset_path or synth must be set")
        if len(self.methods) < 2:
            raise PlanError("need at least 2 methods")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise PlanError(f"duplicate method names in {names}")
        if len(self.seeds) < 2:
            raise PlanError("need at least 2 seeds")
        if len(set(self.seeds)) != len(self.seeds):
            raise PlanError("duplicate seeds")
        if self.batch_size < 1:
            raise PlanError("batch_size must be >= 1")


def make_method(text: str) -> Method:
    """Parse one method description: `[name=X] <preset | augmentation spec>`."""
    tokens = text.split()
    if not tokens:
        raise PlanError("empty method description")
    name = None
    if tokens[0].startswith("name="):
        name = tokens[0][len("name="):]
        tokens = tokens[1:]
        if not tokens:
            raise PlanError("method has a name but no preset or spec")
    if tokens[0] in PRESETS:
        if len(tokens) > 1:
            raise PlanError(f"preset {tokens[0]!r} takes no parameters")
        mode, kind = PRESETS[tokens[0]]
        return Method(name or tokens[0], mode, AugmentationSpec(kind))
    try:
        spec = parse_spec(" ".join(tokens))
    except ValueError as exc:
        raise PlanError(str(exc)) from None
    return Method(name or spec.kind, "weighted", spec)


def _format_method(method: Method) -> str:
    for preset, (mode, kind) in PRESETS.items():
        if method.sampler_mode == mode and method.spec == AugmentationSpec(kind):
            return f"name={method.name} {preset}"
    return f"name={method.name} {format_spec(method.spec)}"


def _kv(tokens, converters, context) -> dict:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise PlanError(f"{context}: expected key=value, got {tok!r}")
        key, _, raw = tok.partition("=")
        conv = converters.get(key)
        if conv is None:
            raise PlanError(f"{context}: unknown key {key!r}; valid: {', '.join(sorted(converters))}")
        try:
            out[key] = conv(raw)
        except ValueError:
            raise PlanError(f"{context}: bad value for {key}: {raw!r}") from None
    return out


def _pair(raw: str) -> tuple[float, float]:
    lo, sep, hi = raw.partition(":")
    if not sep:
        raise ValueError(raw)
    return float(lo), float(hi)


_SYNTH_CONV = {
    "classes": int,
    "total": int,
    "zipf": float,
    "series_len": int,
    "seed": int,
    "size_mu": _pair,
    "size_sigma": float,
    "iat_mu": _pair,
    "iat_sigma": float,
    "dir_flip": _pair,
}
_TRAIN_CONV = {"epochs": int, "lr": float, "beta1": float, "beta2": float, "eps": float}


def _parse_seeds(raw: str) -> tuple[int, ...]:
    try:
        if ":" in raw:
            lo, _, hi = raw.partition(":")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(raw)
            return tuple(range(lo, hi + 1))
        return tuple(int(tok) for tok in raw.split(",") if tok)
    except ValueError:
        raise PlanError(f"seeds must be lo:hi or a comma list, got {raw!r}") from None


def parse_plan(text: str) -> BenchPlan:
    """Parse the line-oriented plan format (see format_plan for the shape)."""
    dataset_path = None
    synth_kw = None
    seeds = None
    train_kw: dict = {}
    batch_size = 32
    fractions = (0.7, 0.15, 0.15)
    methods: list[Method] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        directive, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if directive == "dataset":
                dataset_path = rest
                if not dataset_path:
                    raise PlanError("dataset needs a path")
            elif directive == "synth":
                synth_kw = _kv(rest.split(), _SYNTH_CONV, "synth")
            elif directive == "seeds":
                seeds = _parse_seeds(rest)
            elif directive == "train":
                train_kw = _kv(rest.split(), _TRAIN_CONV, "train")
            elif directive == "sampler":
                kw = _kv(rest.split(), {"batch_size": int}, "sampler")
                batch_size = kw.get("batch_size", batch_size)
            elif directive == "fractions":
                parts = rest.split()
                if len(parts) != 3:
                    raise PlanError("fractions needs exactly 3 numbers")
                fractions = tuple(float(p) for p in parts)
            elif directive == "method":
                methods.append(make_method(rest))
            else:
                raise PlanError(f"unknown directive {directive!r}")
        except (PlanError, ValueError) as exc:
            raise PlanError(f"plan line {line_no}: {exc}") from None
    if seeds is None:
        raise PlanError("plan must declare seeds")
    try:
        return BenchPlan(
            methods=tuple(methods),
            seeds=seeds,
            dataset_path=dataset_path,
            synth=SynthConfig(**synth_kw) if synth_kw is not None else None,
            train=TrainConfig(**train_kw),
            batch_size=batch_size,
            fractions=fractions,
        )
    except ValueError as exc:
        raise PlanError(str(exc)) from None


def load_plan(path) -> BenchPlan:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_plan(fh.read())


def format_plan(plan: BenchPlan) -> str:
    """Canonical plan text; parse_plan(format_plan(p)) reproduces p."""
    lines = []
    if plan.dataset_path is not None:
        lines.append(f"dataset {plan.dataset_path}")
    else:
        s = plan.synth
        lines.append(
            "synth "
            f"classes={s.classes} total={s.total} zipf={s.zipf!r} "
            f"series_len={s.series_len} seed={s.seed} "
            f"size_mu={s.size_mu[0]!r}:{s.size_mu[1]!r} size_sigma={s.size_sigma!r} "
            f"iat_mu={s.iat_mu[0]!r}:{s.iat_mu[1]!r} iat_sigma={s.iat_sigma!r} "
            f"dir_flip={s.dir_flip[0]!r}:{s.dir_flip[1]!r}"
        )
    lines.append("seeds " + ",".join(str(s) for s in plan.seeds))
    lines.append("fractions " + " ".join(repr(f) for f in plan.fractions))
    lines.append(f"sampler batch_size={plan.batch_size}")
    t = plan.train
    lines.append(
        f"train epochs={t.epochs} lr={t.lr!r} beta1={t.beta1!r} beta2={t.beta2!r} eps={t.eps!r}"
    )
    for method in plan.methods:
        lines.append("method " + _format_method(method))
    return "\n".join(lines) + "\n"


def plan_sha256(plan: BenchPlan) -> str:
    return hashlib.sha256(format_plan(plan).encode("utf-8")).hexdigest()


def plan_dataset(plan: BenchPlan) -> Dataset:
    """Materialize the plan's data source."""
    if plan.dataset_path is not None:
        return load(plan.dataset_path)
    return synthesize(plan.synth)


def run_cell(dataset: Dataset, method: Method, seed: int, plan: BenchPlan) -> float:
    """One grid cell: split by seed, train, return the test weighted F1.

    The split depends only on (dataset, seed), so every method sees the same
    partitions for a given seed; the training seed mixes in the method name
    so different methods do not share initialization or batch noise.
    """
    train_set, val_set, test_set = split(dataset, plan.fractions, seed=seed)
    config = dataclasses.replace(plan.train, seed=mix_seed(seed, "cell", method.name))
    sampler_config = SamplerConfig(mode=method.sampler_mode, batch_size=plan.batch_size)
    best, _ = train(train_set, val_set, sampler_config, method.spec, config)
    return evaluate(best, test_set).weighted_f1


@dataclass(frozen=True)
class BenchOutcome:
    """What a grid run produced: the full result, or the failure list."""

    result: RunResult | None
    failures: tuple[tuple[str, int, str], ...]
    csv_path: str
    computed: int  # cells actually trained in this invocation (not resumed)


# Worker-process state, set once per worker instead of pickled per cell.
_WORKER: dict = {}


def _init_worker(dataset: Dataset, plan: BenchPlan) -> None:
    _WORKER["dataset"] = dataset
    _WORKER["plan"] = plan


def _cell_task(args: tuple[str, int]):
    name, seed = args
    plan: BenchPlan = _WORKER["plan"]
    method = next(m for m in plan.methods if m.name == name)
    try:
        score = run_cell(_WORKER["dataset"], method, seed, plan)
        return name, seed, score, None
    except Exception as exc:  # cell failures must not kill the grid
        return name, seed, math.nan, f"{type(exc).__name__}: {exc}"


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _manifest_path(csv_path: str) -> str:
    return str(csv_path) + ".manifest.json"


def _write_manifest(csv_path, plan, started, finished, done, failures) -> None:
    payload = {
        "manifest_version": MANIFEST_VERSION,
        "toolkit_version": __version__,
        "plan_sha256": plan_sha256(plan),
        "plan": format_plan(plan),
        "cells_total": len(plan.methods) * len(plan.seeds),
        "cells_done": done,
        "started": started,
        "finished": finished,
        "failures": [{"method": m, "seed": s, "error": e} for m, s, e in failures],
    }
    with open(_manifest_path(csv_path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _read_checkpoint(csv_path, plan) -> dict[tuple[str, int], float]:
    """Previously finished cells, validated against the plan's grid."""
    valid = {(m.name, s) for m in plan.methods for s in plan.seeds}
    done: dict[tuple[str, int], float] = {}
    with open(csv_path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(CSV_HEADER):
            raise PlanError(f"{csv_path}: not a results file (header {header!r})")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise PlanError(f"{csv_path}: line {line_no}: malformed row")
            key = (parts[0], int(parts[1]))
            if key not in valid:
                raise PlanError(
                    f"{csv_path}: line {line_no}: cell {key} is not in this plan; "
                    f"use a fresh output path"
                )
            done[key] = float(parts[2])
    return done


def run(
    plan: BenchPlan,
    csv_path,
    parallelism: int = 1,
    resume: bool = True,
    progress=None,
) -> BenchOutcome:
    """Execute the grid, checkpointing to csv_path.

    With resume=True an existing checkpoint for the same plan is continued;
    a checkpoint for a different plan is an error. On full completion the
    CSV is rewritten in canonical order and the parsed RunResult returned;
    if any cell failed the checkpoint keeps the finished cells, the manifest
    lists the failures, and result is None.
    """
    csv_path = str(csv_path)
    started = _utc_now()
    done: dict[tuple[str, int], float] = {}
    if os.path.exists(csv_path):
        if not resume:
            os.remove(csv_path)
        else:
            manifest_file = _manifest_path(csv_path)
            if os.path.exists(manifest_file):
                with open(manifest_file, "r", encoding="utf-8") as fh:
                    manifest = json.load(fh)
                if manifest.get("plan_sha256") != plan_sha256(plan):
                    raise PlanError(
                        f"{csv_path}: checkpoint belongs to a different plan; "
                        f"pass a fresh output path or disable resume"
                    )
            done = _read_checkpoint(csv_path, plan)

    dataset = plan_dataset(plan)
    cells = [
        (m.name, s) for m in plan.methods for s in plan.seeds if (m.name, s) not in done
    ]
    for key in done:
        if progress is not None:
            progress(key[0], key[1], "resumed")

    mode = "a" if done else "w"
    failures: list[tuple[str, int, str]] = []
    computed = 0
    with open(csv_path, mode, encoding="utf-8", newline="\n") as fh:
        if mode == "w":
            fh.write(",".join(CSV_HEADER) + "\n")
            fh.flush()
        _write_manifest(csv_path, plan, started, None, len(done), failures)

        def finish(name, seed, score, error):
            nonlocal computed
            computed += 1
            if error is not None:
                failures.append((name, seed, error))
                if progress is not None:
                    progress(name, seed, f"failed: {error}")
                return
            done[(name, seed)] = score
            fh.write(f"{name},{seed},{repr(float(score))}\n")
            fh.flush()
            if progress is not None:
                progress(name, seed, "done")

        if parallelism <= 1 or len(cells) <= 1:
            _init_worker(dataset, plan)
            for key in cells:
                finish(*_cell_task(key))
        else:
            workers = min(parallelism, len(cells))
            with concurrent.futures.ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker, initargs=(dataset, plan)
            ) as pool:
                futures = [pool.submit(_cell_task, key) for key in cells]
                for fut in concurrent.futures.as_completed(futures):
                    finish(*fut.result())

    finished = _utc_now()
    _write_manifest(csv_path, plan, started, finished, len(done), failures)
    if failures:
        return BenchOutcome(None, tuple(failures), csv_path, computed)
    seeds = tuple(sorted(plan.seeds))
    methods = tuple(m.name for m in plan.methods)
    scores = np.array([[done[(m, s)] for m in methods] for s in seeds])
    result = RunResult(methods, seeds, scores)
    save_runresult(result, csv_path)  # canonical rewrite: deterministic bytes
    return BenchOutcome(result, (), csv_path, computed)
