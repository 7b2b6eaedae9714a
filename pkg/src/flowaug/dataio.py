"""Dataset persistence, stratified splitting, and synthetic flow generation.

Datasets are stored as JSON Lines: one object per flow with keys label,
sizes, dirs, iats, valid_len. Saving always emits the same canonical bytes
for the same dataset (fixed key order, compact separators, shortest float
representation), so files diff cleanly and tests can compare bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .flow import Dataset, FlowSample, validate
from .rng import RngStream

FORMAT_VERSION = 1

RECORD_KEYS = ("label", "sizes", "dirs", "iats", "valid_len")


class LoadError(ValueError):
    """A dataset file that cannot be parsed into valid samples."""


class SplitError(ValueError):
    """A dataset that cannot be stratified as requested."""


def save(dataset: Dataset, path) -> None:
    """Write canonical JSON Lines; one record per sample, input order kept."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in dataset.samples:
            record = {
                "label": dataset.labels[s.label],
                "sizes": list(s.sizes),
                "dirs": list(s.dirs),
                "iats": list(s.iats),
                "valid_len": s.valid_len,
            }
            fh.write(json.dumps(record, separators=(",", ":"), allow_nan=False))
            fh.write("\n")


def load(path) -> Dataset:
    """Parse JSON Lines into a Dataset.

    Labels enter the vocabulary in first-appearance order. Every record is
    validated in relaxed mode (masked packets allowed); any malformed line
    raises LoadError naming the line number. Series lengths must agree
    across the file.
    """
    samples: list[FlowSample] = []
    labels: list[str] = []
    label_ids: dict[str, int] = {}
    series_len = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(f"{path}: line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict) or set(record) != set(RECORD_KEYS):
                raise LoadError(
                    f"{path}: line {line_no}: expected keys {', '.join(RECORD_KEYS)}"
                )
            try:
                label = str(record["label"])
                sample = FlowSample.from_arrays(
                    record["sizes"],
                    record["dirs"],
                    record["iats"],
                    record["valid_len"],
                    label_ids.setdefault(label, len(labels)),
                )
            except (TypeError, ValueError) as exc:
                raise LoadError(f"{path}: line {line_no}: {exc}") from None
            if sample.label == len(labels):
                labels.append(label)
            if series_len is None:
                series_len = sample.series_len()
            elif sample.series_len() != series_len:
                raise LoadError(
                    f"{path}: line {line_no}: series length {sample.series_len()} "
                    f"!= {series_len} used earlier in the file"
                )
            problems = validate(sample, allow_masked=True)
            if problems:
                field, pos, rule = problems[0]
                where = field if pos is None else f"{field}[{pos}]"
                raise LoadError(f"{path}: line {line_no}: {where}: {rule}")
            samples.append(sample)
    if not samples:
        raise LoadError(f"{path}: no records")
    return Dataset.from_samples(samples, labels)


def largest_remainder(weights, total: int) -> list[int]:
    """Apportion `total` into integer parts proportional to `weights`.

    Floors of the ideal shares first, then the largest fractional remainders
    get the leftover units; remainder ties break toward the smaller index so
    the result is deterministic.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or (w < 0).any() or w.sum() <= 0:
        raise ValueError("weights must be non-negative with a positive sum")
    ideal = total * w / w.sum()
    base = np.floor(ideal).astype(np.int64)
    remainder = ideal - base
    leftover = int(total - base.sum())
    for i in sorted(range(w.size), key=lambda i: (-remainder[i], i))[:leftover]:
        base[i] += 1
    return [int(v) for v in base]


def split(
    dataset: Dataset,
    fractions: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Stratified train/val/test split, deterministic in (dataset, seed).

    Each class is shuffled with its own child stream and cut by
    largest-remainder apportionment of the fractions, so exactly divisible
    classes split exactly and every sample lands in exactly one part. All
    parts keep the full label vocabulary. Classes with fewer than 3 samples
    cannot reach all three parts and raise SplitError.
    """
    if len(fractions) != 3:
        raise SplitError(f"need exactly 3 fractions, got {len(fractions)}")
    if any(not (f > 0 and math.isfinite(f)) for f in fractions):
        raise SplitError(f"fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {sum(fractions)}")
    root = RngStream(seed)
    parts: tuple[list[int], list[int], list[int]] = ([], [], [])
    for c, members in enumerate(dataset.class_indices()):
        if len(members) < 3:
            raise SplitError(
                f"class {dataset.labels[c]!r} has {len(members)} samples; "
                f"need >= 3 to reach train, val and test"
            )
        members = np.asarray(members, dtype=np.int64)
        perm = np.asarray(root.child("split", c).permutation(members.size))
        shuffled = members[perm]
        counts = largest_remainder(fractions, members.size)
        offset = 0
        for part, count in zip(parts, counts):
            part.extend(int(i) for i in shuffled[offset : offset + count])
            offset += count
    out = []
    for part in parts:
        part.sort()  # keep each part in original dataset order
        out.append(
            Dataset(
                samples=tuple(dataset.samples[i] for i in part),
                labels=dataset.labels,
                class_counts=tuple(
                    sum(1 for i in part if dataset.samples[i].label == c)
                    for c in range(len(dataset.labels))
                ),
            )
        )
    return out[0], out[1], out[2]


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic imbalanced flow generator.

    Class sizes follow (c + 1) ** -zipf, normalized by largest remainder.
    Per-class signal comes from distinct parameter tuples: lognormal size
    and IAT location/scale plus a two-state direction Markov chain; the
    class-to-parameter assignment is decorrelated across features so no
    single feature orders the classes the same way.
    """

    classes: int = 10
    total: int = 5000
    zipf: float = 1.0
    series_len: int = 20
    seed: int = 0
    size_mu: tuple[float, float] = (4.0, 7.0)
    size_sigma: float = 0.6
    iat_mu: tuple[float, float] = (-7.0, -2.5)
    iat_sigma: float = 0.8
    dir_flip: tuple[float, float] = (0.05, 0.45)

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError(f"classes must be >= 2, got {self.classes}")
        if self.total < 10 * self.classes:
            raise ValueError(
                f"total must be >= 10 * classes = {10 * self.classes}, got {self.total}"
            )
        if not (self.zipf >= 0 and math.isfinite(self.zipf)):
            raise ValueError(f"zipf must be >= 0, got {self.zipf}")
        if self.series_len < 2:
            raise ValueError(f"series_len must be >= 2, got {self.series_len}")
        for name in ("size_sigma", "iat_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        lo, hi = self.dir_flip
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"dir_flip must satisfy 0 <= lo <= hi <= 1, got {self.dir_flip}")


def _coprime_step(k: int) -> int:
    """Smallest step >= 2 coprime to k (1 when k = 2), used to shuffle the
    class-to-IAT-parameter assignment away from the size ordering."""
    if k == 2:
        return 1
    for step in range(2, k):
        if math.gcd(step, k) == 1:
            return step
    return 1


def _lerp(bounds: tuple[float, float], f: float) -> float:
    return bounds[0] + (bounds[1] - bounds[0]) * f


def class_params(config: SynthConfig, c: int) -> dict:
    """Deterministic per-class generator parameters (exposed for tests)."""
    k = config.classes
    f_size = c / (k - 1)
    f_iat = ((c * _coprime_step(k)) % k) / (k - 1)
    f_dir = (k - 1 - c) / (k - 1)
    return {
        "size_mu": _lerp(config.size_mu, f_size),
        "size_sigma": config.size_sigma,
        "iat_mu": _lerp(config.iat_mu, f_iat),
        "iat_sigma": config.iat_sigma,
        "dir_flip": _lerp(config.dir_flip, f_dir),
        "dir_start": 1 if c % 2 == 0 else -1,
    }


def synthesize(config: SynthConfig) -> Dataset:
    """Generate the imbalanced dataset described by the config.

    Per flow: valid_len ~ U{max(2, N // 2) .. N}, sizes are rounded
    lognormals clamped to [1, 65535], directions follow the class Markov
    chain over {-1, +1}, IATs are lognormal with iats[0] pinned to 0.
    Samples are emitted class-major (class 0 first); within a class the
    draw order is documented by the child-stream layout: one stream per
    class, drawing valid_len, sizes, direction flips, then IATs per flow.
    """
    k = config.classes
    n = config.series_len
    counts = largest_remainder([(c + 1.0) ** -config.zipf for c in range(k)], config.total)
    root = RngStream(config.seed)
    labels = [f"class{c:02d}" for c in range(k)]
    samples: list[FlowSample] = []
    for c in range(k):
        params = class_params(config, c)
        rng = root.child("synth", c)
        for _ in range(counts[c]):
            length = int(rng.integers(max(2, n // 2), n + 1))
            sizes = np.zeros(n)
            dirs = np.zeros(n, dtype=np.int64)
            iats = np.zeros(n)
            raw = np.exp(np.asarray(rng.normal(params["size_mu"], params["size_sigma"], size=length)))
            sizes[:length] = np.clip(np.floor(raw + 0.5), 1, 65535)
            flips = np.asarray(rng.random(length - 1)) < params["dir_flip"]
            steps = np.ones(length)
            steps[1:][flips] = -1.0
            dirs[:length] = params["dir_start"] * np.cumprod(steps).astype(np.int64)
            iats[1:length] = np.exp(
                np.asarray(rng.normal(params["iat_mu"], params["iat_sigma"], size=length - 1))
            )
            samples.append(
                FlowSample(
                    tuple(int(v) for v in sizes),
                    tuple(int(v) for v in dirs),
                    tuple(float(v) for v in iats),
                    length,
                    c,
                )
            )
    return Dataset.from_samples(samples, labels)
