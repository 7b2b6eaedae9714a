"""Core types for first-N-packets flow series and classifier preprocessing.

A flow sample is the aligned triple of per-packet features observed at the
start of a network flow: packet size (bytes), direction (+1 upstream, -1
downstream) and inter-arrival time (seconds, first packet pinned to 0).
Positions at or past valid_len are zero padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SERIES_LEN = 20

FEATURES = ("size", "dir", "iat")


class MalformedSampleError(ValueError):
    """Raised when a sample holds values preprocessing cannot digest."""


@dataclass(frozen=True)
class FlowSample:
    """One flow's first-N-packets view: sizes, directions, IATs, true length.

    Construction never validates; use validate() to collect violations.
    Masking augmentations may zero whole packets before valid_len, which the
    relaxed validation mode accepts (a position is "masked" only when all
    three features are zero at once).
    """

    sizes: tuple[int, ...]
    dirs: tuple[int, ...]
    iats: tuple[float, ...]
    valid_len: int
    label: int

    @classmethod
    def from_arrays(cls, sizes, dirs, iats, valid_len: int, label: int) -> "FlowSample":
        """Build from any sequences, coercing to the canonical scalar types."""
        return cls(
            tuple(int(v) for v in sizes),
            tuple(int(v) for v in dirs),
            tuple(float(v) for v in iats),
            int(valid_len),
            int(label),
        )

    def series_len(self) -> int:
        return len(self.sizes)


def validate(sample: FlowSample, allow_masked: bool = False) -> list[tuple[str, int | None, str]]:
    """Check sample invariants; returns [] when well-formed.

    Each violation is a (field, position, rule) triple; position is None for
    whole-sample rules. With allow_masked=True a position before valid_len may
    be all-zero across the three features (the contract for masked or shifted
    augmentation outputs); zeroing a single feature alone is still a violation.
    """
    out: list[tuple[str, int | None, str]] = []
    n = len(sample.sizes)
    if len(sample.dirs) != n:
        out.append(("dirs", None, f"length {len(sample.dirs)} != {n}"))
    if len(sample.iats) != n:
        out.append(("iats", None, f"length {len(sample.iats)} != {n}"))
    if out:
        return out  # positional checks are meaningless on ragged series
    if not 1 <= sample.valid_len <= n:
        out.append(("valid_len", None, f"must be in [1, {n}], got {sample.valid_len}"))
        return out
    L = sample.valid_len
    for t in range(n):
        size, d, iat = sample.sizes[t], sample.dirs[t], sample.iats[t]
        if not math.isfinite(iat):
            out.append(("iats", t, "must be finite"))
            continue
        if iat < 0:
            out.append(("iats", t, "must be non-negative"))
        if t < L:
            if allow_masked and size == 0 and d == 0 and iat == 0:
                continue
            if size < 1:
                out.append(("sizes", t, "must be >= 1 before valid_len"))
            if d not in (-1, 1):
                out.append(("dirs", t, "must be -1 or +1 before valid_len"))
        else:
            if size != 0:
                out.append(("sizes", t, "padding must be 0"))
            if d != 0:
                out.append(("dirs", t, "padding must be 0"))
            if iat != 0:
                out.append(("iats", t, "padding must be 0"))
    return out


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of samples plus the label vocabulary.

    class_counts is indexed by label id and always has len(labels) entries,
    so splits keep the full vocabulary even when a class ends up empty.
    """

    samples: tuple[FlowSample, ...]
    labels: tuple[str, ...]
    class_counts: tuple[int, ...]

    @classmethod
    def from_samples(cls, samples, labels) -> "Dataset":
        samples = tuple(samples)
        labels = tuple(str(x) for x in labels)
        if len(set(labels)) != len(labels):
            raise ValueError("label vocabulary contains duplicates")
        counts = [0] * len(labels)
        for s in samples:
            if not 0 <= s.label < len(labels):
                raise ValueError(
                    f"label id {s.label} outside vocabulary of size {len(labels)}"
                )
            counts[s.label] += 1
        return cls(samples, labels, tuple(counts))

    def __len__(self) -> int:
        return len(self.samples)

    def series_len(self) -> int:
        return len(self.samples[0].sizes) if self.samples else DEFAULT_SERIES_LEN

    def class_indices(self) -> list[list[int]]:
        """Per-class lists of sample positions, indexed by label id."""
        out: list[list[int]] = [[] for _ in self.labels]
        for i, s in enumerate(self.samples):
            out[s.label].append(i)
        return out


@dataclass(frozen=True)
class NormConfig:
    """Feature scaling applied before the classifier.

    Sizes are divided by a typical full-segment size; IATs go through
    log1p(iat * 1000) (milliseconds compress the common microsecond-to-second
    span) and are divided by iat_log_scale so ~10 s maps near 1.
    """

    size_divisor: float = 1460.0
    iat_log_scale: float = math.log(1.0 + 10_000.0)

    def __post_init__(self):
        if not (self.size_divisor > 0 and math.isfinite(self.size_divisor)):
            raise ValueError("size_divisor must be positive and finite")
        if not (self.iat_log_scale > 0 and math.isfinite(self.iat_log_scale)):
            raise ValueError("iat_log_scale must be positive and finite")


_DEFAULT_NORM = NormConfig()


def preprocess(sample: FlowSample, norm: NormConfig = _DEFAULT_NORM) -> np.ndarray:
    """Encode one sample as a flat (3N,) float64 vector.

    Layout is [scaled sizes | dirs | scaled IATs]; padding positions stay 0.
    Raises MalformedSampleError on non-finite values.
    """
    return preprocess_batch([sample], norm)[0]


def preprocess_batch(samples, norm: NormConfig = _DEFAULT_NORM) -> np.ndarray:
    """Vectorized preprocess over same-length samples; returns (n, 3N)."""
    try:
        sizes = np.asarray([s.sizes for s in samples], dtype=np.float64)
        dirs = np.asarray([s.dirs for s in samples], dtype=np.float64)
        iats = np.asarray([s.iats for s in samples], dtype=np.float64)
    except ValueError as exc:  # ragged series lengths
        raise MalformedSampleError(f"inconsistent series lengths: {exc}") from None
    if not np.isfinite(iats).all():
        raise MalformedSampleError("non-finite IAT value")
    with np.errstate(invalid="ignore", divide="ignore"):
        iat_block = np.log1p(iats * 1000.0) / norm.iat_log_scale
    if not np.isfinite(iat_block).all():  # iat <= -1 ms, log1p undefined
        raise MalformedSampleError("IAT out of the representable range")
    return np.concatenate(
        [sizes / norm.size_divisor, dirs, iat_block], axis=1
    )
