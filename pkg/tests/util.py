"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from flowaug import Dataset, FlowSample
from flowaug.rng import RngStream


def make_sample(sizes, dirs, iats, valid_len=None, label=0, n=None) -> FlowSample:
    """Build a sample, zero-padding the series out to n when given."""
    sizes, dirs, iats = list(sizes), list(dirs), list(iats)
    if valid_len is None:
        valid_len = len(sizes)
    if n is not None:
        pad = n - len(sizes)
        sizes += [0] * pad
        dirs += [0] * pad
        iats += [0.0] * pad
    return FlowSample.from_arrays(sizes, dirs, iats, valid_len, label)


def random_sample(rng: RngStream, n: int = 20, label: int = 0) -> FlowSample:
    """A well-formed random sample honoring the iats[0] = 0 convention."""
    valid_len = int(rng.integers(1, n + 1))
    sizes = [int(v) for v in rng.integers(1, 1501, size=valid_len)]
    dirs = [1 if v < 0.5 else -1 for v in rng.random(valid_len)]
    iats = [0.0] + [float(v) for v in rng.uniform(0.0, 0.25, size=valid_len - 1)]
    return make_sample(sizes, dirs, iats, valid_len=valid_len, label=label, n=n)


def random_dataset(rng: RngStream, n_classes: int = 3, per_class: int = 12, n: int = 20) -> Dataset:
    samples = [
        random_sample(rng, n=n, label=c) for c in range(n_classes) for _ in range(per_class)
    ]
    return Dataset.from_samples(samples, [f"c{c}" for c in range(n_classes)])


def sample_tuple(s: FlowSample):
    return (s.sizes, s.dirs, s.iats, s.valid_len, s.label)


def prefix_multiset(s: FlowSample):
    """Multiset of (size, dir) pairs over the valid prefix (IATs shift around)."""
    return sorted(zip(s.sizes[: s.valid_len], s.dirs[: s.valid_len]))
