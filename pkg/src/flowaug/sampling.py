"""Batch construction: class-weighted sampling plus augmentation doubling.

The training protocol pairs a sampler with one augmentation spec. A batch
drawn under a non-identity spec holds B originals followed by their B
augmented derivatives at matching offsets (original i sits at index i, its
derivative at i + B); under the identity spec the batch is simply 2B
originals, so every protocol feeds the optimizer the same 2B samples per
step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import augment
from .augment import AugmentationSpec
from .flow import Dataset, FlowSample
from .rng import RngStream

SAMPLER_MODES = ("weighted", "uniform")


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler mode and nominal batch size B (batches deliver 2B samples)."""

    mode: str = "weighted"
    batch_size: int = 32

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValueError(f"mode must be one of {SAMPLER_MODES}, got {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class Batch:
    """Samples plus a per-entry flag marking augmented derivatives."""

    samples: tuple[FlowSample, ...]
    augmented: tuple[bool, ...]

    def __post_init__(self):
        if len(self.samples) != len(self.augmented):
            raise ValueError("samples and augmented flags must align")

    def __len__(self) -> int:
        return len(self.samples)


class Sampler:
    """Draws dataset indices with replacement.

    weighted mode equalizes class frequencies: each draw picks a class
    uniformly among the K classes, then a member uniformly within it, which
    oversamples minorities relative to their share. uniform mode draws
    indices uniformly over the dataset. Weighted mode requires every class
    to be non-empty (an empty class would make the draw undefined), checked
    at construction.
    """

    def __init__(self, dataset: Dataset, config: SamplerConfig):
        if len(dataset) == 0:
            raise ValueError("cannot sample from an empty dataset")
        self.dataset = dataset
        self.config = config
        self._class_indices = [np.asarray(ix, dtype=np.int64) for ix in dataset.class_indices()]
        if config.mode == "weighted":
            empty = [dataset.labels[c] for c, ix in enumerate(self._class_indices) if ix.size == 0]
            if empty:
                raise ValueError(
                    f"weighted sampling needs every class populated; empty: {', '.join(empty)}"
                )

    def draw_indices(self, count: int, rng: RngStream) -> np.ndarray:
        """Draw `count` dataset indices.

        Draw order (weighted): one class-id vector of length count, then one
        uniform vector of length count mapped to a member index within each
        drawn class. Draw order (uniform): one integer vector of length
        count.
        """
        if self.config.mode == "uniform":
            return np.asarray(rng.integers(0, len(self.dataset), size=count))
        k = len(self._class_indices)
        classes = np.asarray(rng.integers(0, k, size=count))
        u = np.asarray(rng.random(count))
        out = np.empty(count, dtype=np.int64)
        for i in range(count):
            members = self._class_indices[classes[i]]
            out[i] = members[int(u[i] * members.size)]
        return out


def _pick_partner(
    dataset: Dataset,
    batch_samples: list[FlowSample],
    batch_pos: int,
    sampler: Sampler,
    rng: RngStream,
) -> FlowSample:
    """Cutmix partner: a same-class batch mate, else a same-class dataset sample.

    Draw order: one integer over the candidate list (batch mates when any
    exist, otherwise the class's dataset members, which may return the
    original itself for a singleton class).
    """
    label = batch_samples[batch_pos].label
    mates = [s for j, s in enumerate(batch_samples) if j != batch_pos and s.label == label]
    if mates:
        return mates[int(rng.integers(0, len(mates)))]
    members = sampler._class_indices[label]
    return dataset.samples[int(members[int(rng.integers(0, members.size))])]


def make_batch(
    dataset: Dataset,
    config: SamplerConfig,
    spec: AugmentationSpec,
    rng: RngStream,
    sampler: Sampler | None = None,
) -> Batch:
    """Build one protocol batch of 2B samples.

    Identity spec: 2B plain draws, no derivatives. Otherwise B draws, each
    followed (at offset + B) by exactly one augmented derivative produced
    with this rng. Pass a prebuilt Sampler to amortize construction across
    a training run.
    """
    if sampler is None:
        sampler = Sampler(dataset, config)
    b = config.batch_size
    if spec.kind == "identity":
        idx = sampler.draw_indices(2 * b, rng)
        return Batch(tuple(dataset.samples[int(i)] for i in idx), (False,) * (2 * b))
    idx = sampler.draw_indices(b, rng)
    originals = [dataset.samples[int(i)] for i in idx]
    derived: list[FlowSample] = []
    for j, s in enumerate(originals):
        partner = None
        if spec.kind == "cutmix":
            partner = _pick_partner(dataset, originals, j, sampler, rng)
        derived.append(augment.apply(spec, s, rng, partner=partner))
    return Batch(tuple(originals) + tuple(derived), (False,) * b + (True,) * b)
