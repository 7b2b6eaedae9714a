"""Rank statistics for comparing methods across seeds.

Given a complete (seed x method) grid of scores, each seed's scores are
converted to ranks (1 = best, midranks on ties), the Friedman test decides
whether the methods differ at all, and the Nemenyi critical difference says
how far apart two average ranks must be before the difference is credible.
Methods whose average ranks sit within one critical difference form groups,
rendered by cdchart as horizontal bars.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .special import chi2_sf

# Two-tailed Nemenyi constants q_alpha(k) = studentized range quantile at
# infinite df divided by sqrt(2), rounded to 3 decimals. Computed offline by
# two independent routes (quantile inversion and direct quadrature of the
# range distribution) that agree to 1e-6 before rounding.
Q_TABLE: dict[float, dict[int, float]] = {
    0.05: {
        2: 1.960, 3: 2.344, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.948, 8: 3.031,
        9: 3.102, 10: 3.164, 11: 3.219, 12: 3.268, 13: 3.313, 14: 3.354,
        15: 3.391, 16: 3.426, 17: 3.458, 18: 3.489, 19: 3.517, 20: 3.544,
    },
    0.10: {
        2: 1.645, 3: 2.052, 4: 2.291, 5: 2.460, 6: 2.589, 7: 2.693, 8: 2.780,
        9: 2.855, 10: 2.920, 11: 2.978, 12: 3.030, 13: 3.077, 14: 3.120,
        15: 3.159, 16: 3.196, 17: 3.230, 18: 3.261, 19: 3.291, 20: 3.319,
    },
}

CSV_HEADER = ("method", "seed", "weighted_f1")


@dataclass(frozen=True, eq=False)
class RunResult:
    """Complete score grid: scores[i, j] is seed seeds[i] under methods[j]."""

    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    scores: np.ndarray

    def __post_init__(self):
        methods = tuple(str(m) for m in self.methods)
        seeds = tuple(int(s) for s in self.seeds)
        scores = np.asarray(self.scores, dtype=np.float64)
        if len(set(methods)) != len(methods):
            raise ValueError("duplicate method names")
        if len(set(seeds)) != len(seeds):
            raise ValueError("duplicate seeds")
        if len(methods) < 2:
            raise ValueError("need at least 2 methods to compare")
        if len(seeds) < 2:
            raise ValueError("need at least 2 seeds to rank")
        if scores.shape != (len(seeds), len(methods)):
            raise ValueError(
                f"scores shape {scores.shape} does not match "
                f"({len(seeds)} seeds, {len(methods)} methods)"
            )
        if not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        scores.setflags(write=False)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "scores", scores)

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        return (
            self.methods == other.methods
            and self.seeds == other.seeds
            and np.array_equal(self.scores, other.scores)
        )


def _midranks_desc(row: np.ndarray) -> np.ndarray:
    """Ranks within one row, 1 = largest value, ties share the mean position."""
    order = np.argsort(-row, kind="stable")
    ranks = np.empty(row.size, dtype=np.float64)
    sorted_vals = row[order]
    i, pos = 0, 1
    while i < row.size:
        j = i
        while j + 1 < row.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = pos + (j - i) / 2.0  # positions pos..pos+(j-i)
        pos += j - i + 1
        i = j + 1
    return ranks


def rank_rows(scores: np.ndarray) -> np.ndarray:
    """Per-seed method ranks for an (S, k) score matrix; higher score = rank 1."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.vstack([_midranks_desc(row) for row in scores])


def friedman(ranks: np.ndarray, tie_correction: bool = False) -> tuple[float, float]:
    """Friedman chi-square statistic and p-value from an (S, k) rank matrix.

        chi2 = 12 S / (k (k+1)) * (sum_j rbar_j^2 - k (k+1)^2 / 4)

    With tie_correction the statistic is divided by
    1 - sum(t^3 - t) / (S k (k^2 - 1)) over tie groups of size t, the
    variant most published implementations use; the plain statistic is the
    default. The p-value is the chi-square right tail with k - 1 degrees of
    freedom.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.ndim != 2 or ranks.shape[0] < 2 or ranks.shape[1] < 2:
        raise ValueError(f"need an (S >= 2, k >= 2) rank matrix, got {ranks.shape}")
    s, k = ranks.shape
    rbar = ranks.mean(axis=0)
    chi2 = 12.0 * s / (k * (k + 1.0)) * (float(np.sum(rbar**2)) - k * (k + 1.0) ** 2 / 4.0)
    chi2 = max(chi2, 0.0)  # guard the tiny negative from float cancellation
    if tie_correction:
        ties = 0.0
        for row in ranks:
            _, counts = np.unique(row, return_counts=True)
            ties += float(np.sum(counts.astype(np.float64) ** 3 - counts))
        correction = 1.0 - ties / (s * k * (k**2 - 1.0))
        chi2 = 0.0 if correction <= 0.0 else chi2 / correction
    return chi2, chi2_sf(chi2, k - 1)


def nemenyi_cd(k: int, s: int, alpha: float = 0.05) -> float:
    """Critical difference q_alpha(k) * sqrt(k (k+1) / (6 S))."""
    if s < 2:
        raise ValueError(f"need at least 2 seeds, got {s}")
    alpha_key = round(float(alpha), 2)
    table = Q_TABLE.get(alpha_key)
    if table is None:
        supported = ", ".join(f"{a:.2f}" for a in sorted(Q_TABLE))
        raise ValueError(f"alpha {alpha} unsupported; available: {supported}")
    q = table.get(int(k))
    if q is None:
        raise ValueError(f"k = {k} outside the tabulated range 2..20")
    return q * float(np.sqrt(k * (k + 1.0) / (6.0 * s)))


@dataclass(frozen=True)
class CdReport:
    """Everything a critical-difference chart needs, in one value."""

    methods: tuple[str, ...]
    avg_ranks: tuple[float, ...]
    friedman_chi2: float
    p_value: float
    alpha: float
    cd: float
    groups: tuple[tuple[str, ...], ...]


def _cd_groups(
    methods: tuple[str, ...], avg_ranks: np.ndarray, cd: float
) -> tuple[tuple[str, ...], ...]:
    """Maximal runs of rank-adjacent methods whose extremes differ by <= cd.

    Methods are sorted by average rank; an interval qualifies when its last
    and first average ranks differ by at most cd. Intervals contained in a
    longer one are dropped; singletons stay so every method appears in at
    least one group.
    """
    order = np.argsort(avg_ranks, kind="stable")
    sorted_ranks = avg_ranks[order]
    k = len(order)
    intervals: list[tuple[int, int]] = []
    for start in range(k):
        end = start
        while end + 1 < k and sorted_ranks[end + 1] - sorted_ranks[start] <= cd:
            end += 1
        intervals.append((start, end))
    kept: list[tuple[int, int]] = []
    for a, b in intervals:
        if any(a2 <= a and b <= b2 and (a2, b2) != (a, b) for a2, b2 in intervals):
            continue
        kept.append((a, b))
    return tuple(
        tuple(methods[order[i]] for i in range(a, b + 1)) for a, b in kept
    )


def build_report(
    result: RunResult, alpha: float = 0.05, tie_correction: bool = False
) -> CdReport:
    """Ranks, Friedman test and Nemenyi grouping for one score grid."""
    ranks = rank_rows(result.scores)
    chi2, p = friedman(ranks, tie_correction=tie_correction)
    s, k = ranks.shape
    cd = nemenyi_cd(k, s, alpha)
    avg = ranks.mean(axis=0)
    return CdReport(
        methods=result.methods,
        avg_ranks=tuple(float(v) for v in avg),
        friedman_chi2=chi2,
        p_value=p,
        alpha=round(float(alpha), 2),
        cd=cd,
        groups=_cd_groups(result.methods, avg, cd),
    )


# --- persistence ------------------------------------------------------------


def save_runresult(result: RunResult, path) -> None:
    """Write the canonical CSV: header then method-major, seed-minor rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for j, method in enumerate(result.methods):
            for i, seed in enumerate(result.seeds):
                writer.writerow([method, seed, repr(float(result.scores[i, j]))])


def load_runresult(path) -> RunResult:
    """Parse the CSV, rejecting bad headers, duplicates and incomplete grids.

    Method order follows first appearance; seeds are sorted ascending.
    """
    cells: dict[tuple[str, int], float] = {}
    methods: list[str] = []
    seeds_seen: set[int] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {line_no}: expected 3 fields, got {len(row)}")
            method = row[0].strip()
            try:
                seed = int(row[1])
                score = float(row[2])
            except ValueError:
                raise ValueError(f"{path}: row {line_no}: malformed seed or score") from None
            if not np.isfinite(score):
                raise ValueError(f"{path}: row {line_no}: score must be finite")
            key = (method, seed)
            if key in cells:
                raise ValueError(f"{path}: row {line_no}: duplicate cell {method!r} seed {seed}")
            cells[key] = score
            if method not in methods:
                methods.append(method)
            seeds_seen.add(seed)
    seeds = sorted(seeds_seen)
    missing = [
        f"{m!r} seed {s}" for m in methods for s in seeds if (m, s) not in cells
    ]
    if missing:
        raise ValueError(f"{path}: incomplete grid, missing {', '.join(missing)}")
    scores = np.array([[cells[(m, s)] for m in methods] for s in seeds])
    return RunResult(tuple(methods), tuple(seeds), scores)


def report_to_json(report: CdReport) -> str:
    """Serialize with the fixed key set; byte-deterministic for a given report."""
    payload = {
        "avg_ranks": {m: r for m, r in zip(report.methods, report.avg_ranks)},
        "friedman_chi2": report.friedman_chi2,
        "p_value": report.p_value,
        "alpha": report.alpha,
        "cd": report.cd,
        "groups": [list(g) for g in report.groups],
    }
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def save_report_json(report: CdReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_to_json(report))


def load_report_json(path) -> CdReport:
    """Inverse of save_report_json (method order = avg_ranks insertion order)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    expected = {"avg_ranks", "friedman_chi2", "p_value", "alpha", "cd", "groups"}
    if set(payload) != expected:
        raise ValueError(f"{path}: report keys {sorted(payload)} != {sorted(expected)}")
    methods = tuple(payload["avg_ranks"])
    return CdReport(
        methods=methods,
        avg_ranks=tuple(float(payload["avg_ranks"][m]) for m in methods),
        friedman_chi2=float(payload["friedman_chi2"]),
        p_value=float(payload["p_value"]),
        alpha=float(payload["alpha"]),
        cd=float(payload["cd"]),
        groups=tuple(tuple(g) for g in payload["groups"]),
    )
