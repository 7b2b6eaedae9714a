"""Hand-crafted augmentations for packet series.

Fourteen transforms over (sizes, dirs, iats) triples, grouped in three
families:

* amplitude — perturb feature values in place: gaussian_noise, spike_noise,
  gaussian_wrapup, sine_wrapup, constant_wrapup. Which features may change is
  controlled by a FeaturePolicy; direction is structural and is never touched
  by this family.
* masking — zero whole packets: bernoulli_mask, window_mask.
* sequence order — rearrange packets: interpolation, flip, packet_loss,
  translation, wrap, permutation, cutmix.

Every op is a pure function FlowSample -> FlowSample: deterministic given its
RngStream, input untouched, series length and label preserved. Degenerate
inputs (too short, all-zero feature, empty drop set) fall back to returning
the input unchanged instead of raising, so a training loop never dies on an
unlucky sample. Sizes produced by arithmetic are rounded half-up and clamped
to >= 1 at non-masked positions before valid_len; IATs are clamped to >= 0.

Each op's docstring documents its RNG draw order; tests replay those draws
from an identically seeded stream, so the order is part of the contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flow import FlowSample
from .rng import RngStream

# Families (kind name -> family) double as the registry of valid kinds.
AMPLITUDE_KINDS = (
    "gaussian_noise",
    "spike_noise",
    "gaussian_wrapup",
    "sine_wrapup",
    "constant_wrapup",
)
MASKING_KINDS = ("bernoulli_mask", "window_mask")
ORDER_KINDS = (
    "interpolation",
    "flip",
    "packet_loss",
    "translation",
    "wrap",
    "permutation",
    "cutmix",
)
AUG_KINDS = AMPLITUDE_KINDS + MASKING_KINDS + ORDER_KINDS
KINDS = AUG_KINDS + ("identity",)


@dataclass(frozen=True)
class FeaturePolicy:
    """Per-feature alteration probabilities for amplitude ops.

    Default: size and iat each altered with probability 0.5 per call, dir
    never. Amplitude ops ignore p_dir even when positive; it exists so the
    policy names all three features uniformly.
    """

    p_size: float = 0.5
    p_dir: float = 0.0
    p_iat: float = 0.5

    def __post_init__(self):
        for name, p in (("p_size", self.p_size), ("p_dir", self.p_dir), ("p_iat", self.p_iat)):
            if not (isinstance(p, (int, float)) and math.isfinite(p) and 0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {p!r}")


HALF_POLICY = FeaturePolicy()

# Per-kind parameter defaults. Amplitude ops (minus constant_wrapup, which is
# IAT-only by definition) carry their policy probabilities as plain params so
# specs serialize flat.
DEFAULT_PARAMS: dict[str, dict] = {
    "gaussian_noise": {"sigma_rel": 0.1, "p_size": 0.5, "p_iat": 0.5},
    "spike_noise": {
        "sigma_abs": 0.05,
        "max_spikes": 3,
        "size_scale": 1460.0,
        "p_size": 0.5,
        "p_iat": 0.5,
    },
    "gaussian_wrapup": {"sigma_mult": 0.1, "p_size": 0.5, "p_iat": 0.5},
    "sine_wrapup": {
        "amp_range": (0.1, 0.5),
        "period_range": (4.0, 20.0),
        "p_size": 0.5,
        "p_iat": 0.5,
    },
    "constant_wrapup": {"c_range": (0.5, 2.0)},
    "bernoulli_mask": {"p_mask": 0.1},
    "window_mask": {"win": 2},
    "interpolation": {},
    "flip": {},
    "packet_loss": {"dt_frac": 0.2},
    "translation": {"k_max": 3},
    "wrap": {"p_edit": 0.15},
    "permutation": {"m_range": (2, 4)},
    "cutmix": {"len_range": (2, 6)},
    "identity": {},
}

_RANGE_PARAMS = {"amp_range", "period_range", "c_range", "m_range", "len_range"}
_INT_PARAMS = {"max_spikes", "win", "k_max"}


def _check_range(name: str, lo, hi, minimum, integral: bool) -> None:
    if integral and not (float(lo).is_integer() and float(hi).is_integer()):
        raise ValueError(f"{name} bounds must be integers, got {lo}:{hi}")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
        raise ValueError(f"{name} must satisfy lo <= hi, got {lo}:{hi}")
    if lo < minimum:
        raise ValueError(f"{name} lower bound must be >= {minimum}, got {lo}")


def _validate_params(kind: str, params: dict) -> None:
    def pos(name, minimum=0.0):
        v = params[name]
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= minimum):
            raise ValueError(f"{kind}: {name} must be >= {minimum}, got {v!r}")

    for key in ("p_size", "p_iat"):
        if key in params and not 0.0 <= params[key] <= 1.0:
            raise ValueError(f"{kind}: {key} must be in [0, 1], got {params[key]!r}")
    if kind == "gaussian_noise":
        pos("sigma_rel")
    elif kind == "spike_noise":
        pos("sigma_abs")
        if params["max_spikes"] < 1:
            raise ValueError(f"{kind}: max_spikes must be >= 1")
        pos("size_scale", minimum=1e-12)
    elif kind == "gaussian_wrapup":
        pos("sigma_mult")
    elif kind == "sine_wrapup":
        _check_range("amp_range", *params["amp_range"], minimum=0.0, integral=False)
        _check_range("period_range", *params["period_range"], minimum=1e-9, integral=False)
    elif kind == "constant_wrapup":
        _check_range("c_range", *params["c_range"], minimum=0.0, integral=False)
    elif kind == "bernoulli_mask":
        if not 0.0 <= params["p_mask"] <= 1.0:
            raise ValueError(f"{kind}: p_mask must be in [0, 1]")
    elif kind == "window_mask":
        if params["win"] < 1:
            raise ValueError(f"{kind}: win must be >= 1")
    elif kind == "packet_loss":
        if not 0.0 <= params["dt_frac"] <= 1.0:
            raise ValueError(f"{kind}: dt_frac must be in [0, 1]")
    elif kind == "translation":
        if params["k_max"] < 1:
            raise ValueError(f"{kind}: k_max must be >= 1")
    elif kind == "wrap":
        # keep-probability is 1 - 2 * p_edit, so p_edit past one half is meaningless
        if not 0.0 <= params["p_edit"] <= 0.5:
            raise ValueError(f"{kind}: p_edit must be in [0, 0.5], got {params['p_edit']!r}")
    elif kind == "permutation":
        _check_range("m_range", *params["m_range"], minimum=1, integral=True)
    elif kind == "cutmix":
        _check_range("len_range", *params["len_range"], minimum=1, integral=True)


@dataclass(frozen=True)
class AugmentationSpec:
    """A kind name plus fully resolved parameters.

    Missing parameters take the documented defaults; unknown names and
    out-of-range values are rejected at construction.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DEFAULT_PARAMS:
            raise ValueError(
                f"unknown augmentation kind {self.kind!r}; valid kinds: {', '.join(KINDS)}"
            )
        merged = dict(DEFAULT_PARAMS[self.kind])
        unknown = sorted(set(self.params) - set(merged))
        if unknown:
            raise ValueError(
                f"{self.kind}: unknown parameter(s) {', '.join(unknown)}; "
                f"valid: {', '.join(sorted(merged)) or '(none)'}"
            )
        for key, value in self.params.items():
            if key in _RANGE_PARAMS:
                lo, hi = value
                if key in ("m_range", "len_range"):
                    if not (float(lo).is_integer() and float(hi).is_integer()):
                        raise ValueError(f"{self.kind}: {key} bounds must be integers, got {lo}:{hi}")
                    value = (int(lo), int(hi))
                else:
                    value = (float(lo), float(hi))
            elif key in _INT_PARAMS:
                if not float(value).is_integer():
                    raise ValueError(f"{self.kind}: {key} must be an integer, got {value!r}")
                value = int(value)
            else:
                value = float(value)
            merged[key] = value
        _validate_params(self.kind, merged)
        object.__setattr__(self, "params", merged)


def format_spec(spec: AugmentationSpec) -> str:
    """Render as `kind key=value ...` with ranges as lo:hi; parse_spec inverts."""
    parts = [spec.kind]
    for key in DEFAULT_PARAMS[spec.kind]:  # fixed order for byte determinism
        value = spec.params[key]
        if key in _RANGE_PARAMS:
            lo, hi = value
            parts.append(f"{key}={_fmt_num(lo)}:{_fmt_num(hi)}")
        else:
            parts.append(f"{key}={_fmt_num(value)}")
    return " ".join(parts)


def _fmt_num(v) -> str:
    if isinstance(v, int) or (isinstance(v, float) and v.is_integer() and abs(v) < 1e15):
        return str(int(v))
    return repr(float(v))


def _parse_num(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_spec(text: str) -> AugmentationSpec:
    """Parse the `kind key=value ...` form produced by format_spec."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty augmentation spec")
    kind, params = tokens[0], {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValueError(f"malformed spec token {tok!r}, expected key=value")
        key, _, raw = tok.partition("=")
        try:
            if ":" in raw:
                lo, _, hi = raw.partition(":")
                params[key] = (_parse_num(lo), _parse_num(hi))
            else:
                params[key] = _parse_num(raw)
        except ValueError:
            raise ValueError(f"malformed value for {key!r}: {raw!r}") from None
    return AugmentationSpec(kind, params)


# --- shared helpers ---------------------------------------------------------


def _arrays(sample: FlowSample):
    return (
        np.array(sample.sizes, dtype=np.float64),
        np.array(sample.dirs, dtype=np.int64),
        np.array(sample.iats, dtype=np.float64),
    )


def _result(sample: FlowSample, sizes, dirs, iats, valid_len=None) -> FlowSample:
    return FlowSample(
        tuple(int(v) for v in sizes),
        tuple(int(v) for v in dirs),
        tuple(float(v) for v in iats),
        sample.valid_len if valid_len is None else int(valid_len),
        sample.label,
    )


def _round_sizes(values):
    """Round half-up and clamp to >= 1 (valid packets carry at least a header)."""
    return np.maximum(1.0, np.floor(np.asarray(values, dtype=np.float64) + 0.5))


def _gates(policy: FeaturePolicy, rng: RngStream) -> dict[str, bool]:
    """Draw the per-feature gates, once per call, in (size, dir, iat) order.

    Probabilities of exactly 0 or 1 are decided without consuming a draw, so
    deterministic policies keep replay simple.
    """
    gates = {}
    for name, p in (("size", policy.p_size), ("dir", policy.p_dir), ("iat", policy.p_iat)):
        if p <= 0.0:
            gates[name] = False
        elif p >= 1.0:
            gates[name] = True
        else:
            gates[name] = bool(rng.random() < p)
    return gates


def _active(sizes, dirs, iats, L) -> np.ndarray:
    """Non-masked positions of the valid prefix (boolean, length L)."""
    pre = slice(0, L)
    return ~((sizes[pre] == 0) & (dirs[pre] == 0) & (iats[pre] == 0))


# --- amplitude family -------------------------------------------------------


def gaussian_noise(
    sample: FlowSample,
    policy: FeaturePolicy = HALF_POLICY,
    sigma_rel: float = 0.1,
    rng: RngStream = None,
) -> FlowSample:
    """Add zero-mean Gaussian noise scaled by each gated feature's own spread.

    Noise std is sigma_rel times the std of the feature over the valid
    prefix; a constant feature (std 0) therefore passes through unchanged.
    Draw order: gates, then per gated feature (size first, iat second) one
    normal vector of length valid_len.
    """
    gates = _gates(policy, rng)
    L = sample.valid_len
    sizes, dirs, iats = _arrays(sample)
    act = _active(sizes, dirs, iats, L)
    if gates["size"]:
        noise = rng.normal(0.0, sigma_rel * float(np.std(sizes[:L])), size=L)
        sizes[:L] = np.where(act, _round_sizes(sizes[:L] + noise), sizes[:L])
    if gates["iat"]:
        noise = rng.normal(0.0, sigma_rel * float(np.std(iats[:L])), size=L)
        iats[:L] = np.where(act, np.maximum(0.0, iats[:L] + noise), iats[:L])
    return _result(sample, sizes, dirs, iats)


def spike_noise(
    sample: FlowSample,
    policy: FeaturePolicy = HALF_POLICY,
    sigma_abs: float = 0.05,
    max_spikes: int = 3,
    size_scale: float = 1460.0,
    rng: RngStream = None,
) -> FlowSample:
    """Add positive half-Gaussian spikes at a few non-zero positions.

    Per gated feature: spike count k ~ U{1..min(max_spikes, nonzero count)},
    positions drawn without replacement among the feature's non-zero prefix
    entries, magnitudes |N(0, sigma)| with sigma = sigma_abs * size_scale for
    sizes and sigma_abs (seconds) for IATs. An all-zero feature is left alone.
    Draw order: gates, then per gated feature (size, then iat): k, positions,
    magnitudes.
    """
    gates = _gates(policy, rng)
    L = sample.valid_len
    sizes, dirs, iats = _arrays(sample)

    def spike(x, sigma, is_size):
        nz = np.flatnonzero(x[:L])
        if nz.size == 0:
            return
        k = int(rng.integers(1, min(max_spikes, nz.size) + 1))
        pos = rng.choice(nz, size=k, replace=False)
        eps = np.abs(rng.normal(0.0, sigma, size=k))
        x[pos] = _round_sizes(x[pos] + eps) if is_size else x[pos] + eps

    if gates["size"]:
        spike(sizes, sigma_abs * size_scale, True)
    if gates["iat"]:
        spike(iats, sigma_abs, False)
    return _result(sample, sizes, dirs, iats)


def gaussian_wrapup(
    sample: FlowSample,
    policy: FeaturePolicy = HALF_POLICY,
    sigma_mult: float = 0.1,
    rng: RngStream = None,
) -> FlowSample:
    """Multiply each prefix value by its own N(1, sigma_mult) factor.

    Factors are clamped to >= 0 so values keep their sign; zero entries stay
    zero. Draw order: gates, then one factor vector of length valid_len per
    gated feature (size first, iat second).
    """
    gates = _gates(policy, rng)
    L = sample.valid_len
    sizes, dirs, iats = _arrays(sample)
    if gates["size"]:
        g = np.maximum(0.0, rng.normal(1.0, sigma_mult, size=L))
        sizes[:L] = np.where(sizes[:L] > 0, _round_sizes(sizes[:L] * g), sizes[:L])
    if gates["iat"]:
        g = np.maximum(0.0, rng.normal(1.0, sigma_mult, size=L))
        iats[:L] = iats[:L] * g
    return _result(sample, sizes, dirs, iats)


def sine_wrapup(
    sample: FlowSample,
    policy: FeaturePolicy = HALF_POLICY,
    amp_range: tuple[float, float] = (0.1, 0.5),
    period_range: tuple[float, float] = (4.0, 20.0),
    rng: RngStream = None,
) -> FlowSample:
    """Modulate the prefix with 1 + A sin(2 pi t / T + phi).

    Per gated feature (size first, iat second) draws A ~ U(amp_range),
    T ~ U(period_range), phi ~ U(0, 2 pi), then applies the multiplier at
    positions t = 0..valid_len-1, clamping products to >= 0.
    """
    gates = _gates(policy, rng)
    L = sample.valid_len
    sizes, dirs, iats = _arrays(sample)
    t = np.arange(L, dtype=np.float64)

    def modulator():
        amp = rng.uniform(amp_range[0], amp_range[1])
        period = rng.uniform(period_range[0], period_range[1])
        phase = rng.uniform(0.0, 2.0 * math.pi)
        return 1.0 + amp * np.sin(2.0 * math.pi * t / period + phase)

    if gates["size"]:
        m = modulator()
        vals = np.maximum(0.0, sizes[:L] * m)
        sizes[:L] = np.where(sizes[:L] > 0, _round_sizes(vals), sizes[:L])
    if gates["iat"]:
        m = modulator()
        iats[:L] = np.maximum(0.0, iats[:L] * m)
    return _result(sample, sizes, dirs, iats)


def constant_wrapup(
    sample: FlowSample,
    c_range: tuple[float, float] = (0.5, 2.0),
    rng: RngStream = None,
) -> FlowSample:
    """Scale every IAT by one constant c ~ U(c_range); a global tempo change.

    IAT-only by definition (sizes and dirs untouched); draw order: the single
    c.
    """
    c = float(rng.uniform(c_range[0], c_range[1]))
    L = sample.valid_len
    sizes, dirs, iats = _arrays(sample)
    iats[:L] = iats[:L] * c
    return _result(sample, sizes, dirs, iats)


# --- masking family ---------------------------------------------------------


def bernoulli_mask(
    sample: FlowSample, p_mask: float = 0.1, rng: RngStream = None
) -> FlowSample:
    """Zero whole packets independently with probability p_mask.

    Draw order: one uniform vector of length valid_len; position t is masked
    when u[t] < p_mask. Masking keeps valid_len (masked packets are holes,
    not deletions).
    """
    L = sample.valid_len
    u = np.asarray(rng.random(L))
    mask = u < p_mask
    if not mask.any():
        return sample
    sizes, dirs, iats = _arrays(sample)
    sizes[:L][mask] = 0
    dirs[:L][mask] = 0
    iats[:L][mask] = 0.0
    return _result(sample, sizes, dirs, iats)


def window_mask(sample: FlowSample, win: int = 2, rng: RngStream = None) -> FlowSample:
    """Zero one contiguous window of win packets inside the valid prefix.

    Draw order: start ~ U{0..valid_len - win}. Windows never cross into the
    padding; a prefix shorter than win is returned unchanged.
    """
    L = sample.valid_len
    if L < win:
        return sample
    start = int(rng.integers(0, L - win + 1))
    sizes, dirs, iats = _arrays(sample)
    sizes[start : start + win] = 0
    dirs[start : start + win] = 0
    iats[start : start + win] = 0.0
    return _result(sample, sizes, dirs, iats)


# --- sequence-order family --------------------------------------------------


def _midpoint(sizes, dirs, iats, i, j):
    """Feature-wise midpoint packet: mean size (rounded), left dir, mean IAT."""
    mean = (sizes[i] + sizes[j]) / 2.0
    size = float(_round_sizes(mean)) if mean > 0 else 0.0
    return size, int(dirs[i]), (iats[i] + iats[j]) / 2.0


def interpolation(sample: FlowSample, rng: RngStream = None) -> FlowSample:
    """Insert a midpoint packet between every neighbouring prefix pair.

    The expanded series has 2L - 1 packets; when that exceeds the series
    length N, a window of N packets is kept starting at
    s ~ U{0..2L - 1 - N}. Draw order: the single s (drawn only when the
    expansion overflows). Prefixes shorter than 2 are returned unchanged.
    """
    L = sample.valid_len
    if L < 2:
        return sample
    n = sample.series_len()
    sizes, dirs, iats = _arrays(sample)
    m = 2 * L - 1
    ex_sizes = np.zeros(m)
    ex_dirs = np.zeros(m, dtype=np.int64)
    ex_iats = np.zeros(m)
    ex_sizes[0::2], ex_dirs[0::2], ex_iats[0::2] = sizes[:L], dirs[:L], iats[:L]
    for i in range(L - 1):
        ex_sizes[2 * i + 1], ex_dirs[2 * i + 1], ex_iats[2 * i + 1] = _midpoint(
            sizes, dirs, iats, i, i + 1
        )
    if m > n:
        start = int(rng.integers(0, m - n + 1))
    else:
        start = 0
    keep = min(m - start, n)
    out_sizes = np.zeros(n)
    out_dirs = np.zeros(n, dtype=np.int64)
    out_iats = np.zeros(n)
    out_sizes[:keep] = ex_sizes[start : start + keep]
    out_dirs[:keep] = ex_dirs[start : start + keep]
    out_iats[:keep] = ex_iats[start : start + keep]
    return _result(sample, out_sizes, out_dirs, out_iats, valid_len=keep)


def flip(sample: FlowSample) -> FlowSample:
    """Reverse the valid prefix in time; deterministic, its own inverse.

    Sizes and dirs are plainly reversed. IATs transform as gap reversal:
    iats'[0] = 0 and iats'[t] = iats[L - t] for 0 < t < L, which inverts
    itself when iats[0] is 0 (the storage convention).
    """
    L = sample.valid_len
    sizes, dirs, iats = _arrays(sample)
    sizes[:L] = sizes[:L][::-1]
    dirs[:L] = dirs[:L][::-1]
    new_iats = iats.copy()
    new_iats[0] = 0.0
    for t in range(1, L):
        new_iats[t] = iats[L - t]
    return _result(sample, sizes, dirs, new_iats)


def packet_loss(
    sample: FlowSample, dt_frac: float = 0.2, rng: RngStream = None
) -> FlowSample:
    """Drop every packet inside a random time window of the flow.

    Arrival times are the IAT prefix sums; the window spans
    [tau, tau + dt_frac * D) with tau ~ U(0, D * (1 - dt_frac)) where D is
    the prefix duration. Survivors are re-packed to the front, IATs
    recomputed from surviving arrivals (first survivor gets 0) and valid_len
    shrinks accordingly. Degenerate cases (dt_frac = 0, zero duration, empty
    window, window swallowing everything) return the input unchanged. Draw
    order: the single tau (drawn only when duration is positive).
    """
    L = sample.valid_len
    if dt_frac <= 0.0:
        return sample
    sizes, dirs, iats = _arrays(sample)
    arrivals = np.cumsum(iats[:L])
    duration = float(arrivals[-1])
    if duration <= 0.0:
        return sample
    width = dt_frac * duration
    tau = float(rng.uniform(0.0, duration - width))
    drop = (arrivals >= tau) & (arrivals < tau + width)
    if not drop.any() or drop.all():
        return sample
    keep = ~drop
    surv = arrivals[keep]
    n = sample.series_len()
    count = int(keep.sum())
    out_sizes = np.zeros(n)
    out_dirs = np.zeros(n, dtype=np.int64)
    out_iats = np.zeros(n)
    out_sizes[:count] = sizes[:L][keep]
    out_dirs[:count] = dirs[:L][keep]
    out_iats[:count] = np.diff(surv, prepend=surv[0])
    return _result(sample, out_sizes, out_dirs, out_iats, valid_len=count)


def translation(
    sample: FlowSample, k_max: int = 3, rng: RngStream = None
) -> FlowSample:
    """Shift the prefix k packets left (drop head) or right (zero-pad front).

    Draw order: k ~ U{1..k_max}, then one uniform (< 0.5 means left). Left
    shift drops the first k packets, re-anchors the first surviving IAT to 0
    and shrinks valid_len; shifting the whole prefix away is identity
    instead. Right shift inserts k masked packets in front (valid_len grows,
    capped at N; trailing packets past N are cut); k >= N would leave no real
    packet, so it is identity too.
    """
    L = sample.valid_len
    n = sample.series_len()
    k = int(rng.integers(1, k_max + 1))
    left = bool(rng.random() < 0.5)
    sizes, dirs, iats = _arrays(sample)
    out_sizes = np.zeros(n)
    out_dirs = np.zeros(n, dtype=np.int64)
    out_iats = np.zeros(n)
    if left:
        if k >= L:
            return sample
        count = L - k
        out_sizes[:count] = sizes[k:L]
        out_dirs[:count] = dirs[k:L]
        out_iats[:count] = iats[k:L]
        out_iats[0] = 0.0
        return _result(sample, out_sizes, out_dirs, out_iats, valid_len=count)
    if k >= n:
        return sample
    keep = min(L, n - k)
    out_sizes[k : k + keep] = sizes[:keep]
    out_dirs[k : k + keep] = dirs[:keep]
    out_iats[k : k + keep] = iats[:keep]
    return _result(sample, out_sizes, out_dirs, out_iats, valid_len=min(L + k, n))


def wrap(sample: FlowSample, p_edit: float = 0.15, rng: RngStream = None) -> FlowSample:
    """Per-packet stochastic insert/drop/keep pass over the prefix.

    Draw order: one uniform vector u of length valid_len. Packet t is kept
    and followed by a midpoint with its right neighbour (itself at the end)
    when u[t] < p_edit; dropped when p_edit <= u[t] < 2 * p_edit; kept alone
    otherwise. The rebuilt series is cropped to N and valid_len updated;
    dropping everything falls back to identity.
    """
    L = sample.valid_len
    n = sample.series_len()
    u = np.asarray(rng.random(L))
    sizes, dirs, iats = _arrays(sample)
    triples: list[tuple[float, int, float]] = []
    for t in range(L):
        if u[t] < p_edit:
            triples.append((sizes[t], dirs[t], iats[t]))
            nxt = t + 1 if t + 1 < L else t
            triples.append(_midpoint(sizes, dirs, iats, t, nxt))
        elif u[t] < 2.0 * p_edit:
            continue
        else:
            triples.append((sizes[t], dirs[t], iats[t]))
    if not triples:
        return sample
    count = min(len(triples), n)
    out_sizes = np.zeros(n)
    out_dirs = np.zeros(n, dtype=np.int64)
    out_iats = np.zeros(n)
    for i in range(count):
        out_sizes[i], out_dirs[i], out_iats[i] = triples[i]
    return _result(sample, out_sizes, out_dirs, out_iats, valid_len=count)


def permutation(
    sample: FlowSample, m_range: tuple[int, int] = (2, 4), rng: RngStream = None
) -> FlowSample:
    """Cut the prefix into m contiguous segments and shuffle their order.

    Draw order: m ~ U{m_range} (capped at valid_len), then m - 1 distinct cut
    points from {1..valid_len - 1}, then a permutation of the m segments,
    resampled once if it comes out as the identity (it may stand if drawn
    twice). Prefixes shorter than 2 pass through.
    """
    L = sample.valid_len
    if L < 2:
        return sample
    m = min(int(rng.integers(m_range[0], m_range[1] + 1)), L)
    if m < 2:
        return sample
    cuts = np.sort(rng.choice(np.arange(1, L), size=m - 1, replace=False))
    bounds = [0, *[int(c) for c in cuts], L]
    perm = np.asarray(rng.permutation(m))
    if np.array_equal(perm, np.arange(m)):
        perm = np.asarray(rng.permutation(m))
    sizes, dirs, iats = _arrays(sample)
    segments = [
        (sizes[bounds[i] : bounds[i + 1]], dirs[bounds[i] : bounds[i + 1]], iats[bounds[i] : bounds[i + 1]])
        for i in range(m)
    ]
    new_sizes = np.concatenate([segments[j][0] for j in perm])
    new_dirs = np.concatenate([segments[j][1] for j in perm])
    new_iats = np.concatenate([segments[j][2] for j in perm])
    sizes[:L], dirs[:L], iats[:L] = new_sizes, new_dirs, new_iats
    return _result(sample, sizes, dirs, iats)


def cutmix(
    sample: FlowSample,
    partner: FlowSample,
    len_range: tuple[int, int] = (2, 6),
    rng: RngStream = None,
) -> FlowSample:
    """Overwrite a window of the sample with the same window from a partner.

    Both samples must share a label (mixing classes would corrupt the
    supervision). Window length W ~ U{len_range} capped at the shorter valid
    prefix, start s ~ U{0..min(La, Lb) - W}; the output keeps the sample's
    valid_len and label. A partner whose prefix is shorter than the minimum
    window (or the sample itself) degrades to identity-like behaviour.
    Draw order: W, then s.
    """
    if sample.label != partner.label:
        raise ValueError(
            f"cutmix requires matching labels, got {sample.label} and {partner.label}"
        )
    lo, hi = len_range
    l_min = min(sample.valid_len, partner.valid_len)
    if l_min < lo:
        return sample
    width = min(int(rng.integers(lo, hi + 1)), l_min)
    start = int(rng.integers(0, l_min - width + 1))
    sizes, dirs, iats = _arrays(sample)
    p_sizes, p_dirs, p_iats = _arrays(partner)
    sl = slice(start, start + width)
    sizes[sl], dirs[sl], iats[sl] = p_sizes[sl], p_dirs[sl], p_iats[sl]
    return _result(sample, sizes, dirs, iats)


# --- dispatch ---------------------------------------------------------------


def _amp_policy(params: dict) -> FeaturePolicy:
    return FeaturePolicy(p_size=params["p_size"], p_dir=0.0, p_iat=params["p_iat"])


def apply(
    spec: AugmentationSpec,
    sample: FlowSample,
    rng: RngStream,
    partner: FlowSample | None = None,
) -> FlowSample:
    """Apply one spec to one sample; cutmix additionally needs a partner."""
    kind, p = spec.kind, spec.params
    if kind == "identity":
        return sample
    if kind == "gaussian_noise":
        return gaussian_noise(sample, _amp_policy(p), p["sigma_rel"], rng)
    if kind == "spike_noise":
        return spike_noise(
            sample, _amp_policy(p), p["sigma_abs"], p["max_spikes"], p["size_scale"], rng
        )
    if kind == "gaussian_wrapup":
        return gaussian_wrapup(sample, _amp_policy(p), p["sigma_mult"], rng)
    if kind == "sine_wrapup":
        return sine_wrapup(sample, _amp_policy(p), p["amp_range"], p["period_range"], rng)
    if kind == "constant_wrapup":
        return constant_wrapup(sample, p["c_range"], rng)
    if kind == "bernoulli_mask":
        return bernoulli_mask(sample, p["p_mask"], rng)
    if kind == "window_mask":
        return window_mask(sample, p["win"], rng)
    if kind == "interpolation":
        return interpolation(sample, rng)
    if kind == "flip":
        return flip(sample)
    if kind == "packet_loss":
        return packet_loss(sample, p["dt_frac"], rng)
    if kind == "translation":
        return translation(sample, p["k_max"], rng)
    if kind == "wrap":
        return wrap(sample, p["p_edit"], rng)
    if kind == "permutation":
        return permutation(sample, p["m_range"], rng)
    if kind == "cutmix":
        if partner is None:
            raise ValueError("cutmix requires a partner sample")
        return cutmix(sample, partner, p["len_range"], rng)
    raise AssertionError(f"unhandled kind {kind!r}")
