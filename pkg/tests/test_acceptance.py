"""Acceptance gate: seven criteria covering the whole toolkit at once.

Each test prints a single pass/fail line (visible under `pytest -s`) and
enforces its stated runtime budget, so this module doubles as a quick
health report for the package.
"""

import contextlib
import hashlib
import io
import json
import math
import time
import xml.etree.ElementTree as ET

import numpy as np
import scipy.stats

from flowaug import (
    AUG_KINDS,
    AugmentationSpec,
    Dataset,
    Sampler,
    SamplerConfig,
    apply,
    build_report,
    init_model,
    load,
    load_report_json,
    load_runresult,
    nemenyi_cd,
    rank_rows,
    render_cd_chart,
    save_cd_chart,
    save_report_json,
    save_runresult,
    validate,
)
from flowaug.bench import parse_plan, run
from flowaug.cli import main
from flowaug.model import backward
from flowaug.rng import RngStream
from flowaug.special import chi2_cdf
from flowaug.stats import RunResult, friedman

from util import make_sample, random_dataset, random_sample, sample_tuple


@contextlib.contextmanager
def criterion(number: int, summary: str, budget: float | None = None):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"runtime {elapsed:.1f}s exceeds the {budget:.0f}s budget"
    except BaseException:
        print(f"\ncriterion {number}: FAIL - {summary}")
        raise
    print(f"\ncriterion {number}: PASS - {summary} ({elapsed:.1f}s)")


def random_params(kind: str, rng: RngStream) -> dict:
    """A parameter set drawn uniformly from each op's documented valid range."""
    if kind == "gaussian_noise":
        return {"sigma_rel": float(rng.uniform(0.0, 0.5)),
                "p_size": float(rng.random()), "p_iat": float(rng.random())}
    if kind == "spike_noise":
        return {"sigma_abs": float(rng.uniform(0.0, 0.2)),
                "max_spikes": int(rng.integers(1, 6))}
    if kind == "gaussian_wrapup":
        return {"sigma_mult": float(rng.uniform(0.0, 0.4))}
    if kind == "sine_wrapup":
        amp_lo = float(rng.uniform(0.0, 0.3))
        period_lo = float(rng.uniform(2.0, 10.0))
        return {"amp_range": (amp_lo, amp_lo + float(rng.uniform(0.0, 0.4))),
                "period_range": (period_lo, period_lo + float(rng.uniform(0.0, 15.0)))}
    if kind == "constant_wrapup":
        lo = float(rng.uniform(0.3, 1.2))
        return {"c_range": (lo, lo + float(rng.uniform(0.0, 1.0)))}
    if kind == "bernoulli_mask":
        return {"p_mask": float(rng.uniform(0.0, 0.8))}
    if kind == "window_mask":
        return {"win": int(rng.integers(1, 5))}
    if kind == "packet_loss":
        return {"dt_frac": float(rng.uniform(0.0, 0.9))}
    if kind == "translation":
        return {"k_max": int(rng.integers(1, 6))}
    if kind == "wrap":
        return {"p_edit": float(rng.uniform(0.0, 0.5))}
    if kind == "permutation":
        lo = int(rng.integers(2, 4))
        return {"m_range": (lo, lo + int(rng.integers(0, 3)))}
    if kind == "cutmix":
        lo = int(rng.integers(1, 4))
        return {"len_range": (lo, lo + int(rng.integers(0, 4)))}
    return {}


# Parameter settings that must turn each op into an exact no-op.
IDENTITY_SETTINGS = {
    "gaussian_noise": {"sigma_rel": 0.0},
    "spike_noise": {"sigma_abs": 0.0},
    "gaussian_wrapup": {"sigma_mult": 0.0},
    "sine_wrapup": {"amp_range": (0.0, 0.0)},
    "constant_wrapup": {"c_range": (1.0, 1.0)},
    "bernoulli_mask": {"p_mask": 0.0},
    "wrap": {"p_edit": 0.0},
}


def test_criterion_1_augmentation_invariants():
    with criterion(1, "14 ops x 1000 random samples keep validity, length, label; "
                      "identity parameters are bit-exact no-ops", budget=30.0):
        root = RngStream(20260814)
        for kind in AUG_KINDS:
            krng = root.child("inv", kind)
            identity_spec = (
                AugmentationSpec(kind, IDENTITY_SETTINGS[kind])
                if kind in IDENTITY_SETTINGS else None
            )
            for trial in range(1000):
                sample = random_sample(krng.child("sample", trial), n=20, label=trial % 3)
                spec = AugmentationSpec(kind, random_params(kind, krng.child("params", trial)))
                partner = (
                    random_sample(krng.child("partner", trial), n=20, label=sample.label)
                    if kind == "cutmix" else None
                )
                out = apply(spec, sample, krng.child("apply", trial), partner=partner)
                assert validate(out, allow_masked=True) == [], (kind, trial)
                assert out.series_len() == 20 and out.label == sample.label, (kind, trial)
                if identity_spec is not None:
                    same = apply(identity_spec, sample, krng.child("noop", trial), partner=partner)
                    assert same == sample, (kind, trial)


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        rc = main(list(argv))
    return rc, out.getvalue(), err.getvalue()


def sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


BENCH_PLAN = """\
synth classes=2 total=40 zipf=0.0 series_len=6 seed=1
seeds 0,1
sampler batch_size=16
train epochs=1
method noaug
method name=flip flip
"""


def test_criterion_2_determinism_and_purity(tmp_path):
    with criterion(2, "every op and every subcommand is bit-reproducible under a "
                      "fixed seed and leaves its inputs unmodified", budget=30.0):
        # ops: same child stream -> same output; the input sample never changes
        root = RngStream(99)
        for kind in sorted(AUG_KINDS) + ["identity"]:
            sample = random_sample(root.child("s", kind), n=16)
            before = sample_tuple(sample)
            partner = random_sample(root.child("p", kind), n=16) if kind == "cutmix" else None
            spec = AugmentationSpec(kind)
            a = apply(spec, sample, root.child("rng", kind), partner=partner)
            b = apply(spec, sample, root.child("rng", kind), partner=partner)
            assert a == b, kind
            assert sample_tuple(sample) == before, kind

        # synth: byte-identical datasets and summaries
        rc, out1, _ = run_cli("--seed", "3", "synth", "--out", str(tmp_path / "a.jsonl"),
                              "--classes", "3", "--total", "60", "--series-len", "8")
        assert rc == 0
        rc, out2, _ = run_cli("--seed", "3", "synth", "--out", str(tmp_path / "b.jsonl"),
                              "--classes", "3", "--total", "60", "--series-len", "8")
        assert rc == 0
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert json.loads(out1)["class_counts"] == json.loads(out2)["class_counts"]

        # augment: byte-identical output, input untouched
        src = tmp_path / "a.jsonl"
        src_hash = sha256(src)
        for name in ("x.jsonl", "y.jsonl"):
            rc, _, _ = run_cli("--seed", "7", "augment", "--in", str(src),
                               "--out", str(tmp_path / name), "--aug", "wrap p_edit=0.3")
            assert rc == 0
        assert (tmp_path / "x.jsonl").read_bytes() == (tmp_path / "y.jsonl").read_bytes()
        assert sha256(src) == src_hash

        # train: identical stdout reports
        runs = []
        for _ in range(2):
            rc, out, _ = run_cli("--quiet", "--seed", "5", "train", "--data", str(src),
                                 "--epochs", "2", "--batch-size", "16")
            assert rc == 0
            runs.append(out)
        assert runs[0] == runs[1]
        assert sha256(src) == src_hash

        # bench: byte-identical canonical CSVs on fresh paths
        plan_file = tmp_path / "grid.plan"
        plan_file.write_text(BENCH_PLAN)
        for name in ("r1.csv", "r2.csv"):
            rc, _, _ = run_cli("--quiet", "bench", "--plan", str(plan_file),
                               "--out", str(tmp_path / name))
            assert rc == 0
        assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()

        # cdchart: byte-identical JSON and SVG, results CSV untouched
        results = tmp_path / "r1.csv"
        results_hash = sha256(results)
        pair = []
        for tag in ("1", "2"):
            rc, _, _ = run_cli("--quiet", "cdchart", "--results", str(results),
                               "--out-json", str(tmp_path / f"rep{tag}.json"),
                               "--out-svg", str(tmp_path / f"rep{tag}.svg"))
            assert rc == 0
            pair.append((tmp_path / f"rep{tag}.json", tmp_path / f"rep{tag}.svg"))
        assert pair[0][0].read_bytes() == pair[1][0].read_bytes()
        assert pair[0][1].read_bytes() == pair[1][1].read_bytes()
        assert sha256(results) == results_hash


def test_criterion_3_gradient_check():
    with criterion(3, "analytic gradients match central finite differences on 100 "
                      "random (model, input) pairs within 1e-4 rel / 1e-7 abs", budget=60.0):
        step = 1e-4
        root = RngStream(20240814)
        for trial in range(100):
            rng = root.child("pair", trial)
            in_dim = int(rng.integers(3, 9))
            hidden = (int(rng.integers(3, 11)),)
            k = int(rng.integers(2, 6))
            model = init_model(in_dim, k, rng.child("init"), hidden=hidden)
            x = np.asarray(rng.normal(size=in_dim))
            y = int(rng.integers(0, k))
            _, grads = backward(model, x, y)
            flat = [t for pair in grads for t in pair]
            tensors = [t for pair in zip(model.weights, model.biases) for t in pair]
            for analytic, tensor in zip(flat, tensors):
                it = np.nditer(tensor, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    orig = tensor[idx]
                    tensor[idx] = orig + step
                    lp, _ = backward(model, x, y)
                    tensor[idx] = orig - step
                    lm, _ = backward(model, x, y)
                    tensor[idx] = orig
                    numeric = (lp - lm) / (2.0 * step)
                    a = analytic[idx]
                    tol = 1e-4 * max(abs(a), abs(numeric)) + 1e-7
                    assert abs(a - numeric) <= tol, (trial, idx, a, numeric)
                    it.iternext()


def test_criterion_4_statistics_oracles():
    with criterion(4, "Friedman hand case, 1000-matrix formula cross-check, "
                      "chi-square closed form, Nemenyi CD hand value", budget=10.0):
        # (a) perfectly ordered 3x3 grid
        chi2, p = friedman(np.tile([1.0, 2.0, 3.0], (3, 1)))
        assert chi2 == 6.0
        assert abs(p - math.exp(-3.0)) <= 1e-9

        # (b) independent direct-formula evaluation on 1000 random 4x3 matrices
        rng = RngStream(11)
        for _ in range(1000):
            scores = np.asarray(rng.random((4, 3)))
            ours, _ = friedman(rank_rows(scores))
            ranks = np.vstack([scipy.stats.rankdata(-row, method="average") for row in scores])
            colsums = ranks.sum(axis=0)
            s, k = ranks.shape
            ref = 12.0 / (s * k * (k + 1.0)) * float(np.sum(colsums**2)) - 3.0 * s * (k + 1.0)
            assert abs(ours - ref) <= 1e-12

        # (c) chi-square CDF closed form for df = 2
        for x in (0.1, 1.0, 6.0, 20.0):
            assert abs(chi2_cdf(x, 2) - (1.0 - math.exp(-x / 2.0))) <= 1e-10

        # (d) CD hand value and monotone decay in the seed count
        assert abs(nemenyi_cd(2, 30, 0.05) - 1.960 * math.sqrt(6.0 / 180.0)) <= 1e-9
        cds = [nemenyi_cd(5, s, 0.05) for s in range(2, 200)]
        assert all(a > b for a, b in zip(cds, cds[1:]))


def test_criterion_5_sampler_statistics():
    with criterion(5, "weighted sampler holds the 900/100 minority at 0.5 +- 0.015; "
                      "uniform at 0.1 +- 0.009 over 10000 draws", budget=5.0):
        samples = [make_sample([9], [1], [0.0], n=4, label=0) for _ in range(900)]
        samples += [make_sample([9], [1], [0.0], n=4, label=1) for _ in range(100)]
        dataset = Dataset.from_samples(samples, ["majority", "minority"])
        for mode, target, bound in (("weighted", 0.5, 0.015), ("uniform", 0.1, 0.009)):
            sampler = Sampler(dataset, SamplerConfig(mode=mode, batch_size=100))
            rng = RngStream(2)
            idx = np.concatenate([sampler.draw_indices(100, rng.child(b)) for b in range(100)])
            freq = float(np.mean(idx >= 900))
            assert abs(freq - target) <= bound, (mode, freq)


GRID_PLAN = """\
synth classes=10 total=5000 zipf=1.0 series_len=20 seed=0
seeds 0:9
fractions 0.1 0.15 0.75
sampler batch_size=32
train epochs=20
method noaug
method noaug_nosampler
method translation
method gaussian_noise
method window_mask
"""


def test_criterion_6_directional_benchmark(tmp_path):
    with criterion(6, "5-method x 10-seed grid completes, the CD pipeline emits a "
                      "valid report + SVG, and an augmentation beats noaug on mean "
                      "weighted F1", budget=600.0):
        plan = parse_plan(GRID_PLAN)
        outcome = run(plan, tmp_path / "grid.csv")

        # (a) the grid completes
        assert outcome.failures == ()
        assert outcome.computed == 50
        result = outcome.result
        assert result is not None and result.scores.shape == (10, 5)
        assert load_runresult(tmp_path / "grid.csv") == result

        # (b) the CD pipeline emits a valid report and chart
        report = build_report(result)
        save_report_json(report, tmp_path / "grid.cd.json")
        save_cd_chart(report, tmp_path / "grid.cd.svg")
        assert load_report_json(tmp_path / "grid.cd.json") == report
        root = ET.fromstring((tmp_path / "grid.cd.svg").read_text())
        svg_ns = "{http://www.w3.org/2000/svg}"
        labels = [el for el in root.iter(f"{svg_ns}text") if el.get("class") == "method"]
        assert len(labels) == 5
        assert set(m for g in report.groups for m in g) == set(result.methods)
        assert 0.0 <= report.p_value <= 1.0 and report.cd > 0.0

        # (c) directional claim: some augmentation strictly beats noaug
        means = {m: float(v) for m, v in zip(result.methods, result.scores.mean(axis=0))}
        deltas = {
            name: means[name] - means["noaug"]
            for name in ("translation", "gaussian_noise", "window_mask")
        }
        assert any(delta > 0.0 for delta in deltas.values()), (means, deltas)
        print("\n  mean weighted F1:",
              {m: round(v, 4) for m, v in means.items()},
              "deltas vs noaug:", {m: round(d, 4) for m, d in deltas.items()})


def test_criterion_7_format_round_trips(tmp_path):
    with criterion(7, "load/save identity on 100 random datasets, CSV and report "
                      "JSON round-trips, CLI flip twice restores the input", budget=30.0):
        from flowaug import save

        root = RngStream(77)
        for trial in range(100):
            rng = root.child("ds", trial)
            ds = random_dataset(
                rng,
                n_classes=int(rng.integers(2, 5)),
                per_class=int(rng.integers(3, 9)),
                n=int(rng.integers(4, 17)),
            )
            path = tmp_path / "roundtrip.jsonl"
            save(ds, path)
            again = load(path)
            assert again == ds
            save(again, tmp_path / "again.jsonl")
            assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()

        for trial in range(20):
            rng = root.child("grid", trial)
            result = RunResult(
                ("m0", "m1", "m2"),
                tuple(range(4)),
                np.asarray(rng.random((4, 3))),
            )
            save_runresult(result, tmp_path / "grid.csv")
            assert load_runresult(tmp_path / "grid.csv") == result
            report = build_report(result)
            save_report_json(report, tmp_path / "report.json")
            assert load_report_json(tmp_path / "report.json") == report
            assert render_cd_chart(report) == render_cd_chart(report)

        src = tmp_path / "flows.jsonl"
        rc, _, _ = run_cli("--seed", "4", "synth", "--out", str(src),
                           "--classes", "3", "--total", "60", "--series-len", "8")
        assert rc == 0
        assert run_cli("augment", "--in", str(src), "--out", str(tmp_path / "f1.jsonl"),
                       "--aug", "flip")[0] == 0
        assert run_cli("augment", "--in", str(tmp_path / "f1.jsonl"),
                       "--out", str(tmp_path / "f2.jsonl"), "--aug", "flip")[0] == 0
        assert (tmp_path / "f2.jsonl").read_bytes() == src.read_bytes()
