"""flowaug: packet-series augmentation, training protocol and evaluation.

The package follows the pipeline: dataio synthesizes or loads flow datasets,
augment provides the fourteen transforms, sampling assembles batch-doubled
training batches, model trains and scores the classifier, bench runs the
(method, seed) grid, stats/cdchart turn the grid into a Friedman/Nemenyi
report with a critical-difference chart, and cli fronts it all.
"""

__version__ = "0.1.0"

from .augment import (
    AUG_KINDS,
    KINDS,
    AugmentationSpec,
    FeaturePolicy,
    apply,
    format_spec,
    parse_spec,
)
from .bench import BenchPlan, Method, load_plan, run, run_cell
from .cdchart import render_cd_chart, save_cd_chart
from .dataio import SynthConfig, load, save, split, synthesize
from .flow import (
    DEFAULT_SERIES_LEN,
    Dataset,
    FlowSample,
    MalformedSampleError,
    NormConfig,
    preprocess,
    preprocess_batch,
    validate,
)
from .model import (
    EvalReport,
    MlpModel,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .rng import RngStream, mix_seed
from .sampling import Batch, Sampler, SamplerConfig, make_batch
from .stats import (
    CdReport,
    RunResult,
    build_report,
    friedman,
    load_report_json,
    load_runresult,
    nemenyi_cd,
    rank_rows,
    report_to_json,
    save_report_json,
    save_runresult,
)

__all__ = [
    "__version__",
    "AUG_KINDS",
    "KINDS",
    "AugmentationSpec",
    "FeaturePolicy",
    "apply",
    "format_spec",
    "parse_spec",
    "BenchPlan",
    "Method",
    "load_plan",
    "run",
    "run_cell",
    "render_cd_chart",
    "save_cd_chart",
    "SynthConfig",
    "load",
    "save",
    "split",
    "synthesize",
    "DEFAULT_SERIES_LEN",
    "Dataset",
    "FlowSample",
    "MalformedSampleError",
    "NormConfig",
    "preprocess",
    "preprocess_batch",
    "validate",
    "EvalReport",
    "MlpModel",
    "TrainConfig",
    "TrainingDiverged",
    "evaluate",
    "init_model",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    "RngStream",
    "mix_seed",
    "Batch",
    "Sampler",
    "SamplerConfig",
    "make_batch",
    "CdReport",
    "RunResult",
    "build_report",
    "friedman",
    "load_report_json",
    "load_runresult",
    "nemenyi_cd",
    "rank_rows",
    "report_to_json",
    "save_report_json",
    "save_runresult",
]
