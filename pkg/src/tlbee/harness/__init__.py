"""Experiment orchestration: calibration, sweeps, RNA-seq runs and records."""

from .calibration import CalibrationResult, calibrate_bayes_error
from .config import (
    ExperimentConfig,
    RnaSeqConfig,
    hyper_from_mapping,
    load_experiment_config,
    load_hyper,
    load_rnaseq_config,
)
from .records import (
    CalibrationRecord,
    MseRecord,
    read_calibration_records,
    read_records,
    write_calibration_records,
    write_records,
)
from .sweeps import (
    PriorInstance,
    calibrate_prior,
    draw_prior_instance,
    run_experiment,
    run_fixed_classifier_sweep,
    run_flipped_means_sweep,
    run_obtl_comparison,
)
from .rnaseq import (
    IngestedData,
    ingest_rnaseq_csv,
    read_labeled_csv,
    mse_minimizing_alpha,
    rnaseq_hyper,
    run_rnaseq_alpha_sweep,
    write_standin_csvs,
)
