//! Experiment harness: config-driven grids of (dataset × split × detector
//! × seed), cached per cell, with report emission and the gain, ablation
//! and sensitivity sweeps.

mod config;
mod run;
mod sweep;
mod table;


pub use config::{DatasetSource, DetectorEntry, ExperimentConfig, MetricSettings};
pub use run::{
    cell_hash, run_cells, run_experiment, run_experiment_with, split_label, write_outputs,
    Progress, AGGREGATES_FILE, CELLS_DIR,
};
pub use sweep::{
    ablation_matrix, ablation_variants, gain_sweep, sensitivity_sweep, SensitivityAxis,
    ABLATION_FILE, ABLATION_LABELS, GAIN_FILE, SENSITIVITY_FILE,
};
pub use table::{
    emit_report, load_table, mean_ci, AggregateRow, CellOutcome, ReportFormat, ResultRow,
    ResultsTable, CI_Z,
};
