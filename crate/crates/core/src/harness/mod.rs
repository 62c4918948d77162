//! Experiment orchestration: scoring, seeded trials, parallel sweeps with
//! reproducible result files, grouped summaries and SVG heatmaps.
//!
//! A sweep is the Cartesian product of the grids in
//! [`ExperimentConfig::sweep`] times `trials`. Each trial derives its seed from
//! the master seed and the cell's values, so results do not depend on thread
//! count or on which other cells are in the grid. The simulated system
//! (graph, frequencies, initial conditions, noise) depends only on the master
//! seed, `n` and the trial index, so cells of equal size share their systems.

mod config;
mod heatmap;
mod metrics;
mod summary;
mod sweep;
mod trial;

pub use config::{
    splitmix, system_seed, trial_seed, CcmSettings, Cell, EndTime, ExperimentConfig, GcSettings, GraphSpec, GraphType, Method, PciSettings,
    PerturbCount, PerturbOrder, SimSettings, SweepGrid,
};
pub use heatmap::{accuracy_color, render_heatmap};
pub use metrics::{accuracy, spectral_distance};
pub use summary::{summarize, GroupKey, SummaryRow, SummaryTable};
pub use sweep::{results_csv, run_sweep, SweepReport};
pub use trial::{gc_window, parse_results, perturbation_window, run_trial, single_cell, ExperimentRecord, TrialStatus, RESULTS_HEADER};
