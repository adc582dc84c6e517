//! Cropped training, per-recording aggregation, reduced-duration sweeps and
//! moving-average accuracy curves.

mod config;
mod fit;
mod grid;
mod predict;

pub use config::{MinutesLimit, TrainConfig};
pub use fit::{argmax2, train, train_until, EpochStats, TrainLog};
pub use grid::{
    curve_to_tsv, grid_to_tsv, moving_average_accuracy, reduced_duration_grid, CurvePoint, GridCell, SweepMode,
};
pub use predict::{evaluate, limit_all, limit_recording, predict_recording, RecordingPrediction, TrialResult};

#[cfg(test)]
mod tests;
