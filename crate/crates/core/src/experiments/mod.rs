//! Seeded initial data, probability sweeps and level curves.

mod contour;
mod ic;
mod sweep;

pub use contour::{column_extent, contour_extract, Polyline};
pub use ic::{generate_ic, rescale_ic, sample_ic, sub_seed, MAX_RESAMPLE_ATTEMPTS};
pub use sweep::{run_sweep, CellRecord, ProbabilityGrid, SweepConfig, SweepOutcome};
