//! Coarse-grained dynamical structure factors and subsystem fluctuations
//! for free-fermion lattice models.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fluctent;
pub mod models;
pub mod plot;
pub mod region;
pub mod response;
pub mod scaling;
pub mod spectrum;
pub mod structfact;

pub use config::{validate_config, ExperimentConfig};
pub use error::{ConfigIssue, Error, Result};
pub use experiment::{run_experiment, ComputePath, RunOptions, RunRecord};
pub use models::{build_mesh, BandTable, BlochModel, ModelKind, MomentumMesh, Occupation};
pub use region::{Region, RegionSummary};
pub use scaling::{ScalingFit, ScalingLaw, SizeSeries};
pub use spectrum::SpectrumSeries;
