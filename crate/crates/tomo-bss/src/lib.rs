//! Blind separation of layered scatterers in multibaseline InSAR stacks.
//!
//! When two elevated scatterers fall into the same range-azimuth cell
//! (layover), their interferometric responses mix and plain eigenvector
//! analysis of the covariance returns biased steering vectors — badly so
//! when the scatterers have similar power or sub-Rayleigh separation. This
//! crate implements a sequential kernel-PCA separation that extracts one
//! scatterer at a time from the sample covariance, subtracts its rank-one
//! contribution, and optionally re-polishes pairs on a noise-corrected
//! covariance, plus everything needed around it:
//!
//! - [`model`]: acquisition geometry, steering vectors, exact covariances;
//! - [`simulate`]: seeded Swerling-II stack generation and Monte Carlo;
//! - [`covariance`]: sample/sign covariance estimators, kernel centering;
//! - [`kernel`]: linear, polynomial, and Gaussian kernels on covariance
//!   columns;
//! - [`separation`]: PCA baseline, dominant-component extraction, intensity
//!   estimation, deflation, and the full separation loop;
//! - [`estimation`]: periodogram elevation estimation and quality metrics;
//! - [`experiment`]: parameter sweeps with CSV/JSON reporting;
//! - [`io`]: the binary matrix file format.

pub mod covariance;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod separation;
pub mod simulate;

pub use error::{Error, Result};
pub use estimation::{
    angular_bias_deg, ensemble_coherence, per_baseline_phase_bias, periodogram,
    relative_angular_bias, AxisSpec, PeriodogramGrid, PeriodogramPeak,
};
pub use kernel::{Bandwidth, KernelSpec};
pub use linalg::{C64, CMatrix, CVector};
pub use model::{
    default_geometry, model_covariance, steering_vector, AcquisitionGeometry, ScattererParams,
};
pub use separation::{
    deflate, estimate_model_order, kpca_dominant, pca_components, rayleigh_intensity,
    separate_scatterers, ScattererEstimate, SeparationConfig, SeparationResult,
};
pub use simulate::{draw_stack, monte_carlo, MonteCarloSummary, SimulationConfig};
