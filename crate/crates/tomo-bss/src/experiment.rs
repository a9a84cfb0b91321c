//! Configuration-driven simulation studies: parameter sweeps of amplitude
//! ratio, scatterer distance, SNR, and kernel parameters, each evaluated over
//! seeded Monte Carlo stacks (or the exact model covariance), with CSV/JSON
//! output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::sample_covariance;
use crate::error::{Error, Result};
use crate::estimation::{angular_bias_deg, ensemble_coherence, match_to_references};
use crate::kernel::KernelSpec;
use crate::linalg::{CMatrix, CVector};
use crate::model::{model_covariance, steering_vector};
use crate::separation::{pca_components, separate_scatterers, ScattererEstimate, SeparationConfig};
use crate::simulate::{draw_stack, splitmix64, SimulationConfig};

/// Estimators an experiment can compare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    /// Plain eigenvector baseline: the top-K eigenvectors of the covariance,
    /// eigenvalues as intensities.
    Pca,
    KpcaGaussian { beta: f64 },
    KpcaPoly { order: f64 },
}

impl EstimatorSpec {
    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Pca => "pca".to_string(),
            EstimatorSpec::KpcaGaussian { beta } => format!("kpca-gaussian(beta={beta})"),
            EstimatorSpec::KpcaPoly { order } => format!("kpca-poly(order={order})"),
        }
    }

    fn kernel(&self) -> Option<KernelSpec> {
        match self {
            EstimatorSpec::Pca => None,
            EstimatorSpec::KpcaGaussian { beta } => Some(KernelSpec::gaussian(*beta)),
            EstimatorSpec::KpcaPoly { order } => Some(KernelSpec::polynomial(*order)),
        }
    }
}

/// What the experiment sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Vary the second scatterer's amplitude: powers (1, 1/ratio²).
    AmplitudeSweep { ratios: Vec<f64> },
    /// Vary the second scatterer's elevation in Rayleigh units above the
    /// first, which stays fixed.
    DistanceSweep { rayleigh: Vec<f64> },
    /// Vary the noise power along an M·SNR axis (dB). `reference_looks` is
    /// the M used to convert the axis to per-look SNR; keep it equal to the
    /// scene's look count for sampled runs.
    SnrSweep {
        msnr_db: Vec<f64>,
        reference_looks: usize,
    },
    /// Vary the kernel itself: Gaussian widths, then polynomial orders.
    /// Ignores the estimator list and reports ensemble coherence.
    KernelSweep { betas: Vec<f64>, orders: Vec<f64> },
    /// Evaluate the base scene as-is.
    SingleScene,
}

/// A full experiment description. `base.looks == 0` switches every grid
/// point to a single deterministic evaluation of the exact model covariance
/// instead of Monte Carlo sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub base: SimulationConfig,
    pub estimators: Vec<EstimatorSpec>,
    pub runs: usize,
    #[serde(default)]
    pub separation: SeparationConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.geometry.validate()?;
        self.separation.validate()?;
        if self.runs < 1 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        let grid_len = match &self.kind {
            ExperimentKind::AmplitudeSweep { ratios } => {
                if ratios.iter().any(|r| !(*r > 0.0)) {
                    return Err(Error::invalid("amplitude ratios must be positive"));
                }
                ratios.len()
            }
            ExperimentKind::DistanceSweep { rayleigh } => rayleigh.len(),
            ExperimentKind::SnrSweep {
                msnr_db,
                reference_looks,
            } => {
                if *reference_looks < 1 {
                    return Err(Error::invalid("reference_looks must be at least 1"));
                }
                msnr_db.len()
            }
            ExperimentKind::KernelSweep { betas, orders } => betas.len() + orders.len(),
            ExperimentKind::SingleScene => 1,
        };
        if grid_len == 0 {
            return Err(Error::invalid("sweep grid is empty"));
        }
        let needs_estimators = !matches!(self.kind, ExperimentKind::KernelSweep { .. });
        if needs_estimators && self.estimators.is_empty() {
            return Err(Error::invalid("estimator list is empty"));
        }
        let needs_pair = !matches!(self.kind, ExperimentKind::SingleScene);
        if needs_pair && self.base.scatterers.len() < 2 {
            return Err(Error::invalid("this sweep needs a two-scatterer base scene"));
        }
        if self.base.scatterers.is_empty() {
            return Err(Error::invalid("base scene has no scatterers"));
        }
        Ok(())
    }

    fn exact_mode(&self) -> bool {
        self.base.looks == 0
    }
}

/// One grid-point × estimator result. Bias statistics are indexed by
/// estimate rank (descending intensity), each rank paired greedily with the
/// nearest unclaimed true steering vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub parameter: String,
    pub value: f64,
    pub estimator: String,
    pub runs: usize,
    pub failures: usize,
    /// More than half the runs failed; statistics cover the survivors.
    pub flagged: bool,
    pub mean_bias_deg: Vec<f64>,
    pub std_bias_deg: Vec<f64>,
    /// Mean bias over the angle between the true steering pair (two-scatterer
    /// scenes only).
    pub relative_bias: Vec<f64>,
    /// Mean ensemble coherence of the top estimate with its claimed truth
    /// (kernel sweeps only).
    pub coherence: Option<f64>,
}

struct RunRecord {
    biases: Vec<f64>,
    eta: f64,
}

fn evaluate_covariance(
    cov: &CMatrix,
    estimator: &EstimatorSpec,
    separation: &SeparationConfig,
    truths: &[CVector],
) -> Option<RunRecord> {
    let k = truths.len();
    let estimates: Vec<ScattererEstimate> = match estimator.kernel() {
        None => {
            let (vecs, vals) = pca_components(cov).ok()?;
            (0..k.min(vecs.ncols()))
                .map(|i| ScattererEstimate {
                    steering: CVector::from_column_slice(vecs.column(i).as_slice()),
                    intensity: vals[i],
                })
                .collect()
        }
        Some(kernel) => {
            let cfg = SeparationConfig {
                kernel,
                ..separation.clone()
            };
            separate_scatterers(cov, &cfg).ok()?.estimates
        }
    };
    if estimates.len() < k {
        return None;
    }
    let steerings: Vec<CVector> = estimates
        .iter()
        .take(k)
        .map(|e| e.steering.clone())
        .collect();
    let claimed = match_to_references(&steerings, truths).ok()?;
    let mut biases = Vec::with_capacity(k);
    for (est, &t) in steerings.iter().zip(claimed.iter()) {
        biases.push(angular_bias_deg(est, &truths[t]).ok()?);
    }
    let eta = ensemble_coherence(&steerings[0], &truths[claimed[0]]).ok()?;
    Some(RunRecord { biases, eta })
}

struct GridPoint {
    parameter: &'static str,
    value: f64,
    scene: SimulationConfig,
    estimator_override: Option<EstimatorSpec>,
}

fn build_grid(spec: &ExperimentSpec) -> Result<Vec<GridPoint>> {
    let base = &spec.base;
    let mut points = Vec::new();
    match &spec.kind {
        ExperimentKind::AmplitudeSweep { ratios } => {
            for &ratio in ratios {
                let mut scene = base.clone();
                let lead = scene.scatterers[0].amplitude;
                scene.scatterers[1].amplitude = lead / ratio;
                points.push(GridPoint {
                    parameter: "amplitude_ratio",
                    value: ratio,
                    scene,
                    estimator_override: None,
                });
            }
        }
        ExperimentKind::DistanceSweep { rayleigh } => {
            let rr = base.geometry.rayleigh_resolution_m()?;
            for &frac in rayleigh {
                let mut scene = base.clone();
                scene.scatterers[1].elevation_m = scene.scatterers[0].elevation_m + frac * rr;
                points.push(GridPoint {
                    parameter: "distance_rayleigh",
                    value: frac,
                    scene,
                    estimator_override: None,
                });
            }
        }
        ExperimentKind::SnrSweep {
            msnr_db,
            reference_looks,
        } => {
            let total: f64 = base.scatterers.iter().map(|s| s.power()).sum();
            let n = base.geometry.n() as f64;
            let m = if spec.exact_mode() {
                *reference_looks as f64
            } else {
                base.looks as f64
            };
            for &db in msnr_db {
                let snr = 10f64.powf(db / 10.0) / m;
                let mut scene = base.clone();
                scene.noise_power = total / (n * snr);
                points.push(GridPoint {
                    parameter: "msnr_db",
                    value: db,
                    scene,
                    estimator_override: None,
                });
            }
        }
        ExperimentKind::KernelSweep { betas, orders } => {
            for &beta in betas {
                points.push(GridPoint {
                    parameter: "gaussian_beta",
                    value: beta,
                    scene: base.clone(),
                    estimator_override: Some(EstimatorSpec::KpcaGaussian { beta }),
                });
            }
            for &order in orders {
                points.push(GridPoint {
                    parameter: "poly_order",
                    value: order,
                    scene: base.clone(),
                    estimator_override: Some(EstimatorSpec::KpcaPoly { order }),
                });
            }
        }
        ExperimentKind::SingleScene => {
            points.push(GridPoint {
                parameter: "scene",
                value: 0.0,
                scene: base.clone(),
                estimator_override: None,
            });
        }
    }
    Ok(points)
}

fn kind_name(kind: &ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::AmplitudeSweep { .. } => "sweep-amplitude",
        ExperimentKind::DistanceSweep { .. } => "sweep-distance",
        ExperimentKind::SnrSweep { .. } => "sweep-snr",
        ExperimentKind::KernelSweep { .. } => "sweep-kernel",
        ExperimentKind::SingleScene => "single-scene",
    }
}

/// Runs the experiment and returns one row per grid point × estimator, in
/// grid order. Deterministic for a fixed spec: Monte Carlo runs execute in
/// parallel but are reduced in run order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRow>> {
    spec.validate()?;
    let exact = spec.exact_mode();
    let want_eta = matches!(spec.kind, ExperimentKind::KernelSweep { .. });
    let grid = build_grid(spec)?;
    let mut rows = Vec::new();
    for point in &grid {
        let truths: Vec<CVector> = point
            .scene
            .scatterers
            .iter()
            .map(|s| steering_vector(&point.scene.geometry, s))
            .collect::<Result<_>>()?;
        let pair_angle = if truths.len() == 2 {
            Some(angular_bias_deg(&truths[0], &truths[1])?)
        } else {
            None
        };
        let estimators: Vec<EstimatorSpec> = match point.estimator_override {
            Some(e) => vec![e],
            None => spec.estimators.clone(),
        };
        for estimator in &estimators {
            let records: Vec<Option<RunRecord>> = if exact {
                let cov = model_covariance(
                    &point.scene.geometry,
                    &point.scene.scatterers,
                    point.scene.noise_power,
                )?;
                vec![evaluate_covariance(
                    &cov,
                    estimator,
                    &spec.separation,
                    &truths,
                )]
            } else {
                (0..spec.runs)
                    .into_par_iter()
                    .map(|run| {
                        let mut cfg = point.scene.clone();
                        cfg.seed = splitmix64(spec.base.seed ^ run as u64);
                        let stack = draw_stack(&cfg).ok()?;
                        let cov = sample_covariance(&stack).ok()?;
                        evaluate_covariance(&cov, estimator, &spec.separation, &truths)
                    })
                    .collect()
            };
            let total = records.len();
            let kept: Vec<&RunRecord> = records.iter().flatten().collect();
            let failures = total - kept.len();
            let k = truths.len();
            let mut mean = vec![f64::NAN; k];
            let mut std = vec![f64::NAN; k];
            let mut eta_mean = None;
            if !kept.is_empty() {
                let count = kept.len() as f64;
                for i in 0..k {
                    let sum: f64 = kept.iter().map(|r| r.biases[i]).sum();
                    let m = sum / count;
                    mean[i] = m;
                    std[i] = if kept.len() > 1 {
                        let sq: f64 = kept.iter().map(|r| (r.biases[i] - m).powi(2)).sum();
                        (sq / (count - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                }
                if want_eta {
                    eta_mean = Some(kept.iter().map(|r| r.eta).sum::<f64>() / count);
                }
            }
            let relative = match pair_angle {
                Some(angle) if angle > 1e-9 => mean.iter().map(|m| m / angle).collect(),
                _ => Vec::new(),
            };
            rows.push(ExperimentRow {
                experiment: kind_name(&spec.kind).to_string(),
                parameter: point.parameter.to_string(),
                value: point.value,
                estimator: estimator.label(),
                runs: total,
                failures,
                flagged: failures * 2 > total,
                mean_bias_deg: mean,
                std_bias_deg: std,
                relative_bias: relative,
                coherence: eta_mean,
            });
        }
    }
    Ok(rows)
}

fn fmt_cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Renders rows as CSV with a fixed header. Two bias columns are emitted
/// (blank when a scene has fewer scatterers); every row echoes its grid
/// parameters, so the file stands alone.
pub fn rows_to_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "experiment",
        "parameter",
        "value",
        "estimator",
        "runs",
        "failures",
        "flagged",
        "mean_bias_1_deg",
        "std_bias_1_deg",
        "mean_bias_2_deg",
        "std_bias_2_deg",
        "relative_bias_1",
        "relative_bias_2",
        "coherence_1",
    ])?;
    for row in rows {
        let get = |v: &Vec<f64>, i: usize| v.get(i).copied().map(fmt_cell).unwrap_or_default();
        w.write_record([
            row.experiment.clone(),
            row.parameter.clone(),
            fmt_cell(row.value),
            row.estimator.clone(),
            row.runs.to_string(),
            row.failures.to_string(),
            row.flagged.to_string(),
            get(&row.mean_bias_deg, 0),
            get(&row.std_bias_deg, 0),
            get(&row.mean_bias_deg, 1),
            get(&row.std_bias_deg, 1),
            get(&row.relative_bias, 0),
            get(&row.relative_bias, 1),
            row.coherence.map(fmt_cell).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
}

/// Per-baseline eigenvector phase-bias table for a two-scatterer scene at a
/// set of amplitude ratios (the "phase bias vs baseline" figure). Evaluated
/// on the exact covariance when `looks` is 0, otherwise on one sampled stack
/// per ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseBiasRow {
    pub amplitude_ratio: f64,
    pub baseline_m: f64,
    pub bias_first_deg: f64,
    pub bias_second_deg: f64,
}

pub fn phase_bias_rows(base: &SimulationConfig, ratios: &[f64]) -> Result<Vec<PhaseBiasRow>> {
    if base.scatterers.len() != 2 {
        return Err(Error::invalid("phase-bias table needs exactly two scatterers"));
    }
    if ratios.is_empty() {
        return Err(Error::invalid("no amplitude ratios given"));
    }
    let geom = &base.geometry;
    geom.validate()?;
    let mut rows = Vec::new();
    for &ratio in ratios {
        if !(ratio > 0.0) {
            return Err(Error::invalid("amplitude ratios must be positive"));
        }
        let mut scene = base.clone();
        scene.scatterers[1].amplitude = scene.scatterers[0].amplitude / ratio;
        let cov = if base.looks == 0 {
            model_covariance(geom, &scene.scatterers, scene.noise_power)?
        } else {
            sample_covariance(&draw_stack(&scene)?)?
        };
        let (vecs, _) = pca_components(&cov)?;
        let r1 = steering_vector(geom, &scene.scatterers[0])?;
        let r2 = steering_vector(geom, &scene.scatterers[1])?;
        let u1 = CVector::from_column_slice(vecs.column(0).as_slice());
        let u2 = CVector::from_column_slice(vecs.column(1).as_slice());
        let b1 = crate::estimation::per_baseline_phase_bias(&u1, &r1)?;
        let b2 = crate::estimation::per_baseline_phase_bias(&u2, &r2)?;
        for i in 0..geom.n() {
            rows.push(PhaseBiasRow {
                amplitude_ratio: ratio,
                baseline_m: geom.baselines_m[i],
                bias_first_deg: b1[i],
                bias_second_deg: b2[i],
            });
        }
    }
    Ok(rows)
}

pub fn phase_bias_csv(rows: &[PhaseBiasRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "amplitude_ratio",
        "baseline_m",
        "bias_first_deg",
        "bias_second_deg",
    ])?;
    for row in rows {
        w.write_record([
            fmt_cell(row.amplitude_ratio),
            fmt_cell(row.baseline_m),
            fmt_cell(row.bias_first_deg),
            fmt_cell(row.bias_second_deg),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::format(e.to_string()))
}
