//! Elevation estimation and quality metrics for steering-vector estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{phase_only, C64, CVector};
use crate::model::{steering_for, AcquisitionGeometry};

/// Angle between two complex directions in degrees: cos⁻¹|û^H v̂| ∈ [0°, 90°].
/// Both arguments are normalized internally, so the value is invariant to
/// global phase and positive scaling on either side.
pub fn angular_bias_deg(a: &CVector, b: &CVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let (na, nb) = (a.norm(), b.norm());
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::invalid("zero vector has no direction"));
    }
    let cos = (a.dotc(b).norm() / (na * nb)).clamp(0.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Angular bias of `estimate` against `truth`, expressed as a fraction of the
/// angle between the two true steering vectors.
pub fn relative_angular_bias(
    estimate: &CVector,
    truth: &CVector,
    other_truth: &CVector,
) -> Result<f64> {
    let denom = angular_bias_deg(other_truth, truth)?;
    if denom < 1e-9 {
        return Err(Error::invalid(
            "reference steering vectors coincide; relative bias undefined",
        ));
    }
    Ok(angular_bias_deg(estimate, truth)? / denom)
}

/// Phase-only agreement of two steering vectors: η = (1/N)·|ȳ^H r̄| on their
/// unit-modulus phase factors. 1 means the phase patterns match up to a
/// constant offset; uncorrelated random phases average √π/(2√N).
pub fn ensemble_coherence(y: &CVector, r: &CVector) -> Result<f64> {
    if y.len() != r.len() {
        return Err(Error::invalid("length mismatch"));
    }
    if y.is_empty() {
        return Err(Error::invalid("empty vectors"));
    }
    // phase_only scales entries to modulus 1/√N, which absorbs the 1/N
    Ok(phase_only(y).dotc(&phase_only(r)).norm().clamp(0.0, 1.0))
}

/// Per-image phase error of `estimate` against `reference` in degrees, after
/// removing a constant offset (chosen so the errors average zero) and
/// wrapping to (−180°, 180°].
pub fn per_baseline_phase_bias(estimate: &CVector, reference: &CVector) -> Result<Vec<f64>> {
    if estimate.len() != reference.len() {
        return Err(Error::invalid("length mismatch"));
    }
    let raw: Vec<f64> = estimate
        .iter()
        .zip(reference.iter())
        .map(|(e, r)| (e * r.conj()).arg())
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    Ok(raw
        .iter()
        .map(|d| {
            let (s, c) = (d - mean).sin_cos();
            s.atan2(c).to_degrees()
        })
        .collect())
}

/// Pairs estimates with references greedily: taking the estimates in the
/// given order (callers pass them sorted by descending intensity), each one
/// claims the angularly nearest reference not yet taken. Returns the claimed
/// reference index per estimate.
pub fn match_to_references(estimates: &[CVector], references: &[CVector]) -> Result<Vec<usize>> {
    if estimates.len() > references.len() {
        return Err(Error::invalid("more estimates than references"));
    }
    let mut taken = vec![false; references.len()];
    let mut assignment = Vec::with_capacity(estimates.len());
    for est in estimates {
        let mut best = None;
        let mut best_bias = f64::INFINITY;
        for (idx, reference) in references.iter().enumerate() {
            if taken[idx] {
                continue;
            }
            let bias = angular_bias_deg(est, reference)?;
            if bias < best_bias {
                best_bias = bias;
                best = Some(idx);
            }
        }
        let idx = best.expect("at least one reference remains");
        taken[idx] = true;
        assignment.push(idx);
    }
    Ok(assignment)
}

/// One regularly spaced search axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        AxisSpec { min, max, step }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::invalid("axis step must be positive"));
        }
        if !(self.max >= self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid("axis range is empty or non-finite"));
        }
        Ok(())
    }

    fn len(&self) -> usize {
        ((self.max - self.min) / self.step).floor() as usize + 1
    }

    fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }
}

const DEFAULT_GRID_CAP: usize = 1_000_000;

fn default_grid_cap() -> usize {
    DEFAULT_GRID_CAP
}

/// Search grid for [`periodogram`]. Deformation axes are optional; when
/// present the search runs over the cartesian product and the geometry must
/// carry a motion basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodogramGrid {
    pub elevation: AxisSpec,
    #[serde(default)]
    pub deformation: Vec<AxisSpec>,
    /// Upper bound on the total number of grid nodes.
    #[serde(default = "default_grid_cap")]
    pub max_points: usize,
    /// Refine the elevation peak with a 3-point quadratic fit instead of
    /// returning the argmax node.
    #[serde(default)]
    pub refine_peak: bool,
}

impl PeriodogramGrid {
    /// Elevation-only grid spanning ±N/2 Rayleigh units around zero with a
    /// step of 1/100 Rayleigh. The half-width stays below the elevation
    /// ambiguity of a uniformly spaced baseline set, so every scene elevation
    /// maps to a single peak.
    pub fn default_for(geom: &AcquisitionGeometry) -> Result<Self> {
        geom.validate()?;
        let rayleigh = geom.rayleigh_resolution_m()?;
        let half = 0.5 * geom.n() as f64 * rayleigh;
        Ok(PeriodogramGrid {
            elevation: AxisSpec::new(-half, half, rayleigh / 100.0),
            deformation: Vec::new(),
            max_points: DEFAULT_GRID_CAP,
            refine_peak: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.elevation.validate()?;
        let mut total = self.elevation.len();
        for axis in &self.deformation {
            axis.validate()?;
            total = total.saturating_mul(axis.len());
        }
        if total > self.max_points {
            return Err(Error::invalid(format!(
                "grid has {total} nodes, above the cap of {}",
                self.max_points
            )));
        }
        Ok(())
    }
}

/// Peak found by [`periodogram`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodogramPeak {
    pub elevation_m: f64,
    /// Deformation coefficients at the peak; empty without deformation axes.
    pub deformation: Vec<f64>,
    /// |r(ŝ)^H r̂| at the winning grid node.
    pub coherence: f64,
    /// Whether quadratic interpolation moved the elevation off the node.
    pub refined: bool,
}

/// Scans the steering manifold for the direction closest to `r_hat` and
/// returns the best elevation (and deformation coefficients, if searched).
/// Ties break toward the smallest elevation, then the smallest coefficients.
pub fn periodogram(
    r_hat: &CVector,
    geom: &AcquisitionGeometry,
    grid: &PeriodogramGrid,
) -> Result<PeriodogramPeak> {
    geom.validate()?;
    grid.validate()?;
    if r_hat.len() != geom.n() {
        return Err(Error::invalid("steering length does not match geometry"));
    }
    let norm = r_hat.norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("zero steering vector"));
    }
    if !grid.deformation.is_empty() {
        let basis_rows = geom.motion_basis.as_ref().map_or(0, |b| b.len());
        if basis_rows < grid.deformation.len() {
            return Err(Error::invalid(
                "deformation axes exceed the geometry's motion basis",
            ));
        }
    }
    let unit = r_hat / C64::new(norm, 0.0);

    let score = |s: f64, coeffs: &[f64]| steering_for(geom, s, coeffs).dotc(&unit).norm();

    let mut best_val = f64::NEG_INFINITY;
    let mut worst_val = f64::INFINITY;
    let mut best_elev_idx = 0usize;
    let mut best_coeffs: Vec<f64> = Vec::new();
    let mut coeffs = vec![0.0; grid.deformation.len()];
    let mut indices = vec![0usize; grid.deformation.len()];
    for ei in 0..grid.elevation.len() {
        let s = grid.elevation.value(ei);
        loop {
            for (c, (axis, idx)) in coeffs
                .iter_mut()
                .zip(grid.deformation.iter().zip(indices.iter()))
            {
                *c = axis.value(*idx);
            }
            let v = score(s, &coeffs);
            if v > best_val {
                best_val = v;
                best_elev_idx = ei;
                best_coeffs = coeffs.clone();
            }
            worst_val = worst_val.min(v);
            // odometer over the deformation axes
            let mut carried = true;
            for (idx, axis) in indices.iter_mut().zip(grid.deformation.iter()) {
                *idx += 1;
                if *idx < axis.len() {
                    carried = false;
                    break;
                }
                *idx = 0;
            }
            if carried {
                break;
            }
        }
    }

    if best_val - worst_val < 1e-12 {
        return Err(Error::NoSignal);
    }

    let mut elevation = grid.elevation.value(best_elev_idx);
    let mut refined = false;
    if grid.refine_peak && best_elev_idx > 0 && best_elev_idx + 1 < grid.elevation.len() {
        let below = score(grid.elevation.value(best_elev_idx - 1), &best_coeffs);
        let above = score(grid.elevation.value(best_elev_idx + 1), &best_coeffs);
        let denom = below - 2.0 * best_val + above;
        if denom < 0.0 {
            let offset = (0.5 * (below - above) / denom).clamp(-0.5, 0.5);
            elevation += offset * grid.elevation.step;
            refined = true;
        }
    }

    Ok(PeriodogramPeak {
        elevation_m: elevation,
        deformation: best_coeffs,
        coherence: best_val,
        refined,
    })
}

/// Elevation-only periodogram profile: (elevations, |r(s)^H r̂|) over the
/// grid. Rejects grids with deformation axes — profiles are for plotting the
/// one-dimensional spectrum.
pub fn periodogram_profile(
    r_hat: &CVector,
    geom: &AcquisitionGeometry,
    grid: &PeriodogramGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !grid.deformation.is_empty() {
        return Err(Error::invalid("profile export is elevation-only"));
    }
    geom.validate()?;
    grid.validate()?;
    if r_hat.len() != geom.n() {
        return Err(Error::invalid("steering length does not match geometry"));
    }
    let norm = r_hat.norm();
    if !(norm > 0.0) {
        return Err(Error::invalid("zero steering vector"));
    }
    let unit = r_hat / C64::new(norm, 0.0);
    let mut elevations = Vec::with_capacity(grid.elevation.len());
    let mut values = Vec::with_capacity(grid.elevation.len());
    for ei in 0..grid.elevation.len() {
        let s = grid.elevation.value(ei);
        elevations.push(s);
        values.push(steering_for(geom, s, &[]).dotc(&unit).norm());
    }
    Ok((elevations, values))
}
