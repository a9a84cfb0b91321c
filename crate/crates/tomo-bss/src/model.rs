//! Multibaseline SAR acquisition geometry and the fully coherent
//! steering-vector / covariance model.
//!
//! An elevation `s` maps to a phase ramp across the perpendicular baselines:
//! entry n of a steering vector is `(1/√N)·exp(−j·(4π·B_n·s/(λ·r) + 4π·d_n/λ))`
//! where `d_n` is the modeled line-of-sight motion at acquisition n (zero
//! without deformation). Steering vectors are stored unit-norm so that model
//! covariance intensities are directly the per-scatterer powers.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, CMatrix, CVector};

/// Imaging geometry of an N-image multibaseline stack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    /// Perpendicular baselines in meters, one per image.
    pub baselines_m: Vec<f64>,
    /// Radar wavelength in meters.
    pub wavelength_m: f64,
    /// Slant range in meters.
    pub range_m: f64,
    /// Optional per-image motion basis values (e.g. temporal baselines in
    /// years for a linear-rate model). Required when any scatterer carries
    /// deformation coefficients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_basis: Option<Vec<Vec<f64>>>,
}

/// One scattering source: elevation, linear amplitude, and optional motion
/// coefficients matching the geometry's motion basis rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScattererParams {
    pub elevation_m: f64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deformation: Option<Vec<f64>>,
}

impl ScattererParams {
    pub fn new(elevation_m: f64, amplitude: f64) -> Self {
        ScattererParams {
            elevation_m,
            amplitude,
            deformation: None,
        }
    }

    /// Power σ² of this scatterer.
    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

impl AcquisitionGeometry {
    /// Number of images N.
    pub fn n(&self) -> usize {
        self.baselines_m.len()
    }

    /// λ·r product that scales the elevation-to-phase conversion.
    pub fn lambda_range(&self) -> f64 {
        self.wavelength_m * self.range_m
    }

    /// Aperture span ΔB = max(B) − min(B).
    pub fn aperture_m(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &b in &self.baselines_m {
            lo = lo.min(b);
            hi = hi.max(b);
        }
        hi - lo
    }

    pub fn validate(&self) -> Result<()> {
        if self.baselines_m.len() < 2 {
            return Err(Error::invalid("need at least 2 baselines"));
        }
        if !self.baselines_m.iter().all(|b| b.is_finite()) {
            return Err(Error::invalid("baselines must be finite"));
        }
        if self.aperture_m() <= 0.0 {
            return Err(Error::invalid("baseline aperture must be positive"));
        }
        if !(self.wavelength_m > 0.0) || !(self.range_m > 0.0) {
            return Err(Error::invalid("wavelength and range must be positive"));
        }
        if let Some(basis) = &self.motion_basis {
            if basis.iter().any(|row| row.len() != self.n()) {
                return Err(Error::invalid(
                    "motion basis rows must have one value per image",
                ));
            }
        }
        Ok(())
    }

    /// Rayleigh elevation resolution λ·r / (2·ΔB).
    pub fn rayleigh_resolution_m(&self) -> Result<f64> {
        let span = self.aperture_m();
        if span <= 0.0 {
            return Err(Error::invalid("degenerate geometry: zero aperture"));
        }
        Ok(self.lambda_range() / (2.0 * span))
    }
}

/// The default simulation geometry: 9 images, baselines −200…200 m in 50 m
/// steps, λ·r = 21840 m² (X-band values), giving a 27.3 m Rayleigh resolution.
pub fn default_geometry() -> AcquisitionGeometry {
    let wavelength = 0.031;
    AcquisitionGeometry {
        baselines_m: (0..9).map(|i| -200.0 + 50.0 * i as f64).collect(),
        wavelength_m: wavelength,
        range_m: 21840.0 / wavelength,
        motion_basis: None,
    }
}

/// Builds the unit-norm steering vector for one scatterer.
pub fn steering_vector(geom: &AcquisitionGeometry, scat: &ScattererParams) -> Result<CVector> {
    geom.validate()?;
    if !scat.elevation_m.is_finite() {
        return Err(Error::invalid("non-finite elevation"));
    }
    let coeffs: &[f64] = scat.deformation.as_deref().unwrap_or(&[]);
    if !coeffs.is_empty() {
        let basis = geom
            .motion_basis
            .as_ref()
            .ok_or_else(|| Error::invalid("deformation given but geometry has no motion basis"))?;
        if coeffs.len() > basis.len() {
            return Err(Error::invalid(
                "more deformation coefficients than motion basis rows",
            ));
        }
    }
    Ok(steering_for(geom, scat.elevation_m, coeffs))
}

/// Steering vector at elevation `s` with motion coefficients `coeffs`
/// (may be empty). Skips validation; used on hot paths like periodogram grids.
pub(crate) fn steering_for(geom: &AcquisitionGeometry, s: f64, coeffs: &[f64]) -> CVector {
    let n = geom.n();
    let scale = 1.0 / (n as f64).sqrt();
    let k_elev = 4.0 * std::f64::consts::PI / geom.lambda_range();
    let k_defo = 4.0 * std::f64::consts::PI / geom.wavelength_m;
    let empty: Vec<Vec<f64>> = Vec::new();
    let basis = geom.motion_basis.as_ref().unwrap_or(&empty);
    CVector::from_iterator(
        n,
        (0..n).map(|i| {
            let mut motion = 0.0;
            for (c, row) in coeffs.iter().zip(basis.iter()) {
                motion += c * row[i];
            }
            let phase = -(k_elev * geom.baselines_m[i] * s + k_defo * motion);
            Complex::from_polar(scale, phase)
        }),
    )
}

/// Σ σ_k² r_k r_k^H + σ_ε² I — the fully coherent covariance model.
pub fn model_covariance(
    geom: &AcquisitionGeometry,
    scatterers: &[ScattererParams],
    noise_power: f64,
) -> Result<CMatrix> {
    geom.validate()?;
    if noise_power < 0.0 {
        return Err(Error::invalid("noise power must be nonnegative"));
    }
    if scatterers.is_empty() && noise_power == 0.0 {
        return Err(Error::invalid("need at least one scatterer or noise"));
    }
    let n = geom.n();
    let mut c = CMatrix::zeros(n, n);
    for scat in scatterers {
        if scat.amplitude < 0.0 {
            return Err(Error::invalid("amplitude must be nonnegative"));
        }
        let r = steering_vector(geom, scat)?;
        let p = C64::new(scat.power(), 0.0);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] += p * r[i] * r[j].conj();
            }
        }
    }
    for i in 0..n {
        c[(i, i)] += C64::new(noise_power, 0.0);
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::angular_bias_deg;
    use crate::linalg::eigh_desc;
    use approx::assert_relative_eq;

    #[test]
    fn default_geometry_rayleigh() {
        let g = default_geometry();
        assert_eq!(g.n(), 9);
        assert_relative_eq!(g.rayleigh_resolution_m().unwrap(), 27.3, epsilon = 0.05);
        assert_relative_eq!(g.lambda_range(), 21840.0, epsilon = 1e-9);
    }

    #[test]
    fn rayleigh_halves_with_double_aperture() {
        let mut g = default_geometry();
        let r1 = g.rayleigh_resolution_m().unwrap();
        for b in &mut g.baselines_m {
            *b *= 2.0;
        }
        let r2 = g.rayleigh_resolution_m().unwrap();
        assert_relative_eq!(r1, 2.0 * r2, epsilon = 1e-12);
        // 200 m span case
        let g200 = AcquisitionGeometry {
            baselines_m: vec![-100.0, 0.0, 100.0],
            ..default_geometry()
        };
        assert_relative_eq!(g200.rayleigh_resolution_m().unwrap(), 54.6, epsilon = 0.1);
    }

    #[test]
    fn steering_zero_cases() {
        let g = default_geometry();
        let r = steering_vector(&g, &ScattererParams::new(0.0, 1.0)).unwrap();
        let want = 1.0 / 3.0;
        for x in r.iter() {
            assert_relative_eq!(x.re, want, epsilon = 1e-14);
            assert_relative_eq!(x.im, 0.0, epsilon = 1e-14);
        }
        let gz = AcquisitionGeometry {
            baselines_m: vec![0.0, 0.0, 1.0], // aperture from one offset only
            ..default_geometry()
        };
        let rz = steering_vector(&gz, &ScattererParams::new(40.0, 1.0)).unwrap();
        // zero-baseline entries carry zero phase
        assert_relative_eq!(rz[0].im, 0.0, epsilon = 1e-14);
        assert_relative_eq!(rz[1].im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn steering_phase_direct_value() {
        // entry for B = 200 m, s = 40 m under λr = 21840 m²
        let g = default_geometry();
        let r = steering_vector(&g, &ScattererParams::new(40.0, 1.0)).unwrap();
        let expect = -(4.0 * std::f64::consts::PI * 200.0 * 40.0 / 21840.0);
        let got = r[8].arg();
        let diff = (got - expect).rem_euclid(2.0 * std::f64::consts::PI);
        let wrapped = diff.min(2.0 * std::f64::consts::PI - diff);
        assert!(wrapped < 1e-10, "phase mismatch: {wrapped}");
        assert_relative_eq!(r.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn steering_inner_product_depends_on_separation_only() {
        let g = default_geometry();
        let pairs = [(10.0, 37.0), (50.0, 77.0), (-13.0, 14.0)];
        let mut mags = Vec::new();
        for (a, b) in pairs {
            let ra = steering_vector(&g, &ScattererParams::new(a, 1.0)).unwrap();
            let rb = steering_vector(&g, &ScattererParams::new(b, 1.0)).unwrap();
            mags.push(ra.dotc(&rb).norm());
        }
        assert_relative_eq!(mags[0], mags[1], epsilon = 1e-12);
        assert_relative_eq!(mags[0], mags[2], epsilon = 1e-12);
    }

    #[test]
    fn model_covariance_trace_and_psd() {
        let g = default_geometry();
        let scats = vec![
            ScattererParams::new(40.0, 1.0),
            ScattererParams::new(80.0, 0.5),
        ];
        let c = model_covariance(&g, &scats, 0.3).unwrap();
        let trace: f64 = (0..9).map(|i| c[(i, i)].re).sum();
        assert_relative_eq!(trace, 1.0 + 0.25 + 9.0 * 0.3, epsilon = 1e-10);
        let (w, _) = eigh_desc(&c);
        assert!(w.iter().all(|&x| x >= -1e-10));
    }

    #[test]
    fn model_covariance_two_scatterer_eigenvalues() {
        // closed form: eigenvalues 1 ± |r₁^H r₂| for equal unit powers
        let g = default_geometry();
        let s1 = ScattererParams::new(40.0, 1.0);
        let s2 = ScattererParams::new(80.0, 1.0);
        let c = model_covariance(&g, &[s1.clone(), s2.clone()], 0.0).unwrap();
        let r1 = steering_vector(&g, &s1).unwrap();
        let r2 = steering_vector(&g, &s2).unwrap();
        let rho = r1.dotc(&r2).norm();
        let (w, _) = eigh_desc(&c);
        assert_relative_eq!(w[0], 1.0 + rho, epsilon = 1e-10);
        assert_relative_eq!(w[1], 1.0 - rho, epsilon = 1e-10);
        for &x in &w[2..] {
            assert!(x.abs() < 1e-10);
        }
    }

    #[test]
    fn noise_only_covariance() {
        let g = default_geometry();
        let c = model_covariance(&g, &[], 2.0).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert_relative_eq!(c[(i, j)].re, want, epsilon = 1e-14);
                assert_relative_eq!(c[(i, j)].im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn single_scatterer_top_eigenvector_is_steering() {
        let g = default_geometry();
        let s = ScattererParams::new(55.0, 1.3);
        let c = model_covariance(&g, &[s.clone()], 0.0).unwrap();
        let r = steering_vector(&g, &s).unwrap();
        let (w, v) = eigh_desc(&c);
        assert_relative_eq!(w[0], s.power(), epsilon = 1e-10);
        let bias = angular_bias_deg(&v.column(0).into_owned(), &r).unwrap();
        assert!(bias < 1e-8, "bias {bias}");
    }

    #[test]
    fn deformation_phase_enters_steering() {
        let mut g = default_geometry();
        g.motion_basis = Some(vec![(0..9).map(|i| i as f64 * 0.1).collect()]);
        let mut s = ScattererParams::new(40.0, 1.0);
        s.deformation = Some(vec![0.002]); // meters/year linear rate
        let with = steering_vector(&g, &s).unwrap();
        let without = steering_vector(&g, &ScattererParams::new(40.0, 1.0)).unwrap();
        let k = 4.0 * std::f64::consts::PI / g.wavelength_m;
        let extra = (with[5] / without[5]).arg();
        let want = -(k * 0.002 * 0.5);
        let diff = (extra - want).rem_euclid(2.0 * std::f64::consts::PI);
        let wrapped = diff.min(2.0 * std::f64::consts::PI - diff);
        assert!(wrapped < 1e-10);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let g = default_geometry();
        assert!(model_covariance(&g, &[], -1.0).is_err());
        assert!(steering_vector(&g, &ScattererParams::new(f64::NAN, 1.0)).is_err());
        let bad = AcquisitionGeometry {
            baselines_m: vec![5.0, 5.0],
            ..default_geometry()
        };
        assert!(bad.validate().is_err());
    }
}
