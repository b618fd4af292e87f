//! Eavesdroppers at unknown positions, modelled as a homogeneous Poisson
//! point process around Alice.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::keygen::kgr_closed_form;
use crate::propagation::{eve_correlation_coefficient, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PppConfig {
    /// Eavesdroppers per square meter.
    pub lambda_e: f64,
    /// Radius of the sampling disk centred at Alice, meters.
    pub radius: f64,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
}

impl PppConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_e > 0.0 && self.lambda_e.is_finite()) {
            return Err(invalid("lambda_e", "intensity must be positive"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("radius", "must be positive"));
        }
        if !(self.wavelength > 0.0) {
            return Err(invalid("wavelength", "must be positive"));
        }
        Ok(())
    }

    /// Expected number of points inside the disk.
    pub fn mean_count(&self) -> f64 {
        self.lambda_e * PI * self.radius * self.radius
    }
}

/// Density of the distance from Alice to her `k`-th nearest eavesdropper,
/// `exp(-lambda pi d^2) 2 (lambda pi)^k d^(2k-1) / Gamma(k)`.
pub fn nearest_eve_pdf(k: u32, d: f64, lambda_e: f64) -> f64 {
    debug_assert!(k >= 1 && lambda_e > 0.0);
    if d <= 0.0 {
        return 0.0;
    }
    let lp = lambda_e * PI;
    let k = k as f64;
    // evaluated in logs so large k does not overflow
    let log_f = -lp * d * d + 2f64.ln() + k * lp.ln() + (2.0 * k - 1.0) * d.ln() - ln_gamma(k);
    log_f.exp()
}

/// Mean distance to the nearest eavesdropper, `sqrt(1 / (4 lambda_e))`.
pub fn expected_min_distance(lambda_e: f64) -> f64 {
    (1.0 / (4.0 * lambda_e)).sqrt()
}

/// Uniform point in the disk of the given radius centred at the origin.
pub fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = TAU * rng.random::<f64>();
    Point::new(r * phi.cos(), r * phi.sin())
}

/// One realization of the process restricted to the disk: a Poisson number
/// of points, each uniform on the disk.
pub fn sample_ppp<R: Rng + ?Sized>(config: &PppConfig, rng: &mut R) -> Result<Vec<Point>> {
    config.validate()?;
    let mean = config.mean_count();
    let count = Poisson::new(mean)
        .map_err(|e| invalid("lambda_e", e.to_string()))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| uniform_in_disk(config.radius, rng))
        .filter(|p| p.norm() > 0.0)
        .collect())
}

/// A realization at the largest intensity of interest with an independent
/// uniform mark per point. The points whose mark is below `lambda / lambda_e`
/// form a realization at intensity `lambda`, so realizations at different
/// intensities drawn this way are nested.
pub fn sample_marked_ppp<R: Rng + ?Sized>(config: &PppConfig, rng: &mut R) -> Result<Vec<(Point, f64)>> {
    let points = sample_ppp(config, rng)?;
    Ok(points.into_iter().map(|p| (p, rng.random::<f64>())).collect())
}

/// Independent thinning of a marked realization down to intensity `lambda`.
pub fn thin(marked: &[(Point, f64)], lambda: f64, lambda_max: f64) -> Vec<Point> {
    let keep = lambda / lambda_max;
    marked.iter().filter(|(_, m)| *m < keep).map(|(p, _)| *p).collect()
}

/// Spatial correlation of combined channels `d` meters apart,
/// `J0(2 pi d / lambda)^2`.
pub fn spatial_correlation(d: f64, wavelength: f64) -> f64 {
    let c = eve_correlation_coefficient(d, wavelength);
    c * c
}

/// `E{|x||y|}` for independent zero-mean circular Gaussians of the given
/// powers: `(pi / 4) sqrt(p_x p_y)`.
pub fn envelope_cross_moment(power_x: f64, power_y: f64) -> f64 {
    FRAC_PI_4 * (power_x * power_y).sqrt()
}

/// Largest expected eavesdropper correlation without eavesdropper CSI:
/// the envelope moment scaled by the spatial correlation at the expected
/// nearest distance, over the noisy observation powers.
pub fn rho_e_max(
    exp_abs_cross: f64,
    exp_g_ab2: f64,
    exp_g_be2: f64,
    noise_var: f64,
    lambda_e: f64,
    wavelength: f64,
) -> Result<f64> {
    if !(exp_g_ab2 > 0.0 && exp_g_be2 > 0.0) {
        return Err(invalid("exp_g2", "channel powers must be positive"));
    }
    if !(noise_var >= 0.0) {
        return Err(invalid("noise_var", "must be non-negative"));
    }
    if !(lambda_e > 0.0) {
        return Err(invalid("lambda_e", "intensity must be positive"));
    }
    if !(exp_abs_cross >= 0.0) {
        return Err(invalid("exp_abs_cross", "must be non-negative"));
    }
    let rho_tilde = spatial_correlation(expected_min_distance(lambda_e), wavelength);
    let rho = exp_abs_cross * rho_tilde / ((exp_g_ab2 + noise_var).sqrt() * (exp_g_be2 + noise_var).sqrt());
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(
            "exp_abs_cross",
            format!("moments give rho_e_max = {rho} outside [0, 1]"),
        ));
    }
    Ok(rho)
}

/// Key generation rate for randomly placed eavesdroppers.
pub fn kgr_ppp(rho_l: f64, rho_e_max: f64, delta_t: f64) -> Result<f64> {
    kgr_closed_form(rho_l, rho_e_max, delta_t)
}
