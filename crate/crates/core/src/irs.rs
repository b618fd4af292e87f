//! Phase-shift configurations of the reflecting surface.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::propagation::ChannelSet;

/// Phase control resolution of every element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseResolution {
    /// `2^bits` uniformly spaced phases starting at zero.
    Bits(u32),
    Continuous,
}

impl PhaseResolution {
    pub fn levels(&self) -> Option<u64> {
        match *self {
            PhaseResolution::Bits(b) => Some(1u64 << b),
            PhaseResolution::Continuous => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PhaseResolution::Bits(0) => Err(invalid(
                "bits",
                "a zero-bit grid only contains phase 0 and carries no randomness",
            )),
            PhaseResolution::Bits(b) if b > 32 => Err(invalid("bits", "at most 32 bits supported")),
            _ => Ok(()),
        }
    }
}

/// Grid angle `2 pi m / 2^bits`.
pub fn grid_angle(index: u64, bits: u32) -> f64 {
    TAU * index as f64 / (1u64 << bits) as f64
}

/// Nearest grid index for an arbitrary angle; half-way cases go to the
/// smaller index.
pub fn quantize_angle(theta: f64, bits: u32) -> u64 {
    let levels = 1u64 << bits;
    let x = (theta / TAU).rem_euclid(1.0) * levels as f64;
    let floor = x.floor();
    let m = if x - floor > 0.5 {
        floor as u64 + 1
    } else {
        floor as u64
    };
    m % levels
}

/// Phase shifts applied by the `N` elements in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    theta: Vec<f64>,
    resolution: PhaseResolution,
}

impl PhaseConfig {
    /// Builds a configuration from grid indices.
    pub fn from_indices(indices: &[u64], bits: u32) -> Result<Self> {
        PhaseResolution::Bits(bits).validate()?;
        let levels = 1u64 << bits;
        if let Some(&m) = indices.iter().find(|&&m| m >= levels) {
            return Err(invalid("indices", format!("grid index {m} exceeds {levels} levels")));
        }
        Ok(Self {
            theta: indices.iter().map(|&m| grid_angle(m, bits)).collect(),
            resolution: PhaseResolution::Bits(bits),
        })
    }

    pub fn continuous(theta: Vec<f64>) -> Self {
        Self {
            theta,
            resolution: PhaseResolution::Continuous,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn resolution(&self) -> PhaseResolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `exp(j theta_n)` for every element.
    pub fn phasors(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.theta.iter().map(|&t| Complex64::from_polar(1.0, t))
    }

    /// True when every angle is exactly a grid point of the configured
    /// resolution (always true for continuous configurations).
    pub fn on_grid(&self) -> bool {
        match self.resolution {
            PhaseResolution::Continuous => true,
            PhaseResolution::Bits(b) => self.theta.iter().all(|&t| grid_angle(quantize_angle(t, b), b) == t),
        }
    }
}

/// Draws every element's phase i.i.d. uniformly from the `2^bits` grid.
pub fn random_phase_config<R: Rng + ?Sized>(n: usize, bits: u32, rng: &mut R) -> Result<PhaseConfig> {
    if n == 0 {
        return Err(invalid("n", "the surface needs at least one element"));
    }
    PhaseResolution::Bits(bits).validate()?;
    let levels = 1u64 << bits;
    Ok(PhaseConfig {
        theta: (0..n).map(|_| grid_angle(rng.random_range(0..levels), bits)).collect(),
        resolution: PhaseResolution::Bits(bits),
    })
}

/// Aligns every cascade term with the direct path.
///
/// With continuous phases this is exact coherent combining. On a `2^B` grid
/// the aligned phases are rounded to the nearest grid point; when a
/// different common reference phase gives a strictly larger combined gain,
/// that configuration is returned instead, so the result is the global
/// optimum over the grid. A zero direct path uses phase zero as reference.
pub fn mrt_phases(direct: Complex64, cascade: &[Complex64], resolution: PhaseResolution) -> Result<PhaseConfig> {
    if cascade.is_empty() {
        return Err(invalid("n", "the surface needs at least one element"));
    }
    resolution.validate()?;
    let reference = if direct == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        direct.arg()
    };
    let theta = match resolution {
        PhaseResolution::Continuous => cascade.iter().map(|c| (reference - c.arg()).rem_euclid(TAU)).collect(),
        PhaseResolution::Bits(b) => best_grid_indices(direct, cascade, reference, b)
            .into_iter()
            .map(|m| grid_angle(m, b))
            .collect(),
    };
    Ok(PhaseConfig { theta, resolution })
}

fn grid_indices_for_reference(cascade: &[Complex64], reference: f64, bits: u32) -> Vec<u64> {
    cascade
        .iter()
        .map(|c| quantize_angle(reference - c.arg(), bits))
        .collect()
}

fn gain(direct: Complex64, cascade: &[Complex64], indices: &[u64], bits: u32) -> f64 {
    cascade
        .iter()
        .zip(indices)
        .fold(direct, |acc, (c, &m)| {
            acc + c * Complex64::from_polar(1.0, grid_angle(m, bits))
        })
        .norm()
}

// For a fixed output phase phi the best grid choice of every element is the
// one nearest to phi - arg(c_n). The optimal configuration is therefore the
// nearest-grid configuration of its own output phase, and sweeping phi over
// [0, 2 pi) visits every such configuration. Each element changes its index
// only at the N * 2^B boundaries arg(c_n) + (k + 1/2) * step.
fn best_grid_indices(direct: Complex64, cascade: &[Complex64], reference: f64, bits: u32) -> Vec<u64> {
    let levels = 1u64 << bits;
    let step = TAU / levels as f64;
    let rounded = grid_indices_for_reference(cascade, reference, bits);
    let rounded_gain = gain(direct, cascade, &rounded, bits);

    let mut events: Vec<(f64, usize)> = Vec::with_capacity(cascade.len() * levels as usize);
    for (n, c) in cascade.iter().enumerate() {
        for k in 0..levels {
            events.push(((c.arg() + (k as f64 + 0.5) * step).rem_euclid(TAU), n));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut indices = grid_indices_for_reference(cascade, 0.0, bits);
    let mut sum = cascade.iter().zip(&indices).fold(direct, |acc, (c, &m)| {
        acc + c * Complex64::from_polar(1.0, grid_angle(m, bits))
    });
    let mut best = indices.clone();
    let mut best_gain = sum.norm();
    for &(_, n) in &events {
        let old = indices[n];
        let new = (old + 1) % levels;
        sum += cascade[n]
            * (Complex64::from_polar(1.0, grid_angle(new, bits)) - Complex64::from_polar(1.0, grid_angle(old, bits)));
        indices[n] = new;
        let g = sum.norm();
        if g > best_gain {
            best_gain = g;
            best.clone_from(&indices);
        }
    }

    // the running sum accumulates rounding error; rescore exactly
    let swept = gain(direct, cascade, &best, bits);
    if swept > rounded_gain * (1.0 + 1e-12) {
        best
    } else {
        rounded
    }
}

/// Rate-maximizing configuration for the legitimate link of `channels`.
pub fn mrt_phase_config(channels: &ChannelSet, resolution: PhaseResolution) -> Result<PhaseConfig> {
    mrt_phases(channels.h_ab, &channels.cascade(), resolution)
}

/// `direct + sum_n cascade_n exp(j theta_n)`.
pub fn combined_channel(direct: Complex64, cascade: &[Complex64], config: &PhaseConfig) -> Result<Complex64> {
    if cascade.len() != config.len() {
        return Err(Error::LengthMismatch {
            expected: config.len(),
            actual: cascade.len(),
        });
    }
    Ok(cascade
        .iter()
        .zip(config.phasors())
        .fold(direct, |acc, (c, p)| acc + c * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn one_bit_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let cfg = random_phase_config(4, 1, &mut rng).unwrap();
            assert!(cfg.theta().iter().all(|&t| t == 0.0 || t == PI));
        }
    }

    #[test]
    fn zero_bits_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(random_phase_config(4, 0, &mut rng).is_err());
        assert!(random_phase_config(0, 2, &mut rng).is_err());
    }

    #[test]
    fn phasor_mean_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let cfg = random_phase_config(draws, 3, &mut rng).unwrap();
        let mean: Complex64 = cfg.phasors().sum::<Complex64>() / draws as f64;
        assert!(mean.norm() < 0.01, "{mean}");
    }

    #[test]
    fn combined_channel_examples() {
        let empty = PhaseConfig::continuous(vec![]);
        assert_eq!(combined_channel(c(0.0, 0.0), &[], &empty).unwrap(), c(0.0, 0.0));
        let cfg = PhaseConfig::from_indices(&[1], 1).unwrap();
        let g = combined_channel(c(1.0, 0.0), &[c(1.0, 0.0)], &cfg).unwrap();
        assert!(g.norm() < 1e-15);
        assert!(matches!(
            combined_channel(c(1.0, 0.0), &[c(1.0, 0.0), c(1.0, 0.0)], &cfg),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mrt_single_element_flip() {
        let cfg = mrt_phases(c(1.0, 0.0), &[c(-1.0, 0.0)], PhaseResolution::Continuous).unwrap();
        assert_abs_diff_eq!(cfg.theta()[0], PI, epsilon = 1e-15);
        let g = combined_channel(c(1.0, 0.0), &[c(-1.0, 0.0)], &cfg).unwrap();
        assert_abs_diff_eq!(g.re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mrt_zero_direct_uses_zero_reference() {
        let cascade = [c(0.0, 1.0), c(-1.0, -1.0)];
        let cfg = mrt_phases(c(0.0, 0.0), &cascade, PhaseResolution::Continuous).unwrap();
        let g = combined_channel(c(0.0, 0.0), &cascade, &cfg).unwrap();
        assert_abs_diff_eq!(g.arg(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.norm(), 1.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn quantization_ties_go_down() {
        // pi/4 sits exactly between grid points 0 and pi/2 of a 2-bit grid
        assert_eq!(quantize_angle(PI / 4.0, 2), 0);
        assert_eq!(quantize_angle(3.0 * PI / 4.0, 2), 1);
        assert_eq!(quantize_angle(0.26 * TAU, 2), 1);
        assert_eq!(quantize_angle(0.9 * TAU, 2), 0);
        assert_eq!(quantize_angle(-0.1, 3), 0);
    }

    #[test]
    fn quantized_mrt_beats_independent_rounding() {
        // Rounding each aligned phase separately splits these two terms onto
        // opposite grid points; a common reference at pi/2 keeps them together.
        let d = 0.2f64;
        let cascade = [
            Complex64::from_polar(1.0, PI / 2.0 - d),
            Complex64::from_polar(1.0, PI / 2.0 + d),
        ];
        let direct = c(0.01, 0.0);
        let naive = PhaseConfig {
            theta: grid_indices_for_reference(&cascade, 0.0, 1)
                .into_iter()
                .map(|m| grid_angle(m, 1))
                .collect(),
            resolution: PhaseResolution::Bits(1),
        };
        let naive_gain = combined_channel(direct, &cascade, &naive).unwrap().norm();
        let cfg = mrt_phases(direct, &cascade, PhaseResolution::Bits(1)).unwrap();
        let g = combined_channel(direct, &cascade, &cfg).unwrap().norm();
        assert!(naive_gain < 0.5);
        assert!(g > 1.9, "{g}");
    }

    // Exhaustive search over every grid configuration.
    fn best_on_grid(direct: Complex64, cascade: &[Complex64], bits: u32) -> f64 {
        let levels = 1u64 << bits;
        let n = cascade.len();
        let total = levels.pow(n as u32);
        let mut best: f64 = 0.0;
        for code in 0..total {
            let mut rest = code;
            let idx: Vec<u64> = (0..n)
                .map(|_| {
                    let m = rest % levels;
                    rest /= levels;
                    m
                })
                .collect();
            let cfg = PhaseConfig::from_indices(&idx, bits).unwrap();
            best = best.max(combined_channel(direct, cascade, &cfg).unwrap().norm());
        }
        best
    }

    fn arb_complex() -> impl Strategy<Value = Complex64> {
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b))
    }

    proptest! {
        #[test]
        fn mrt_matches_exhaustive_search(
            direct in arb_complex(),
            cascade in prop::collection::vec(arb_complex(), 1..=3),
            bits in 1u32..=2,
        ) {
            let cfg = mrt_phases(direct, &cascade, PhaseResolution::Bits(bits)).unwrap();
            let mrt = combined_channel(direct, &cascade, &cfg).unwrap().norm();
            let best = best_on_grid(direct, &cascade, bits);
            prop_assert!((mrt - best).abs() <= 1e-12 * best.max(1.0), "mrt {} vs exhaustive {}", mrt, best);
        }

        #[test]
        fn continuous_mrt_reaches_coherent_bound(
            direct in arb_complex(),
            cascade in prop::collection::vec(arb_complex(), 1..=16),
        ) {
            let cfg = mrt_phases(direct, &cascade, PhaseResolution::Continuous).unwrap();
            let g = combined_channel(direct, &cascade, &cfg).unwrap();
            let bound = direct.norm() + cascade.iter().map(|c| c.norm()).sum::<f64>();
            prop_assert!((g.norm() - bound).abs() < 1e-12 * bound.max(1.0));
        }

        #[test]
        fn quantized_mrt_loss_is_bounded(
            direct in arb_complex(),
            cascade in prop::collection::vec(arb_complex(), 1..=16),
        ) {
            let cfg = mrt_phases(direct, &cascade, PhaseResolution::Bits(3)).unwrap();
            prop_assert!(cfg.on_grid());
            let g = combined_channel(direct, &cascade, &cfg).unwrap();
            let coherent: f64 = cascade.iter().map(|c| c.norm()).sum();
            // projection onto the direct-path phase loses at most cos(pi/8) per term
            let floor = direct.norm() + (PI / 8.0).cos() * coherent;
            prop_assert!(g.norm() >= floor - 1e-12);
        }

        #[test]
        fn random_configs_stay_on_grid(seed in any::<u64>(), n in 1usize..64, bits in 1u32..=6) {
            let cfg = random_phase_config(n, bits, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(cfg.len(), n);
            prop_assert!(cfg.on_grid());
        }
    }
}
