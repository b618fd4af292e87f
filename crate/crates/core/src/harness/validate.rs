//! Self-check suite behind the `validate` command: closed forms against
//! their oracles, estimator consistency and Monte Carlo sanity checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::allocation::{edt_rate, max_rounds, optimal_q_bisection, rate_gap, run_algorithm_1, RateMode};
use crate::error::Result;
use crate::irs::{combined_channel, mrt_phases, random_phase_config, PhaseConfig, PhaseResolution};
use crate::keygen::{
    autocorrelation_theoretical, conditional_mutual_information, kgr_closed_form, normalize, otp_xor, quantize_keys,
    ObservationRecord, Observer,
};
use crate::propagation::{sample_channel_set, PathLossModel};
use crate::stats::pair_correlation;
use crate::stochgeo::{expected_min_distance, nearest_eve_pdf, sample_ppp, PppConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }
}

type Check = fn(&ExperimentConfig) -> Result<(bool, String)>;

const CHECKS: &[(&str, Check)] = &[
    ("closed-form-matches-determinants", closed_form_vs_determinants),
    ("rate-monotone-in-correlations", monotonicity),
    ("bisection-matches-exhaustive", bisection_vs_exhaustive),
    ("allocation-near-curve-peak", allocation_near_peak),
    ("fast-and-faithful-allocation-agree", fast_vs_faithful),
    ("nearest-distance-pdf-normalized", pdf_normalization),
    ("nearest-distance-mean", nearest_distance_mean),
    ("autocorrelation-direct-dominated", autocorrelation_direct),
    ("autocorrelation-cascade-dominated", autocorrelation_cascade),
    ("quantized-mrt-is-global-optimum", mrt_enumeration),
    ("random-phases-uniform", phase_uniformity),
    ("normalization-unit-norm-and-scale-free", normalization),
    ("noiseless-keys-agree-and-pad-inverts", keys_and_pad),
];

/// Runs every check; a check that errors counts as failed.
pub fn run_validation(cfg: &ExperimentConfig) -> ValidationReport {
    let checks = CHECKS
        .iter()
        .map(|(name, check)| match check(cfg) {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect();
    ValidationReport { checks }
}

/// Valid `(rho_l, rho_e)` pairs on the 100 x 100 grid used by several checks.
pub fn correlation_grid() -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for i in 0..100 {
        for j in 0..100 {
            let rho_l = 0.99 * i as f64 / 99.0;
            let rho_e = 0.9 * j as f64 / 99.0;
            if rho_l > rho_e * rho_e {
                out.push((i, j, rho_l, rho_e));
            }
        }
    }
    out
}

fn closed_form_vs_determinants(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (_, _, rho_l, rho_e) in correlation_grid() {
        let closed = 2.0 * cfg.delta_t * kgr_closed_form(rho_l, rho_e, cfg.delta_t)?;
        worst = worst.max((closed - conditional_mutual_information(rho_l, rho_e)?).abs());
    }
    Ok((worst < 1e-9, format!("max abs error {worst:.3e} bits")))
}

fn monotonicity(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let h = 1e-6;
    let rate = |l: f64, e: f64| kgr_closed_form(l, e, cfg.delta_t);
    let valid = |l: f64, e: f64| l > e * e + 1e-9 && l + h < 1.0 && e >= 0.0;
    let (mut checked, mut bad) = (0usize, 0usize);
    for (i, j, rho_l, rho_e) in correlation_grid() {
        if i == 0 || i == 99 || j == 0 || j == 99 {
            continue;
        }
        if !(valid(rho_l - h, rho_e + h) && valid(rho_l + h, rho_e - h)) {
            continue;
        }
        checked += 1;
        let d_l = rate(rho_l + h, rho_e)? - rate(rho_l - h, rho_e)?;
        let d_e = rate(rho_l, rho_e + h)? - rate(rho_l, rho_e - h)?;
        if !(d_l > 0.0 && d_e < 0.0) {
            bad += 1;
        }
    }
    Ok((
        bad == 0 && checked > 0,
        format!("{checked} interior points, {bad} sign violations"),
    ))
}

fn bisection_vs_exhaustive(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xB15EC7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let l = rng.random_range(3..4000usize);
        let q_th = rng.random_range(1..=max_rounds(l));
        let r_skg = rng.random_range(0.0..5000.0);
        let r_mrt = rng.random_range(1e-3..20000.0);
        let best = (q_th..=max_rounds(l))
            .min_by(|&a, &b| {
                rate_gap(r_skg, r_mrt, a, l)
                    .abs()
                    .total_cmp(&rate_gap(r_skg, r_mrt, b, l).abs())
            })
            .unwrap_or(q_th);
        if optimal_q_bisection(r_skg, r_mrt, l, q_th)? != best {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of 1000 instances differ")))
}

fn default_channels(cfg: &ExperimentConfig, seed: u64) -> Result<crate::propagation::ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eves = (0..cfg.k)
        .map(|_| crate::stochgeo::uniform_in_disk(cfg.eve_radius, &mut rng))
        .collect();
    sample_channel_set(&cfg.geometry(eves)?, &cfg.path_loss, cfg.n, cfg.wavelength(), &mut rng)
}

fn allocation_near_peak(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut worst = 0usize;
    for t in 0..20 {
        let channels = default_channels(cfg, cfg.seed.wrapping_add(t))?;
        let r = run_algorithm_1(
            &channels,
            &cfg.allocation_params(RateMode::Fast),
            &mut ChaCha8Rng::seed_from_u64(t),
        )?;
        let curve: Vec<f64> = (cfg.q_th..=max_rounds(cfg.l))
            .map(|q| edt_rate(r.r_skg, r.r_mrt, q, cfg.l))
            .collect::<Result<_>>()?;
        let peak = cfg.q_th
            + curve
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > curve[b] { i } else { b });
        worst = worst.max(peak.abs_diff(r.q_star));
    }
    Ok((worst <= 2, format!("largest distance to the curve peak {worst} slots")))
}

fn fast_vs_faithful(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut cfg = cfg.clone();
    cfg.q_th = cfg.q_th.max(400).min(max_rounds(cfg.l).saturating_sub(1)).max(1);
    let mut worst = 0usize;
    for t in 0..5 {
        let channels = default_channels(&cfg, cfg.seed.wrapping_add(100 + t))?;
        let fast = run_algorithm_1(
            &channels,
            &cfg.allocation_params(RateMode::Fast),
            &mut ChaCha8Rng::seed_from_u64(t),
        )?;
        let faithful = run_algorithm_1(
            &channels,
            &cfg.allocation_params(RateMode::Faithful),
            &mut ChaCha8Rng::seed_from_u64(t),
        )?;
        worst = worst.max(fast.q_star.abs_diff(faithful.q_star));
    }
    Ok((
        worst <= 2,
        format!("largest Q* difference {worst} slots with Q_th = {}", cfg.q_th),
    ))
}

/// Composite Simpson rule on `[a, b]` with `intervals` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = intervals + intervals % 2;
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

fn pdf_normalization(_: &ExperimentConfig) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in 1..=4u32 {
        for lambda in [0.1, 0.25, 1.0, 4.0, 10.0] {
            let upper = (80.0 / (PI * lambda)).sqrt();
            let mass = simpson(|d| nearest_eve_pdf(k, d, lambda), 0.0, upper, 20_000);
            worst = worst.max((mass - 1.0).abs());
        }
    }
    Ok((worst < 1e-6, format!("max |mass - 1| = {worst:.2e}")))
}

/// Monte Carlo mean nearest distance to the origin of a planar process,
/// simulated on a disk large enough to hold about 40 points.
pub fn mc_nearest_distance(lambda_e: f64, samples: usize, rng: &mut impl Rng) -> Result<f64> {
    let ppp = PppConfig {
        lambda_e,
        radius: (40.0 / (PI * lambda_e)).sqrt(),
        wavelength: 1.0,
    };
    let mut total = 0.0;
    for _ in 0..samples {
        let points = sample_ppp(&ppp, rng)?;
        total += points.iter().map(|p| p.norm()).fold(ppp.radius, f64::min);
    }
    Ok(total / samples as f64)
}

fn nearest_distance_mean(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD157);
    let mut worst: f64 = 0.0;
    for lambda in [0.25, 1.0, 4.0] {
        let mc = mc_nearest_distance(lambda, 100_000, &mut rng)?;
        worst = worst.max((mc / expected_min_distance(lambda) - 1.0).abs());
    }
    Ok((worst < 0.02, format!("max relative error {:.3}%", 100.0 * worst)))
}

/// Empirical correlation between Alice's noiseless observations in two
/// training rounds of the same interval, over independent intervals, with
/// its jackknife standard error and the predicted value.
pub fn autocorrelation_experiment(
    cfg: &ExperimentConfig,
    model: &PathLossModel,
    intervals: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let geometry = cfg.geometry(Vec::new())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(intervals);
    let mut powers = (0.0, 0.0, 0.0);
    for _ in 0..intervals {
        let channels = sample_channel_set(&geometry, model, cfg.n, cfg.wavelength(), &mut rng)?;
        powers = (channels.sigma_ab2, channels.sigma_u2, channels.sigma_v2);
        let observer = Observer::new(&channels, 0.0)?;
        let first = observer.observe(&random_phase_config(cfg.n, cfg.b, &mut rng)?, &mut rng)?;
        let second = observer.observe(&random_phase_config(cfg.n, cfg.b, &mut rng)?, &mut rng)?;
        pairs.push((first.h_a, second.h_a));
    }
    let (estimate, se) = pair_correlation(&pairs, 100);
    let predicted = autocorrelation_theoretical(powers.0, powers.1, powers.2, cfg.n, false)?;
    Ok((estimate, se, predicted))
}

fn autocorrelation_check(cfg: &ExperimentConfig, model: &PathLossModel) -> Result<(bool, String)> {
    let (est, se, pred) = autocorrelation_experiment(cfg, model, 10_000, cfg.seed ^ 0xAC)?;
    let z = (est - pred).abs() / se;
    Ok((
        z <= 3.0,
        format!("empirical {est:.4} +/- {se:.4}, predicted {pred:.4}, |z| = {z:.2}"),
    ))
}

fn autocorrelation_direct(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    autocorrelation_check(cfg, &cfg.path_loss)
}

fn autocorrelation_cascade(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let model = PathLossModel {
        zeta_ab: 6.0,
        ..cfg.path_loss
    };
    autocorrelation_check(cfg, &model)
}

fn mrt_enumeration(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x3127);
    let mut worst: f64 = 0.0;
    for trial in 0..300 {
        let n = 1 + trial % 3;
        let bits = 1 + (trial / 3) as u32 % 2;
        let gauss = |rng: &mut ChaCha8Rng| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let direct = gauss(&mut rng);
        let cascade: Vec<Complex64> = (0..n).map(|_| gauss(&mut rng)).collect();
        let chosen = combined_channel(
            direct,
            &cascade,
            &mrt_phases(direct, &cascade, PhaseResolution::Bits(bits))?,
        )?
        .norm();
        let levels = 1u64 << bits;
        let mut best: f64 = 0.0;
        for code in 0..levels.pow(n as u32) {
            let indices: Vec<u64> = (0..n).map(|i| code / levels.pow(i as u32) % levels).collect();
            let config = PhaseConfig::from_indices(&indices, bits)?;
            best = best.max(combined_channel(direct, &cascade, &config)?.norm());
        }
        worst = worst.max(best - chosen);
    }
    Ok((
        worst <= 1e-12,
        format!("largest shortfall against enumeration {worst:.2e}"),
    ))
}

fn phase_uniformity(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0A5E);
    let bits = cfg.b.min(6);
    let levels = 1usize << bits;
    let mut counts = vec![0usize; levels];
    let draws = 20_000;
    let config = random_phase_config(draws, bits, &mut rng)?;
    for theta in config.theta() {
        counts[crate::irs::quantize_angle(*theta, bits) as usize] += 1;
    }
    let expected = draws as f64 / levels as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = (levels - 1) as f64;
    let p = 1.0
        - statrs::distribution::ContinuousCDF::cdf(
            &statrs::distribution::ChiSquared::new(dof).map_err(|e| crate::error::Error::Degenerate(e.to_string()))?,
            chi2,
        );
    Ok((
        p > 1e-3,
        format!("chi-square {chi2:.2} on {dof} degrees of freedom, p = {p:.3}"),
    ))
}

fn normalization(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let channels = default_channels(cfg, cfg.seed ^ 0x40)?;
    let observer = Observer::new(&channels, cfg.noise_var())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x41);
    let mut record = ObservationRecord::empty(channels.eves.len(), cfg.noise_var(), cfg.delta_t);
    for _ in 0..64 {
        record.push(observer.observe(&random_phase_config(cfg.n, cfg.b, &mut rng)?, &mut rng)?);
    }
    let mut worst: f64 = 0.0;
    for mean_removal in [false, true] {
        let a = normalize(&record, mean_removal)?;
        let b = normalize(&record.scaled(123.456), mean_removal)?;
        let norm = a.h_a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
        for (x, y) in a.h_b.iter().zip(&b.h_b) {
            worst = worst.max((x - y).norm());
        }
    }
    Ok((worst < 1e-12, format!("largest deviation {worst:.2e}")))
}

fn keys_and_pad(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let channels = default_channels(cfg, cfg.seed ^ 0x50)?;
    let observer = Observer::new(&channels, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51);
    let mut record = ObservationRecord::empty(channels.eves.len(), 0.0, cfg.delta_t);
    for _ in 0..256 {
        record.push(observer.observe(&random_phase_config(cfg.n, cfg.b, &mut rng)?, &mut rng)?);
    }
    let keys = quantize_keys(&normalize(&record, true)?);
    let data: Vec<bool> = (0..256).map(|_| rng.random()).collect();
    let round_trip = otp_xor(&otp_xor(&data, &keys.bits_alice)?, &keys.bits_bob)?;
    let ok = keys.kdr() == 0.0 && round_trip == data;
    Ok((
        ok,
        format!(
            "disagreement rate {}, decryption {}",
            keys.kdr(),
            if round_trip == data { "exact" } else { "corrupted" }
        ),
    ))
}
