//! Distributional checks of the samplers and estimators against analytic
//! references.

use std::f64::consts::{PI, TAU};

use irskey::irs::{quantize_angle, random_phase_config};
use irskey::keygen::{estimate_correlations, expected_correlations, normalize, ObservationRecord, Observer};
use irskey::propagation::{sample_channel_set, Geometry, PathLossModel, Point};
use irskey::special::bessel_j0;
use irskey::stochgeo::{sample_marked_ppp, sample_ppp, thin, PppConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical value at significance 0.001.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn geometry() -> Geometry {
    Geometry::new(100.0, 5.0, 5.0, vec![Point::new(0.3, -0.4)]).unwrap()
}

#[test]
fn fading_components_are_gaussian_with_path_loss_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = PathLossModel::default();
    let n = 4000;
    let mut direct = Vec::with_capacity(2 * n);
    let mut element = Vec::with_capacity(2 * n);
    let mut sigma = (0.0, 0.0);
    for _ in 0..n {
        let cs = sample_channel_set(&geometry(), &model, 1, 0.3, &mut rng).unwrap();
        sigma = (cs.sigma_ab2, cs.sigma_u2);
        direct.extend([cs.h_ab.re, cs.h_ab.im]);
        element.extend([cs.u[0].re, cs.u[0].im]);
    }
    for (values, var) in [(direct, sigma.0), (element, sigma.1)] {
        let normal = Normal::new(0.0, (var / 2.0).sqrt()).unwrap();
        let d = ks_statistic(values.clone(), |x| normal.cdf(x));
        assert!(d < ks_critical(values.len()), "KS statistic {d}");
    }
}

#[test]
fn random_phases_are_uniform_on_the_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for bits in [1, 2, 3, 5] {
        let levels = 1usize << bits;
        let config = random_phase_config(40_000, bits, &mut rng).unwrap();
        assert!(config.on_grid());
        let mut counts = vec![0usize; levels];
        for &t in config.theta() {
            counts[quantize_angle(t, bits) as usize] += 1;
        }
        let expected = 40_000.0 / levels as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((levels - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 1e-3, "bits {bits}: chi-square {chi2}, p {p}");
    }
}

#[test]
fn nearest_distance_follows_rayleigh_law() {
    let lambda = 1.5;
    let cfg = PppConfig {
        lambda_e: lambda,
        radius: (40.0 / (PI * lambda)).sqrt(),
        wavelength: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = (0..20_000)
        .map(|_| {
            sample_ppp(&cfg, &mut rng)
                .unwrap()
                .iter()
                .map(|p| p.norm())
                .fold(cfg.radius, f64::min)
        })
        .collect();
    let d = ks_statistic(samples, |r| 1.0 - (-lambda * PI * r * r).exp());
    assert!(d < ks_critical(20_000), "KS statistic {d}");
}

#[test]
fn disk_counts_and_radii() {
    let cfg = PppConfig {
        lambda_e: 2.0,
        radius: 1.0,
        wavelength: 0.3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = 20_000;
    let mut total = 0usize;
    let mut radii = Vec::new();
    for _ in 0..draws {
        let pts = sample_ppp(&cfg, &mut rng).unwrap();
        total += pts.len();
        radii.extend(pts.iter().map(|p| p.norm()));
    }
    let mean = total as f64 / draws as f64;
    // Poisson count: standard error sqrt(2 pi / draws)
    assert!(
        (mean - 2.0 * PI).abs() < 4.0 * (2.0 * PI / draws as f64).sqrt(),
        "mean count {mean}"
    );
    let n = radii.len();
    let d = ks_statistic(radii, |r| r * r);
    assert!(d < ks_critical(n), "radial KS statistic {d}");
}

#[test]
fn thinning_keeps_the_expected_fraction_and_nests() {
    let cfg = PppConfig {
        lambda_e: 2.0,
        radius: 1.0,
        wavelength: 0.3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut kept, mut all) = (0usize, 0usize);
    for _ in 0..10_000 {
        let marked = sample_marked_ppp(&cfg, &mut rng).unwrap();
        let low = thin(&marked, 0.5, 2.0);
        let high = thin(&marked, 2.0, 2.0);
        assert_eq!(high.len(), marked.len());
        assert!(low.iter().all(|p| high.contains(p)));
        kept += low.len();
        all += marked.len();
    }
    let frac = kept as f64 / all as f64;
    assert!((frac - 0.25).abs() < 0.01, "kept fraction {frac}");
}

#[test]
fn bessel_matches_integral_representation() {
    for i in 0..=200 {
        let x = i as f64 * 0.25;
        // (1 / pi) int_0^pi cos(x sin t) dt by the midpoint rule
        let m = 4000;
        let integral = (0..m)
            .map(|k| (x * (PI * (k as f64 + 0.5) / m as f64).sin()).cos())
            .sum::<f64>()
            / m as f64;
        assert!((bessel_j0(x) - integral).abs() < 1e-9, "x = {x}");
    }
    assert!((bessel_j0(TAU) - 0.220_276_908_5).abs() < 1e-9);
}

fn long_record(eve_beside: bool, rounds: usize, seed: u64) -> (irskey::ChannelSet, ObservationRecord) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // an eavesdropper far enough away to be practically independent
    let eve = if eve_beside {
        Point::new(0.0, 0.95)
    } else {
        Point::new(0.95, 0.0)
    };
    let g = Geometry::new(100.0, 5.0, 5.0, vec![eve]).unwrap();
    let cs = sample_channel_set(&g, &PathLossModel::default(), 50, 0.2998, &mut rng).unwrap();
    let noise = 10f64.powf(-11.6);
    let observer = Observer::new(&cs, noise).unwrap();
    let mut record = ObservationRecord::empty(1, noise, 1e-3);
    for _ in 0..rounds {
        record.push(
            observer
                .observe(&random_phase_config(50, 3, &mut rng).unwrap(), &mut rng)
                .unwrap(),
        );
    }
    (cs, record)
}

#[test]
fn sample_correlations_converge_to_their_expectation() {
    for (seed, mean_removal) in [(10, true), (11, false)] {
        let (cs, record) = long_record(true, 20_000, seed);
        let sample = estimate_correlations(&normalize(&record, mean_removal).unwrap());
        let expected = expected_correlations(&cs, record.noise_var, mean_removal);
        assert!(
            (sample.rho_l - expected.rho_l).abs() < 0.01,
            "{mean_removal}: {sample:?} vs {expected:?}"
        );
        assert!(
            (sample.rho_e[0] - expected.rho_e[0]).abs() < 0.03,
            "{mean_removal}: {sample:?} vs {expected:?}"
        );
    }
}

#[test]
fn static_direct_path_inflates_eavesdropper_correlation_without_mean_removal() {
    let mut off = 0.0;
    let mut on = 0.0;
    let trials = 40;
    for seed in 0..trials {
        let (_, record) = long_record(false, 400, 100 + seed);
        off += estimate_correlations(&normalize(&record, false).unwrap()).rho_e[0];
        on += estimate_correlations(&normalize(&record, true).unwrap()).rho_e[0];
    }
    let (off, on) = (off / trials as f64, on / trials as f64);
    assert!(off > 0.6, "without mean removal {off}");
    assert!(on < 0.35, "with mean removal {on}");
}

#[test]
fn combined_channel_correlation_matches_spatial_model() {
    let wavelength = 0.2998;
    let noise = 1e-18;
    for d in [0.05, 0.1, 0.2] {
        let g = Geometry::new(100.0, 5.0, 5.0, vec![Point::new(d, 0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let (mut cross, mut pb, mut pe) = (num_complex::Complex64::new(0.0, 0.0), 0.0, 0.0);
        for _ in 0..20_000 {
            let cs = sample_channel_set(&g, &PathLossModel::default(), 20, wavelength, &mut rng).unwrap();
            let observer = Observer::new(&cs, noise).unwrap();
            let round = observer
                .observe(&random_phase_config(20, 3, &mut rng).unwrap(), &mut rng)
                .unwrap();
            let (b, be) = (round.h_b, round.eves[0].1);
            cross += b * be.conj();
            pb += b.norm_sqr();
            pe += be.norm_sqr();
        }
        let rho2 = cross.norm_sqr() / (pb * pe);
        let j0 = bessel_j0(TAU * d / wavelength);
        assert!((rho2 - j0 * j0).abs() < 0.03, "d = {d}: {rho2} vs {}", j0 * j0);
    }
}
