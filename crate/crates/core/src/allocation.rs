//! Splitting a coherence interval between key generation and encrypted data.
//!
//! `Q` training rounds use `2Q` of the `L` slots; the remaining `L - 2Q`
//! carry one-time-pad encrypted data at the maximum rate. The secure rate is
//! limited by whichever of the key bits or data bits runs out first.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::irs::{combined_channel, mrt_phase_config, random_phase_config, PhaseResolution};
use crate::keygen::{
    estimate_correlations, expected_correlations, kgr_closed_form, normalize, round_autocorrelation, ObservationRecord,
    Observer,
};
use crate::propagation::ChannelSet;

/// Largest admissible number of training rounds, `ceil(L / 2) - 1`.
pub fn max_rounds(l: usize) -> usize {
    l.div_ceil(2).saturating_sub(1)
}

/// Data rate with the surface aligned for maximum gain,
/// `(1 / dT) log2(1 + gamma_b |g*|^2)`.
pub fn mrt_rate(gamma_b: f64, channels: &ChannelSet, resolution: PhaseResolution, delta_t: f64) -> Result<f64> {
    if !(gamma_b >= 0.0 && gamma_b.is_finite()) {
        return Err(invalid("gamma_b", "reference SNR must be finite and non-negative"));
    }
    if !(delta_t > 0.0) {
        return Err(invalid("delta_t", "slot duration must be positive"));
    }
    let config = mrt_phase_config(channels, resolution)?;
    let g = combined_channel(channels.h_ab, &channels.cascade(), &config)?;
    Ok((gamma_b * g.norm_sqr()).ln_1p() / std::f64::consts::LN_2 / delta_t)
}

/// Secure transmission rate for `q` training rounds out of `l` slots:
/// `R_SKG q / L` while keys are the bottleneck, `R_MRT (L - 2q) / L` once the
/// data slots are.
pub fn edt_rate(r_skg: f64, r_mrt: f64, q: usize, l: usize) -> Result<f64> {
    if q < 1 || q > max_rounds(l) {
        return Err(invalid(
            "q",
            format!("must lie in [1, {}] for L = {l}, got {q}", max_rounds(l)),
        ));
    }
    if !(r_skg >= 0.0 && r_mrt >= 0.0) {
        return Err(invalid("rates", "must be non-negative"));
    }
    let data_slots = (l - 2 * q) as f64;
    // alpha <= (L - 2q) / q without dividing by a possibly zero R_MRT
    let key_limited = r_skg * q as f64 <= r_mrt * data_slots;
    Ok(if key_limited {
        r_skg * q as f64 / l as f64
    } else {
        r_mrt * data_slots / l as f64
    })
}

/// Gap between key bits and data bits, `q R_SKG - (L - 2q) R_MRT`; strictly
/// increasing in `q` whenever either rate is positive.
pub fn rate_gap(r_skg: f64, r_mrt: f64, q: usize, l: usize) -> f64 {
    q as f64 * r_skg - (l as f64 - 2.0 * q as f64) * r_mrt
}

/// Integer `Q` in `[q_th, ceil(L/2) - 1]` minimizing `|rate_gap|`, found by
/// bisection on the sign of the gap. The two final bracket ends are compared
/// and the smaller `Q` wins ties.
pub fn optimal_q_bisection(r_skg: f64, r_mrt: f64, l: usize, q_th: usize) -> Result<usize> {
    if !(r_skg >= 0.0 && r_mrt >= 0.0) || (r_skg == 0.0 && r_mrt == 0.0) {
        return Err(invalid("rates", "need non-negative rates with at least one positive"));
    }
    let hi = max_rounds(l);
    if q_th > hi || hi == 0 {
        return Err(invalid(
            "q_th",
            format!("empty search range [{q_th}, {hi}] for L = {l}"),
        ));
    }
    let mut q_min = q_th;
    let mut q_max = hi;
    while q_max - q_min > 1 {
        let q = (q_min + q_max) / 2;
        if rate_gap(r_skg, r_mrt, q, l) <= 0.0 {
            q_min = q;
        } else {
            q_max = q;
        }
    }
    let gap_min = rate_gap(r_skg, r_mrt, q_min, l).abs();
    let gap_max = rate_gap(r_skg, r_mrt, q_max, l).abs();
    Ok(if gap_max < gap_min { q_max } else { q_min })
}

/// How the key generation rate is obtained inside the allocation loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    /// Accumulate observations round by round and re-estimate the rate.
    Faithful,
    /// Evaluate the closed form at the correlations the estimator converges
    /// to, skipping the observation loop.
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationParams {
    /// Slots per coherence interval.
    pub l: usize,
    /// Minimum number of training rounds.
    pub q_th: usize,
    pub delta_t: f64,
    /// Estimation noise variance `sigma^2 / P`.
    pub noise_var: f64,
    /// Reference SNR `P / sigma^2`.
    pub gamma_b: f64,
    /// Phase resolution for both training and data transmission.
    pub bits: u32,
    /// Use continuous phases for data transmission.
    pub continuous_mrt: bool,
    pub mean_removal: bool,
    pub mode: RateMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub q_star: usize,
    pub r_skg: f64,
    pub r_mrt: f64,
    /// Secure rate at the number of rounds actually spent on training.
    pub r_edt: f64,
    /// Secure rate at `q_star`.
    pub c_edt: f64,
    /// `r_skg / r_mrt`.
    pub alpha: f64,
    pub l: usize,
    pub q_th: usize,
    /// Training rounds observed before the loop stopped.
    pub rounds_observed: usize,
    pub iterations: usize,
    /// Correlations behind `r_skg`.
    pub rho_l: f64,
    pub rho_e_max: f64,
    /// Lag-one autocorrelation of Alice's training observations.
    pub autocorrelation: f64,
}

/// Treats "no extractable secrecy" as a zero key rate.
fn rate_or_zero(rate: Result<f64>) -> Result<f64> {
    match rate {
        Err(Error::NoSecrecy { .. }) => Ok(0.0),
        other => other,
    }
}

struct Estimate {
    r_skg: f64,
    rho_l: f64,
    rho_e_max: f64,
    autocorrelation: f64,
}

fn finish(
    est: &Estimate,
    r_mrt: f64,
    q_star: usize,
    rounds: usize,
    iterations: usize,
    p: &AllocationParams,
) -> Result<AllocationResult> {
    let r_skg = est.r_skg;
    let c_edt = edt_rate(r_skg, r_mrt, q_star, p.l)?;
    let r_edt = edt_rate(r_skg, r_mrt, rounds.clamp(1, max_rounds(p.l)), p.l)?;
    Ok(AllocationResult {
        q_star,
        r_skg,
        r_mrt,
        r_edt,
        c_edt,
        alpha: if r_mrt > 0.0 { r_skg / r_mrt } else { f64::INFINITY },
        l: p.l,
        q_th: p.q_th,
        rounds_observed: rounds,
        iterations,
        rho_l: est.rho_l,
        rho_e_max: est.rho_e_max,
        autocorrelation: est.autocorrelation,
    })
}

/// Optimal slot allocation for one coherence interval.
///
/// In faithful mode, training starts with `q_th` rounds of random phases.
/// Each iteration estimates the key rate from all rounds so far, bisects for
/// `Q*` in `[Q, ceil(L/2) - 1]`, then observes one more round; the loop stops
/// once the round count reaches the last `Q*`.
pub fn run_algorithm_1<R: Rng + ?Sized>(
    channels: &ChannelSet,
    params: &AllocationParams,
    rng: &mut R,
) -> Result<AllocationResult> {
    let p = params;
    if p.q_th < 1 {
        return Err(invalid("q_th", "at least one training round is required"));
    }
    if p.l < 2 * p.q_th + 1 {
        return Err(invalid(
            "l",
            format!(
                "L = {} leaves no data slot after 2 * Q_th = {} training slots",
                p.l,
                2 * p.q_th
            ),
        ));
    }
    let resolution = if p.continuous_mrt {
        PhaseResolution::Continuous
    } else {
        PhaseResolution::Bits(p.bits)
    };
    let r_mrt = mrt_rate(p.gamma_b, channels, resolution, p.delta_t)?;

    if p.mode == RateMode::Fast {
        let rho = expected_correlations(channels, p.noise_var, p.mean_removal);
        let r_skg = rate_or_zero(kgr_closed_form(rho.rho_l, rho.rho_e_max(), p.delta_t))?;
        let q_star = optimal_q_bisection(r_skg, r_mrt, p.l, p.q_th)?;
        // random phases decorrelate the cascade between rounds, leaving the direct path
        let direct = channels.h_ab.norm_sqr();
        let total = direct + channels.cascade().iter().map(|c| c.norm_sqr()).sum::<f64>() + p.noise_var;
        let est = Estimate {
            r_skg,
            rho_l: rho.rho_l,
            rho_e_max: rho.rho_e_max(),
            autocorrelation: direct / total,
        };
        return finish(&est, r_mrt, q_star, q_star, 0, p);
    }

    let observer = Observer::new(channels, p.noise_var)?;
    let n = channels.elements();
    let mut record = ObservationRecord::empty(channels.eves.len(), p.noise_var, p.delta_t);
    let observe = |record: &mut ObservationRecord, rng: &mut R| -> Result<()> {
        let config = random_phase_config(n, p.bits, rng)?;
        record.push(observer.observe(&config, rng)?);
        Ok(())
    };
    for _ in 0..p.q_th {
        observe(&mut record, rng)?;
    }

    let limit = p.l.div_ceil(2);
    let mut q = p.q_th;
    for iteration in 1..=limit {
        let rho = estimate_correlations(&normalize(&record, p.mean_removal)?);
        let r_skg = rate_or_zero(kgr_closed_form(rho.rho_l, rho.rho_e_max(), p.delta_t))?;
        let q_star = optimal_q_bisection(r_skg, r_mrt, p.l, q.min(max_rounds(p.l)))?;
        q += 1;
        if q >= q_star {
            let est = Estimate {
                r_skg,
                rho_l: rho.rho_l,
                rho_e_max: rho.rho_e_max(),
                autocorrelation: round_autocorrelation(&record.h_a),
            };
            return finish(&est, r_mrt, q_star, record.rounds(), iteration, p);
        }
        observe(&mut record, rng)?;
        if iteration == limit {
            return Err(Error::NoConvergence {
                iterations: iteration,
                last_q: q,
                last_q_star: q_star,
            });
        }
    }
    unreachable!("loop returns on its final iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exhaustive_argmin(r_skg: f64, r_mrt: f64, l: usize, q_th: usize) -> usize {
        (q_th..=max_rounds(l))
            .min_by(|&a, &b| {
                rate_gap(r_skg, r_mrt, a, l)
                    .abs()
                    .total_cmp(&rate_gap(r_skg, r_mrt, b, l).abs())
            })
            .unwrap()
    }

    #[test]
    fn edt_examples() {
        assert_abs_diff_eq!(edt_rate(1000.0, 1000.0, 300, 1000).unwrap(), 300.0, epsilon = 1e-12);
        assert_abs_diff_eq!(edt_rate(1000.0, 1000.0, 400, 1000).unwrap(), 200.0, epsilon = 1e-12);
        for q in 1..500 {
            assert_eq!(edt_rate(0.0, 1000.0, q, 1000).unwrap(), 0.0);
        }
        assert!(edt_rate(1.0, 1.0, 0, 1000).is_err());
        assert!(edt_rate(1.0, 1.0, 500, 1000).is_err());
        assert!(edt_rate(1.0, 1.0, 500, 1001).is_ok());
    }

    #[test]
    fn bisection_examples() {
        assert_eq!(optimal_q_bisection(1000.0, 1000.0, 1000, 100).unwrap(), 333);
        assert_eq!(optimal_q_bisection(1e6, 1.0, 1000, 100).unwrap(), 100);
        assert_eq!(optimal_q_bisection(0.0, 1.0, 1000, 100).unwrap(), 499);
        assert!(optimal_q_bisection(0.0, 0.0, 1000, 100).is_err());
        assert!(optimal_q_bisection(1.0, 1.0, 1000, 500).is_err());
        assert_eq!(optimal_q_bisection(1.0, 1.0, 1000, 499).unwrap(), 499);
    }

    #[test]
    fn ties_prefer_fewer_rounds() {
        // gap(q) = 2q - 5: |gap(2)| = |gap(3)| = 1
        assert_eq!(optimal_q_bisection(1.0, 0.5, 10, 1).unwrap(), 2);
        // gap(q) = 2q - 20 stays negative over [1, 9]
        assert_eq!(optimal_q_bisection(0.0, 1.0, 20, 1).unwrap(), 9);
    }

    #[test]
    fn edt_is_unimodal_with_peak_at_crossing() {
        let (r_skg, r_mrt, l) = (1800.0, 7000.0, 1000);
        let curve: Vec<f64> = (1..=max_rounds(l))
            .map(|q| edt_rate(r_skg, r_mrt, q, l).unwrap())
            .collect();
        let peak = curve.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(curve[..=peak].windows(2).all(|w| w[1] >= w[0]));
        assert!(curve[peak..].windows(2).all(|w| w[1] <= w[0]));
        let crossing = l as f64 * r_mrt / (r_skg + 2.0 * r_mrt);
        assert!((peak as f64 + 1.0 - crossing).abs() <= 1.0);
        // both branches agree at the continuous crossing
        let key = r_skg * crossing / l as f64;
        let data = r_mrt * (l as f64 - 2.0 * crossing) / l as f64;
        assert_abs_diff_eq!(key, data, epsilon = 1e-9);
    }

    #[test]
    fn mrt_rate_examples() {
        let cs = ChannelSet {
            h_ab: Complex64::new(1.0, 0.0),
            u: vec![Complex64::new(0.0, 0.0)],
            v: vec![Complex64::new(0.0, 0.0)],
            eves: vec![],
            sigma_ab2: 1.0,
            sigma_u2: 1.0,
            sigma_v2: 1.0,
        };
        assert_eq!(mrt_rate(0.0, &cs, PhaseResolution::Continuous, 1e-3).unwrap(), 0.0);
        assert_abs_diff_eq!(
            mrt_rate(1.0, &cs, PhaseResolution::Continuous, 1e-3).unwrap(),
            1000.0,
            epsilon = 1e-9
        );
    }

    proptest! {
        #[test]
        fn bisection_equals_exhaustive(r_skg in 0.0..5000.0f64, r_mrt in 1e-3..20000.0f64, l in 3usize..3000, frac in 0.0..1.0f64) {
            let q_th = 1 + ((max_rounds(l) - 1) as f64 * frac) as usize;
            prop_assert_eq!(optimal_q_bisection(r_skg, r_mrt, l, q_th).unwrap(), exhaustive_argmin(r_skg, r_mrt, l, q_th));
        }

        #[test]
        fn edt_equals_min_form(r_skg in 0.0..5000.0f64, r_mrt in 0.0..20000.0f64, l in 3usize..3000, frac in 0.0..1.0f64) {
            let q = 1 + ((max_rounds(l) - 1) as f64 * frac) as usize;
            let expected = (q as f64 * r_skg).min((l - 2 * q) as f64 * r_mrt) / l as f64;
            let got = edt_rate(r_skg, r_mrt, q, l).unwrap();
            prop_assert!((got - expected).abs() <= 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn fast_mode_is_bisection_on_exact_rates() {
        use crate::propagation::{sample_channel_set, Geometry, PathLossModel, Point};
        let g = Geometry::new(100.0, 5.0, 5.0, vec![Point::new(0.4, 0.2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cs = sample_channel_set(&g, &PathLossModel::default(), 50, 0.2998, &mut rng).unwrap();
        let params = AllocationParams {
            l: 1000,
            q_th: 100,
            delta_t: 1e-3,
            noise_var: 10f64.powf(-11.6),
            gamma_b: 10f64.powf(11.6),
            bits: 3,
            continuous_mrt: false,
            mean_removal: true,
            mode: RateMode::Fast,
        };
        let res = run_algorithm_1(&cs, &params, &mut rng).unwrap();
        assert_eq!(
            res.q_star,
            optimal_q_bisection(res.r_skg, res.r_mrt, 1000, 100).unwrap()
        );
        assert!((100..=499).contains(&res.q_star));
        assert_abs_diff_eq!(res.alpha, res.r_skg / res.r_mrt, epsilon = 1e-15);
        // the smallest gap sits next to the crossing, at most one slot from the rate peak
        let curve: Vec<f64> = (100..=499)
            .map(|q| edt_rate(res.r_skg, res.r_mrt, q, 1000).unwrap())
            .collect();
        let peak = 100
            + curve
                .iter()
                .enumerate()
                .fold(0, |b, (i, v)| if *v > curve[b] { i } else { b });
        assert!(res.q_star.abs_diff(peak) <= 1, "{} vs {peak}", res.q_star);

        let faithful = run_algorithm_1(
            &cs,
            &AllocationParams {
                mode: RateMode::Faithful,
                ..params
            },
            &mut rng,
        )
        .unwrap();
        assert!((100..=499).contains(&faithful.q_star));
        assert!(faithful.rounds_observed + 1 >= faithful.q_star);
        assert!(
            (faithful.q_star as i64 - res.q_star as i64).abs() <= 2,
            "{} vs {}",
            faithful.q_star,
            res.q_star
        );
    }

    #[test]
    fn rejects_bad_params() {
        let cs = ChannelSet {
            h_ab: Complex64::new(1.0, 0.0),
            u: vec![Complex64::new(1.0, 0.0)],
            v: vec![Complex64::new(1.0, 0.0)],
            eves: vec![],
            sigma_ab2: 1.0,
            sigma_u2: 1.0,
            sigma_v2: 1.0,
        };
        let params = AllocationParams {
            l: 100,
            q_th: 50,
            delta_t: 1e-3,
            noise_var: 0.1,
            gamma_b: 10.0,
            bits: 2,
            continuous_mrt: false,
            mean_removal: true,
            mode: RateMode::Faithful,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(run_algorithm_1(&cs, &params, &mut rng).is_err());
        assert!(run_algorithm_1(&cs, &AllocationParams { q_th: 0, ..params }, &mut rng).is_err());
    }
}
