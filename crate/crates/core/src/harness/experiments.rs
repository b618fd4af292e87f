//! Monte Carlo drivers for the scheme comparison, the slot allocation sweep
//! and the randomly placed eavesdropper sweep.
//!
//! A trial is one coherence interval. Every trial owns independent random
//! streams derived from the master seed and the trial index, so results do
//! not depend on how trials are scheduled across threads. Sweep points reuse
//! the same streams (common random numbers), which keeps paired comparisons
//! between points tight.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use toml::Value;

use super::config::{EveModel, ExperimentConfig, MomentMode, Scheme};
use crate::allocation::{edt_rate, max_rounds, mrt_rate, run_algorithm_1, RateMode};
use crate::error::{Error, Result};
use crate::irs::{combined_channel, mrt_phase_config, random_phase_config, PhaseResolution};
use crate::keygen::{estimate_correlations, kgr_closed_form, normalize, ObservationRecord, Observer};
use crate::propagation::{sample_channel_set, ChannelSet, Point};
use crate::stats::{linear_fit, LinearFit, Summary};
use crate::stochgeo::{
    envelope_cross_moment, kgr_ppp, rho_e_max, sample_marked_ppp, sample_ppp, thin, uniform_in_disk,
};

/// Purpose of a per-trial random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EvePositions = 0,
    Channels = 1,
    Training = 2,
}

/// Generator for one trial and purpose. Streams of different trials and
/// purposes never overlap.
pub fn trial_rng(seed: u64, trial: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 * 4 + stream as u64);
    rng
}

fn rate_or_zero(rate: Result<f64>) -> Result<f64> {
    match rate {
        Err(Error::NoSecrecy { .. }) => Ok(0.0),
        other => other,
    }
}

fn resolution(cfg: &ExperimentConfig) -> PhaseResolution {
    if cfg.continuous_mrt {
        PhaseResolution::Continuous
    } else {
        PhaseResolution::Bits(cfg.b)
    }
}

/// Eavesdropper positions of one trial under the configured placement model.
pub fn eve_positions(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<Point>> {
    let mut rng = trial_rng(cfg.seed, trial, Stream::EvePositions);
    match cfg.eve_model {
        EveModel::Fixed => Ok((0..cfg.k).map(|_| uniform_in_disk(cfg.eve_radius, &mut rng)).collect()),
        EveModel::Ppp => sample_ppp(&cfg.ppp(cfg.eve_radius, cfg.lambda_e), &mut rng),
    }
}

/// Fading realization of one trial.
pub fn trial_channels(cfg: &ExperimentConfig, trial: usize, eves: Vec<Point>) -> Result<ChannelSet> {
    let geometry = cfg.geometry(eves)?;
    let mut rng = trial_rng(cfg.seed, trial, Stream::Channels);
    sample_channel_set(&geometry, &cfg.path_loss, cfg.n, cfg.wavelength(), &mut rng)
}

fn parallel_trials<T, F>(trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

/// Metrics of one scheme in one coherence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub r_skg: f64,
    pub r_mrt: f64,
    pub q_star: usize,
    /// Secure rate at the training rounds actually spent.
    pub r_edt: f64,
    /// Secure rate at `q_star`.
    pub c_edt: f64,
    pub rho_l: f64,
    pub rho_e_max: f64,
    /// Lag-one autocorrelation of Alice's training observations.
    pub autocorrelation: f64,
}

/// Benchmarks that keep the channel static during training: `fixed-irs`
/// holds the rate-optimal phases, `no-irs` sees only the direct path. Each
/// interval offers a single channel realization, credited as
/// `benchmark_key_samples` key samples.
fn static_scheme_trial(cfg: &ExperimentConfig, channels: &ChannelSet, scheme: Scheme) -> Result<TrialOutcome> {
    let nv = cfg.noise_var();
    let (r_mrt, g, eve_gains) = match scheme {
        Scheme::FixedIrs => {
            let config = mrt_phase_config(channels, resolution(cfg))?;
            let g = combined_channel(channels.h_ab, &channels.cascade(), &config)?;
            let eves = channels
                .eves
                .iter()
                .map(|e| combined_channel(e.h_be, &e.bob_cascade(&channels.v), &config))
                .collect::<Result<Vec<_>>>()?;
            (
                mrt_rate(cfg.gamma_b(), channels, resolution(cfg), cfg.delta_t)?,
                g,
                eves,
            )
        }
        Scheme::NoIrs => {
            let g = channels.h_ab;
            let r_mrt = (1.0 + cfg.gamma_b() * g.norm_sqr()).log2() / cfg.delta_t;
            (r_mrt, g, channels.eves.iter().map(|e| e.h_be).collect())
        }
        Scheme::RandomIrs => unreachable!("random phases run the full allocation loop"),
    };
    let snr_fraction = |x: Complex64| x.norm_sqr() / (x.norm_sqr() + nv);
    let rho_l = snr_fraction(g);
    let rho_e_max = channels
        .eves
        .iter()
        .zip(&eve_gains)
        .map(|(e, &ge)| e.correlation.abs() * (rho_l * snr_fraction(ge)).sqrt())
        .fold(0.0, f64::max);
    let r_skg = rate_or_zero(kgr_closed_form(rho_l, rho_e_max, cfg.delta_t))?;
    let q = cfg.benchmark_key_samples;
    let c_edt = edt_rate(r_skg, r_mrt, q, cfg.l)?;
    Ok(TrialOutcome {
        r_skg,
        r_mrt,
        q_star: q,
        r_edt: c_edt,
        c_edt,
        rho_l,
        rho_e_max,
        autocorrelation: 1.0,
    })
}

/// Runs one scheme on one coherence interval.
pub fn scheme_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    channels: &ChannelSet,
    scheme: Scheme,
    mode: RateMode,
) -> Result<TrialOutcome> {
    match scheme {
        Scheme::RandomIrs => {
            let mut rng = trial_rng(cfg.seed, trial, Stream::Training);
            let r = run_algorithm_1(channels, &cfg.allocation_params(mode), &mut rng)?;
            Ok(TrialOutcome {
                r_skg: r.r_skg,
                r_mrt: r.r_mrt,
                q_star: r.q_star,
                r_edt: r.r_edt,
                c_edt: r.c_edt,
                rho_l: r.rho_l,
                rho_e_max: r.rho_e_max,
                autocorrelation: r.autocorrelation,
            })
        }
        _ => static_scheme_trial(cfg, channels, scheme),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub axis: String,
    pub value: f64,
    pub scheme: Scheme,
    pub trial: usize,
    pub eves: usize,
    pub r_skg: f64,
    pub r_mrt: f64,
    pub q_star: usize,
    pub r_edt: f64,
    pub c_edt: f64,
    pub rho_l: f64,
    pub rho_e_max: f64,
    pub autocorrelation: f64,
}

impl CompareRow {
    fn new(axis: &str, value: f64, scheme: Scheme, trial: usize, eves: usize, o: TrialOutcome) -> Self {
        Self {
            axis: axis.to_string(),
            value,
            scheme,
            trial,
            eves,
            r_skg: o.r_skg,
            r_mrt: o.r_mrt,
            q_star: o.q_star,
            r_edt: o.r_edt,
            c_edt: o.c_edt,
            rho_l: o.rho_l,
            rho_e_max: o.rho_e_max,
            autocorrelation: o.autocorrelation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparePoint {
    pub axis: String,
    pub value: f64,
    pub scheme: Scheme,
    pub c_edt: Summary,
    pub r_edt: Summary,
    pub r_skg: Summary,
    pub r_mrt: Summary,
    pub q_star: Summary,
    pub rho_l: Summary,
    pub rho_e_max: Summary,
    pub autocorrelation: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub points: Vec<ComparePoint>,
}

impl CompareReport {
    pub fn point(&self, value: f64, scheme: Scheme) -> Option<&ComparePoint> {
        self.points.iter().find(|p| p.value == value && p.scheme == scheme)
    }
}

fn summarize<T>(rows: &[T], f: impl Fn(&T) -> f64) -> Summary {
    Summary::of(&rows.iter().map(f).collect::<Vec<_>>())
}

fn compare_point(axis: &str, value: f64, scheme: Scheme, rows: &[&CompareRow]) -> ComparePoint {
    ComparePoint {
        axis: axis.to_string(),
        value,
        scheme,
        c_edt: summarize(rows, |r| r.c_edt),
        r_edt: summarize(rows, |r| r.r_edt),
        r_skg: summarize(rows, |r| r.r_skg),
        r_mrt: summarize(rows, |r| r.r_mrt),
        q_star: summarize(rows, |r| r.q_star as f64),
        rho_l: summarize(rows, |r| r.rho_l),
        rho_e_max: summarize(rows, |r| r.rho_e_max),
        autocorrelation: summarize(rows, |r| r.autocorrelation),
    }
}

/// Secure rate of each selected scheme at every value of the sweep axis.
pub fn run_scheme_comparison(cfg: &ExperimentConfig) -> Result<CompareReport> {
    cfg.validate()?;
    let mode = cfg.rate_mode.resolve(RateMode::Faithful);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &value in &cfg.sweep_values {
        let mut point_cfg = cfg.clone();
        point_cfg.set(&cfg.sweep_axis, &Value::Float(value))?;
        point_cfg.validate()?;
        let per_trial = parallel_trials(cfg.trials, |trial| {
            let eves = eve_positions(&point_cfg, trial)?;
            let channels = trial_channels(&point_cfg, trial, eves)?;
            point_cfg
                .schemes
                .iter()
                .map(|&scheme| {
                    let outcome = scheme_trial(&point_cfg, trial, &channels, scheme, mode)?;
                    Ok(CompareRow::new(
                        &cfg.sweep_axis,
                        value,
                        scheme,
                        trial,
                        channels.eves.len(),
                        outcome,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let point_rows: Vec<CompareRow> = per_trial.into_iter().flatten().collect();
        for &scheme in &cfg.schemes {
            let selected: Vec<&CompareRow> = point_rows.iter().filter(|r| r.scheme == scheme).collect();
            points.push(compare_point(&cfg.sweep_axis, value, scheme, &selected));
        }
        rows.extend(point_rows);
    }
    Ok(CompareReport { rows, points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRow {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "P_dbm")]
    pub p_dbm: f64,
    pub trial: usize,
    pub q_star: usize,
    pub q_star_over_l: f64,
    pub r_skg: f64,
    pub r_mrt: f64,
    pub c_edt: f64,
}

/// Trial-averaged secure rate over every admissible `Q` for one `(L, P)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationCurve {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "P_dbm")]
    pub p_dbm: f64,
    pub q: Vec<usize>,
    pub r_edt: Vec<f64>,
    /// `Q` maximizing the averaged curve, smallest on ties.
    pub argmax: usize,
    pub q_star: Summary,
    pub q_star_over_l: Summary,
    pub c_edt: Summary,
}

impl AllocationCurve {
    /// Whether the curve rises to its maximum and falls afterwards.
    pub fn is_unimodal(&self) -> bool {
        let peak = self.q.iter().position(|&q| q == self.argmax).unwrap_or(0);
        let rel = |a: f64, b: f64| b - a >= -1e-12 * a.abs().max(b.abs());
        self.r_edt[..=peak].windows(2).all(|w| rel(w[0], w[1]))
            && self.r_edt[peak..].windows(2).all(|w| rel(w[1], w[0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub rows: Vec<AllocationRow>,
    pub curves: Vec<AllocationCurve>,
}

impl AllocationReport {
    pub fn curve(&self, l: usize, p_dbm: f64) -> Option<&AllocationCurve> {
        self.curves.iter().find(|c| c.l == l && c.p_dbm == p_dbm)
    }
}

/// Secure rate against the number of training rounds for every pair of
/// interval length and transmit power.
pub fn run_allocation_sweep(cfg: &ExperimentConfig) -> Result<AllocationReport> {
    cfg.validate()?;
    let mode = cfg.rate_mode.resolve(RateMode::Fast);
    let channels = parallel_trials(cfg.trials, |trial| {
        trial_channels(cfg, trial, eve_positions(cfg, trial)?)
    })?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &l in &cfg.alloc_l_values {
        for &p_dbm in &cfg.alloc_p_values {
            let mut pair_cfg = cfg.clone();
            pair_cfg.l = l;
            pair_cfg.p_dbm = p_dbm;
            let params = pair_cfg.allocation_params(mode);
            let results = parallel_trials(cfg.trials, |trial| {
                let mut rng = trial_rng(cfg.seed, trial, Stream::Training);
                run_algorithm_1(&channels[trial], &params, &mut rng)
            })?;
            let q: Vec<usize> = (cfg.q_th..=max_rounds(l)).collect();
            let r_edt = q
                .iter()
                .map(|&q| {
                    let total = results
                        .iter()
                        .map(|r| edt_rate(r.r_skg, r.r_mrt, q, l))
                        .sum::<Result<f64>>()?;
                    Ok(total / results.len() as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let argmax = q[r_edt
                .iter()
                .enumerate()
                .fold(0, |best, (i, v)| if *v > r_edt[best] { i } else { best })];
            let pair_rows: Vec<AllocationRow> = results
                .iter()
                .enumerate()
                .map(|(trial, r)| AllocationRow {
                    l,
                    p_dbm,
                    trial,
                    q_star: r.q_star,
                    q_star_over_l: r.q_star as f64 / l as f64,
                    r_skg: r.r_skg,
                    r_mrt: r.r_mrt,
                    c_edt: r.c_edt,
                })
                .collect();
            curves.push(AllocationCurve {
                l,
                p_dbm,
                q,
                r_edt,
                argmax,
                q_star: summarize(&pair_rows, |r| r.q_star as f64),
                q_star_over_l: summarize(&pair_rows, |r| r.q_star_over_l),
                c_edt: summarize(&pair_rows, |r| r.c_edt),
            });
            rows.extend(pair_rows);
        }
    }
    Ok(AllocationReport { rows, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PppRow {
    pub radius: f64,
    pub lambda_e: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub eves: usize,
    pub rho_l_sim: f64,
    pub rho_e_max_sim: f64,
    pub r_skg_sim: f64,
    pub rho_l_theory: f64,
    pub rho_e_max_theory: f64,
    pub r_skg_theory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PppPoint {
    pub radius: f64,
    pub lambda_e: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub eves: Summary,
    pub r_skg_sim: Summary,
    pub r_skg_theory: Summary,
    /// `|mean sim - mean theory| / mean theory`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PppFit {
    pub radius: f64,
    pub lambda_e: f64,
    /// Line through the mean simulated rate against `N`.
    pub sim: LinearFit,
    pub theory: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PppReport {
    pub rows: Vec<PppRow>,
    pub points: Vec<PppPoint>,
    pub fits: Vec<PppFit>,
}

impl PppReport {
    pub fn point(&self, radius: f64, lambda_e: f64, n: usize) -> Option<&PppPoint> {
        self.points
            .iter()
            .find(|p| p.radius == radius && p.lambda_e == lambda_e && p.n == n)
    }

    pub fn fit(&self, radius: f64, lambda_e: f64) -> Option<&PppFit> {
        self.fits.iter().find(|f| f.radius == radius && f.lambda_e == lambda_e)
    }
}

/// Keeps the first `n` surface elements.
fn truncate(channels: &ChannelSet, n: usize) -> ChannelSet {
    let mut out = channels.clone();
    out.u.truncate(n);
    out.v.truncate(n);
    for e in &mut out.eves {
        e.e.truncate(n);
    }
    out
}

/// Moments of the combined legitimate and eavesdropper channels entering the
/// predicted eavesdropper correlation: `(E|g_ab||g_be|, E|g_ab|^2, E|g_be|^2)`.
fn predicted_moments(cfg: &ExperimentConfig, channels: &ChannelSet, record: &ObservationRecord) -> (f64, f64, f64) {
    let direct = if cfg.mean_removal {
        0.0
    } else {
        channels.h_ab.norm_sqr()
    };
    let power = direct + channels.cascade().iter().map(|c| c.norm_sqr()).sum::<f64>();
    let analytic = (envelope_cross_moment(power, power), power, power);
    if cfg.ppp_moments == MomentMode::Analytic {
        return analytic;
    }
    // nearest sampled eavesdropper, sample moments with the noise power removed
    let Some(k) = (0..channels.eves.len()).min_by(|&a, &b| {
        let d = |i: usize| channels.eves[i].distances.d_ae;
        d(a).total_cmp(&d(b))
    }) else {
        return analytic;
    };
    let centered = |xs: &[Complex64]| -> Vec<Complex64> {
        let m = if cfg.mean_removal {
            xs.iter().sum::<Complex64>() / xs.len() as f64
        } else {
            Complex64::new(0.0, 0.0)
        };
        xs.iter().map(|x| x - m).collect()
    };
    let b = centered(&record.h_b);
    let e = centered(&record.eves[k].h_be);
    let q = b.len() as f64;
    let cross = b.iter().zip(&e).map(|(x, y)| x.norm() * y.norm()).sum::<f64>() / q;
    let floor = 1e-3 * power;
    let p_b = (b.iter().map(|x| x.norm_sqr()).sum::<f64>() / q - record.noise_var).max(floor);
    let p_e = (e.iter().map(|x| x.norm_sqr()).sum::<f64>() / q - record.noise_var).max(floor);
    (cross.min((p_b * p_e).sqrt()), p_b, p_e)
}

/// Key generation rate with randomly placed eavesdroppers against the
/// number of surface elements: sampled eavesdroppers next to the
/// nearest-distance prediction, for every `(radius, intensity)` pair.
pub fn run_ppp_sweep(cfg: &ExperimentConfig) -> Result<PppReport> {
    cfg.validate()?;
    let nv = cfg.noise_var();
    let lambda_max = cfg.ppp_intensities.iter().copied().fold(0.0, f64::max);
    let n_max = cfg.ppp_n_values.iter().copied().max().unwrap_or(cfg.n);
    let mut rows = Vec::new();
    for &radius in &cfg.ppp_radii {
        // one realization per trial at the largest intensity, thinned below
        let marked = parallel_trials(cfg.trials, |trial| {
            let mut rng = trial_rng(cfg.seed, trial, Stream::EvePositions);
            sample_marked_ppp(&cfg.ppp(radius, lambda_max), &mut rng)
        })?;
        for &lambda_e in &cfg.ppp_intensities {
            let per_trial = parallel_trials(cfg.trials, |trial| {
                let eves = thin(&marked[trial], lambda_e, lambda_max);
                let eve_count = eves.len();
                let mut full_cfg = cfg.clone();
                full_cfg.n = n_max;
                let full = trial_channels(&full_cfg, trial, eves)?;
                cfg.ppp_n_values
                    .iter()
                    .map(|&n| {
                        let channels = truncate(&full, n);
                        let mut rng = trial_rng(cfg.seed, trial, Stream::Training);
                        let observer = Observer::new(&channels, nv)?;
                        let mut record = ObservationRecord::empty(channels.eves.len(), nv, cfg.delta_t);
                        for _ in 0..cfg.ppp_rounds {
                            let config = random_phase_config(n, cfg.b, &mut rng)?;
                            record.push(observer.observe(&config, &mut rng)?);
                        }
                        let sim = estimate_correlations(&normalize(&record, cfg.mean_removal)?);
                        let r_skg_sim = rate_or_zero(kgr_closed_form(sim.rho_l, sim.rho_e_max(), cfg.delta_t))?;

                        let (cross, p_ab, p_be) = predicted_moments(cfg, &channels, &record);
                        let rho_l_theory = p_ab / (p_ab + nv);
                        let rho_e_theory = rho_e_max(cross, p_ab, p_be, nv, lambda_e, cfg.wavelength())?;
                        let r_skg_theory = rate_or_zero(kgr_ppp(rho_l_theory, rho_e_theory, cfg.delta_t))?;
                        Ok(PppRow {
                            radius,
                            lambda_e,
                            n,
                            trial,
                            eves: eve_count,
                            rho_l_sim: sim.rho_l,
                            rho_e_max_sim: sim.rho_e_max(),
                            r_skg_sim,
                            rho_l_theory,
                            rho_e_max_theory: rho_e_theory,
                            r_skg_theory,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            rows.extend(per_trial.into_iter().flatten());
        }
    }
    // rows grouped by (radius, intensity), then trial, then N
    let mut points = Vec::new();
    let mut fits = Vec::new();
    for &radius in &cfg.ppp_radii {
        for &lambda_e in &cfg.ppp_intensities {
            let mut sim_means = Vec::new();
            let mut theory_means = Vec::new();
            for &n in &cfg.ppp_n_values {
                let selected: Vec<&PppRow> = rows
                    .iter()
                    .filter(|r| r.radius == radius && r.lambda_e == lambda_e && r.n == n)
                    .collect();
                let sim = summarize(&selected, |r| r.r_skg_sim);
                let theory = summarize(&selected, |r| r.r_skg_theory);
                sim_means.push(sim.mean);
                theory_means.push(theory.mean);
                points.push(PppPoint {
                    radius,
                    lambda_e,
                    n,
                    eves: summarize(&selected, |r| r.eves as f64),
                    r_skg_sim: sim,
                    r_skg_theory: theory,
                    relative_gap: (sim.mean - theory.mean).abs() / theory.mean,
                });
            }
            let ns: Vec<f64> = cfg.ppp_n_values.iter().map(|&n| n as f64).collect();
            fits.push(PppFit {
                radius,
                lambda_e,
                sim: linear_fit(&ns, &sim_means),
                theory: linear_fit(&ns, &theory_means),
            });
        }
    }
    Ok(PppReport { rows, points, fits })
}
