//! Channel observations, correlation statistics and the key generation rate.
//!
//! Pilot exchange is simulated in its least-squares estimate form: every
//! node observes its combined channel plus complex Gaussian estimation noise
//! of variance `noise_var = sigma^2 / P`.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::irs::{combined_channel, PhaseConfig};
use crate::propagation::{complex_gaussian, ChannelSet};

/// Estimates collected by one eavesdropper.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EveStreams {
    /// Observations of Alice's pilots.
    pub h_ae: Vec<Complex64>,
    /// Observations of Bob's pilots.
    pub h_be: Vec<Complex64>,
}

/// Estimates from a single training round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundObservation {
    pub h_a: Complex64,
    pub h_b: Complex64,
    /// `(h_ae, h_be)` per eavesdropper.
    pub eves: Vec<(Complex64, Complex64)>,
}

/// `Q` rounds of channel estimates at Alice, Bob and every Eve.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub h_a: Vec<Complex64>,
    pub h_b: Vec<Complex64>,
    pub eves: Vec<EveStreams>,
    pub noise_var: f64,
    /// Duration of one time slot in seconds.
    pub delta_t: f64,
}

impl ObservationRecord {
    pub fn empty(eves: usize, noise_var: f64, delta_t: f64) -> Self {
        Self {
            h_a: Vec::new(),
            h_b: Vec::new(),
            eves: vec![EveStreams::default(); eves],
            noise_var,
            delta_t,
        }
    }

    pub fn rounds(&self) -> usize {
        self.h_a.len()
    }

    pub fn push(&mut self, round: RoundObservation) {
        debug_assert_eq!(round.eves.len(), self.eves.len());
        self.h_a.push(round.h_a);
        self.h_b.push(round.h_b);
        for (streams, (ae, be)) in self.eves.iter_mut().zip(round.eves) {
            streams.h_ae.push(ae);
            streams.h_be.push(be);
        }
    }

    /// Every observation multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &[Complex64]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        Self {
            h_a: scale(&self.h_a),
            h_b: scale(&self.h_b),
            eves: self
                .eves
                .iter()
                .map(|e| EveStreams {
                    h_ae: scale(&e.h_ae),
                    h_be: scale(&e.h_be),
                })
                .collect(),
            noise_var: self.noise_var * factor * factor,
            delta_t: self.delta_t,
        }
    }
}

/// Produces per-round observations for a fixed coherence interval.
pub struct Observer<'a> {
    channels: &'a ChannelSet,
    cascade: Vec<Complex64>,
    eve_bob: Vec<Vec<Complex64>>,
    eve_alice: Vec<Vec<Complex64>>,
    noise_var: f64,
}

impl<'a> Observer<'a> {
    pub fn new(channels: &'a ChannelSet, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(invalid(
                "noise_var",
                format!("must be a finite non-negative power, got {noise_var}"),
            ));
        }
        Ok(Self {
            channels,
            cascade: channels.cascade(),
            eve_bob: channels.eves.iter().map(|e| e.bob_cascade(&channels.v)).collect(),
            eve_alice: channels.eves.iter().map(|e| e.alice_cascade(&channels.u)).collect(),
            noise_var,
        })
    }

    pub fn observe<R: Rng + ?Sized>(&self, config: &PhaseConfig, rng: &mut R) -> Result<RoundObservation> {
        let g = combined_channel(self.channels.h_ab, &self.cascade, config)?;
        let h_b = g + complex_gaussian(rng, self.noise_var);
        let h_a = g + complex_gaussian(rng, self.noise_var);
        let mut eves = Vec::with_capacity(self.eve_bob.len());
        for ((eve, bob), alice) in self.channels.eves.iter().zip(&self.eve_bob).zip(&self.eve_alice) {
            let ae = combined_channel(eve.h_ae, alice, config)? + complex_gaussian(rng, self.noise_var);
            let be = combined_channel(eve.h_be, bob, config)? + complex_gaussian(rng, self.noise_var);
            eves.push((ae, be));
        }
        Ok(RoundObservation { h_a, h_b, eves })
    }
}

/// Observes one round per configuration.
pub fn observe_rounds<R: Rng + ?Sized>(
    channels: &ChannelSet,
    configs: &[PhaseConfig],
    noise_var: f64,
    delta_t: f64,
    rng: &mut R,
) -> Result<ObservationRecord> {
    if configs.is_empty() {
        return Err(invalid("configs", "at least one training round is required"));
    }
    let observer = Observer::new(channels, noise_var)?;
    let mut record = ObservationRecord::empty(channels.eves.len(), noise_var, delta_t);
    for config in configs {
        record.push(observer.observe(config, rng)?);
    }
    Ok(record)
}

/// Observation streams scaled to unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRecord {
    pub h_a: Vec<Complex64>,
    pub h_b: Vec<Complex64>,
    pub eves: Vec<EveStreams>,
    pub mean_removed: bool,
    pub delta_t: f64,
}

fn normalize_stream(stream: &[Complex64], mean_removal: bool, name: &str) -> Result<Vec<Complex64>> {
    if stream.is_empty() {
        return Err(Error::Degenerate(format!("stream {name} is empty")));
    }
    let mean = if mean_removal {
        stream.iter().sum::<Complex64>() / stream.len() as f64
    } else {
        Complex64::new(0.0, 0.0)
    };
    let norm = stream.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Degenerate(format!("stream {name} has zero norm")));
    }
    Ok(stream.iter().map(|x| (x - mean) / norm).collect())
}

/// Divides every stream by its own norm, after subtracting the per-stream
/// sample mean when `mean_removal` is set.
pub fn normalize(record: &ObservationRecord, mean_removal: bool) -> Result<NormalizedRecord> {
    Ok(NormalizedRecord {
        h_a: normalize_stream(&record.h_a, mean_removal, "A")?,
        h_b: normalize_stream(&record.h_b, mean_removal, "B")?,
        eves: record
            .eves
            .iter()
            .enumerate()
            .map(|(k, e)| {
                Ok(EveStreams {
                    h_ae: normalize_stream(&e.h_ae, mean_removal, &format!("AE{k}"))?,
                    h_be: normalize_stream(&e.h_be, mean_removal, &format!("BE{k}"))?,
                })
            })
            .collect::<Result<_>>()?,
        mean_removed: mean_removal,
        delta_t: record.delta_t,
    })
}

/// Correlation statistics entering the key rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimates {
    pub rho_l: f64,
    pub rho_e: Vec<f64>,
}

impl CorrelationEstimates {
    /// Largest eavesdropper correlation, zero without eavesdroppers.
    pub fn rho_e_max(&self) -> f64 {
        self.rho_e.iter().copied().fold(0.0, f64::max)
    }
}

fn inner_magnitude(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y.conj())
        .sum::<Complex64>()
        .norm()
        .min(1.0)
}

/// `rho_l = |<A, B>|` and `rho_e[k] = |<B, BE_k>|` on unit-norm streams.
pub fn estimate_correlations(record: &NormalizedRecord) -> CorrelationEstimates {
    CorrelationEstimates {
        rho_l: inner_magnitude(&record.h_a, &record.h_b),
        rho_e: record
            .eves
            .iter()
            .map(|e| inner_magnitude(&record.h_b, &e.h_be))
            .collect(),
    }
}

/// Correlations the sample estimator converges to within one coherence
/// interval, averaging over uniform random phases and noise.
pub fn expected_correlations(channels: &ChannelSet, noise_var: f64, mean_removal: bool) -> CorrelationEstimates {
    let cascade = channels.cascade();
    let static_part = |x: Complex64| if mean_removal { Complex64::new(0.0, 0.0) } else { x };
    let s_ab = static_part(channels.h_ab).norm_sqr() + cascade.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let rho_e = channels
        .eves
        .iter()
        .map(|eve| {
            let bob = eve.bob_cascade(&channels.v);
            let s_be = static_part(eve.h_be).norm_sqr() + bob.iter().map(|c| c.norm_sqr()).sum::<f64>();
            let cross = static_part(channels.h_ab) * static_part(eve.h_be).conj()
                + cascade.iter().zip(&bob).map(|(c, d)| c * d.conj()).sum::<Complex64>();
            (cross.norm() / ((s_ab + noise_var) * (s_be + noise_var)).sqrt()).min(1.0)
        })
        .collect();
    CorrelationEstimates {
        rho_l: s_ab / (s_ab + noise_var),
        rho_e,
    }
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if !(x.is_finite() && (-1.0..=1.0).contains(&x)) {
        return Err(invalid(name, format!("correlation must lie in [-1, 1], got {x}")));
    }
    Ok(())
}

/// Closed-form key generation rate in bits per second,
/// `(1 / 2dT) log2((1 - rho_e^2)^2 / (1 + 2 rho_l rho_e^2 - 2 rho_e^2 - rho_l^2))`.
///
/// With several eavesdroppers pass the largest `rho_e`: the rate decreases
/// in `rho_e^2`, so this is the minimum over per-Eve rates.
pub fn kgr_closed_form(rho_l: f64, rho_e_max: f64, delta_t: f64) -> Result<f64> {
    check_unit("rho_l", rho_l)?;
    check_unit("rho_e", rho_e_max)?;
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(invalid("delta_t", "slot duration must be positive"));
    }
    let s = rho_e_max * rho_e_max;
    if (rho_l - s).abs() <= 1e-12 {
        return Ok(0.0);
    }
    if rho_l < s {
        return Err(Error::NoSecrecy { rho_l, rho_e_sq: s });
    }
    if rho_l >= 1.0 {
        return Err(Error::PerfectCorrelation(rho_l));
    }
    // 1 + 2 rho_l s - 2 s - rho_l^2 = (1 - rho_l)(1 + rho_l - 2 s)
    let ratio = (1.0 - s) * (1.0 - s) / ((1.0 - rho_l) * (1.0 + rho_l - 2.0 * s));
    Ok(ratio.log2() / (2.0 * delta_t))
}

/// Partial derivatives of [`kgr_closed_form`] with respect to `rho_e^2` and
/// `rho_l`, in that order.
pub fn kgr_sensitivity(rho_l: f64, rho_e: f64, delta_t: f64) -> (f64, f64) {
    let s = rho_e * rho_e;
    let k = 1.0 / (delta_t * std::f64::consts::LN_2);
    let common = 1.0 + rho_l - 2.0 * s;
    let d_s = k * (s - rho_l) / ((1.0 - s) * common);
    let d_l = k * (rho_l - s) / ((1.0 - rho_l) * common);
    (d_s, d_l)
}

/// Conditional mutual information `I(A; B | AE, BE)` in bits per sample,
/// computed from determinants of the unit-diagonal covariance of
/// `(A, B, AE, BE)` where only `rho_l` (A-B) and `rho_e` (A-BE, B-BE) are
/// non-zero off the diagonal.
pub fn conditional_mutual_information(rho_l: f64, rho_e: f64) -> Result<f64> {
    check_unit("rho_l", rho_l)?;
    check_unit("rho_e", rho_e)?;
    #[rustfmt::skip]
    let w = Matrix4::new(
        1.0,   rho_l, 0.0, rho_e,
        rho_l, 1.0,   0.0, rho_e,
        0.0,   0.0,   1.0, 0.0,
        rho_e, rho_e, 0.0, 1.0,
    );
    const A: usize = 0;
    const B: usize = 1;
    const AE: usize = 2;
    const BE: usize = 3;
    let minor = |idx: &[usize]| DMatrix::from_fn(idx.len(), idx.len(), |i, j| w[(idx[i], idx[j])]).determinant();
    let dets = [
        minor(&[A, AE, BE]),
        minor(&[B, AE, BE]),
        minor(&[AE, BE]),
        minor(&[A, B, AE, BE]),
    ];
    if let Some(d) = dets.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::Degenerate(format!(
            "covariance is not positive definite (determinant {d}) at rho_l = {rho_l}, rho_e = {rho_e}"
        )));
    }
    Ok((dets[0] * dets[1] / (dets[2] * dets[3])).log2())
}

/// Correlation between observations from two different training rounds,
/// `sigma_d^2 / (sigma_d^2 + N sigma_u^2 sigma_v^2)`, or 1 for the same
/// round. Assumes zero-mean phasors, which holds for any uniform grid.
pub fn autocorrelation_theoretical(
    sigma_direct2: f64,
    sigma_u2: f64,
    sigma_v2: f64,
    n: usize,
    same_round: bool,
) -> Result<f64> {
    for (name, p) in [
        ("sigma_direct2", sigma_direct2),
        ("sigma_u2", sigma_u2),
        ("sigma_v2", sigma_v2),
    ] {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(invalid(name, "power must be finite and non-negative"));
        }
    }
    if n == 0 {
        return Err(invalid("n", "the surface needs at least one element"));
    }
    let total = sigma_direct2 + n as f64 * sigma_u2 * sigma_v2;
    if !(total > 0.0) {
        return Err(Error::Degenerate("all channel powers are zero".into()));
    }
    Ok(if same_round { 1.0 } else { sigma_direct2 / total })
}

/// Lag-one correlation `Re(sum x_q x_{q+1}^*) / sum |x_q|^2` of a raw
/// observation stream.
pub fn round_autocorrelation(stream: &[Complex64]) -> f64 {
    if stream.len() < 2 {
        return f64::NAN;
    }
    let energy: f64 = stream.iter().map(|x| x.norm_sqr()).sum();
    let lagged: Complex64 = stream.windows(2).map(|w| w[0] * w[1].conj()).sum();
    lagged.re * stream.len() as f64 / ((stream.len() - 1) as f64 * energy)
}

/// Key generation rate from observed samples: normalize, estimate the
/// correlations and evaluate the closed form at the worst eavesdropper.
pub fn kgr_sample_average(record: &ObservationRecord, mean_removal: bool) -> Result<f64> {
    let normalized = normalize(record, mean_removal)?;
    let rho = estimate_correlations(&normalized);
    kgr_closed_form(rho.rho_l, rho.rho_e_max(), record.delta_t)
}

/// Quantized keys of both legitimate parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub bits_alice: Vec<bool>,
    pub bits_bob: Vec<bool>,
}

impl KeyMaterial {
    /// Key disagreement rate.
    pub fn kdr(&self) -> f64 {
        if self.bits_alice.is_empty() {
            return 0.0;
        }
        let mismatches = self
            .bits_alice
            .iter()
            .zip(&self.bits_bob)
            .filter(|(a, b)| a != b)
            .count();
        mismatches as f64 / self.bits_alice.len() as f64
    }
}

fn sign_bits(stream: &[Complex64]) -> Vec<bool> {
    let mean = stream.iter().sum::<Complex64>() / stream.len().max(1) as f64;
    stream.iter().map(|x| (x - mean).re > 0.0).collect()
}

/// One bit per round and party: the sign of the real part of the
/// mean-removed sample.
pub fn quantize_keys(record: &NormalizedRecord) -> KeyMaterial {
    KeyMaterial {
        bits_alice: sign_bits(&record.h_a),
        bits_bob: sign_bits(&record.h_b),
    }
}

/// One-time pad: XOR `data` with the leading bits of `key`.
pub fn otp_xor(data: &[bool], key: &[bool]) -> Result<Vec<bool>> {
    if key.len() < data.len() {
        return Err(invalid(
            "key",
            format!(
                "one-time pad needs {} key bits, only {} available",
                data.len(),
                key.len()
            ),
        ));
    }
    Ok(data.iter().zip(key).map(|(d, k)| d ^ k).collect())
}
