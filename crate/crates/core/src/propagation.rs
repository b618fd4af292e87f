//! Node geometry, large-scale path loss and small-scale Rayleigh fading.
//!
//! Alice sits at the origin, Bob at `(d_ab, 0)` and the reflecting surface
//! ("Rose") at `(d_ab - d2, d1)`. Eavesdropper positions are given in the
//! same frame.
//!
//! One coefficient is stored per physical link. The combined channel seen in
//! either direction of the legitimate link is
//! `g = h_ab + sum_n u_n v_n exp(j theta_n)`, so uplink and downlink estimates
//! share the same noiseless value.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::special::bessel_j0;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier wavelength in meters.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Distances derived for one eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveDistances {
    /// Eve to Alice.
    pub d_ae: f64,
    /// Eve to Bob.
    pub d_be: f64,
    /// Eve to the surface.
    pub d_er: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    d_ab: f64,
    d1: f64,
    d2: f64,
    eve_positions: Vec<Point>,
}

impl Geometry {
    pub fn new(d_ab: f64, d1: f64, d2: f64, eve_positions: Vec<Point>) -> Result<Self> {
        for (name, v) in [("d_ab", d_ab), ("d1", d1), ("d2", d2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be a positive distance, got {v}")));
            }
        }
        let geometry = Self {
            d_ab,
            d1,
            d2,
            eve_positions: Vec::new(),
        };
        geometry.with_eves(eve_positions)
    }

    /// Replaces the eavesdropper positions, keeping the legitimate layout.
    pub fn with_eves(mut self, eve_positions: Vec<Point>) -> Result<Self> {
        let bob = self.bob();
        let rose = self.surface();
        for p in &eve_positions {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(invalid("eve_positions", "non-finite coordinate"));
            }
            if p.norm() <= 0.0 || p.distance(&bob) <= 0.0 || p.distance(&rose) <= 0.0 {
                return Err(invalid(
                    "eve_positions",
                    format!("eavesdropper at ({}, {}) coincides with a legitimate node", p.x, p.y),
                ));
            }
        }
        self.eve_positions = eve_positions;
        Ok(self)
    }

    pub fn d_ab(&self) -> f64 {
        self.d_ab
    }

    pub fn d1(&self) -> f64 {
        self.d1
    }

    pub fn d2(&self) -> f64 {
        self.d2
    }

    pub fn eve_positions(&self) -> &[Point] {
        &self.eve_positions
    }

    pub fn bob(&self) -> Point {
        Point::new(self.d_ab, 0.0)
    }

    pub fn surface(&self) -> Point {
        Point::new(self.d_ab - self.d2, self.d1)
    }

    /// Alice to surface distance, `sqrt((d_ab - d2)^2 + d1^2)`.
    pub fn d_ar(&self) -> f64 {
        (self.d_ab - self.d2).hypot(self.d1)
    }

    /// Surface to Bob distance, `sqrt(d2^2 + d1^2)`.
    pub fn d_rb(&self) -> f64 {
        self.d2.hypot(self.d1)
    }

    pub fn eve_distances(&self) -> Vec<EveDistances> {
        let bob = self.bob();
        let rose = self.surface();
        self.eve_positions
            .iter()
            .map(|p| EveDistances {
                d_ae: p.norm(),
                d_be: p.distance(&bob),
                d_er: p.distance(&rose),
            })
            .collect()
    }
}

/// Log-distance path loss `PL0 + 10 zeta log10(d / d0)` with one exponent
/// per link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub pl0_db: f64,
    pub d0: f64,
    /// Alice to surface.
    pub zeta_ar: f64,
    /// Surface to Bob.
    pub zeta_rb: f64,
    /// Alice to Bob, also used for Alice to Eve.
    pub zeta_ab: f64,
    /// Eve to surface.
    pub zeta_er: f64,
    /// Eve to Bob.
    pub zeta_eb: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            pl0_db: 30.0,
            d0: 1.0,
            zeta_ar: 2.2,
            zeta_rb: 2.5,
            zeta_ab: 3.5,
            zeta_er: 2.2,
            zeta_eb: 3.5,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !self.pl0_db.is_finite() {
            return Err(invalid("pl0_db", "must be finite"));
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return Err(invalid("d0", "must be a positive distance"));
        }
        for (name, z) in [
            ("zeta_ar", self.zeta_ar),
            ("zeta_rb", self.zeta_rb),
            ("zeta_ab", self.zeta_ab),
            ("zeta_er", self.zeta_er),
            ("zeta_eb", self.zeta_eb),
        ] {
            if !z.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
            if z < 2.0 {
                log::warn!("path loss exponent {name} = {z} is below free-space propagation");
            }
        }
        Ok(())
    }
}

/// Path loss in dB at distance `d` with exponent `zeta`.
pub fn path_loss_db(d: f64, zeta: f64, model: &PathLossModel) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid("d", format!("distance must be positive, got {d}")));
    }
    Ok(model.pl0_db + 10.0 * zeta * (d / model.d0).log10())
}

/// Linear power gain `10^(-PL/10)`.
pub fn path_gain(d: f64, zeta: f64, model: &PathLossModel) -> Result<f64> {
    path_loss_db(d, zeta, model).map(|pl| 10f64.powf(-pl / 10.0))
}

/// Amplitude correlation `J0(2 pi d / lambda)` between the channels of two
/// receivers `d` meters apart. Its square is the spatial correlation of the
/// combined channels.
pub fn eve_correlation_coefficient(d: f64, wavelength: f64) -> f64 {
    debug_assert!(d >= 0.0 && wavelength > 0.0);
    bessel_j0(std::f64::consts::TAU * d / wavelength)
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Channels of one eavesdropper within a coherence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EveChannel {
    /// Eve to Bob direct coefficient.
    pub h_be: Complex64,
    /// Alice to Eve direct coefficient.
    pub h_ae: Complex64,
    /// Surface element to Eve coefficients.
    pub e: Vec<Complex64>,
    pub sigma_be2: f64,
    pub sigma_ae2: f64,
    pub sigma_e2: f64,
    /// Amplitude correlation with the legitimate coefficients.
    pub correlation: f64,
    pub distances: EveDistances,
}

impl EveChannel {
    /// Per-element products `e_n v_n` (Bob to surface to Eve).
    pub fn bob_cascade(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.e.iter().zip(v).map(|(e, v)| e * v).collect()
    }

    /// Per-element products `e_n u_n` (Alice to surface to Eve).
    pub fn alice_cascade(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.e.iter().zip(u).map(|(e, u)| e * u).collect()
    }
}

/// One coherence interval's fading realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct Alice to Bob coefficient.
    pub h_ab: Complex64,
    /// Alice to surface element coefficients.
    pub u: Vec<Complex64>,
    /// Surface element to Bob coefficients.
    pub v: Vec<Complex64>,
    pub eves: Vec<EveChannel>,
    pub sigma_ab2: f64,
    pub sigma_u2: f64,
    pub sigma_v2: f64,
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.u.len()
    }

    /// Per-element products `u_n v_n`.
    pub fn cascade(&self) -> Vec<Complex64> {
        self.u.iter().zip(&self.v).map(|(u, v)| u * v).collect()
    }

    /// The same interval with the surface removed.
    pub fn without_surface(&self) -> ChannelSet {
        ChannelSet {
            h_ab: self.h_ab,
            u: Vec::new(),
            v: Vec::new(),
            eves: self
                .eves
                .iter()
                .map(|e| EveChannel {
                    e: Vec::new(),
                    ..e.clone()
                })
                .collect(),
            sigma_ab2: self.sigma_ab2,
            sigma_u2: self.sigma_u2,
            sigma_v2: self.sigma_v2,
        }
    }
}

/// Draws a fresh coherence interval.
///
/// Draw order is fixed: `h_ab`, then `(h_be, h_ae)` per Eve, then for each
/// element `u_n`, `v_n` and `e_n` per Eve. Realizations with a larger `n`
/// therefore extend those with a smaller one when drawn from the same stream.
pub fn sample_channel_set<R: Rng + ?Sized>(
    geometry: &Geometry,
    model: &PathLossModel,
    n: usize,
    wavelength: f64,
    rng: &mut R,
) -> Result<ChannelSet> {
    if n == 0 {
        return Err(invalid("n", "the surface needs at least one element"));
    }
    if !(wavelength > 0.0) {
        return Err(invalid("wavelength", "must be positive"));
    }
    model.validate()?;

    let sigma_ab2 = path_gain(geometry.d_ab(), model.zeta_ab, model)?;
    let sigma_u2 = path_gain(geometry.d_ar(), model.zeta_ar, model)?;
    let sigma_v2 = path_gain(geometry.d_rb(), model.zeta_rb, model)?;

    struct EveParams {
        c: f64,
        mix: f64,
        sigma_be2: f64,
        sigma_ae2: f64,
        sigma_e2: f64,
        distances: EveDistances,
    }
    let params = geometry
        .eve_distances()
        .into_iter()
        .map(|distances| {
            let c = eve_correlation_coefficient(distances.d_ae, wavelength);
            Ok(EveParams {
                c,
                mix: (1.0 - c * c).max(0.0).sqrt(),
                sigma_be2: path_gain(distances.d_be, model.zeta_eb, model)?,
                sigma_ae2: path_gain(distances.d_ae, model.zeta_ab, model)?,
                sigma_e2: path_gain(distances.d_er, model.zeta_er, model)?,
                distances,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let h_ab = complex_gaussian(rng, sigma_ab2);
    let mut eves: Vec<EveChannel> = params
        .iter()
        .map(|p| {
            let w = complex_gaussian(rng, 1.0);
            let h_be = h_ab * (p.c * (p.sigma_be2 / sigma_ab2).sqrt()) + w * (p.mix * p.sigma_be2.sqrt());
            let h_ae = complex_gaussian(rng, p.sigma_ae2);
            EveChannel {
                h_be,
                h_ae,
                e: Vec::with_capacity(n),
                sigma_be2: p.sigma_be2,
                sigma_ae2: p.sigma_ae2,
                sigma_e2: p.sigma_e2,
                correlation: p.c,
                distances: p.distances,
            }
        })
        .collect();

    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        let un = complex_gaussian(rng, sigma_u2);
        u.push(un);
        v.push(complex_gaussian(rng, sigma_v2));
        for (eve, p) in eves.iter_mut().zip(&params) {
            let w = complex_gaussian(rng, 1.0);
            eve.e
                .push(un * (p.c * (p.sigma_e2 / sigma_u2).sqrt()) + w * (p.mix * p.sigma_e2.sqrt()));
        }
    }

    Ok(ChannelSet {
        h_ab,
        u,
        v,
        eves,
        sigma_ab2,
        sigma_u2,
        sigma_v2,
    })
}
