//! Two-mode signal model of the photon pair source.
//!
//! Each analyzer receives one contribution per polarization mode, with
//! independent random phase offsets; the detector is ideal, so its count
//! rate is proportional to the time-averaged intensity. The hidden
//! variables are the source incidence angle `theta` and the two phase
//! offsets `gamma_x`, `gamma_y`, each distributed uniformly on [0, pi].
//!
//! All functions are pure; sampling of hidden variables is driven by the
//! caller, so the module holds no random state.

use rand::Rng;

use crate::error::{Error, Result};
use crate::integrate::{quadrature_nodes, QuadratureSpec};
use crate::sum::CompensatedSum;

/// One sample of the model's hidden variables, all in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenVars {
    pub theta: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
}

impl HiddenVars {
    pub fn new(theta: f64, gamma_x: f64, gamma_y: f64) -> Self {
        Self { theta, gamma_x, gamma_y }
    }

    /// Draw one sample uniformly from [0, pi]^3.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let pi = std::f64::consts::PI;
        Self {
            theta: rng.random::<f64>() * pi,
            gamma_x: rng.random::<f64>() * pi,
            gamma_y: rng.random::<f64>() * pi,
        }
    }
}

/// Ideal detector: count rate = gain * intensity. The gain absorbs the
/// detector volume and exposure time of the proportionality law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    gain: f64,
}

impl DetectorModel {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidGain(gain));
        }
        Ok(Self { gain })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { gain: 1.0 }
    }
}

/// Relative orientation of detector B with respect to detector A, with the
/// sine and cosine cached so repeated amplitude evaluations share one
/// arithmetic path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerPair {
    phi: f64,
    sin_phi: f64,
    cos_phi: f64,
}

impl AnalyzerPair {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::NonFiniteAngle(phi));
        }
        let (sin_phi, cos_phi) = phi.sin_cos();
        Ok(Self { phi, sin_phi, cos_phi })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Signal amplitude from precomputed trigonometric parts. The analyzer
/// offset enters through angle addition, so an offset of zero reproduces
/// the aligned amplitude bit for bit. Every amplitude evaluation in the
/// crate funnels through here; that is what makes swept and point-wise
/// evaluations bit-identical.
#[inline]
pub(crate) fn amplitude_from_parts(
    sin_theta: f64,
    cos_theta: f64,
    cos_gx: f64,
    cos_gy: f64,
    sin_phi: f64,
    cos_phi: f64,
) -> f64 {
    let c = cos_theta * cos_phi - sin_theta * sin_phi;
    let s = sin_theta * cos_phi + cos_theta * sin_phi;
    c * cos_gx + s * cos_gy
}

/// Signal amplitude at the detector aligned with the coordinate system:
/// cos(theta) cos(gamma_x) + sin(theta) cos(gamma_y).
pub fn amplitude_a(h: &HiddenVars) -> f64 {
    let (sin_t, cos_t) = h.theta.sin_cos();
    amplitude_from_parts(sin_t, cos_t, h.gamma_x.cos(), h.gamma_y.cos(), 0.0, 1.0)
}

/// Signal amplitude at the detector oriented at the pair's relative angle:
/// cos(theta + phi) cos(gamma_x) + sin(theta + phi) cos(gamma_y).
pub fn amplitude_b(h: &HiddenVars, pair: &AnalyzerPair) -> f64 {
    let (sin_t, cos_t) = h.theta.sin_cos();
    amplitude_from_parts(
        sin_t,
        cos_t,
        h.gamma_x.cos(),
        h.gamma_y.cos(),
        pair.sin_phi,
        pair.cos_phi,
    )
}

/// Detector count rate for a given signal amplitude: gain * amplitude^2.
pub fn intensity(amplitude: f64, d: &DetectorModel) -> f64 {
    d.gain * amplitude * amplitude
}

/// Mean squared amplitude over the hidden-variable domain [0, pi]^3,
/// computed by tensor-product quadrature. No analytic shortcut is taken;
/// this doubles as a self-test of the quadrature engine (the reference
/// value is 1/2).
pub fn singles_rate(q: &QuadratureSpec) -> Result<f64> {
    let (nodes, weights) = quadrature_nodes(q.nodes_per_dim(), q.rule())?;
    let cos_g: Vec<f64> = nodes.iter().map(|g| g.cos()).collect();
    let pi = std::f64::consts::PI;

    let mut acc = CompensatedSum::new();
    for (theta, w_t) in nodes.iter().zip(&weights) {
        let (sin_t, cos_t) = theta.sin_cos();
        let mut inner = CompensatedSum::new();
        for (cgx, w_x) in cos_g.iter().zip(&weights) {
            for (cgy, w_y) in cos_g.iter().zip(&weights) {
                let a = amplitude_from_parts(sin_t, cos_t, *cgx, *cgy, 0.0, 1.0);
                inner.add(w_x * w_y * a * a);
            }
        }
        acc.add(w_t * inner.value());
    }
    Ok(acc.value() / (pi * pi * pi))
}

/// Ideal pair production rate: half the singles rate.
pub fn pair_rate(q: &QuadratureSpec) -> Result<f64> {
    Ok(singles_rate(q)? / 2.0)
}
