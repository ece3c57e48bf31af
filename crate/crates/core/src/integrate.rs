//! Numerical evaluation of the coincidence integral.
//!
//! The coincidence count is an average over the source incidence angle of
//! a phase-averaged product of the two detector signals. The typesetting of
//! that expression admits more than one reading of where the squaring and
//! the normalization sit, so the evaluation mode is an explicit,
//! first-class parameter ([`Interpretation`]) and every estimate records
//! the mode it was computed under. Nothing in this module assumes the
//! stated closed form of the normalized rate; tests compare against
//! independently computed reference values instead.
//!
//! Two engines are provided: iterated deterministic quadrature
//! ([`coincidence_integral`]) and seeded Monte Carlo ([`mc_coincidence`]).
//! Monte Carlo runs are bit-reproducible for a fixed (samples, seed, mode)
//! triple regardless of thread count: the sample range is split into
//! fixed-size chunks, each chunk draws from its own counter-derived RNG
//! stream, and chunk results are combined in index order with compensated
//! summation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{amplitude_from_parts, pair_rate};
use crate::sum::CompensatedSum;

/// Samples per Monte Carlo chunk; fixed so that chunking (and therefore
/// the RNG stream layout) does not depend on the worker count.
const MC_CHUNK: u64 = 1 << 16;

/// One-dimensional quadrature rule, applied per tensor dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    GaussLegendre,
    Trapezoid,
}

impl fmt::Display for QuadratureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadratureRule::GaussLegendre => write!(f, "gauss_legendre"),
            QuadratureRule::Trapezoid => write!(f, "trapezoid"),
        }
    }
}

/// Deterministic-integration controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    nodes_per_dim: usize,
    rule: QuadratureRule,
}

impl QuadratureSpec {
    pub fn new(nodes_per_dim: usize, rule: QuadratureRule) -> Result<Self> {
        if nodes_per_dim < 2 {
            return Err(Error::QuadratureOrder(nodes_per_dim));
        }
        Ok(Self { nodes_per_dim, rule })
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn fingerprint(&self) -> String {
        format!("quad:{}:{}", self.rule, self.nodes_per_dim)
    }
}

impl Default for QuadratureSpec {
    /// 64 Gauss-Legendre nodes per dimension; the integrands are smooth
    /// trigonometric polynomials, so this is converged to machine noise.
    fn default() -> Self {
        Self { nodes_per_dim: 64, rule: QuadratureRule::GaussLegendre }
    }
}

/// Monte Carlo controls. Identical (samples, seed) give bit-identical
/// estimates on one platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSpec {
    samples: u64,
    seed: u64,
}

impl McSpec {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        if samples < 1 {
            return Err(Error::NoSamples);
        }
        Ok(Self { samples, seed })
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fingerprint(&self) -> String {
        format!("mc:samples={}:seed={}", self.samples, self.seed)
    }
}

/// Reading of the coincidence expression. The three modes differ in where
/// the squaring and the pair-rate normalization are applied:
///
/// * [`Literal`](Interpretation::Literal) squares the phase-averaged
///   product exactly as typeset:
///   `(1/pi) Int [ (1/pi^2) Int sqrt(A) sqrt(B) dgx dgy ]^2 dtheta`.
/// * [`SquareBeforePhaseAverage`](Interpretation::SquareBeforePhaseAverage)
///   squares the product before the phase average:
///   `(1/pi^3) Int (sqrt(A) sqrt(B))^2 dgx dgy dtheta`.
/// * [`PairRateNormalized`](Interpretation::PairRateNormalized) reads the
///   pair-rate division as part of the integral object itself: the literal
///   integral divided by the pair production rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interpretation {
    #[serde(rename = "literal")]
    Literal,
    #[serde(rename = "square-first")]
    SquareBeforePhaseAverage,
    #[serde(rename = "pair-norm")]
    PairRateNormalized,
}

impl Interpretation {
    pub const ALL: [Interpretation; 3] = [
        Interpretation::Literal,
        Interpretation::SquareBeforePhaseAverage,
        Interpretation::PairRateNormalized,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            Interpretation::Literal => "literal",
            Interpretation::SquareBeforePhaseAverage => "square-first",
            Interpretation::PairRateNormalized => "pair-norm",
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Interpretation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Interpretation::Literal),
            "square-first" | "square_before_phase_average" => {
                Ok(Interpretation::SquareBeforePhaseAverage)
            }
            "pair-norm" | "pair_rate_normalized" => Ok(Interpretation::PairRateNormalized),
            other => Err(Error::Config(format!(
                "unknown interpretation mode `{other}` (expected literal, square-first or pair-norm)"
            ))),
        }
    }
}

/// A single numerical result with its uncertainty and provenance.
/// `std_error` is zero exactly when the estimate came from quadrature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub mode: Interpretation,
    pub spec_fingerprint: String,
}

/// Nodes and weights on [0, pi]. Weights are positive and sum to pi.
pub fn quadrature_nodes(n: usize, rule: QuadratureRule) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 2 {
        return Err(Error::QuadratureOrder(n));
    }
    let pi = std::f64::consts::PI;
    match rule {
        QuadratureRule::Trapezoid => {
            let h = pi / (n - 1) as f64;
            let nodes = (0..n).map(|k| k as f64 * pi / (n - 1) as f64).collect();
            let mut weights = vec![h; n];
            weights[0] = 0.5 * h;
            weights[n - 1] = 0.5 * h;
            Ok((nodes, weights))
        }
        QuadratureRule::GaussLegendre => {
            let (unit_nodes, unit_weights) = gauss_legendre_unit(n);
            let nodes = unit_nodes.iter().map(|x| 0.5 * pi * (x + 1.0)).collect();
            let weights = unit_weights.iter().map(|w| 0.5 * pi * w).collect();
            Ok((nodes, weights))
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence. Roots are computed for one half and mirrored so
/// the rule is exactly symmetric.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pi = std::f64::consts::PI;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);

    for i in 0..half {
        // Tricomi-style initial guess for the i-th root from the +1 side.
        let mut x = (pi * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            deriv = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        if n % 2 == 1 && i == half - 1 {
            // The middle root of an odd-degree rule is exactly zero.
            x = 0.0;
            let (_, d) = legendre_with_derivative(n, x);
            deriv = d;
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x, by the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

/// Cached per-spec evaluation grid: nodes, weights, and node cosines (the
/// amplitudes depend on the phase offsets only through their cosines).
struct PhaseGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cos_g: Vec<f64>,
}

impl PhaseGrid {
    fn build(q: &QuadratureSpec) -> Result<Self> {
        let (nodes, weights) = quadrature_nodes(q.nodes_per_dim(), q.rule())?;
        let cos_g = nodes.iter().map(|g| g.cos()).collect();
        Ok(Self { nodes, weights, cos_g })
    }

    /// `(1/pi^2) Int sqrt(A) sqrt(B) dgx dgy` at fixed theta.
    fn inner_average(&self, sin_t: f64, cos_t: f64, sin_phi: f64, cos_phi: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let mut acc = CompensatedSum::new();
        for (cgx, wx) in self.cos_g.iter().zip(&self.weights) {
            for (cgy, wy) in self.cos_g.iter().zip(&self.weights) {
                let a = amplitude_from_parts(sin_t, cos_t, *cgx, *cgy, 0.0, 1.0);
                let b = amplitude_from_parts(sin_t, cos_t, *cgx, *cgy, sin_phi, cos_phi);
                acc.add(wx * wy * a * b);
            }
        }
        acc.value() / (pi * pi)
    }

    /// `(1/pi^2) Int (sqrt(A) sqrt(B))^2 dgx dgy` at fixed theta.
    fn inner_square_average(&self, sin_t: f64, cos_t: f64, sin_phi: f64, cos_phi: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let mut acc = CompensatedSum::new();
        for (cgx, wx) in self.cos_g.iter().zip(&self.weights) {
            for (cgy, wy) in self.cos_g.iter().zip(&self.weights) {
                let a = amplitude_from_parts(sin_t, cos_t, *cgx, *cgy, 0.0, 1.0);
                let b = amplitude_from_parts(sin_t, cos_t, *cgx, *cgy, sin_phi, cos_phi);
                let p = a * b;
                acc.add(wx * wy * p * p);
            }
        }
        acc.value() / (pi * pi)
    }
}

/// Phase average of the signal product at fixed incidence angle.
pub fn inner_phase_average(theta: f64, phi: f64, q: &QuadratureSpec) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFiniteAngle(theta));
    }
    if !phi.is_finite() {
        return Err(Error::NonFiniteAngle(phi));
    }
    let grid = PhaseGrid::build(q)?;
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_phi, cos_phi) = phi.sin_cos();
    Ok(grid.inner_average(sin_t, cos_t, sin_phi, cos_phi))
}

/// Coincidence integral under the given interpretation mode, by nested
/// deterministic quadrature.
pub fn coincidence_integral(phi: f64, q: &QuadratureSpec, mode: Interpretation) -> Result<Estimate> {
    if !phi.is_finite() {
        return Err(Error::NonFiniteAngle(phi));
    }
    let grid = PhaseGrid::build(q)?;
    let pi = std::f64::consts::PI;
    let (sin_phi, cos_phi) = phi.sin_cos();

    let theta_term = |theta: f64| -> f64 {
        let (sin_t, cos_t) = theta.sin_cos();
        match mode {
            Interpretation::Literal | Interpretation::PairRateNormalized => {
                let inner = grid.inner_average(sin_t, cos_t, sin_phi, cos_phi);
                inner * inner
            }
            Interpretation::SquareBeforePhaseAverage => {
                grid.inner_square_average(sin_t, cos_t, sin_phi, cos_phi)
            }
        }
    };

    let mut acc = CompensatedSum::new();
    for (theta, w_t) in grid.nodes.iter().zip(&grid.weights) {
        acc.add(w_t * theta_term(*theta));
    }
    let mut value = acc.value() / pi;
    if mode == Interpretation::PairRateNormalized {
        let pr = pair_rate(q)?;
        if pr.abs() < 1e-12 {
            return Err(Error::DegenerateNormalization(pr));
        }
        value /= pr;
    }

    Ok(Estimate {
        value,
        std_error: 0.0,
        mode,
        spec_fingerprint: format!("{}:mode={}", q.fingerprint(), mode),
    })
}

/// Coincidence integral divided by the ideal pair production rate. This is
/// the quantity the residual report compares against the stated
/// `sin^2(phi)/2` law; the division is computed, never assumed.
pub fn coincidence_rate(phi: f64, q: &QuadratureSpec, mode: Interpretation) -> Result<Estimate> {
    let integral = coincidence_integral(phi, q, mode)?;
    let pr = pair_rate(q)?;
    if pr.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(pr));
    }
    Ok(Estimate {
        value: integral.value / pr,
        std_error: 0.0,
        mode,
        spec_fingerprint: format!("{}:normalized", integral.spec_fingerprint),
    })
}

/// Monte Carlo estimate of the same functional as [`coincidence_integral`]
/// for the chosen mode, with the standard error of the mean.
///
/// Estimator construction per mode, with (theta, gx, gy) uniform on
/// [0, pi]^3:
///
/// * square-first: sample mean of `(A(gx, gy) B(gx, gy))^2`.
/// * literal: per theta sample, two independent phase pairs are drawn and
///   the estimator is the product `A(g1) B(g1) * A(g2) B(g2)`; the two
///   factors are independent and identically distributed given theta, so
///   the product is an unbiased estimate of the squared phase average.
/// * pair-norm: the literal estimator scaled by the reciprocal pair rate,
///   with the pair rate taken from default-spec quadrature (a
///   deterministic constant, so the estimate stays unbiased).
pub fn mc_coincidence(phi: f64, mc: &McSpec, mode: Interpretation) -> Result<Estimate> {
    Ok(mc_coincidence_sweep(&[phi], mc, mode)?.pop().expect("one estimate per angle"))
}

/// Evaluate [`mc_coincidence`] at every angle in `phis`, reusing each
/// hidden-variable draw across the whole sweep. Bit-identical to calling
/// `mc_coincidence` per angle with the same spec: the RNG stream, the
/// amplitude arithmetic and the accumulation order are all shared.
pub fn mc_coincidence_sweep(
    phis: &[f64],
    mc: &McSpec,
    mode: Interpretation,
) -> Result<Vec<Estimate>> {
    if mc.samples() < 1 {
        return Err(Error::NoSamples);
    }
    for &phi in phis {
        if !phi.is_finite() {
            return Err(Error::NonFiniteAngle(phi));
        }
    }
    let pi = std::f64::consts::PI;
    let pair_sin_cos: Vec<(f64, f64)> = phis.iter().map(|p| p.sin_cos()).collect();
    let n_phi = phis.len();
    let samples = mc.samples();
    let n_chunks = samples.div_ceil(MC_CHUNK);

    // Per chunk and angle: (sum, sum of squares).
    let chunk_results: Vec<Vec<(f64, f64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed());
            rng.set_stream(chunk);
            let start = chunk * MC_CHUNK;
            let len = MC_CHUNK.min(samples - start);

            // Plain sums inside a chunk (bounded length, O(1) addends);
            // the compensated pass runs over the ordered chunk results.
            let mut acc = vec![(0.0f64, 0.0f64); n_phi];
            match mode {
                Interpretation::SquareBeforePhaseAverage => {
                    for _ in 0..len {
                        let theta = rng.random::<f64>() * pi;
                        let cgx = (rng.random::<f64>() * pi).cos();
                        let cgy = (rng.random::<f64>() * pi).cos();
                        let (sin_t, cos_t) = theta.sin_cos();
                        let a = amplitude_from_parts(sin_t, cos_t, cgx, cgy, 0.0, 1.0);
                        for (k, (sp, cp)) in pair_sin_cos.iter().enumerate() {
                            let b = amplitude_from_parts(sin_t, cos_t, cgx, cgy, *sp, *cp);
                            let x = (a * b) * (a * b);
                            acc[k].0 += x;
                            acc[k].1 += x * x;
                        }
                    }
                }
                Interpretation::Literal | Interpretation::PairRateNormalized => {
                    for _ in 0..len {
                        let theta = rng.random::<f64>() * pi;
                        let cgx1 = (rng.random::<f64>() * pi).cos();
                        let cgy1 = (rng.random::<f64>() * pi).cos();
                        let cgx2 = (rng.random::<f64>() * pi).cos();
                        let cgy2 = (rng.random::<f64>() * pi).cos();
                        let (sin_t, cos_t) = theta.sin_cos();
                        let a1 = amplitude_from_parts(sin_t, cos_t, cgx1, cgy1, 0.0, 1.0);
                        let a2 = amplitude_from_parts(sin_t, cos_t, cgx2, cgy2, 0.0, 1.0);
                        for (k, (sp, cp)) in pair_sin_cos.iter().enumerate() {
                            let b1 = amplitude_from_parts(sin_t, cos_t, cgx1, cgy1, *sp, *cp);
                            let b2 = amplitude_from_parts(sin_t, cos_t, cgx2, cgy2, *sp, *cp);
                            let x = (a1 * b1) * (a2 * b2);
                            acc[k].0 += x;
                            acc[k].1 += x * x;
                        }
                    }
                }
            }
            acc
        })
        .collect();

    // pair-norm scales the literal estimator by a deterministic constant.
    let scale = if mode == Interpretation::PairRateNormalized {
        let pr = pair_rate(&QuadratureSpec::default())?;
        if pr.abs() < 1e-12 {
            return Err(Error::DegenerateNormalization(pr));
        }
        1.0 / pr
    } else {
        1.0
    };

    let n = samples as f64;
    let mut estimates = Vec::with_capacity(n_phi);
    for k in 0..n_phi {
        let mut sum = CompensatedSum::new();
        let mut sumsq = CompensatedSum::new();
        for chunk in &chunk_results {
            sum.add(chunk[k].0);
            sumsq.add(chunk[k].1);
        }
        let mean = sum.value() / n;
        let std_error = if samples > 1 {
            let var = ((sumsq.value() - sum.value() * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let mut fingerprint = format!("{}:mode={}", mc.fingerprint(), mode);
        if mode == Interpretation::PairRateNormalized {
            fingerprint.push_str(":pair_rate=quad:gauss_legendre:64");
        }
        estimates.push(Estimate {
            value: mean * scale,
            std_error: std_error * scale,
            mode,
            spec_fingerprint: fingerprint,
        });
    }
    Ok(estimates)
}
