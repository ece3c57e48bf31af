//! Experiment orchestration: angle sweeps across engines, residuals of the
//! model against the stated coincidence law, CHSH reports, and assembly of
//! a reproducible run report.
//!
//! Every run is fully specified by a [`RunManifest`]; rerunning the same
//! manifest with the same binary reproduces the machine-readable report
//! byte for byte. Components are stamped with the digest of the manifest
//! configuration they were produced under, and [`assemble_report`] refuses
//! to combine components from different manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{chsh_max, BoundReport};
use crate::error::{Error, Result};
use crate::integrate::{
    coincidence_integral, mc_coincidence_sweep, Interpretation, McSpec, QuadratureSpec,
};
use crate::model::pair_rate;
use crate::qm::{qm_correlation, qm_joint_probability};

/// Threshold below which a mode's worst claim residual counts as
/// reproducing the stated law.
pub const CLAIM_REPRODUCTION_TOL: f64 = 1e-8;

/// The stated normalized coincidence rate, sin^2(phi) / 2. Numerically the
/// same function as the quantum joint probability; the report keeps the
/// two roles separate on purpose.
pub fn claimed_rate(phi: f64) -> f64 {
    let s = phi.sin();
    0.5 * s * s
}

/// Evaluation engine for a curve row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Engine {
    #[serde(rename = "qm")]
    Qm,
    #[serde(rename = "quad")]
    Quadrature,
    #[serde(rename = "mc")]
    Mc,
}

impl Engine {
    pub fn token(&self) -> &'static str {
        match self {
            Engine::Qm => "qm",
            Engine::Quadrature => "quad",
            Engine::Mc => "mc",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qm" => Ok(Engine::Qm),
            "quad" => Ok(Engine::Quadrature),
            "mc" => Ok(Engine::Mc),
            other => Err(Error::Config(format!(
                "unknown engine `{other}` (expected qm, quad or mc)"
            ))),
        }
    }
}

/// One engine to run, with its interpretation mode. The closed-form engine
/// takes no mode; the model engines require one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineRequest {
    pub engine: Engine,
    pub mode: Option<Interpretation>,
}

impl EngineRequest {
    pub fn validate(&self) -> Result<()> {
        match (self.engine, self.mode) {
            (Engine::Qm, Some(mode)) => Err(Error::Config(format!(
                "the qm engine takes no interpretation mode (got `{mode}`)"
            ))),
            (Engine::Quadrature | Engine::Mc, None) => Err(Error::Config(format!(
                "engine `{}` requires an interpretation mode",
                self.engine
            ))),
            _ => Ok(()),
        }
    }
}

/// One evaluated point of a correlation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub phi_rad: f64,
    pub engine: Engine,
    pub mode: Option<Interpretation>,
    pub value: f64,
    pub std_error: f64,
}

/// A phi grid with per-engine, per-mode values: the unit of comparison and
/// reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub grid: Vec<f64>,
    pub points: Vec<CurvePoint>,
    /// Digest of the configuration this curve was produced under.
    pub source_digest: String,
}

impl CorrelationCurve {
    /// Grid strictly increasing inside [0, pi], and every (engine, mode)
    /// series complete over the grid.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("empty phi grid".into()));
        }
        let pi = std::f64::consts::PI;
        for w in self.grid.windows(2) {
            if w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Config(format!(
                    "phi grid must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if self.grid[0] < 0.0 || *self.grid.last().unwrap() > pi + 1e-12 {
            return Err(Error::Config("phi grid must lie inside [0, pi]".into()));
        }
        let mut counts: BTreeMap<(String, Option<String>), usize> = BTreeMap::new();
        for p in &self.points {
            *counts
                .entry((p.engine.to_string(), p.mode.map(|m| m.to_string())))
                .or_default() += 1;
        }
        for ((engine, mode), count) in counts {
            if count != self.grid.len() {
                return Err(Error::Config(format!(
                    "series ({engine}, {mode:?}) has {count} points for a {}-point grid",
                    self.grid.len()
                )));
            }
        }
        Ok(())
    }

    pub fn series(&self, engine: Engine, mode: Option<Interpretation>) -> Vec<&CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.engine == engine && p.mode == mode)
            .collect()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub phi_grid: Vec<f64>,
    pub engines: Vec<EngineRequest>,
    pub quadrature: QuadratureSpec,
    pub mc: McSpec,
    pub chsh_grid_step: f64,
}

impl RunConfig {
    /// The default comparison run: 181 grid points from 0 to pi inclusive,
    /// all engines, all three interpretation modes, one-degree CHSH grid.
    pub fn default_with(quadrature: QuadratureSpec, mc: McSpec) -> Self {
        let engines = std::iter::once(EngineRequest { engine: Engine::Qm, mode: None })
            .chain(Interpretation::ALL.iter().flat_map(|mode| {
                [
                    EngineRequest { engine: Engine::Quadrature, mode: Some(*mode) },
                    EngineRequest { engine: Engine::Mc, mode: Some(*mode) },
                ]
            }))
            .collect();
        Self {
            phi_grid: degree_grid(181),
            engines,
            quadrature,
            mc,
            chsh_grid_step: std::f64::consts::PI / 180.0,
        }
    }
}

/// n points spanning [0, pi] inclusive.
pub fn degree_grid(points: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    if points <= 1 {
        return vec![0.0];
    }
    (0..points).map(|k| k as f64 * pi / (points - 1) as f64).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Complete, serialized record of a run: specs, seed, tool version,
/// timestamp and output digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub created_at: String,
    pub digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: RunConfig) -> Self {
        Self::with_created_at(config, chrono::Utc::now().to_rfc3339())
    }

    /// Fixed-timestamp constructor; reruns of an existing manifest keep
    /// the original timestamp so the report stays byte-identical.
    pub fn with_created_at(config: RunConfig, created_at: String) -> Self {
        let seed = config.mc.seed();
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            created_at,
            digests: BTreeMap::new(),
        }
    }

    /// Digest of the configuration; components produced under this
    /// manifest are stamped with it.
    pub fn config_digest(&self) -> String {
        let json = serde_json::to_string(&self.config).expect("config serializes");
        sha256_hex(json.as_bytes())
    }

    pub fn record_digest(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.digests.insert(name.into(), sha256_hex(bytes));
    }
}

/// Evaluate each requested engine and mode at each grid angle.
///
/// Monte Carlo rows reuse one hidden-variable stream across the whole grid
/// (bit-identical to per-angle evaluation) and are normalized by the pair
/// rate of the given quadrature spec, so they estimate the same rate as
/// the quadrature rows.
pub fn sweep(
    grid: &[f64],
    requests: &[EngineRequest],
    quad: &QuadratureSpec,
    mc: &McSpec,
) -> Result<CorrelationCurve> {
    if requests.is_empty() {
        return Err(Error::Config("no engines requested".into()));
    }
    for r in requests {
        r.validate()?;
    }
    let mut points = Vec::with_capacity(grid.len() * requests.len());
    for request in requests {
        match request.engine {
            Engine::Qm => {
                for &phi in grid {
                    points.push(CurvePoint {
                        phi_rad: phi,
                        engine: Engine::Qm,
                        mode: None,
                        value: qm_joint_probability(phi),
                        std_error: 0.0,
                    });
                }
            }
            Engine::Quadrature => {
                let mode = request.mode.expect("validated");
                for &phi in grid {
                    let est = crate::integrate::coincidence_rate(phi, quad, mode)?;
                    points.push(CurvePoint {
                        phi_rad: phi,
                        engine: Engine::Quadrature,
                        mode: Some(mode),
                        value: est.value,
                        std_error: est.std_error,
                    });
                }
            }
            Engine::Mc => {
                let mode = request.mode.expect("validated");
                let pr = pair_rate(quad)?;
                if pr.abs() < 1e-12 {
                    return Err(Error::DegenerateNormalization(pr));
                }
                let estimates = mc_coincidence_sweep(grid, mc, mode)?;
                for (&phi, est) in grid.iter().zip(estimates) {
                    points.push(CurvePoint {
                        phi_rad: phi,
                        engine: Engine::Mc,
                        mode: Some(mode),
                        value: est.value / pr,
                        std_error: est.std_error / pr,
                    });
                }
            }
        }
    }
    let curve = CorrelationCurve {
        grid: grid.to_vec(),
        points,
        source_digest: String::new(),
    };
    curve.validate()?;
    Ok(curve)
}

/// Run the manifest's sweep and stamp the result with the manifest digest.
pub fn run_sweep(manifest: &RunManifest) -> Result<CorrelationCurve> {
    let mut curve = sweep(
        &manifest.config.phi_grid,
        &manifest.config.engines,
        &manifest.config.quadrature,
        &manifest.config.mc,
    )?;
    curve.source_digest = manifest.config_digest();
    Ok(curve)
}

/// Residual of one curve point against the stated law and against the
/// quantum joint probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub phi_rad: f64,
    pub engine: Engine,
    pub mode: Option<Interpretation>,
    pub claim_residual: f64,
    pub qm_residual: f64,
}

/// Summary norms for one (engine, mode) series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub engine: Engine,
    pub mode: Option<Interpretation>,
    pub max_abs_claim: f64,
    pub rms_claim: f64,
    pub max_abs_qm: f64,
    pub rms_qm: f64,
    /// True when the series matches the stated sin^2/2 law within
    /// [`CLAIM_REPRODUCTION_TOL`] everywhere.
    pub reproduces_claim: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub summaries: Vec<ResidualSummary>,
    pub source_digest: String,
}

/// Per-point differences of every series against the stated sin^2/2 rate
/// and against the quantum joint probability, with max-abs and RMS norms
/// per series.
pub fn residuals(curve: &CorrelationCurve) -> Result<ResidualReport> {
    curve.validate()?;
    let has_qm = curve.points.iter().any(|p| p.engine == Engine::Qm);
    let has_model = curve.points.iter().any(|p| p.engine != Engine::Qm);
    if !has_qm {
        return Err(Error::Config("curve lacks the qm reference series".into()));
    }
    if !has_model {
        return Err(Error::Config("curve lacks a model engine series".into()));
    }

    let mut entries = Vec::with_capacity(curve.points.len());
    for p in &curve.points {
        let claim_residual = p.value - claimed_rate(p.phi_rad);
        let qm_residual = p.value - qm_joint_probability(p.phi_rad);
        if !(claim_residual.is_finite() && qm_residual.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite residual at phi = {}",
                p.phi_rad
            )));
        }
        entries.push(ResidualEntry {
            phi_rad: p.phi_rad,
            engine: p.engine,
            mode: p.mode,
            claim_residual,
            qm_residual,
        });
    }

    let mut series: Vec<(Engine, Option<Interpretation>)> = Vec::new();
    for p in &curve.points {
        if !series.contains(&(p.engine, p.mode)) {
            series.push((p.engine, p.mode));
        }
    }
    let summaries = series
        .into_iter()
        .map(|(engine, mode)| {
            let claim: Vec<f64> = entries
                .iter()
                .filter(|e| e.engine == engine && e.mode == mode)
                .map(|e| e.claim_residual)
                .collect();
            let qm: Vec<f64> = entries
                .iter()
                .filter(|e| e.engine == engine && e.mode == mode)
                .map(|e| e.qm_residual)
                .collect();
            let max_abs_claim = claim.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            ResidualSummary {
                engine,
                mode,
                max_abs_claim,
                rms_claim: rms(&claim),
                max_abs_qm: qm.iter().fold(0.0f64, |m, r| m.max(r.abs())),
                rms_qm: rms(&qm),
                reproduces_claim: max_abs_claim <= CLAIM_REPRODUCTION_TOL,
            }
        })
        .collect();

    Ok(ResidualReport {
        entries,
        summaries,
        source_digest: curve.source_digest.clone(),
    })
}

fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// The four reference limits every report lists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// CHSH bound for |A|, |B| <= 1.
    pub cap_one: f64,
    /// The quoted quantum threshold, 2 sqrt(2).
    pub quantum_threshold: f64,
    /// Bound for the cap-sqrt(2) class.
    pub cap_sqrt_two: f64,
    /// Bound for the cap-2 class.
    pub cap_two: f64,
}

impl Limits {
    pub fn standard() -> Self {
        Self {
            cap_one: 2.0,
            quantum_threshold: 2.0 * std::f64::consts::SQRT_2,
            cap_sqrt_two: 4.0,
            cap_two: 8.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.cap_one, self.quantum_threshold, self.cap_sqrt_two, self.cap_two]
    }
}

/// A bound report with the name of the correlation it maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBoundReport {
    pub name: String,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshSection {
    pub reports: Vec<NamedBoundReport>,
    pub source_digest: String,
}

/// Reduce a single-channel coincidence rate to a dichotomic correlation
/// the way counting experiments do: with the orthogonal channel read at a
/// quarter turn,
/// `E(d) = (R(d) - R(d + pi/2)) / (R(d) + R(d + pi/2))`.
/// This reduction is an extension of the model, and is recorded as such in
/// the provenance of every report built from it.
pub fn dichotomic_reduction<R>(rate: R) -> impl Fn(f64) -> f64 + Sync
where
    R: Fn(f64) -> f64 + Sync,
{
    move |delta: f64| {
        let same = rate(delta);
        let crossed = rate(delta + std::f64::consts::FRAC_PI_2);
        (same - crossed) / (same + crossed)
    }
}

/// CHSH maxima for the quantum correlation and for the model-derived
/// correlation of every interpretation mode in the manifest.
pub fn run_chsh(manifest: &RunManifest) -> Result<ChshSection> {
    let step = manifest.config.chsh_grid_step;
    let q = &manifest.config.quadrature;
    let mut reports = vec![NamedBoundReport {
        name: "qm".into(),
        report: chsh_max(qm_correlation, step)?,
    }];

    let mut modes: Vec<Interpretation> = Vec::new();
    for r in &manifest.config.engines {
        if let Some(mode) = r.mode {
            if !modes.contains(&mode) {
                modes.push(mode);
            }
        }
    }
    let pr = pair_rate(q)?;
    if pr.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization(pr));
    }
    for mode in modes {
        // Surface spec problems before entering the closure.
        coincidence_integral(0.0, q, mode)?;
        let rate = |phi: f64| {
            coincidence_integral(phi, q, mode)
                .expect("spec validated above")
                .value
                / pr
        };
        let corr = dichotomic_reduction(rate);
        let mut report = chsh_max(&corr, step)?;
        report.provenance = format!(
            "{}; correlation from {} coincidence rates by the dichotomic reduction \
             E(d) = (R(d) - R(d+pi/2)) / (R(d) + R(d+pi/2))",
            report.provenance, mode
        );
        reports.push(NamedBoundReport { name: format!("model-{mode}"), report });
    }

    Ok(ChshSection { reports, source_digest: manifest.config_digest() })
}

/// The machine-readable run report. Serialization field names and order
/// are a stable contract: manifest, curves, residuals, chsh, limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub curves: Vec<CurvePoint>,
    pub residuals: ResidualReport,
    pub chsh: Vec<NamedBoundReport>,
    pub limits: Limits,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable digest of the run: residual norms per series with
    /// the claim verdict, and CHSH maxima against the reference limits.
    pub fn summary_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "run {} ({} curve points)", self.manifest.created_at, self.curves.len());
        let _ = writeln!(out, "claim under test: normalized coincidence rate = sin^2(phi)/2");
        for s in &self.residuals.summaries {
            let mode = s.mode.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
            let verdict = if s.reproduces_claim { "reproduces claim" } else { "differs from claim" };
            let _ = writeln!(
                out,
                "  {:4} {:12} max|r| {:>12.6e}  rms {:>12.6e}  -> {}",
                s.engine.to_string(),
                mode,
                s.max_abs_claim,
                s.rms_claim,
                verdict
            );
        }
        let _ = writeln!(
            out,
            "limits: cap1 = {}, quantum threshold = {}, cap sqrt2 = {}, cap2 = {}",
            self.limits.cap_one,
            self.limits.quantum_threshold,
            self.limits.cap_sqrt_two,
            self.limits.cap_two
        );
        for r in &self.chsh {
            let _ = writeln!(
                out,
                "  chsh {:20} max|S| = {:.6} at (a={:.4}, a'={:.4}, b={:.4}, b'={:.4}){}",
                r.name,
                r.report.max_abs_s,
                r.report.argmax.a,
                r.report.argmax.a_prime,
                r.report.argmax.b,
                r.report.argmax.b_prime,
                if r.report.violated { "  [exceeds cap-1 bound]" } else { "" }
            );
        }
        out
    }
}

/// Combine components into one report, refusing components that were not
/// produced under the given manifest.
pub fn assemble_report(
    manifest: &RunManifest,
    curve: CorrelationCurve,
    residual_report: ResidualReport,
    chsh: ChshSection,
) -> Result<RunReport> {
    let expected = manifest.config_digest();
    for (what, digest) in [
        ("curve", &curve.source_digest),
        ("residuals", &residual_report.source_digest),
        ("chsh", &chsh.source_digest),
    ] {
        if digest != &expected {
            return Err(Error::ManifestMismatch(format!(
                "{what} was produced under config {digest}, manifest has {expected}"
            )));
        }
    }
    Ok(RunReport {
        manifest: manifest.clone(),
        curves: curve.points,
        residuals: residual_report,
        chsh: chsh.reports,
        limits: Limits::standard(),
    })
}

/// CSV encoding of a curve: `phi_rad,engine,mode,value,std_error`, one row
/// per point, full float precision. The mode column is `none` for the qm
/// engine.
pub fn curve_to_csv(curve: &CorrelationCurve) -> String {
    let mut out = String::from("phi_rad,engine,mode,value,std_error\n");
    for p in &curve.points {
        let mode = p.mode.map(|m| m.to_string()).unwrap_or_else(|| "none".into());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.phi_rad, p.engine, mode, p.value, p.std_error
        ));
    }
    out
}

/// Parse a curve written by [`curve_to_csv`]. The source digest is not
/// recoverable from CSV; callers verify file digests against a manifest
/// and restamp.
pub fn curve_from_csv(text: &str) -> Result<CorrelationCurve> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    if header.trim() != "phi_rad,engine,mode,value,std_error" {
        return Err(Error::Config(format!("unexpected CSV header `{header}`")));
    }
    let mut points = Vec::new();
    let mut grid: Vec<f64> = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!("CSV row {} has {} fields", idx + 2, fields.len())));
        }
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad float `{s}` in CSV row {}", idx + 2)))
        };
        let phi_rad = parse_f64(fields[0])?;
        let engine: Engine = fields[1].parse()?;
        let mode = match fields[2] {
            "none" => None,
            token => Some(token.parse::<Interpretation>()?),
        };
        let value = parse_f64(fields[3])?;
        let std_error = parse_f64(fields[4])?;
        if !grid.contains(&phi_rad) {
            grid.push(phi_rad);
        }
        points.push(CurvePoint { phi_rad, engine, mode, value, std_error });
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    let curve = CorrelationCurve { grid, points, source_digest: String::new() };
    curve.validate()?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn small_manifest() -> RunManifest {
        let config = RunConfig {
            phi_grid: degree_grid(7),
            engines: vec![
                EngineRequest { engine: Engine::Qm, mode: None },
                EngineRequest { engine: Engine::Quadrature, mode: Some(Interpretation::Literal) },
                EngineRequest { engine: Engine::Mc, mode: Some(Interpretation::Literal) },
            ],
            quadrature: QuadratureSpec::default(),
            mc: McSpec::new(20_000, 42).unwrap(),
            chsh_grid_step: PI / 18.0,
        };
        RunManifest::with_created_at(config, "2026-01-01T00:00:00+00:00".into())
    }

    #[test]
    fn qm_sweep_reproduces_the_joint_probability() {
        let grid = [0.0, PI / 4.0, PI / 2.0];
        let requests = [EngineRequest { engine: Engine::Qm, mode: None }];
        let curve = sweep(&grid, &requests, &QuadratureSpec::default(), &McSpec::new(1, 0).unwrap())
            .unwrap();
        let values: Vec<f64> = curve.points.iter().map(|p| p.value).collect();
        assert!((values[0] - 0.0).abs() < 1e-12);
        assert!((values[1] - 0.25).abs() < 1e-12);
        assert!((values[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qm_engine_rejects_a_mode() {
        let bad = EngineRequest { engine: Engine::Qm, mode: Some(Interpretation::Literal) };
        assert!(bad.validate().is_err());
        let missing = EngineRequest { engine: Engine::Mc, mode: None };
        assert!(missing.validate().is_err());
    }

    #[test]
    fn sweep_rejects_empty_and_decreasing_grids() {
        let requests = [EngineRequest { engine: Engine::Qm, mode: None }];
        let quad = QuadratureSpec::default();
        let mc = McSpec::new(1, 0).unwrap();
        assert!(sweep(&[], &requests, &quad, &mc).is_err());
        assert!(sweep(&[0.5, 0.25], &requests, &quad, &mc).is_err());
        assert!(sweep(&[0.5], &[], &quad, &mc).is_err());
    }

    #[test]
    fn full_default_sweep_completes_with_exact_quadrature_errors() {
        let config = RunConfig::default_with(
            QuadratureSpec::default(),
            McSpec::new(20_000, 3).unwrap(),
        );
        let manifest = RunManifest::with_created_at(config, "2026-01-01T00:00:00+00:00".into());
        let curve = run_sweep(&manifest).unwrap();
        assert_eq!(curve.grid.len(), 181);
        // qm + (quad + mc) x 3 modes.
        assert_eq!(curve.points.len(), 181 * 7);
        assert!(curve
            .points
            .iter()
            .filter(|p| p.engine == Engine::Quadrature)
            .all(|p| p.std_error == 0.0));
        assert!(curve
            .points
            .iter()
            .filter(|p| p.engine == Engine::Qm)
            .all(|p| p.std_error == 0.0 && p.mode.is_none()));
    }

    #[test]
    fn mc_sweeps_are_reproducible() {
        let grid = [0.9];
        let requests = [EngineRequest { engine: Engine::Mc, mode: Some(Interpretation::Literal) }];
        let quad = QuadratureSpec::default();
        let mc = McSpec::new(50_000, 7).unwrap();
        let c1 = sweep(&grid, &requests, &quad, &mc).unwrap();
        let c2 = sweep(&grid, &requests, &quad, &mc).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn residuals_are_zero_for_a_curve_matching_the_claim() {
        let grid = degree_grid(5);
        let mut points: Vec<CurvePoint> = grid
            .iter()
            .map(|&phi| CurvePoint {
                phi_rad: phi,
                engine: Engine::Quadrature,
                mode: Some(Interpretation::Literal),
                value: claimed_rate(phi),
                std_error: 0.0,
            })
            .collect();
        points.extend(grid.iter().map(|&phi| CurvePoint {
            phi_rad: phi,
            engine: Engine::Qm,
            mode: None,
            value: qm_joint_probability(phi),
            std_error: 0.0,
        }));
        let curve = CorrelationCurve { grid, points, source_digest: "x".into() };
        let report = residuals(&curve).unwrap();
        assert!(report.entries.iter().all(|e| e.claim_residual.abs() < 1e-15));
        assert!(report.summaries.iter().all(|s| s.reproduces_claim));
    }

    #[test]
    fn qm_series_always_reproduces_the_claim() {
        let manifest = small_manifest();
        let curve = run_sweep(&manifest).unwrap();
        let report = residuals(&curve).unwrap();
        let qm = report
            .summaries
            .iter()
            .find(|s| s.engine == Engine::Qm)
            .unwrap();
        assert!(qm.max_abs_claim < 1e-15);
        assert!(qm.reproduces_claim);
    }

    #[test]
    fn residuals_require_both_reference_and_model_series() {
        let grid = vec![0.3];
        let qm_only = CorrelationCurve {
            grid: grid.clone(),
            points: vec![CurvePoint {
                phi_rad: 0.3,
                engine: Engine::Qm,
                mode: None,
                value: qm_joint_probability(0.3),
                std_error: 0.0,
            }],
            source_digest: String::new(),
        };
        assert!(residuals(&qm_only).is_err());
    }

    #[test]
    fn summary_norms_are_consistent_with_entries() {
        let manifest = small_manifest();
        let curve = run_sweep(&manifest).unwrap();
        let report = residuals(&curve).unwrap();
        for s in &report.summaries {
            let rs: Vec<f64> = report
                .entries
                .iter()
                .filter(|e| e.engine == s.engine && e.mode == s.mode)
                .map(|e| e.claim_residual)
                .collect();
            let max = rs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            let rms_direct = (rs.iter().map(|r| r * r).sum::<f64>() / rs.len() as f64).sqrt();
            assert!((max - s.max_abs_claim).abs() < 1e-12);
            assert!((rms_direct - s.rms_claim).abs() < 1e-12);
        }
    }

    #[test]
    fn limits_match_the_cap_bounds() {
        use crate::bounds::classical_bound;
        let limits = Limits::standard();
        assert_eq!(limits.cap_one, classical_bound(1.0).unwrap());
        assert!((limits.cap_sqrt_two - classical_bound(SQRT_2).unwrap()).abs() < 1e-12);
        assert_eq!(limits.cap_two, classical_bound(2.0).unwrap());
        assert_eq!(limits.as_array(), [2.0, 2.0 * SQRT_2, 4.0, 8.0]);
    }

    #[test]
    fn report_assembly_checks_manifest_digests() {
        let manifest = small_manifest();
        let curve = run_sweep(&manifest).unwrap();
        let res = residuals(&curve).unwrap();
        let chsh = run_chsh(&manifest).unwrap();
        assert!(assemble_report(&manifest, curve.clone(), res.clone(), chsh.clone()).is_ok());

        let mut other_config = manifest.config.clone();
        other_config.chsh_grid_step = PI / 36.0;
        let other = RunManifest::with_created_at(other_config, manifest.created_at.clone());
        let err = assemble_report(&other, curve, res, chsh).unwrap_err();
        assert!(matches!(err, Error::ManifestMismatch(_)));
    }

    #[test]
    fn reports_regenerate_byte_identically() {
        let manifest = small_manifest();
        let build = || {
            let curve = run_sweep(&manifest).unwrap();
            let res = residuals(&curve).unwrap();
            let chsh = run_chsh(&manifest).unwrap();
            assemble_report(&manifest, curve, res, chsh).unwrap().to_json()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn report_schema_has_the_contracted_fields() {
        let manifest = small_manifest();
        let curve = run_sweep(&manifest).unwrap();
        let res = residuals(&curve).unwrap();
        let chsh = run_chsh(&manifest).unwrap();
        let report = assemble_report(&manifest, curve, res, chsh).unwrap();
        let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        let object = value.as_object().unwrap();
        for key in ["manifest", "curves", "residuals", "chsh", "limits"] {
            assert!(object.contains_key(key), "missing {key}");
        }
        let point = value["curves"][0].as_object().unwrap();
        for key in ["phi_rad", "engine", "mode", "value", "std_error"] {
            assert!(point.contains_key(key), "missing curve field {key}");
        }
        for key in ["version", "config", "seed", "created_at", "digests"] {
            assert!(value["manifest"].as_object().unwrap().contains_key(key), "missing {key}");
        }
    }

    #[test]
    fn csv_round_trips_the_curve() {
        let manifest = small_manifest();
        let curve = run_sweep(&manifest).unwrap();
        let csv = curve_to_csv(&curve);
        let back = curve_from_csv(&csv).unwrap();
        assert_eq!(back.grid, curve.grid);
        assert_eq!(back.points, curve.points);
    }

    #[test]
    fn csv_parser_rejects_malformed_input() {
        assert!(curve_from_csv("").is_err());
        assert!(curve_from_csv("wrong,header\n").is_err());
        assert!(curve_from_csv("phi_rad,engine,mode,value,std_error\n0.1,qm,none,oops,0\n").is_err());
        assert!(curve_from_csv("phi_rad,engine,mode,value,std_error\n0.1,warp,none,0.5,0\n").is_err());
    }

    #[test]
    fn chsh_section_names_all_configured_modes() {
        let manifest = small_manifest();
        let section = run_chsh(&manifest).unwrap();
        let names: Vec<&str> = section.reports.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["qm", "model-literal"]);
        // The manifest uses a coarse 10-degree grid; discretization of the
        // quadratic maximum costs a few percent.
        assert!((section.reports[0].report.max_abs_s - 2.0 * SQRT_2).abs() < 0.1);
        assert!(section.reports[0].report.violated);
    }

    #[test]
    fn dichotomic_reduction_recovers_the_qm_correlation_shape() {
        // Applied to the quantum rate itself the reduction returns -cos(2d).
        let corr = dichotomic_reduction(qm_joint_probability);
        for k in 0..20 {
            let d = k as f64 * PI / 19.0;
            assert!((corr(d) - qm_correlation(d)).abs() < 1e-12, "d = {d}");
        }
    }
}
