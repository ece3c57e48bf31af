//! Command-line driver: closed-form evaluation, model runs, CHSH audits,
//! full sweeps and report assembly.
//!
//! Exit codes are a stable contract: 0 success, 2 usage or configuration
//! error, 3 data-integrity error (missing or mismatched manifest/digest).

mod config;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use eprb_core::bounds::{audit_strategy, chsh_max, strategies, BoundReport};
use eprb_core::harness::{
    assemble_report, curve_from_csv, curve_to_csv, degree_grid, residuals, run_chsh, run_sweep,
    ChshSection, CorrelationCurve, Engine, EngineRequest, Limits, RunConfig, RunManifest,
};
use eprb_core::integrate::{Interpretation, McSpec, QuadratureRule, QuadratureSpec};
use eprb_core::qm::{component_sum, qm_correlation, qm_joint_probability};

use config::{deg_to_rad, sidecar_manifest_path, CliConfig, FileManifest};

#[derive(Parser)]
#[command(
    name = "eprb",
    version,
    about = "Verification lab for the photon EPRB experiment: closed-form predictions, \
             a two-mode signal model under three interpretation modes, and CHSH audits."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form correlation and joint probability at one angle.
    Qm(QmArgs),
    /// Evaluate the signal model with one engine and write a curve.
    Model(ModelArgs),
    /// Audit a local strategy (or maximize a named correlation) against the CHSH bounds.
    Audit(AuditArgs),
    /// Run every configured engine over the phi grid into a run directory.
    Sweep(SweepArgs),
    /// Verify a run directory and assemble the combined report and plot script.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct QmArgs {
    /// Configuration file (JSON mirror of the defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evaluation angle in degrees.
    #[arg(long)]
    phi_deg: Option<f64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// quad or mc.
    #[arg(long, value_parser = ["quad", "mc"])]
    engine: Option<String>,
    #[arg(long, value_parser = ["literal", "square-first", "pair-norm"])]
    mode: Option<String>,
    /// Single evaluation angle in degrees (conflicts with --phi-steps).
    #[arg(long, conflicts_with = "phi_steps")]
    phi_deg: Option<f64>,
    /// Number of grid points over [0, 180] degrees inclusive.
    #[arg(long)]
    phi_steps: Option<usize>,
    /// Quadrature nodes per dimension (quad engine only).
    #[arg(long)]
    quad_order: Option<usize>,
    /// Monte Carlo sample count (mc engine only).
    #[arg(long)]
    samples: Option<u64>,
    /// Monte Carlo seed (mc engine only).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Strategy selector.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    lambda_samples: Option<u64>,
    /// Settings-grid step in degrees.
    #[arg(long)]
    grid_step_deg: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comma-separated engine list, e.g. qm,quad,mc.
    #[arg(long)]
    engines: Option<String>,
    /// Comma-separated interpretation modes for the model engines.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    phi_steps: Option<usize>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// CHSH settings-grid step in degrees.
    #[arg(long)]
    grid_step_deg: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory produced by `sweep`.
    run_dir: PathBuf,
}

enum CliError {
    Usage(String),
    Integrity(String),
    Other(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Integrity(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => format!("error: {m}"),
            CliError::Integrity(m) => format!("integrity error: {m}"),
            CliError::Other(e) => format!("error: {e:#}"),
        }
    }
}

impl From<eprb_core::Error> for CliError {
    fn from(e: eprb_core::Error) -> Self {
        use eprb_core::Error::*;
        match e {
            ManifestMismatch(_) => CliError::Integrity(e.to_string()),
            DegenerateNormalization(_) => CliError::Other(e.into()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Qm(args) => cmd_qm(args),
        Command::Model(args) => cmd_model(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<CliConfig, CliError> {
    match path {
        Some(p) => CliConfig::load(p).map_err(|e| CliError::Usage(format!("{e:#}"))),
        None => Ok(CliConfig::default()),
    }
}

fn parse_rule(token: &str) -> Result<QuadratureRule, CliError> {
    match token {
        "gauss_legendre" => Ok(QuadratureRule::GaussLegendre),
        "trapezoid" => Ok(QuadratureRule::Trapezoid),
        other => Err(CliError::Usage(format!(
            "unknown quadrature rule `{other}` (expected gauss_legendre or trapezoid)"
        ))),
    }
}

fn format_token(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn finite_angle_deg(deg: f64) -> Result<f64, CliError> {
    if !deg.is_finite() {
        return Err(CliError::Usage(format!("angle must be finite, got {deg}")));
    }
    Ok(deg)
}

/// Grid in radians: a single angle when `phi_deg` is set, the inclusive
/// [0, pi] grid otherwise.
fn build_grid(cfg: &CliConfig) -> Result<Vec<f64>, CliError> {
    match cfg.phi_deg {
        Some(deg) => Ok(vec![deg_to_rad(finite_angle_deg(deg)?)]),
        None => {
            if cfg.phi_steps < 1 {
                return Err(CliError::Usage("phi_steps must be at least 1".into()));
            }
            Ok(degree_grid(cfg.phi_steps))
        }
    }
}

fn build_specs(cfg: &CliConfig) -> Result<(QuadratureSpec, McSpec), CliError> {
    let quad = QuadratureSpec::new(cfg.quad_order, parse_rule(&cfg.quad_rule)?)?;
    let mc = McSpec::new(cfg.samples, cfg.seed)?;
    Ok((quad, mc))
}

fn build_run_config(cfg: &CliConfig, requests: Vec<EngineRequest>) -> Result<RunConfig, CliError> {
    let (quadrature, mc) = build_specs(cfg)?;
    Ok(RunConfig {
        phi_grid: build_grid(cfg)?,
        engines: requests,
        quadrature,
        mc,
        chsh_grid_step: deg_to_rad(cfg.grid_step_deg),
    })
}

fn write_with_manifest(
    out: &Path,
    bytes: &[u8],
    cfg: &CliConfig,
    seed: u64,
) -> Result<(), CliError> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))
                .map_err(CliError::Other)?;
        }
    }
    std::fs::write(out, bytes)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(CliError::Other)?;

    let config_value = serde_json::to_value(cfg).expect("config serializes");
    let mut manifest = FileManifest::new(config_value, seed, chrono::Utc::now().to_rfc3339());
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| out.display().to_string());
    manifest.record(&name, bytes);
    manifest
        .save(&sidecar_manifest_path(out))
        .map_err(CliError::Other)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// qm
// ---------------------------------------------------------------------------

fn cmd_qm(args: QmArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(deg) = args.phi_deg {
        cfg.phi_deg = Some(deg);
    }
    if let Some(f) = args.format {
        cfg.format = format_token(f).into();
    }
    let Some(deg) = cfg.phi_deg else {
        return Err(CliError::Usage(
            "qm needs an angle: pass --phi-deg or set phi_deg in the config".into(),
        ));
    };
    let phi = deg_to_rad(finite_angle_deg(deg)?);
    let correlation = qm_correlation(phi);
    let joint = qm_joint_probability(phi);
    let sum = component_sum(phi);

    if cfg.format == "json" {
        let value = serde_json::json!({
            "phi_deg": deg,
            "phi_rad": phi,
            "correlation": correlation,
            "joint_probability": joint,
            "component_sum": sum,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("serializes"));
    } else {
        println!("phi_deg {deg}");
        println!("phi_rad {phi}");
        println!("correlation {correlation}");
        println!("joint_probability {joint}");
        println!("component_sum {sum}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

fn cmd_model(args: ModelArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(v) = &args.engine {
        cfg.engine = v.clone();
    }
    if let Some(v) = &args.mode {
        cfg.mode = v.clone();
    }
    if let Some(v) = args.phi_deg {
        cfg.phi_deg = Some(v);
    }
    if let Some(v) = args.phi_steps {
        cfg.phi_deg = None;
        cfg.phi_steps = v;
    }
    if let Some(v) = args.quad_order {
        cfg.quad_order = v;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(f) = args.format {
        cfg.format = format_token(f).into();
    }

    let engine: Engine = cfg.engine.parse()?;
    match engine {
        Engine::Quadrature => {
            if args.samples.is_some() || args.seed.is_some() {
                return Err(CliError::Usage(
                    "--samples/--seed are Monte Carlo flags and conflict with --engine quad"
                        .into(),
                ));
            }
        }
        Engine::Mc => {
            if args.quad_order.is_some() {
                return Err(CliError::Usage(
                    "--quad-order is a quadrature flag and conflicts with --engine mc".into(),
                ));
            }
        }
        Engine::Qm => {
            return Err(CliError::Usage(
                "model evaluates the signal model; use the qm subcommand for closed forms".into(),
            ));
        }
    }

    let mode: Interpretation = cfg.mode.parse()?;
    let requests = vec![EngineRequest { engine, mode: Some(mode) }];
    let run_config = build_run_config(&cfg, requests)?;
    let manifest = RunManifest::new(run_config);
    let curve = run_sweep(&manifest)?;

    let bytes = match cfg.format.as_str() {
        "json" => serde_json::to_string_pretty(&curve).expect("curve serializes"),
        "csv" => curve_to_csv(&curve),
        other => {
            return Err(CliError::Usage(format!(
                "unknown format `{other}` (expected csv or json)"
            )))
        }
    };

    match &args.out {
        Some(out) => write_with_manifest(out, bytes.as_bytes(), &cfg, cfg.seed)?,
        None => print!("{bytes}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

const STRATEGY_HELP: &str =
    "available strategies: sign-cos, constant-one, model-amplitude, random-signs, qm-correlation";

#[derive(serde::Serialize)]
struct AuditOutput {
    strategy: String,
    limits: Limits,
    report: BoundReport,
    exceeds_cap_one_bound: bool,
    exceeds_cap_bound: bool,
}

fn cmd_audit(args: AuditArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(v) = &args.strategy {
        cfg.strategy = v.clone();
    }
    if let Some(v) = args.lambda_samples {
        cfg.lambda_samples = v;
    }
    if let Some(v) = args.grid_step_deg {
        cfg.grid_step_deg = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }

    let step = deg_to_rad(cfg.grid_step_deg);
    let report = match cfg.strategy.as_str() {
        "sign-cos" => audit_strategy(&strategies::sign_cos(), step, cfg.lambda_samples, cfg.seed)?,
        "constant-one" => {
            audit_strategy(&strategies::constant_one(), step, cfg.lambda_samples, cfg.seed)?
        }
        "model-amplitude" => {
            audit_strategy(&strategies::model_amplitude(), step, cfg.lambda_samples, cfg.seed)?
        }
        "random-signs" => audit_strategy(
            &strategies::random_signs(cfg.seed),
            step,
            cfg.lambda_samples,
            cfg.seed,
        )?,
        "qm-correlation" => chsh_max(qm_correlation, step)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown strategy `{other}`; {STRATEGY_HELP}"
            )))
        }
    };

    let limits = Limits::standard();
    let output = AuditOutput {
        strategy: cfg.strategy.clone(),
        exceeds_cap_one_bound: report.max_abs_s > limits.cap_one + report.tolerance,
        exceeds_cap_bound: report.violated,
        limits,
        report,
    };
    let json = serde_json::to_string_pretty(&output).expect("audit serializes");
    match &args.out {
        Some(out) => write_with_manifest(out, json.as_bytes(), &cfg, cfg.seed)?,
        None => println!("{json}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn parse_list(tokens: &str) -> Vec<String> {
    tokens
        .split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

fn build_requests(cfg: &CliConfig) -> Result<Vec<EngineRequest>, CliError> {
    let mut requests = Vec::new();
    for token in &cfg.engines {
        let engine: Engine = token.as_str().parse()?;
        match engine {
            Engine::Qm => requests.push(EngineRequest { engine, mode: None }),
            Engine::Quadrature | Engine::Mc => {
                for mode in &cfg.modes {
                    requests.push(EngineRequest {
                        engine,
                        mode: Some(mode.parse::<Interpretation>()?),
                    });
                }
            }
        }
    }
    if requests.is_empty() {
        return Err(CliError::Usage("no engines configured".into()));
    }
    Ok(requests)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(v) = &args.engines {
        cfg.engines = parse_list(v);
    }
    if let Some(v) = &args.modes {
        cfg.modes = parse_list(v);
    }
    if let Some(v) = args.phi_steps {
        cfg.phi_deg = None;
        cfg.phi_steps = v;
    }
    if let Some(v) = args.quad_order {
        cfg.quad_order = v;
    }
    if let Some(v) = args.samples {
        cfg.samples = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.grid_step_deg {
        cfg.grid_step_deg = v;
    }
    if let Some(f) = args.format {
        cfg.format = format_token(f).into();
    }

    let requests = build_requests(&cfg)?;
    let run_config = build_run_config(&cfg, requests)?;
    let manifest = RunManifest::new(run_config);

    let curve = run_sweep(&manifest)?;
    let chsh = run_chsh(&manifest)?;

    let dir = &args.out;
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::Other)?;

    let (curve_name, curve_bytes) = match cfg.format.as_str() {
        "json" => (
            "curve.json",
            serde_json::to_string_pretty(&curve).expect("curve serializes"),
        ),
        "csv" => ("curve.csv", curve_to_csv(&curve)),
        other => {
            return Err(CliError::Usage(format!(
                "unknown format `{other}` (expected csv or json)"
            )))
        }
    };
    let chsh_bytes = serde_json::to_string_pretty(&chsh).expect("chsh serializes");

    std::fs::write(dir.join(curve_name), &curve_bytes)
        .context("writing curve")
        .map_err(CliError::Other)?;
    std::fs::write(dir.join("chsh.json"), &chsh_bytes)
        .context("writing chsh")
        .map_err(CliError::Other)?;

    // The effective merged config, so the run can be repeated verbatim
    // with `--config <dir>/config.json`.
    cfg.save(&dir.join("config.json")).map_err(CliError::Other)?;

    let config_value = serde_json::to_value(&cfg).expect("config serializes");
    let mut file_manifest = FileManifest::new(config_value, cfg.seed, manifest.created_at.clone());
    file_manifest.record(curve_name, curve_bytes.as_bytes());
    file_manifest.record("chsh.json", chsh_bytes.as_bytes());
    file_manifest.record(
        "config.json",
        &std::fs::read(dir.join("config.json"))
            .context("rereading config.json")
            .map_err(CliError::Other)?,
    );
    file_manifest
        .save(&dir.join("manifest.json"))
        .map_err(CliError::Other)?;

    println!(
        "wrote {} ({} points), chsh.json, config.json and manifest.json to {}",
        curve_name,
        curve.points.len(),
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let dir = &args.run_dir;
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(CliError::Integrity(format!(
            "no manifest.json in {}",
            dir.display()
        )));
    }
    let mut file_manifest =
        FileManifest::load(&manifest_path).map_err(|e| CliError::Integrity(format!("{e:#}")))?;

    // Every recorded output must still match its digest.
    let recorded: Vec<String> = file_manifest.digests.keys().cloned().collect();
    for name in &recorded {
        file_manifest.verify(dir, name).map_err(CliError::Integrity)?;
    }

    let cfg: CliConfig = serde_json::from_value(file_manifest.config.clone())
        .map_err(|e| CliError::Integrity(format!("manifest config does not parse: {e}")))?;
    let requests = build_requests(&cfg)?;
    let run_config = build_run_config(&cfg, requests)?;
    let core_manifest = RunManifest::with_created_at(run_config, file_manifest.created_at.clone());

    let mut curve: CorrelationCurve = if file_manifest.digests.contains_key("curve.csv") {
        let text = std::fs::read_to_string(dir.join("curve.csv"))
            .context("reading curve.csv")
            .map_err(CliError::Other)?;
        curve_from_csv(&text)?
    } else if file_manifest.digests.contains_key("curve.json") {
        let text = std::fs::read_to_string(dir.join("curve.json"))
            .context("reading curve.json")
            .map_err(CliError::Other)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Integrity(format!("curve.json does not parse: {e}")))?
    } else {
        return Err(CliError::Integrity(
            "manifest records no curve.csv or curve.json".into(),
        ));
    };
    curve.source_digest = core_manifest.config_digest();

    let chsh_text = std::fs::read_to_string(dir.join("chsh.json"))
        .context("reading chsh.json")
        .map_err(CliError::Other)?;
    let chsh: ChshSection = serde_json::from_str(&chsh_text)
        .map_err(|e| CliError::Integrity(format!("chsh.json does not parse: {e}")))?;

    let residual_report = residuals(&curve)?;
    let report = assemble_report(&core_manifest, curve, residual_report, chsh)?;

    let report_json = report.to_json();
    let report_txt = report.summary_text();
    let plot_py = plot::plot_script(&report);

    std::fs::write(dir.join("report.json"), &report_json)
        .context("writing report.json")
        .map_err(CliError::Other)?;
    std::fs::write(dir.join("report.txt"), &report_txt)
        .context("writing report.txt")
        .map_err(CliError::Other)?;
    std::fs::write(dir.join("plot_curves.py"), &plot_py)
        .context("writing plot_curves.py")
        .map_err(CliError::Other)?;

    file_manifest.record("report.json", report_json.as_bytes());
    file_manifest.record("report.txt", report_txt.as_bytes());
    file_manifest.record("plot_curves.py", plot_py.as_bytes());
    file_manifest.save(&manifest_path).map_err(CliError::Other)?;

    print!("{report_txt}");
    println!(
        "wrote report.json, report.txt and plot_curves.py to {}",
        dir.display()
    );
    Ok(())
}
