//! Acceptance suite: one test per exit criterion, each printing a pass
//! line with its measured numbers (visible under `--nocapture`).

use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use std::f64::consts::{PI, SQRT_2};

use eprb_core::bounds::{audit_strategy, chsh_max, strategies};
use eprb_core::harness::{
    assemble_report, claimed_rate, degree_grid, residuals, run_chsh, run_sweep, Engine,
    EngineRequest, RunConfig, RunManifest,
};
use eprb_core::integrate::{
    coincidence_integral, coincidence_rate, mc_coincidence_sweep, Interpretation, McSpec,
    QuadratureRule, QuadratureSpec,
};
use eprb_core::model::{amplitude_a, pair_rate, singles_rate, HiddenVars};
use eprb_core::qm::{qm_correlation, qm_joint_probability, state_vector_correlation};

#[derive(Debug, Deserialize)]
struct Reference {
    singles_rate: f64,
    modes: std::collections::BTreeMap<String, Vec<ModePoint>>,
}

#[derive(Debug, Deserialize)]
struct ModePoint {
    phi: f64,
    rate: f64,
    claim_residual: f64,
}

fn reference() -> Reference {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/trapezoid_reference.json"
    );
    serde_json::from_str(&std::fs::read_to_string(path).expect("fixture file"))
        .expect("fixture parses")
}

fn mode_key(mode: Interpretation) -> &'static str {
    match mode {
        Interpretation::Literal => "literal",
        Interpretation::SquareBeforePhaseAverage => "square_before_phase_average",
        Interpretation::PairRateNormalized => "pair_rate_normalized",
    }
}

#[test]
fn acceptance_qm_closed_forms() {
    let start = Instant::now();
    let grid = degree_grid(181);
    let mut worst: f64 = 0.0;
    for &phi in &grid {
        let corr = qm_correlation(phi);
        let joint = qm_joint_probability(phi);
        worst = worst
            .max((corr - -(2.0 * phi).cos()).abs())
            .max((joint - 0.5 * phi.sin() * phi.sin()).abs())
            .max((corr - state_vector_correlation(phi).unwrap()).abs());
        assert!((corr - -(2.0 * phi).cos()).abs() < 1e-12);
        assert!((joint - 0.5 * phi.sin() * phi.sin()).abs() < 1e-12);
        assert!((corr - state_vector_correlation(phi).unwrap()).abs() < 1e-12);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE qm_closed_forms: PASS (181 points, worst deviation {worst:.3e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_chsh_threshold() {
    let target = 2.0 * SQRT_2;

    let start = Instant::now();
    let coarse = chsh_max(qm_correlation, PI / 180.0).unwrap();
    let coarse_time = start.elapsed();
    let coarse_err = (coarse.max_abs_s - target).abs();
    assert!(coarse_err <= 1e-3, "1 deg: {} (err {coarse_err:.2e})", coarse.max_abs_s);
    assert!(coarse_time.as_secs_f64() < 60.0, "1 deg took {coarse_time:?}");

    let start = Instant::now();
    let fine = chsh_max(qm_correlation, PI / 1800.0).unwrap();
    let fine_time = start.elapsed();
    let fine_err = (fine.max_abs_s - target).abs();
    assert!(fine_err <= 1e-5, "0.1 deg: {} (err {fine_err:.2e})", fine.max_abs_s);

    println!(
        "ACCEPTANCE chsh_threshold: PASS (1 deg err {coarse_err:.2e} in {coarse_time:?}, \
         0.1 deg err {fine_err:.2e} in {fine_time:?})"
    );
}

#[test]
fn acceptance_bell_class_audit() {
    let start = Instant::now();
    let strategies_total = 10_000u64;
    let violations: Vec<u64> = (0..strategies_total)
        .into_par_iter()
        .filter(|&k| {
            let strategy = strategies::random_signs(k);
            let report = audit_strategy(&strategy, PI / 18.0, 1000, 10_000 + k).unwrap();
            let allowed = 2.0 + 4.0 * report.std_error + 1e-12;
            report.violated || report.max_abs_s > allowed
        })
        .collect();
    let elapsed = start.elapsed();
    assert!(
        violations.is_empty(),
        "{} of {strategies_total} strategies exceeded the bound: {:?}",
        violations.len(),
        &violations[..violations.len().min(10)]
    );
    println!(
        "ACCEPTANCE bell_class_audit: PASS ({strategies_total} random cap-1 strategies, \
         zero violations of 2 + 4se, {elapsed:?})"
    );
}

#[test]
fn acceptance_model_amplitude_cap() {
    use rand::SeedableRng;
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xEB);
    let mut max_abs: f64 = 0.0;
    for _ in 0..10_000_000u64 {
        max_abs = max_abs.max(amplitude_a(&HiddenVars::sample(&mut rng)).abs());
    }
    let elapsed = start.elapsed();
    assert!(
        (SQRT_2 - 1e-3..=SQRT_2).contains(&max_abs),
        "empirical max |A| = {max_abs}"
    );
    println!(
        "ACCEPTANCE model_amplitude_cap: PASS (max |A| over 1e7 samples = {max_abs:.9} \
         in [sqrt(2) - 1e-3, sqrt(2)], {elapsed:?})"
    );
}

#[test]
fn acceptance_quadrature_convergence() {
    let start = Instant::now();
    let grid = degree_grid(181);
    let q64 = QuadratureSpec::new(64, QuadratureRule::GaussLegendre).unwrap();
    let q128 = QuadratureSpec::new(128, QuadratureRule::GaussLegendre).unwrap();

    let worst = grid
        .par_iter()
        .map(|&phi| {
            let mut worst: f64 = 0.0;
            for mode in Interpretation::ALL {
                let lo = coincidence_integral(phi, &q64, mode).unwrap().value;
                let hi = coincidence_integral(phi, &q128, mode).unwrap().value;
                let rel = (lo - hi).abs() / lo.abs().max(hi.abs()).max(1e-12);
                assert!(rel < 1e-10, "{mode} phi={phi}: {lo} vs {hi} (rel {rel:.2e})");
                worst = worst.max(rel);
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE quadrature_convergence: PASS (181 points x 3 modes, 64 -> 128 nodes, \
         worst relative change {worst:.3e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_mc_quadrature_consistency() {
    let start = Instant::now();
    let grid = degree_grid(181);
    let q = QuadratureSpec::default();
    let mode = Interpretation::Literal;
    let references: Vec<f64> = grid
        .par_iter()
        .map(|&phi| coincidence_integral(phi, &q, mode).unwrap().value)
        .collect();

    let seeds = 100u64;
    let results: Vec<(u64, u64)> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mc = McSpec::new(1_000_000, seed).unwrap();
            let estimates = mc_coincidence_sweep(&grid, &mc, mode).unwrap();
            let mut hits = 0u64;
            for (est, reference) in estimates.iter().zip(&references) {
                if (est.value - reference).abs() <= 4.0 * est.std_error {
                    hits += 1;
                }
            }
            (hits, grid.len() as u64)
        })
        .collect();
    let hits: u64 = results.iter().map(|(h, _)| h).sum();
    let checks: u64 = results.iter().map(|(_, n)| n).sum();
    let fraction = hits as f64 / checks as f64;
    let elapsed = start.elapsed();
    assert!(
        fraction >= 0.99,
        "only {hits}/{checks} point-seed checks within 4 sigma ({fraction:.4})"
    );
    println!(
        "ACCEPTANCE mc_quadrature_consistency: PASS ({hits}/{checks} checks within \
         4 sigma = {fraction:.4} over 100 seeds x 181 points x 1e6 samples, {elapsed:?})"
    );
}

#[test]
fn acceptance_oracle_agreement() {
    let start = Instant::now();
    let r = reference();
    let q = QuadratureSpec::default();

    let got_singles = singles_rate(&q).unwrap();
    assert!((got_singles - r.singles_rate).abs() < 1e-10);
    assert!((got_singles - 0.5).abs() < 1e-10);

    let mut points = 0usize;
    let mut worst: f64 = 0.0;
    for mode in Interpretation::ALL {
        for p in &r.modes[mode_key(mode)] {
            let got = coincidence_rate(p.phi, &q, mode).unwrap().value;
            let err = (got - p.rate).abs();
            assert!(err < 1e-8, "{mode} phi={}: {} vs {}", p.phi, got, p.rate);
            worst = worst.max(err);
            points += 1;
        }
    }
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE oracle_agreement: PASS (singles rate {got_singles:.12}, {points} \
         frozen rate fixtures matched within {worst:.3e}, {elapsed:?})"
    );
}

#[test]
fn acceptance_claim_adjudication() {
    let start = Instant::now();
    let r = reference();
    let fixture_grid: Vec<f64> = r.modes["literal"].iter().map(|p| p.phi).collect();

    let mut engines = vec![EngineRequest { engine: Engine::Qm, mode: None }];
    engines.extend(Interpretation::ALL.iter().map(|mode| EngineRequest {
        engine: Engine::Quadrature,
        mode: Some(*mode),
    }));
    let config = RunConfig {
        phi_grid: fixture_grid,
        engines,
        quadrature: QuadratureSpec::default(),
        mc: McSpec::new(1000, 0).unwrap(),
        chsh_grid_step: PI / 60.0,
    };
    let manifest = RunManifest::with_created_at(config, "2026-01-01T00:00:00+00:00".into());

    let build = || {
        let curve = run_sweep(&manifest).unwrap();
        let report = residuals(&curve).unwrap();
        let chsh = run_chsh(&manifest).unwrap();
        assemble_report(&manifest, curve, report, chsh).unwrap()
    };
    let report = build();

    // Deterministic regeneration.
    assert_eq!(report.to_json(), build().to_json());

    // Residuals equal the frozen profile at every fixture point.
    let mut worst: f64 = 0.0;
    for mode in Interpretation::ALL {
        for p in &r.modes[mode_key(mode)] {
            let entry = report
                .residuals
                .entries
                .iter()
                .find(|e| {
                    e.engine == Engine::Quadrature && e.mode == Some(mode) && e.phi_rad == p.phi
                })
                .expect("entry for fixture point");
            let err = (entry.claim_residual - p.claim_residual).abs();
            assert!(err < 1e-8, "{mode} phi={}: {} vs {}", p.phi, entry.claim_residual, p.claim_residual);
            worst = worst.max(err);
        }
    }

    // Claim and computation side by side for all three modes, with the
    // reproduction flag. Per the frozen profile, no mode reproduces the
    // stated sin^2/2 law.
    for mode in Interpretation::ALL {
        let summary = report
            .residuals
            .summaries
            .iter()
            .find(|s| s.engine == Engine::Quadrature && s.mode == Some(mode))
            .expect("summary per mode");
        let frozen_max = r.modes[mode_key(mode)]
            .iter()
            .fold(0.0f64, |m, p| m.max(p.claim_residual.abs()));
        assert!((summary.max_abs_claim - frozen_max).abs() < 1e-8);
        assert!(!summary.reproduces_claim, "{mode} unexpectedly reproduces the claim");
    }
    let qm_summary = report
        .residuals
        .summaries
        .iter()
        .find(|s| s.engine == Engine::Qm)
        .unwrap();
    assert!(qm_summary.reproduces_claim);

    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    for key in ["manifest", "curves", "residuals", "chsh", "limits"] {
        assert!(json.get(key).is_some(), "report lacks {key}");
    }
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE claim_adjudication: PASS (residual profile matches frozen reference \
         within {worst:.3e}; no mode reproduces sin^2/2, qm reference does, {elapsed:?})"
    );
}

#[test]
fn acceptance_reproducibility() {
    let start = Instant::now();
    let config = RunConfig {
        phi_grid: degree_grid(13),
        engines: vec![
            EngineRequest { engine: Engine::Qm, mode: None },
            EngineRequest { engine: Engine::Quadrature, mode: Some(Interpretation::Literal) },
            EngineRequest { engine: Engine::Mc, mode: Some(Interpretation::Literal) },
            EngineRequest {
                engine: Engine::Mc,
                mode: Some(Interpretation::SquareBeforePhaseAverage),
            },
        ],
        quadrature: QuadratureSpec::default(),
        mc: McSpec::new(200_000, 777).unwrap(),
        chsh_grid_step: PI / 36.0,
    };
    let manifest = RunManifest::with_created_at(config, "2026-01-01T00:00:00+00:00".into());
    let run = || {
        let curve = run_sweep(&manifest).unwrap();
        let report = residuals(&curve).unwrap();
        let chsh = run_chsh(&manifest).unwrap();
        assemble_report(&manifest, curve, report, chsh).unwrap().to_json()
    };
    let first = run();
    let second = run();
    assert_eq!(first.as_bytes(), second.as_bytes(), "reports differ between reruns");
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE reproducibility: PASS (two pipeline runs of the same manifest produced \
         byte-identical {}-byte reports, {elapsed:?})",
        first.len()
    );
}

#[test]
fn acceptance_pair_rate_oracle() {
    // Companion to oracle_agreement: the normalizer itself at 1e-10.
    let q = QuadratureSpec::default();
    let pr = pair_rate(&q).unwrap();
    assert!((pr - 0.25).abs() < 1e-10);
    assert!((claimed_rate(PI / 2.0) - 0.5).abs() < 1e-15);
    println!("ACCEPTANCE pair_rate_oracle: PASS (pair rate {pr:.12})");
}
