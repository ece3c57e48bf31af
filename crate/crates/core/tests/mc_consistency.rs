//! Statistical consistency of the Monte Carlo engine against quadrature,
//! per interpretation mode: across seeds, the four-sigma band must hold at
//! nearly every point. The full-grid version of this check for the literal
//! mode lives in the acceptance suite.

use eprb_core::integrate::{
    coincidence_integral, mc_coincidence_sweep, Interpretation, McSpec, QuadratureSpec,
};

fn consistency_fraction(mode: Interpretation, phis: &[f64], seeds: u64, samples: u64) -> f64 {
    let q = QuadratureSpec::default();
    let references: Vec<f64> = phis
        .iter()
        .map(|&phi| coincidence_integral(phi, &q, mode).unwrap().value)
        .collect();

    let mut checks = 0u64;
    let mut hits = 0u64;
    for seed in 0..seeds {
        let mc = McSpec::new(samples, seed).unwrap();
        let estimates = mc_coincidence_sweep(phis, &mc, mode).unwrap();
        for (est, reference) in estimates.iter().zip(&references) {
            checks += 1;
            if (est.value - reference).abs() <= 4.0 * est.std_error {
                hits += 1;
            }
        }
    }
    hits as f64 / checks as f64
}

#[test]
fn square_first_mode_is_consistent_across_seeds() {
    let fraction = consistency_fraction(
        Interpretation::SquareBeforePhaseAverage,
        &[0.35, 1.2, 2.7],
        100,
        1_000_000,
    );
    assert!(fraction >= 0.99, "consistent fraction = {fraction}");
}

#[test]
fn literal_mode_is_consistent_across_seeds() {
    let fraction = consistency_fraction(Interpretation::Literal, &[0.35, 1.2, 2.7], 100, 1_000_000);
    assert!(fraction >= 0.99, "consistent fraction = {fraction}");
}

#[test]
fn pair_norm_mode_is_consistent_across_seeds() {
    let fraction = consistency_fraction(
        Interpretation::PairRateNormalized,
        &[0.35, 2.7],
        100,
        1_000_000,
    );
    assert!(fraction >= 0.99, "consistent fraction = {fraction}");
}
