//! Shared inputs for the engine benchmarks.

use eprb_core::harness::degree_grid;
use eprb_core::integrate::{McSpec, QuadratureRule, QuadratureSpec};

pub fn quad(order: usize) -> QuadratureSpec {
    QuadratureSpec::new(order, QuadratureRule::GaussLegendre).expect("valid order")
}

pub fn mc(samples: u64) -> McSpec {
    McSpec::new(samples, 42).expect("valid spec")
}

pub fn sweep_grid() -> Vec<f64> {
    degree_grid(181)
}
