//! Closed-form quantum predictions for the two-photon singlet.
//!
//! States and rotations are real-valued throughout; the polarization
//! amplitudes involved never pick up a complex phase. Angles are radians
//! everywhere. All functions here are pure and thread-safe.

use crate::error::{Error, Result};

/// Two-photon polarization state: real amplitudes over the product basis
/// {|x1 x2>, |x1 y2>, |y1 x2>, |y1 y2>}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonState {
    pub c_xx: f64,
    pub c_xy: f64,
    pub c_yx: f64,
    pub c_yy: f64,
}

impl TwoPhotonState {
    pub fn new(c_xx: f64, c_xy: f64, c_yx: f64, c_yy: f64) -> Self {
        Self { c_xx, c_xy, c_yx, c_yy }
    }

    /// Euclidean norm of the amplitude vector.
    pub fn norm(&self) -> f64 {
        (self.c_xx * self.c_xx
            + self.c_xy * self.c_xy
            + self.c_yx * self.c_yx
            + self.c_yy * self.c_yy)
            .sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }
}

/// The singlet state: (0, 1/sqrt(2), -1/sqrt(2), 0).
pub fn singlet() -> TwoPhotonState {
    TwoPhotonState::new(
        0.0,
        std::f64::consts::FRAC_1_SQRT_2,
        -std::f64::consts::FRAC_1_SQRT_2,
        0.0,
    )
}

/// Plane rotation by an angle, `[[cos, sin], [-sin, cos]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2 {
    entries: [[f64; 2]; 2],
}

impl Rotation2 {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::NonFiniteAngle(phi));
        }
        let (s, c) = phi.sin_cos();
        Ok(Self { entries: [[c, s], [-s, c]] })
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.entries;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    pub fn transpose(&self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        Self { entries: [[a, c], [b, d]] }
    }

    pub fn compose(&self, other: &Self) -> Self {
        let [[a, b], [c, d]] = self.entries;
        let [[e, f], [g, h]] = other.entries;
        Self {
            entries: [
                [a * e + b * g, a * f + b * h],
                [c * e + d * g, c * f + d * h],
            ],
        }
    }
}

/// Exit channel of a dichotomic polarization measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementChannel {
    Plus,
    Minus,
}

impl MeasurementChannel {
    /// +1 for the x channel, -1 for the y channel.
    pub fn eigenvalue(self) -> f64 {
        match self {
            MeasurementChannel::Plus => 1.0,
            MeasurementChannel::Minus => -1.0,
        }
    }
}

/// Express the state in the basis where the second photon's analyzer is
/// rotated by `phi`. The amplitude pairs (c_ax, c_ay) transform with the
/// same plane rotation that carries the basis vectors.
pub fn rotate_arm(state: &TwoPhotonState, phi: f64) -> Result<TwoPhotonState> {
    let rot = Rotation2::new(phi)?;
    let [xx, xy] = rot.apply([state.c_xx, state.c_xy]);
    let [yx, yy] = rot.apply([state.c_yx, state.c_yy]);
    Ok(TwoPhotonState::new(xx, xy, yx, yy))
}

/// Expectation of the product of the two stations' +/-1 outcomes in the
/// given (already rotated) state.
pub fn product_expectation(state: &TwoPhotonState) -> f64 {
    use MeasurementChannel::{Minus, Plus};
    let terms = [
        (state.c_xx, Plus, Plus),
        (state.c_xy, Plus, Minus),
        (state.c_yx, Minus, Plus),
        (state.c_yy, Minus, Minus),
    ];
    terms
        .iter()
        .map(|(c, m1, m2)| c * c * m1.eigenvalue() * m2.eigenvalue())
        .sum()
}

/// Correlation coefficient of the singlet at relative analyzer angle `phi`:
/// -cos(2 phi).
pub fn qm_correlation(phi: f64) -> f64 {
    -(2.0 * phi).cos()
}

/// The same correlation computed the long way round, through the rotated
/// state vector and the measurement eigenvalues. Kept as an independent
/// route so tests can cross-check the closed form.
pub fn state_vector_correlation(phi: f64) -> Result<f64> {
    rotate_arm(&singlet(), phi).map(|s| product_expectation(&s))
}

/// Probability that both photons exit in their x channels: sin^2(phi) / 2.
pub fn qm_joint_probability(phi: f64) -> f64 {
    let s = phi.sin();
    0.5 * s * s
}

/// Scalar sum of the rotated basis-vector components, cos(phi) + sin(phi).
/// Peaks at sqrt(2); the `bounds` module uses it as the witness that
/// quantum-transforming amplitudes leave the unit-capped class.
pub fn component_sum(phi: f64) -> f64 {
    phi.cos() + phi.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

    const TOL: f64 = 1e-12;

    #[test]
    fn singlet_amplitudes() {
        let s = singlet();
        assert_eq!(s.c_xx, 0.0);
        assert_eq!(s.c_xy, FRAC_1_SQRT_2);
        assert_eq!(s.c_yx, -FRAC_1_SQRT_2);
        assert_eq!(s.c_yy, 0.0);
        assert!((s.norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn identity_rotation_leaves_singlet_unchanged() {
        let s = singlet();
        let r = rotate_arm(&s, 0.0).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn quarter_turn_moves_weight_to_same_polarization_terms() {
        let r = rotate_arm(&singlet(), PI / 2.0).unwrap();
        assert!((r.c_xx - FRAC_1_SQRT_2).abs() < TOL);
        assert!(r.c_xy.abs() < TOL);
        assert!(r.c_yx.abs() < TOL);
        assert!((r.c_yy - FRAC_1_SQRT_2).abs() < TOL);
    }

    #[test]
    fn rotation_inverse_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let phi = rng.random::<f64>() * 2.0 * PI - PI;
            let s = singlet();
            let back = rotate_arm(&rotate_arm(&s, phi).unwrap(), -phi).unwrap();
            assert!((back.c_xx - s.c_xx).abs() < TOL);
            assert!((back.c_xy - s.c_xy).abs() < TOL);
            assert!((back.c_yx - s.c_yx).abs() < TOL);
            assert!((back.c_yy - s.c_yy).abs() < TOL);
        }
    }

    #[test]
    fn rotation_rejects_non_finite_angles() {
        assert!(rotate_arm(&singlet(), f64::NAN).is_err());
        assert!(rotate_arm(&singlet(), f64::INFINITY).is_err());
        assert!(Rotation2::new(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn rotation_is_orthogonal_and_composes_additively() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = rng.random::<f64>() * 4.0 * PI - 2.0 * PI;
            let b = rng.random::<f64>() * 4.0 * PI - 2.0 * PI;
            let ra = Rotation2::new(a).unwrap();
            let rb = Rotation2::new(b).unwrap();

            let id = ra.transpose().compose(&ra).entries();
            assert!((id[0][0] - 1.0).abs() < TOL);
            assert!(id[0][1].abs() < TOL);
            assert!(id[1][0].abs() < TOL);
            assert!((id[1][1] - 1.0).abs() < TOL);

            let lhs = ra.compose(&rb).entries();
            let rhs = Rotation2::new(a + b).unwrap().entries();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((lhs[i][j] - rhs[i][j]).abs() < TOL);
                }
            }
        }
    }

    #[test]
    fn measurement_channels_have_unit_eigenvalues() {
        assert_eq!(MeasurementChannel::Plus.eigenvalue(), 1.0);
        assert_eq!(MeasurementChannel::Minus.eigenvalue(), -1.0);
    }

    #[test]
    fn correlation_closed_form_values() {
        assert!((qm_correlation(0.0) + 1.0).abs() < TOL);
        assert!(qm_correlation(PI / 4.0).abs() < TOL);
        assert!((qm_correlation(PI / 8.0) + FRAC_1_SQRT_2).abs() < TOL);
    }

    #[test]
    fn correlation_matches_state_vector_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let phi = rng.random::<f64>() * 4.0 * PI - 2.0 * PI;
            let direct = qm_correlation(phi);
            let via_state = state_vector_correlation(phi).unwrap();
            assert!(
                (direct - via_state).abs() < TOL,
                "phi={phi}: {direct} vs {via_state}"
            );
        }
    }

    #[test]
    fn correlation_is_even_and_pi_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let phi = rng.random::<f64>() * 2.0 * PI - PI;
            assert!((qm_correlation(phi) - qm_correlation(-phi)).abs() < TOL);
            assert!((qm_correlation(phi) - qm_correlation(phi + PI)).abs() < TOL);
        }
    }

    #[test]
    fn joint_probability_values_and_range() {
        assert_eq!(qm_joint_probability(0.0), 0.0);
        assert!((qm_joint_probability(PI / 2.0) - 0.5).abs() < TOL);
        assert!((qm_joint_probability(PI / 4.0) - 0.25).abs() < TOL);

        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let p = qm_joint_probability(rng.random::<f64>() * 10.0 - 5.0);
            assert!((0.0..=0.5).contains(&p));
        }
    }

    #[test]
    fn joint_probability_is_squared_third_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let phi = rng.random::<f64>() * PI;
            let rotated = rotate_arm(&singlet(), phi).unwrap();
            assert!((qm_joint_probability(phi) - rotated.c_xx * rotated.c_xx).abs() < TOL);
        }
    }

    #[test]
    fn component_sum_values_and_grid_maximum() {
        assert_eq!(component_sum(0.0), 1.0);
        assert!((component_sum(PI / 4.0) - SQRT_2).abs() < TOL);

        // Grid-search oracle for the maximum over a full period.
        let n = 1_000_000;
        let max = (0..n)
            .map(|k| component_sum(k as f64 * 2.0 * PI / n as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((max - SQRT_2).abs() < 1e-9);
    }
}
