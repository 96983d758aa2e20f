use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use super::TrackError;
use crate::synthgen::Vec2;

/// Constant-velocity filter over `[px, py, vx, vy]` observing position only.
///
/// `q` scales the integrated white-noise-acceleration covariance over one
/// frame, `r` the isotropic measurement covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub q: f64,
    pub r: f64,
}

fn transition() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0,
    )
}

/// `q · [[1/3, 1/2], [1/2, 1]] ⊗ I2`, positive definite for `q > 0`.
fn process_noise(q: f64) -> Matrix4<f64> {
    let (a, b) = (1.0 / 3.0, 0.5);
    Matrix4::new(
        a, 0.0, b, 0.0, //
        0.0, a, 0.0, b, //
        b, 0.0, 1.0, 0.0, //
        0.0, b, 0.0, 1.0,
    ) * q
}

impl KalmanState {
    /// Seeds the filter from a position and a velocity estimate (e.g. the
    /// difference of two consecutive detections).
    pub fn new(position: Vec2, velocity: Vec2, q: f64, r: f64) -> Result<Self, TrackError> {
        if !(q > 0.0 && r > 0.0) {
            return Err(TrackError::InvalidParams(format!("q and r must be positive, got q={q}, r={r}")));
        }
        let pv = 2.0 * r + q;
        Ok(Self {
            mean: Vector4::new(position.x, position.y, velocity.x, velocity.y),
            covariance: Matrix4::from_diagonal(&Vector4::new(r, r, pv, pv)),
            q,
            r,
        })
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.mean[0], self.mean[1])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.mean[2], self.mean[3])
    }

    pub fn predict(&self) -> Self {
        let f = transition();
        let covariance = f * self.covariance * f.transpose() + process_noise(self.q);
        Self { mean: f * self.mean, covariance: symmetrize(covariance), ..*self }
    }

    /// Joseph-form update with a position measurement.
    pub fn update(&self, z: Vec2) -> Result<Self, TrackError> {
        let h = observation();
        let r = Matrix2::identity() * self.r;
        let innovation = Vector2::new(z.x, z.y) - h * self.mean;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(TrackError::NumericalFailure("singular innovation covariance"))?;
        let k = self.covariance * h.transpose() * s_inv;
        let i_kh = Matrix4::identity() - k * h;
        let covariance = symmetrize(i_kh * self.covariance * i_kh.transpose() + k * r * k.transpose());
        if covariance.cholesky().is_none() {
            return Err(TrackError::NumericalFailure("covariance lost positive definiteness"));
        }
        Ok(Self { mean: self.mean + k * innovation, covariance, ..*self })
    }
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_moves_by_velocity() {
        let s = KalmanState::new(Vec2::ZERO, Vec2::new(2.0, 0.0), 1.0, 1.0).unwrap();
        assert_eq!(s.predict().position(), Vec2::new(2.0, 0.0));
    }

    #[test]
    fn converges_on_noiseless_constant_velocity_data() {
        let (p0, v) = (Vec2::new(5.0, 40.0), Vec2::new(3.5, -1.25));
        // deliberately wrong seed
        let mut s = KalmanState::new(p0, Vec2::ZERO, 1.0, 1.0).unwrap();
        for k in 1..=60 {
            s = s.predict().update(p0 + v * f64::from(k)).unwrap();
        }
        assert!((s.velocity() - v).norm() < 1e-6, "{:?}", s.velocity());
    }

    #[test]
    fn gap_continues_linearly_with_growing_uncertainty() {
        let v = Vec2::new(4.0, 2.0);
        let mut s = KalmanState::new(Vec2::ZERO, v, 1.0, 1.0).unwrap();
        for k in 1..=5 {
            s = s.predict().update(v * f64::from(k)).unwrap();
        }
        let mut trace = s.covariance.trace();
        for k in 6..=8 {
            s = s.predict();
            assert!((s.position() - v * f64::from(k)).norm() < 1.0);
            assert!(s.covariance.trace() > trace);
            trace = s.covariance.trace();
        }
    }

    #[test]
    fn tiny_measurement_noise_pins_position() {
        let s = KalmanState::new(Vec2::new(1.0, 1.0), Vec2::ZERO, 1.0, 1e-12).unwrap();
        let u = s.predict().update(Vec2::new(7.0, -3.0)).unwrap();
        assert!((u.position() - Vec2::new(7.0, -3.0)).norm() < 1e-9);
        assert!(u.covariance.cholesky().is_some());
    }

    #[test]
    fn rejects_nonpositive_noise() {
        assert!(KalmanState::new(Vec2::ZERO, Vec2::ZERO, 0.0, 1.0).is_err());
    }
}
