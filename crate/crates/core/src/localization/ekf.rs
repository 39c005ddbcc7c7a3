use super::LocalizationError;
use crate::geometry::{angle_diff, Mat3, Pose2, Twist};
use crate::odometry::integrate_odometry;
use crate::Scalar;

/// Pose estimate with covariance over `(x, y, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState<T> {
    pub mean: Pose2<T>,
    pub covariance: Mat3<T>,
}

impl<T: Scalar> EkfState<T> {
    pub fn new(mean: Pose2<T>, covariance: Mat3<T>) -> Self {
        Self { mean, covariance }
    }
}

/// Jacobian of the odometry Euler step with respect to the previous pose.
pub fn motion_jacobian<T: Scalar>(theta: T, twist: &Twist<T>, dt: T) -> Mat3<T> {
    let (s, c) = theta.sin_cos();
    let (o, l) = (T::zero(), T::one());
    Mat3([
        [l, o, (-s * twist.vx - c * twist.vy) * dt],
        [o, l, (c * twist.vx - s * twist.vy) * dt],
        [o, o, l],
    ])
}

/// Propagates the mean through the odometry step and the covariance as `F P Fᵀ + Q`.
pub fn ekf_predict<T: Scalar>(
    state: &EkfState<T>,
    twist: &Twist<T>,
    dt: T,
    process_noise: &Mat3<T>,
) -> Result<EkfState<T>, LocalizationError> {
    let mean = integrate_odometry(&state.mean, twist, dt)
        .map_err(|_| LocalizationError::NonPositiveDt(dt.to_f64().unwrap_or(f64::NAN)))?;
    let f = motion_jacobian(state.mean.theta, twist, dt);
    let cov = f
        .mul_mat(&state.covariance)
        .mul_mat(&f.transpose())
        .add_mat(process_noise)
        .symmetrized();
    Ok(EkfState { mean, covariance: cov })
}

/// Scalar heading update with wrapped innovation and Joseph-form covariance.
pub fn ekf_update_yaw<T: Scalar>(
    state: &EkfState<T>,
    yaw: T,
    yaw_variance: T,
) -> Result<EkfState<T>, LocalizationError> {
    if !(yaw_variance > T::zero()) {
        return Err(LocalizationError::NonPositiveNoise(yaw_variance.to_f64().unwrap_or(f64::NAN)));
    }
    let p = &state.covariance;
    let innovation = angle_diff(yaw, state.mean.theta);
    let s = p.get(2, 2) + yaw_variance;
    let gain = [p.get(0, 2) / s, p.get(1, 2) / s, p.get(2, 2) / s];
    let mean = Pose2::new(
        state.mean.x + gain[0] * innovation,
        state.mean.y + gain[1] * innovation,
        state.mean.theta + gain[2] * innovation,
    );
    // (I - K H) P (I - K H)ᵀ + K R Kᵀ with H = [0 0 1]
    let mut a = Mat3::<T>::identity();
    for (r, g) in gain.iter().enumerate() {
        a.0[r][2] = a.0[r][2] - *g;
    }
    let mut krk = Mat3::<T>::zeros();
    for r in 0..3 {
        for c in 0..3 {
            krk.0[r][c] = gain[r] * gain[c] * yaw_variance;
        }
    }
    let covariance = a.mul_mat(p).mul_mat(&a.transpose()).add_mat(&krk).symmetrized();
    Ok(EkfState { mean, covariance })
}
