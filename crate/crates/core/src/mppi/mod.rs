//! Sampling-based path-integral controller for the holonomic base.
//!
//! Each tick perturbs the nominal control sequence with Gaussian noise, rolls every
//! sample forward with the odometry model, scores the rollouts with a set of critics and
//! replaces the nominal sequence with the softmax-weighted average of the samples.

mod checkers;
mod controller;
mod critics;

pub use checkers::{goal_checker, GoalTolerance, ProgressChecker, SpinRecovery};
pub use controller::{ControlStatus, Controller, ControllerOutput};
pub use critics::{evaluate_costs, trajectory_cost, CriticContext, CriticWeights, DynamicObstacle, PathField, PathTracker};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{BodyTwist, Pose2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MppiError {
    #[error("invalid controller parameters: {0}")]
    InvalidParams(String),
    #[error("no active path")]
    NoPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionModel {
    Omni,
}

/// Controller parameters. The sampling and bound keys follow the usual MPPI names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MppiParams {
    pub time_steps: usize,
    pub model_dt: f64,
    pub frequency: f64,
    pub motion_model: MotionModel,
    pub batch_size: usize,
    pub vx_min: f64,
    pub vx_max: f64,
    pub vy_max: f64,
    pub wz_max: f64,
    pub vx_std: f64,
    pub vy_std: f64,
    pub wz_std: f64,
    /// Softmax temperature.
    pub temperature: f64,
    /// Savitzky-Golay smoothing of the updated sequence against recently sent commands.
    pub smoothing: bool,
    pub critics: CriticWeights,
    /// Distance along the path from the robot's projection to the tracked goal point (m).
    pub lookahead: f64,
    /// Desired free gap to other robots (m).
    pub safety_margin: f64,
    pub footprint_radius: f64,
    pub goal_tolerance: GoalTolerance,
    /// Within this distance of the goal only lethal cells count as obstacle cost (m).
    pub near_goal_distance: f64,
    /// Displacement (m) that counts as progress.
    pub progress_min_distance: f64,
    /// Window (s) in which that displacement must happen.
    pub progress_window: f64,
    /// Seed of the sampling noise stream.
    pub seed: u64,
}

impl Default for MppiParams {
    fn default() -> Self {
        Self {
            time_steps: 80,
            model_dt: 0.05,
            frequency: 20.0,
            motion_model: MotionModel::Omni,
            batch_size: 2000,
            vx_min: -0.7,
            vx_max: 0.7,
            vy_max: 0.7,
            wz_max: 0.8,
            vx_std: 0.4,
            vy_std: 0.4,
            wz_std: 0.4,
            temperature: 0.35,
            smoothing: true,
            critics: CriticWeights::default(),
            lookahead: 2.0,
            safety_margin: 0.3,
            footprint_radius: 0.23,
            goal_tolerance: GoalTolerance::default(),
            near_goal_distance: 0.5,
            progress_min_distance: 0.05,
            progress_window: 10.0,
            seed: 0,
        }
    }
}

impl MppiParams {
    pub fn validate(&self) -> Result<(), MppiError> {
        let checks = [
            (self.time_steps >= 1, "time_steps must be at least 1"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.model_dt > 0.0, "model_dt must be positive"),
            (self.frequency > 0.0, "frequency must be positive"),
            (self.vx_min < self.vx_max, "vx_min must be below vx_max"),
            (self.vy_max > 0.0 && self.wz_max > 0.0, "vy_max and wz_max must be positive"),
            (self.vx_std > 0.0 && self.vy_std > 0.0 && self.wz_std > 0.0, "all std must be positive"),
            (self.temperature > 0.0, "temperature must be positive"),
            (self.lookahead > 0.0, "lookahead must be positive"),
            (self.near_goal_distance >= 0.0, "near_goal_distance must not be negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(MppiError::InvalidParams((*msg).into())),
            None => Ok(()),
        }
    }

    /// Prediction horizon in seconds.
    pub fn horizon(&self) -> f64 {
        self.time_steps as f64 * self.model_dt
    }

    pub fn clamp(&self, u: &BodyTwist) -> BodyTwist {
        BodyTwist::new(
            u.vx.clamp(self.vx_min, self.vx_max),
            u.vy.clamp(-self.vy_max, self.vy_max),
            u.omega.clamp(-self.wz_max, self.wz_max),
        )
    }

    pub fn within_bounds(&self, u: &BodyTwist) -> bool {
        u.vx >= self.vx_min && u.vx <= self.vx_max && u.vy.abs() <= self.vy_max && u.omega.abs() <= self.wz_max
    }
}

/// Nominal commands over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    pub controls: Vec<BodyTwist>,
}

impl ControlSequence {
    pub fn zeros(time_steps: usize) -> Self {
        Self {
            controls: vec![BodyTwist::zero(); time_steps],
        }
    }

    pub fn constant(u: BodyTwist, time_steps: usize) -> Self {
        Self {
            controls: vec![u; time_steps],
        }
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Receding-horizon shift: drop the executed command and repeat the last one.
    pub fn shift(&mut self) {
        if self.controls.len() > 1 {
            self.controls.rotate_left(1);
            let n = self.controls.len();
            self.controls[n - 1] = self.controls[n - 2];
        }
    }
}

/// Quadratic Savitzky-Golay filter over nine taps.
const SMOOTHING_TAPS: [f64; 9] = [-21.0, 14.0, 39.0, 54.0, 59.0, 54.0, 39.0, 14.0, -21.0];
const SMOOTHING_NORM: f64 = 231.0;
/// Commands already sent that precede the sequence in the filter window.
pub const SMOOTHING_HISTORY: usize = 4;

/// Smooths `seq` in place. `history` holds the last sent commands, oldest first; the tail
/// is padded with the final control.
pub fn smooth_sequence(seq: &mut ControlSequence, history: &[BodyTwist; SMOOTHING_HISTORY]) {
    let n = seq.len();
    if n == 0 {
        return;
    }
    let half = SMOOTHING_TAPS.len() / 2;
    let mut padded: Vec<BodyTwist> = Vec::with_capacity(n + 2 * half);
    padded.extend_from_slice(history);
    padded.extend_from_slice(&seq.controls);
    padded.extend(std::iter::repeat_n(seq.controls[n - 1], half));
    for (k, out) in seq.controls.iter_mut().enumerate() {
        let mut a = [0.0; 3];
        for (tap, u) in SMOOTHING_TAPS.iter().zip(&padded[k..k + SMOOTHING_TAPS.len()]) {
            a[0] += tap * u.vx;
            a[1] += tap * u.vy;
            a[2] += tap * u.omega;
        }
        *out = BodyTwist::new(a[0] / SMOOTHING_NORM, a[1] / SMOOTHING_NORM, a[2] / SMOOTHING_NORM);
    }
}

/// `batch_size` perturbed control sequences stored back to back.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleBatch {
    pub time_steps: usize,
    pub controls: Vec<BodyTwist>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        if self.time_steps == 0 {
            0
        } else {
            self.controls.len() / self.time_steps
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample(&self, i: usize) -> &[BodyTwist] {
        &self.controls[i * self.time_steps..(i + 1) * self.time_steps]
    }
}

/// Fills `batch` with the nominal sequence plus per-step Gaussian noise, clamped to the bounds.
pub fn sample_rollouts_into<R: Rng + ?Sized>(
    batch: &mut SampleBatch,
    seq: &ControlSequence,
    params: &MppiParams,
    rng: &mut R,
) {
    let t = seq.len();
    batch.time_steps = t;
    batch.controls.clear();
    batch.controls.reserve(t * params.batch_size);
    for _ in 0..params.batch_size {
        for u in &seq.controls {
            let nx: f64 = StandardNormal.sample(rng);
            let ny: f64 = StandardNormal.sample(rng);
            let nw: f64 = StandardNormal.sample(rng);
            let v = BodyTwist::new(u.vx + params.vx_std * nx, u.vy + params.vy_std * ny, u.omega + params.wz_std * nw);
            batch.controls.push(params.clamp(&v));
        }
    }
}

pub fn sample_rollouts<R: Rng + ?Sized>(seq: &ControlSequence, params: &MppiParams, rng: &mut R) -> SampleBatch {
    let mut batch = SampleBatch::default();
    sample_rollouts_into(&mut batch, seq, params, rng);
    batch
}

/// Integrates one control sequence with the odometry Euler step; `out` receives the
/// poses after each step (the start pose is not included).
pub fn rollout_into(start: &Pose2D, controls: &[BodyTwist], dt: f64, out: &mut Vec<Pose2D>) {
    out.clear();
    let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
    let (mut s, mut c) = th.sin_cos();
    for u in controls {
        x += (c * u.vx - s * u.vy) * dt;
        y += (s * u.vx + c * u.vy) * dt;
        let a = u.omega * dt;
        th += a;
        // rotate the heading vector instead of re-evaluating sin and cos every step
        let (sa, ca) = small_angle_sin_cos(a);
        (s, c) = (s * ca + c * sa, c * ca - s * sa);
        out.push(Pose2D { x, y, theta: th });
    }
}

#[inline]
fn small_angle_sin_cos(a: f64) -> (f64, f64) {
    if a.abs() > 0.2 {
        return a.sin_cos();
    }
    let a2 = a * a;
    let sin = a * (1.0 - a2 / 6.0 * (1.0 - a2 / 20.0 * (1.0 - a2 / 42.0)));
    let cos = 1.0 - a2 / 2.0 * (1.0 - a2 / 12.0 * (1.0 - a2 / 30.0 * (1.0 - a2 / 56.0)));
    (sin, cos)
}

pub fn rollout_trajectories(batch: &SampleBatch, start: &Pose2D, params: &MppiParams) -> Vec<Vec<Pose2D>> {
    (0..batch.len())
        .map(|i| {
            let mut out = Vec::with_capacity(batch.time_steps);
            rollout_into(start, batch.sample(i), params.model_dt, &mut out);
            out
        })
        .collect()
}

/// `exp(-(c - min)/λ)` normalized; non-finite costs get zero weight.
pub fn softmax_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    let min = costs.iter().cloned().filter(|c| c.is_finite()).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return vec![1.0 / costs.len().max(1) as f64; costs.len()];
    }
    let mut w: Vec<f64> = costs
        .iter()
        .map(|&c| if c.is_finite() { (-(c - min) / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Softmax-weighted average of the samples, clamped to the bounds.
pub fn update_sequence(batch: &SampleBatch, costs: &[f64], params: &MppiParams) -> ControlSequence {
    let w = softmax_weights(costs, params.temperature);
    let mut acc = vec![[0.0f64; 3]; batch.time_steps];
    for (i, wi) in w.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        for (a, u) in acc.iter_mut().zip(batch.sample(i)) {
            a[0] += wi * u.vx;
            a[1] += wi * u.vy;
            a[2] += wi * u.omega;
        }
    }
    ControlSequence {
        controls: acc.iter().map(|a| params.clamp(&BodyTwist::from_array(*a))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> MppiParams {
        MppiParams {
            batch_size: 400,
            ..MppiParams::default()
        }
    }

    #[test]
    fn defaults_and_horizon() {
        let p = MppiParams::default();
        assert_eq!((p.time_steps, p.batch_size), (80, 2000));
        assert_eq!(p.horizon(), 4.0);
        assert_eq!((p.vx_min, p.vx_max, p.vy_max, p.wz_max), (-0.7, 0.7, 0.7, 0.8));
        assert_eq!((p.vx_std, p.vy_std, p.wz_std), (0.4, 0.4, 0.4));
        assert!(p.validate().is_ok());
    }

    #[test]
    fn table_keys_parse_verbatim() {
        let json = r#"{"time_steps": 80, "model_dt": 0.05, "frequency": 20, "motion_model": "Omni",
            "batch_size": 2000, "vx_min": -0.7, "vx_max": 0.7, "wz_max": 0.8, "vy_max": 0.7,
            "vx_std": 0.4, "vy_std": 0.4, "wz_std": 0.4}"#;
        let p: MppiParams = serde_json::from_str(json).unwrap();
        assert_eq!(p, MppiParams::default());
        assert!(serde_json::from_str::<MppiParams>(r#"{"batch": 3}"#).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            MppiParams { time_steps: 0, ..MppiParams::default() },
            MppiParams { batch_size: 0, ..MppiParams::default() },
            MppiParams { vx_min: 0.7, ..MppiParams::default() },
            MppiParams { wz_std: 0.0, ..MppiParams::default() },
            MppiParams { temperature: 0.0, ..MppiParams::default() },
        ] {
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn tiny_std_reproduces_nominal() {
        let p = MppiParams { vx_std: 1e-9, vy_std: 1e-9, wz_std: 1e-9, ..small() };
        let seq = ControlSequence::constant(BodyTwist::new(0.3, -0.2, 0.1), p.time_steps);
        let b = sample_rollouts(&seq, &p, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(b.len(), p.batch_size);
        for u in &b.controls {
            assert!((u.vx - 0.3).abs() < 1e-6 && (u.vy + 0.2).abs() < 1e-6 && (u.omega - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn samples_respect_bounds() {
        let p = small();
        let seq = ControlSequence::constant(BodyTwist::new(0.7, 0.7, -0.8), p.time_steps);
        let b = sample_rollouts(&seq, &p, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(b.controls.iter().all(|u| p.within_bounds(u)));
        assert!(b.controls.iter().any(|u| u.vx < 0.7));
    }

    #[test]
    fn sample_mean_tracks_nominal() {
        let p = MppiParams::default();
        let seq = ControlSequence::constant(BodyTwist::new(0.1, -0.1, 0.05), p.time_steps);
        let b = sample_rollouts(&seq, &p, &mut ChaCha8Rng::seed_from_u64(3));
        let n = p.batch_size as f64;
        for t in [0, 40, 79] {
            let mut m = [0.0; 3];
            for i in 0..p.batch_size {
                let u = b.sample(i)[t];
                m[0] += u.vx / n;
                m[1] += u.vy / n;
                m[2] += u.omega / n;
            }
            let bound = 3.0 * 0.4 / n.sqrt();
            assert!((m[0] - 0.1).abs() < bound && (m[1] + 0.1).abs() < bound && (m[2] - 0.05).abs() < bound, "{m:?}");
        }
    }

    #[test]
    fn zero_commands_stay_put() {
        let start = Pose2D::new(1.0, 2.0, 0.5);
        let mut out = Vec::new();
        rollout_into(&start, &[BodyTwist::zero(); 80], 0.05, &mut out);
        assert!(out.iter().all(|p| *p == start));
    }

    #[test]
    fn full_speed_forward_covers_horizon() {
        let p = MppiParams::default();
        let batch = SampleBatch { time_steps: 80, controls: vec![BodyTwist::new(0.7, 0.0, 0.0); 80] };
        let traj = rollout_trajectories(&batch, &Pose2D::new(1.0, 0.0, 0.0), &p);
        assert!((traj[0][79].x - (1.0 + 0.7 * 80.0 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn softmax_limits() {
        let w = softmax_weights(&[0.0, f64::INFINITY, f64::INFINITY], 0.35);
        assert_eq!(w, vec![1.0, 0.0, 0.0]);
        let w = softmax_weights(&[2.0, 2.0, 2.0, 2.0], 0.35);
        assert!(w.iter().all(|v| (*v - 0.25).abs() < 1e-15));
        let w = softmax_weights(&[0.0, 1e6, 3.0, f64::NAN], 0.35);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(w.iter().all(|v| v.is_finite()));
        let flat = softmax_weights(&[0.0, 5.0, 10.0], 1e12);
        assert!(flat.iter().all(|v| (*v - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn update_picks_the_only_finite_sample() {
        let p = MppiParams { batch_size: 3, time_steps: 2, ..MppiParams::default() };
        let batch = SampleBatch {
            time_steps: 2,
            controls: vec![
                BodyTwist::new(0.1, 0.0, 0.0),
                BodyTwist::new(0.2, 0.0, 0.0),
                BodyTwist::new(-0.5, 0.3, 0.1),
                BodyTwist::new(-0.4, 0.2, 0.0),
                BodyTwist::new(0.6, 0.6, 0.6),
                BodyTwist::new(0.6, 0.6, 0.6),
            ],
        };
        let seq = update_sequence(&batch, &[f64::INFINITY, 0.0, f64::INFINITY], &p);
        assert_eq!(seq.controls, batch.sample(1).to_vec());
    }

    #[test]
    fn equal_costs_average_the_batch() {
        let p = MppiParams::default();
        let seq = ControlSequence::constant(BodyTwist::new(0.2, 0.1, -0.1), p.time_steps);
        let b = sample_rollouts(&seq, &p, &mut ChaCha8Rng::seed_from_u64(4));
        let out = update_sequence(&b, &vec![1.0; p.batch_size], &p);
        let bound = 3.0 * 0.4 / (p.batch_size as f64).sqrt();
        for u in [out.controls[0], out.controls[40], out.controls[79]] {
            assert!((u.vx - 0.2).abs() < bound && (u.vy - 0.1).abs() < bound && (u.omega + 0.1).abs() < bound);
        }
    }

    #[test]
    fn smoothing_keeps_constants_and_ramps() {
        let u = BodyTwist::new(0.3, -0.1, 0.2);
        let mut seq = ControlSequence::constant(u, 20);
        smooth_sequence(&mut seq, &[u; SMOOTHING_HISTORY]);
        assert!(seq.controls.iter().all(|v| (v.vx - 0.3).abs() < 1e-12 && (v.vy + 0.1).abs() < 1e-12 && (v.omega - 0.2).abs() < 1e-12));
        // a ramp whose history continues it is reproduced away from the padded tail
        let ramp = |k: i32| BodyTwist::new(0.01 * k as f64, 0.0, -0.02 * k as f64);
        let mut seq = ControlSequence { controls: (0..20).map(ramp).collect() };
        let history = [ramp(-4), ramp(-3), ramp(-2), ramp(-1)];
        smooth_sequence(&mut seq, &history);
        for k in 0..16 {
            let want = ramp(k as i32);
            assert!((seq.controls[k].vx - want.vx).abs() < 1e-12 && (seq.controls[k].omega - want.omega).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_damps_alternation() {
        let mut seq = ControlSequence { controls: (0..20).map(|k| BodyTwist::new(if k % 2 == 0 { 0.5 } else { 0.3 }, 0.0, 0.0)).collect() };
        smooth_sequence(&mut seq, &[BodyTwist::new(0.4, 0.0, 0.0); SMOOTHING_HISTORY]);
        // alternation is the Nyquist frequency; the filter's gain there is the alternating tap sum
        let gain: f64 = SMOOTHING_TAPS.iter().enumerate().map(|(i, t)| if i % 2 == 0 { *t } else { -*t }).sum::<f64>() / SMOOTHING_NORM;
        assert!((gain.abs() - 41.0 / 231.0).abs() < 1e-15);
        for k in 4..16 {
            let raw = if k % 2 == 0 { 0.1 } else { -0.1 };
            assert!((seq.controls[k].vx - 0.4 - gain * raw).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn rollout_matches_direct_euler(
            theta in -3.2f64..3.2,
            controls in proptest::collection::vec((-0.7f64..0.7, -0.7f64..0.7, -0.8f64..0.8), 80),
        ) {
            let controls: Vec<BodyTwist> = controls.into_iter().map(|(a, b, c)| BodyTwist::new(a, b, c)).collect();
            let start = Pose2D::new(1.0, 2.0, theta);
            let mut fast = Vec::new();
            rollout_into(&start, &controls, 0.05, &mut fast);
            let (mut x, mut y, mut th) = (start.x, start.y, start.theta);
            for (u, p) in controls.iter().zip(&fast) {
                x += (th.cos() * u.vx - th.sin() * u.vy) * 0.05;
                y += (th.sin() * u.vx + th.cos() * u.vy) * 0.05;
                th += u.omega * 0.05;
                proptest::prop_assert!((p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9 && (p.theta - th).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_repeats_last() {
        let mut s = ControlSequence {
            controls: vec![BodyTwist::new(1.0, 0.0, 0.0), BodyTwist::new(2.0, 0.0, 0.0), BodyTwist::new(3.0, 0.0, 0.0)],
        };
        s.shift();
        assert_eq!(s.controls.iter().map(|u| u.vx).collect::<Vec<_>>(), vec![2.0, 3.0, 3.0]);
    }
}
