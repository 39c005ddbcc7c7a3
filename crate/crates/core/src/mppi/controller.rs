use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkers::{goal_checker, ProgressChecker, SpinRecovery};
use super::critics::{trajectory_cost, CriticContext, DynamicObstacle, PathField, PathTracker};
use super::{
    rollout_into, sample_rollouts_into, smooth_sequence, update_sequence, ControlSequence, MppiError, MppiParams, SampleBatch,
    SMOOTHING_HISTORY,
};
use crate::planning::Costmap;
use crate::{BodyTwist, Point2D, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlStatus {
    Tracking,
    GoalReached,
    /// A spin recovery is running.
    Recovering,
    /// A recovery just finished; the caller should plan again.
    ReplanRequested,
    NoPath,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    pub command: BodyTwist,
    pub status: ControlStatus,
}

#[derive(Debug, Clone)]
struct ActivePath {
    tracker: PathTracker,
    field: PathField,
    goal: Pose2D,
}

/// One robot's controller: MPPI tracking plus goal, progress and recovery handling.
#[derive(Debug, Clone)]
pub struct Controller {
    params: MppiParams,
    rng: ChaCha8Rng,
    sequence: ControlSequence,
    batch: SampleBatch,
    trajectory: Vec<Pose2D>,
    costs: Vec<f64>,
    path: Option<ActivePath>,
    sent: [BodyTwist; SMOOTHING_HISTORY],
    progress: ProgressChecker,
    recovery: Option<SpinRecovery>,
    recoveries: usize,
    replans_requested: usize,
}

impl Controller {
    pub fn new(params: MppiParams) -> Result<Self, MppiError> {
        params.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            sequence: ControlSequence::zeros(params.time_steps),
            batch: SampleBatch::default(),
            trajectory: Vec::with_capacity(params.time_steps),
            costs: Vec::with_capacity(params.batch_size),
            path: None,
            sent: [BodyTwist::zero(); SMOOTHING_HISTORY],
            progress: ProgressChecker::new(params.progress_min_distance, params.progress_window),
            recovery: None,
            recoveries: 0,
            replans_requested: 0,
            params,
        })
    }

    pub fn params(&self) -> &MppiParams {
        &self.params
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.params.frequency
    }

    pub fn recoveries(&self) -> usize {
        self.recoveries
    }

    pub fn replans_requested(&self) -> usize {
        self.replans_requested
    }

    pub fn sequence(&self) -> &ControlSequence {
        &self.sequence
    }

    pub fn has_path(&self) -> bool {
        self.path.is_some()
    }

    /// Installs a new global plan ending at `goal`.
    pub fn set_plan(&mut self, points: &[Point2D], goal: Pose2D, costmap: &Costmap) {
        if points.is_empty() {
            self.path = None;
            return;
        }
        self.path = Some(ActivePath {
            tracker: PathTracker::new(points, costmap.resolution()),
            field: PathField::build(costmap, points),
            goal,
        });
        self.progress.reset();
    }

    pub fn clear_plan(&mut self) {
        self.path = None;
        self.recovery = None;
        self.progress.reset();
        self.sequence = ControlSequence::zeros(self.params.time_steps);
    }

    /// One control tick at time `t`.
    pub fn compute_command(
        &mut self,
        estimate: &Pose2D,
        costmap: &Costmap,
        obstacles: &[DynamicObstacle],
        t: f64,
    ) -> ControllerOutput {
        let dt = self.control_period();
        if let Some(rec) = self.recovery.as_mut() {
            let command = rec.step(dt);
            if rec.is_done() {
                self.recovery = None;
                self.replans_requested += 1;
                self.progress.reset();
                return self.emit(command, ControlStatus::ReplanRequested);
            }
            return self.emit(command, ControlStatus::Recovering);
        }
        let Some(active) = self.path.as_mut() else {
            return self.emit(BodyTwist::zero(), ControlStatus::NoPath);
        };
        if goal_checker(estimate, &active.goal, &self.params.goal_tolerance) {
            self.sequence = ControlSequence::zeros(self.params.time_steps);
            return self.emit(BodyTwist::zero(), ControlStatus::GoalReached);
        }
        if self.progress.check(&estimate.position(), t) {
            // alternate the turning direction between consecutive recoveries
            let sign = if self.recoveries % 2 == 0 { 1.0 } else { -1.0 };
            let mut rec = SpinRecovery::new(sign * std::f64::consts::FRAC_PI_2, self.params.wz_max, self.params.wz_max);
            self.recoveries += 1;
            self.sequence = ControlSequence::zeros(self.params.time_steps);
            let command = rec.step(dt);
            self.recovery = Some(rec);
            return self.emit(command, ControlStatus::Recovering);
        }
        active.tracker.update(&estimate.position(), self.params.lookahead + 1.0);
        let ctx = CriticContext {
            costmap,
            path_field: &active.field,
            target: active.tracker.lookahead(self.params.lookahead),
            goal: active.goal,
            obstacles,
            weights: self.params.critics,
            footprint_radius: self.params.footprint_radius,
            safety_margin: self.params.safety_margin,
            dt: self.params.model_dt,
            // goals close to machines sit inside the inflation band
            inflation_scale: if estimate.position().distance(&active.goal.position()) < self.params.near_goal_distance { 0.0 } else { 1.0 },
        };
        sample_rollouts_into(&mut self.batch, &self.sequence, &self.params, &mut self.rng);
        self.costs.clear();
        for i in 0..self.batch.len() {
            rollout_into(estimate, self.batch.sample(i), self.params.model_dt, &mut self.trajectory);
            self.costs.push(trajectory_cost(&ctx, &self.trajectory));
        }
        self.sequence = update_sequence(&self.batch, &self.costs, &self.params);
        if self.params.smoothing {
            smooth_sequence(&mut self.sequence, &self.sent);
        }
        let command = self.params.clamp(&self.sequence.controls[0]);
        self.sequence.shift();
        self.emit(command, ControlStatus::Tracking)
    }

    fn emit(&mut self, command: BodyTwist, status: ControlStatus) -> ControllerOutput {
        self.sent.rotate_left(1);
        self.sent[SMOOTHING_HISTORY - 1] = command;
        ControllerOutput { command, status }
    }
}
