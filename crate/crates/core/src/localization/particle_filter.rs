use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::likelihood::LikelihoodField;
use super::LocalizationError;
use crate::geometry::{angle_diff, normalize_angle};
use crate::world::MergedScan;
use crate::{Mat3, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

/// Motion noise for a holonomic base. Each body axis gets its own standard deviation,
/// `floor + alpha * |displacement along that axis|`, so sideways motion spreads the
/// cloud sideways without inflating the longitudinal spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionNoise {
    pub floor_xy: f64,
    pub floor_theta: f64,
    pub alpha_translation: f64,
    pub alpha_rotation: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            floor_xy: 0.005,
            floor_theta: 0.005,
            alpha_translation: 0.1,
            alpha_rotation: 0.1,
        }
    }
}

impl MotionNoise {
    pub fn zero() -> Self {
        Self {
            floor_xy: 0.0,
            floor_theta: 0.0,
            alpha_translation: 0.0,
            alpha_rotation: 0.0,
        }
    }

    pub fn sigmas(&self, delta: &Pose2D) -> [f64; 3] {
        [
            self.floor_xy + self.alpha_translation * delta.x.abs(),
            self.floor_xy + self.alpha_translation * delta.y.abs(),
            self.floor_theta + self.alpha_rotation * delta.theta.abs(),
        ]
    }
}

/// Moves every particle by `delta`, expressed in that particle's own frame, plus noise.
/// A non-finite delta leaves the set untouched.
pub fn pf_predict<R: Rng + ?Sized>(particles: &mut [Particle], delta: &Pose2D, noise: &MotionNoise, rng: &mut R) {
    if !delta.is_finite() {
        return;
    }
    let [sx, sy, st] = noise.sigmas(delta);
    for p in particles.iter_mut() {
        let mut gauss = |s: f64| {
            if s > 0.0 {
                let n: f64 = StandardNormal.sample(rng);
                s * n
            } else {
                0.0
            }
        };
        let (nx, ny, nt) = (gauss(sx), gauss(sy), gauss(st));
        let step = Pose2D::new(delta.x + nx, delta.y + ny, delta.theta + nt);
        p.pose = p.pose.compose(&step);
    }
}

/// Scores one pose against a scan; the sum of per-endpoint log densities.
pub fn scan_log_likelihood(pose: &Pose2D, scan: &MergedScan, field: &LikelihoodField) -> f64 {
    let stride = field.model.beam_stride.max(1);
    let (s, c) = pose.theta.sin_cos();
    scan.points
        .iter()
        .step_by(stride)
        .map(|sp| {
            let q = &sp.point;
            let wx = pose.x + c * q.x - s * q.y;
            let wy = pose.y + s * q.x + c * q.y;
            field.log_likelihood(field.distance(&crate::Point2D::new(wx, wy)), scan.max_range)
        })
        .sum()
}

/// Outcome of a measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Weighted,
    /// Every weight vanished and the set was reset to uniform weights.
    Degenerate,
}

/// Multiplies each weight by the scan likelihood (computed in the log domain) and renormalizes.
pub fn pf_update(particles: &mut [Particle], scan: &MergedScan, field: &LikelihoodField) -> UpdateOutcome {
    if particles.is_empty() {
        return UpdateOutcome::Weighted;
    }
    let logs: Vec<f64> = particles
        .iter()
        .map(|p| {
            if p.weight > 0.0 {
                p.weight.ln() + scan_log_likelihood(&p.pose, scan, field)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let best = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        reset_uniform(particles);
        return UpdateOutcome::Degenerate;
    }
    let mut total = 0.0;
    for (p, l) in particles.iter_mut().zip(&logs) {
        p.weight = if l.is_nan() { 0.0 } else { (l - best).exp() };
        total += p.weight;
    }
    if !(total > 0.0) || !total.is_finite() {
        reset_uniform(particles);
        return UpdateOutcome::Degenerate;
    }
    for p in particles.iter_mut() {
        p.weight /= total;
    }
    UpdateOutcome::Weighted
}

fn reset_uniform(particles: &mut [Particle]) {
    let w = 1.0 / particles.len() as f64;
    for p in particles.iter_mut() {
        p.weight = w;
    }
}

pub fn normalize_weights(particles: &mut [Particle]) {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if total > 0.0 && total.is_finite() {
        for p in particles.iter_mut() {
            p.weight /= total;
        }
    } else if !particles.is_empty() {
        reset_uniform(particles);
    }
}

pub fn effective_sample_size(particles: &[Particle]) -> f64 {
    let sq: f64 = particles.iter().map(|p| p.weight * p.weight).sum();
    if sq > 0.0 {
        1.0 / sq
    } else {
        0.0
    }
}

/// Indices chosen by a systematic resampler with first pointer `offset` in `[0, 1/n)`.
pub fn systematic_indices(weights: &[f64], offset: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let step = 1.0 / n as f64;
    let mut cum = weights[0];
    let mut j = 0;
    for k in 0..n {
        let u = offset + k as f64 * step;
        while u >= cum && j + 1 < n {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    out
}

/// Unconditional systematic resampling; output weights are uniform.
pub fn systematic_resample<R: Rng + ?Sized>(particles: &[Particle], rng: &mut R) -> Vec<Particle> {
    let n = particles.len();
    if n == 0 {
        return Vec::new();
    }
    let weights: Vec<f64> = particles.iter().map(|p| p.weight).collect();
    let offset = rng.random::<f64>() / n as f64;
    let w = 1.0 / n as f64;
    systematic_indices(&weights, offset)
        .into_iter()
        .map(|i| Particle {
            pose: particles[i].pose,
            weight: w,
        })
        .collect()
}

/// Resamples only when the effective sample size falls below half the set. Returns whether it did.
pub fn pf_resample<R: Rng + ?Sized>(particles: &mut Vec<Particle>, rng: &mut R) -> bool {
    if particles.is_empty() || effective_sample_size(particles) >= 0.5 * particles.len() as f64 {
        return false;
    }
    *particles = systematic_resample(particles, rng);
    true
}

/// Weighted mean pose (circular mean for heading) and weighted covariance with wrapped heading residuals.
pub fn pf_estimate(particles: &[Particle]) -> (Pose2D, Mat3) {
    let (mut x, mut y, mut s, mut c, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in particles {
        x += p.weight * p.pose.x;
        y += p.weight * p.pose.y;
        s += p.weight * p.pose.theta.sin();
        c += p.weight * p.pose.theta.cos();
        total += p.weight;
    }
    if !(total > 0.0) {
        return (Pose2D::identity(), Mat3::zeros());
    }
    let mean = Pose2D::new(x / total, y / total, s.atan2(c));
    let mut cov = [[0.0; 3]; 3];
    for p in particles {
        let d = [p.pose.x - mean.x, p.pose.y - mean.y, angle_diff(p.pose.theta, mean.theta)];
        for r in 0..3 {
            for k in 0..3 {
                cov[r][k] += p.weight * d[r] * d[k];
            }
        }
    }
    (mean, crate::geometry::Mat3(cov).scale(1.0 / total).symmetrized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleFilterConfig {
    pub particle_count: usize,
    pub motion_noise: MotionNoise,
    /// Odometry translation (m) that triggers a filter update.
    pub update_min_distance: f64,
    /// Odometry rotation (rad) that triggers a filter update.
    pub update_min_angle: f64,
}

impl Default for ParticleFilterConfig {
    fn default() -> Self {
        Self {
            particle_count: 1000,
            motion_noise: MotionNoise::default(),
            update_min_distance: 0.05,
            update_min_angle: 0.05,
        }
    }
}

/// A particle set plus its bookkeeping.
#[derive(Debug, Clone)]
pub struct ParticleFilter {
    pub config: ParticleFilterConfig,
    pub particles: Vec<Particle>,
    pub degenerate_updates: usize,
    pub resamples: usize,
}

impl ParticleFilter {
    /// Particles drawn uniformly within `±half_extent` (x, y, θ) of `center`.
    pub fn uniform_around<R: Rng + ?Sized>(
        config: ParticleFilterConfig,
        center: &Pose2D,
        half_extent: [f64; 3],
        rng: &mut R,
    ) -> Result<Self, LocalizationError> {
        if config.particle_count == 0 {
            return Err(LocalizationError::NoParticles);
        }
        let w = 1.0 / config.particle_count as f64;
        let mut sym = |h: f64| if h > 0.0 { rng.random_range(-h..h) } else { 0.0 };
        let particles = (0..config.particle_count)
            .map(|_| Particle {
                pose: Pose2D::new(
                    center.x + sym(half_extent[0]),
                    center.y + sym(half_extent[1]),
                    normalize_angle(center.theta + sym(half_extent[2])),
                ),
                weight: w,
            })
            .collect();
        Ok(Self {
            config,
            particles,
            degenerate_updates: 0,
            resamples: 0,
        })
    }

    pub fn predict<R: Rng + ?Sized>(&mut self, delta: &Pose2D, rng: &mut R) {
        pf_predict(&mut self.particles, delta, &self.config.motion_noise, rng);
    }

    /// Measurement update followed by conditional resampling.
    pub fn correct<R: Rng + ?Sized>(&mut self, scan: &MergedScan, field: &LikelihoodField, rng: &mut R) -> UpdateOutcome {
        let out = pf_update(&mut self.particles, scan, field);
        if out == UpdateOutcome::Degenerate {
            self.degenerate_updates += 1;
        }
        if pf_resample(&mut self.particles, rng) {
            self.resamples += 1;
        }
        out
    }

    pub fn estimate(&self) -> (Pose2D, Mat3) {
        pf_estimate(&self.particles)
    }

    /// Whether an odometry change is large enough to warrant an update.
    pub fn should_update(&self, delta: &Pose2D) -> bool {
        delta.x.hypot(delta.y) >= self.config.update_min_distance || delta.theta.abs() >= self.config.update_min_angle
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::likelihood::SensorModel;
    use crate::world::{merge_all, raycast_scan, Disc, LidarSpec, WorldMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn cloud(poses: &[Pose2D]) -> Vec<Particle> {
        let w = 1.0 / poses.len() as f64;
        poses.iter().map(|&pose| Particle { pose, weight: w }).collect()
    }

    fn noiseless_scan(map: &WorldMap, pose: &Pose2D) -> MergedScan {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scans: Vec<_> = LidarSpec::default_pair()
            .into_iter()
            .map(|mut spec| {
                spec.noise_sigma = 0.0;
                let sensor = pose.compose(&spec.mount);
                raycast_scan(map, &[] as &[Disc], &sensor, &spec, 0.0, &mut rng)
            })
            .collect();
        merge_all(&scans).unwrap()
    }

    #[test]
    fn zero_delta_without_noise_is_identity() {
        let mut ps = cloud(&[Pose2D::new(1.0, 2.0, 0.3), Pose2D::new(-1.0, 0.5, -2.0)]);
        let before = ps.clone();
        pf_predict(&mut ps, &Pose2D::identity(), &MotionNoise::zero(), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(ps, before);
    }

    #[test]
    fn delta_applies_in_particle_frame() {
        let mut ps = cloud(&[Pose2D::new(0.0, 0.0, FRAC_PI_2)]);
        pf_predict(&mut ps, &Pose2D::new(0.1, 0.0, 0.0), &MotionNoise::zero(), &mut ChaCha8Rng::seed_from_u64(1));
        assert!(ps[0].pose.x.abs() < 1e-12);
        assert!((ps[0].pose.y - 0.1).abs() < 1e-12);
    }

    #[test]
    fn lateral_motion_spreads_laterally() {
        let noise = MotionNoise {
            floor_xy: 0.001,
            floor_theta: 0.0,
            alpha_translation: 0.2,
            alpha_rotation: 0.0,
        };
        let mut ps = cloud(&vec![Pose2D::identity(); 10_000]);
        pf_predict(&mut ps, &Pose2D::new(0.0, 0.1, 0.0), &noise, &mut ChaCha8Rng::seed_from_u64(5));
        let std = |f: &dyn Fn(&Particle) -> f64| {
            let n = ps.len() as f64;
            let m = ps.iter().map(f).sum::<f64>() / n;
            (ps.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let sy = std(&|p| p.pose.y);
        let sx = std(&|p| p.pose.x);
        let want_y = 0.001 + 0.2 * 0.1;
        assert!((sy - want_y).abs() < 0.1 * want_y, "{sy}");
        assert!((sx - 0.001).abs() < 0.1 * 0.001, "{sx}");
    }

    #[test]
    fn true_pose_outweighs_offset_particles() {
        let map = WorldMap::default_rcll();
        let field = LikelihoodField::build(&map, 0.05, SensorModel::default()).unwrap();
        let truth = Pose2D::new(4.0, 2.2, 0.4);
        let scan = noiseless_scan(&map, &truth);
        let mut poses = vec![truth];
        for k in 0..8 {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            poses.push(Pose2D::new(truth.x + 0.3 * a.cos(), truth.y + 0.3 * a.sin(), truth.theta));
        }
        poses.push(Pose2D::new(truth.x, truth.y, truth.theta + 0.3));
        poses.push(Pose2D::new(truth.x, truth.y, truth.theta - 0.3));
        let mut ps = cloud(&poses);
        assert_eq!(pf_update(&mut ps, &scan, &field), UpdateOutcome::Weighted);
        let sum: f64 = ps.iter().map(|p| p.weight).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(ps[1..].iter().all(|p| p.weight < ps[0].weight));
    }

    #[test]
    fn identical_particles_stay_uniform() {
        let map = WorldMap::default_rcll();
        let field = LikelihoodField::build(&map, 0.05, SensorModel::default()).unwrap();
        let pose = Pose2D::new(2.0, 2.0, 0.0);
        let scan = noiseless_scan(&map, &pose);
        let mut ps = cloud(&vec![Pose2D::new(2.1, 2.0, 0.1); 7]);
        pf_update(&mut ps, &scan, &field);
        for p in &ps {
            assert!((p.weight - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_scan_keeps_weights() {
        let map = WorldMap::default_rcll();
        let field = LikelihoodField::build(&map, 0.05, SensorModel::default()).unwrap();
        let scan = MergedScan { timestamp: 0.0, max_range: 10.0, points: vec![] };
        let mut ps = cloud(&[Pose2D::new(1.0, 1.0, 0.0), Pose2D::new(2.0, 2.0, 0.0), Pose2D::new(3.0, 1.0, 0.0)]);
        ps[0].weight = 0.5;
        ps[1].weight = 0.3;
        ps[2].weight = 0.2;
        let before = ps.clone();
        pf_update(&mut ps, &scan, &field);
        for (a, b) in ps.iter().zip(&before) {
            assert!((a.weight - b.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_reset_uniform() {
        let map = WorldMap::default_rcll();
        let field = LikelihoodField::build(&map, 0.05, SensorModel::default()).unwrap();
        let scan = noiseless_scan(&map, &Pose2D::new(2.0, 2.0, 0.0));
        let mut ps = cloud(&[Pose2D::new(1.0, 1.0, 0.0), Pose2D::new(2.0, 2.0, 0.0)]);
        for p in ps.iter_mut() {
            p.weight = 0.0;
        }
        assert_eq!(pf_update(&mut ps, &scan, &field), UpdateOutcome::Degenerate);
        assert!(ps.iter().all(|p| p.weight == 0.5));
    }

    #[test]
    fn uniform_weights_skip_resampling() {
        let mut ps = cloud(&vec![Pose2D::new(1.0, 1.0, 0.0); 10]);
        assert!((effective_sample_size(&ps) - 10.0).abs() < 1e-9);
        assert!(!pf_resample(&mut ps, &mut ChaCha8Rng::seed_from_u64(1)));
    }

    #[test]
    fn single_survivor_fills_the_set() {
        let mut ps = cloud(&[Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, 0.0, 0.0), Pose2D::new(2.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0)]);
        for (i, p) in ps.iter_mut().enumerate() {
            p.weight = if i == 2 { 1.0 } else { 0.0 };
        }
        assert!(pf_resample(&mut ps, &mut ChaCha8Rng::seed_from_u64(3)));
        assert_eq!(ps.len(), 4);
        assert!(ps.iter().all(|p| p.pose.x == 2.0 && p.weight == 0.25));
    }

    #[test]
    fn half_half_weights_split_evenly_for_every_offset() {
        // exhaustive over a fine grid of first-pointer offsets in [0, 1/4)
        let w = [0.5, 0.5, 0.0, 0.0];
        for k in 0..1000 {
            let offset = 0.25 * k as f64 / 1000.0;
            let idx = systematic_indices(&w, offset);
            assert_eq!(idx, vec![0, 0, 1, 1], "offset {offset}");
        }
        let mut ps = cloud(&[Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, 0.0, 0.0), Pose2D::new(2.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0)]);
        for (p, wi) in ps.iter_mut().zip(w) {
            p.weight = wi;
        }
        let out = systematic_resample(&ps, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(out.iter().filter(|p| p.pose.x == 0.0).count(), 2);
        assert_eq!(out.iter().filter(|p| p.pose.x == 1.0).count(), 2);
    }

    #[test]
    fn estimate_of_single_pose() {
        let ps = cloud(&vec![Pose2D::new(1.5, -0.5, 2.0); 5]);
        let (m, cov) = pf_estimate(&ps);
        assert!((m.x - 1.5).abs() < 1e-12 && (m.y + 0.5).abs() < 1e-12 && (m.theta - 2.0).abs() < 1e-12);
        assert!(cov.0.iter().flatten().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn heading_mean_wraps() {
        let ps = cloud(&[Pose2D::new(0.0, 0.0, 3.1), Pose2D::new(0.0, 0.0, -3.1)]);
        let (m, cov) = pf_estimate(&ps);
        assert!(angle_diff(m.theta, std::f64::consts::PI).abs() < 1e-9, "{}", m.theta);
        assert!((cov.get(2, 2) - (std::f64::consts::PI - 3.1).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn symmetric_cloud_mean() {
        let mut poses = Vec::new();
        for (dx, dy, dt) in [(0.3, 0.1, 0.2), (-0.1, 0.25, -0.05), (0.05, -0.4, 0.1)] {
            poses.push(Pose2D::new(2.0 + dx, 3.0 + dy, 0.5 + dt));
            poses.push(Pose2D::new(2.0 - dx, 3.0 - dy, 0.5 - dt));
        }
        let (m, _) = pf_estimate(&cloud(&poses));
        assert!((m.x - 2.0).abs() < 1e-6 && (m.y - 3.0).abs() < 1e-6 && (m.theta - 0.5).abs() < 1e-6);
    }

    #[test]
    fn update_gate() {
        let pf = ParticleFilter::uniform_around(ParticleFilterConfig::default(), &Pose2D::identity(), [0.1; 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(!pf.should_update(&Pose2D::new(0.03, 0.03, 0.01)));
        assert!(pf.should_update(&Pose2D::new(0.04, 0.04, 0.0)));
        assert!(pf.should_update(&Pose2D::new(0.0, 0.0, -0.06)));
        assert_eq!(pf.particles.len(), 1000);
    }
}
