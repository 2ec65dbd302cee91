//! Action primitive library.
//!
//! Each primitive is converted into a time-parameterized dual-gripper
//! trajectory sampled at the simulation rate, with attach/release events.
//! Generators are pure functions of the command, the current poses, and the
//! primitive configuration; execution against the bag happens in
//! [`crate::executor`].

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use crate::bag::{GripperId, GripperPose, GripperPoses, Vec3};
use crate::config::PrimitiveConfig;
use crate::error::{Error, Result};

const PITCH_DOWN: f64 = -FRAC_PI_2;
const PITCH_APEX: f64 = FRAC_PI_4;

/// Parameterized action primitives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PrimitiveCommand {
    /// Symmetric separation decrease followed by horizontal swings.
    BagAdjustment {
        /// Current gripper separation, m.
        d: f64,
        /// Separation decrease, m.
        delta_d: f64,
        /// Number of swings.
        swings: u32,
        /// Swing half-length, m.
        swing_length: f64,
        /// Swing frequency, Hz.
        frequency: f64,
        /// Minimum separation below which the decrease is skipped, m.
        d_min: f64,
    },
    /// High-speed vertical stroke to `apex` then down to `low`.
    DualArmShaking { apex: f64, low: f64, speed: f64 },
    /// Descend until the bag bottom touches the table, then release the
    /// right gripper and retreat it.
    OneArmHolding { height: f64 },
    /// Single-gripper lift plus wrist-pitch oscillation.
    Shake {
        /// Grasp point in raster pixels (perception frame).
        grasp_point: [f64; 2],
        /// Wrist pitch amplitude, rad.
        amplitude: f64,
        cycles: u32,
    },
    /// Drag the bag along the table so its centroid lands on `target` (m).
    Recenter { target: [f64; 2] },
    /// Dual grasp of both handles followed by a lift to the dangle pose.
    /// Emitted by the policy's grasp phase.
    DualGrasp {
        left: [f64; 3],
        right: [f64; 3],
    },
}

impl PrimitiveCommand {
    pub fn name(&self) -> &'static str {
        match self {
            PrimitiveCommand::BagAdjustment { .. } => "bag_adjustment",
            PrimitiveCommand::DualArmShaking { .. } => "dual_arm_shaking",
            PrimitiveCommand::OneArmHolding { .. } => "one_arm_holding",
            PrimitiveCommand::Shake { .. } => "shake",
            PrimitiveCommand::Recenter { .. } => "recenter",
            PrimitiveCommand::DualGrasp { .. } => "dual_grasp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Attach,
    Release,
}

#[derive(Debug, Clone)]
pub struct TrajectoryEvent {
    pub t: f64,
    pub kind: EventKind,
    pub gripper: GripperId,
    /// World grasp point for attach events.
    pub grasp_point: Option<Vec3>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub t: f64,
    pub left: GripperPose,
    pub right: GripperPose,
}

/// Time-parameterized poses for both grippers plus attach/release events.
#[derive(Debug, Clone, Default)]
pub struct DualTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub events: Vec<TrajectoryEvent>,
    pub duration: f64,
    /// Gripper separation after the trajectory, when meaningful.
    pub final_separation: Option<f64>,
}

impl DualTrajectory {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear interpolation between bracketing samples.
    pub fn sample(&self, t: f64) -> Result<(GripperPose, GripperPose)> {
        if self.samples.is_empty() {
            return Err(Error::TrajectoryRejected("empty trajectory".into()));
        }
        if t < -1e-9 || t > self.duration + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "sample time {t} outside [0, {}]",
                self.duration
            )));
        }
        let idx = match self
            .samples
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Ok((self.samples[i].left, self.samples[i].right)),
            Err(i) => i,
        };
        if idx == 0 {
            let s = &self.samples[0];
            return Ok((s.left, s.right));
        }
        if idx >= self.samples.len() {
            let s = self.samples.last().unwrap();
            return Ok((s.left, s.right));
        }
        let a = &self.samples[idx - 1];
        let b = &self.samples[idx];
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |p: &GripperPose, q: &GripperPose| GripperPose {
            position: p.position + (q.position - p.position) * w,
            pitch: p.pitch + (q.pitch - p.pitch) * w,
        };
        Ok((lerp(&a.left, &b.left), lerp(&a.right, &b.right)))
    }

    /// Largest sample-to-sample Cartesian speed over both grippers.
    pub fn max_speed(&self) -> f64 {
        let mut v = 0.0f64;
        for w in self.samples.windows(2) {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 {
                continue;
            }
            let dl = (w[1].left.position - w[0].left.position).norm() / dt;
            let dr = (w[1].right.position - w[0].right.position).norm() / dt;
            v = v.max(dl).max(dr);
        }
        v
    }

    fn validate(&self, speed_limit: f64) -> Result<()> {
        for w in self.samples.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::TrajectoryRejected("non-increasing sample times".into()));
            }
        }
        for s in &self.samples {
            if !s.left.is_finite() || !s.right.is_finite() {
                return Err(Error::TrajectoryRejected("non-finite pose".into()));
            }
        }
        let v = self.max_speed();
        if v > speed_limit * 1.01 {
            return Err(Error::TrajectoryRejected(format!(
                "max speed {v:.3} exceeds limit {speed_limit:.3}"
            )));
        }
        Ok(())
    }

    pub fn export_csv(&self) -> String {
        let mut out = String::from("t,xL,yL,zL,pitchL,xR,yR,zR,pitchR\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.t,
                s.left.position.x,
                s.left.position.y,
                s.left.position.z,
                s.left.pitch,
                s.right.position.x,
                s.right.position.y,
                s.right.position.z,
                s.right.pitch
            ));
        }
        out
    }
}

/// Incremental trajectory builder sampling at the simulation rate.
struct TrajBuilder {
    dt: f64,
    t: f64,
    left: GripperPose,
    right: GripperPose,
    samples: Vec<TrajectorySample>,
    events: Vec<TrajectoryEvent>,
}

impl TrajBuilder {
    fn new(dt: f64, poses: &GripperPoses) -> Self {
        let mut b = Self {
            dt,
            t: 0.0,
            left: poses.left,
            right: poses.right,
            samples: Vec::new(),
            events: Vec::new(),
        };
        b.samples.push(TrajectorySample {
            t: 0.0,
            left: b.left,
            right: b.right,
        });
        b
    }

    /// Append samples following `f(t_local) -> (left, right)` over `duration`.
    fn phase<F: Fn(f64) -> (GripperPose, GripperPose)>(&mut self, duration: f64, f: F) {
        if duration <= 0.0 {
            return;
        }
        let steps = (duration / self.dt).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        for k in 1..=steps {
            let tl = k as f64 * h;
            let (l, r) = f(tl);
            self.t += h;
            self.left = l;
            self.right = r;
            self.samples.push(TrajectorySample {
                t: self.t,
                left: l,
                right: r,
            });
        }
    }

    /// Straight-line move of both grippers over `duration`.
    fn move_to(&mut self, left: GripperPose, right: GripperPose, duration: f64) {
        let (l0, r0) = (self.left, self.right);
        self.phase(duration, move |tl| {
            let w = tl / duration;
            (
                GripperPose {
                    position: l0.position + (left.position - l0.position) * w,
                    pitch: l0.pitch + (left.pitch - l0.pitch) * w,
                },
                GripperPose {
                    position: r0.position + (right.position - r0.position) * w,
                    pitch: r0.pitch + (right.pitch - r0.pitch) * w,
                },
            )
        });
    }

    fn event(&mut self, kind: EventKind, gripper: GripperId, grasp_point: Option<Vec3>) {
        self.events.push(TrajectoryEvent {
            t: self.t,
            kind,
            gripper,
            grasp_point,
        });
    }

    fn finish(self, speed_limit: f64, final_separation: Option<f64>) -> Result<DualTrajectory> {
        let traj = DualTrajectory {
            duration: self.t,
            samples: self.samples,
            events: self.events,
            final_separation,
        };
        traj.validate(speed_limit)?;
        Ok(traj)
    }
}

fn require_both_attached(left: bool, right: bool) -> Result<()> {
    if left && right {
        Ok(())
    } else {
        Err(Error::TrajectoryRejected(
            "both grippers must be attached".into(),
        ))
    }
}

/// Bag Adjustment: symmetric separation decrease, then synchronized
/// horizontal swings perpendicular to the gripper axis. The distance phase
/// is skipped when it would go below the minimum separation.
pub fn gen_bag_adjustment(
    d: f64,
    delta_d: f64,
    swings: u32,
    swing_length: f64,
    frequency: f64,
    d_min: f64,
    poses: &GripperPoses,
    attached: (bool, bool),
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    require_both_attached(attached.0, attached.1)?;
    if swings < 1 || frequency <= 0.0 || delta_d < 0.0 {
        return Err(Error::InvalidArgument(
            "bag adjustment parameters out of range".into(),
        ));
    }
    let mut b = TrajBuilder::new(dt, poses);

    let target_sep = d - delta_d;
    let executed = target_sep >= d_min;
    let final_sep = if executed { target_sep } else { d };
    if executed && delta_d > 0.0 {
        let mid_x = (poses.left.position.x + poses.right.position.x) / 2.0;
        let left = GripperPose {
            position: Vec3::new(mid_x - target_sep / 2.0, poses.left.position.y, poses.left.position.z),
            pitch: poses.left.pitch,
        };
        let right = GripperPose {
            position: Vec3::new(mid_x + target_sep / 2.0, poses.right.position.y, poses.right.position.z),
            pitch: poses.right.pitch,
        };
        b.move_to(left, right, (delta_d / 2.0 / cfg.cruise_speed).max(dt));
    }

    let (l0, r0) = (b.left, b.right);
    let swing_duration = swings as f64 / frequency;
    b.phase(swing_duration, move |tl| {
        let offset = swing_length * (TAU * frequency * tl).sin();
        let mut l = l0;
        let mut r = r0;
        l.position.y += offset;
        r.position.y += offset;
        (l, r)
    });

    b.finish(cfg.speed_limit, Some(final_sep))
}

/// Dual-arm Shaking: mirror-symmetric vertical stroke to the apex at the
/// stroke speed with the wrist pitching from straight down to 45 degrees
/// above horizontal, then back down to the low height.
pub fn gen_dual_arm_shaking(
    apex: f64,
    low: f64,
    speed: f64,
    poses: &GripperPoses,
    attached: (bool, bool),
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    require_both_attached(attached.0, attached.1)?;
    if low >= apex {
        return Err(Error::TrajectoryRejected(format!(
            "low height {low} must be below apex {apex}"
        )));
    }
    if apex > cfg.reach_limit {
        return Err(Error::TrajectoryRejected(format!(
            "apex {apex} exceeds reach limit {}",
            cfg.reach_limit
        )));
    }
    if speed <= 0.0 || speed > cfg.speed_limit {
        return Err(Error::TrajectoryRejected(format!(
            "stroke speed {speed} outside (0, {}]",
            cfg.speed_limit
        )));
    }
    let mut b = TrajBuilder::new(dt, poses);
    let z0 = poses.left.position.z;

    let up_span = (apex - z0).abs();
    let (l0, r0) = (b.left, b.right);
    b.phase(up_span / speed, move |tl| {
        let w = tl * speed / up_span;
        let z = z0 + (apex - z0) * w;
        let pitch = PITCH_DOWN + (PITCH_APEX - PITCH_DOWN) * w;
        let mut l = l0;
        let mut r = r0;
        l.position.z = z;
        r.position.z = z;
        l.pitch = pitch;
        r.pitch = pitch;
        (l, r)
    });

    let down_span = apex - low;
    let (l1, r1) = (b.left, b.right);
    b.phase(down_span / speed, move |tl| {
        let w = tl * speed / down_span;
        let z = apex + (low - apex) * w;
        let pitch = PITCH_APEX + (PITCH_DOWN - PITCH_APEX) * w;
        let mut l = l1;
        let mut r = r1;
        l.position.z = z;
        r.position.z = z;
        l.pitch = pitch;
        r.pitch = pitch;
        (l, r)
    });

    b.finish(cfg.speed_limit, None)
}

/// One-arm Holding: synchronized descent until the bag bottom touches the
/// table, then the right gripper releases and retreats while the left holds.
pub fn gen_one_arm_holding(
    height: f64,
    poses: &GripperPoses,
    attached: (bool, bool),
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    require_both_attached(attached.0, attached.1)?;
    if height < 0.0 {
        return Err(Error::TrajectoryRejected(format!(
            "hold height {height} is below the table"
        )));
    }
    let mut b = TrajBuilder::new(dt, poses);

    let mut left = poses.left;
    let mut right = poses.right;
    left.position.z = height;
    right.position.z = height;
    let span = (poses.left.position.z - height).abs();
    b.move_to(left, right, (span / cfg.cruise_speed).max(dt));

    b.event(EventKind::Release, GripperId::Right, None);

    // Park the right gripper well away from the bag; left holds position.
    let mut parked = b.right;
    parked.position.x += 0.35;
    parked.position.z = (height + 0.15).max(0.2);
    let l_hold = b.left;
    let r0 = b.right;
    let travel = (parked.position - r0.position).norm();
    b.phase((travel / cfg.cruise_speed).max(dt), move |tl| {
        let w = (tl * cfg.cruise_speed / travel).min(1.0);
        let mut r = r0;
        r.position += (parked.position - r0.position) * w;
        (l_hold, r)
    });

    b.finish(cfg.speed_limit, None)
}

/// Single-gripper Shake: lift, oscillate the wrist pitch, lower, release.
pub fn gen_shake(
    gripper: GripperId,
    grasp_world: Vec3,
    amplitude: f64,
    cycles: u32,
    poses: &GripperPoses,
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    if amplitude < 0.0 {
        return Err(Error::InvalidArgument("negative shake amplitude".into()));
    }
    let mut b = TrajBuilder::new(dt, poses);

    // Move to the grasp point (free motion, nothing attached yet).
    let down = GripperPose::new(grasp_world, PITCH_DOWN);
    let other = match gripper {
        GripperId::Left => b.right,
        GripperId::Right => b.left,
    };
    let travel = (down.position - poses.get(gripper).position).norm();
    match gripper {
        GripperId::Left => b.move_to(down, other, (travel / cfg.cruise_speed).max(dt)),
        GripperId::Right => b.move_to(other, down, (travel / cfg.cruise_speed).max(dt)),
    }
    b.event(EventKind::Attach, gripper, Some(grasp_world));

    // Lift.
    let mut lifted = down;
    lifted.position.z = cfg.wrist_shake_height;
    let span = (cfg.wrist_shake_height - down.position.z).abs();
    match gripper {
        GripperId::Left => b.move_to(lifted, other, (span / cfg.cruise_speed).max(dt)),
        GripperId::Right => b.move_to(other, lifted, (span / cfg.cruise_speed).max(dt)),
    }

    // Wrist oscillation.
    if cycles > 0 && amplitude > 0.0 {
        let freq = cfg.swing_frequency;
        let base = b.samples.last().unwrap().clone();
        let duration = cycles as f64 / freq;
        b.phase(duration, move |tl| {
            let dp = amplitude * (TAU * freq * tl).sin();
            let mut l = base.left;
            let mut r = base.right;
            match gripper {
                GripperId::Left => l.pitch += dp,
                GripperId::Right => r.pitch += dp,
            }
            (l, r)
        });
    }

    // Lower and release.
    let mut lowered = lifted;
    lowered.position.z = 0.05;
    let span = (lifted.position.z - lowered.position.z).abs();
    match gripper {
        GripperId::Left => b.move_to(lowered, other, (span / cfg.cruise_speed).max(dt)),
        GripperId::Right => b.move_to(other, lowered, (span / cfg.cruise_speed).max(dt)),
    }
    b.event(EventKind::Release, gripper, None);

    b.finish(cfg.speed_limit, None)
}

/// Recenter: grasp the nearest bag point and drag it along the table so the
/// bag centroid lands on the target. No-op within tolerance.
#[allow(clippy::too_many_arguments)]
pub fn gen_recenter(
    target: [f64; 2],
    bag_centroid: [f64; 2],
    grasp_world: Vec3,
    workspace: (f64, f64),
    tolerance: f64,
    poses: &GripperPoses,
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    if target[0] < 0.0 || target[0] > workspace.0 || target[1] < 0.0 || target[1] > workspace.1 {
        return Err(Error::TrajectoryRejected(format!(
            "recenter target ({}, {}) outside workspace",
            target[0], target[1]
        )));
    }
    let delta = [target[0] - bag_centroid[0], target[1] - bag_centroid[1]];
    let dist = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
    if dist < tolerance {
        return Ok(DualTrajectory::default());
    }
    let mut b = TrajBuilder::new(dt, poses);

    let grasp_pose = GripperPose::new(
        Vec3::new(grasp_world.x, grasp_world.y, grasp_world.z.max(0.01)),
        PITCH_DOWN,
    );
    let other = b.right;
    let travel = (grasp_pose.position - poses.left.position).norm();
    b.move_to(grasp_pose, other, (travel / cfg.cruise_speed).max(dt));
    b.event(EventKind::Attach, GripperId::Left, Some(grasp_pose.position));

    let mut dragged = grasp_pose;
    dragged.position.x += delta[0];
    dragged.position.y += delta[1];
    b.move_to(dragged, other, (dist / cfg.cruise_speed).max(dt));
    b.event(EventKind::Release, GripperId::Left, None);

    b.finish(cfg.speed_limit, None)
}

/// Dual grasp: move each gripper to its handle grasp point, attach, then
/// lift both to the dangle pose at the configured separation.
pub fn gen_dual_grasp(
    left_point: Vec3,
    right_point: Vec3,
    workspace_center: [f64; 2],
    poses: &GripperPoses,
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    let mut b = TrajBuilder::new(dt, poses);
    let l = GripperPose::new(left_point, PITCH_DOWN);
    let r = GripperPose::new(right_point, PITCH_DOWN);
    let travel = (l.position - poses.left.position)
        .norm()
        .max((r.position - poses.right.position).norm());
    b.move_to(l, r, (travel / cfg.cruise_speed).max(dt));
    b.event(EventKind::Attach, GripperId::Left, Some(left_point));
    b.event(EventKind::Attach, GripperId::Right, Some(right_point));

    let sep = cfg.grasp_separation;
    let cx = workspace_center[0];
    let cy = workspace_center[1];
    let lt = GripperPose::new(Vec3::new(cx - sep / 2.0, cy, cfg.dangle_height), PITCH_DOWN);
    let rt = GripperPose::new(Vec3::new(cx + sep / 2.0, cy, cfg.dangle_height), PITCH_DOWN);
    let travel = (lt.position - l.position)
        .norm()
        .max((rt.position - r.position).norm());
    b.move_to(lt, rt, (travel / cfg.cruise_speed).max(dt));

    b.finish(cfg.speed_limit, Some(sep))
}

/// Regrasp: move one gripper to a grasp point and attach. The other gripper
/// holds its pose throughout.
pub fn gen_regrasp(
    gripper: GripperId,
    grasp_world: Vec3,
    poses: &GripperPoses,
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    let mut b = TrajBuilder::new(dt, poses);
    let target = GripperPose::new(grasp_world, PITCH_DOWN);
    let other = match gripper {
        GripperId::Left => b.right,
        GripperId::Right => b.left,
    };
    let travel = (target.position - poses.get(gripper).position).norm();
    match gripper {
        GripperId::Left => b.move_to(target, other, (travel / cfg.cruise_speed).max(dt)),
        GripperId::Right => b.move_to(other, target, (travel / cfg.cruise_speed).max(dt)),
    }
    b.event(EventKind::Attach, gripper, Some(grasp_world));
    b.finish(cfg.speed_limit, None)
}

/// Lift: both grippers rise to `height` at cruise speed, then hold for
/// `hold_time` seconds.
pub fn gen_lift(
    height: f64,
    hold_time: f64,
    poses: &GripperPoses,
    attached: (bool, bool),
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<DualTrajectory> {
    require_both_attached(attached.0, attached.1)?;
    if height <= 0.0 || height > cfg.reach_limit {
        return Err(Error::TrajectoryRejected(format!(
            "lift height {height} outside (0, {}]",
            cfg.reach_limit
        )));
    }
    let mut b = TrajBuilder::new(dt, poses);
    let mut left = poses.left;
    let mut right = poses.right;
    left.position.z = height;
    right.position.z = height;
    let span = (poses.left.position.z - height)
        .abs()
        .max((poses.right.position.z - height).abs());
    b.move_to(left, right, (span / cfg.cruise_speed).max(dt));
    if hold_time > 0.0 {
        let (l, r) = (b.left, b.right);
        b.phase(hold_time, move |_| (l, r));
    }
    b.finish(cfg.speed_limit, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PrimitiveConfig {
        PrimitiveConfig::default()
    }

    fn dangling_poses(sep: f64, z: f64) -> GripperPoses {
        GripperPoses {
            left: GripperPose::new(Vec3::new(0.6 - sep / 2.0, 0.9, z), PITCH_DOWN),
            right: GripperPose::new(Vec3::new(0.6 + sep / 2.0, 0.9, z), PITCH_DOWN),
        }
    }

    const DT: f64 = 1.0 / 240.0;

    #[test]
    fn bag_adjustment_reduces_separation() {
        let poses = dangling_poses(0.30, 0.7);
        let traj = gen_bag_adjustment(0.30, 0.10, 3, 0.08, 2.0, 0.05, &poses, (true, true), &cfg(), DT).unwrap();
        assert!((traj.final_separation.unwrap() - 0.20).abs() < 1e-12);
        let last = traj.samples.last().unwrap();
        let sep = last.right.position.x - last.left.position.x;
        assert!((sep - 0.20).abs() < 1e-9);
    }

    #[test]
    fn bag_adjustment_skips_below_minimum() {
        let poses = dangling_poses(0.10, 0.7);
        let traj = gen_bag_adjustment(0.10, 0.08, 3, 0.08, 2.0, 0.05, &poses, (true, true), &cfg(), DT).unwrap();
        assert!((traj.final_separation.unwrap() - 0.10).abs() < 1e-12);
        // Separation untouched throughout.
        for s in &traj.samples {
            let sep = s.right.position.x - s.left.position.x;
            assert!((sep - 0.10).abs() < 1e-9);
        }
        // Swings still emitted.
        assert!(traj.duration > 1.0);
    }

    #[test]
    fn bag_adjustment_swing_waveform() {
        let poses = dangling_poses(0.30, 0.7);
        let traj = gen_bag_adjustment(0.30, 0.0, 2, 0.1, 1.0, 0.05, &poses, (true, true), &cfg(), DT).unwrap();
        assert!((traj.duration - 2.0).abs() < 1e-9, "2 periods at 1 Hz");
        let peak = traj
            .samples
            .iter()
            .map(|s| (s.left.position.y - 0.9).abs())
            .fold(0.0f64, f64::max);
        assert!((peak - 0.1).abs() < 1e-9, "peak offset {peak}");
        // Symmetric: both grippers share the swing offset.
        for s in &traj.samples {
            assert!((s.left.position.y - s.right.position.y).abs() < 1e-9);
        }
    }

    #[test]
    fn bag_adjustment_requires_both_grippers() {
        let poses = dangling_poses(0.30, 0.7);
        assert!(gen_bag_adjustment(0.3, 0.1, 3, 0.08, 2.0, 0.05, &poses, (true, false), &cfg(), DT).is_err());
    }

    #[test]
    fn dual_arm_shaking_geometry() {
        let poses = dangling_poses(0.30, 0.7);
        let traj = gen_dual_arm_shaking(1.4, 0.5, 1.5, &poses, (true, true), &cfg(), DT).unwrap();
        let apex_z = traj
            .samples
            .iter()
            .map(|s| s.left.position.z)
            .fold(0.0f64, f64::max);
        assert!((apex_z - 1.4).abs() < 1e-9);
        let last = traj.samples.last().unwrap();
        assert!((last.left.position.z - 0.5).abs() < 1e-9);
        // Apex pitch is +45 degrees.
        let apex = traj
            .samples
            .iter()
            .max_by(|a, b| a.left.position.z.partial_cmp(&b.left.position.z).unwrap())
            .unwrap();
        assert!((apex.left.pitch - FRAC_PI_4).abs() < 1e-6);
        // Max speed equals the stroke speed within 1%.
        let v = traj.max_speed();
        assert!((v - 1.5).abs() / 1.5 < 0.01, "max speed {v}");
        // Mirror symmetry about the midplane x = 0.6.
        for s in &traj.samples {
            assert!((s.left.position.x + s.right.position.x - 1.2).abs() < 1e-6);
            assert!((s.left.position.z - s.right.position.z).abs() < 1e-9);
        }
    }

    #[test]
    fn dual_arm_shaking_stroke_duration() {
        let poses = dangling_poses(0.30, 0.5);
        let traj = gen_dual_arm_shaking(1.4, 0.5, 1.5, &poses, (true, true), &cfg(), DT).unwrap();
        // Up-stroke spans 0.9 m at 1.5 m/s: 0.6 s.
        let apex_t = traj
            .samples
            .iter()
            .max_by(|a, b| a.left.position.z.partial_cmp(&b.left.position.z).unwrap())
            .unwrap()
            .t;
        assert!((apex_t - 0.6).abs() < 2.0 * DT, "apex at {apex_t}");
    }

    #[test]
    fn dual_arm_shaking_rejections() {
        let poses = dangling_poses(0.30, 0.7);
        assert!(gen_dual_arm_shaking(1.4, 1.5, 1.5, &poses, (true, true), &cfg(), DT).is_err());
        assert!(gen_dual_arm_shaking(5.0, 0.5, 1.5, &poses, (true, true), &cfg(), DT).is_err());
    }

    #[test]
    fn one_arm_holding_contract() {
        let poses = dangling_poses(0.30, 0.80);
        // Bag bottom 0.25 m below grippers: descend to 0.55 m.
        let traj = gen_one_arm_holding(0.55, &poses, (true, true), &cfg(), DT).unwrap();
        let releases: Vec<_> = traj
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Release)
            .collect();
        assert_eq!(releases.len(), 1);
        assert_eq!(releases[0].gripper, GripperId::Right);
        // Left gripper holds after the descent.
        let release_t = releases[0].t;
        let (l_at_release, _) = traj.sample(release_t).unwrap();
        let (l_end, r_end) = traj.sample(traj.duration).unwrap();
        assert!((l_end.position - l_at_release.position).norm() < 1e-6);
        assert!((l_end.position.z - 0.55).abs() < 1e-9);
        // Right gripper retreats at least 0.3 m.
        assert!((r_end.position - l_end.position).norm() > 0.3 + 0.30 - 1e-6);
        assert!(gen_one_arm_holding(-0.1, &poses, (true, true), &cfg(), DT).is_err());
    }

    #[test]
    fn shake_waveform_and_release() {
        let poses = GripperPoses::parked(0.3);
        let grasp = Vec3::new(0.6, 0.9, 0.01);
        let traj = gen_shake(GripperId::Left, grasp, 0.5, 3, &poses, &cfg(), DT).unwrap();
        let peak = traj
            .samples
            .iter()
            .map(|s| (s.left.pitch - PITCH_DOWN).abs())
            .fold(0.0f64, f64::max);
        assert!((peak - 0.5).abs() < 1e-6, "peak pitch {peak}");
        assert!(traj
            .events
            .iter()
            .any(|e| e.kind == EventKind::Release && e.gripper == GripperId::Left));
        assert_eq!(
            traj.events.last().unwrap().kind,
            EventKind::Release,
            "release event at the end"
        );
        // Degenerate amplitude accepted.
        let degen = gen_shake(GripperId::Left, grasp, 0.0, 3, &poses, &cfg(), DT).unwrap();
        assert!(degen.duration > 0.0);
    }

    #[test]
    fn recenter_no_op_within_tolerance() {
        let poses = GripperPoses::parked(0.3);
        let traj = gen_recenter(
            [0.6, 0.9],
            [0.61, 0.9],
            Vec3::new(0.61, 0.9, 0.0),
            (1.2, 1.8),
            0.02,
            &poses,
            &cfg(),
            DT,
        )
        .unwrap();
        assert!(traj.is_empty());
    }

    #[test]
    fn recenter_rejects_out_of_workspace() {
        let poses = GripperPoses::parked(0.3);
        assert!(gen_recenter(
            [2.0, 0.9],
            [0.6, 0.9],
            Vec3::new(0.6, 0.9, 0.0),
            (1.2, 1.8),
            0.02,
            &poses,
            &cfg(),
            DT
        )
        .is_err());
    }

    #[test]
    fn sample_interpolation() {
        let poses = dangling_poses(0.30, 0.7);
        let traj = gen_dual_arm_shaking(1.4, 0.5, 1.5, &poses, (true, true), &cfg(), DT).unwrap();
        let (first_l, _) = traj.sample(0.0).unwrap();
        assert!((first_l.position - poses.left.position).norm() < 1e-12);
        let (last_l, _) = traj.sample(traj.duration).unwrap();
        let end = traj.samples.last().unwrap();
        assert!((last_l.position - end.left.position).norm() < 1e-12);
        // Midpoint of a constant-velocity segment is the mean of endpoints.
        let a = &traj.samples[10];
        let b = &traj.samples[11];
        let (mid_l, _) = traj.sample((a.t + b.t) / 2.0).unwrap();
        let expect = (a.left.position + b.left.position) / 2.0;
        assert!((mid_l.position - expect).norm() < 1e-12);
        assert!(traj.sample(-1.0).is_err());
        assert!(traj.sample(traj.duration + 1.0).is_err());
    }

    #[test]
    fn dual_grasp_ends_at_dangle_pose() {
        let poses = GripperPoses::parked(0.3);
        let traj = gen_dual_grasp(
            Vec3::new(0.5, 1.1, 0.0),
            Vec3::new(0.7, 1.1, 0.0),
            [0.6, 0.9],
            &poses,
            &cfg(),
            DT,
        )
        .unwrap();
        let (l, r) = traj.sample(traj.duration).unwrap();
        assert!((r.position.x - l.position.x - 0.30).abs() < 1e-9);
        assert!((l.position.z - 0.70).abs() < 1e-9);
        let attaches = traj
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Attach)
            .count();
        assert_eq!(attaches, 2);
    }
}
