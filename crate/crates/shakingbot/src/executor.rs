//! Replays a trajectory against the bag simulation.
//!
//! Gripper poses are read from the trajectory at the simulation rate;
//! attach/release events mutate the per-gripper attachments at their event
//! times. Replays are deterministic: the same state, trajectory, and step
//! size always produce the same result.

use crate::bag::{BagState, GripperAttachment, GripperId, GripperPose, GripperPoses};
use crate::config::PhysicsConfig;
use crate::error::{Error, Result};
use crate::primitives::{DualTrajectory, EventKind};

/// Gripper-side state carried across primitives within a trial.
#[derive(Debug, Clone)]
pub struct GripperState {
    pub poses: GripperPoses,
    pub left_attachment: Option<GripperAttachment>,
    pub right_attachment: Option<GripperAttachment>,
}

impl GripperState {
    pub fn new(poses: GripperPoses) -> Self {
        Self {
            poses,
            left_attachment: None,
            right_attachment: None,
        }
    }

    pub fn attached(&self) -> (bool, bool) {
        (
            self.left_attachment.as_ref().map_or(false, |a| a.is_active()),
            self.right_attachment.as_ref().map_or(false, |a| a.is_active()),
        )
    }

    pub fn active_attachments(&self) -> Vec<GripperAttachment> {
        let mut out = Vec::new();
        if let Some(a) = &self.left_attachment {
            if a.is_active() {
                out.push(a.clone());
            }
        }
        if let Some(a) = &self.right_attachment {
            if a.is_active() {
                out.push(a.clone());
            }
        }
        out
    }

    fn slot(&mut self, id: GripperId) -> &mut Option<GripperAttachment> {
        match id {
            GripperId::Left => &mut self.left_attachment,
            GripperId::Right => &mut self.right_attachment,
        }
    }

    pub fn release(&mut self, state: &mut BagState, id: GripperId) -> Result<()> {
        match self.slot(id) {
            Some(att) if att.is_active() => {
                let mut att = att.clone();
                state.release(&mut att)?;
                *self.slot(id) = None;
                Ok(())
            }
            _ => Err(Error::AttachmentNotActive),
        }
    }

    pub fn release_all(&mut self, state: &mut BagState) {
        let _ = self.release(state, GripperId::Left);
        let _ = self.release(state, GripperId::Right);
    }
}

/// Replay `traj` against the simulation, processing events as they come due.
/// A grasp miss on an attach event aborts the replay and surfaces the error;
/// the simulation state remains valid (mid-trajectory).
pub fn execute(
    state: &mut BagState,
    grippers: &mut GripperState,
    traj: &DualTrajectory,
    physics: &PhysicsConfig,
    grasp_radius: f64,
) -> Result<()> {
    if traj.is_empty() {
        return Ok(());
    }
    let mut next_event = 0usize;
    let mut t = 0.0f64;

    // Events due at t = 0 fire before any motion.
    let fire_events = |state: &mut BagState,
                           grippers: &mut GripperState,
                           next_event: &mut usize,
                           t: f64|
     -> Result<()> {
        while *next_event < traj.events.len() && traj.events[*next_event].t <= t + 1e-9 {
            let ev = &traj.events[*next_event];
            match ev.kind {
                EventKind::Attach => {
                    let (l, r) = traj.sample(ev.t)?;
                    let pose: GripperPose = match ev.gripper {
                        GripperId::Left => l,
                        GripperId::Right => r,
                    };
                    let grasp_point = ev.grasp_point.ok_or_else(|| {
                        Error::TrajectoryRejected("attach event without grasp point".into())
                    })?;
                    let existing = grippers.active_attachments();
                    let att =
                        state.attach(ev.gripper, &pose, &grasp_point, grasp_radius, &existing)?;
                    *grippers.slot(ev.gripper) = Some(att);
                }
                EventKind::Release => {
                    grippers.release(state, ev.gripper)?;
                }
            }
            *next_event += 1;
        }
        Ok(())
    };

    fire_events(state, grippers, &mut next_event, 0.0)?;

    while t < traj.duration - 1e-9 {
        let t1 = (t + physics.dt).min(traj.duration);
        let (l, r) = traj.sample(t1)?;
        grippers.poses = GripperPoses { left: l, right: r };
        let attachments = grippers.active_attachments();
        state.step(physics, &attachments, &grippers.poses, t1 - t)?;
        t = t1;
        fire_events(state, grippers, &mut next_event, t)?;
    }
    Ok(())
}

/// Step the world with static poses until quiescence.
pub fn settle(
    state: &mut BagState,
    grippers: &GripperState,
    physics: &PhysicsConfig,
) -> Result<crate::bag::SettleOutcome> {
    let attachments = grippers.active_attachments();
    state.settle(
        physics,
        &attachments,
        &grippers.poses,
        physics.settle_max_time,
        physics.settle_ke_eps,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bag::{new_bag, BagSpec, ParticleLabel, Vec3};
    use crate::config::{PhysicsConfig, PrimitiveConfig};
    use crate::primitives::gen_dual_grasp;

    #[test]
    fn dual_grasp_execution_lifts_bag() {
        let physics = PhysicsConfig::default();
        let prim = PrimitiveConfig::default();
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        state.translate(Vec3::new(0.6, 0.9, 0.0));
        let mut grippers = GripperState::new(GripperPoses::parked(0.3));

        let left = state.label_centroid(ParticleLabel::HandleL).unwrap();
        let right = state.label_centroid(ParticleLabel::HandleR).unwrap();
        let mut lp = left;
        lp.z = 0.0;
        let mut rp = right;
        rp.z = 0.0;
        let traj = gen_dual_grasp(lp, rp, [0.6, 0.9], &grippers.poses, &prim, physics.dt).unwrap();
        execute(&mut state, &mut grippers, &traj, &physics, prim.grasp_radius).unwrap();

        assert_eq!(grippers.attached(), (true, true));
        // Handles are now dangling near the dangle height.
        let hl = state.label_centroid(ParticleLabel::HandleL).unwrap();
        assert!(hl.z > 0.5, "handle height {}", hl.z);
        // Bag hangs below.
        assert!(state.min_z() < hl.z);
    }

    #[test]
    fn replay_is_deterministic() {
        let physics = PhysicsConfig::default();
        let prim = PrimitiveConfig::default();
        let run = || {
            let mut state = new_bag(&BagSpec::default(), 4).unwrap();
            state.translate(Vec3::new(0.6, 0.9, 0.0));
            let mut grippers = GripperState::new(GripperPoses::parked(0.3));
            let left = state.label_centroid(ParticleLabel::HandleL).unwrap();
            let right = state.label_centroid(ParticleLabel::HandleR).unwrap();
            let traj =
                gen_dual_grasp(left, right, [0.6, 0.9], &grippers.poses, &prim, physics.dt).unwrap();
            execute(&mut state, &mut grippers, &traj, &physics, prim.grasp_radius).unwrap();
            state
        };
        let a = run();
        let b = run();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn grasp_miss_surfaces() {
        let physics = PhysicsConfig::default();
        let prim = PrimitiveConfig::default();
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        state.translate(Vec3::new(0.6, 0.9, 0.0));
        let mut grippers = GripperState::new(GripperPoses::parked(0.3));
        let traj = gen_dual_grasp(
            Vec3::new(0.1, 0.1, 0.0),
            Vec3::new(1.1, 1.7, 0.0),
            [0.6, 0.9],
            &grippers.poses,
            &prim,
            physics.dt,
        )
        .unwrap();
        let err = execute(&mut state, &mut grippers, &traj, &physics, prim.grasp_radius);
        assert!(matches!(err, Err(Error::GraspMiss { .. })));
    }
}
