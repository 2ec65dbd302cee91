//! Rule-based bagging policy.
//!
//! The policy looks at the current observation and emits one primitive
//! command per step: grasp when both handles are visible, recenter or shake
//! the bag when they are not, and alternate Bag Adjustment with Dual-arm
//! Shaking while the opening is insufficient. Once the opening passes the
//! thresholds (or the action budget runs out) the trial moves to the
//! hold/insert/lift phase implemented by [`run_insert_and_lift`].
//!
//! Item/bag coupling in the insert phase is geometric, not force-based: an
//! item counts as placed when its drop point fits inside the rim hull with
//! clearance for its footprint, and placed items travel with the bag during
//! the lift.

use serde::{Deserialize, Serialize};

use crate::bag::{BagState, GripperId, Vec3};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::executor::{execute, settle, GripperState};
use crate::metrics::{
    area_covariance, opening_metrics, opening_ok, polygon_area, polygon_centroid, OpeningMetrics,
    OpeningThresholds, Point2,
};
use crate::perception::{grasp_points, render_topdown, Camera, HandleDetection, Masks, Raster};
use crate::primitives::{gen_lift, gen_one_arm_holding, gen_regrasp, PrimitiveCommand};

/// Where the policy currently is in the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// On the table; handles not yet grasped.
    Ground,
    /// Dangling from both grippers; opening being worked on.
    Open,
    /// Opening accepted; hold, insert, and lift.
    Insert,
    Done,
    Failed,
}

/// One policy step result.
#[derive(Debug, Clone)]
pub enum Decision {
    Act(PrimitiveCommand),
    /// Opening accepted: proceed to the hold/insert/lift phase.
    Insert,
    /// Action budget exhausted: lift with whatever opening there is.
    ForcedLift,
}

/// Observation handed to the policy each step.
pub struct PolicyInput<'a> {
    pub state: &'a BagState,
    pub masks: &'a Masks,
    pub cam: &'a Camera,
    pub grippers: &'a GripperState,
}

/// Rule state machine. Ablation switches cover the method variants: the
/// full policy, no-adjustment, and reduced shake apex.
#[derive(Debug, Clone)]
pub struct Policy {
    cfg: Config,
    /// Emit Bag Adjustment in the opening loop (ablation switch).
    pub use_adjustment: bool,
    /// Apex height for Dual-arm Shaking, m (ablation switch).
    pub shake_apex: f64,
    /// Actions consumed so far.
    pub actions: u32,
    adjust_next: bool,
}

impl Policy {
    pub fn new(cfg: &Config) -> Self {
        Self {
            cfg: cfg.clone(),
            use_adjustment: true,
            shake_apex: cfg.primitives.shake_height,
            actions: 0,
            adjust_next: true,
        }
    }

    pub fn thresholds(&self) -> OpeningThresholds {
        OpeningThresholds {
            a_min: self.cfg.policy.a_min,
            e_max: self.cfg.policy.e_max,
        }
    }

    /// Current opening metrics (with rim separation filled in).
    pub fn opening(&self, state: &BagState) -> Result<OpeningMetrics> {
        let rim = state.rim_points()?;
        let mut m = opening_metrics(&rim, state.rim_perimeter_rest, self.cfg.policy.e_degenerate_cap)?;
        m.rim_separation = state.rim_separation();
        Ok(m)
    }

    /// One rule-machine step. Does not consume budget; the caller counts an
    /// action when it actually executes the returned command.
    pub fn decide(&mut self, input: &PolicyInput) -> Result<Decision> {
        if self.actions >= self.cfg.harness.action_budget {
            return Ok(Decision::ForcedLift);
        }
        let (left, right) = input.grippers.attached();
        if left && right {
            return self.decide_open(input);
        }
        self.decide_ground(input)
    }

    fn decide_ground(&mut self, input: &PolicyInput) -> Result<Decision> {
        match grasp_points(input.masks) {
            HandleDetection::Two(a, b) => {
                let pa = world_grasp(input.state, input.cam.px_to_world(a[0], a[1]));
                let pb = world_grasp(input.state, input.cam.px_to_world(b[0], b[1]));
                let (l, r) = if pa.x <= pb.x { (pa, pb) } else { (pb, pa) };
                Ok(Decision::Act(PrimitiveCommand::DualGrasp {
                    left: [l.x, l.y, l.z],
                    right: [r.x, r.y, r.z],
                }))
            }
            HandleDetection::One(_) | HandleDetection::None => {
                let c = input.state.centroid_xy();
                let center = self.cfg.workspace.center();
                let off = ((c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2)).sqrt();
                if off > self.cfg.policy.recenter_radius {
                    return Ok(Decision::Act(PrimitiveCommand::Recenter { target: center }));
                }
                // Shake the topmost bag point to unfold whatever hides the
                // handles.
                let top = top_particle(input.state);
                let [px, py] = input.cam.world_to_px(top.x, top.y);
                Ok(Decision::Act(PrimitiveCommand::Shake {
                    grasp_point: [px, py],
                    amplitude: self.cfg.primitives.wrist_shake_amplitude,
                    cycles: self.cfg.primitives.wrist_shake_cycles,
                }))
            }
        }
    }

    fn decide_open(&mut self, input: &PolicyInput) -> Result<Decision> {
        let m = self.opening(input.state)?;
        if opening_ok(&m, &self.thresholds()) {
            return Ok(Decision::Insert);
        }
        let poses = &input.grippers.poses;
        if self.use_adjustment && self.adjust_next {
            self.adjust_next = false;
            let d = (poses.right.position.x - poses.left.position.x).abs();
            let p = &self.cfg.primitives;
            return Ok(Decision::Act(PrimitiveCommand::BagAdjustment {
                d,
                delta_d: p.delta_d,
                swings: p.swing_count,
                swing_length: p.swing_length,
                frequency: p.swing_frequency,
                d_min: p.d_min,
            }));
        }
        self.adjust_next = true;
        // Low point of the stroke keeps the hanging bag clear of the table.
        let hang = poses.left.position.z - input.state.min_z();
        let low = (hang + self.cfg.primitives.shake_bottom_margin).min(self.shake_apex - 0.05);
        Ok(Decision::Act(PrimitiveCommand::DualArmShaking {
            apex: self.shake_apex,
            low,
            speed: self.cfg.primitives.shake_speed,
        }))
    }
}

/// Position of the particle nearest in the horizontal plane to `xy`.
pub fn world_grasp(state: &BagState, xy: [f64; 2]) -> Vec3 {
    let mut best = state.positions[0];
    let mut best_d = f64::INFINITY;
    for p in &state.positions {
        let d = (p.x - xy[0]).powi(2) + (p.y - xy[1]).powi(2);
        if d < best_d {
            best_d = d;
            best = *p;
        }
    }
    best
}

fn top_particle(state: &BagState) -> Vec3 {
    *state
        .positions
        .iter()
        .max_by(|a, b| a.z.partial_cmp(&b.z).unwrap())
        .unwrap()
}

/// Lowest visible bag surface height in a pixel window around `mid_xy`,
/// read from a top-down depth raster. Returns the height and whether the
/// fallback was used (no bag pixels in the window).
pub fn bag_bottom_height(
    depth: &Raster<f64>,
    cam: &Camera,
    mid_xy: [f64; 2],
    window_px: usize,
    fallback: f64,
) -> (f64, bool) {
    let [px, py] = cam.world_to_px(mid_xy[0], mid_xy[1]);
    let (cx, cy) = (px.round() as isize, py.round() as isize);
    let half = (window_px / 2) as isize;
    let mut min_z = f64::INFINITY;
    for dy in -half..=half {
        for dx in -half..=half {
            let (x, y) = (cx + dx, cy + dy);
            if depth.in_bounds(x, y) {
                let d = *depth.get(x as usize, y as usize);
                if d > 0.0 {
                    min_z = min_z.min(d);
                }
            }
        }
    }
    if min_z.is_finite() {
        (min_z, false)
    } else {
        (fallback, true)
    }
}

/// Items that get inserted into the bag.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ItemSpec {
    Sphere { radius: f64 },
    Cylinder { radius: f64, height: f64 },
}

impl ItemSpec {
    /// Horizontal clearance the item needs through the opening, m.
    pub fn footprint_radius(&self) -> f64 {
        match self {
            ItemSpec::Sphere { radius } => *radius,
            ItemSpec::Cylinder { radius, .. } => *radius,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Item {
    pub spec: ItemSpec,
    pub position: Vec3,
    /// Landed inside the bag at the drop.
    pub placed: bool,
    /// Still inside after the lift and hold.
    pub contained: bool,
}

// ---- insertion planning -------------------------------------------------

/// Clip a convex polygon against the half-plane {p : p.axis <= s}.
fn clip_halfplane(poly: &[Point2], axis: [f64; 2], s: f64) -> Vec<Point2> {
    let side = |p: &Point2| p[0] * axis[0] + p[1] * axis[1] - s;
    let mut out = Vec::new();
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let (da, db) = (side(&a), side(&b));
        if da <= 1e-12 {
            out.push(a);
        }
        if (da < -1e-12 && db > 1e-12) || (da > 1e-12 && db < -1e-12) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Distance from an interior point to the nearest polygon edge.
pub fn distance_to_boundary(poly: &[Point2], p: &Point2) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1];
        let t = if len2 < 1e-18 {
            0.0
        } else {
            ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
        };
        let d = ((ap[0] - t * ab[0]).powi(2) + (ap[1] - t * ab[1]).powi(2)).sqrt();
        best = best.min(d);
    }
    best
}

/// True when `p` lies inside the counterclockwise convex polygon.
pub fn point_in_convex(poly: &[Point2], p: &Point2) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross < -1e-12 {
            return false;
        }
    }
    true
}

/// Split the opening hull into `n` equal-area slabs perpendicular to its
/// principal axis and return the slab centroids, ordered along the axis.
/// Every returned point is strictly inside the hull.
pub fn insertion_plan(hull: &[Point2], n: usize) -> Result<Vec<Point2>> {
    if n == 0 {
        return Err(Error::InvalidArgument("zero drop points requested".into()));
    }
    let area = polygon_area(hull);
    if hull.len() < 3 || area < 1e-9 {
        return Err(Error::InsertionInfeasible(format!(
            "opening hull is degenerate (area {area:.2e} m^2)"
        )));
    }
    let (ixx, ixy, iyy) = area_covariance(hull);
    // Principal axis of the region; the x axis for isotropic hulls.
    let axis = if (ixx - iyy).abs() < 1e-9 * (ixx + iyy) && ixy.abs() < 1e-9 * (ixx + iyy) {
        [1.0, 0.0]
    } else {
        let l_max = (ixx + iyy) / 2.0 + (((ixx - iyy) / 2.0).powi(2) + ixy * ixy).sqrt();
        let v = if ixy.abs() > 1e-15 {
            [l_max - iyy, ixy]
        } else if ixx >= iyy {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / norm, v[1] / norm]
    };

    let proj = |p: &Point2| p[0] * axis[0] + p[1] * axis[1];
    let s_min = hull.iter().map(proj).fold(f64::INFINITY, f64::min);
    let s_max = hull.iter().map(proj).fold(f64::NEG_INFINITY, f64::max);

    // Area left of s is monotone in s; bisect for the slab boundaries.
    let area_left = |s: f64| polygon_area(&clip_halfplane(hull, axis, s));
    let mut cuts = vec![s_min];
    for k in 1..n {
        let target = area * k as f64 / n as f64;
        let (mut lo, mut hi) = (s_min, s_max);
        for _ in 0..60 {
            let mid = (lo + hi) / 2.0;
            if area_left(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cuts.push((lo + hi) / 2.0);
    }
    cuts.push(s_max);

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Slab = hull left of cuts[k+1] minus left of cuts[k].
        let left = clip_halfplane(hull, axis, cuts[k + 1]);
        let slab = clip_halfplane(&left, [-axis[0], -axis[1]], -cuts[k]);
        if polygon_area(&slab) < 1e-12 {
            return Err(Error::InsertionInfeasible(format!(
                "slab {k} collapsed during planning"
            )));
        }
        let c = polygon_centroid(&slab);
        if !point_in_convex(hull, &c) || distance_to_boundary(hull, &c) < 1e-9 {
            return Err(Error::InsertionInfeasible(format!(
                "drop point {c:?} not strictly inside the hull"
            )));
        }
        out.push(c);
    }
    Ok(out)
}

// ---- hold / insert / lift ----------------------------------------------

/// Outcome of the insert-and-lift phase.
#[derive(Debug, Clone)]
pub struct InsertOutcome {
    pub items: Vec<Item>,
    pub placed: u32,
    pub contained: u32,
    pub total: u32,
    pub full: bool,
    pub partial: bool,
    /// Bottom sensing fell back to the configured height.
    pub bottom_fallback_used: bool,
    /// Regrasp of the right handle succeeded.
    pub regrasped: bool,
}

/// Hold the bag on the table with one arm, drop the items through the
/// opening, regrasp the right handle, and lift.
///
/// `perceive_right_handle` supplies the regrasp point; it is retried with a
/// settle in between up to the configured number of times. Both grippers
/// must be attached on entry.
pub fn run_insert_and_lift(
    state: &mut BagState,
    grippers: &mut GripperState,
    cfg: &Config,
    item_specs: &[ItemSpec],
    perceive_right_handle: &mut dyn FnMut(&BagState) -> Result<Vec3>,
) -> Result<InsertOutcome> {
    let (l, r) = grippers.attached();
    if !(l && r) {
        return Err(Error::InvalidArgument(
            "insert phase needs both grippers attached".into(),
        ));
    }
    let cam = Camera::from_config(&cfg.perception);
    let total = item_specs.len() as u32;

    // Sense the hanging bag bottom and descend until it touches the table.
    let obs = render_topdown(state, &cam, false);
    let mid = [
        (grippers.poses.left.position.x + grippers.poses.right.position.x) / 2.0,
        (grippers.poses.left.position.y + grippers.poses.right.position.y) / 2.0,
    ];
    let (bottom_z, bottom_fallback_used) = bag_bottom_height(
        &obs.depth,
        &cam,
        mid,
        cfg.policy.bottom_window_px,
        cfg.policy.bottom_fallback,
    );
    // Descend by the sensed hang depth so the bottom just reaches the table;
    // the fallback is a fixed conservative height.
    let hold_height = if bottom_fallback_used {
        cfg.policy.bottom_fallback
    } else {
        (grippers.poses.left.position.z - bottom_z).max(0.05)
    };
    let traj = gen_one_arm_holding(
        hold_height,
        &grippers.poses,
        grippers.attached(),
        &cfg.primitives,
        cfg.physics.dt,
    )?;
    execute(state, grippers, &traj, &cfg.physics, cfg.primitives.grasp_radius)?;
    settle(state, grippers, &cfg.physics)?;

    // Plan drop points over the opening and judge each drop geometrically.
    let rim = state.rim_points()?;
    let m = opening_metrics(&rim, state.rim_perimeter_rest, cfg.policy.e_degenerate_cap)?;
    let rim_mean_z = rim.iter().map(|p| p.z).sum::<f64>() / rim.len() as f64;
    let plan = insertion_plan(&m.hull, item_specs.len()).ok();

    let mut items: Vec<Item> = Vec::with_capacity(item_specs.len());
    for (k, spec) in item_specs.iter().enumerate() {
        let fr = spec.footprint_radius();
        let (placed, pos) = match &plan {
            Some(points) => {
                let p = points[k];
                let fits = distance_to_boundary(&m.hull, &p) >= fr && rim_mean_z >= 2.0 * fr;
                (fits, Vec3::new(p[0], p[1], fr))
            }
            // No opening: the item bounces off and lands beside the bag.
            None => {
                let c = state.centroid_xy();
                (false, Vec3::new(c[0] + 0.2, c[1], fr))
            }
        };
        items.push(Item {
            spec: *spec,
            position: pos,
            placed,
            contained: false,
        });
    }

    // Regrasp the right handle through perception, then lift and hold.
    let mut regrasped = false;
    for _attempt in 0..=cfg.policy.regrasp_retries {
        let point = match perceive_right_handle(state) {
            Ok(p) => p,
            Err(_) => {
                settle(state, grippers, &cfg.physics)?;
                continue;
            }
        };
        let traj = gen_regrasp(
            GripperId::Right,
            point,
            &grippers.poses,
            &cfg.primitives,
            cfg.physics.dt,
        )?;
        match execute(state, grippers, &traj, &cfg.physics, cfg.primitives.grasp_radius) {
            Ok(()) => {
                regrasped = true;
                break;
            }
            Err(Error::GraspMiss { .. }) => {
                settle(state, grippers, &cfg.physics)?;
            }
            Err(e) => return Err(e),
        }
    }

    let mut carried = false;
    if regrasped {
        let traj = gen_lift(
            cfg.policy.lift_height,
            cfg.policy.lift_hold_time,
            &grippers.poses,
            grippers.attached(),
            &cfg.primitives,
            cfg.physics.dt,
        )?;
        execute(state, grippers, &traj, &cfg.physics, cfg.primitives.grasp_radius)?;
        let (l, r) = grippers.attached();
        // Carried when the bag actually left the table and both grasps held
        // through the hold window.
        carried = l && r && state.min_z() > 0.02;
    }

    let mut contained = 0u32;
    for item in &mut items {
        if item.placed && carried {
            item.contained = true;
            contained += 1;
            let c = state.centroid_xy();
            item.position = Vec3::new(c[0], c[1], state.min_z() + item.spec.footprint_radius());
        }
    }
    let placed = items.iter().filter(|i| i.placed).count() as u32;
    Ok(InsertOutcome {
        placed,
        contained,
        total,
        full: total > 0 && contained == total,
        partial: contained >= 1,
        bottom_fallback_used,
        regrasped,
        items,
    })
}

/// The bag slipped out of both grippers and is back on the table.
pub fn bag_dropped(state: &BagState, grippers: &GripperState) -> bool {
    let (l, r) = grippers.attached();
    !l && !r && state.max_z() < 0.15
}
