//! Particle-based vest-bag model.
//!
//! The bag is two rectangular cloth layers seamed on the left, right, and
//! bottom edges, open at the top, with two handle tabs extending past the top
//! edge. Dynamics are mass-spring with semi-implicit Euler integration,
//! per-triangle normal aerodynamic drag, table contact, and kinematic pins
//! for the grippers. There is no self-collision and no enclosed-air pressure
//! model; inflate-on-fast-motion, which the shaking primitives rely on, is
//! approximated by a speed-dependent inter-layer repulsion (ram inflation)
//! on top of the per-triangle normal drag.

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::PhysicsConfig;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Geometric and material description of a bag.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BagSpec {
    /// Flat-bag width, m.
    pub width: f64,
    /// Flat-bag height (bottom seam to rim), m.
    pub height: f64,
    /// Handle tab width, m.
    pub handle_width: f64,
    /// Handle tab height, m.
    pub handle_height: f64,
    /// Particles per width edge (>= 8).
    pub resolution: usize,
    /// Total bag mass, kg.
    pub mass_total: f64,
    pub stiffness_structural: f64,
    pub stiffness_shear: f64,
    pub stiffness_bend: f64,
    /// Per-spring velocity damping, N*s/m.
    pub damping: f64,
    /// Normal drag coefficient (dimensionless; 0 is a test hook).
    pub drag_coeff: f64,
}

impl Default for BagSpec {
    fn default() -> Self {
        Self {
            width: 0.30,
            height: 0.45,
            handle_width: 0.08,
            handle_height: 0.08,
            resolution: 12,
            mass_total: 0.020,
            stiffness_structural: 40.0,
            stiffness_shear: 10.0,
            stiffness_bend: 8.0,
            damping: 0.02,
            drag_coeff: 1.0,
        }
    }
}

impl BagSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &'static str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidSpec {
                    field,
                    reason: reason.to_string(),
                })
            }
        };
        check(self.width > 0.0, "width", "must be positive")?;
        check(self.height > 0.0, "height", "must be positive")?;
        check(self.handle_width > 0.0, "handle_width", "must be positive")?;
        check(self.handle_height > 0.0, "handle_height", "must be positive")?;
        check(self.resolution >= 8, "resolution", "must be at least 8")?;
        check(self.mass_total > 0.0, "mass_total", "must be positive")?;
        check(
            self.stiffness_structural > 0.0,
            "stiffness_structural",
            "must be positive",
        )?;
        check(
            self.stiffness_shear > 0.0,
            "stiffness_shear",
            "must be positive",
        )?;
        check(
            self.stiffness_bend > 0.0,
            "stiffness_bend",
            "must be positive",
        )?;
        check(self.damping >= 0.0, "damping", "must be non-negative")?;
        check(
            self.drag_coeff >= 0.0,
            "drag_coeff",
            "must be non-negative",
        )?;
        Ok(())
    }

    /// True when the flat dimensions fall in the production size range
    /// (25-35 cm by 40-53 cm). Other sizes simulate fine but are flagged.
    pub fn is_size_conformant(&self) -> bool {
        (0.25..=0.35).contains(&self.width) && (0.40..=0.53).contains(&self.height)
    }
}

/// Semantic class of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParticleLabel {
    HandleL,
    HandleR,
    Rim,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpringKind {
    Structural,
    Shear,
    Bend,
    /// Inter-layer seam on the left/right/bottom edges and handle roots.
    Seam,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Spring {
    pub i: usize,
    pub j: usize,
    pub rest: f64,
    pub kind: SpringKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GripperId {
    Left,
    Right,
}

/// Cartesian gripper pose: position plus wrist pitch.
///
/// Pitch is measured so that -90 deg points the gripper straight down; the
/// rotation axis is the world x axis (the left-right axis of the dual-arm
/// setup), so pitching swings grasped material in the y-z plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GripperPose {
    pub position: Vec3,
    pub pitch: f64,
}

impl GripperPose {
    pub fn new(position: Vec3, pitch: f64) -> Self {
        Self { position, pitch }
    }

    fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::x_axis(), self.pitch + std::f64::consts::FRAC_PI_2)
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.position + self.rotation() * local
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.rotation().inverse() * (world - self.position)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite()) && self.pitch.is_finite()
    }
}

/// Poses for both grippers.
#[derive(Debug, Clone, Copy)]
pub struct GripperPoses {
    pub left: GripperPose,
    pub right: GripperPose,
}

impl GripperPoses {
    pub fn get(&self, id: GripperId) -> &GripperPose {
        match id {
            GripperId::Left => &self.left,
            GripperId::Right => &self.right,
        }
    }

    pub fn get_mut(&mut self, id: GripperId) -> &mut GripperPose {
        match id {
            GripperId::Left => &mut self.left,
            GripperId::Right => &mut self.right,
        }
    }

    pub fn parked(height: f64) -> Self {
        Self {
            left: GripperPose::new(Vec3::new(-0.5, 0.0, height), -std::f64::consts::FRAC_PI_2),
            right: GripperPose::new(Vec3::new(0.5, 0.0, height), -std::f64::consts::FRAC_PI_2),
        }
    }
}

/// A set of particles pinned to a gripper.
#[derive(Debug, Clone)]
pub struct GripperAttachment {
    pub gripper_id: GripperId,
    pub pinned: Vec<usize>,
    pub local_offsets: Vec<Vec3>,
    active: bool,
}

impl GripperAttachment {
    pub fn is_active(&self) -> bool {
        self.active
    }
}

/// Simulated world state of the bag.
#[derive(Debug, Clone)]
pub struct BagState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub labels: Vec<ParticleLabel>,
    pub springs: Vec<Spring>,
    pub triangles: Vec<[usize; 3]>,
    /// Rim particle indices in closed-cycle order.
    pub rim_cycle: Vec<usize>,
    /// Sum of rim-edge rest lengths, m.
    pub rim_perimeter_rest: f64,
    pub time: f64,
    pub step_count: u64,
    pub spec: BagSpec,
    /// Per-particle mass, kg.
    pub particle_mass: f64,
    /// Grid particles per layer; particle `i` of layer 0 pairs with
    /// `i + layer_pair_count` of layer 1 for the inter-layer contact force.
    pub layer_pair_count: usize,
}

/// Corresponding-particle contact: layers repel below this distance. Strictly
/// below the flat-bag layer gap so the rest configuration is force-free.
const LAYER_CONTACT_DIST: f64 = 0.002;
const LAYER_CONTACT_STIFFNESS: f64 = 25.0;

/// Ram-inflation proxy. Fast downward motion rams air in through the open
/// top and inflates the bag; with no enclosed-air model, the effect is
/// approximated by extending the inter-layer repulsion range in proportion
/// to the pair's downward speed above a threshold. At rest (and in any
/// quasi-static motion) the extension vanishes and only the hard contact
/// remains, so settled configurations are unaffected.
const RAM_SPEED_MIN: f64 = 0.4;
const RAM_RANGE_PER_SPEED: f64 = 0.04;
const RAM_RANGE_MAX: f64 = 0.06;
const RAM_STIFFNESS: f64 = 0.12;

/// Outcome of a settle call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettleOutcome {
    Converged,
    Timeout,
}

const LAYER_GAP: f64 = 0.0025;

/// Build a flat two-layer bag lying on the table, open at the top edge
/// (+y side), with handle tabs past the top edge. Centered on the origin;
/// callers translate it into the workspace. Deterministic for a fixed
/// (spec, seed); the seed drives a sub-millimeter symmetry-breaking jitter.
pub fn new_bag(spec: &BagSpec, seed: u64) -> Result<BagState> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let nx = spec.resolution;
    let ny = ((spec.resolution as f64 * spec.height / spec.width).round() as usize).max(2);
    let dx = spec.width / (nx - 1) as f64;
    let dy = spec.height / (ny - 1) as f64;
    let z0 = 0.002; // rest height of the lower layer

    let mut positions: Vec<Vec3> = Vec::new();
    let mut labels: Vec<ParticleLabel> = Vec::new();

    // Two layers: layer 0 below, layer 1 above by LAYER_GAP.
    for layer in 0..2usize {
        for row in 0..ny {
            for col in 0..nx {
                let x = -spec.width / 2.0 + col as f64 * dx;
                let y = -spec.height / 2.0 + row as f64 * dy;
                let z = z0 + layer as f64 * LAYER_GAP;
                let jx: f64 = rng.gen_range(-1.0..1.0) * 2e-4;
                let jy: f64 = rng.gen_range(-1.0..1.0) * 2e-4;
                positions.push(Vec3::new(x + jx, y + jy, z));
                let label = if row == ny - 1 {
                    ParticleLabel::Rim
                } else {
                    ParticleLabel::Body
                };
                labels.push(label);
            }
        }
    }

    let layer_index = |layer: usize, row: usize, col: usize| layer * nx * ny + row * nx + col;

    let mut springs: Vec<Spring> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    let push_spring = |springs: &mut Vec<Spring>,
                           positions: &[Vec3],
                           i: usize,
                           j: usize,
                           kind: SpringKind| {
        let rest = (positions[i] - positions[j]).norm();
        springs.push(Spring { i, j, rest, kind });
    };

    for layer in 0..2usize {
        for row in 0..ny {
            for col in 0..nx {
                let i = layer_index(layer, row, col);
                // Structural.
                if col + 1 < nx {
                    push_spring(
                        &mut springs,
                        &positions,
                        i,
                        layer_index(layer, row, col + 1),
                        SpringKind::Structural,
                    );
                }
                if row + 1 < ny {
                    push_spring(
                        &mut springs,
                        &positions,
                        i,
                        layer_index(layer, row + 1, col),
                        SpringKind::Structural,
                    );
                }
                // Shear.
                if col + 1 < nx && row + 1 < ny {
                    push_spring(
                        &mut springs,
                        &positions,
                        i,
                        layer_index(layer, row + 1, col + 1),
                        SpringKind::Shear,
                    );
                    push_spring(
                        &mut springs,
                        &positions,
                        layer_index(layer, row, col + 1),
                        layer_index(layer, row + 1, col),
                        SpringKind::Shear,
                    );
                }
                // Bend.
                if col + 2 < nx {
                    push_spring(
                        &mut springs,
                        &positions,
                        i,
                        layer_index(layer, row, col + 2),
                        SpringKind::Bend,
                    );
                }
                if row + 2 < ny {
                    push_spring(
                        &mut springs,
                        &positions,
                        i,
                        layer_index(layer, row + 2, col),
                        SpringKind::Bend,
                    );
                }
                // Triangles (two per quad).
                if col + 1 < nx && row + 1 < ny {
                    let a = i;
                    let b = layer_index(layer, row, col + 1);
                    let c = layer_index(layer, row + 1, col);
                    let d = layer_index(layer, row + 1, col + 1);
                    triangles.push([a, b, d]);
                    triangles.push([a, d, c]);
                }
            }
        }
    }

    // Seams joining the layers on left, right, and bottom edges.
    for row in 0..ny {
        for col in [0, nx - 1] {
            push_spring(
                &mut springs,
                &positions,
                layer_index(0, row, col),
                layer_index(1, row, col),
                SpringKind::Seam,
            );
        }
    }
    for col in 1..nx - 1 {
        push_spring(
            &mut springs,
            &positions,
            layer_index(0, 0, col),
            layer_index(1, 0, col),
            SpringKind::Seam,
        );
    }

    // Handle tabs past the top edge, one per side, connected to the top rows
    // of both layers.
    let hx = ((spec.handle_width / dx).round() as usize).clamp(2, nx / 2);
    let hy = ((spec.handle_height / dy).round() as usize).max(2);
    for (side, label) in [(0usize, ParticleLabel::HandleL), (1usize, ParticleLabel::HandleR)] {
        let col0 = if side == 0 { 0 } else { nx - hx };
        let base = positions.len();
        for row in 0..hy {
            for col in 0..hx {
                let x = -spec.width / 2.0 + (col0 + col) as f64 * dx;
                let y = spec.height / 2.0 + (row + 1) as f64 * dy;
                let jx: f64 = rng.gen_range(-1.0..1.0) * 2e-4;
                let jy: f64 = rng.gen_range(-1.0..1.0) * 2e-4;
                positions.push(Vec3::new(x + jx, y + jy, z0 + LAYER_GAP / 2.0));
                labels.push(label);
            }
        }
        let tab_index = |row: usize, col: usize| base + row * hx + col;
        for row in 0..hy {
            for col in 0..hx {
                let i = tab_index(row, col);
                if col + 1 < hx {
                    push_spring(&mut springs, &positions, i, tab_index(row, col + 1), SpringKind::Structural);
                }
                if row + 1 < hy {
                    push_spring(&mut springs, &positions, i, tab_index(row + 1, col), SpringKind::Structural);
                }
                if col + 1 < hx && row + 1 < hy {
                    push_spring(&mut springs, &positions, i, tab_index(row + 1, col + 1), SpringKind::Shear);
                    push_spring(&mut springs, &positions, tab_index(row, col + 1), tab_index(row + 1, col), SpringKind::Shear);
                    triangles.push([i, tab_index(row, col + 1), tab_index(row + 1, col + 1)]);
                    triangles.push([i, tab_index(row + 1, col + 1), tab_index(row + 1, col)]);
                }
            }
        }
        // Roots: tab bottom row to the top rows of both layers.
        for col in 0..hx {
            let tab = tab_index(0, col);
            for layer in 0..2usize {
                push_spring(
                    &mut springs,
                    &positions,
                    tab,
                    layer_index(layer, ny - 1, col0 + col),
                    SpringKind::Seam,
                );
            }
        }
    }

    // Rim cycle: top row of layer 0 left-to-right, then layer 1 right-to-left.
    let mut rim_cycle = Vec::with_capacity(2 * nx);
    for col in 0..nx {
        rim_cycle.push(layer_index(0, ny - 1, col));
    }
    for col in (0..nx).rev() {
        rim_cycle.push(layer_index(1, ny - 1, col));
    }
    let mut rim_perimeter_rest = 0.0;
    for k in 0..rim_cycle.len() {
        let a = rim_cycle[k];
        let b = rim_cycle[(k + 1) % rim_cycle.len()];
        // Use the ideal (unjittered) edge length so the reference perimeter
        // is independent of the seed.
        let rest = if labels[a] == labels[b] && (a as i64 - b as i64).abs() == 1 {
            dx
        } else {
            LAYER_GAP
        };
        rim_perimeter_rest += rest;
    }

    let n = positions.len();
    let particle_mass = spec.mass_total / n as f64;

    Ok(BagState {
        velocities: vec![Vec3::zeros(); n],
        positions,
        labels,
        springs,
        triangles,
        rim_cycle,
        rim_perimeter_rest,
        time: 0.0,
        step_count: 0,
        spec: spec.clone(),
        particle_mass,
        layer_pair_count: nx * ny,
    })
}

impl BagState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn translate(&mut self, delta: Vec3) {
        for p in &mut self.positions {
            *p += delta;
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.particle_mass * self.velocities.iter().map(|v| v.norm_squared()).sum::<f64>()
    }

    /// Horizontal centroid of all particles.
    pub fn centroid_xy(&self) -> [f64; 2] {
        let n = self.len() as f64;
        let sum = self.positions.iter().fold(Vec3::zeros(), |a, p| a + p);
        [sum.x / n, sum.y / n]
    }

    pub fn min_z(&self) -> f64 {
        self.positions.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
    }

    pub fn max_z(&self) -> f64 {
        self.positions.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn label_centroid(&self, label: ParticleLabel) -> Option<Vec3> {
        let mut sum = Vec3::zeros();
        let mut count = 0usize;
        for (p, l) in self.positions.iter().zip(&self.labels) {
            if *l == label {
                sum += p;
                count += 1;
            }
        }
        if count == 0 {
            None
        } else {
            Some(sum / count as f64)
        }
    }

    pub fn nearest_particle(&self, point: &Vec3) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.positions.iter().enumerate() {
            let d = (p - point).norm_squared();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Positions of the rim particles in cycle order.
    pub fn rim_points(&self) -> Result<Vec<Vec3>> {
        if self.rim_cycle.is_empty() {
            return Err(Error::InvariantViolation("rim cycle is empty".into()));
        }
        for &i in &self.rim_cycle {
            if self.labels.get(i) != Some(&ParticleLabel::Rim) {
                return Err(Error::InvariantViolation(format!(
                    "rim cycle references non-rim particle {i}"
                )));
            }
        }
        Ok(self.rim_cycle.iter().map(|&i| self.positions[i]).collect())
    }

    /// Mean distance between corresponding rim particles of the two layers.
    pub fn rim_separation(&self) -> f64 {
        let half = self.rim_cycle.len() / 2;
        if half == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for k in 0..half {
            // Cycle layout pairs index k on layer 0 with half*2-1-k on layer 1
            // (same column, other layer).
            let a = self.rim_cycle[k];
            let b = self.rim_cycle[2 * half - 1 - k];
            sum += (self.positions[a] - self.positions[b]).norm();
        }
        sum / half as f64
    }

    /// Substep size limit of the explicit integrator plus the largest total
    /// damping incident on any one particle. The limit is governed by the
    /// summed per-node stiffness, not the stiffest single spring: with both
    /// spring ends free the reduced mass halves and incident springs add up.
    /// Damping does not constrain the limit because `step` rescales it
    /// semi-implicitly to stay stable at any substep size.
    fn substep_limit(&self, safety: f64) -> (f64, f64) {
        let mut k_acc = vec![0.0f64; self.positions.len()];
        let mut c_acc = vec![0.0f64; self.positions.len()];
        for s in &self.springs {
            let k = self.spring_stiffness(s.kind);
            k_acc[s.i] += k;
            k_acc[s.j] += k;
            c_acc[s.i] += self.spec.damping;
            c_acc[s.j] += self.spec.damping;
        }
        let k_node = k_acc.into_iter().fold(self.spec.stiffness_structural, f64::max)
            + LAYER_CONTACT_STIFFNESS;
        let c_node = c_acc.into_iter().fold(0.0f64, f64::max);
        let m = self.particle_mass;
        (safety * 2.0 * (m / (2.0 * k_node)).sqrt(), c_node)
    }

    fn spring_stiffness(&self, kind: SpringKind) -> f64 {
        match kind {
            SpringKind::Structural | SpringKind::Seam => self.spec.stiffness_structural,
            SpringKind::Shear => self.spec.stiffness_shear,
            SpringKind::Bend => self.spec.stiffness_bend,
        }
    }

    /// Advance the simulation by `dt`, internally substepping to the
    /// stiffness-derived stability limit. Pinned particles track their
    /// gripper poses kinematically (interpolated across substeps so release
    /// preserves momentum).
    pub fn step(
        &mut self,
        physics: &PhysicsConfig,
        attachments: &[GripperAttachment],
        poses: &GripperPoses,
        dt: f64,
    ) -> Result<()> {
        if !(dt > 0.0 && dt <= 1.0 / 60.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "dt must be in (0, 1/60], got {dt}"
            )));
        }
        if !poses.left.is_finite() || !poses.right.is_finite() {
            return Err(Error::InvalidArgument("non-finite gripper pose".into()));
        }

        let m = self.particle_mass;
        let (dt_limit, c_node) = self.substep_limit(physics.substep_safety);
        let substeps = (dt / dt_limit).ceil().max(1.0) as usize;
        let h = dt / substeps as f64;
        // Semi-implicit damping: rescale so the worst-case per-node damping
        // rate stays below the explicit stability bound for this h, and
        // converges to the configured coefficient as h shrinks.
        let damp_eff = self.spec.damping / (1.0 + 2.0 * h * c_node / m);

        // Pin targets for this outer step; particles move linearly toward
        // them across substeps.
        let mut pins: Vec<(usize, Vec3)> = Vec::new();
        for att in attachments {
            if !att.active {
                continue;
            }
            let pose = poses.get(att.gripper_id);
            for (&idx, local) in att.pinned.iter().zip(&att.local_offsets) {
                pins.push((idx, pose.to_world(local)));
            }
        }
        let pin_steps: Vec<(usize, Vec3, Vec3)> = pins
            .iter()
            .map(|&(idx, target)| {
                let delta = (target - self.positions[idx]) / substeps as f64;
                (idx, target, delta)
            })
            .collect();
        let pinned_set: Vec<bool> = {
            let mut v = vec![false; self.len()];
            for &(idx, _, _) in &pin_steps {
                v[idx] = true;
            }
            v
        };

        let mut forces = vec![Vec3::zeros(); self.len()];
        for s in 0..substeps {
            for f in &mut forces {
                *f = Vec3::new(0.0, 0.0, -physics.gravity * m);
            }

            for spring in &self.springs {
                let d = self.positions[spring.j] - self.positions[spring.i];
                let len = d.norm();
                if len < 1e-12 {
                    continue;
                }
                let dir = d / len;
                let k = self.spring_stiffness(spring.kind);
                let rel_v = (self.velocities[spring.j] - self.velocities[spring.i]).dot(&dir);
                let f = (k * (len - spring.rest) + damp_eff * rel_v) * dir;
                forces[spring.i] += f;
                forces[spring.j] -= f;
            }

            // Inter-layer contact: corresponding particles of the two layers
            // repel when closer than the contact distance, so the layers
            // cannot collapse through each other.
            for i in 0..self.layer_pair_count {
                let j = i + self.layer_pair_count;
                let d = self.positions[j] - self.positions[i];
                let len = d.norm();
                // Ram inflation: the repulsion range widens with the pair's
                // downward speed (see the constants above).
                let vz = 0.5 * (self.velocities[i].z + self.velocities[j].z);
                let ram = (RAM_RANGE_PER_SPEED * (-vz - RAM_SPEED_MIN).max(0.0))
                    .min(RAM_RANGE_MAX);
                let range = LAYER_CONTACT_DIST + ram;
                if len >= range {
                    continue;
                }
                let dir = if len > 1e-9 { d / len } else { Vec3::new(0.0, 0.0, 1.0) };
                let hard = (LAYER_CONTACT_DIST - len).max(0.0) * LAYER_CONTACT_STIFFNESS;
                let soft = (range - len).min(ram) * RAM_STIFFNESS;
                let f = dir * (hard + soft);
                forces[i] -= f;
                forces[j] += f;
            }

            if self.spec.drag_coeff > 0.0 {
                for tri in &self.triangles {
                    let [a, b, c] = *tri;
                    let n = (self.positions[b] - self.positions[a])
                        .cross(&(self.positions[c] - self.positions[a]));
                    let area2 = n.norm();
                    if area2 < 1e-12 {
                        continue;
                    }
                    let n_hat = n / area2;
                    let area = 0.5 * area2;
                    let v = (self.velocities[a] + self.velocities[b] + self.velocities[c]) / 3.0;
                    let vn = v.dot(&n_hat);
                    let f = -self.spec.drag_coeff * area * vn * n_hat / 3.0;
                    forces[a] += f;
                    forces[b] += f;
                    forces[c] += f;
                }
            }

            for i in 0..self.len() {
                if pinned_set[i] {
                    continue;
                }
                self.velocities[i] += forces[i] * (h / m);
                self.positions[i] += self.velocities[i] * h;

                // Table contact: non-penetration plus tangential damping.
                if self.positions[i].z < physics.particle_radius {
                    self.positions[i].z = physics.particle_radius;
                    let v = &mut self.velocities[i];
                    if v.z < 0.0 {
                        v.z = 0.0;
                    }
                    let damp = 1.0 / (1.0 + physics.friction * h * 60.0);
                    v.x *= damp;
                    v.y *= damp;
                }
            }

            // Kinematic pins: linear interpolation toward the pose target.
            for &(idx, target, delta) in &pin_steps {
                let new_pos = target - delta * (substeps - 1 - s) as f64;
                self.velocities[idx] = (new_pos - self.positions[idx]) / h;
                self.positions[idx] = new_pos;
            }
        }

        self.time += dt;
        self.step_count += 1;

        for p in &self.positions {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::SimulationDiverged {
                    step: self.step_count,
                });
            }
        }
        Ok(())
    }

    /// Pin all particles within `radius` of `grasp_point` to a gripper.
    pub fn attach(
        &self,
        gripper_id: GripperId,
        pose: &GripperPose,
        grasp_point: &Vec3,
        radius: f64,
        existing: &[GripperAttachment],
    ) -> Result<GripperAttachment> {
        if radius <= 0.0 {
            return Err(Error::InvalidArgument("grasp radius must be positive".into()));
        }
        let taken: Vec<usize> = existing
            .iter()
            .filter(|a| a.active)
            .flat_map(|a| a.pinned.iter().copied())
            .collect();
        let mut pinned = Vec::new();
        let mut local_offsets = Vec::new();
        for (k, p) in self.positions.iter().enumerate() {
            if (p - grasp_point).norm() <= radius && !taken.contains(&k) {
                pinned.push(k);
                local_offsets.push(pose.to_local(p));
            }
        }
        if pinned.is_empty() {
            return Err(Error::GraspMiss { radius });
        }
        Ok(GripperAttachment {
            gripper_id,
            pinned,
            local_offsets,
            active: true,
        })
    }

    /// Free the pinned particles, keeping their instantaneous velocities.
    pub fn release(&mut self, attachment: &mut GripperAttachment) -> Result<()> {
        if !attachment.active {
            return Err(Error::AttachmentNotActive);
        }
        attachment.active = false;
        Ok(())
    }

    /// Step until the total kinetic energy drops below `ke_eps` or
    /// `max_time` elapses.
    pub fn settle(
        &mut self,
        physics: &PhysicsConfig,
        attachments: &[GripperAttachment],
        poses: &GripperPoses,
        max_time: f64,
        ke_eps: f64,
    ) -> Result<SettleOutcome> {
        if max_time <= 0.0 {
            return Err(Error::InvalidArgument("max_time must be positive".into()));
        }
        if self.kinetic_energy() < ke_eps {
            return Ok(SettleOutcome::Converged);
        }
        let mut elapsed = 0.0;
        while elapsed + 1e-12 < max_time {
            let dt = physics.dt.min(max_time - elapsed);
            self.step(physics, attachments, poses, dt)?;
            elapsed += dt;
            if self.kinetic_energy() < ke_eps {
                return Ok(SettleOutcome::Converged);
            }
        }
        Ok(SettleOutcome::Timeout)
    }

    /// Warn-level check: springs stretched past 3x rest length.
    pub fn overstretched_springs(&self) -> usize {
        self.springs
            .iter()
            .filter(|s| (self.positions[s.i] - self.positions[s.j]).norm() > 3.0 * s.rest)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn physics() -> PhysicsConfig {
        PhysicsConfig::default()
    }

    fn free_poses() -> GripperPoses {
        GripperPoses::parked(1.0)
    }

    #[test]
    fn construction_matches_spec_geometry() {
        let spec = BagSpec {
            width: 0.30,
            height: 0.45,
            resolution: 16,
            ..BagSpec::default()
        };
        let state = new_bag(&spec, 1).unwrap();
        // 2 layers of 16 x 24 plus two handle tabs.
        assert!(state.len() > 2 * 16 * 24);
        assert!(state.max_z() < 0.005, "flat bag must lie within 5 mm of the table");
        assert_eq!(state.rim_cycle.len(), 2 * 16);
        let handles_l = state.labels.iter().filter(|l| **l == ParticleLabel::HandleL).count();
        let handles_r = state.labels.iter().filter(|l| **l == ParticleLabel::HandleR).count();
        assert!(handles_l > 0 && handles_r > 0);
    }

    #[test]
    fn construction_is_deterministic() {
        let spec = BagSpec::default();
        let a = new_bag(&spec, 7).unwrap();
        let b = new_bag(&spec, 7).unwrap();
        assert_eq!(a.positions, b.positions);
        let c = new_bag(&spec, 8).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn nonconformant_size_accepted_but_flagged() {
        let spec = BagSpec {
            width: 0.10,
            height: 0.45,
            ..BagSpec::default()
        };
        assert!(new_bag(&spec, 0).is_ok());
        assert!(!spec.is_size_conformant());
        assert!(BagSpec::default().is_size_conformant());
    }

    #[test]
    fn invalid_spec_rejected_with_field() {
        let spec = BagSpec {
            mass_total: -1.0,
            ..BagSpec::default()
        };
        match new_bag(&spec, 0) {
            Err(Error::InvalidSpec { field, .. }) => assert_eq!(field, "mass_total"),
            other => panic!("expected InvalidSpec, got {other:?}"),
        }
    }

    #[test]
    fn resolution_below_eight_rejected() {
        let spec = BagSpec {
            resolution: 4,
            ..BagSpec::default()
        };
        assert!(new_bag(&spec, 0).is_err());
    }

    #[test]
    fn equilibrium_without_gravity() {
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        let mut phys = physics();
        phys.gravity = 0.0;
        let before = state.positions.clone();
        for _ in 0..24 {
            state.step(&phys, &[], &free_poses(), phys.dt).unwrap();
        }
        for (a, b) in before.iter().zip(&state.positions) {
            assert!((a - b).norm() < 1e-9, "state must stay unchanged at equilibrium");
        }
    }

    #[test]
    fn free_bag_settles_near_table() {
        let mut state = new_bag(&BagSpec::default(), 3).unwrap();
        // Lift it off the table first.
        state.translate(Vec3::new(0.0, 0.0, 0.10));
        let phys = physics();
        let mut max_z_trace = Vec::new();
        for k in 0..(2.0 / phys.dt) as usize {
            state.step(&phys, &[], &free_poses(), phys.dt).unwrap();
            if k % 60 == 0 {
                max_z_trace.push(state.max_z());
            }
        }
        assert!(state.max_z() < 0.02, "bag should come to rest near the table");
        assert!(max_z_trace.first().unwrap() > max_z_trace.last().unwrap());
    }

    #[test]
    fn non_penetration_holds() {
        let mut state = new_bag(&BagSpec::default(), 5).unwrap();
        state.translate(Vec3::new(0.0, 0.0, 0.3));
        let phys = physics();
        for _ in 0..(1.5 / phys.dt) as usize {
            state.step(&phys, &[], &free_poses(), phys.dt).unwrap();
            assert!(state.min_z() >= -1e-3);
        }
    }

    #[test]
    fn pinned_particle_tracks_gripper() {
        let state0 = new_bag(&BagSpec::default(), 0).unwrap();
        let mut state = state0.clone();
        let grasp = state.label_centroid(ParticleLabel::HandleL).unwrap();
        let mut poses = free_poses();
        poses.left = GripperPose::new(grasp, -std::f64::consts::FRAC_PI_2);
        let att = state
            .attach(GripperId::Left, &poses.left, &grasp, 0.02, &[])
            .unwrap();
        let attachments = vec![att];
        let pinned = attachments[0].pinned[0];
        let before = state.positions[pinned];
        let mut phys = physics();
        phys.gravity = 0.0;
        poses.left.position.x += 0.1;
        state.step(&phys, &attachments, &poses, phys.dt).unwrap();
        let after = state.positions[pinned];
        assert!((after.x - before.x - 0.1).abs() < 1e-9);
        assert!((after.y - before.y).abs() < 1e-9);
        assert!((after.z - before.z).abs() < 1e-9);
    }

    #[test]
    fn attach_requires_nearby_particles() {
        let state = new_bag(&BagSpec::default(), 0).unwrap();
        let pose = GripperPose::new(Vec3::new(1.0, 1.0, 1.0), 0.0);
        match state.attach(GripperId::Left, &pose, &Vec3::new(1.0, 1.0, 1.0), 0.02, &[]) {
            Err(Error::GraspMiss { .. }) => {}
            other => panic!("expected GraspMiss, got {other:?}"),
        }
        assert!(state
            .attach(GripperId::Left, &pose, &Vec3::zeros(), 0.0, &[])
            .is_err());
    }

    #[test]
    fn attach_finds_handle_particles() {
        let state = new_bag(&BagSpec::default(), 0).unwrap();
        let grasp = state.label_centroid(ParticleLabel::HandleL).unwrap();
        let pose = GripperPose::new(grasp, -std::f64::consts::FRAC_PI_2);
        let att = state
            .attach(GripperId::Left, &pose, &grasp, 0.02, &[])
            .unwrap();
        assert!(att
            .pinned
            .iter()
            .any(|&i| state.labels[i] == ParticleLabel::HandleL));
    }

    #[test]
    fn double_release_rejected() {
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        let grasp = state.label_centroid(ParticleLabel::HandleL).unwrap();
        let pose = GripperPose::new(grasp, -std::f64::consts::FRAC_PI_2);
        let mut att = state
            .attach(GripperId::Left, &pose, &grasp, 0.02, &[])
            .unwrap();
        state.release(&mut att).unwrap();
        assert!(matches!(
            state.release(&mut att),
            Err(Error::AttachmentNotActive)
        ));
    }

    #[test]
    fn release_preserves_velocity() {
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        let grasp = state.label_centroid(ParticleLabel::HandleL).unwrap();
        let mut poses = free_poses();
        poses.left = GripperPose::new(grasp, -std::f64::consts::FRAC_PI_2);
        let mut att = state
            .attach(GripperId::Left, &poses.left, &grasp, 0.02, &[])
            .unwrap();
        let pinned = att.pinned[0];
        let phys = physics();
        // Constant upward motion.
        for _ in 0..60 {
            poses.left.position.z += 0.5 * phys.dt;
            let atts = std::slice::from_ref(&att);
            state.step(&phys, atts, &poses, phys.dt).unwrap();
        }
        let v_before = state.velocities[pinned];
        state.release(&mut att).unwrap();
        let v_after = state.velocities[pinned];
        assert!((v_before - v_after).norm() < 1e-6);
        assert!(v_before.z > 0.1, "pinned particle must carry the gripper velocity");
    }

    #[test]
    fn settle_converged_and_timeout() {
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        let phys = physics();
        // Already at rest: immediate convergence.
        let out = state
            .settle(&phys, &[], &free_poses(), 5.0, 1e-4)
            .unwrap();
        assert_eq!(out, SettleOutcome::Converged);

        // Dropped bag converges before the deadline.
        let mut dropped = new_bag(&BagSpec::default(), 1).unwrap();
        dropped.translate(Vec3::new(0.0, 0.0, 0.5));
        let out = dropped
            .settle(&phys, &[], &free_poses(), 5.0, phys.settle_ke_eps)
            .unwrap();
        assert_eq!(out, SettleOutcome::Converged);
        assert!(dropped.time < 5.0);

        // Tiny deadline: timeout flag.
        let mut moving = new_bag(&BagSpec::default(), 2).unwrap();
        moving.translate(Vec3::new(0.0, 0.0, 0.5));
        for v in &mut moving.velocities {
            v.z = -1.0;
        }
        let out = moving
            .settle(&phys, &[], &free_poses(), 0.001, 1e-12)
            .unwrap();
        assert_eq!(out, SettleOutcome::Timeout);
    }

    #[test]
    fn rim_points_in_cycle_order() {
        let spec = BagSpec {
            resolution: 16,
            ..BagSpec::default()
        };
        let state = new_bag(&spec, 0).unwrap();
        let rim = state.rim_points().unwrap();
        assert_eq!(rim.len(), 2 * 16);
        // All rim points sit at the top edge of the flat bag.
        for p in &rim {
            assert!((p.y - spec.height / 2.0).abs() < 0.01);
        }
    }

    #[test]
    fn corrupted_rim_is_surfaced() {
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        state.labels[state.rim_cycle[0]] = ParticleLabel::Body;
        assert!(state.rim_points().is_err());
        state.rim_cycle.clear();
        assert!(state.rim_points().is_err());
    }

    #[test]
    fn free_fall_matches_ballistics_without_drag() {
        let spec = BagSpec {
            drag_coeff: 0.0,
            ..BagSpec::default()
        };
        let mut state = new_bag(&spec, 0).unwrap();
        state.translate(Vec3::new(0.0, 0.0, 1.0));
        let phys = physics();
        let z_start = state.max_z();
        let mut t = 0.0;
        while t < 0.3 - 1e-9 {
            state.step(&phys, &[], &free_poses(), phys.dt).unwrap();
            t += phys.dt;
        }
        let analytic_drop = 0.5 * phys.gravity * t * t;
        let simulated_drop = z_start - state.max_z();
        let rel = (simulated_drop - analytic_drop).abs() / analytic_drop;
        assert!(rel < 0.01, "drop {simulated_drop} vs analytic {analytic_drop} (rel {rel})");
    }

    #[test]
    fn step_rejects_bad_dt() {
        let mut state = new_bag(&BagSpec::default(), 0).unwrap();
        let phys = physics();
        assert!(state.step(&phys, &[], &free_poses(), 0.0).is_err());
        assert!(state.step(&phys, &[], &free_poses(), 0.1).is_err());
    }

    #[test]
    fn determinism_of_trajectories() {
        let spec = BagSpec::default();
        let phys = physics();
        let run = || {
            let mut s = new_bag(&spec, 11).unwrap();
            s.translate(Vec3::new(0.0, 0.0, 0.2));
            for _ in 0..120 {
                s.step(&phys, &[], &free_poses(), phys.dt).unwrap();
            }
            s
        };
        let a = run();
        let b = run();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.velocities, b.velocities);
    }
}
