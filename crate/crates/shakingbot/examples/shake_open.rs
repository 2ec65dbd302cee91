//! Grasp a flat bag by both handles, then alternate Bag Adjustment and
//! Dual-arm Shaking, printing the opening metrics after every primitive.
//!
//!     cargo run --release --example shake_open [seed]

use shakingbot::bag::{new_bag, GripperPoses, ParticleLabel, Vec3};
use shakingbot::config::Config;
use shakingbot::executor::{execute, GripperState};
use shakingbot::metrics::opening_metrics;
use shakingbot::policy::world_grasp;
use shakingbot::primitives::{gen_bag_adjustment, gen_dual_arm_shaking, gen_dual_grasp};

fn main() -> shakingbot::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let cfg = Config::default();
    let c = cfg.workspace.center();
    let mut state = new_bag(&cfg.bag, seed)?;
    state.translate(Vec3::new(c[0], c[1], 0.0));

    let mut grip = GripperState::new(GripperPoses::parked(0.3));
    let hl = state.label_centroid(ParticleLabel::HandleL).unwrap();
    let hr = state.label_centroid(ParticleLabel::HandleR).unwrap();
    let l = world_grasp(&state, [hl.x, hl.y]);
    let r = world_grasp(&state, [hr.x, hr.y]);
    let traj = gen_dual_grasp(l, r, c, &grip.poses, &cfg.primitives, cfg.physics.dt)?;
    execute(&mut state, &mut grip, &traj, &cfg.physics, cfg.primitives.grasp_radius)?;
    println!("grasped, attached: {:?}", grip.attached());

    let report = |state: &shakingbot::bag::BagState, label: &str| {
        let rim = state.rim_points().unwrap();
        let m = opening_metrics(&rim, state.rim_perimeter_rest, 100.0).unwrap();
        println!(
            "{label:>16}: a_ch {:.3}  e_ch {:.2}  rim separation {:.4} m",
            m.a_ch,
            m.e_ch,
            state.rim_separation()
        );
    };
    report(&state, "after grasp");

    let p = &cfg.primitives;
    for round in 0..6 {
        let d = (grip.poses.left.position - grip.poses.right.position).norm();
        let traj = gen_bag_adjustment(
            d,
            p.delta_d,
            p.swing_count,
            p.swing_length,
            p.swing_frequency,
            p.d_min,
            &grip.poses,
            grip.attached(),
            p,
            cfg.physics.dt,
        )?;
        execute(&mut state, &mut grip, &traj, &cfg.physics, p.grasp_radius)?;
        report(&state, &format!("adj d={:.2}", (grip.poses.left.position - grip.poses.right.position).norm()));

        let hang = grip.poses.left.position.z - state.min_z();
        let low = (hang + p.shake_bottom_margin).min(p.shake_height - 0.05);
        let traj = gen_dual_arm_shaking(
            p.shake_height,
            low,
            p.shake_speed,
            &grip.poses,
            grip.attached(),
            p,
            cfg.physics.dt,
        )?;
        execute(&mut state, &mut grip, &traj, &cfg.physics, p.grasp_radius)?;
        report(&state, &format!("shake {}", round + 1));
    }
    Ok(())
}
