//! Build a flat bag, let it settle on the table, and save a state snapshot.
//!
//!     cargo run --release --example settle_flat_bag [out.snap]

use shakingbot::bag::{new_bag, BagSpec};
use shakingbot::config::Config;
use shakingbot::executor::{settle, GripperState};
use shakingbot::bag::GripperPoses;

fn main() -> shakingbot::Result<()> {
    let cfg = Config::default();
    let spec = BagSpec::default();
    let mut state = new_bag(&spec, 42)?;
    println!(
        "bag: {} particles, {} springs, rim perimeter {:.3} m",
        state.positions.len(),
        state.springs.len(),
        state.rim_perimeter_rest
    );

    let grippers = GripperState::new(GripperPoses::parked(0.3));
    let outcome = settle(&mut state, &grippers, &cfg.physics)?;
    println!(
        "settled ({outcome:?}) after {:.2} s simulated, kinetic energy {:.2e} J",
        state.time,
        state.kinetic_energy()
    );
    println!(
        "extents: z in [{:.4}, {:.4}] m",
        state.min_z(),
        state.max_z()
    );

    let out = std::env::args().nth(1).unwrap_or_else(|| "flat_bag.snap".into());
    shakingbot::snapshot::save_snapshot(&state, std::path::Path::new(&out))?;
    println!("snapshot written to {out}");
    Ok(())
}
