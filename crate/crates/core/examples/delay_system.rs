//! A plant with a point delay in the drift, integrated with fixed steps
//! no longer than the delay.

use funnel_control::sim::{ref_preset, simulate, SimConfig};
use funnel_control::systems::delay_example_system;
use funnel_control::verify::funnel_margin;
use funnel_control::{AlphaFn, Controller, DesignParams, FunnelFn, SwitchingFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = delay_example_system(0.5)?;
    let phi = FunnelFn::RecipExp { c0: 1.0, c1: 0.05, lambda: 1.0 };
    let ctrl = Controller::Funnel(DesignParams::new(phi, SwitchingFn::NegatedIdentity, AlphaFn::standard(), 1, 1)?);
    let traj = simulate(&plant, &ctrl, &ref_preset("sin", 1)?, &SimConfig::default())?;
    println!(
        "status {:?}, {} steps, epsilon = {:.4}, max |u| = {:.3}",
        traj.status,
        traj.stats.accepted,
        funnel_margin(&traj),
        traj.max_u_norm()
    );
    Ok(())
}
