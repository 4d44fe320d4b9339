//! Envelopes on the error derivatives that hold before any simulation,
//! checked against a triple-integrator run.

use funnel_control::bounds::{apriori_bounds, check_against_trajectory, BoundsInput};
use funnel_control::sim::{ref_preset, simulate, SimConfig};
use funnel_control::systems::integrator_chain;
use funnel_control::{AlphaFn, Controller, DesignParams, FunnelFn, SwitchingFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = FunnelFn::Affine { a: 1.0, b: 1.0 };
    let alpha = AlphaFn::standard();
    // y(0) = (0, 1, 0) matches sin t and its first two derivatives
    let input = BoundsInput::new(3, phi, alpha.clone(), vec![vec![0.0]; 3], 10.0);
    let bounds = apriori_bounds(&input)?;
    println!("mu0 = {:.6}", bounds.mu0);
    for (k, env) in bounds.envelopes.iter().enumerate() {
        println!("phi(t)|e^({k})(t)| <= {env:.6}");
    }

    let plant = integrator_chain(1, 3, vec![0.0, 1.0, 0.0])?;
    let ctrl = Controller::Funnel(DesignParams::new(phi, SwitchingFn::NegatedIdentity, alpha, 3, 3)?);
    let cfg = SimConfig { sample_dt: 0.0, ..SimConfig::default() };
    let traj = simulate(&plant, &ctrl, &ref_preset("sin", 1)?, &cfg)?;
    for c in check_against_trajectory(&bounds, &traj)? {
        println!("k = {}: worst observed / envelope = {:.4} ({})", c.k, c.worst_ratio, if c.pass { "ok" } else { "violated" });
    }
    Ok(())
}
