//! Dead-zone input with an ISS internal state. An unbounded funnel `t²`
//! with the reference derivative fed back forces the error to zero.

use funnel_control::sim::{ref_preset, simulate, SimConfig};
use funnel_control::systems::{dead_zone_example_system, DeadZone};
use funnel_control::verify::{asymptotic_tracking_check, funnel_margin};
use funnel_control::{AlphaFn, Controller, DesignParams, FunnelFn, SwitchingFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = dead_zone_example_system([1.0, -2.0, 1.0, 2.0, 1.0], DeadZone::unit(), [0.0, 0.0], 0.0);
    let phi = FunnelFn::Poly { a: 1.0, exponent: 2 };
    let alpha = AlphaFn::standard();
    let ctrl = Controller::Funnel(DesignParams::new(phi, SwitchingFn::SurjectiveProbe, alpha.clone(), 2, 2)?);
    let traj = simulate(&plant, &ctrl, &ref_preset("cos", 1)?, &SimConfig::default())?;

    let last = traj.len() - 1;
    println!("status {:?}, epsilon = {:.4}", traj.status, funnel_margin(&traj));
    println!("|e(10)| = {:.3e}, funnel radius 1/phi(10) = {:.3e}", traj.e_deriv(last, 0)[0].abs(), 1.0 / traj.phi[last]);
    println!("{}", asymptotic_tracking_check(&traj, &alpha, 1, 1.0)?);
    Ok(())
}
