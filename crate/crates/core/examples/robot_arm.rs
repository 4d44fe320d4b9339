//! Two-link manipulator (two inputs, relative degree two) tracking
//! `(sin t, sin 2t)`.

use funnel_control::sim::{ref_preset, simulate, SimConfig};
use funnel_control::systems::robot_manipulator;
use funnel_control::verify::funnel_margin;
use funnel_control::{AlphaFn, Controller, DesignParams, FunnelFn, SwitchingFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arm = robot_manipulator(1.0, 1.0, 1.0, 1.0, 9.81)?;
    let phi = FunnelFn::RecipExp { c0: 4.0, c1: 0.1, lambda: 2.0 };
    let ctrl = Controller::Funnel(DesignParams::new(phi, SwitchingFn::NegatedIdentity, AlphaFn::standard(), 2, 2)?);
    let traj = simulate(&arm, &ctrl, &ref_preset("sin-sin2", 2)?, &SimConfig::default())?;

    println!("status {:?}, epsilon = {:.4}, max |u| = {:.2}", traj.status, funnel_margin(&traj), traj.max_u_norm());
    for t in [0.0, 1.0, 5.0, 10.0] {
        let i = traj.index_at(t).min(traj.len() - 1);
        let e = traj.e_deriv(i, 0);
        println!("t = {:5.2}  e = ({:+.2e}, {:+.2e})  radius = {:.3}", traj.t[i], e[0], e[1], 1.0 / traj.phi[i]);
    }
    Ok(())
}
