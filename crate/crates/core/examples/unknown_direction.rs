//! A scalar plant whose gain `sin(ln(1+|u|))` changes sign infinitely often.
//! Both `N(s) = s` and `N(s) = -s` succeed; they settle on different
//! input regions.

use funnel_control::sim::{ref_preset, simulate, SimConfig};
use funnel_control::systems::probe_example_system;
use funnel_control::verify::funnel_margin;
use funnel_control::{AlphaFn, Controller, DesignParams, FunnelFn, SwitchingFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plant = probe_example_system(1.0);
    let phi = FunnelFn::Poly { a: 1.0, exponent: 2 };
    for sigma in [-1.0, 1.0] {
        let ctrl = Controller::Funnel(DesignParams::new(phi, SwitchingFn::Scaled(sigma), AlphaFn::standard(), 1, 1)?);
        let traj = simulate(&plant, &ctrl, &ref_preset("sin", 1)?, &SimConfig::default())?;
        let tail: Vec<f64> = (traj.index_at(5.0)..traj.len()).map(|i| traj.u[i][0]).collect();
        let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &u| (l.min(u), h.max(u)));
        println!(
            "sigma = {sigma:+}: epsilon = {:.3}, |e(10)| = {:.2e}, u on [5, 10] in [{lo:.2}, {hi:.2}]",
            funnel_margin(&traj),
            traj.e_deriv(traj.len() - 1, 0)[0].abs()
        );
    }
    Ok(())
}
