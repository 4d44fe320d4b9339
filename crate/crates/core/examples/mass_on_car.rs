//! Mass-spring system on a car at 45 degrees (relative degree two), funnel
//! controller against the relative-degree-two baseline.

use funnel_control::sim::{ref_preset, simulate, SimConfig};
use funnel_control::systems::mass_on_car;
use funnel_control::verify::compare_runs;
use funnel_control::{AlphaFn, Controller, DesignParams, FunnelFn, SwitchingFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (_, plant) = mass_on_car(4.0, 1.0, 2.0, 1.0, std::f64::consts::FRAC_PI_4, &[0.0; 4])?;
    let phi = FunnelFn::RecipExp { c0: 5.0, c1: 0.1, lambda: 2.0 };
    let funnel = Controller::Funnel(DesignParams::new(phi, SwitchingFn::NegatedIdentity, AlphaFn::standard(), 2, 2)?);
    let baseline = Controller::BaselineR2 { phi, phi1: phi, alpha: AlphaFn::standard() };
    let yref = ref_preset("cos", 1)?;
    let cfg = SimConfig::default();

    let a = simulate(&plant, &funnel, &yref, &cfg)?;
    let b = simulate(&plant, &baseline, &yref, &cfg)?;
    let cmp = compare_runs(&a, &b);
    for m in [&cmp.a, &cmp.b] {
        println!("{:<40} epsilon = {:.4}  max|u| = {:.3}  L2 = {:.3}", m.label, m.epsilon, m.max_u, m.l2_effort);
    }
    println!("largest gap between the two errors: {:.3e}", cmp.max_error_gap);
    Ok(())
}
