//! Numerical probing of the high-gain property for a few input maps.

use funnel_control::systems::probe_f;
use funnel_control::verify::{high_gain_verdict, ChiProbe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let probe = ChiProbe::new(2, 0, 0, 0.5);
    let definite = |_: &[f64], _: &[f64], u: &[f64]| vec![2.0 * u[0] + u[1], -u[0] + u[1]];
    let negative = |_: &[f64], _: &[f64], u: &[f64]| vec![-u[0], -3.0 * u[1]];
    let singular = |_: &[f64], _: &[f64], u: &[f64]| vec![u[0], 0.0];
    for (name, f) in [
        ("[[2, 1], [-1, 1]]", &definite as &dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64>),
        ("diag(-1, -3)", &negative),
        ("diag(1, 0)", &singular),
    ] {
        let report = high_gain_verdict(f, &probe, 1e6)?;
        println!("{name:<20} {}", report.side.as_str());
    }

    let scalar = ChiProbe::new(1, 0, 0, 0.5);
    let oscillating = |_: &[f64], _: &[f64], u: &[f64]| vec![probe_f(u[0])];
    println!("{:<20} {}", "u sin(ln(1+|u|))", high_gain_verdict(&oscillating, &scalar, 1e6)?.side.as_str());
    Ok(())
}
