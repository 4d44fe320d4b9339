//! Relative degree, high-frequency gain, normal form and zero dynamics of
//! the mass-on-car plant for two ramp angles.

use funnel_control::linear::{analyze, byrnes_isidori, relative_degree};
use funnel_control::systems::mass_on_car_state_space;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for deg in [0.0_f64, 45.0] {
        let ss = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, deg.to_radians())?;
        println!("theta = {deg} deg");
        print!("{}", analyze(&ss)?);
        if let Some((r, _)) = relative_degree(&ss) {
            let bi = byrnes_isidori(&ss, r)?;
            println!("Q = {:.4}", bi.q);
        }
    }
    Ok(())
}
