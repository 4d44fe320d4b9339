//! Choosing `(φ, N, α)`, checking the initial condition and evaluating the
//! controller at a single point.

use funnel_control::{
    check_initial_condition, funnel_control, AlphaFn, DesignError, DesignParams, FunnelFn, InfoVector, InitialCheck,
    SwitchingFn,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phi = FunnelFn::RecipExp { c0: 5.0, c1: 0.1, lambda: 2.0 };
    let params = DesignParams::new(phi, SwitchingFn::NegatedIdentity, AlphaFn::standard(), 2, 2)?;
    println!("funnel radius: {:.3} at t=0, {:.3} as t grows", 1.0 / phi.eval(0.0), 1.0 / phi.eval(100.0));

    // stacked (e, ė) at t = 0
    let info = InfoVector::from_entries(vec![0.5, -1.0], 1)?;
    match check_initial_condition(&params, &info) {
        InitialCheck::Accepted => println!("initial error accepted"),
        InitialCheck::Rejected { level } => println!("initial error rejected at level {level}"),
    }
    let action = funnel_control(0.0, &info, &params)?;
    println!("w = {:.6}, u = {:.6}", action.w[0], action.u[0]);

    // an unbounded funnel needs every reference derivative fed back
    let poly = FunnelFn::Poly { a: 1.0, exponent: 2 };
    match DesignParams::new(poly, SwitchingFn::NegatedIdentity, AlphaFn::standard(), 2, 1) {
        Err(e @ DesignError::UnboundedFunnel { .. }) => println!("rejected: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
