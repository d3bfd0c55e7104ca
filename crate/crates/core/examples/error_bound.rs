//! Residual bound coefficients for a fitted model, the proportional
//! bound, and a check against the true residual on a grid.

use kbilinear::bounds::{compute_constants, eval_bound, proportional, residual_norms, BoundInputs, ValidationGrid};
use kbilinear::dataset::CollectionOptions;
use kbilinear::kernel::KernelSpec;
use kbilinear::pipeline::collect_and_fit;
use kbilinear::system::{zone_temp, SamplingConfig};
use nalgebra::DVector;

pub fn run_example() -> kbilinear::error::Result<()> {
    let sys = zone_temp();
    let sampling = SamplingConfig::new(0.01, 100)?;
    let fitted = collect_and_fit(
        &sys,
        KernelSpec::new(1, 1, 1.0)?,
        sampling,
        CollectionOptions { d: 5, ..Default::default() },
    )?;

    let inputs = BoundInputs::gather(&fitted, &sys, 2001, 2001)?;
    println!(
        "L_G = {:.4}, G_bar = {:.4}, D_phi = {:.4}, ||Phi|| = {:.4}, ||K^-1|| = {:.4}, h_X = {}",
        inputs.l_g, inputs.g_bar, inputs.d_phi, inputs.phi_norm, inputs.kinv_norm, inputs.h_x
    );
    let c = compute_constants(&inputs, Some(1.0), Some(1.0))?;
    println!(
        "c_x = {:.4e}, c_u = {:.4e}, c_xx = {:.4e}, c_xu = {:.4e}, c_uu = {:.4e}, C3 = {:.4}",
        c.c_x, c.c_u, c.c_xx, c.c_xu, c.c_uu, c.c3
    );
    let p = proportional(&c);
    println!("proportional: c~_x = {:.4e}, c~_u = {:.4e}", p.c_tilde_x, p.c_tilde_u);

    let z = DVector::zeros(1);
    println!("bound at the origin = {}", eval_bound(&c, &z, &z));

    let grid = ValidationGrid { state_points: 41, input_points: 41 };
    let samples = residual_norms(&fitted.surrogate, &sys, &sampling, &grid.points(&sys))?;
    let margin = samples
        .iter()
        .map(|s| eval_bound(&c, &s.x, &s.u) - s.residual)
        .fold(f64::INFINITY, f64::min);
    println!("min margin over {} grid points = {margin:.4e}", samples.len());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
