//! Build the kEDMD bilinear surrogate, check its identities, predict,
//! and round-trip it through JSON.

use kbilinear::dataset::CollectionOptions;
use kbilinear::kernel::KernelSpec;
use kbilinear::pipeline::collect_and_fit;
use kbilinear::regress::LocalEstimate;
use kbilinear::surrogate::{BilinearModel, BilinearSurrogate};
use kbilinear::system::{flow, zone_temp, SamplingConfig};
use nalgebra::DVector;

pub fn run_example() -> kbilinear::error::Result<()> {
    let sys = zone_temp();
    let sampling = SamplingConfig::new(0.01, 100)?;
    let fitted = collect_and_fit(
        &sys,
        KernelSpec::new(1, 1, 1.0)?,
        sampling,
        CollectionOptions { d: 9, ..Default::default() },
    )?;
    let model = &fitted.surrogate;
    let images: Vec<_> = fitted.estimates.iter().map(LocalEstimate::f_hat).collect();
    println!("cond(K_X) = {:.3e}", model.report().condition);
    println!("max |A Phi(x_j) - Phi(f(x_j))| = {:.2e}", model.interpolation_residual(&images));
    println!("|A Phi(0) - Phi(0)| = {:.2e}", model.equilibrium_residual());

    // one step from x = 0.4 under u = -1.5
    let x = DVector::from_element(1, 0.4);
    let u = DVector::from_element(1, -1.5);
    let predicted = model.predict_step(&model.lift(&x), &u);
    let truth = model.lift(&flow(&sys, &sampling, &x, &u)?);
    println!("one-step lifted error = {:.3e}", (predicted - truth).norm());

    // twenty steps of a constant input from the origin
    let roll = model.rollout(&DVector::zeros(1), &vec![DVector::from_element(1, 1.0); 20]);
    println!("rollout: {} states, truncated = {}", roll.lifted.len(), roll.truncated);

    let path = std::env::temp_dir().join("kbilinear-model-example.json");
    model.save(&path)?;
    let back = BilinearSurrogate::load(&path)?;
    let psi = model.lift(&x);
    assert_eq!(model.predict_step(&psi, &u), back.predict_step(&psi, &u));
    println!("model written to {}", path.display());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
