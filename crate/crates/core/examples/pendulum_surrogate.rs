//! Two-state plant: kEDMD on a 5 x 5 center grid with a smoother kernel,
//! predicted open loop against the true flow.

use kbilinear::dataset::CollectionOptions;
use kbilinear::experiment::input_realizations;
use kbilinear::kernel::KernelSpec;
use kbilinear::pipeline::collect_and_fit;
use kbilinear::surrogate::BilinearModel;
use kbilinear::system::{flow, pendulum, SamplingConfig};
use nalgebra::DVector;

pub fn run_example() -> kbilinear::error::Result<()> {
    let sys = pendulum();
    let sampling = SamplingConfig::new(0.01, 20)?;
    let fitted = collect_and_fit(
        &sys,
        KernelSpec::new(2, 2, 1.5)?,
        sampling,
        CollectionOptions { d: 25, d_j: 3, seed: 1, sigma_threshold: 0.1 },
    )?;
    let model = &fitted.surrogate;
    println!("{} centers, h_X = {:.4}, cond(K_X) = {:.3e}", model.centers().len(), fitted.dataset.centers.fill_distance, model.report().condition);

    let inputs = &input_realizations(&sys, 0, 1, 50)[0];
    let x0 = DVector::from_vec(vec![0.3, -0.2]);
    let roll = model.rollout(&x0, inputs);
    let mut x = x0;
    for (t, u) in inputs.iter().enumerate() {
        x = flow(&sys, &sampling, &x, u)?;
        if (t + 1) % 10 == 0 {
            println!("t = {:>2}  |Psi_t - Psi(x_t)| = {:.3e}", t + 1, (&roll.lifted[t + 1] - model.lift(&x)).norm());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
