//! Bilinear EDMD baselines fitted by pooled least squares on the same
//! data: kernel features and cubic monomials.

use kbilinear::dataset::CollectionOptions;
use kbilinear::kernel::KernelSpec;
use kbilinear::pipeline::collect_and_fit;
use kbilinear::surrogate::{build_baseline, BilinearModel, Dictionary};
use kbilinear::system::{flow, zone_temp, SamplingConfig};
use nalgebra::DVector;

pub fn run_example() -> kbilinear::error::Result<()> {
    let sys = zone_temp();
    let sampling = SamplingConfig::new(0.01, 100)?;
    let spec = KernelSpec::new(1, 1, 1.0)?;
    let fitted = collect_and_fit(&sys, spec, sampling, CollectionOptions { d: 5, ..Default::default() })?;
    let triplets = &fitted.dataset.triplets;

    let kernel = build_baseline(triplets, Dictionary::kernel_features(&spec, fitted.surrogate.centers())?)?;
    let mono = build_baseline(triplets, Dictionary::monomials(1, 3))?;
    for w in kernel.warnings.iter().chain(&mono.warnings) {
        println!("warning: {w}");
    }

    let x = DVector::from_element(1, -0.6);
    let u = DVector::from_element(1, 0.8);
    let next = flow(&sys, &sampling, &x, &u)?;
    let one_step = |m: &dyn Fn(&DVector<f64>) -> (DVector<f64>, DVector<f64>)| {
        let (pred, truth) = m(&next);
        (pred - truth).norm()
    };
    println!(
        "one-step lifted error: kEDMD {:.3e}, kernel baseline {:.3e}, monomial baseline {:.3e}",
        one_step(&|xn| (fitted.surrogate.predict_step(&fitted.surrogate.lift(&x), &u), fitted.surrogate.lift(xn))),
        one_step(&|xn| (kernel.predict_step(&kernel.lift(&x), &u), kernel.lift(xn))),
        one_step(&|xn| (mono.predict_step(&mono.lift(&x), &u), mono.lift(xn))),
    );
    println!("monomial A =\n{}", mono.a());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
