//! Open-loop prediction error of kEDMD against the kernel-dictionary and
//! monomial baselines, from the origin under uniform random inputs.

use kbilinear::experiment::{cmd_benchmark_prediction, ExperimentConfig, Method};

pub fn run_example() -> kbilinear::error::Result<()> {
    let cfg = ExperimentConfig::default();
    let out = std::env::temp_dir().join("kbilinear-prediction-benchmark");
    let summary = cmd_benchmark_prediction(&cfg, &out)?;
    print!("{summary}");

    let small = summary.time_averaged(Method::Kedmd, 5).unwrap();
    let large = summary.time_averaged(Method::Kedmd, 19).unwrap();
    let base = summary.time_averaged(Method::KernelBaseline, 5).unwrap();
    println!("kEDMD d=19 / d=5 = {:.3}", large / small);
    println!("kEDMD / kernel baseline at d=5 = {:.3}", small / base);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
