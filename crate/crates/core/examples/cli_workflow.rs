//! The `kbilinear` commands as library calls: collect, fit, benchmark and
//! scaling study from one TOML config.

use kbilinear::experiment::{cmd_benchmark_prediction, cmd_collect, cmd_fit, cmd_scaling_study, ExperimentConfig};

const CONFIG: &str = r#"
system = "zone_temp"

[sampling]
dt = 0.01

[data]
d = [5, 9]
seed = 11

[benchmark]
horizon = 30
realizations = 5

[scaling]
dt_values = [0.1, 0.05, 0.025, 0.0125]
d_values = [5, 9]
state_points = 21
input_points = 11
hessian_grid = 501
constants_grid = 501
"#;

pub fn run_example() -> kbilinear::error::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let out = std::env::temp_dir().join("kbilinear-cli-example");
    print!("{}", cmd_collect(&cfg, &out)?);
    print!("{}", cmd_fit(&cfg, Some(&out), &out)?);
    print!("{}", cmd_benchmark_prediction(&cfg, &out)?);
    print!("{}", cmd_scaling_study(&cfg, &out)?);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
