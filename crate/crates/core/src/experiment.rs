//! Experiment configuration and the batch commands behind the `kbilinear`
//! binary.
//!
//! A config is a TOML file; every key has a default, so an empty file runs
//! the zone temperature setup:
//!
//! ```toml
//! system = "zone_temp"
//!
//! [kernel]
//! n = 1
//! s = 1
//! scale = 1.0
//!
//! [sampling]
//! dt = 0.01
//! substeps = 100
//!
//! [data]
//! d = [5, 7, 9, 11, 13, 15, 17, 19]   # or a single number
//! d_j = 2
//! seed = 0
//! sigma_threshold = 0.1
//!
//! [bounds]
//! c1 = 1.0
//! c2 = 1.0
//!
//! [benchmark]
//! horizon = 100
//! realizations = 20
//! monomial_degree = 3
//!
//! [scaling]
//! dt_values = [0.1, 0.05, 0.025, 0.0125]
//! d_values = [5, 9, 17]
//! scaling_dt = 0.005
//! state_points = 101
//! input_points = 101
//! ```
//!
//! Commands that need a single center count use the first entry of
//! `data.d`.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{validate_empirically, ValidationGrid, ValidationPlan, ValidationReport};
use crate::dataset::{CollectionOptions, Dataset, DEFAULT_SIGMA_THRESHOLD};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec, DEFAULT_HESSIAN_GRID};
use crate::pipeline::{collect_and_fit, fit, Fitted};
use crate::regress::LocalEstimate;
use crate::surrogate::{build_baseline, BilinearModel, Dictionary};
use crate::system::{flow, system_by_name, ControlAffineSystem, SamplingConfig, DEFAULT_CONSTANTS_GRID};

pub const MODEL_FILE: &str = "model.json";
pub const BENCHMARK_FILE: &str = "prediction_error.csv";
pub const SCALING_FILE: &str = "scaling.csv";

/// Offsets the benchmark input stream from the data-collection stream.
const INPUT_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: String,
    pub kernel: KernelSpec,
    pub sampling: SamplingConfig,
    pub data: DataConfig,
    pub bounds: BoundsConfig,
    pub benchmark: BenchmarkConfig,
    pub scaling: ScalingConfig,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterCounts {
    One(usize),
    Many(Vec<usize>),
}

impl CenterCounts {
    pub fn values(&self) -> Vec<usize> {
        match self {
            Self::One(d) => vec![*d],
            Self::Many(ds) => ds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub d: CenterCounts,
    pub d_j: usize,
    pub seed: u64,
    pub sigma_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub c1: f64,
    pub c2: f64,
    pub h0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub horizon: usize,
    pub realizations: usize,
    pub monomial_degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub dt_values: Vec<f64>,
    pub d_values: Vec<usize>,
    pub scaling_dt: f64,
    pub state_points: usize,
    pub input_points: usize,
    pub hessian_grid: usize,
    pub constants_grid: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: "zone_temp".into(),
            kernel: KernelSpec { n: 1, s: 1, scale: 1.0 },
            sampling: SamplingConfig { dt: 0.01, substeps: 100 },
            data: DataConfig::default(),
            bounds: BoundsConfig::default(),
            benchmark: BenchmarkConfig::default(),
            scaling: ScalingConfig::default(),
            output_dir: None,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            d: CenterCounts::Many((5..=19).step_by(2).collect()),
            d_j: 2,
            seed: 0,
            sigma_threshold: DEFAULT_SIGMA_THRESHOLD,
        }
    }
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { c1: 1.0, c2: 1.0, h0: None }
    }
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            realizations: 20,
            monomial_degree: 3,
        }
    }
}

impl Default for ScalingConfig {
    fn default() -> Self {
        let plan = ValidationPlan::default();
        Self {
            dt_values: plan.dt_values,
            d_values: plan.d_values,
            scaling_dt: plan.scaling_dt,
            state_points: plan.grid.state_points,
            input_points: plan.grid.input_points,
            hessian_grid: DEFAULT_HESSIAN_GRID,
            constants_grid: DEFAULT_CONSTANTS_GRID,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let sys = system_by_name(&self.system)?;
        Kernel::new(self.kernel)?;
        self.sampling.validate()?;
        if self.kernel.n != sys.state_dim() {
            return bad(format!(
                "kernel.n = {} but system {} has {} states",
                self.kernel.n,
                self.system,
                sys.state_dim()
            ));
        }
        let ds = self.data.d.values();
        if ds.is_empty() || ds.iter().any(|d| *d < 2) {
            return bad("data.d must list center counts >= 2".into());
        }
        if self.data.d_j < sys.input_dim() + 1 {
            return bad(format!("data.d_j must be at least {}", sys.input_dim() + 1));
        }
        if !(self.data.sigma_threshold > 0.0) {
            return bad("data.sigma_threshold must be positive".into());
        }
        for (name, v) in [("bounds.c1", self.bounds.c1), ("bounds.c2", self.bounds.c2)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be nonnegative"));
            }
        }
        if self.benchmark.horizon == 0 || self.benchmark.realizations == 0 {
            return bad("benchmark.horizon and benchmark.realizations must be positive".into());
        }
        if self.benchmark.monomial_degree == 0 {
            return bad("benchmark.monomial_degree must be positive".into());
        }
        let sc = &self.scaling;
        if sc.dt_values.iter().chain([&sc.scaling_dt]).any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("scaling sampling periods must be positive".into());
        }
        if sc.d_values.iter().any(|d| *d < 2) {
            return bad("scaling.d_values must be >= 2".into());
        }
        if sc.state_points < 2 || sc.input_points < 2 || sc.hessian_grid < 2 || sc.constants_grid < 2 {
            return bad("scaling grid sizes must be >= 2".into());
        }
        Ok(())
    }

    pub fn system(&self) -> Result<ControlAffineSystem> {
        system_by_name(&self.system)
    }

    /// Center count for single-model commands.
    pub fn primary_d(&self) -> usize {
        self.data.d.values()[0]
    }

    pub fn collection(&self, d: usize) -> CollectionOptions {
        CollectionOptions {
            d,
            d_j: self.data.d_j,
            seed: self.data.seed,
            sigma_threshold: self.data.sigma_threshold,
        }
    }

    pub fn validation_plan(&self) -> ValidationPlan {
        ValidationPlan {
            grid: ValidationGrid {
                state_points: self.scaling.state_points,
                input_points: self.scaling.input_points,
            },
            dt_values: self.scaling.dt_values.clone(),
            d_values: self.scaling.d_values.clone(),
            scaling_dt: self.scaling.scaling_dt,
            c1: Some(self.bounds.c1),
            c2: Some(self.bounds.c2),
            h0: self.bounds.h0,
            hessian_grid: self.scaling.hessian_grid,
            constants_grid: self.scaling.constants_grid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectSummary {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

impl fmt::Display for CollectSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ds = &self.dataset;
        writeln!(
            f,
            "{}: {} centers, {} triplets, h_X = {:.6}",
            ds.system,
            ds.centers.len(),
            ds.num_triplets(),
            ds.centers.fill_distance
        )?;
        for t in &ds.triplets {
            writeln!(f, "  center {:>3}  sigma_min = {:.6}", t.center_index, t.sigma_min)?;
        }
        Ok(())
    }
}

/// Generate a dataset and write it to `out`.
pub fn cmd_collect(cfg: &ExperimentConfig, out: &Path) -> Result<CollectSummary> {
    let sys = cfg.system()?;
    let mut warnings = Vec::new();
    if cfg.data.d.values().len() > 1 {
        warnings.push(format!("data.d lists several counts; collecting d = {}", cfg.primary_d()));
    }
    let dataset = Dataset::generate(&sys, cfg.kernel, cfg.sampling, cfg.collection(cfg.primary_d()))?;
    if dataset.centers.origin_adjusted {
        warnings.push("center grid shifted so that the origin is a center".into());
    }
    if !dataset.fill_distance_ok() {
        return Err(Error::Validation(format!(
            "fill distance {:.4} is not below half the kernel scale {}",
            dataset.centers.fill_distance, cfg.kernel.scale
        )));
    }
    dataset.save(out)?;
    Ok(CollectSummary { dataset, warnings })
}

#[derive(Debug, Clone)]
pub struct FitSummary {
    pub fitted: Fitted,
    pub interpolation_residual: f64,
    pub model_path: PathBuf,
    pub warnings: Vec<String>,
}

impl fmt::Display for FitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.fitted.surrogate.report();
        writeln!(f, "model: {}", self.model_path.display())?;
        writeln!(f, "cond(K_X) = {:.4e}, lambda_min = {:.4e}", r.condition, r.min_eigenvalue)?;
        writeln!(f, "interpolation residual = {:.3e}", self.interpolation_residual)
    }
}

/// Fit a model to the dataset in `dataset_dir`, or to a freshly collected
/// one when none is given, and write `model.json` to `out`.
pub fn cmd_fit(cfg: &ExperimentConfig, dataset_dir: Option<&Path>, out: &Path) -> Result<FitSummary> {
    let dataset = match dataset_dir {
        Some(dir) => Dataset::load(dir)?,
        None => {
            let ds = Dataset::generate(&cfg.system()?, cfg.kernel, cfg.sampling, cfg.collection(cfg.primary_d()))?;
            ds.save(out)?;
            ds
        }
    };
    let fitted = fit(dataset)?;
    let images: Vec<_> = fitted.estimates.iter().map(LocalEstimate::f_hat).collect();
    let interpolation_residual = fitted.surrogate.interpolation_residual(&images);
    fs::create_dir_all(out)?;
    let model_path = out.join(MODEL_FILE);
    fitted.surrogate.save(&model_path)?;
    let warnings = fitted.surrogate.report().warnings.clone();
    Ok(FitSummary {
        fitted,
        interpolation_residual,
        model_path,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "kEDMD")]
    Kedmd,
    #[serde(rename = "kernel_baseline")]
    KernelBaseline,
    #[serde(rename = "monomial_baseline")]
    MonomialBaseline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Kedmd, Method::KernelBaseline, Method::MonomialBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kedmd => "kEDMD",
            Self::KernelBaseline => "kernel_baseline",
            Self::MonomialBaseline => "monomial_baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of the prediction-error CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub method: Method,
    pub d: usize,
    pub t: usize,
    pub mean_err: f64,
    pub min_err: f64,
    pub max_err: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSummary {
    pub rows: Vec<ErrorRow>,
    pub csv_path: PathBuf,
    pub warnings: Vec<String>,
}

impl BenchmarkSummary {
    /// Mean over `t` of the mean error curve.
    pub fn time_averaged(&self, method: Method, d: usize) -> Option<f64> {
        let errs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.d == d)
            .map(|r| r.mean_err)
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }

    pub fn d_values(&self) -> Vec<usize> {
        let ds: std::collections::BTreeSet<usize> = self.rows.iter().map(|r| r.d).collect();
        ds.into_iter().collect()
    }
}

impl fmt::Display for BenchmarkSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "time-averaged mean prediction error ({})", self.csv_path.display())?;
        write!(f, "{:>4}", "d")?;
        for m in Method::ALL {
            write!(f, " {:>18}", m.name())?;
        }
        writeln!(f)?;
        for d in self.d_values() {
            write!(f, "{d:>4}")?;
            for m in Method::ALL {
                write!(f, " {:>18.6e}", self.time_averaged(m, d).unwrap_or(f64::NAN))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Uniform input sequences, one per realization, shared by every method
/// and center count.
pub fn input_realizations(system: &ControlAffineSystem, seed: u64, realizations: usize, horizon: usize) -> Vec<Vec<DVector<f64>>> {
    (0..realizations)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INPUT_STREAM_SALT);
            rng.set_stream(r as u64);
            (0..horizon).map(|_| system.input_box().sample(&mut rng)).collect()
        })
        .collect()
}

/// `||Psi_t - Psi(x(t))||` for `t = 0..=horizon`; entries after a
/// non-finite prediction are infinite.
fn error_curve(model: &dyn BilinearModelDyn, truth: &[DVector<f64>], inputs: &[DVector<f64>]) -> Vec<f64> {
    let roll = model.rollout_dyn(&truth[0], inputs);
    truth
        .iter()
        .enumerate()
        .map(|(t, x)| match roll.get(t) {
            Some(psi) => (psi - model.lift_dyn(x)).norm(),
            None => f64::INFINITY,
        })
        .collect()
}

/// Object-safe view of [`BilinearModel`] for mixing model types.
trait BilinearModelDyn: Sync {
    fn rollout_dyn(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>>;
    fn lift_dyn(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl<T: BilinearModel + Sync> BilinearModelDyn for T {
    fn rollout_dyn(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.rollout(x0, inputs).lifted
    }

    fn lift_dyn(&self, x: &DVector<f64>) -> DVector<f64> {
        self.lift(x)
    }
}

fn true_trajectory(
    system: &ControlAffineSystem,
    sampling: &SamplingConfig,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let mut xs = Vec::with_capacity(inputs.len() + 1);
    xs.push(x0.clone());
    for u in inputs {
        let next = flow(system, sampling, xs.last().expect("nonempty"), u)?;
        xs.push(next);
    }
    Ok(xs)
}

/// Open-loop prediction errors of kEDMD and both baselines from the
/// origin, for every configured center count, written as
/// `method,d,t,mean_err,min_err,max_err` to `out/prediction_error.csv`.
pub fn cmd_benchmark_prediction(cfg: &ExperimentConfig, out: &Path) -> Result<BenchmarkSummary> {
    let sys = cfg.system()?;
    let bench = cfg.benchmark;
    let inputs = input_realizations(&sys, cfg.data.seed, bench.realizations, bench.horizon);
    let x0 = DVector::zeros(sys.state_dim());
    let truths = inputs
        .par_iter()
        .map(|us| true_trajectory(&sys, &cfg.sampling, &x0, us))
        .collect::<Result<Vec<_>>>()?;

    let per_d = cfg
        .data
        .d
        .values()
        .into_par_iter()
        .map(|d| -> Result<(Vec<ErrorRow>, Vec<String>)> {
            let fitted = collect_and_fit(&sys, cfg.kernel, cfg.sampling, cfg.collection(d))?;
            let kernel_dict = Dictionary::kernel_features(&cfg.kernel, fitted.surrogate.centers())?;
            let kernel_base = build_baseline(&fitted.dataset.triplets, kernel_dict)?;
            let mono_base = build_baseline(
                &fitted.dataset.triplets,
                Dictionary::monomials(sys.state_dim(), bench.monomial_degree),
            )?;
            let mut warnings: Vec<String> = fitted.surrogate.report().warnings.clone();
            warnings.extend(kernel_base.warnings.iter().cloned());
            warnings.extend(mono_base.warnings.iter().cloned());
            let warnings = warnings.into_iter().map(|w| format!("d = {d}: {w}")).collect();
            let models: [(Method, &dyn BilinearModelDyn); 3] = [
                (Method::Kedmd, &fitted.surrogate),
                (Method::KernelBaseline, &kernel_base),
                (Method::MonomialBaseline, &mono_base),
            ];
            let mut rows = Vec::new();
            for (method, model) in models {
                let curves: Vec<Vec<f64>> = inputs
                    .par_iter()
                    .zip(&truths)
                    .map(|(us, xs)| error_curve(model, xs, us))
                    .collect();
                for t in 0..=bench.horizon {
                    let col: Vec<f64> = curves.iter().map(|c| c[t]).collect();
                    rows.push(ErrorRow {
                        method,
                        d,
                        t,
                        mean_err: col.iter().sum::<f64>() / col.len() as f64,
                        min_err: col.iter().copied().fold(f64::INFINITY, f64::min),
                        max_err: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    });
                }
            }
            Ok((rows, warnings))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (r, w) in per_d {
        rows.extend(r);
        warnings.extend(w);
    }
    rows.sort_by_key(|r| (r.method, r.d, r.t));
    fs::create_dir_all(out)?;
    let csv_path = out.join(BENCHMARK_FILE);
    write_error_csv(&csv_path, &rows)?;
    Ok(BenchmarkSummary { rows, csv_path, warnings })
}

fn write_error_csv(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "d", "t", "mean_err", "min_err", "max_err"])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.d.to_string(),
            r.t.to_string(),
            format!("{:.12e}", r.mean_err),
            format!("{:.12e}", r.min_err),
            format!("{:.12e}", r.max_err),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ScalingSummary {
    pub report: ValidationReport,
    pub out: PathBuf,
}

impl fmt::Display for ScalingSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.report;
        writeln!(f, "{} with d = {}, dt = {}, h_X = {:.4}", r.system, r.d, r.dt, r.h_x)?;
        writeln!(
            f,
            "grid residual: max {:.4e}, mean {:.4e}, at origin {:.1e}",
            r.grid.max_residual, r.grid.mean_residual, r.grid.origin_residual
        )?;
        if let Some(s) = &r.dt_scaling {
            writeln!(f, "dt slope at centers: residual {:.3}, regression gap {:.3}", s.residual_slope, s.gap_slope)?;
        }
        if let Some(s) = &r.fill_scaling {
            let pairs: Vec<String> = s.samples.iter().map(|p| format!("d={} {:.3e}", p.d, p.max_residual)).collect();
            writeln!(f, "fill-distance study at dt = {}: {} (slope in h_X {:.3})", s.dt, pairs.join(", "), s.slope)?;
        }
        if let Some(b) = &r.bounds {
            writeln!(
                f,
                "bound with C1 = {}, C2 = {}: min margin {:.4e}, {} violations; c~_x = {:.4e}, c~_u = {:.4e}",
                b.constants.c1, b.constants.c2, b.min_margin, b.violations, b.proportional.c_tilde_x, b.proportional.c_tilde_u
            )?;
        }
        match r.calibrated_c1 {
            Some(c1) => writeln!(f, "calibrated C1 = {c1:.6e} (C2 = {})", r.calibration_c2)?,
            None => writeln!(f, "no C1 makes the bound hold (C2 = {})", r.calibration_c2)?,
        }
        writeln!(f, "written to {}", self.out.display())
    }
}

/// Run the empirical validation and write `validation.json`,
/// `validation_grid.csv` and `scaling.csv` to `out`.
pub fn cmd_scaling_study(cfg: &ExperimentConfig, out: &Path) -> Result<ScalingSummary> {
    let sys = cfg.system()?;
    let fitted = collect_and_fit(&sys, cfg.kernel, cfg.sampling, cfg.collection(cfg.primary_d()))?;
    let report = validate_empirically(&fitted, &sys, &cfg.validation_plan())?;
    report.write(out)?;
    let mut file = fs::File::create(out.join(SCALING_FILE))?;
    writeln!(file, "study,dt,d,h_x,max_residual,max_regression_gap,gap_bound")?;
    if let Some(s) = &report.dt_scaling {
        for p in &s.samples {
            writeln!(
                file,
                "dt,{},{},,{:.12e},{:.12e},{:.12e}",
                p.dt, s.d, p.max_center_residual, p.max_regression_gap, p.gap_bound
            )?;
        }
    }
    if let Some(s) = &report.fill_scaling {
        for p in &s.samples {
            writeln!(file, "fill,{},{},{:.12e},{:.12e},,", s.dt, p.d, p.h_x, p.max_residual)?;
        }
    }
    Ok(ScalingSummary {
        report,
        out: out.to_path_buf(),
    })
}
