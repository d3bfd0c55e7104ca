//! Center placement, fill distance, excitation-checked input design, data
//! collection, and dataset persistence.
//!
//! A dataset on disk is a directory with three files:
//!
//! * `manifest.json`: kernel spec, sampling, seed, system name and boxes
//! * `centers.csv`: columns `j, x_1..x_n`
//! * `triplets.csv`: columns `j, l, u_1..u_m, xplus_1..xplus_n`
//!
//! Floats are written with 17 significant digits so a load reproduces them
//! bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{per_axis_count, tensor_product, BoxDomain};
use crate::error::{Error, Result};
use crate::kernel::{check_distinct, KernelSpec};
use crate::system::{flow, ControlAffineSystem, SamplingConfig};

pub const DEFAULT_SIGMA_THRESHOLD: f64 = 0.1;
pub const DEFAULT_FILL_RESOLUTION: usize = 10_001;
pub const MAX_EXCITATION_ATTEMPTS: usize = 100;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CENTERS_FILE: &str = "centers.csv";
pub const TRIPLETS_FILE: &str = "triplets.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet {
    /// Pairwise distinct centers, `points[0]` is the origin.
    pub points: Vec<DVector<f64>>,
    pub domain: BoxDomain,
    pub fill_distance: f64,
    pub fill_resolution: usize,
    /// True when a grid point had to be moved onto the origin.
    pub origin_adjusted: bool,
}

impl CenterSet {
    /// Validates the origin-first and distinctness invariants and computes
    /// the fill distance over `domain`.
    pub fn new(points: Vec<DVector<f64>>, domain: BoxDomain, fill_resolution: usize) -> Result<Self> {
        validate_centers(&points, domain.dim())?;
        let fill_distance = fill_distance(&points, &domain, fill_resolution)?;
        Ok(Self {
            points,
            domain,
            fill_distance,
            fill_resolution,
            origin_adjusted: false,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

fn validate_centers(points: &[DVector<f64>], n: usize) -> Result<()> {
    let first = points
        .first()
        .ok_or_else(|| Error::Validation("center set is empty".into()))?;
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    if first.iter().any(|v| *v != 0.0) {
        return Err(Error::Validation(format!(
            "first center must be the origin, got {:?}",
            first.as_slice()
        )));
    }
    check_distinct(points)
}

/// Uniform grid of centers with the origin placed first.
///
/// In one dimension the grid has `d` points with spacing
/// `(x_max - x_min) / (d - 1)`. In `n > 1` dimensions a tensor grid with
/// the smallest per-axis count `k` satisfying `k^n >= d` is used. On each
/// axis the grid point closest to zero is snapped to exactly zero; if that
/// moves it by more than rounding error, `origin_adjusted` is set.
pub fn build_centers(domain: &BoxDomain, d: usize) -> Result<CenterSet> {
    build_centers_with_resolution(domain, d, DEFAULT_FILL_RESOLUTION)
}

pub fn build_centers_with_resolution(
    domain: &BoxDomain,
    d: usize,
    fill_resolution: usize,
) -> Result<CenterSet> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 centers, got {d}")));
    }
    if !domain.contains(&DVector::zeros(domain.dim())) {
        return Err(Error::InvalidArgument("domain must contain the origin".into()));
    }
    let n = domain.dim();
    let mut k: usize = 2;
    while k.pow(n as u32) < d {
        k += 1;
    }
    let mut adjusted = false;
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut axis = domain.axis_grid(a, k);
            let (idx, dist) = axis
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            let spacing = (domain.upper[a] - domain.lower[a]) / (k - 1) as f64;
            if dist > 1e-9 * spacing {
                adjusted = true;
            }
            axis[idx] = 0.0;
            axis
        })
        .collect();
    let grid = tensor_product(&axes);
    let origin = grid
        .iter()
        .position(|p| p.iter().all(|v| *v == 0.0))
        .expect("snapped grid contains the origin");
    let mut points = Vec::with_capacity(grid.len());
    points.push(grid[origin].clone());
    points.extend(grid.iter().enumerate().filter(|(i, _)| *i != origin).map(|(_, p)| p.clone()));
    let mut set = CenterSet::new(points, domain.clone(), fill_resolution.max(10 * d))?;
    set.origin_adjusted = adjusted;
    Ok(set)
}

/// Largest distance from a probe point to its nearest center, maximized
/// over a uniform probe grid with about `resolution` points. This is a
/// lower estimate of the supremum, exact up to one probe cell. In one
/// dimension the gap midpoints are probed too, which makes it exact.
pub fn fill_distance(centers: &[DVector<f64>], domain: &BoxDomain, resolution: usize) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("center set is empty".into()));
    }
    if resolution < 10 * centers.len() {
        return Err(Error::InvalidArgument(format!(
            "fill-distance resolution {resolution} is below 10 x {} centers",
            centers.len()
        )));
    }
    let k = per_axis_count(resolution, domain.dim());
    let mut probes = domain.grid(k);
    if domain.dim() == 1 {
        let mut xs: Vec<f64> = centers.iter().map(|c| c[0]).collect();
        xs.sort_by(f64::total_cmp);
        probes.extend(
            xs.windows(2)
                .map(|w| DVector::from_element(1, 0.5 * (w[0] + w[1])))
                .filter(|p| domain.contains(p)),
        );
    }
    let h = probes
        .par_iter()
        .map(|x| {
            centers
                .iter()
                .map(|c| (x - c).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    Ok(h)
}

/// `[1 ... 1; u_1 ... u_dj]`, shape `(m + 1) x d_j`.
pub fn input_matrix(inputs: &[DVector<f64>]) -> DMatrix<f64> {
    let m = inputs.first().map_or(0, |u| u.len());
    let mut ubar = DMatrix::zeros(m + 1, inputs.len());
    for (l, u) in inputs.iter().enumerate() {
        ubar[(0, l)] = 1.0;
        ubar.view_mut((1, l), (m, 1)).copy_from(u);
    }
    ubar
}

/// Smallest of the `m + 1` singular values of the input matrix; zero when
/// fewer than `m + 1` inputs are given.
pub fn excitation_sigma_min(inputs: &[DVector<f64>]) -> f64 {
    let ubar = input_matrix(inputs);
    if ubar.ncols() < ubar.nrows() {
        return 0.0;
    }
    ubar.svd(false, false).singular_values.min()
}

/// Draw `d_j` inputs uniformly from `input_box`, redrawing the whole set
/// until the input matrix has `sigma_min >= sigma_threshold`.
pub fn excite_inputs<R: Rng + ?Sized>(
    input_box: &BoxDomain,
    d_j: usize,
    rng: &mut R,
    sigma_threshold: f64,
) -> Result<Vec<DVector<f64>>> {
    let m = input_box.dim();
    if d_j < m + 1 {
        return Err(Error::InvalidArgument(format!(
            "need d_j >= m + 1 = {} inputs per center, got {d_j}",
            m + 1
        )));
    }
    for _ in 0..MAX_EXCITATION_ATTEMPTS {
        let inputs: Vec<_> = (0..d_j).map(|_| input_box.sample(rng)).collect();
        let sigma = excitation_sigma_min(&inputs);
        if sigma > 0.0 && sigma >= sigma_threshold {
            return Ok(inputs);
        }
    }
    Err(Error::ExcitationFailure {
        threshold: sigma_threshold,
        attempts: MAX_EXCITATION_ATTEMPTS,
    })
}

/// Inputs for every center, drawn from one seeded stream in center order.
pub fn design_inputs(
    input_box: &BoxDomain,
    num_centers: usize,
    d_j: usize,
    seed: u64,
    sigma_threshold: f64,
) -> Result<Vec<Vec<DVector<f64>>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_centers)
        .map(|_| excite_inputs(input_box, d_j, &mut rng, sigma_threshold))
        .collect()
}

/// Data triplets `{x_j, u_jl, x+_jl}` for one center.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletSet {
    pub center_index: usize,
    pub center: DVector<f64>,
    pub inputs: Vec<DVector<f64>>,
    pub successors: Vec<DVector<f64>>,
    pub sigma_min: f64,
}

impl TripletSet {
    /// Checks `d_j >= m + 1` and the rank condition on the inputs.
    pub fn new(
        center_index: usize,
        center: DVector<f64>,
        inputs: Vec<DVector<f64>>,
        successors: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if inputs.len() != successors.len() {
            return Err(Error::Validation(format!(
                "center {center_index}: {} inputs but {} successors",
                inputs.len(),
                successors.len()
            )));
        }
        let m = inputs.first().map_or(0, |u| u.len());
        if inputs.len() < m + 1 || m == 0 {
            return Err(Error::Validation(format!(
                "center {center_index}: d_j = {} triplets, need at least m + 1 = {}",
                inputs.len(),
                m + 1
            )));
        }
        let sigma_min = excitation_sigma_min(&inputs);
        if !(sigma_min > 1e-12) {
            return Err(Error::RankDeficient { center: center_index, sigma_min });
        }
        Ok(Self {
            center_index,
            center,
            inputs,
            successors,
            sigma_min,
        })
    }

    pub fn d_j(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn input_matrix(&self) -> DMatrix<f64> {
        input_matrix(&self.inputs)
    }

    /// `[x+_1 ... x+_dj]`, shape `n x d_j`.
    pub fn successor_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.successors)
    }
}

/// Successors by ground-truth integration, one [`TripletSet`] per center.
pub fn collect(
    system: &ControlAffineSystem,
    sampling: &SamplingConfig,
    centers: &CenterSet,
    plan: &[Vec<DVector<f64>>],
) -> Result<Vec<TripletSet>> {
    if plan.len() != centers.len() {
        return Err(Error::InvalidArgument(format!(
            "input plan covers {} centers, expected {}",
            plan.len(),
            centers.len()
        )));
    }
    centers
        .points
        .par_iter()
        .zip(plan.par_iter())
        .enumerate()
        .map(|(j, (x, inputs))| {
            let successors = inputs
                .iter()
                .enumerate()
                .map(|(l, u)| {
                    flow(system, sampling, x, u).map_err(|e| Error::Collection {
                        center: j,
                        triplet: l,
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            TripletSet::new(j, x.clone(), inputs.clone(), successors)
        })
        .collect()
}

/// Options for [`Dataset::generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionOptions {
    pub d: usize,
    pub d_j: usize,
    pub seed: u64,
    pub sigma_threshold: f64,
}

impl Default for CollectionOptions {
    fn default() -> Self {
        Self {
            d: 5,
            d_j: 2,
            seed: 0,
            sigma_threshold: DEFAULT_SIGMA_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system: String,
    pub kernel: KernelSpec,
    pub sampling: SamplingConfig,
    pub seed: u64,
    pub sigma_threshold: f64,
    pub input_box: BoxDomain,
    pub centers: CenterSet,
    pub triplets: Vec<TripletSet>,
}

impl Dataset {
    /// Grid centers on the state box, design inputs, and integrate.
    pub fn generate(
        system: &ControlAffineSystem,
        kernel: KernelSpec,
        sampling: SamplingConfig,
        opts: CollectionOptions,
    ) -> Result<Self> {
        kernel.validate()?;
        sampling.validate()?;
        if kernel.n != system.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: system.state_dim(),
                got: kernel.n,
            });
        }
        let centers = build_centers(system.state_box(), opts.d)?;
        let plan = design_inputs(
            system.input_box(),
            centers.len(),
            opts.d_j,
            opts.seed,
            opts.sigma_threshold,
        )?;
        let triplets = collect(system, &sampling, &centers, &plan)?;
        Ok(Self {
            system: system.name().to_string(),
            kernel,
            sampling,
            seed: opts.seed,
            sigma_threshold: opts.sigma_threshold,
            input_box: system.input_box().clone(),
            centers,
            triplets,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.centers.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_box.dim()
    }

    pub fn num_triplets(&self) -> usize {
        self.triplets.iter().map(TripletSet::d_j).sum()
    }

    /// `(d_j, sigma_min)` per center.
    pub fn excitation(&self) -> Vec<(usize, f64)> {
        self.triplets.iter().map(|t| (t.d_j(), t.sigma_min)).collect()
    }

    /// True when the fill distance satisfies `h_X < 0.5 * scale`.
    pub fn fill_distance_ok(&self) -> bool {
        self.centers.fill_distance < 0.5 * self.kernel.scale
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            system: self.system.clone(),
            kernel: self.kernel,
            sampling: self.sampling,
            seed: self.seed,
            sigma_threshold: self.sigma_threshold,
            state_box: self.centers.domain.clone(),
            input_box: self.input_box.clone(),
            fill_distance: self.centers.fill_distance,
            fill_resolution: self.centers.fill_resolution,
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;

        let n = self.state_dim();
        let m = self.input_dim();
        let mut w = csv::Writer::from_path(dir.join(CENTERS_FILE))?;
        let mut header = vec!["j".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for (j, p) in self.centers.points.iter().enumerate() {
            let mut row = vec![j.to_string()];
            row.extend(p.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join(TRIPLETS_FILE))?;
        let mut header = vec!["j".to_string(), "l".to_string()];
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=n).map(|i| format!("xplus_{i}")));
        w.write_record(&header)?;
        for t in &self.triplets {
            for (l, (u, xp)) in t.inputs.iter().zip(&t.successors).enumerate() {
                let mut row = vec![t.center_index.to_string(), l.to_string()];
                row.extend(u.iter().map(|v| fmt_f64(*v)));
                row.extend(xp.iter().map(|v| fmt_f64(*v)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
            .map_err(|e| Error::Parse {
                path: manifest_path.clone(),
                line: e.line() as u64,
                field: "manifest".into(),
                message: e.to_string(),
            })?;
        manifest.kernel.validate()?;
        manifest.sampling.validate()?;
        let n = manifest.state_box.dim();
        let m = manifest.input_box.dim();
        if manifest.kernel.n != n {
            return Err(Error::Validation(format!(
                "kernel dimension {} does not match state box dimension {n}",
                manifest.kernel.n
            )));
        }

        let centers_path = dir.join(CENTERS_FILE);
        let mut points = Vec::new();
        for (line, row) in read_rows(&centers_path, 1 + n)? {
            let j = parse_index(&centers_path, line, "j", &row[0])?;
            if j != points.len() {
                return Err(parse_err(&centers_path, line, "j", format!("expected index {}", points.len())));
            }
            let x = (0..n)
                .map(|i| parse_f64(&centers_path, line, &format!("x_{}", i + 1), &row[1 + i]))
                .collect::<Result<Vec<_>>>()?;
            points.push(DVector::from_vec(x));
        }
        validate_centers(&points, n)?;

        let triplets_path = dir.join(TRIPLETS_FILE);
        let mut per_center: Vec<(Vec<DVector<f64>>, Vec<DVector<f64>>)> =
            vec![(Vec::new(), Vec::new()); points.len()];
        for (line, row) in read_rows(&triplets_path, 2 + m + n)? {
            let j = parse_index(&triplets_path, line, "j", &row[0])?;
            let l = parse_index(&triplets_path, line, "l", &row[1])?;
            let slot = per_center
                .get_mut(j)
                .ok_or_else(|| parse_err(&triplets_path, line, "j", format!("no center {j}")))?;
            if l != slot.0.len() {
                return Err(parse_err(&triplets_path, line, "l", format!("expected index {}", slot.0.len())));
            }
            let u = (0..m)
                .map(|i| parse_f64(&triplets_path, line, &format!("u_{}", i + 1), &row[2 + i]))
                .collect::<Result<Vec<_>>>()?;
            let xp = (0..n)
                .map(|i| parse_f64(&triplets_path, line, &format!("xplus_{}", i + 1), &row[2 + m + i]))
                .collect::<Result<Vec<_>>>()?;
            slot.0.push(DVector::from_vec(u));
            slot.1.push(DVector::from_vec(xp));
        }
        let triplets = per_center
            .into_iter()
            .enumerate()
            .map(|(j, (inputs, successors))| TripletSet::new(j, points[j].clone(), inputs, successors))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            system: manifest.system,
            kernel: manifest.kernel,
            sampling: manifest.sampling,
            seed: manifest.seed,
            sigma_threshold: manifest.sigma_threshold,
            input_box: manifest.input_box,
            centers: CenterSet {
                points,
                domain: manifest.state_box,
                fill_distance: manifest.fill_distance,
                fill_resolution: manifest.fill_resolution,
                origin_adjusted: false,
            },
            triplets,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    system: String,
    kernel: KernelSpec,
    sampling: SamplingConfig,
    seed: u64,
    sigma_threshold: f64,
    state_box: BoxDomain,
    input_box: BoxDomain,
    fill_distance: f64,
    fill_resolution: usize,
}

/// 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(
                path,
                line,
                "row",
                format!("expected {width} columns, found {}", rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn parse_err(path: &Path, line: u64, field: &str, message: String) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        field: field.to_string(),
        message,
    }
}

fn parse_f64(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|e| parse_err(path, line, field, format!("`{raw}`: {e}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, field, format!("non-finite value `{raw}`")));
    }
    Ok(v)
}

fn parse_index(path: &Path, line: u64, field: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse()
        .map_err(|e| parse_err(path, line, field, format!("`{raw}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::zone_temp;
    use approx::assert_abs_diff_eq;

    fn s(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    fn unit_interval() -> BoxDomain {
        BoxDomain::cube(1, -1.0, 1.0).unwrap()
    }

    fn coords(set: &CenterSet) -> Vec<f64> {
        set.points.iter().map(|p| p[0]).collect()
    }

    /// Brute-force fill distance of a 1D point set on an interval: the
    /// largest gap half-width, or the distance from an endpoint to the
    /// nearest center.
    fn fill_distance_1d(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let mut h = (xs[0] - lo).max(hi - xs[xs.len() - 1]);
        for w in xs.windows(2) {
            h = h.max(0.5 * (w[1] - w[0]));
        }
        h
    }

    #[test]
    fn centers_origin_first() {
        let set = build_centers(&unit_interval(), 5).unwrap();
        assert_eq!(coords(&set), vec![0.0, -1.0, -0.5, 0.5, 1.0]);
        assert!(!set.origin_adjusted);
        let set = build_centers(&unit_interval(), 3).unwrap();
        assert_eq!(coords(&set), vec![0.0, -1.0, 1.0]);
        for d in [5, 7, 9, 11, 13, 15, 17, 19] {
            let set = build_centers(&unit_interval(), d).unwrap();
            assert_eq!(set.points[0][0].to_bits(), 0.0f64.to_bits());
            assert_eq!(set.len(), d);
        }
        assert!(build_centers(&unit_interval(), 1).is_err());
    }

    #[test]
    fn even_count_is_snapped_to_origin() {
        let set = build_centers(&unit_interval(), 4).unwrap();
        assert!(set.origin_adjusted);
        assert_eq!(set.points[0][0], 0.0);
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn tensor_grid_in_two_dimensions() {
        let dom = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let set = build_centers(&dom, 9).unwrap();
        assert_eq!(set.len(), 9);
        assert_eq!(set.points[0], DVector::zeros(2));
        let set = build_centers(&dom, 10).unwrap();
        // smallest k with k^2 >= 10 is 4
        assert_eq!(set.len(), 16);
        assert_eq!(set.points[0], DVector::zeros(2));
    }

    #[test]
    fn fill_distance_examples() {
        let dom = unit_interval();
        let five: Vec<_> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|x| s(*x)).collect();
        let h = fill_distance(&five, &dom, 10_001).unwrap();
        let oracle = fill_distance_1d(vec![-1.0, -0.5, 0.0, 0.5, 1.0], -1.0, 1.0);
        assert_eq!(oracle, 0.25);
        assert_abs_diff_eq!(h, oracle, epsilon = 2.0 / 10_000.0);
        assert_eq!(fill_distance(&[s(0.0)], &dom, 1001).unwrap(), 1.0);
        assert!(fill_distance(&five, &dom, 20).is_err());
    }

    #[test]
    fn fill_distance_halves_with_doubled_intervals() {
        let dom = unit_interval();
        let h5 = build_centers(&dom, 5).unwrap().fill_distance;
        let h9 = build_centers(&dom, 9).unwrap().fill_distance;
        let h17 = build_centers(&dom, 17).unwrap().fill_distance;
        assert_abs_diff_eq!(h5 / h9, 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(h9 / h17, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn fill_distance_matches_gap_oracle_for_irregular_points() {
        let xs = vec![0.0, -0.9, -0.35, 0.2, 0.55, 0.93];
        let pts: Vec<_> = xs.iter().map(|x| s(*x)).collect();
        let h = fill_distance(&pts, &unit_interval(), 20_001).unwrap();
        assert_abs_diff_eq!(h, fill_distance_1d(xs, -1.0, 1.0), epsilon = 1e-4);
    }

    #[test]
    fn excitation_examples() {
        let sigma = excitation_sigma_min(&[s(-2.0), s(2.0)]);
        assert_abs_diff_eq!(sigma, 2f64.sqrt(), epsilon = 1e-12);
        assert!(excitation_sigma_min(&[s(1.0), s(1.0)]) < 1e-12);
        assert!(TripletSet::new(0, s(0.0), vec![s(1.0), s(1.0)], vec![s(0.0), s(0.0)]).is_err());
        // d_j = m + 1 with distinct inputs: det = u2 - u1 != 0
        for (a, b) in [(0.3, 0.31), (-2.0, 1.0), (1.9, -1.9)] {
            assert!(excitation_sigma_min(&[s(a), s(b)]) > 0.0);
        }
    }

    #[test]
    fn excite_inputs_meets_threshold() {
        let u = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let inputs = excite_inputs(&u, 2, &mut rng, 0.1).unwrap();
            assert!(excitation_sigma_min(&inputs) >= 0.1);
        }
        assert!(excite_inputs(&u, 1, &mut rng, 0.1).is_err());
        assert!(matches!(
            excite_inputs(&u, 2, &mut rng, 1e6),
            Err(Error::ExcitationFailure { .. })
        ));
    }

    #[test]
    fn collect_zone_temp() {
        let sys = zone_temp();
        let sampling = SamplingConfig::new(0.01, 100).unwrap();
        let kernel = KernelSpec::new(1, 1, 1.0).unwrap();
        let opts = CollectionOptions { d: 5, d_j: 2, seed: 3, sigma_threshold: 0.1 };
        let ds = Dataset::generate(&sys, kernel, sampling, opts).unwrap();
        assert_eq!(ds.num_triplets(), 10);
        assert!(ds.triplets.iter().all(|t| t.d_j() == 2 && t.sigma_min >= 0.1));
        assert!(ds
            .triplets
            .iter()
            .flat_map(|t| &t.successors)
            .all(|x| x.iter().all(|v| v.is_finite())));
        assert!(ds.fill_distance_ok());
        let again = Dataset::generate(&sys, kernel, sampling, opts).unwrap();
        assert_eq!(ds, again);

        let centers = build_centers(sys.state_box(), 5).unwrap();
        let plan = vec![vec![s(0.0), s(1.0)]; 5];
        let t = collect(&sys, &sampling, &centers, &plan).unwrap();
        assert_eq!(t[0].successors[0][0], 0.0);
    }

    #[test]
    fn save_load_round_trip_is_bitwise() {
        let sys = zone_temp();
        let ds = Dataset::generate(
            &sys,
            KernelSpec::new(1, 1, 1.0).unwrap(),
            SamplingConfig::new(0.01, 100).unwrap(),
            CollectionOptions { d: 5, d_j: 3, seed: 11, sigma_threshold: 0.1 },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(ds.centers.points, back.centers.points);
        for (a, b) in ds.triplets.iter().zip(&back.triplets) {
            for (x, y) in a.successors.iter().zip(&b.successors) {
                assert_eq!(x[0].to_bits(), y[0].to_bits());
            }
            for (x, y) in a.inputs.iter().zip(&b.inputs) {
                assert_eq!(x[0].to_bits(), y[0].to_bits());
            }
        }
        assert_eq!(ds.centers.fill_distance.to_bits(), back.centers.fill_distance.to_bits());
    }

    fn write_fixture(dir: &Path, centers: &str, triplets: &str) {
        let ds = Dataset::generate(
            &zone_temp(),
            KernelSpec::new(1, 1, 1.0).unwrap(),
            SamplingConfig::new(0.01, 10).unwrap(),
            CollectionOptions { d: 3, d_j: 2, seed: 1, sigma_threshold: 0.1 },
        )
        .unwrap();
        ds.save(dir).unwrap();
        fs::write(dir.join(CENTERS_FILE), centers).unwrap();
        fs::write(dir.join(TRIPLETS_FILE), triplets).unwrap();
    }

    #[test]
    fn load_rejects_too_few_triplets() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(
            dir.path(),
            "j,x_1\n0,0\n1,-1\n2,1\n",
            "j,l,u_1,xplus_1\n0,0,1,0.1\n0,1,-1,-0.1\n1,0,1,0.1\n2,0,1,0.2\n2,1,-1,0.3\n",
        );
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("need at least m + 1"), "{err}");
    }

    #[test]
    fn load_rejects_nonzero_first_center() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "j,x_1\n0,0.5\n1,-1\n2,1\n", "j,l,u_1,xplus_1\n");
        let err = Dataset::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("origin"), "{err}");
    }

    #[test]
    fn load_reports_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "j,x_1\n0,0\n1,abc\n2,1\n", "j,l,u_1,xplus_1\n");
        match Dataset::load(dir.path()).unwrap_err() {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "x_1");
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
