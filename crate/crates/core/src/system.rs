//! Continuous-time control-affine plants `x' = f_c(x) + G_c(x) u`, their
//! sampled-data flow under zero-order-hold inputs, and the forward Euler
//! maps the surrogate regresses on.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{per_axis_count, BoxDomain};
use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// Jacobians of the control columns `g_ci`, one `n x n` matrix per input.
pub type ColumnJacobians = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;

pub const DEFAULT_SUBSTEPS: usize = 100;
pub const DEFAULT_CONSTANTS_GRID: usize = 2001;
const FD_STEP: f64 = 1e-6;
/// Cap on the total number of grid points used for constant estimation.
const CONSTANTS_GRID_BUDGET: usize = 1_000_000;

#[derive(Clone)]
pub struct ControlAffineSystem {
    name: String,
    n: usize,
    m: usize,
    drift: VectorField,
    control: MatrixField,
    drift_jacobian: Option<MatrixField>,
    control_jacobians: Option<ColumnJacobians>,
    state_box: BoxDomain,
    input_box: BoxDomain,
}

impl fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("state_box", &self.state_box)
            .field("input_box", &self.input_box)
            .field("analytic_drift_jacobian", &self.drift_jacobian.is_some())
            .field("analytic_control_jacobians", &self.control_jacobians.is_some())
            .finish()
    }
}

impl ControlAffineSystem {
    /// Checks `f_c(0) = 0`, that both boxes contain the origin in their
    /// interiors, and that the vector fields have the box dimensions.
    pub fn new(
        name: impl Into<String>,
        state_box: BoxDomain,
        input_box: BoxDomain,
        drift: VectorField,
        control: MatrixField,
    ) -> Result<Self> {
        let n = state_box.dim();
        let m = input_box.dim();
        if !state_box.contains_origin_in_interior() || !input_box.contains_origin_in_interior() {
            return Err(Error::Validation(
                "state and input boxes must contain the origin in their interiors".into(),
            ));
        }
        let zero = DVector::zeros(n);
        let f0 = drift(&zero);
        if f0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f0.len() });
        }
        if f0.norm() > 1e-12 {
            return Err(Error::Validation(format!(
                "drift must vanish at the origin, |f_c(0)| = {:e}",
                f0.norm()
            )));
        }
        let g0 = control(&zero);
        if g0.shape() != (n, m) {
            return Err(Error::Validation(format!(
                "control matrix has shape {:?}, expected ({n}, {m})",
                g0.shape()
            )));
        }
        Ok(Self {
            name: name.into(),
            n,
            m,
            drift,
            control,
            drift_jacobian: None,
            control_jacobians: None,
            state_box,
            input_box,
        })
    }

    pub fn with_drift_jacobian(mut self, jac: MatrixField) -> Self {
        self.drift_jacobian = Some(jac);
        self
    }

    pub fn with_control_jacobians(mut self, jac: ColumnJacobians) -> Self {
        self.control_jacobians = Some(jac);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn state_box(&self) -> &BoxDomain {
        &self.state_box
    }

    pub fn input_box(&self) -> &BoxDomain {
        &self.input_box
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn control(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.control)(x)
    }

    /// `f_c(x) + G_c(x) u`.
    pub fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + self.control(x) * u
    }

    pub fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.drift_jacobian {
            Some(j) => j(x),
            None => central_difference(x, |p| self.drift(p)),
        }
    }

    pub fn control_jacobians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        match &self.control_jacobians {
            Some(j) => j(x),
            None => (0..self.m)
                .map(|i| central_difference(x, |p| self.control(p).column(i).into_owned()))
                .collect(),
        }
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: u.len() });
        }
        Ok(())
    }
}

fn central_difference<F>(x: &DVector<f64>, f: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += FD_STEP;
        xm[k] -= FD_STEP;
        let col = (f(&xp) - f(&xm)) / (2.0 * FD_STEP);
        jac.set_column(k, &col);
    }
    jac
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Sampling period and number of RK4 substeps per period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub dt: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl SamplingConfig {
    pub fn new(dt: f64, substeps: usize) -> Result<Self> {
        let cfg = Self { dt, substeps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// State after one sampling period with the input held constant,
/// integrated with fixed-step classical RK4.
pub fn flow(
    system: &ControlAffineSystem,
    sampling: &SamplingConfig,
    x0: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    system.check_state(x0)?;
    system.check_input(u)?;
    let h = sampling.dt / sampling.substeps as f64;
    let mut x = x0.clone();
    for step in 0..sampling.substeps {
        let k1 = system.vector_field(&x, u);
        let k2 = system.vector_field(&(&x + &k1 * (0.5 * h)), u);
        let k3 = system.vector_field(&(&x + &k2 * (0.5 * h)), u);
        let k4 = system.vector_field(&(&x + &k3 * h), u);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::TrajectoryDiverged { substep: step + 1 });
        }
    }
    Ok(x)
}

/// Forward Euler maps at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerMaps {
    /// `f(x) = x + dt f_c(x)`
    pub f: DVector<f64>,
    /// `g~_i(x) = x + dt (f_c(x) + g_ci(x))`
    pub g_tilde: Vec<DVector<f64>>,
    /// `G(x) = dt G_c(x)`, whose columns are `g~_i(x) - f(x)`.
    pub g: DMatrix<f64>,
}

impl EulerMaps {
    /// `[f(x) G(x)]`, the target of the per-center regression.
    pub fn stacked(&self) -> DMatrix<f64> {
        let n = self.f.len();
        let m = self.g.ncols();
        let mut h = DMatrix::zeros(n, m + 1);
        h.set_column(0, &self.f);
        h.view_mut((0, 1), (n, m)).copy_from(&self.g);
        h
    }
}

pub fn euler_maps(
    system: &ControlAffineSystem,
    sampling: &SamplingConfig,
    x: &DVector<f64>,
) -> Result<EulerMaps> {
    system.check_state(x)?;
    let dt = sampling.dt;
    let fc = system.drift(x);
    let gc = system.control(x);
    let f = x + &fc * dt;
    let g_tilde = gc
        .column_iter()
        .map(|col| x + (&fc + col) * dt)
        .collect();
    Ok(EulerMaps { f, g_tilde, g: gc * dt })
}

/// Constants of the plant on its state and input boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    /// Lipschitz constant of `f_c`.
    pub l_f: f64,
    /// Lipschitz constant of `G_c` in the spectral norm.
    pub l_g: f64,
    /// `sup ||G_c(x)||` over the state box.
    pub g_bar: f64,
    pub x_bar: f64,
    pub u_bar: f64,
    /// `max |1 - sum_i u_i|` over the input box.
    pub u_tilde: f64,
    /// `max ||u||_1` over the input box.
    pub u_one_max: f64,
    /// Grid points per state axis used for `l_f`, `l_g`, `g_bar`.
    pub grid_points_per_axis: usize,
}

/// Lipschitz constants and `g_bar` by grid maximization of Jacobian and
/// operator norms; the box extrema are exact vertex values.
///
/// `L_G` uses `sqrt(sum_i ||D g_ci||^2)`, which bounds the spectral-norm
/// Lipschitz constant of `G_c` through the Frobenius norm and is exact for
/// a single input.
pub fn estimate_constants(system: &ControlAffineSystem, grid_resolution: usize) -> SystemConstants {
    let n = system.state_dim();
    let k = grid_resolution.max(2).min(per_axis_count(CONSTANTS_GRID_BUDGET, n));
    let mut l_f: f64 = 0.0;
    let mut l_g: f64 = 0.0;
    let mut g_bar: f64 = 0.0;
    for x in system.state_box().grid(k) {
        l_f = l_f.max(spectral_norm(&system.drift_jacobian(&x)));
        let lg = system
            .control_jacobians(&x)
            .iter()
            .map(|j| spectral_norm(j).powi(2))
            .sum::<f64>()
            .sqrt();
        l_g = l_g.max(lg);
        g_bar = g_bar.max(spectral_norm(&system.control(&x)));
    }
    let u = system.input_box();
    SystemConstants {
        l_f,
        l_g,
        g_bar,
        x_bar: system.state_box().max_norm(),
        u_bar: u.max_norm(),
        u_tilde: u.max_abs_one_minus_sum(),
        u_one_max: u.max_l1_norm(),
        grid_points_per_axis: k,
    }
}

/// Zone temperature process `x' = u (T0 cos(x/5) - x^3) / Vz` with
/// `Vz = 2`, `T0 = -2` on `X = [-1, 1]`, `U = [-2, 2]`.
pub fn zone_temp() -> ControlAffineSystem {
    const VZ: f64 = 2.0;
    const T0: f64 = -2.0;
    let state_box = BoxDomain::cube(1, -1.0, 1.0).expect("valid box");
    let input_box = BoxDomain::cube(1, -2.0, 2.0).expect("valid box");
    ControlAffineSystem::new(
        "zone_temp",
        state_box,
        input_box,
        Arc::new(|_x: &DVector<f64>| DVector::zeros(1)),
        Arc::new(|x: &DVector<f64>| {
            let x = x[0];
            DMatrix::from_element(1, 1, (T0 * (0.2 * x).cos() - x.powi(3)) / VZ)
        }),
    )
    .expect("zone temperature system is well formed")
    .with_drift_jacobian(Arc::new(|_x: &DVector<f64>| DMatrix::zeros(1, 1)))
    .with_control_jacobians(Arc::new(|x: &DVector<f64>| {
        let x = x[0];
        vec![DMatrix::from_element(1, 1, (-0.2 * T0 * (0.2 * x).sin() - 3.0 * x * x) / VZ)]
    }))
}

/// Damped pendulum with torque input, `x1' = x2`,
/// `x2' = -sin(x1) - 0.5 x2 + u`, on `[-1, 1]^2 x [-1, 1]`.
pub fn pendulum() -> ControlAffineSystem {
    let state_box = BoxDomain::cube(2, -1.0, 1.0).expect("valid box");
    let input_box = BoxDomain::cube(1, -1.0, 1.0).expect("valid box");
    ControlAffineSystem::new(
        "pendulum",
        state_box,
        input_box,
        Arc::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1], -x[0].sin() - 0.5 * x[1]])),
        Arc::new(|_x: &DVector<f64>| DMatrix::from_column_slice(2, 1, &[0.0, 1.0])),
    )
    .expect("pendulum system is well formed")
    .with_drift_jacobian(Arc::new(|x: &DVector<f64>| {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -x[0].cos(), -0.5])
    }))
}

/// Built-in systems selectable by name.
pub fn system_by_name(name: &str) -> Result<ControlAffineSystem> {
    match name {
        "zone_temp" => Ok(zone_temp()),
        "pendulum" => Ok(pendulum()),
        other => Err(Error::Config(format!(
            "unknown system `{other}` (available: zone_temp, pendulum)"
        ))),
    }
}
