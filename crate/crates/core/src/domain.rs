//! Axis-aligned boxes used for state and input domains.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed box `[lower_1, upper_1] x ... x [lower_k, upper_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("box must have dimension >= 1".into()));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "invalid box interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The interval `[lo, hi]` repeated `dim` times.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn contains_origin_in_interior(&self) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .all(|(lo, hi)| *lo < 0.0 && 0.0 < *hi)
    }

    /// `max ||p||_2` over the box, attained at a vertex.
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `max ||p||_1` over the box.
    pub fn max_l1_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo.abs().max(hi.abs()))
            .sum()
    }

    /// `max |1 - sum_i p_i|` over the box. The sum is linear, so the
    /// extremes sit at the all-lower and all-upper vertices.
    pub fn max_abs_one_minus_sum(&self) -> f64 {
        let lo: f64 = self.lower.iter().sum();
        let hi: f64 = self.upper.iter().sum();
        (1.0 - lo).abs().max((1.0 - hi).abs())
    }

    /// `k` equispaced values along axis `axis`, endpoints included.
    pub fn axis_grid(&self, axis: usize, k: usize) -> Vec<f64> {
        let (lo, hi) = (self.lower[axis], self.upper[axis]);
        if k == 1 {
            return vec![0.5 * (lo + hi)];
        }
        let step = (hi - lo) / (k - 1) as f64;
        (0..k)
            .map(|i| if i == k - 1 { hi } else { lo + step * i as f64 })
            .collect()
    }

    /// Tensor grid with `k` points per axis, last axis varying fastest.
    pub fn grid(&self, k: usize) -> Vec<DVector<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_grid(a, k)).collect();
        tensor_product(&axes)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(lo, hi)| rng.random_range(*lo..=*hi)),
        )
    }
}

/// Cartesian product of per-axis coordinate lists.
pub fn tensor_product(axes: &[Vec<f64>]) -> Vec<DVector<f64>> {
    let dim = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        out.push(DVector::from_iterator(
            dim,
            idx.iter().enumerate().map(|(a, &i)| axes[a][i]),
        ));
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
    out
}

/// Per-axis point count for a tensor grid whose total stays near `budget`.
pub(crate) fn per_axis_count(budget: usize, dim: usize) -> usize {
    if dim <= 1 {
        return budget.max(2);
    }
    let mut k = (budget as f64).powf(1.0 / dim as f64).floor() as usize;
    while (k + 1).checked_pow(dim as u32).is_some_and(|t| t <= budget) {
        k += 1;
    }
    k.max(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_extrema_of_input_box() {
        let u = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        assert_eq!(u.max_norm(), 2.0);
        assert_eq!(u.max_abs_one_minus_sum(), 3.0);
        assert_eq!(u.max_l1_norm(), 2.0);
    }

    #[test]
    fn two_dimensional_extrema() {
        let u = BoxDomain::new(vec![-1.0, -3.0], vec![2.0, 1.0]).unwrap();
        assert!((u.max_norm() - 13f64.sqrt()).abs() < 1e-15);
        assert_eq!(u.max_l1_norm(), 5.0);
        // sums range over [-4, 3]
        assert_eq!(u.max_abs_one_minus_sum(), 5.0);
    }

    #[test]
    fn grid_hits_endpoints_exactly() {
        let b = BoxDomain::cube(1, -1.0, 1.0).unwrap();
        let g = b.axis_grid(0, 7);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[6], 1.0);
    }

    #[test]
    fn tensor_grid_order() {
        let b = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let g = b.grid(2);
        let pts: Vec<(f64, f64)> = g.iter().map(|p| (p[0], p[1])).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn rejects_inverted_interval() {
        assert!(BoxDomain::new(vec![1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn per_axis_budget() {
        assert_eq!(per_axis_count(2001, 1), 2001);
        assert_eq!(per_axis_count(10_000, 2), 100);
        assert_eq!(per_axis_count(1_000_000, 3), 100);
    }
}
