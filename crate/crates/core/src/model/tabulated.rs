//! Tabulated model family: birth, death, and competition given as value
//! tables on a shared uniform trait grid, evaluated by cubic spline
//! interpolation. The grid endpoints become the trait space; mutation
//! uses the conditioned Gaussian kernel and a constant probability.

use super::gaussian::conditioned_gaussian_kernel;
use super::{ModelError, ModelSpec, TraitSpace};
use std::sync::Arc;

/// Relative tolerance for the uniform-spacing check on input grids.
const GRID_UNIFORMITY_TOL: f64 = 1e-9;

fn check_grid(grid: &[f64]) -> Result<(f64, f64), ModelError> {
    if grid.len() < 4 {
        return Err(ModelError::InvalidParameter(format!(
            "tabulated grid needs at least 4 points, got {}",
            grid.len()
        )));
    }
    if !grid.iter().all(|v| v.is_finite()) {
        return Err(ModelError::InvalidParameter(
            "tabulated grid contains a non-finite point".into(),
        ));
    }
    let lo = grid[0];
    let h = (grid[grid.len() - 1] - lo) / (grid.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(ModelError::InvalidParameter(
            "tabulated grid must be strictly increasing".into(),
        ));
    }
    for (i, &x) in grid.iter().enumerate() {
        if (x - (lo + h * i as f64)).abs() > GRID_UNIFORMITY_TOL * h.max(1.0) {
            return Err(ModelError::InvalidParameter(format!(
                "tabulated grid must be uniform: point {i} is {x}, expected {}",
                lo + h * i as f64
            )));
        }
    }
    Ok((lo, h))
}

fn check_values(values: &[f64], n: usize, what: &str) -> Result<(), ModelError> {
    if values.len() != n {
        return Err(ModelError::InvalidParameter(format!(
            "{what} table has {} entries for a {n}-point grid",
            values.len()
        )));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "{what} table contains a non-finite value"
        )));
    }
    Ok(())
}

/// Second derivatives (moments) of the not-a-knot cubic spline through
/// `values` on a uniform grid of step `h`. Uniform spacing decouples the
/// not-a-knot end conditions: the moments at the second and second-last
/// nodes come straight from second differences, the end moments follow by
/// linear extension, and the rest is a plain tridiagonal solve.
fn spline_moments(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let d = |i: usize| (values[i - 1] - 2.0 * values[i] + values[i + 1]) / h;
    let mut m = vec![0.0; n];
    m[1] = d(1) / h;
    m[n - 2] = d(n - 2) / h;
    if n > 4 {
        // Thomas algorithm for the interior moments 2..n-3, with the two
        // known neighbours folded into the right-hand side
        let k = n - 4;
        let (a, b) = (h / 6.0, 2.0 * h / 3.0);
        let mut diag = vec![b; k];
        let mut rhs: Vec<f64> = (2..n - 2).map(|i| d(i)).collect();
        rhs[0] -= a * m[1];
        rhs[k - 1] -= a * m[n - 2];
        for i in 1..k {
            let w = a / diag[i - 1];
            diag[i] -= w * a;
            rhs[i] -= w * rhs[i - 1];
        }
        m[n - 3] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 2] = (rhs[i] - a * m[i + 3]) / diag[i];
        }
    }
    m[0] = 2.0 * m[1] - m[2];
    m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
    m
}

/// Evaluate a spline segment: node values `y0, y1`, moments `m0, m1`,
/// local coordinate `t` in [0, 1] (cubic extrapolation outside).
fn spline_segment(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let s = 1.0 - t;
    s * y0 + t * y1 + h * h / 6.0 * ((s * s * s - s) * m0 + (t * t * t - t) * m1)
}

fn segment_index(lo: f64, h: f64, n: usize, x: f64) -> (usize, f64) {
    let t = (x - lo) / h;
    let seg = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
    (seg, t - seg as f64)
}

/// One-variable table interpolated by a not-a-knot cubic spline: twice
/// continuously differentiable, reproduces the table nodes exactly, and
/// matches smooth data to O(h^4), so finite-difference fitness
/// derivatives behave on tabulated models.
#[derive(Debug, Clone)]
pub struct CubicTable {
    lo: f64,
    h: f64,
    values: Vec<f64>,
    moments: Vec<f64>,
}

impl CubicTable {
    pub fn new(grid: &[f64], values: &[f64]) -> Result<Self, ModelError> {
        let (lo, h) = check_grid(grid)?;
        check_values(values, grid.len(), "value")?;
        let moments = spline_moments(values, h);
        Ok(CubicTable { lo, h, values: values.to_vec(), moments })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (k, t) = segment_index(self.lo, self.h, self.values.len(), x);
        spline_segment(
            self.values[k],
            self.values[k + 1],
            self.moments[k],
            self.moments[k + 1],
            self.h,
            t,
        )
    }
}

/// Two-variable table on the same grid in both coordinates, row-major
/// (`rows[i][j]` is the value at `(grid[i], grid[j])`). Rows are splined
/// once at construction; an evaluation interpolates every row at `y` and
/// splines the resulting column at `x`, which keeps the surface twice
/// continuously differentiable in each variable at O(n) per call.
#[derive(Debug, Clone)]
pub struct CubicTable2 {
    lo: f64,
    h: f64,
    n: usize,
    values: Vec<f64>,
    row_moments: Vec<f64>,
}

impl CubicTable2 {
    pub fn new(grid: &[f64], rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let (lo, h) = check_grid(grid)?;
        let n = grid.len();
        if rows.len() != n {
            return Err(ModelError::InvalidParameter(format!(
                "matrix table has {} rows for a {n}-point grid",
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(n * n);
        let mut row_moments = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            check_values(row, n, &format!("matrix row {i}"))?;
            values.extend_from_slice(row);
            row_moments.extend_from_slice(&spline_moments(row, h));
        }
        Ok(CubicTable2 { lo, h, n, values, row_moments })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (kj, tj) = segment_index(self.lo, self.h, self.n, y);
        let column: Vec<f64> = (0..self.n)
            .map(|i| {
                let v = &self.values[i * self.n..];
                let m = &self.row_moments[i * self.n..];
                spline_segment(v[kj], v[kj + 1], m[kj], m[kj + 1], self.h, tj)
            })
            .collect();
        let moments = spline_moments(&column, self.h);
        let (ki, ti) = segment_index(self.lo, self.h, self.n, x);
        spline_segment(column[ki], column[ki + 1], moments[ki], moments[ki + 1], self.h, ti)
    }
}

/// Model family declared by tables instead of closed forms. Fields map
/// one-to-one onto the `family = "custom"` config keys.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TabulatedFamily {
    /// Uniform grid; its endpoints define the trait space.
    pub grid: Vec<f64>,
    /// Birth rates on the grid.
    pub lambda: Vec<f64>,
    /// Death rates on the grid.
    pub mu: Vec<f64>,
    /// Competition matrix, row-major over (focal, against).
    pub alpha: Vec<Vec<f64>>,
    /// Mutation step standard deviation.
    pub sigma: f64,
    /// Constant mutation probability.
    pub p: f64,
}

impl TabulatedFamily {
    /// Assemble the full model with the given scaling parameters.
    pub fn model(
        &self,
        carrying_scale: u64,
        u_k: f64,
        epsilon: f64,
    ) -> Result<ModelSpec, ModelError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(ModelError::InvalidParameter(format!(
                "mutation probability p must lie in [0, 1], got {}",
                self.p
            )));
        }
        let birth = CubicTable::new(&self.grid, &self.lambda)?;
        let death = CubicTable::new(&self.grid, &self.mu)?;
        let comp = CubicTable2::new(&self.grid, &self.alpha)?;
        let space = TraitSpace::new(self.grid[0], self.grid[self.grid.len() - 1])?;
        let kernel = conditioned_gaussian_kernel(space, self.sigma)?;
        let p = self.p;
        ModelSpec::new(
            space,
            Arc::new(move |x| birth.eval(x)),
            Arc::new(move |x| death.eval(x)),
            Arc::new(move |x, y| comp.eval(x, y)),
            Arc::new(move |_| p),
            kernel,
            carrying_scale,
            u_k,
            epsilon,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gaussian::GaussianExampleParams;
    use crate::singularity::{find_singularities, Classification};

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn cubics_are_reproduced_exactly() {
        let g = grid(-1.0, 2.0, 7);
        let f = |x: f64| x * x * x - 2.0 * x + 0.5;
        let values: Vec<f64> = g.iter().map(|&x| f(x)).collect();
        let table = CubicTable::new(&g, &values).unwrap();
        for i in 0..=60 {
            let x = -1.0 + 3.0 * i as f64 / 60.0;
            assert!((table.eval(x) - f(x)).abs() < 1e-12, "x = {x}");
        }
        // nodes exactly
        for (&x, &v) in g.iter().zip(&values) {
            assert_eq!(table.eval(x), v);
        }
    }

    #[test]
    fn interpolation_error_decays_like_the_fourth_power() {
        let f = |x: f64| (1.3 * x).sin();
        let err = |n: usize| {
            let g = grid(-2.0, 2.0, n);
            let values: Vec<f64> = g.iter().map(|&x| f(x)).collect();
            let table = CubicTable::new(&g, &values).unwrap();
            (0..=1000)
                .map(|i| {
                    let x = -2.0 + 4.0 * i as f64 / 1000.0;
                    (table.eval(x) - f(x)).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let (coarse, fine) = (err(21), err(41));
        assert!(
            fine < coarse / 8.0,
            "halving h should cut the error ~16x, got {coarse} -> {fine}"
        );
    }

    #[test]
    fn separable_products_interpolate_exactly_in_two_variables() {
        let g = grid(0.0, 1.0, 5);
        let f = |x: f64, y: f64| (x * x * x + 1.0) * (2.0 * y * y - y + 3.0);
        let rows: Vec<Vec<f64>> = g
            .iter()
            .map(|&x| g.iter().map(|&y| f(x, y)).collect())
            .collect();
        let table = CubicTable2::new(&g, &rows).unwrap();
        for i in 0..=20 {
            for j in 0..=20 {
                let (x, y) = (i as f64 / 20.0, j as f64 / 20.0);
                assert!((table.eval(x, y) - f(x, y)).abs() < 1e-12, "({x}, {y})");
            }
        }
    }

    #[test]
    fn tabulated_gaussian_example_matches_the_closed_forms() {
        let params = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 0.7,
            sigma: 0.1,
            p: 0.1,
        };
        let g = grid(-2.0, 2.0, 161);
        let family = TabulatedFamily {
            lambda: g.iter().map(|&x| params.lambda(x)).collect(),
            mu: vec![0.0; g.len()],
            alpha: g
                .iter()
                .map(|&x| g.iter().map(|&y| params.alpha(x, y)).collect())
                .collect(),
            grid: g,
            sigma: 0.1,
            p: 0.1,
        };
        let tab = family.model(1000, 1.0, 1.0).unwrap();
        let exact = params.model(1000, 1.0, 1.0).unwrap();
        for i in 0..=40 {
            // off-grid points exercise the interpolant, not the nodes
            let y = -1.95 + 3.9 * (i as f64 + 0.37) / 41.0;
            let x = -1.95 + 3.9 * ((40 - i) as f64 + 0.61) / 41.0;
            let (a, b) = (tab.fitness1(y, x).unwrap(), exact.fitness1(y, x).unwrap());
            assert!((a - b).abs() < 1e-6, "fitness at ({y}, {x}): {a} vs {b}");
        }

        // the interpolated model supports the downstream analysis: same
        // singularity, same classification, curvatures close to the truth
        let reports = find_singularities(&tab, &tab.space().grid(801)).unwrap();
        assert_eq!(reports.len(), 1);
        let r = reports[0];
        assert!(r.x_star().abs() < 1e-6);
        assert_eq!(r.classification(), Classification::Branching);
        assert!((r.a() - params.curvature_a()).abs() < 1e-2);
        assert!((r.c() - params.curvature_c()).abs() < 1e-2);
    }

    #[test]
    fn rejects_malformed_tables() {
        let g = grid(0.0, 1.0, 5);
        assert!(CubicTable::new(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(CubicTable::new(&[0.0, 0.1, 0.5, 1.0], &[0.0; 4]).is_err());
        assert!(CubicTable::new(&g, &[0.0; 4]).is_err());
        assert!(CubicTable::new(&g, &[0.0, 0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(CubicTable2::new(&g, &vec![vec![0.0; 5]; 4]).is_err());
        assert!(CubicTable2::new(&g, &vec![vec![0.0; 4]; 5]).is_err());

        let family = TabulatedFamily {
            grid: g.clone(),
            lambda: vec![1.0; 5],
            mu: vec![0.0; 5],
            alpha: vec![vec![1.0; 5]; 5],
            sigma: 0.1,
            p: 1.5,
        };
        assert!(family.model(100, 1.0, 1.0).is_err());
    }
}
