//! Central finite-difference derivatives of the invasion fitness.
//!
//! First derivatives use step `first_scale * (1 + |point|)`; second
//! derivatives use a larger step because the difference quotient divides by
//! `h^2` and would otherwise amplify rounding noise past the documented
//! tolerances. Stencils may probe up to one step beyond the trait space
//! boundary; the rate functions are expected to tolerate that overshoot
//! (all built-in models are defined by globally smooth formulas).

use super::{ModelError, ModelSpec};

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Relative step scale for first derivatives.
    pub first_scale: f64,
    /// Relative step scale for second derivatives.
    pub second_scale: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            first_scale: 1e-5,
            second_scale: 3e-4,
        }
    }
}

impl FdConfig {
    /// First-derivative step at `point`.
    pub fn h1(&self, x: f64) -> f64 {
        self.first_scale * (1.0 + x.abs())
    }

    /// Second-derivative step at `point`.
    pub fn h2(&self, x: f64) -> f64 {
        self.second_scale * (1.0 + x.abs())
    }
}

fn f(m: &ModelSpec, y: f64, x: f64) -> Result<f64, ModelError> {
    // no space check: stencil points may overshoot the boundary slightly
    let r = m.growth(x);
    if r <= 0.0 {
        return Err(ModelError::NonviableResident { x, r });
    }
    let a = m.competition(x, x);
    if a <= 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "alpha({x},{x}) = {a} must be positive"
        )));
    }
    Ok(m.growth(y) - m.competition(y, x) * (r / a))
}

/// d/dy f(y;x)
pub fn d1_fitness1(m: &ModelSpec, y: f64, x: f64, cfg: &FdConfig) -> Result<f64, ModelError> {
    let h = cfg.h1(y);
    Ok((f(m, y + h, x)? - f(m, y - h, x)?) / (2.0 * h))
}

/// d/dx f(y;x)
pub fn d2_fitness1(m: &ModelSpec, y: f64, x: f64, cfg: &FdConfig) -> Result<f64, ModelError> {
    let h = cfg.h1(x);
    Ok((f(m, y, x + h)? - f(m, y, x - h)?) / (2.0 * h))
}

/// d^2/dy^2 f(y;x)
pub fn d11_fitness1(m: &ModelSpec, y: f64, x: f64, cfg: &FdConfig) -> Result<f64, ModelError> {
    let h = cfg.h2(y);
    Ok((f(m, y + h, x)? - 2.0 * f(m, y, x)? + f(m, y - h, x)?) / (h * h))
}

/// d^2/dx^2 f(y;x)
pub fn d22_fitness1(m: &ModelSpec, y: f64, x: f64, cfg: &FdConfig) -> Result<f64, ModelError> {
    let h = cfg.h2(x);
    Ok((f(m, y, x + h)? - 2.0 * f(m, y, x)? + f(m, y, x - h)?) / (h * h))
}

/// d^2/dy dx f(y;x)
pub fn d12_fitness1(m: &ModelSpec, y: f64, x: f64, cfg: &FdConfig) -> Result<f64, ModelError> {
    let hy = cfg.h2(y);
    let hx = cfg.h2(x);
    Ok(
        (f(m, y + hy, x + hx)? - f(m, y + hy, x - hx)? - f(m, y - hy, x + hx)?
            + f(m, y - hy, x - hx)?)
            / (4.0 * hy * hx),
    )
}

/// Selection gradient `d1 f(x;x)`, the quantity whose zeros are the
/// evolutionary singularities.
pub fn selection_gradient(m: &ModelSpec, x: f64, cfg: &FdConfig) -> Result<f64, ModelError> {
    d1_fitness1(m, x, x, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gaussian::GaussianExampleParams;

    fn setup(sigma_alpha: f64) -> (GaussianExampleParams, ModelSpec) {
        let p = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha,
            sigma: 0.1,
            p: 0.1,
        };
        let m = p.model(1000, 1.0, 1.0).unwrap();
        (p, m)
    }

    #[test]
    fn first_derivatives_match_analytic() {
        let (p, m) = setup(0.7);
        let cfg = FdConfig::default();
        for (y, x) in [(-1.0, -1.0), (0.3, -0.4), (1.5, 1.2), (0.0, 0.0), (-1.9, 1.9)] {
            let d1 = d1_fitness1(&m, y, x, &cfg).unwrap();
            let d2 = d2_fitness1(&m, y, x, &cfg).unwrap();
            let scale = p.d1_fitness(y, x).abs().max(1.0);
            assert!((d1 - p.d1_fitness(y, x)).abs() / scale < 1e-6, "d1 at ({y},{x})");
            let scale = p.d2_fitness(y, x).abs().max(1.0);
            assert!((d2 - p.d2_fitness(y, x)).abs() / scale < 1e-6, "d2 at ({y},{x})");
        }
    }

    #[test]
    fn second_derivatives_match_analytic() {
        for sa in [0.7, 1.0] {
            let (p, m) = setup(sa);
            let cfg = FdConfig::default();
            for (y, x) in [(0.0, 0.0), (-0.6, 0.8), (1.1, 1.0)] {
                let pairs = [
                    (d11_fitness1(&m, y, x, &cfg).unwrap(), p.d11_fitness(y, x)),
                    (d22_fitness1(&m, y, x, &cfg).unwrap(), p.d22_fitness(y, x)),
                    (d12_fitness1(&m, y, x, &cfg).unwrap(), p.d12_fitness(y, x)),
                ];
                for (fd, exact) in pairs {
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (fd - exact).abs() / scale < 1e-6,
                        "({y},{x}) fd {fd} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_identities_on_the_diagonal() {
        // f(x;x) = 0 for all x forces d1+d2 = 0 and d11+2 d12+d22 = 0
        let (_, m) = setup(0.7);
        let cfg = FdConfig::default();
        for x in [-1.7, -0.9, -0.2, 0.0, 0.4, 1.3] {
            let s1 = d1_fitness1(&m, x, x, &cfg).unwrap() + d2_fitness1(&m, x, x, &cfg).unwrap();
            assert!(s1.abs() < 1e-6, "gradient identity at {x}: {s1}");
            let s2 = d11_fitness1(&m, x, x, &cfg).unwrap()
                + 2.0 * d12_fitness1(&m, x, x, &cfg).unwrap()
                + d22_fitness1(&m, x, x, &cfg).unwrap();
            assert!(s2.abs() < 1e-5, "curvature identity at {x}: {s2}");
        }
    }

    #[test]
    fn gradient_vanishes_only_at_the_singularity() {
        let (_, m) = setup(0.7);
        let cfg = FdConfig::default();
        let g0 = selection_gradient(&m, 0.0, &cfg).unwrap();
        assert!(g0.abs() < 1e-9);
        assert!(selection_gradient(&m, -0.5, &cfg).unwrap() > 0.01);
        assert!(selection_gradient(&m, 0.5, &cfg).unwrap() < -0.01);
    }
}
