//! Grid and sample based checks of the standing model assumptions.
//!
//! None of the assumptions can be verified symbolically for user-supplied
//! rate functions, so they are probed numerically and reported as warnings.
//! An empty report means every probe passed, not that the assumptions are
//! proved.

use super::ModelSpec;
use crate::rng::replicate_rng;

#[derive(Debug, Clone)]
pub struct AuditConfig {
    /// Points for one-dimensional grids.
    pub grid: usize,
    /// Kernel draws used for the domination check.
    pub draws: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            grid: 1000,
            draws: 1000,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub warnings: Vec<String>,
    /// Observed suprema of the rate functions over the grid.
    pub max_birth: f64,
    pub max_death: f64,
    pub max_competition: f64,
    pub min_competition: f64,
    pub min_growth: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Probe boundedness, viability, competition positivity, kernel domination,
/// and two-sided mutation support.
pub fn audit_model(m: &ModelSpec, cfg: &AuditConfig) -> AuditReport {
    let mut rep = AuditReport {
        min_competition: f64::INFINITY,
        min_growth: f64::INFINITY,
        ..AuditReport::default()
    };
    let grid = m.space().grid(cfg.grid.max(2));

    for &x in &grid {
        let (b, d) = (m.birth(x), m.death(x));
        if !b.is_finite() || b < 0.0 {
            rep.warnings.push(format!("birth rate not finite/nonnegative at {x}: {b}"));
        }
        if !d.is_finite() || d < 0.0 {
            rep.warnings.push(format!("death rate not finite/nonnegative at {x}: {d}"));
        }
        let p = m.mut_prob(x);
        if !(0.0..=1.0).contains(&p) {
            rep.warnings.push(format!("mutation probability outside [0,1] at {x}: {p}"));
        }
        rep.max_birth = rep.max_birth.max(b);
        rep.max_death = rep.max_death.max(d);
        let g = b - d;
        if g < rep.min_growth {
            rep.min_growth = g;
        }
        if g <= 0.0 {
            rep.warnings.push(format!("growth rate r({x}) = {g} is not positive"));
        }
    }

    // competition on a coarser product grid (the full product would be
    // quadratic in the grid size)
    let side = (cfg.grid as f64).sqrt().ceil() as usize;
    let coarse = m.space().grid(side.max(2));
    for &x in &coarse {
        for &y in &coarse {
            let a = m.competition(x, y);
            if !a.is_finite() {
                rep.warnings.push(format!("competition not finite at ({x}, {y})"));
            }
            rep.max_competition = rep.max_competition.max(a);
            if a < rep.min_competition {
                rep.min_competition = a;
            }
        }
    }
    if rep.min_competition <= 0.0 {
        rep.warnings.push(format!(
            "competition kernel not bounded below by a positive constant (min {})",
            rep.min_competition
        ));
    }

    // kernel domination on sampled steps
    let mut rng = replicate_rng(cfg.seed, 0);
    let xs = m.space().grid(32);
    let per_x = (cfg.draws / xs.len()).max(1);
    'outer: for &x in &xs {
        for _ in 0..per_x {
            match m.kernel().sample(x, &mut rng) {
                Ok(h) => {
                    let dens = m.kernel().density(x, h);
                    let dom = m.kernel().dominating_density(h);
                    if dens > dom * (1.0 + 1e-9) {
                        rep.warnings.push(format!(
                            "kernel density {dens} exceeds dominating density {dom} at ({x}, {h})"
                        ));
                        break 'outer;
                    }
                }
                Err(e) => {
                    rep.warnings.push(format!("kernel sampler failed at {x}: {e}"));
                    break 'outer;
                }
            }
        }
    }

    // mutation steps must reach both directions from interior points
    let lo = m.space().lower();
    let w = m.space().width();
    for &x in &[lo + 0.25 * w, lo + 0.5 * w, lo + 0.75 * w] {
        let delta = 1e-3 * w;
        if m.kernel().density(x, delta) <= 0.0 || m.kernel().density(x, -delta) <= 0.0 {
            rep.warnings.push(format!(
                "mutation kernel lacks two-sided support at interior point {x}"
            ));
        }
    }

    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gaussian::GaussianExampleParams;
    use crate::model::{ModelSpec, TraitSpace};
    use std::sync::Arc;

    #[test]
    fn gaussian_example_passes_cleanly() {
        let m = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 0.7,
            sigma: 0.05,
            p: 0.1,
        }
        .model(1000, 1.0, 1.0)
        .unwrap();
        let rep = audit_model(&m, &AuditConfig::default());
        assert!(rep.passed(), "unexpected warnings: {:?}", rep.warnings);
        assert!(rep.max_birth <= 1.0 + 1e-12);
        assert!(rep.min_growth > 0.0);
    }

    #[test]
    fn nonviable_region_is_flagged() {
        let space = TraitSpace::new(-2.0, 2.0).unwrap();
        let kernel = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 0.7,
            sigma: 0.05,
            p: 0.1,
        }
        .kernel(space)
        .unwrap();
        // death exceeds birth near the edges
        let m = ModelSpec::new(
            space,
            Arc::new(|x: f64| (-x * x / 2.0).exp()),
            Arc::new(|_| 0.2),
            Arc::new(|_, _| 1.0),
            Arc::new(|_| 0.1),
            kernel,
            100,
            1.0,
            1.0,
        )
        .unwrap();
        let rep = audit_model(&m, &AuditConfig::default());
        assert!(!rep.passed());
        assert!(rep.warnings.iter().any(|w| w.contains("not positive")));
    }
}
