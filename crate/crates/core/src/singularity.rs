//! Evolutionary singularities: location, curvatures, branching
//! classification, local fitness expansions, and pairwise invasibility
//! plot (PIP) export.
//!
//! A singularity is a zero x* of the selection gradient d1 f(x;x). With
//! the curvatures `a = d11 f(x*;x*)` and `c = d22 f(x*;x*)`:
//!
//! * `c > a > 0`: branching (attracting, then the population splits)
//! * `c > a, a < 0`: attracting without branching
//! * `a > c`: repulsive
//! * `a = c`, `a = 0`, or `a + c = 0` within tolerance: degenerate,
//!   reported but not classified
//!
//! Coexisting pairs exist arbitrarily close to x* exactly when a + c > 0.

use crate::model::derivs::{d11_fitness1, d22_fitness1, selection_gradient, FdConfig};
use crate::model::{ModelError, ModelSpec, DEGENERATE_DET_REL_TOL};
use std::io::{self, Write};

/// Curvature combinations closer than this to the excluded cases
/// (`a = c`, `a = 0`, `a + c = 0`) are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Bisection refines singularities to this interval width.
pub const ROOT_TOL: f64 = 1e-10;

/// Fitness values within this band of zero get PIP sign 0.
pub const PIP_SIGN_TOL: f64 = 1e-12;

/// Default PIP window half-width around the singularity.
pub const PIP_DEFAULT_HALF_WIDTH: f64 = 0.5;

/// Default PIP resolution per axis.
pub const PIP_DEFAULT_RESOLUTION: usize = 400;

#[derive(Debug, thiserror::Error)]
pub enum SingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate singularity: {0}")]
    Degenerate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Branching,
    AttractingNoBranching,
    Repulsive,
    Degenerate,
}

fn classify(a: f64, c: f64) -> Classification {
    if (a - c).abs() < DEGENERACY_TOL || a.abs() < DEGENERACY_TOL || (a + c).abs() < DEGENERACY_TOL
    {
        Classification::Degenerate
    } else if a > c {
        Classification::Repulsive
    } else if a > 0.0 {
        Classification::Branching
    } else {
        Classification::AttractingNoBranching
    }
}

/// A located singularity with its curvatures and verdicts.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SingularityReport {
    x_star: f64,
    /// `d11 f(x*;x*)`, the mutant-side curvature.
    a: f64,
    /// `d22 f(x*;x*)`, the resident-side curvature.
    c: f64,
    classification: Classification,
    /// Whether coexisting pairs exist arbitrarily close to x*:
    /// the sign of a + c.
    coexistence_nearby: bool,
}

impl SingularityReport {
    /// Build a report from known curvatures; classification and the
    /// coexistence flag are derived.
    pub fn from_curvatures(x_star: f64, a: f64, c: f64) -> Self {
        SingularityReport {
            x_star,
            a,
            c,
            classification: classify(a, c),
            coexistence_nearby: a + c > 0.0,
        }
    }

    pub fn x_star(&self) -> f64 {
        self.x_star
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    pub fn coexistence_nearby(&self) -> bool {
        self.coexistence_nearby
    }
}

/// Scan the selection gradient over `bracket_grid`, bisect each sign
/// change down to [`ROOT_TOL`], and classify the roots. An empty result
/// means no sign change anywhere on the grid, which is not an error.
pub fn find_singularities(
    model: &ModelSpec,
    bracket_grid: &[f64],
) -> Result<Vec<SingularityReport>, SingError> {
    find_singularities_with(model, bracket_grid, &FdConfig::default())
}

/// [`find_singularities`] with explicit finite-difference settings.
pub fn find_singularities_with(
    model: &ModelSpec,
    bracket_grid: &[f64],
    cfg: &FdConfig,
) -> Result<Vec<SingularityReport>, SingError> {
    if bracket_grid.len() < 2 {
        return Err(SingError::Precondition(
            "bracket grid needs at least two points".into(),
        ));
    }
    let mut grads = Vec::with_capacity(bracket_grid.len());
    for &x in bracket_grid {
        model.space().check(x)?;
        grads.push(selection_gradient(model, x, cfg)?);
    }
    let mut roots = Vec::new();
    for (i, w) in bracket_grid.windows(2).enumerate() {
        let (g0, g1) = (grads[i], grads[i + 1]);
        if g0 == 0.0 {
            roots.push(w[0]);
        } else if i + 2 == bracket_grid.len() && g1 == 0.0 {
            // interior exact zeros are caught as the left end of the next
            // window; the last grid point has no next window
            roots.push(w[1]);
        } else if g0 * g1 < 0.0 {
            let (mut lo, mut hi) = (w[0], w[1]);
            let mut g_lo = g0;
            while hi - lo > ROOT_TOL {
                let mid = 0.5 * (lo + hi);
                let g_mid = selection_gradient(model, mid, cfg)?;
                if g_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if g_mid * g_lo < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    g_lo = g_mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    let mut reports = Vec::with_capacity(roots.len());
    for x_star in roots {
        let a = d11_fitness1(model, x_star, x_star, cfg)?;
        let c = d22_fitness1(model, x_star, x_star, cfg)?;
        reports.push(SingularityReport::from_curvatures(x_star, a, c));
    }
    Ok(reports)
}

/// Whether coexisting pairs exist arbitrarily close to the singularity:
/// true iff a + c > 0. Errors when a + c is too close to zero to decide.
pub fn coexistence_near_es(report: &SingularityReport) -> Result<bool, SingError> {
    let sum = report.a + report.c;
    if sum.abs() < DEGENERACY_TOL {
        return Err(SingError::Degenerate(format!(
            "a + c = {sum} is too close to zero, coexistence is undetermined"
        )));
    }
    Ok(sum > 0.0)
}

/// Exhaustive fitness-sign scan for a mutually invasible pair inside the
/// ball of the given radius around `center`, on a `grid_n` x `grid_n`
/// grid clipped to the trait space. Returns the first pair found.
pub fn coexisting_pair_in_ball(
    model: &ModelSpec,
    center: f64,
    radius: f64,
    grid_n: usize,
) -> Result<Option<(f64, f64)>, SingError> {
    let lo = (center - radius).max(model.space().lower());
    let hi = (center + radius).min(model.space().upper());
    let points: Vec<f64> = (0..grid_n)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64)
        .collect();
    for (i, &x) in points.iter().enumerate() {
        for &y in &points[i + 1..] {
            // a strict positivity floor keeps rounding noise on
            // near-diagonal pairs from minting fake coexistence
            if model.fitness1(y, x)? > 1e-13 && model.fitness1(x, y)? > 1e-13 {
                return Ok(Some((x, y)));
            }
        }
    }
    Ok(None)
}

// Fixed unit-scale probe configurations for the expansion diagnostics,
// rescaled by each scale around x*. Deterministic so the reported
// remainders are reproducible run to run.
const PAIR_PROBES: [(f64, f64); 8] = [
    (-1.0, 1.0),
    (-1.0, 0.4),
    (0.3, 1.0),
    (-0.8, -0.2),
    (0.2, 0.9),
    (-1.0, -0.35),
    (0.55, 1.0),
    (-0.6, 0.75),
];
const TRIPLE_PROBES: [(f64, f64, f64); 8] = [
    (-1.0, 1.0, 0.3),
    (-1.0, 0.8, -0.4),
    (-0.9, 1.0, 0.55),
    (-1.0, 0.5, 1.0),
    (-0.7, 0.2, 1.0),
    (0.15, 1.0, -1.0),
    (-1.0, -0.2, 0.6),
    (-0.45, 1.0, 0.2),
];

/// Formal two-resident equilibrium from the 2x2 linear system, without
/// sign preconditions: the local expansions are statements about this
/// algebraic object, valid whether or not the pair actually coexists.
fn formal_pair_equilibrium(model: &ModelSpec, x: f64, y: f64) -> Option<(f64, f64)> {
    let (axx, ayy) = (model.competition(x, x), model.competition(y, y));
    let (axy, ayx) = (model.competition(x, y), model.competition(y, x));
    let det = axx * ayy - axy * ayx;
    if det.abs() < DEGENERATE_DET_REL_TOL * (axx * ayy).abs() {
        return None;
    }
    let (rx, ry) = (model.growth(x), model.growth(y));
    Some(((rx * ayy - ry * axy) / det, (ry * axx - rx * ayx) / det))
}

/// Diagnostics from [`verify_expansions`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExpansionDiagnostics {
    pub scales: Vec<f64>,
    /// Worst normalized remainder of the pair expansion
    /// `f(y;x) ~ (1/2)(x-y)(c(x-x*) - a(y-x*))` at each scale.
    pub r2: Vec<f64>,
    /// Worst normalized remainder of the triple expansion
    /// `f(z;x,y) ~ (a/2)(z-x)(z-y)` at each scale.
    pub r3: Vec<f64>,
    pub r2_decreasing: bool,
    pub r3_decreasing: bool,
    /// Worst relative gap between `nbar1 + nbar2` and `nbar(x*)` over the
    /// probe pairs at the smallest scale.
    pub pair_mass_rel_err: f64,
    /// Finite-difference residual of the singularity identity
    /// `r'(x*) alpha(x*,x*) = r(x*) d1 alpha(x*,x*)`.
    pub es_identity_residual: f64,
}

/// Evaluate the local expansions of the fitness around a nondegenerate
/// singularity at a sequence of shrinking scales. The normalized
/// remainders must decrease with the scale if the expansions hold.
pub fn verify_expansions(
    model: &ModelSpec,
    report: &SingularityReport,
    scales: &[f64],
) -> Result<ExpansionDiagnostics, SingError> {
    if report.classification == Classification::Degenerate {
        return Err(SingError::Degenerate(
            "expansion verification needs a nondegenerate singularity".into(),
        ));
    }
    if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0)) {
        return Err(SingError::Precondition(
            "scales must be nonempty and positive".into(),
        ));
    }
    let (xs, a, c) = (report.x_star, report.a, report.c);
    let space = model.space();
    let mut r2 = Vec::with_capacity(scales.len());
    let mut r3 = Vec::with_capacity(scales.len());
    for &s in scales {
        let mut worst2 = 0.0f64;
        for &(ux, uy) in &PAIR_PROBES {
            let (x, y) = (xs + s * ux, xs + s * uy);
            if !(space.contains(x) && space.contains(y)) {
                continue;
            }
            let denom = (x - y).abs() * ((x - xs).abs() + (y - xs).abs());
            if denom == 0.0 {
                continue;
            }
            let lead = 0.5 * (x - y) * (c * (x - xs) - a * (y - xs));
            worst2 = worst2.max((model.fitness1(y, x)? - lead).abs() / denom);
        }
        r2.push(worst2);
        let mut worst3 = 0.0f64;
        for &(ux, uy, uz) in &TRIPLE_PROBES {
            let (x, y, z) = (xs + s * ux, xs + s * uy, xs + s * uz);
            if !(space.contains(x) && space.contains(y) && space.contains(z)) {
                continue;
            }
            let denom = (z - x).abs() * (z - y).abs();
            if denom == 0.0 {
                continue;
            }
            let Some((n1, n2)) = formal_pair_equilibrium(model, x, y) else {
                continue;
            };
            let f2 = model.growth(z) - model.competition(z, x) * n1 - model.competition(z, y) * n2;
            let lead = 0.5 * a * (z - x) * (z - y);
            worst3 = worst3.max((f2 - lead).abs() / denom);
        }
        r3.push(worst3);
    }
    let r2_decreasing = r2.windows(2).all(|w| w[1] < w[0]);
    let r3_decreasing = r3.windows(2).all(|w| w[1] < w[0]);

    // total-mass limit at the smallest scale: the formal pair equilibrium
    // masses must sum to the monomorphic mass at the singularity
    let s_min = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let nbar_star = model.monomorphic_equilibrium(xs)?;
    let mut pair_mass_rel_err = 0.0f64;
    for &(ux, uy) in &PAIR_PROBES {
        let (x, y) = (xs + s_min * ux, xs + s_min * uy);
        if !(space.contains(x) && space.contains(y)) {
            continue;
        }
        if let Some((n1, n2)) = formal_pair_equilibrium(model, x, y) {
            pair_mass_rel_err = pair_mass_rel_err.max((n1 + n2 - nbar_star).abs() / nbar_star);
        }
    }

    // at a singularity the growth and competition log-gradients align:
    // r'(x*) alpha(x*,x*) = r(x*) d1 alpha(x*,x*)
    let cfg = FdConfig::default();
    let h = cfg.h1(xs);
    let r_prime = (model.growth(xs + h) - model.growth(xs - h)) / (2.0 * h);
    let a_prime = (model.competition(xs + h, xs) - model.competition(xs - h, xs)) / (2.0 * h);
    let es_identity_residual =
        (r_prime * model.competition(xs, xs) - model.growth(xs) * a_prime).abs();

    Ok(ExpansionDiagnostics {
        scales: scales.to_vec(),
        r2,
        r3,
        r2_decreasing,
        r3_decreasing,
        pair_mass_rel_err,
        es_identity_residual,
    })
}

/// Fitness signs on a square trait grid: `signs[i * n + j]` is the sign
/// of `f(y_j; x_i)` for resident `x_i` and mutant `y_j`. The mutant and
/// resident axes share the same points, so the role-swapped sign is the
/// transposed entry and the coexistence flag is symmetric by
/// construction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PIPGrid {
    points: Vec<f64>,
    signs: Vec<i8>,
}

impl PIPGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn resolution(&self) -> usize {
        self.points.len()
    }

    /// Sign of `f(y_j; x_i)`: can mutant j invade resident i?
    pub fn sign_fyx(&self, i: usize, j: usize) -> i8 {
        self.signs[i * self.points.len() + j]
    }

    /// Sign of `f(x_i; y_j)`: can mutant i invade resident j?
    pub fn sign_fxy(&self, i: usize, j: usize) -> i8 {
        self.signs[j * self.points.len() + i]
    }

    /// Mutual invasibility flag for the cell (i, j).
    pub fn coexist(&self, i: usize, j: usize) -> bool {
        self.sign_fyx(i, j) > 0 && self.sign_fxy(i, j) > 0
    }
}

/// Evaluate the PIP on `resolution` x `resolution` points over `x_range`
/// (both axes). Rows are independent and dispatched through the replicate
/// pool.
pub fn pip(
    model: &ModelSpec,
    x_range: (f64, f64),
    resolution: usize,
) -> Result<PIPGrid, SingError> {
    let (lo, hi) = x_range;
    if !(lo < hi) || resolution < 2 {
        return Err(SingError::Precondition(format!(
            "need lo < hi and resolution >= 2, got [{lo}, {hi}] at {resolution}"
        )));
    }
    model.space().check(lo)?;
    model.space().check(hi)?;
    let points: Vec<f64> = (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
        .collect();
    let growth: Vec<f64> = points.iter().map(|&y| model.growth(y)).collect();
    let rows: Vec<Result<Vec<i8>, ModelError>> = crate::par::map_items(
        points.iter().copied().collect::<Vec<f64>>(),
        |x| {
            let nbar = model.monomorphic_equilibrium(x)?;
            Ok(points
                .iter()
                .zip(&growth)
                .map(|(&y, &ry)| {
                    let f = ry - model.competition(y, x) * nbar;
                    if f.abs() <= PIP_SIGN_TOL {
                        0
                    } else if f > 0.0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect())
        },
    );
    let mut signs = Vec::with_capacity(resolution * resolution);
    for row in rows {
        signs.extend(row?);
    }
    Ok(PIPGrid { points, signs })
}

/// Slopes of the two off-diagonal zero contours through the singularity,
/// measured at horizontal offset `dx`: the upper contour solves
/// `f(y; x* + dx) = 0` (tangent `c/a`), the lower solves
/// `f(x* + dx; y) = 0` (tangent `a/c`). Both are found by scanning for a
/// bracket away from the diagonal and bisecting. Meaningful for the
/// branching topology `c > a > 0`.
pub fn wedge_tangent_slopes(
    model: &ModelSpec,
    x_star: f64,
    dx: f64,
) -> Result<(f64, f64), SingError> {
    if !(dx > 0.0) {
        return Err(SingError::Precondition(format!(
            "dx must be positive, got {dx}"
        )));
    }
    let x = x_star + dx;
    let upper = {
        let f = |y: f64| model.fitness1(y, x);
        bisect_scan(f, x_star, dx, 1.05, 20.0, 380)?
    };
    let lower = {
        let f = |y: f64| model.fitness1(x, y);
        bisect_scan(f, x_star, dx, 0.05, 0.95, 180)?
    };
    Ok(((upper - x_star) / dx, (lower - x_star) / dx))
}

/// Scan `y = x_star + t dx` for `t` over `[t_lo, t_hi]` looking for a
/// sign change of `f`, then bisect it down.
fn bisect_scan<F>(
    f: F,
    x_star: f64,
    dx: f64,
    t_lo: f64,
    t_hi: f64,
    steps: usize,
) -> Result<f64, SingError>
where
    F: Fn(f64) -> Result<f64, ModelError>,
{
    let at = |t: f64| x_star + t * dx;
    let mut prev_t = t_lo;
    let mut prev_f = f(at(prev_t))?;
    let mut bracket = None;
    for k in 1..=steps {
        let t = t_lo + (t_hi - t_lo) * k as f64 / steps as f64;
        let ft = f(at(t))?;
        if prev_f * ft < 0.0 {
            bracket = Some((prev_t, t, prev_f));
            break;
        }
        prev_t = t;
        prev_f = ft;
    }
    let Some((mut lo, mut hi, mut f_lo)) = bracket else {
        return Err(SingError::Numerical(
            "no off-diagonal zero contour found in the scan range".into(),
        ));
    };
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(at(mid))?;
        if f_mid == 0.0 {
            return Ok(at(mid));
        }
        if f_mid * f_lo < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// CSV export: one row per grid cell with both fitness signs and the
/// coexistence flag.
pub fn write_pip_csv<W: Write>(mut w: W, grid: &PIPGrid) -> io::Result<()> {
    writeln!(w, "x,y,sign_fyx,sign_fxy,coexist")?;
    let n = grid.resolution();
    for i in 0..n {
        for j in 0..n {
            writeln!(
                w,
                "{},{},{},{},{}",
                grid.points[i],
                grid.points[j],
                grid.sign_fyx(i, j),
                grid.sign_fxy(i, j),
                u8::from(grid.coexist(i, j))
            )?;
        }
    }
    Ok(())
}

/// JSON export of a report.
pub fn write_report_json<W: Write>(mut w: W, report: &SingularityReport) -> io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    writeln!(w, "{text}")
}
