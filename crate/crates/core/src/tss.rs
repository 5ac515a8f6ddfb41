//! The rescaled trait substitution sequence and the canonical equation it
//! degenerates to as the jump scale vanishes.
//!
//! From a monomorphic resident `x` the substitution sequence jumps to
//! `x + epsilon h` at rate `(1/epsilon^2) [g(x + epsilon h; x)]_+ m(x, dh)`
//! with
//!
//! ```text
//! g(y;x) = p(x) lambda(x) nbar(x) f(y;x) / lambda(y)
//! ```
//!
//! the substitution-rate density. We simulate it by thinning: proposals
//! arrive at the constant rate `gamma M / epsilon^2`, where `gamma` bounds
//! `[g]_+` over the space and `M` is the mass of the kernel's dominating
//! density; each proposal draws `h` from the normalized dominating density
//! and is accepted with `([g(x + epsilon h; x)]_+ / gamma) (m(x,h)/mbar(h))`.
//! Both factors are at most one whenever the bounds hold, and a runtime
//! audit errors out if a computed ratio ever exceeds one.
//!
//! The canonical equation `dx/dt = int h [h d1g(x;x)]_+ m(x, dh)` is
//! integrated with the adaptive stepper from `ode`. Near the boundary the
//! conditioned kernel is asymmetric, so the half-space moment is computed
//! by quadrature instead of the symmetric shortcut `(sigma^2/2) d1g`.

use crate::model::derivs::FdConfig;
use crate::model::{ModelError, ModelSpec};
use crate::ode::{OdeError, OdeOptions, Stepper};
use crate::quad;
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::Exp1;
use std::cell::Cell;
use std::io::{self, Write};

/// Grid resolution per axis when maximizing `[g]_+` for the gamma bound.
pub const GAMMA_GRID: usize = 201;

/// Safety factor applied to the grid maximum of `[g]_+`.
pub const GAMMA_SAFETY: f64 = 1.2;

/// Kernel quadratures truncate the step range at this many kernel scales.
pub const KERNEL_TRUNCATION: f64 = 8.0;

#[derive(Debug, thiserror::Error)]
pub enum TssError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("model assumption violated: {0}")]
    AssumptionViolation(String),
    #[error(
        "thinning acceptance ratio {ratio} > 1 at x = {x}, h = {h}: \
         the dominating density does not dominate"
    )]
    DominatingBound { ratio: f64, x: f64, h: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// `g(y;x)` without the space membership check on `y`, so derivative
/// stencils may overshoot the boundary slightly.
fn g_raw(model: &ModelSpec, y: f64, x: f64) -> Result<f64, TssError> {
    let lambda_y = model.birth(y);
    if lambda_y <= 0.0 {
        return Err(TssError::AssumptionViolation(format!(
            "birth rate lambda({y}) = {lambda_y} must be positive"
        )));
    }
    if y == x {
        return Ok(0.0);
    }
    let nbar = model.monomorphic_equilibrium(x)?;
    let fitness = model.growth(y) - model.competition(y, x) * nbar;
    Ok(model.mut_prob(x) * model.birth(x) * nbar * fitness / lambda_y)
}

/// Substitution-rate density `g(y;x) = p(x) lambda(x) nbar(x) f(y;x) / lambda(y)`.
///
/// Shares its sign with the invasion fitness and vanishes on the diagonal.
pub fn g_function(model: &ModelSpec, y: f64, x: f64) -> Result<f64, TssError> {
    model.space().check(y)?;
    model.space().check(x)?;
    g_raw(model, y, x)
}

/// `d/dy g(y;x)` at `y = x`, by central differences. Equal to
/// `p(x) nbar(x) d1f(x;x)` because the remaining product rule terms carry
/// a factor `f(x;x) = 0`.
pub fn d1_g_diagonal(model: &ModelSpec, x: f64, cfg: &FdConfig) -> Result<f64, TssError> {
    let h = cfg.h1(x);
    Ok((g_raw(model, x + h, x)? - g_raw(model, x - h, x)?) / (2.0 * h))
}

/// Upper bound for `[g]_+` over the whole space: grid maximization with a
/// [`GAMMA_SAFETY`] factor. Residents with nonpositive growth cannot host
/// the substitution sequence and are skipped.
pub fn gamma_bound(model: &ModelSpec) -> Result<f64, TssError> {
    let grid = model.space().grid(GAMMA_GRID);
    let mut best = 0.0f64;
    let mut viable = 0usize;
    for &x in &grid {
        if model.growth(x) <= 0.0 {
            continue;
        }
        viable += 1;
        for &y in &grid {
            best = best.max(g_raw(model, y, x)?);
        }
    }
    if viable == 0 {
        return Err(TssError::Precondition(
            "no viable resident anywhere on the trait space".into(),
        ));
    }
    if !best.is_finite() {
        return Err(TssError::Numerical(format!(
            "gamma grid maximization returned {best}"
        )));
    }
    Ok(GAMMA_SAFETY * best)
}

/// Total jump rate of the rescaled sequence out of `x`, by quadrature:
/// `(1/epsilon^2) int [g(x + epsilon h; x)]_+ m(x,h) dh`.
///
/// The integrand has a kink where `g` changes sign, in particular at
/// `h = 0`, so each side of the origin is integrated with its own panels.
pub fn tss_jump_rate(
    model: &ModelSpec,
    x: f64,
    epsilon: f64,
    nodes: usize,
) -> Result<f64, TssError> {
    model.space().check(x)?;
    check_epsilon(epsilon)?;
    let kernel = model.kernel();
    let cut = KERNEL_TRUNCATION * kernel.scale();
    let lo = (model.space().lower() - x).max(-cut);
    let hi = (model.space().upper() - x).min(cut);
    let integrand = |h: f64| {
        let m = kernel.density(x, h);
        if m == 0.0 {
            return 0.0;
        }
        let g = g_raw(model, x + epsilon * h, x).unwrap_or(f64::NAN);
        g.max(0.0) * m
    };
    let total = (quad::integrate_paneled(&integrand, lo, 0.0, nodes, 8)
        + quad::integrate_paneled(&integrand, 0.0, hi, nodes, 8))
        / (epsilon * epsilon);
    if !total.is_finite() {
        return Err(TssError::Numerical(format!(
            "jump rate quadrature at x = {x} returned {total}"
        )));
    }
    Ok(total)
}

fn check_epsilon(epsilon: f64) -> Result<(), TssError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(TssError::Precondition(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    Ok(())
}

/// One proposal of the thinning chain, resolved.
#[derive(Debug, Clone, Copy)]
pub struct TssProposal {
    /// Clock time of the proposal.
    pub time: f64,
    /// Proposed mutant trait `x + epsilon h`.
    pub mutant: f64,
    /// Acceptance probability that was used for the coin flip.
    pub acceptance: f64,
    /// Whether the chain jumped to the mutant.
    pub accepted: bool,
}

/// The thinning chain itself: current trait, accelerated clock, and the
/// cached gamma bound (one grid maximization per chain, not per step).
pub struct TssSimulation {
    model: ModelSpec,
    epsilon: f64,
    gamma: f64,
    proposal_rate: f64,
    time: f64,
    trait_value: f64,
}

impl TssSimulation {
    pub fn new(model: &ModelSpec, x0: f64, epsilon: f64) -> Result<Self, TssError> {
        model.space().check(x0)?;
        check_epsilon(epsilon)?;
        model.monomorphic_equilibrium(x0)?;
        let gamma = gamma_bound(model)?;
        let proposal_rate = gamma * model.kernel().dominating_mass() / (epsilon * epsilon);
        Ok(TssSimulation {
            model: model.clone(),
            epsilon,
            gamma,
            proposal_rate,
            time: 0.0,
            trait_value: x0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Proposal intensity on the accelerated clock; zero when `p = 0`.
    pub fn proposal_rate(&self) -> f64 {
        self.proposal_rate
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn trait_value(&self) -> f64 {
        self.trait_value
    }

    /// Restart from `x0` at clock zero, keeping the cached gamma bound.
    pub fn reset(&mut self, x0: f64) -> Result<(), TssError> {
        self.model.space().check(x0)?;
        self.model.monomorphic_equilibrium(x0)?;
        self.time = 0.0;
        self.trait_value = x0;
        Ok(())
    }

    /// Advance to the next proposal and resolve it. Errors if the computed
    /// acceptance ratio exceeds one, since that means the dominating
    /// density or the gamma bound failed and every rate so far is suspect.
    pub fn propose(&mut self, rng: &mut SimRng) -> Result<TssProposal, TssError> {
        if self.proposal_rate <= 0.0 {
            return Err(TssError::Precondition(
                "proposal rate is zero: the chain never moves".into(),
            ));
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / self.proposal_rate;
        self.time += wait;
        let x = self.trait_value;
        let kernel = self.model.kernel();
        let h = kernel.sample_dominating(rng);
        let mutant = x + self.epsilon * h;
        let m = kernel.density(x, h);
        let acceptance = if m == 0.0 {
            // full-size step x + h leaves the space, so m(x,h) = 0; the
            // epsilon-scaled mutant may be inside but the rate is zero
            0.0
        } else {
            let mbar = kernel.dominating_density(h);
            let g = g_raw(&self.model, mutant, x)?;
            let ratio = (g.max(0.0) / self.gamma) * (m / mbar);
            if !(ratio <= 1.0) {
                return Err(TssError::DominatingBound { ratio, x, h });
            }
            ratio
        };
        let accepted = rng.gen::<f64>() < acceptance;
        if accepted {
            self.trait_value = mutant;
        }
        Ok(TssProposal {
            time: self.time,
            mutant,
            acceptance,
            accepted,
        })
    }
}

/// Piecewise-constant substitution path on `[0, t_end]`. The first point
/// is `(0, x0)`; every later point is an accepted jump.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TSSPath {
    points: Vec<(f64, f64)>,
    epsilon: f64,
    t_end: f64,
}

impl TSSPath {
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn jump_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn final_trait(&self) -> f64 {
        self.points.last().expect("paths are never empty").1
    }

    /// Value at time `t`, right-continuous in the jumps.
    pub fn at(&self, t: f64) -> f64 {
        let mut value = self.points[0].1;
        for &(ti, xi) in &self.points {
            if ti <= t {
                value = xi;
            } else {
                break;
            }
        }
        value
    }

    /// Largest jump size along the path; at most `epsilon * diam(space)`.
    pub fn max_jump(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs())
            .fold(0.0, f64::max)
    }
}

/// Run the thinning construction from `x0` up to `t_end` on the
/// accelerated clock. Jump sizes never exceed `epsilon * diam(space)`
/// because the conditioned kernel cannot step past the boundary.
pub fn simulate_tss(
    model: &ModelSpec,
    x0: f64,
    epsilon: f64,
    t_end: f64,
    rng: &mut SimRng,
) -> Result<TSSPath, TssError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(TssError::Precondition(format!(
            "t_end must be finite and nonnegative, got {t_end}"
        )));
    }
    let mut sim = TssSimulation::new(model, x0, epsilon)?;
    let mut points = vec![(0.0, x0)];
    if sim.proposal_rate() > 0.0 {
        loop {
            let prop = sim.propose(rng)?;
            if prop.time > t_end {
                break;
            }
            if prop.accepted {
                points.push((prop.time, prop.mutant));
            }
        }
    }
    Ok(TSSPath {
        points,
        epsilon,
        t_end,
    })
}

/// Right-hand side of the canonical equation at `x`:
/// `int h [h d1g(x;x)]_+ m(x,h) dh`, which is the half-space second moment
/// of the conditioned kernel on the uphill side, weighted by the diagonal
/// gradient of `g`. For a symmetric interior kernel this reduces to
/// `(sigma^2 / 2) d1g(x;x)`; near the boundary the conditioning skews the
/// kernel and the one-sided integral is the correct object.
pub fn canonical_drift(model: &ModelSpec, x: f64) -> Result<f64, TssError> {
    canonical_drift_with(model, x, &FdConfig::default(), quad::DEFAULT_NODES)
}

/// [`canonical_drift`] with explicit stencil and quadrature settings.
pub fn canonical_drift_with(
    model: &ModelSpec,
    x: f64,
    cfg: &FdConfig,
    nodes: usize,
) -> Result<f64, TssError> {
    model.space().check(x)?;
    let g1 = d1_g_diagonal(model, x, cfg)?;
    if !g1.is_finite() {
        return Err(TssError::Numerical(format!(
            "diagonal gradient of g at x = {x} is {g1}"
        )));
    }
    if g1 == 0.0 {
        return Ok(0.0);
    }
    let kernel = model.kernel();
    let cut = KERNEL_TRUNCATION * kernel.scale();
    // the integrand h [h g1]_+ m is g1 h^2 m on the half-line where
    // h g1 > 0 and zero on the other half
    let (lo, hi) = if g1 > 0.0 {
        (0.0, cut.min(model.space().upper() - x))
    } else {
        ((-cut).max(model.space().lower() - x), 0.0)
    };
    let moment = quad::integrate(|h| h * h * kernel.density(x, h), lo, hi, nodes);
    if !moment.is_finite() {
        return Err(TssError::Numerical(format!(
            "kernel moment quadrature at x = {x} returned {moment}"
        )));
    }
    Ok(g1 * moment)
}

/// Numerical solution of the canonical equation on the adaptive time grid
/// chosen by the stepper.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CanonicalSolution {
    times: Vec<f64>,
    values: Vec<f64>,
    drifts: Vec<f64>,
    error_estimate: f64,
}

impl CanonicalSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Drift evaluated at each grid point; the exact slopes of `x(t)`.
    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    /// Accumulated local error of the integrator, a heuristic global bound
    /// for these contracting dynamics.
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("solutions are never empty")
    }

    /// Cubic Hermite interpolation on the solution grid, using the stored
    /// drifts as slopes. Clamped to the grid range.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&ti| ti <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let dt = t1 - t0;
        let s = (t - t0) / dt;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.drifts[i] * dt, self.drifts[i + 1] * dt);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }
}

/// Integrate `dx/dt = canonical_drift(x)` from `x0` to `t_end` with the
/// adaptive stepper, local tolerance `tol`.
pub fn solve_canonical(
    model: &ModelSpec,
    x0: f64,
    t_end: f64,
    tol: f64,
) -> Result<CanonicalSolution, TssError> {
    model.space().check(x0)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(TssError::Precondition(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(TssError::Precondition(format!(
            "t_end must be finite and nonnegative, got {t_end}"
        )));
    }
    let cfg = FdConfig::default();
    let space = *model.space();
    // stage evaluations may poke a hair past the boundary; clamp them and
    // surface any model error through the cell
    let fail: Cell<Option<TssError>> = Cell::new(None);
    let rhs = |y: &[f64], dy: &mut [f64]| {
        let x = y[0].clamp(space.lower(), space.upper());
        match canonical_drift_with(model, x, &cfg, quad::DEFAULT_NODES) {
            Ok(b) => dy[0] = b,
            Err(e) => {
                fail.set(Some(e));
                dy[0] = f64::NAN;
            }
        }
    };
    let opts = OdeOptions {
        abs_tol: tol * 1e-3,
        rel_tol: tol,
        h_max: 1.0,
        reject_negative: false,
    };
    let mut stepper = Stepper::new(rhs, 0.0, vec![x0], opts);
    let mut times = vec![0.0];
    let mut values = vec![x0];
    let mut drifts = vec![canonical_drift_with(model, x0, &cfg, quad::DEFAULT_NODES)?];
    while stepper.t() < t_end - f64::EPSILON * t_end.abs().max(1.0) {
        if let Err(e) = stepper.step(t_end) {
            if let Some(model_err) = fail.take() {
                return Err(model_err);
            }
            return Err(e.into());
        }
        let (t, x) = (stepper.t(), stepper.y()[0]);
        if !space.contains(x) {
            return Err(TssError::Numerical(format!(
                "canonical solution left the trait space: x({t}) = {x}"
            )));
        }
        times.push(t);
        values.push(x);
        drifts.push(canonical_drift_with(model, x, &cfg, quad::DEFAULT_NODES)?);
    }
    let error_estimate = stepper.accumulated_error;
    Ok(CanonicalSolution {
        times,
        values,
        drifts,
        error_estimate,
    })
}

/// Long-format trajectory CSV for a substitution path, same layout as the
/// individual-based writer: the support is the single current trait, the
/// density its monomorphic equilibrium.
pub fn write_tss_csv<W: Write>(mut w: W, model: &ModelSpec, path: &TSSPath) -> Result<(), TssError> {
    writeln!(w, "{}", crate::ibm::TRAJECTORY_FORMAT)?;
    writeln!(w, "time,trait,density")?;
    for &(t, x) in path.points() {
        let nbar = model.monomorphic_equilibrium(x)?;
        writeln!(w, "{t},{x},{nbar}")?;
    }
    Ok(())
}

/// Long-format trajectory CSV for a canonical solution, one row per grid
/// time.
pub fn write_canonical_csv<W: Write>(
    mut w: W,
    model: &ModelSpec,
    sol: &CanonicalSolution,
) -> Result<(), TssError> {
    writeln!(w, "{}", crate::ibm::TRAJECTORY_FORMAT)?;
    writeln!(w, "time,trait,density")?;
    for (&t, &x) in sol.times().iter().zip(sol.values()) {
        let nbar = model.monomorphic_equilibrium(x)?;
        writeln!(w, "{t},{x},{nbar}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gaussian::GaussianExampleParams;
    use crate::model::TraitSpace;
    use crate::par::run_replicates;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, Normal};
    use statrs::distribution::{ContinuousCDF, Normal as NormalDist};
    use std::sync::Arc;

    // Wide-kernel dilute-mutation regime used by the quadrature notes for
    // the canonical reference values.
    fn model(sigma_alpha: f64) -> ModelSpec {
        GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha,
            sigma: 1.0,
            p: 0.1,
        }
        .model(1000, 1.0, 1.0)
        .unwrap()
    }

    // Gaussian-competition model with a custom birth profile and a normal
    // step kernel of the given width.
    fn custom_model(
        birth: impl Fn(f64) -> f64 + Send + Sync + 'static,
        p: f64,
        kernel_sigma: f64,
    ) -> ModelSpec {
        let space = TraitSpace::new(-2.0, 2.0).unwrap();
        let kernel = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 1.0,
            sigma: kernel_sigma,
            p,
        }
        .kernel(space)
        .unwrap();
        ModelSpec::new(
            space,
            Arc::new(birth),
            Arc::new(|_| 0.0),
            Arc::new(|x: f64, y: f64| (-0.5 * (x - y) * (x - y)).exp()),
            Arc::new(move |_| p),
            kernel,
            1000,
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn g_vanishes_on_the_diagonal_and_tracks_the_fitness_sign() {
        let m = model(1.0);
        for x in [-1.5, -0.3, 0.0, 0.9] {
            assert_eq!(g_function(&m, x, x).unwrap(), 0.0);
        }
        for (y, x) in [(-0.5, -1.0), (-1.2, -1.0), (0.3, 0.5), (1.9, -1.9)] {
            let g = g_function(&m, y, x).unwrap();
            let f = m.fitness1(y, x).unwrap();
            assert_eq!(g > 0.0, f > 0.0, "sign mismatch at ({y};{x})");
            assert_eq!(g < 0.0, f < 0.0, "sign mismatch at ({y};{x})");
        }
    }

    #[test]
    fn diagonal_gradient_reduces_to_the_fitness_gradient() {
        // d1 g(x;x) = p nbar(x) d1 f(x;x); nbar = lambda here since
        // alpha(x,x) = 1 and mu = 0
        let params = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 1.0,
            sigma: 1.0,
            p: 0.1,
        };
        let m = model(1.0);
        let cfg = FdConfig::default();
        for x in [-1.5, -1.0, -0.4, 0.0, 0.8] {
            let fd = d1_g_diagonal(&m, x, &cfg).unwrap();
            let exact = 0.1 * params.lambda(x) * params.d1_fitness(x, x);
            assert!(
                (fd - exact).abs() < 1e-6 * exact.abs().max(1.0),
                "at {x}: fd {fd} vs {exact}"
            );
        }
        let fd = d1_g_diagonal(&m, -1.0, &cfg).unwrap();
        assert!((fd - 0.03592104430423584).abs() < 1e-8, "fd {fd}");
    }

    #[test]
    fn drift_matches_the_quadrature_references() {
        let m = model(1.0);
        let d1 = canonical_drift(&m, -1.0).unwrap();
        assert!((d1 - 0.02075541603189303).abs() < 1e-9, "drift(-1) = {d1}");
        let d2 = canonical_drift(&m, -0.5).unwrap();
        assert!((d2 - 0.02200669398177919).abs() < 1e-9, "drift(-0.5) = {d2}");
        // the singularity is a rest point
        assert!(canonical_drift(&m, 0.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn interior_symmetric_kernel_reduces_to_the_variance_formula() {
        // kernel sd 0.1: at these points the boundary is at least 13 sds
        // away and the conditioning is numerically invisible
        let m = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 1.0,
            sigma: 0.1,
            p: 0.1,
        }
        .model(1000, 1.0, 1.0)
        .unwrap();
        let cfg = FdConfig::default();
        for x in [-1.0, -0.5, 0.7] {
            let drift = canonical_drift(&m, x).unwrap();
            let closed = 0.5 * 0.01 * d1_g_diagonal(&m, x, &cfg).unwrap();
            assert!(
                (drift - closed).abs() <= 1e-6,
                "at {x}: {drift} vs {closed}"
            );
        }
    }

    #[test]
    fn one_sided_kernel_with_downhill_gradient_gives_zero_drift() {
        // all kernel mass on h > 0; where the gradient of g points down,
        // [h d1g]_+ vanishes on the support and the drift is exactly zero
        let space = TraitSpace::new(-2.0, 2.0).unwrap();
        let sigma = 0.1f64;
        let pdf = move |h: f64| {
            (-0.5 * (h / sigma) * (h / sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let kernel = crate::model::MutationKernel::new(
            Arc::new(move |x: f64, rng: &mut SimRng| {
                let normal = Normal::new(0.0, sigma).unwrap();
                loop {
                    let h = normal.sample(rng).abs();
                    if space.contains(x + h) {
                        return Ok(h);
                    }
                }
            }),
            Arc::new(move |x: f64, h: f64| {
                if h <= 0.0 || !space.contains(x + h) {
                    return 0.0;
                }
                2.0 * pdf(h)
            }),
            Arc::new(move |h: f64| if h <= 0.0 { 0.0 } else { 2.0 * pdf(h) }),
            1.0,
            Arc::new(move |rng: &mut SimRng| {
                Normal::new(0.0, sigma).unwrap().sample(rng).abs()
            }),
            sigma,
        );
        let params = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 1.0,
            sigma,
            p: 0.1,
        };
        let m = ModelSpec::new(
            space,
            Arc::new(move |x| params.lambda(x)),
            Arc::new(|_| 0.0),
            Arc::new(move |x, y| params.alpha(x, y)),
            Arc::new(|_| 0.1),
            kernel,
            1000,
            1.0,
            1.0,
        )
        .unwrap();
        // downhill side: gradient negative, no mass where h d1g > 0
        assert_eq!(canonical_drift(&m, 0.5).unwrap(), 0.0);
        // uphill side: the same kernel pushes strictly up
        assert!(canonical_drift(&m, -0.5).unwrap() > 1e-4);
    }

    #[test]
    fn jump_rate_quadrature_matches_the_reference_values() {
        let m = model(1.0);
        let r002 = tss_jump_rate(&m, -1.0, 0.02, quad::DEFAULT_NODES).unwrap();
        assert!((r002 - 0.8289812007950894).abs() < 1e-8, "rate {r002}");
        let r008 = tss_jump_rate(&m, -1.0, 0.08, quad::DEFAULT_NODES).unwrap();
        assert!((r008 - 0.196996380462885).abs() < 1e-8, "rate {r008}");
    }

    #[test]
    fn empirical_holding_times_match_the_quadrature_rate() {
        let m = model(1.0);
        let (x0, eps) = (-1.0, 0.08);
        let rate = tss_jump_rate(&m, x0, eps, quad::DEFAULT_NODES).unwrap();
        let mut sim = TssSimulation::new(&m, x0, eps).unwrap();
        let mut rng = rng_from_seed(17);
        let n = 10_000u32;
        let mut total = 0.0;
        for _ in 0..n {
            sim.reset(x0).unwrap();
            loop {
                let prop = sim.propose(&mut rng).unwrap();
                assert!(
                    (0.0..=1.0).contains(&prop.acceptance),
                    "acceptance {} outside [0,1]",
                    prop.acceptance
                );
                if prop.accepted {
                    total += prop.time;
                    break;
                }
            }
        }
        let mean = total / n as f64;
        let want = 1.0 / rate;
        let se = want / (n as f64).sqrt();
        assert!(
            (mean - want).abs() <= 3.0 * se,
            "mean holding {mean} vs {want} (se {se})"
        );
    }

    #[test]
    fn zero_mutation_profile_freezes_the_path() {
        let m = custom_model(
            |x| (-x * x / (2.0 * 0.81)).exp(),
            0.0,
            1.0,
        );
        let mut rng = rng_from_seed(3);
        let path = simulate_tss(&m, -1.0, 0.1, 50.0, &mut rng).unwrap();
        assert_eq!(path.points(), &[(0.0, -1.0)]);
        assert_eq!(path.jump_count(), 0);
        assert_eq!(path.at(49.0), -1.0);
    }

    #[test]
    fn mean_path_follows_the_canonical_flow() {
        let m = model(1.0);
        let t_end = 50.0;
        let sol = solve_canonical(&m, -1.0, t_end, 1e-10).unwrap();
        let paths = run_replicates(4242, 20, |_, rng| {
            simulate_tss(&m, -1.0, 0.02, t_end, rng).unwrap()
        });
        let mut sup = 0.0f64;
        for i in 0..=100 {
            let t = t_end * i as f64 / 100.0;
            let mean = paths.iter().map(|p| p.at(t)).sum::<f64>() / paths.len() as f64;
            sup = sup.max((mean - sol.at(t)).abs());
        }
        assert!(sup <= 0.1, "sup deviation {sup}");
        let bound = 0.02 * m.space().width();
        for p in &paths {
            assert!(p.max_jump() <= bound + 1e-12, "jump {} > {bound}", p.max_jump());
            for &(_, x) in p.points() {
                assert!(m.space().contains(x));
            }
        }
    }

    #[test]
    fn paths_climb_monotonically_until_near_the_singularity() {
        // below -eta every backward step is fitness-negative (the mutual
        // invasibility region starts at jump sizes far beyond eps * diam),
        // so accepted jumps strictly increase the trait
        let m = model(1.0);
        let paths = run_replicates(77, 10, |_, rng| {
            simulate_tss(&m, -1.0, 0.02, 50.0, rng).unwrap()
        });
        let eta = 0.1;
        for p in &paths {
            for w in p.points().windows(2) {
                if w[0].1 >= -eta {
                    break;
                }
                assert!(
                    w[1].1 > w[0].1,
                    "non-monotone jump {} -> {} below -{eta}",
                    w[0].1,
                    w[1].1
                );
            }
        }
    }

    #[test]
    fn canonical_solution_matches_the_reference_trajectory() {
        let m = model(1.0);
        let sol = solve_canonical(&m, -1.0, 200.0, 1e-10).unwrap();
        for w in sol.values().windows(2) {
            assert!(w[1] > w[0], "not strictly increasing: {} -> {}", w[0], w[1]);
        }
        // approaches the singularity from below without reaching it
        assert!(sol.final_value() < 0.0);
        for (t, want) in [
            (10.0, -0.7717863171807873),
            (25.0, -0.42423077190119274),
            (50.0, -0.12238985967304913),
            (100.0, -0.010656952227827943),
            (200.0, -8.927358755549442e-05),
        ] {
            let got = sol.at(t);
            assert!((got - want).abs() < 1e-6, "x({t}) = {got} vs {want}");
        }
    }

    #[test]
    fn time_to_leave_the_climb_matches_the_reference() {
        // first time the solution from -1 reaches -0.1, located by
        // bisection on the interpolant
        let m = model(1.0);
        let sol = solve_canonical(&m, -1.0, 80.0, 1e-10).unwrap();
        let (mut lo, mut hi) = (0.0f64, 80.0f64);
        assert!(sol.at(lo) < -0.1 && sol.at(hi) > -0.1);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if sol.at(mid) < -0.1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_cross = 0.5 * (lo + hi);
        assert!(
            (t_cross - 54.04188058154265).abs() < 1e-3,
            "t_cross {t_cross}"
        );
    }

    #[test]
    fn the_singularity_is_a_rest_point_of_the_flow() {
        let m = model(1.0);
        let sol = solve_canonical(&m, 0.0, 50.0, 1e-10).unwrap();
        for &v in sol.values() {
            assert!(v.abs() < 1e-8, "drifted to {v}");
            assert!(m.space().contains(v));
        }
    }

    #[test]
    fn approach_is_no_faster_than_exponential() {
        // |x(t)| >= |x0| exp(-c t) with c the largest |drift/x| seen along
        // the solution: the drift is c-Lipschitz through the rest point on
        // the visited range, so the flow cannot beat the linear bound
        let m = model(1.0);
        let sol = solve_canonical(&m, -1.0, 150.0, 1e-10).unwrap();
        let c = sol
            .values()
            .iter()
            .zip(sol.drifts())
            .filter(|(&x, _)| x != 0.0)
            .map(|(&x, &b)| (b / x).abs())
            .fold(0.0, f64::max)
            * (1.0 + 1e-9);
        for (&t, &x) in sol.times().iter().zip(sol.values()) {
            let bound = (-c * t).exp();
            assert!(
                x.abs() >= bound * (1.0 - 1e-9),
                "at t = {t}: |x| = {} below {bound}",
                x.abs()
            );
        }
    }

    #[test]
    fn halved_tolerance_stays_within_the_error_estimate() {
        let m = model(1.0);
        let coarse = solve_canonical(&m, -1.0, 60.0, 1e-7).unwrap();
        let fine = solve_canonical(&m, -1.0, 60.0, 5e-8).unwrap();
        let diff = (coarse.final_value() - fine.final_value()).abs();
        assert!(
            diff <= coarse.error_estimate().max(1e-12),
            "diff {diff} vs estimate {}",
            coarse.error_estimate()
        );
    }

    #[test]
    fn repulsive_singularity_pushes_solutions_away() {
        // birth rate with a local minimum at 0 turns the singularity
        // repulsive: d11 f + d12 f > 0 there and the drift points outward
        let m = custom_model(|x| (x * x / (2.0 * 0.81)).exp(), 0.1, 1.0);
        let cfg = FdConfig::default();
        let curvature = crate::model::derivs::d11_fitness1(&m, 0.0, 0.0, &cfg).unwrap()
            + crate::model::derivs::d12_fitness1(&m, 0.0, 0.0, &cfg).unwrap();
        assert!(curvature > 0.5, "not repulsive: {curvature}");
        assert!(canonical_drift(&m, 0.05).unwrap() > 0.0);
        assert!(canonical_drift(&m, -0.05).unwrap() < 0.0);
        let up = solve_canonical(&m, 0.1, 40.0, 1e-8).unwrap();
        for w in up.values().windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(up.final_value() > 0.3, "ended at {}", up.final_value());
        let down = solve_canonical(&m, -0.1, 40.0, 1e-8).unwrap();
        assert!(down.final_value() < -0.3, "ended at {}", down.final_value());
    }

    #[test]
    fn broken_dominating_density_is_detected() {
        // honest conditioned kernel but a dominating density scaled far
        // below it: the runtime audit must fire
        let space = TraitSpace::new(-2.0, 2.0).unwrap();
        let sigma = 1.0f64;
        let pdf = move |h: f64| {
            (-0.5 * (h / sigma) * (h / sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let cond_mass = move |x: f64| {
            let std = NormalDist::standard();
            std.cdf((2.0 - x) / sigma) - std.cdf((-2.0 - x) / sigma)
        };
        let kernel = crate::model::MutationKernel::new(
            Arc::new(move |x: f64, rng: &mut SimRng| {
                let normal = Normal::new(0.0, sigma).unwrap();
                loop {
                    let h = normal.sample(rng);
                    if space.contains(x + h) {
                        return Ok(h);
                    }
                }
            }),
            Arc::new(move |x: f64, h: f64| {
                if !space.contains(x + h) {
                    return 0.0;
                }
                pdf(h) / cond_mass(x)
            }),
            Arc::new(move |h: f64| if h.abs() > 4.0 { 0.0 } else { 0.05 * pdf(h) }),
            0.05,
            Arc::new(move |rng: &mut SimRng| loop {
                let h: f64 = Normal::new(0.0, sigma).unwrap().sample(rng);
                if h.abs() <= 4.0 {
                    return h;
                }
            }),
            sigma,
        );
        let params = GaussianExampleParams {
            sigma_b: 0.9,
            sigma_alpha: 1.0,
            sigma,
            p: 0.1,
        };
        let m = ModelSpec::new(
            space,
            Arc::new(move |x| params.lambda(x)),
            Arc::new(|_| 0.0),
            Arc::new(move |x, y| params.alpha(x, y)),
            Arc::new(|_| 0.1),
            kernel,
            1000,
            1.0,
            1.0,
        )
        .unwrap();
        let mut rng = rng_from_seed(1);
        let err = simulate_tss(&m, -1.0, 0.3, 1e6, &mut rng).unwrap_err();
        assert!(
            matches!(err, TssError::DominatingBound { ratio, .. } if ratio > 1.0),
            "got {err:?}"
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = model(1.0);
        let mut rng = rng_from_seed(0);
        assert!(matches!(
            simulate_tss(&m, -3.0, 0.1, 1.0, &mut rng),
            Err(TssError::Model(_))
        ));
        assert!(matches!(
            simulate_tss(&m, -1.0, 0.0, 1.0, &mut rng),
            Err(TssError::Precondition(_))
        ));
        assert!(matches!(
            simulate_tss(&m, -1.0, 1.5, 1.0, &mut rng),
            Err(TssError::Precondition(_))
        ));
        assert!(matches!(
            simulate_tss(&m, -1.0, 0.1, f64::INFINITY, &mut rng),
            Err(TssError::Precondition(_))
        ));
        assert!(matches!(
            solve_canonical(&m, 2.5, 1.0, 1e-8),
            Err(TssError::Model(_))
        ));
        assert!(matches!(
            solve_canonical(&m, -1.0, 10.0, 0.0),
            Err(TssError::Precondition(_))
        ));
        assert!(matches!(g_function(&m, 2.5, 0.0), Err(TssError::Model(_))));
    }

    #[test]
    fn csv_writers_share_the_trajectory_format() {
        let m = model(1.0);
        let mut rng = rng_from_seed(5);
        let path = simulate_tss(&m, -1.0, 0.1, 5.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_tss_csv(&mut buf, &m, &path).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), crate::ibm::TRAJECTORY_FORMAT);
        assert_eq!(lines.next().unwrap(), "time,trait,density");
        assert_eq!(lines.count(), path.points().len());
        let first = text.lines().nth(2).unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], "-1");
        let nbar: f64 = fields[2].parse().unwrap();
        assert!((nbar - m.monomorphic_equilibrium(-1.0).unwrap()).abs() < 1e-15);

        let sol = solve_canonical(&m, -1.0, 5.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        write_canonical_csv(&mut buf, &m, &sol).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), crate::ibm::TRAJECTORY_FORMAT);
        assert_eq!(lines.next().unwrap(), "time,trait,density");
        assert_eq!(lines.count(), sol.times().len());
    }
}
