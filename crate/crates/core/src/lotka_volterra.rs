//! Competitive Lotka-Volterra machinery: building LV(d, x) systems from a
//! model, integrating them, computing long-run limits with support
//! detection and refinement, deciding coexistence, and the sign-based
//! classification of three-species systems.
//!
//! The long-run limit is the workhorse behind invasion outcomes. It
//! integrates until the state stops moving, projects near-extinct
//! coordinates to exact zeros, then solves the support-restricted linear
//! system so the reported equilibrium is accurate to solver precision
//! rather than to the (possibly slow) ODE convergence rate.

use crate::model::{ModelError, ModelSpec};
use crate::ode::{OdeError, OdeOptions, Stepper};
use nalgebra::{DMatrix, DVector};

/// Eigenvalue real parts closer to zero than this make a state
/// non-hyperbolic.
pub const EIGEN_TOL: f64 = 1e-7;
/// Fitness values closer to zero than this are treated as ambiguous signs
/// in the three-species classification.
pub const SIGN_TOL: f64 = 1e-10;
/// Condition-number ceiling for the support-restricted linear solves.
pub const COND_MAX: f64 = 1e12;
/// Densities below this level with negative per-capita growth are treated
/// as still dying rather than settled; see `long_run_limit`.
const EPS_DYING: f64 = 1e-5;

#[derive(Debug, Clone, thiserror::Error)]
pub enum LvError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("duplicate traits at indices {0} and {1}")]
    DuplicateTraits(usize, usize),
    #[error("negative initial density {value} at index {index}")]
    NegativeInitial { index: usize, value: f64 },
    #[error("support linear system is numerically degenerate")]
    Degenerate,
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("ambiguous fitness sign: {which} = {value}")]
    AmbiguousSign { which: &'static str, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// The competitive system dn_i/dt = n_i (r_i - sum_j a_ij n_j).
#[derive(Debug, Clone)]
pub struct LVSystem {
    pub traits: Vec<f64>,
    pub growth: Vec<f64>,
    /// Row-major: interaction[i][j] is the competition exerted on i by j.
    pub interaction: Vec<Vec<f64>>,
}

impl LVSystem {
    pub fn dim(&self) -> usize {
        self.traits.len()
    }

    /// Per-capita growth G_i(n) = r_i - sum_j a_ij n_j.
    pub fn per_capita(&self, n: &[f64], i: usize) -> f64 {
        let mut comp = 0.0;
        for (j, &nj) in n.iter().enumerate() {
            comp += self.interaction[i][j] * nj;
        }
        self.growth[i] - comp
    }

    pub fn rhs(&self, n: &[f64], dn: &mut [f64]) {
        for i in 0..n.len() {
            dn[i] = n[i] * self.per_capita(n, i);
        }
    }

    /// Real parts of the Jacobian eigenvalues at an equilibrium with the
    /// given support, sorted descending. Uses the block-triangular
    /// structure: the support block is -diag(n_I) A_II, and each
    /// off-support row contributes its own per-capita growth.
    pub fn jacobian_eigen_real_parts(&self, point: &[f64], support: &[usize]) -> Vec<f64> {
        let k = support.len();
        let mut parts = Vec::with_capacity(self.dim());
        if k > 0 {
            let block = DMatrix::from_fn(k, k, |p, q| {
                -point[support[p]] * self.interaction[support[p]][support[q]]
            });
            for ev in block.complex_eigenvalues().iter() {
                parts.push(ev.re);
            }
        }
        for i in 0..self.dim() {
            if !support.contains(&i) {
                parts.push(self.per_capita(point, i));
            }
        }
        parts.sort_by(|a, b| b.partial_cmp(a).unwrap());
        parts
    }
}

/// Build LV(d, x) from the model's growth and competition functions.
pub fn build_lv(model: &ModelSpec, traits: &[f64]) -> Result<LVSystem, LvError> {
    if traits.is_empty() {
        return Err(LvError::Precondition("empty trait list".into()));
    }
    for (i, &x) in traits.iter().enumerate() {
        model.space().check(x)?;
        for (j, &y) in traits.iter().enumerate().skip(i + 1) {
            if x == y {
                return Err(LvError::DuplicateTraits(i, j));
            }
        }
    }
    let growth: Vec<f64> = traits.iter().map(|&x| model.growth(x)).collect();
    for (&x, &r) in traits.iter().zip(&growth) {
        if r <= 0.0 {
            return Err(ModelError::NonviableResident { x, r }.into());
        }
    }
    let interaction: Vec<Vec<f64>> = traits
        .iter()
        .map(|&x| traits.iter().map(|&y| model.competition(x, y)).collect())
        .collect();
    if let Some(&bad) = interaction.iter().flatten().find(|a| **a <= 0.0) {
        return Err(LvError::Precondition(format!(
            "competition must be strictly positive, got {bad}"
        )));
    }
    Ok(LVSystem {
        traits: traits.to_vec(),
        growth,
        interaction,
    })
}

/// Sampled solution of an LV integration, one row per accepted step.
#[derive(Debug, Clone)]
pub struct LVTrajectory {
    pub t: Vec<f64>,
    pub n: Vec<Vec<f64>>,
}

impl LVTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.n.last().expect("trajectory has at least the start")
    }
}

fn check_initial(sys: &LVSystem, n0: &[f64]) -> Result<(), LvError> {
    if n0.len() != sys.dim() {
        return Err(LvError::Precondition(format!(
            "state length {} does not match system dimension {}",
            n0.len(),
            sys.dim()
        )));
    }
    for (index, &value) in n0.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(LvError::NegativeInitial { index, value });
        }
    }
    Ok(())
}

/// Integrate the system over [0, t_end], recording every accepted step.
/// Invariant faces are preserved exactly: a coordinate starting at zero
/// stays zero.
pub fn integrate(
    sys: &LVSystem,
    n0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
) -> Result<LVTrajectory, LvError> {
    check_initial(sys, n0)?;
    let mut opts = opts.clone();
    opts.reject_negative = true;
    let mut st = Stepper::new(|n, dn| sys.rhs(n, dn), 0.0, n0.to_vec(), opts);
    let mut traj = LVTrajectory {
        t: vec![0.0],
        n: vec![n0.to_vec()],
    };
    while st.t() < t_end - 1e-12 * t_end.max(1.0) {
        st.step(t_end)?;
        traj.t.push(st.t());
        traj.n.push(st.y().to_vec());
    }
    Ok(traj)
}

/// Knobs for `long_run_limit`. The defaults are artifact conventions: the
/// mathematical limit is the exact ODE limit, and these control how it is
/// approximated and when the search is abandoned.
#[derive(Debug, Clone)]
pub struct LongRunParams {
    /// Sliding-window motion below this means the state has settled.
    pub eps_conv: f64,
    /// Coordinates below this are projected to exact zero.
    pub eps_extinct: f64,
    /// Width of the sliding window, in time units.
    pub window: f64,
    /// Give up (NonConvergent) beyond this time.
    pub t_max: f64,
    /// Start limit-cycle detection after this time.
    pub t_cycle: f64,
    /// Seed density for an invading mutant in `invasion_outcome`.
    pub eps_init: f64,
    pub ode: OdeOptions,
}

impl Default for LongRunParams {
    fn default() -> Self {
        LongRunParams {
            eps_conv: 1e-9,
            eps_extinct: 1e-8,
            window: 10.0,
            t_max: 1e5,
            t_cycle: 1e3,
            eps_init: 1e-4,
            // tighter than the general-purpose defaults: near an
            // equilibrium the adaptive stepper hovers at its tolerance
            // floor, and that jitter must sit well below eps_conv or the
            // window test can never pass
            ode: OdeOptions {
                abs_tol: 1e-13,
                rel_tol: 1e-11,
                ..OdeOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    StronglyStable,
    Unstable,
    NonHyperbolic,
}

/// An equilibrium with its support and linear stability.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub point: Vec<f64>,
    pub support: Vec<usize>,
    pub jacobian_eigen_real_parts: Vec<f64>,
    pub stability: Stability,
}

#[derive(Debug, Clone)]
pub enum LongRunOutcome {
    Equilibrium(EquilibriumReport),
    /// The trajectory did not settle: either the time budget ran out or a
    /// sustained oscillation was detected.
    NonConvergent {
        reason: String,
        t: f64,
        state: Vec<f64>,
    },
}

/// Solve the support-restricted equilibrium A_II n_I = r_I, dropping
/// nonpositive components one at a time. The drop loop matters: a slowly
/// dying coordinate can still sit above the extinction threshold when the
/// window test fires, and the linear solve then exposes it by returning a
/// nonpositive density for it.
fn refine_support(sys: &LVSystem, mut support: Vec<usize>) -> Result<(Vec<f64>, Vec<usize>), LvError> {
    let d = sys.dim();
    loop {
        if support.is_empty() {
            return Ok((vec![0.0; d], support));
        }
        let k = support.len();
        let a = DMatrix::from_fn(k, k, |p, q| sys.interaction[support[p]][support[q]]);
        let r = DVector::from_iterator(k, support.iter().map(|&i| sys.growth[i]));
        let sv = a.clone().svd(false, false).singular_values;
        let (s_max, s_min) = (sv.max(), sv.min());
        if !(s_min > 0.0) || s_max / s_min > COND_MAX {
            return Err(LvError::Degenerate);
        }
        let sol = a.lu().solve(&r).ok_or(LvError::Degenerate)?;
        let worst = sol
            .iter()
            .enumerate()
            .filter(|(_, v)| **v <= 0.0)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(p, _)| p);
        match worst {
            Some(p) => {
                support.remove(p);
            }
            None => {
                let mut point = vec![0.0; d];
                for (p, &i) in support.iter().enumerate() {
                    point[i] = sol[p];
                }
                return Ok((point, support));
            }
        }
    }
}

fn classify(parts: &[f64]) -> Stability {
    if parts.iter().any(|p| p.abs() <= EIGEN_TOL) {
        Stability::NonHyperbolic
    } else if parts.iter().all(|&p| p < 0.0) {
        Stability::StronglyStable
    } else {
        Stability::Unstable
    }
}

fn report_for_support(sys: &LVSystem, support: Vec<usize>) -> Result<EquilibriumReport, LvError> {
    let (point, support) = refine_support(sys, support)?;
    let parts = sys.jacobian_eigen_real_parts(&point, &support);
    let stability = classify(&parts);
    Ok(EquilibriumReport {
        point,
        support,
        jacobian_eigen_real_parts: parts,
        stability,
    })
}

/// Integrate until the state settles, then identify the surviving support
/// and refine its equilibrium. Detects limit cycles (sustained oscillation
/// in a window after `t_cycle`) and gives up at `t_max`.
pub fn long_run_limit(
    sys: &LVSystem,
    n0: &[f64],
    params: &LongRunParams,
) -> Result<LongRunOutcome, LvError> {
    check_initial(sys, n0)?;
    let mut opts = params.ode.clone();
    opts.reject_negative = true;
    // at least two steps per window, so window extrema are sampled
    opts.h_max = opts.h_max.min(params.window / 2.0);
    let mut st = Stepper::new(|n, dn| sys.rhs(n, dn), 0.0, n0.to_vec(), opts);
    let d = sys.dim();
    let mut w_end = params.window;
    let mut w_start_y = n0.to_vec();
    let mut mins = n0.to_vec();
    let mut maxs = n0.to_vec();
    let mut osc_windows = 0u32;
    loop {
        while st.t() < w_end - 1e-9 * params.window {
            st.step(w_end)?;
            for i in 0..d {
                mins[i] = mins[i].min(st.y()[i]);
                maxs[i] = maxs[i].max(st.y()[i]);
            }
        }
        let y = st.y();
        let motion = (0..d).map(|i| maxs[i] - mins[i]).fold(0.0, f64::max);
        if motion < params.eps_conv {
            // a small coordinate with negative per-capita growth has not
            // finished dying; let it cross the extinction threshold so the
            // support is identified from clear evidence
            let dying = (0..d).any(|i| {
                y[i] >= params.eps_extinct
                    && y[i] <= EPS_DYING
                    && sys.per_capita(y, i) < -params.eps_conv
            });
            if !dying {
                let support: Vec<usize> =
                    (0..d).filter(|&i| y[i] >= params.eps_extinct).collect();
                return Ok(LongRunOutcome::Equilibrium(report_for_support(
                    sys, support,
                )?));
            }
        } else if st.t() > params.t_cycle {
            // oscillation excess: range minus net drift, so slow monotone
            // transitions do not count as cycling
            let osc = (0..d)
                .map(|i| (maxs[i] - mins[i]) - (y[i] - w_start_y[i]).abs())
                .fold(0.0, f64::max);
            if osc > 10.0 * params.eps_conv {
                osc_windows += 1;
                if osc_windows >= 10 {
                    return Ok(LongRunOutcome::NonConvergent {
                        reason: "cycle".into(),
                        t: st.t(),
                        state: y.to_vec(),
                    });
                }
            } else {
                osc_windows = 0;
            }
        }
        if st.t() >= params.t_max {
            return Ok(LongRunOutcome::NonConvergent {
                reason: "t_max".into(),
                t: st.t(),
                state: y.to_vec(),
            });
        }
        w_start_y = y.to_vec();
        mins = y.to_vec();
        maxs = y.to_vec();
        w_end += params.window;
    }
}

#[derive(Debug, Clone)]
pub struct CoexistenceReport {
    pub coexists: bool,
    /// Interior equilibrium when one exists (even if unstable).
    pub equilibrium: Option<EquilibriumReport>,
}

/// Does the full trait set admit a unique strictly positive, locally
/// strongly stable equilibrium? d = 1 is viability, d = 2 is the mutual
/// invasibility criterion with the closed-form equilibrium, and d >= 3
/// solves the interior linear system and checks its spectrum.
pub fn check_coexistence(model: &ModelSpec, traits: &[f64]) -> Result<CoexistenceReport, LvError> {
    let sys = build_lv(model, traits)?;
    match traits.len() {
        1 => {
            let n = model.monomorphic_equilibrium(traits[0])?;
            let parts = sys.jacobian_eigen_real_parts(&[n], &[0]);
            let stability = classify(&parts);
            Ok(CoexistenceReport {
                coexists: true,
                equilibrium: Some(EquilibriumReport {
                    point: vec![n],
                    support: vec![0],
                    jacobian_eigen_real_parts: parts,
                    stability,
                }),
            })
        }
        2 => {
            let (x, y) = (traits[0], traits[1]);
            let fyx = model.fitness1(y, x)?;
            let fxy = model.fitness1(x, y)?;
            let coexists = fyx > 0.0 && fxy > 0.0;
            let equilibrium = match model.dimorphic_equilibrium(x, y) {
                Ok((n1, n2)) => {
                    let point = vec![n1, n2];
                    let parts = sys.jacobian_eigen_real_parts(&point, &[0, 1]);
                    let stability = classify(&parts);
                    Some(EquilibriumReport {
                        point,
                        support: vec![0, 1],
                        jacobian_eigen_real_parts: parts,
                        stability,
                    })
                }
                Err(
                    ModelError::NoPairEquilibrium { .. } | ModelError::NonpositiveEquilibrium { .. },
                ) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(CoexistenceReport {
                coexists,
                equilibrium,
            })
        }
        d => {
            let k = d;
            let a = DMatrix::from_fn(k, k, |p, q| sys.interaction[p][q]);
            let r = DVector::from_iterator(k, sys.growth.iter().copied());
            let sv = a.clone().svd(false, false).singular_values;
            if !(sv.min() > 0.0) || sv.max() / sv.min() > COND_MAX {
                return Err(LvError::Degenerate);
            }
            let sol = a.lu().solve(&r).ok_or(LvError::Degenerate)?;
            if sol.iter().any(|&v| v <= 0.0) {
                return Ok(CoexistenceReport {
                    coexists: false,
                    equilibrium: None,
                });
            }
            let point: Vec<f64> = sol.iter().copied().collect();
            let support: Vec<usize> = (0..d).collect();
            let parts = sys.jacobian_eigen_real_parts(&point, &support);
            let stability = classify(&parts);
            Ok(CoexistenceReport {
                coexists: stability == Stability::StronglyStable,
                equilibrium: Some(EquilibriumReport {
                    point,
                    support,
                    jacobian_eigen_real_parts: parts,
                    stability,
                }),
            })
        }
    }
}

/// Result of letting a mutant invade a resident community.
#[derive(Debug, Clone)]
pub struct InvasionReport {
    /// Residents followed by the mutant.
    pub traits: Vec<f64>,
    pub report: EquilibriumReport,
    /// Post-invasion audit: survivors coexist and every dropped trait has
    /// negative fitness against them. Failures are flagged, not fatal.
    pub audit_ok: bool,
    pub audit_notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum InvasionOutcome {
    Settled(InvasionReport),
    NonConvergent { reason: String },
}

/// Long-run limit of LV(d+1) started from the resident equilibrium plus
/// the mutant at seed density `params.eps_init`.
pub fn invasion_outcome(
    model: &ModelSpec,
    residents: &[f64],
    resident_eq: &[f64],
    mutant: f64,
    params: &LongRunParams,
) -> Result<InvasionOutcome, LvError> {
    if residents.len() != resident_eq.len() || residents.is_empty() {
        return Err(LvError::Precondition(
            "residents and equilibrium must be nonempty and of equal length".into(),
        ));
    }
    let res_sys = build_lv(model, residents)?;
    for i in 0..residents.len() {
        if resident_eq[i] <= 0.0 {
            return Err(LvError::Precondition(format!(
                "resident density {} must be positive",
                resident_eq[i]
            )));
        }
        let g = res_sys.per_capita(resident_eq, i);
        if g.abs() > 1e-6 {
            return Err(LvError::Precondition(format!(
                "resident state is not at equilibrium: G_{i} = {g}"
            )));
        }
    }
    let fit = model.fitness_d(mutant, residents, resident_eq)?;
    if fit <= 0.0 {
        return Err(LvError::Precondition(format!(
            "mutant fitness {fit} is not positive"
        )));
    }
    let mut traits = residents.to_vec();
    traits.push(mutant);
    let sys = build_lv(model, &traits)?;
    let mut n0 = resident_eq.to_vec();
    n0.push(params.eps_init);
    match long_run_limit(&sys, &n0, params)? {
        LongRunOutcome::NonConvergent { reason, .. } => {
            Ok(InvasionOutcome::NonConvergent { reason })
        }
        LongRunOutcome::Equilibrium(report) => {
            let mut notes = Vec::new();
            let survivors: Vec<f64> = report.support.iter().map(|&i| traits[i]).collect();
            let densities: Vec<f64> = report.support.iter().map(|&i| report.point[i]).collect();
            if survivors.is_empty() {
                notes.push("no survivors".into());
            } else {
                match check_coexistence(model, &survivors) {
                    Ok(c) if c.coexists => {}
                    Ok(_) => notes.push("surviving support does not coexist".into()),
                    Err(e) => notes.push(format!("coexistence check failed: {e}")),
                }
            }
            for (i, &x) in traits.iter().enumerate() {
                if report.support.contains(&i) {
                    continue;
                }
                match model.fitness_d(x, &survivors, &densities) {
                    Ok(f) if f < 0.0 => {}
                    Ok(f) => notes.push(format!(
                        "dropped trait {x} has nonnegative fitness {f} against the survivors"
                    )),
                    Err(e) => notes.push(format!("fitness of dropped trait {x} failed: {e}")),
                }
            }
            if report.stability != Stability::StronglyStable {
                notes.push(format!("limit is {:?}", report.stability));
            }
            Ok(InvasionOutcome::Settled(InvasionReport {
                traits,
                report,
                audit_ok: notes.is_empty(),
                audit_notes: notes,
            }))
        }
    }
}

/// Sign data for a resident pair (x, y) and a third trait z. The
/// three-species fitnesses are present only where the underlying pair
/// admits a positive equilibrium.
#[derive(Debug, Clone)]
pub struct ZeemanVerdict {
    pub f_xy: f64,
    pub f_yx: f64,
    pub f_xz: f64,
    pub f_zx: f64,
    pub f_yz: f64,
    pub f_zy: f64,
    pub f_z_xy: f64,
    pub f_y_xz: Option<f64>,
    pub f_x_yz: Option<f64>,
    pub in_c_coex: bool,
    /// Classes compatible with the observed signs, where the sign table
    /// pins them down; empty when the signs do not decide membership.
    pub class_candidates: Vec<u8>,
    pub class_hint: Option<u8>,
}

fn checked_sign(which: &'static str, value: f64) -> Result<f64, LvError> {
    if value.abs() <= SIGN_TOL {
        Err(LvError::AmbiguousSign { which, value })
    } else {
        Ok(value)
    }
}

/// Classify the three-species system (x, y, z) from fitness signs, where
/// x and y are coexisting residents and z the newcomer. `in_c_coex`
/// reports whether the sign pattern puts the triple among the classes
/// whose interior dynamics can defeat the convergence assumption. Both
/// premises are required to hold with aligned signs; a missing pair
/// equilibrium counts as failure, not as vacuous truth.
pub fn zeeman_verdict(
    model: &ModelSpec,
    x: f64,
    y: f64,
    z: f64,
) -> Result<ZeemanVerdict, LvError> {
    let f_xy = checked_sign("f(x;y)", model.fitness1(x, y)?)?;
    let f_yx = checked_sign("f(y;x)", model.fitness1(y, x)?)?;
    let f_xz = checked_sign("f(x;z)", model.fitness1(x, z)?)?;
    let f_zx = checked_sign("f(z;x)", model.fitness1(z, x)?)?;
    let f_yz = checked_sign("f(y;z)", model.fitness1(y, z)?)?;
    let f_zy = checked_sign("f(z;y)", model.fitness1(z, y)?)?;
    if !(f_xy > 0.0 && f_yx > 0.0) {
        return Err(LvError::Precondition(format!(
            "resident pair must coexist: f(x;y) = {f_xy}, f(y;x) = {f_yx}"
        )));
    }
    let f_z_xy = checked_sign("f(z;x,y)", model.fitness2(z, x, y)?)?;
    let f_y_xz = match model.fitness2(y, x, z) {
        Ok(v) => Some(checked_sign("f(y;x,z)", v)?),
        Err(ModelError::NoPairEquilibrium { .. } | ModelError::NonpositiveEquilibrium { .. }) => {
            None
        }
        Err(e) => return Err(e.into()),
    };
    let f_x_yz = match model.fitness2(x, y, z) {
        Ok(v) => Some(checked_sign("f(x;y,z)", v)?),
        Err(ModelError::NoPairEquilibrium { .. } | ModelError::NonpositiveEquilibrium { .. }) => {
            None
        }
        Err(e) => return Err(e.into()),
    };

    let p1 = matches!(f_y_xz, Some(v) if f_xz * f_zx > 0.0 && v * f_xz > 0.0);
    let p2 = matches!(f_x_yz, Some(v) if f_yz * f_zy > 0.0 && v * f_yz > 0.0);
    let in_c_coex = f_z_xy > 0.0 && p1 && p2;

    let z_wins_x = f_zx > 0.0 && f_xz < 0.0;
    let z_wins_y = f_zy > 0.0 && f_yz < 0.0;
    let coex_xz = f_zx > 0.0 && f_xz > 0.0;
    let coex_yz = f_zy > 0.0 && f_yz > 0.0;
    let class_candidates: Vec<u8> = if f_z_xy < 0.0 {
        vec![]
    } else if in_c_coex {
        if coex_xz && coex_yz {
            vec![33]
        } else {
            vec![26, 29, 31]
        }
    } else if z_wins_x && z_wins_y {
        vec![7]
    } else if (coex_xz && matches!(f_y_xz, Some(v) if v < 0.0) && z_wins_y)
        || (coex_yz && matches!(f_x_yz, Some(v) if v < 0.0) && z_wins_x)
    {
        vec![9]
    } else if coex_xz && coex_yz {
        match (f_y_xz, f_x_yz) {
            (Some(a), Some(b)) if a * b < 0.0 => vec![9, 10, 11, 12],
            _ => vec![],
        }
    } else {
        vec![]
    };
    let class_hint = match class_candidates.as_slice() {
        [only] => Some(*only),
        _ => None,
    };

    Ok(ZeemanVerdict {
        f_xy,
        f_yx,
        f_xz,
        f_zx,
        f_yz,
        f_zy,
        f_z_xy,
        f_y_xz,
        f_x_yz,
        in_c_coex,
        class_candidates,
        class_hint,
    })
}
