//! The polymorphic evolution sequence: a pure jump process on coexisting
//! trait sets, each carried at its equilibrium densities.
//!
//! From a state with support `x_1 < ... < x_d` and densities `nbar_i`,
//! mutants are proposed at total rate `sum_j p(x_j) lambda(x_j) nbar_j`
//! (divided by `epsilon^2` for the rescaled process), the parent chosen
//! proportionally, the mutant placed at `parent + epsilon h` with
//! `h ~ m(parent, .)`, and accepted with probability
//! `[f(y; x)]_+ / lambda(y)`. An accepted mutant jumps the state to the
//! long-run limit of the enlarged Lotka-Volterra system.
//!
//! Two killed variants stop at a cemetery state: `killed1` as soon as a
//! proposed mutant could coexist with a monomorphic resident, `killed2` as
//! soon as a proposed mutant forms a stably coexisting triple with a
//! dimorphic resident. Both trigger on the proposal, whether or not the
//! mutant would have been accepted.

use crate::lotka_volterra::{
    check_coexistence, invasion_outcome, zeeman_verdict, InvasionOutcome, LongRunParams, LvError,
};
use crate::model::{ModelError, ModelSpec};
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::Exp1;
use std::io::{self, Write};

/// Densities of an alive state must match the LV equilibrium this closely.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// `format` field of the NDJSON jump-record header.
pub const PES_FORMAT: &str = "evodyn-pes";

#[derive(Debug, thiserror::Error)]
pub enum PesError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lv(#[from] LvError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("state invariant violated: {0}")]
    InvariantViolation(String),
}

/// Cemetery flag. `Alive` means no killing has happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Killed {
    #[serde(rename = "none")]
    Alive,
    /// A proposed mutant could coexist with the monomorphic resident.
    #[serde(rename = "coexist_pair")]
    CoexistPair,
    /// A proposed mutant forms a stably coexisting triple with the pair.
    #[serde(rename = "triple_C_coex")]
    TripleCCoex,
    /// The invasion dynamics failed to settle.
    #[serde(rename = "lv_nonconvergent")]
    LvNonconvergent,
}

/// Support atoms with their equilibrium densities, or a cemetery state
/// still carrying the last support for inspection.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PESState {
    support: Vec<f64>,
    densities: Vec<f64>,
    killed: Killed,
}

impl PESState {
    /// Alive state on `support`, densities from the LV equilibrium.
    pub fn equilibrium(model: &ModelSpec, support: &[f64]) -> Result<Self, PesError> {
        let report = check_coexistence(model, support)?;
        if !report.coexists {
            return Err(PesError::Precondition(format!(
                "support {support:?} does not coexist"
            )));
        }
        let eq = report.equilibrium.expect("coexisting support has an equilibrium");
        PESState::from_parts(model, support.to_vec(), eq.point)
    }

    pub fn monomorphic(model: &ModelSpec, x: f64) -> Result<Self, PesError> {
        PESState::equilibrium(model, &[x])
    }

    /// Build an alive state and certify the invariant: the support
    /// coexists and the densities match its LV equilibrium to
    /// [`EQUILIBRIUM_TOL`].
    pub fn from_parts(
        model: &ModelSpec,
        support: Vec<f64>,
        densities: Vec<f64>,
    ) -> Result<Self, PesError> {
        if support.len() != densities.len() || support.is_empty() {
            return Err(PesError::Precondition(
                "support and densities must be nonempty and of equal length".into(),
            ));
        }
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&i, &j| support[i].total_cmp(&support[j]));
        let support: Vec<f64> = order.iter().map(|&i| support[i]).collect();
        let densities: Vec<f64> = order.iter().map(|&i| densities[i]).collect();
        let state = PESState { support, densities, killed: Killed::Alive };
        state.check(model)?;
        Ok(state)
    }

    /// Verify the alive-state invariant against a fresh coexistence check.
    pub fn check(&self, model: &ModelSpec) -> Result<(), PesError> {
        let report = check_coexistence(model, &self.support)?;
        if !report.coexists {
            return Err(PesError::InvariantViolation(format!(
                "support {:?} does not coexist",
                self.support
            )));
        }
        let eq = report.equilibrium.expect("coexisting support has an equilibrium");
        for (i, (&d, &e)) in self.densities.iter().zip(&eq.point).enumerate() {
            if (d - e).abs() > EQUILIBRIUM_TOL {
                return Err(PesError::InvariantViolation(format!(
                    "density {d} at {} is {} away from the equilibrium {e}",
                    self.support[i],
                    (d - e).abs()
                )));
            }
        }
        Ok(())
    }

    fn into_killed(mut self, reason: Killed) -> Self {
        self.killed = reason;
        self
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn killed(&self) -> Killed {
        self.killed
    }

    pub fn is_alive(&self) -> bool {
        self.killed == Killed::Alive
    }

    pub fn support_diameter(&self) -> f64 {
        match (self.support.first(), self.support.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// Invasion fitness of `y` against this state.
    pub fn fitness_of(&self, model: &ModelSpec, y: f64) -> Result<f64, PesError> {
        Ok(model.fitness_d(y, &self.support, &self.densities)?)
    }
}

/// Mutation-scale proposal rates: `weights[j] = p(x_j) lambda(x_j) nbar_j`.
#[derive(Debug, Clone)]
pub struct PesRates {
    pub weights: Vec<f64>,
    pub total: f64,
}

pub fn pes_jump_rates(model: &ModelSpec, state: &PESState) -> Result<PesRates, PesError> {
    if !state.is_alive() {
        return Err(PesError::Precondition("state is killed".into()));
    }
    let weights: Vec<f64> = state
        .support
        .iter()
        .zip(&state.densities)
        .map(|(&x, &n)| model.mut_prob(x) * model.birth(x) * n)
        .collect();
    let total = weights.iter().sum();
    Ok(PesRates { weights, total })
}

/// Probability that a proposed mutant `y` invades: `[f(y;x)]_+ / lambda(y)`.
/// Always at most 1 because `f <= r <= lambda`.
pub fn acceptance_probability(
    model: &ModelSpec,
    state: &PESState,
    y: f64,
) -> Result<f64, PesError> {
    let f = state.fitness_of(model, y)?;
    Ok(f.max(0.0) / model.birth(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PesVariant {
    Full,
    /// Cemetery as soon as a mutant could coexist with the monomorphic
    /// resident, accepted or not.
    Killed1,
    /// Cemetery as soon as a mutant forms a stably coexisting triple with
    /// the resident pair, accepted or not.
    Killed2,
}

#[derive(Debug, Clone)]
pub struct PesParams {
    /// Base long-run parameters for invasion outcomes.
    pub lv: LongRunParams,
    /// Invasions integrate with `t_max` raised to at least this value
    /// divided by |f(y;x)|, so weak-selection invasions near a singularity
    /// get the time they need instead of being reported non-convergent.
    pub lv_t_max_per_fitness: f64,
}

impl Default for PesParams {
    fn default() -> Self {
        PesParams { lv: LongRunParams::default(), lv_t_max_per_fitness: 200.0 }
    }
}

/// What one jump did, whatever the outcome.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Annotation {
    pub parent: f64,
    pub mutant: f64,
    pub accepted: bool,
    pub killed_reason: Killed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    /// State after the jump.
    pub state: PESState,
    pub annotation: Annotation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpTrajectory {
    pub initial: PESState,
    pub jumps: Vec<JumpRecord>,
    pub t_end: f64,
    pub epsilon: f64,
}

impl JumpTrajectory {
    pub fn final_state(&self) -> &PESState {
        self.jumps.last().map_or(&self.initial, |r| &r.state)
    }

    /// Piecewise-constant view: the initial state at time 0, then each
    /// post-jump state at its jump time.
    pub fn states(&self) -> impl Iterator<Item = (f64, &PESState)> {
        std::iter::once((0.0, &self.initial))
            .chain(self.jumps.iter().map(|r| (r.time, &r.state)))
    }

    pub fn killed(&self) -> Killed {
        self.final_state().killed()
    }
}

/// Long-run limit after `mutant` (with positive fitness) invades `state`.
///
/// A monomorphic resident has an exact dichotomy, so no integration is
/// needed: mutual invasibility gives the closed-form dimorphic
/// equilibrium, otherwise the mutant fixes. Polymorphic residents go
/// through the Lotka-Volterra long-run integration; a non-convergent
/// integration returns the state killed with [`Killed::LvNonconvergent`].
pub fn invasion_limit(
    model: &ModelSpec,
    state: &PESState,
    mutant: f64,
    params: &PesParams,
) -> Result<PESState, PesError> {
    let fit = state.fitness_of(model, mutant)?;
    if !(fit > 0.0) {
        return Err(PesError::Precondition(format!(
            "mutant {mutant} has nonpositive fitness {fit}"
        )));
    }
    if state.support.len() == 1 {
        let x = state.support[0];
        // fit > 0 forces r(mutant) > 0, so the reverse fitness is defined.
        let back = model.fitness1(x, mutant)?;
        if back > 0.0 {
            let (n1, n2) = model.dimorphic_equilibrium(x, mutant)?;
            return PESState::from_parts(model, vec![x, mutant], vec![n1, n2]);
        }
        let n = model.monomorphic_equilibrium(mutant)?;
        return PESState::from_parts(model, vec![mutant], vec![n]);
    }
    let mut lv = params.lv.clone();
    lv.t_max = lv.t_max.max(params.lv_t_max_per_fitness / fit.abs());
    match invasion_outcome(model, &state.support, &state.densities, mutant, &lv)? {
        InvasionOutcome::Settled(inv) => {
            let support: Vec<f64> =
                inv.report.support.iter().map(|&i| inv.traits[i]).collect();
            let densities: Vec<f64> =
                inv.report.support.iter().map(|&i| inv.report.point[i]).collect();
            if support.is_empty() {
                return Err(PesError::InvariantViolation(
                    "invasion wiped out the whole population".into(),
                ));
            }
            PESState::from_parts(model, support, densities)
        }
        InvasionOutcome::NonConvergent { .. } => {
            Ok(state.clone().into_killed(Killed::LvNonconvergent))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PesStep {
    pub waiting_time: f64,
    pub state: PESState,
    pub annotation: Annotation,
}

/// One jump of the (possibly killed) rescaled PES: exponential waiting
/// time at rate `total / epsilon^2`, then proposal, kill checks, and the
/// acceptance coin.
pub fn pes_step(
    model: &ModelSpec,
    state: &PESState,
    rng: &mut SimRng,
    variant: PesVariant,
    params: &PesParams,
) -> Result<PesStep, PesError> {
    if !state.is_alive() {
        return Err(PesError::Precondition("state is killed".into()));
    }
    match variant {
        PesVariant::Killed1 if state.support.len() != 1 => {
            return Err(PesError::Precondition(
                "killed1 is defined on monomorphic states".into(),
            ));
        }
        PesVariant::Killed2 if state.support.len() > 2 => {
            return Err(PesError::Precondition(
                "killed2 is defined on at most dimorphic states".into(),
            ));
        }
        _ => {}
    }
    let rates = pes_jump_rates(model, state)?;
    let epsilon = model.jump_scale();
    let waiting_time = rng.sample::<f64, _>(Exp1) * epsilon * epsilon / rates.total;
    let parent_idx = roulette(&rates.weights, rng.gen::<f64>() * rates.total);
    let parent = state.support[parent_idx];
    let h = model.kernel().sample(parent, rng)?;
    let mutant = parent + epsilon * h;
    let fit = state.fitness_of(model, mutant)?;

    // Kill checks fire on the proposal itself, before any acceptance coin.
    match variant {
        PesVariant::Killed1 => {
            if fit > 0.0 && model.fitness1(state.support[0], mutant)? > 0.0 {
                return Ok(PesStep {
                    waiting_time,
                    state: state.clone().into_killed(Killed::CoexistPair),
                    annotation: Annotation {
                        parent,
                        mutant,
                        accepted: false,
                        killed_reason: Killed::CoexistPair,
                    },
                });
            }
        }
        PesVariant::Killed2 if state.support.len() == 2 => {
            let v = zeeman_verdict(model, state.support[0], state.support[1], mutant)?;
            if v.in_c_coex {
                return Ok(PesStep {
                    waiting_time,
                    state: state.clone().into_killed(Killed::TripleCCoex),
                    annotation: Annotation {
                        parent,
                        mutant,
                        accepted: false,
                        killed_reason: Killed::TripleCCoex,
                    },
                });
            }
        }
        _ => {}
    }

    let accept = fit.max(0.0) / model.birth(mutant);
    debug_assert!(accept <= 1.0 + 1e-12);
    if rng.gen::<f64>() >= accept {
        return Ok(PesStep {
            waiting_time,
            state: state.clone(),
            annotation: Annotation {
                parent,
                mutant,
                accepted: false,
                killed_reason: Killed::Alive,
            },
        });
    }
    let next = invasion_limit(model, state, mutant, params)?;
    let killed_reason = next.killed();
    Ok(PesStep {
        waiting_time,
        state: next,
        annotation: Annotation { parent, mutant, accepted: true, killed_reason },
    })
}

fn roulette(weights: &[f64], mut target: f64) -> usize {
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

/// Iterate [`pes_step`] until `t_end` or killing. Jumps that would land
/// past `t_end` are discarded. Deterministic given the seed.
pub fn simulate_pes(
    model: &ModelSpec,
    initial: &PESState,
    t_end: f64,
    rng: &mut SimRng,
    variant: PesVariant,
    params: &PesParams,
) -> Result<JumpTrajectory, PesError> {
    if !(t_end > 0.0) {
        return Err(PesError::Precondition(format!("t_end = {t_end} must be positive")));
    }
    initial.check(model)?;
    let mut state = initial.clone();
    let mut time = 0.0;
    let mut jumps = Vec::new();
    while state.is_alive() {
        let step = pes_step(model, &state, rng, variant, params)?;
        time += step.waiting_time;
        if time > t_end {
            break;
        }
        state = step.state;
        jumps.push(JumpRecord { time, state: state.clone(), annotation: step.annotation });
    }
    Ok(JumpTrajectory {
        initial: initial.clone(),
        jumps,
        t_end,
        epsilon: model.jump_scale(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingReport {
    pub eta: f64,
    pub occurred: bool,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub max_support_diameter: f64,
}

/// Scan a trajectory for an eta-branching event around `x_star`: a time
/// t1 with monomorphic support inside `[x*-eta, x*+eta]`, then support
/// staying inside that window with at most 2 traits and non-decreasing
/// diameter, until the support is a pair more than `eta/2` apart at some
/// t2. Any violation resets the scan. The split must then prove itself:
/// the diameter has to go on to reach a full `eta` without falling back
/// below `eta/2` first. At finite jump scale a single oversized mutation
/// can mint a coexisting pair straight away, and near an attracting
/// non-branching singularity such a pair can jitter around half a window
/// wide for a long time without ever diverging; neither is a branching.
pub fn detect_branching(trajectory: &JumpTrajectory, x_star: f64, eta: f64) -> BranchingReport {
    let mut report = BranchingReport {
        eta,
        occurred: false,
        t1: None,
        t2: None,
        max_support_diameter: 0.0,
    };
    let mut candidate: Option<f64> = None;
    let mut split: Option<(f64, f64)> = None;
    let mut established: Option<(f64, f64)> = None;
    let mut prev_diameter = 0.0;
    for (t, state) in trajectory.states() {
        if !state.is_alive() {
            break;
        }
        let diameter = state.support_diameter();
        report.max_support_diameter = report.max_support_diameter.max(diameter);
        if established.is_some() {
            continue;
        }
        if let Some(pending) = split {
            if diameter >= eta {
                established = Some(pending);
                continue;
            }
            if diameter >= eta / 2.0 {
                continue;
            }
            // the branches collapsed before separating; rescan
            split = None;
            candidate = None;
        }
        let card = state.support().len();
        let inside = state
            .support()
            .iter()
            .all(|&x| (x - x_star).abs() <= eta);
        let starts_candidate = card == 1 && inside;
        match candidate {
            None => {
                if starts_candidate {
                    candidate = Some(t);
                    prev_diameter = 0.0;
                }
            }
            Some(t1) => {
                if !inside || card > 2 || diameter < prev_diameter {
                    candidate = starts_candidate.then_some(t);
                    prev_diameter = 0.0;
                } else {
                    prev_diameter = diameter;
                    if card == 2 && diameter > eta / 2.0 {
                        split = Some((t1, t));
                    }
                }
            }
        }
    }
    if let Some((t1, t2)) = established {
        report.occurred = true;
        report.t1 = Some(t1);
        report.t2 = Some(t2);
    }
    report
}

#[derive(serde::Serialize)]
struct JumpJson<'a> {
    t: f64,
    support: &'a [f64],
    densities: &'a [f64],
    event: Annotation,
}

/// Newline-delimited JSON: a header record, then one record per jump with
/// the post-jump state and the event annotation.
pub fn write_jumps_ndjson<W: Write>(mut w: W, trajectory: &JumpTrajectory) -> io::Result<()> {
    let header = serde_json::json!({
        "format": PES_FORMAT,
        "version": 1,
        "epsilon": trajectory.epsilon,
        "t_end": trajectory.t_end,
    });
    writeln!(w, "{header}")?;
    for r in &trajectory.jumps {
        let row = JumpJson {
            t: r.time,
            support: r.state.support(),
            densities: r.state.densities(),
            event: r.annotation,
        };
        writeln!(w, "{}", serde_json::to_string(&row).expect("jump serializes"))?;
    }
    Ok(())
}
