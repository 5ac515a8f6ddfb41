//! Exact event-driven simulation of the individual-based birth-death
//! process with competition and rare mutation.
//!
//! The population is the atomic measure `nu = (1/K) sum_i delta_{x_i}`.
//! Individuals with trait `x` give birth at rate `lambda(x)`; a birth is a
//! mutant with probability `u_K p(x)`, in which case the offspring trait is
//! `x + epsilon h` with `h ~ m(x, .)`. Deaths occur at rate
//! `mu(x) + (1/K) sum_y alpha(x, y) count(y)`, where the sum runs over the
//! whole population including the focal individual's own class.
//!
//! Rates are aggregated per distinct trait class, so a step costs
//! O(#classes): the pairwise competition load of every class is maintained
//! incrementally and rebuilt from scratch every [`AUDIT_INTERVAL`] events,
//! failing loudly if the incremental bookkeeping has drifted.

use crate::lotka_volterra::check_coexistence;
use crate::model::{ModelError, ModelSpec};
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::Exp1;
use std::io::{self, Write};

/// Events between full recomputations of the competition loads.
pub const AUDIT_INTERVAL: u64 = 10_000;

/// Allowed relative drift between incremental and rebuilt total rates.
pub const AUDIT_REL_TOL: f64 = 1e-9;

/// Header line of the long-format trajectory CSV.
pub const TRAJECTORY_FORMAT: &str = "# evodyn-trajectory v1";

/// `format` field of the NDJSON event-log header record.
pub const EVENT_FORMAT: &str = "evodyn-events";

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum IbmError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid initial population: {0}")]
    InvalidInitial(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("rate audit failed: incremental death rate {incremental} vs rebuilt {rebuilt}")]
    RateDrift { incremental: f64, rebuilt: f64 },
}

/// Atomic population state: distinct traits with positive counts, plus the
/// carrying scale `K` that turns counts into densities.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PopulationState {
    /// Sorted by trait; every count is at least 1.
    atoms: Vec<(f64, u64)>,
    k: u64,
}

impl PopulationState {
    /// Build from raw atoms. Zero-count atoms are dropped, duplicate traits
    /// merged, and the list sorted.
    pub fn new(atoms: Vec<(f64, u64)>, k: u64) -> Result<Self, IbmError> {
        if k == 0 {
            return Err(IbmError::InvalidInitial("carrying scale K must be >= 1".into()));
        }
        let mut atoms: Vec<(f64, u64)> = atoms.into_iter().filter(|&(_, c)| c > 0).collect();
        for &(x, _) in &atoms {
            if !x.is_finite() {
                return Err(IbmError::InvalidInitial(format!("non-finite trait {x}")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u64)> = Vec::with_capacity(atoms.len());
        for (x, c) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += c,
                _ => merged.push((x, c)),
            }
        }
        Ok(PopulationState { atoms: merged, k })
    }

    pub fn empty(k: u64) -> Self {
        PopulationState { atoms: Vec::new(), k }
    }

    pub fn monomorphic(x: f64, count: u64, k: u64) -> Result<Self, IbmError> {
        PopulationState::new(vec![(x, count)], k)
    }

    /// Round densities to counts at scale `K`. Every density must survive
    /// the rounding, otherwise `K` is too small to represent the state.
    pub fn from_densities(traits: &[f64], densities: &[f64], k: u64) -> Result<Self, IbmError> {
        if traits.len() != densities.len() {
            return Err(IbmError::InvalidInitial(format!(
                "{} traits but {} densities",
                traits.len(),
                densities.len()
            )));
        }
        let mut atoms = Vec::with_capacity(traits.len());
        for (&x, &n) in traits.iter().zip(densities) {
            let count = (n * k as f64).round();
            if !(count >= 1.0) {
                return Err(IbmError::InvalidInitial(format!(
                    "density {n} at trait {x} rounds to zero individuals at K = {k}"
                )));
            }
            atoms.push((x, count as u64));
        }
        PopulationState::new(atoms, k)
    }

    pub fn atoms(&self) -> &[(f64, u64)] {
        &self.atoms
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.atoms.iter().map(|&(_, c)| c).sum()
    }

    /// Total mass `<nu, 1> = N / K`.
    pub fn total_mass(&self) -> f64 {
        self.total_count() as f64 / self.k as f64
    }

    /// Density `count(x) / K` of an exact trait value.
    pub fn density_of(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .find(|&&(t, _)| t == x)
            .map_or(0.0, |&(_, c)| c as f64 / self.k as f64)
    }

    /// Support diameter, zero for fewer than two atoms.
    pub fn support_diameter(&self) -> f64 {
        match (self.atoms.first(), self.atoms.last()) {
            (Some(&(lo, _)), Some(&(hi, _))) => hi - lo,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BirthClonal,
    BirthMutant,
    Death,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// Trait of the individual the event happened to (the parent, for a
    /// mutant birth).
    #[serde(rename = "trait")]
    pub trait_value: f64,
    /// Offspring trait of a mutant birth.
    #[serde(rename = "mutant_trait", skip_serializing_if = "Option::is_none", default)]
    pub mutant: Option<f64>,
}

/// Chronological event record with strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn push(&mut self, event: Event) {
        if let Some(last) = self.events.last() {
            assert!(
                event.time > last.time,
                "event times must be strictly increasing: {} after {}",
                event.time,
                last.time
            );
        }
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// One Gillespie step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event { waiting_time: f64, event: Event },
    /// Empty population: total rate zero, infinite waiting time.
    Absorbed,
}

/// What the roulette selected; the mutant trait is drawn only when the
/// choice is applied.
#[derive(Debug, Clone, Copy)]
enum Choice {
    Birth { class: usize, mutant: bool },
    Death { class: usize },
}

/// Event-driven simulation engine with per-trait-class aggregated rates.
#[derive(Debug, Clone)]
pub struct IbmSimulation {
    model: ModelSpec,
    k: f64,
    time: f64,
    traits: Vec<f64>,
    counts: Vec<u64>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    /// Mutant probability per birth, `u_K p(x)`.
    pmut: Vec<f64>,
    /// Competition load `sum_j alpha(x_i, x_j) count_j`, full population
    /// including class i itself. Maintained incrementally.
    comp: Vec<f64>,
    birth_w: Vec<f64>,
    death_w: Vec<f64>,
    total_birth: f64,
    total_death: f64,
    events_since_audit: u64,
    total_events: u64,
}

impl IbmSimulation {
    pub fn new(model: &ModelSpec, initial: &PopulationState) -> Result<Self, IbmError> {
        if initial.k() != model.carrying_scale() {
            return Err(IbmError::InvalidInitial(format!(
                "state carries K = {} but the model fixes K = {}",
                initial.k(),
                model.carrying_scale()
            )));
        }
        for &(x, _) in initial.atoms() {
            model.space().check(x)?;
        }
        let mut sim = IbmSimulation {
            model: model.clone(),
            k: model.carrying_scale() as f64,
            time: 0.0,
            traits: initial.atoms().iter().map(|&(x, _)| x).collect(),
            counts: initial.atoms().iter().map(|&(_, c)| c).collect(),
            lambda: Vec::new(),
            mu: Vec::new(),
            pmut: Vec::new(),
            comp: Vec::new(),
            birth_w: Vec::new(),
            death_w: Vec::new(),
            total_birth: 0.0,
            total_death: 0.0,
            events_since_audit: 0,
            total_events: 0,
        };
        let u = sim.model.mut_rate_scale();
        for &x in &sim.traits {
            sim.lambda.push(sim.model.birth(x));
            sim.mu.push(sim.model.death(x));
            sim.pmut.push(u * sim.model.mut_prob(x));
        }
        sim.comp = sim.rebuild_comp();
        sim.refresh_rates();
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn class_count(&self) -> usize {
        self.traits.len()
    }

    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    pub fn total_birth_rate(&self) -> f64 {
        self.total_birth
    }

    pub fn total_death_rate(&self) -> f64 {
        self.total_death
    }

    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.k
    }

    pub fn is_extinct(&self) -> bool {
        self.traits.is_empty()
    }

    /// Export the current population, atoms sorted by trait.
    pub fn state(&self) -> PopulationState {
        let atoms: Vec<(f64, u64)> = self
            .traits
            .iter()
            .copied()
            .zip(self.counts.iter().copied())
            .collect();
        PopulationState::new(atoms, self.model.carrying_scale())
            .expect("engine state is always a valid population")
    }

    /// Advance by one event. Exact: exponential waiting time with the total
    /// rate, event picked proportionally to the class rates.
    pub fn step(&mut self, rng: &mut SimRng) -> Result<StepOutcome, IbmError> {
        let Some((wait, choice)) = self.draw(rng) else {
            return Ok(StepOutcome::Absorbed);
        };
        let time = self.time + wait;
        let event = self.apply(time, choice, rng)?;
        Ok(StepOutcome::Event { waiting_time: wait, event })
    }

    /// Sample the waiting time and the event choice without touching the
    /// state. `None` means the population is empty and absorbed.
    fn draw(&self, rng: &mut SimRng) -> Option<(f64, Choice)> {
        let total = self.total_birth + self.total_death;
        if total <= 0.0 {
            return None;
        }
        let wait = rng.sample::<f64, _>(Exp1) / total;
        let target = rng.gen::<f64>() * total;
        let choice = if target < self.total_birth {
            let class = roulette(&self.birth_w, target);
            let mutant = rng.gen::<f64>() < self.pmut[class];
            Choice::Birth { class, mutant }
        } else {
            Choice::Death { class: roulette(&self.death_w, target - self.total_birth) }
        };
        Some((wait, choice))
    }

    fn apply(&mut self, time: f64, choice: Choice, rng: &mut SimRng) -> Result<Event, IbmError> {
        let event = match choice {
            Choice::Birth { class, mutant: false } => {
                let x = self.traits[class];
                self.counts[class] += 1;
                self.shift_comp(x, 1.0);
                Event { time, kind: EventKind::BirthClonal, trait_value: x, mutant: None }
            }
            Choice::Birth { class, mutant: true } => {
                let parent = self.traits[class];
                let h = self.model.kernel().sample(parent, rng)?;
                let y = parent + self.model.jump_scale() * h;
                debug_assert!(self.model.space().contains(y));
                self.add_individual(y);
                Event { time, kind: EventKind::BirthMutant, trait_value: parent, mutant: Some(y) }
            }
            Choice::Death { class } => {
                let x = self.traits[class];
                self.counts[class] -= 1;
                self.shift_comp(x, -1.0);
                if self.counts[class] == 0 {
                    self.remove_class(class);
                }
                Event { time, kind: EventKind::Death, trait_value: x, mutant: None }
            }
        };
        self.time = time;
        self.refresh_rates();
        self.total_events += 1;
        self.events_since_audit += 1;
        if self.events_since_audit >= AUDIT_INTERVAL {
            self.audit()?;
        }
        Ok(event)
    }

    /// `comp_i += delta * alpha(x_i, x)` for every class i.
    fn shift_comp(&mut self, x: f64, delta: f64) {
        for (ci, &xi) in self.comp.iter_mut().zip(&self.traits) {
            *ci += delta * self.model.competition(xi, x);
        }
    }

    /// One more individual with trait `y`: merge into an existing class or
    /// open a new one.
    fn add_individual(&mut self, y: f64) {
        self.shift_comp(y, 1.0);
        if let Some(i) = self.traits.iter().position(|&t| t == y) {
            self.counts[i] += 1;
            return;
        }
        let comp = self
            .traits
            .iter()
            .zip(&self.counts)
            .map(|(&xj, &cj)| self.model.competition(y, xj) * cj as f64)
            .sum::<f64>()
            + self.model.competition(y, y);
        self.traits.push(y);
        self.counts.push(1);
        self.lambda.push(self.model.birth(y));
        self.mu.push(self.model.death(y));
        self.pmut.push(self.model.mut_rate_scale() * self.model.mut_prob(y));
        self.comp.push(comp);
    }

    fn remove_class(&mut self, i: usize) {
        self.traits.swap_remove(i);
        self.counts.swap_remove(i);
        self.lambda.swap_remove(i);
        self.mu.swap_remove(i);
        self.pmut.swap_remove(i);
        self.comp.swap_remove(i);
    }

    /// Recompute the per-class and total rates from counts and competition
    /// loads. O(#classes); called after every event because one event
    /// changes every class's death rate through the competition term.
    fn refresh_rates(&mut self) {
        self.birth_w.clear();
        self.death_w.clear();
        let mut tb = 0.0;
        let mut td = 0.0;
        for i in 0..self.traits.len() {
            let c = self.counts[i] as f64;
            let bw = c * self.lambda[i];
            let dw = c * (self.mu[i] + self.comp[i] / self.k);
            self.birth_w.push(bw);
            self.death_w.push(dw);
            tb += bw;
            td += dw;
        }
        self.total_birth = tb;
        self.total_death = td;
    }

    fn rebuild_comp(&self) -> Vec<f64> {
        self.traits
            .iter()
            .map(|&xi| {
                self.traits
                    .iter()
                    .zip(&self.counts)
                    .map(|(&xj, &cj)| self.model.competition(xi, xj) * cj as f64)
                    .sum()
            })
            .collect()
    }

    /// Compare the incrementally maintained total death rate against a full
    /// O(#classes^2) rebuild, then adopt the rebuilt loads so float drift
    /// cannot compound. The birth side has no incremental state.
    fn audit(&mut self) -> Result<(), IbmError> {
        self.events_since_audit = 0;
        let incremental = self.total_death;
        let fresh = self.rebuild_comp();
        let rebuilt: f64 = (0..self.traits.len())
            .map(|i| self.counts[i] as f64 * (self.mu[i] + fresh[i] / self.k))
            .sum();
        let scale = rebuilt.abs().max(1e-300);
        if (incremental - rebuilt).abs() > AUDIT_REL_TOL * scale {
            return Err(IbmError::RateDrift { incremental, rebuilt });
        }
        self.comp = fresh;
        self.refresh_rates();
        Ok(())
    }

    /// Relative deviation between incremental and rebuilt total death
    /// rates, for diagnostics.
    pub fn audit_relative_drift(&self) -> f64 {
        let fresh = self.rebuild_comp();
        let rebuilt: f64 = (0..self.traits.len())
            .map(|i| self.counts[i] as f64 * (self.mu[i] + fresh[i] / self.k))
            .sum();
        (self.total_death - rebuilt).abs() / rebuilt.abs().max(1e-300)
    }
}

/// Pick the index whose cumulative weight first exceeds `target`. Clamps to
/// the last entry so float runoff cannot fall off the end.
fn roulette(weights: &[f64], mut target: f64) -> usize {
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

#[derive(Debug, Clone, Copy)]
pub struct RecorderConfig {
    /// Snapshot count on the uniform grid over [0, t_end], endpoints
    /// included. At least 2.
    pub snapshots: usize,
    /// Keep the full event log (memory heavy for long runs).
    pub log_events: bool,
}

impl Default for RecorderConfig {
    fn default() -> Self {
        RecorderConfig { snapshots: 500, log_events: false }
    }
}

#[derive(Debug, Clone)]
pub struct IbmRun {
    /// `(time, state)` on the recorder grid.
    pub snapshots: Vec<(f64, PopulationState)>,
    /// Empty unless `log_events` was set.
    pub events: EventLog,
    pub final_state: PopulationState,
    /// Population died out before `t_end`.
    pub absorbed: bool,
    pub event_count: u64,
}

/// Run the process on [0, t_end]. Deterministic given the seed: identical
/// seeds replay identical event sequences.
pub fn simulate(
    model: &ModelSpec,
    initial: &PopulationState,
    t_end: f64,
    rng: &mut SimRng,
    recorder: RecorderConfig,
) -> Result<IbmRun, IbmError> {
    if !(t_end > 0.0) {
        return Err(IbmError::Precondition(format!("t_end = {t_end} must be positive")));
    }
    if recorder.snapshots < 2 {
        return Err(IbmError::Precondition("recorder needs at least 2 snapshots".into()));
    }
    let mut sim = IbmSimulation::new(model, initial)?;
    let grid_time = |i: usize| t_end * i as f64 / (recorder.snapshots - 1) as f64;
    let mut snapshots = Vec::with_capacity(recorder.snapshots);
    let mut events = EventLog::new();
    let mut absorbed = false;
    loop {
        let drawn = sim.draw(rng);
        // Grid points before the next event (or all remaining ones if the
        // population is gone or time is up) record the current state.
        let horizon = match drawn {
            Some((wait, _)) => (sim.time + wait).min(t_end),
            None => t_end,
        };
        while snapshots.len() < recorder.snapshots && grid_time(snapshots.len()) < horizon {
            snapshots.push((grid_time(snapshots.len()), sim.state()));
        }
        match drawn {
            None => {
                absorbed = true;
                break;
            }
            Some((wait, choice)) => {
                let time = sim.time + wait;
                if time > t_end {
                    sim.time = t_end;
                    break;
                }
                let event = sim.apply(time, choice, rng)?;
                if recorder.log_events {
                    events.push(event);
                }
            }
        }
    }
    while snapshots.len() < recorder.snapshots {
        snapshots.push((grid_time(snapshots.len()), sim.state()));
    }
    Ok(IbmRun {
        snapshots,
        events,
        final_state: sim.state(),
        absorbed,
        event_count: sim.total_events(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstMutation {
    /// First mutant birth: its time and the parent's trait.
    Mutation { time: f64, parent: f64 },
    /// The population died out before any mutation.
    Extinct { time: f64 },
}

/// Time and parent of the first mutation in a resident population started
/// from its equilibrium densities. Mutations are detected but never
/// applied, so the run stays on the resident traits.
pub fn first_mutation_time(
    model: &ModelSpec,
    residents: &[f64],
    rng: &mut SimRng,
) -> Result<FirstMutation, IbmError> {
    let report = check_coexistence(model, residents)
        .map_err(|e| IbmError::Precondition(format!("resident coexistence check failed: {e}")))?;
    if !report.coexists {
        return Err(IbmError::Precondition(format!(
            "residents {residents:?} do not coexist"
        )));
    }
    let equilibrium = report
        .equilibrium
        .expect("coexisting residents have an equilibrium");
    let initial =
        PopulationState::from_densities(residents, &equilibrium.point, model.carrying_scale())?;
    let mut sim = IbmSimulation::new(model, &initial)?;
    if sim.pmut.iter().all(|&p| p <= 0.0) {
        return Err(IbmError::Precondition(
            "mutation is switched off: u_K p(x) = 0 for every resident".into(),
        ));
    }
    loop {
        match sim.draw(rng) {
            None => return Ok(FirstMutation::Extinct { time: sim.time }),
            Some((wait, choice)) => {
                let time = sim.time + wait;
                if let Choice::Birth { class, mutant: true } = choice {
                    return Ok(FirstMutation::Mutation { time, parent: sim.traits[class] });
                }
                sim.apply(time, choice, rng)?;
            }
        }
    }
}

/// Long-format trajectory CSV: a version line, a column header, then one
/// row per (snapshot, atom).
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    snapshots: &[(f64, PopulationState)],
) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_FORMAT}")?;
    writeln!(w, "time,trait,density")?;
    for (t, state) in snapshots {
        let k = state.k() as f64;
        for &(x, c) in state.atoms() {
            writeln!(w, "{t},{x},{}", c as f64 / k)?;
        }
    }
    Ok(())
}

/// Newline-delimited JSON event log: a header record with the format
/// version, then one record per event.
pub fn write_events_ndjson<W: Write>(mut w: W, log: &EventLog) -> io::Result<()> {
    let header = serde_json::json!({ "format": EVENT_FORMAT, "version": 1 });
    writeln!(w, "{header}")?;
    for event in log.events() {
        writeln!(w, "{}", serde_json::to_string(event).expect("event serializes"))?;
    }
    Ok(())
}
