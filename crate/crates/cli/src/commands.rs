//! The six commands. Each one builds the model from the loaded config,
//! dispatches replicates through the core worker pool, and then writes
//! every output file itself, in replicate order, so artifacts never
//! interleave and a fixed seed reproduces them byte for byte.

use crate::cluster::{gap_clusters, Cluster, CLUSTER_GAP};
use crate::config::{ConfigError, RunConfig};
use evodyn_core::ibm::{self, IbmError, PopulationState, RecorderConfig};
use evodyn_core::lotka_volterra::LvError;
use evodyn_core::model::{ModelError, ModelSpec};
use evodyn_core::par::run_replicates;
use evodyn_core::pes::{
    detect_branching, simulate_pes, write_jumps_ndjson, JumpTrajectory, Killed, PESState,
    PesError, PesParams,
};
use evodyn_core::singularity::{
    find_singularities, pip, verify_expansions, write_pip_csv, Classification,
    ExpansionDiagnostics, SingError, SingularityReport,
};
use evodyn_core::tss::{simulate_tss, solve_canonical, write_tss_csv, TssError};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

/// Everything a command needs besides its section: the parsed config, the
/// digest of the file it came from, the resolved master seed, and the
/// output directory.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: RunConfig,
    pub hash: String,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    /// The experiment file cannot produce a runnable experiment: exit 2.
    Config(ConfigError),
    /// The experiment itself failed: exit 1.
    Runtime(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

macro_rules! runtime_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Runtime(e.into())
            }
        }
    )*};
}

runtime_from!(IbmError, PesError, TssError, SingError, LvError, ModelError,
    std::io::Error, serde_json::Error);

fn runtime(msg: String) -> CliError {
    CliError::Runtime(anyhow::anyhow!(msg))
}

/// Config-level complaint raised after parsing, e.g. a start trait
/// outside the model's trait space.
fn config_err(msg: String) -> CliError {
    CliError::Config(ConfigError(msg))
}

impl RunContext {
    pub fn model(&self) -> Result<ModelSpec, CliError> {
        Ok(self.config.model.build()?)
    }

    /// Header line carried by every text artifact.
    pub fn artifact_line(&self) -> String {
        let a = self.artifact();
        format!("# evodyn v{} config={} seed={}", a.version, a.config, a.seed)
    }

    pub fn artifact(&self) -> Artifact {
        Artifact {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.hash.clone(),
            seed: self.seed,
        }
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        std::fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let w = BufWriter::new(File::create(&path)?);
        Ok((path, w))
    }

    fn write_summary<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub version: String,
    pub config: String,
    pub seed: u64,
}

/// Serde name of a unit enum value, e.g. `branching` or
/// `attracting_no_branching` for a classification.
pub fn serde_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

/// Heuristic check of the rare-mutation scaling window: mutations must be
/// rare enough that log K stays well below 1/(K u_K), so the product
/// log(K) K u_K should be small. The exp(V K) upper side needs a
/// large-deviation constant nobody computes, so only this side is
/// checked.
pub fn scaling_advisory(model: &ModelSpec) -> Option<String> {
    let k = model.carrying_scale() as f64;
    let product = k.ln() * k * model.mut_rate_scale();
    (product >= 0.1).then(|| {
        format!(
            "advisory: log(K) K u_K = {product:.3} >= 0.1, outside the rare-mutation \
             window; substitution-sequence approximations may drift from the \
             individual-based dynamics"
        )
    })
}

fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
}

fn check_start(model: &ModelSpec, x0: f64, what: &str) -> Result<(), CliError> {
    model
        .space()
        .check(x0)
        .map_err(|e| config_err(format!("{what}: {e}")))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0u64);
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

// ---------------------------------------------------------------- ibm --

#[derive(Debug, Clone, Serialize)]
pub struct IbmReplicate {
    pub replicate: u64,
    pub absorbed: bool,
    pub event_count: u64,
    pub final_mass: f64,
    pub clusters: Vec<Cluster>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IbmSummary {
    pub artifact: Artifact,
    pub t_end: f64,
    pub replicates: Vec<IbmReplicate>,
}

pub fn cmd_simulate_ibm(ctx: &RunContext) -> Result<IbmSummary, CliError> {
    let model = ctx.model()?;
    let sec = &ctx.config.ibm;
    check_start(&model, sec.x0, "ibm.x0")?;
    let count = ((model.carrying_scale() as f64 * sec.initial_density).round() as u64).max(1);
    let initial = PopulationState::monomorphic(sec.x0, count, model.carrying_scale())
        .map_err(|e| config_err(e.to_string()))?;
    let recorder = RecorderConfig { snapshots: sec.snapshots, log_events: sec.log_events };
    let runs = run_replicates(ctx.seed, sec.replicates, |_, rng| {
        ibm::simulate(&model, &initial, sec.t_end, rng, recorder)
    });

    let mut replicates = Vec::with_capacity(runs.len());
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        let (path, mut w) = ctx.create(&format!("ibm_r{r}.csv"))?;
        writeln!(w, "{}", ctx.artifact_line())?;
        ibm::write_trajectory_csv(&mut w, &run.snapshots)?;
        w.flush()?;
        if sec.log_events {
            let (_, mut w) = ctx.create(&format!("ibm_events_r{r}.ndjson"))?;
            writeln!(w, "{}", serde_json::json!({ "artifact": ctx.artifact() }))?;
            ibm::write_events_ndjson(&mut w, &run.events)?;
            w.flush()?;
        }
        let k = run.final_state.k() as f64;
        let atoms: Vec<(f64, f64)> = run
            .final_state
            .atoms()
            .iter()
            .map(|&(x, c)| (x, c as f64 / k))
            .collect();
        let clusters = gap_clusters(&atoms, CLUSTER_GAP);
        let means: Vec<String> = clusters.iter().map(|c| format!("{:.3}", c.mean)).collect();
        println!(
            "ibm r{r}: {} events, {} cluster(s) at t = {} [{}] -> {}",
            run.event_count,
            clusters.len(),
            sec.t_end,
            means.join(", "),
            path.display()
        );
        replicates.push(IbmReplicate {
            replicate: r as u64,
            absorbed: run.absorbed,
            event_count: run.event_count,
            final_mass: run.final_state.total_mass(),
            clusters,
        });
    }
    let summary = IbmSummary { artifact: ctx.artifact(), t_end: sec.t_end, replicates };
    let path = ctx.write_summary("ibm_summary.json", &summary)?;
    println!("ibm summary -> {}", path.display());
    Ok(summary)
}

// ---------------------------------------------------------------- pes --

#[derive(Debug, Clone, Serialize)]
pub struct PesReplicate {
    pub replicate: u64,
    pub branched: bool,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub max_support_diameter: f64,
    pub killed: Killed,
    pub jumps: usize,
    pub final_support: Vec<f64>,
    pub final_densities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PesSummary {
    pub artifact: Artifact,
    pub x_star: f64,
    pub eta: f64,
    pub branched_fraction: f64,
    pub replicates: Vec<PesReplicate>,
}

pub fn cmd_simulate_pes(ctx: &RunContext) -> Result<PesSummary, CliError> {
    let model = ctx.model()?;
    let sec = &ctx.config.pes;
    check_start(&model, sec.x0, "pes.x0")?;
    let initial =
        PESState::monomorphic(&model, sec.x0).map_err(|e| config_err(e.to_string()))?;
    let params = PesParams::default();
    let variant: evodyn_core::pes::PesVariant = sec.variant.into();
    let trajs = run_replicates(ctx.seed, sec.replicates, |_, rng| {
        simulate_pes(&model, &initial, sec.t_end, rng, variant, &params)
    });
    let trajs: Vec<JumpTrajectory> = trajs.into_iter().collect::<Result<_, _>>()?;

    let x_star = pes_reference_point(ctx, &model, &trajs)?;
    let mut replicates = Vec::with_capacity(trajs.len());
    for (r, traj) in trajs.iter().enumerate() {
        let report = detect_branching(traj, x_star, sec.eta);
        let (_, mut w) = ctx.create(&format!("pes_r{r}.ndjson"))?;
        writeln!(w, "{}", serde_json::json!({ "artifact": ctx.artifact() }))?;
        write_jumps_ndjson(&mut w, traj)?;
        w.flush()?;
        let state = traj.final_state();
        println!(
            "pes r{r}: {} jumps, killed = {}, branching = {}{}",
            traj.jumps.len(),
            serde_name(&state.killed()),
            report.occurred,
            report.t2.map_or(String::new(), |t| format!(" (complete at t = {t:.1})")),
        );
        replicates.push(PesReplicate {
            replicate: r as u64,
            branched: report.occurred,
            t1: report.t1,
            t2: report.t2,
            max_support_diameter: report.max_support_diameter,
            killed: state.killed(),
            jumps: traj.jumps.len(),
            final_support: state.support().to_vec(),
            final_densities: state.densities().to_vec(),
        });
    }
    let branched_fraction =
        replicates.iter().filter(|r| r.branched).count() as f64 / replicates.len() as f64;
    let summary = PesSummary {
        artifact: ctx.artifact(),
        x_star,
        eta: sec.eta,
        branched_fraction,
        replicates,
    };
    let path = ctx.write_summary("pes_summary.json", &summary)?;
    println!(
        "pes: branching in {:.0}% of {} replicates around x* = {x_star:.4} -> {}",
        100.0 * branched_fraction,
        summary.replicates.len(),
        path.display()
    );
    Ok(summary)
}

/// Singularity the branching detector centers on: the configured one, or
/// the located singularity nearest to where the trajectories ended up.
fn pes_reference_point(
    ctx: &RunContext,
    model: &ModelSpec,
    trajs: &[JumpTrajectory],
) -> Result<f64, CliError> {
    if let Some(x) = ctx.config.pes.x_star {
        check_start(model, x, "pes.x_star")?;
        return Ok(x);
    }
    let reports = find_singularities(model, &model.space().grid(ctx.config.analyze.grid))?;
    let pooled = mean(trajs.iter().filter_map(|t| {
        let s = t.final_state().support();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    }));
    let pooled = if pooled.is_finite() { pooled } else { ctx.config.pes.x0 };
    reports
        .iter()
        .map(|r| r.x_star())
        .min_by(|a, b| (a - pooled).abs().total_cmp(&(b - pooled).abs()))
        .ok_or_else(|| {
            runtime(
                "no singularity located; branching detection needs one (set pes.x_star)".into(),
            )
        })
}

// ---------------------------------------------------------------- tss --

#[derive(Debug, Clone, Serialize)]
pub struct TssSummary {
    pub artifact: Artifact,
    pub epsilon: f64,
    pub t_end: f64,
    /// Uniform time grid shared with the canonical command.
    pub grid: Vec<f64>,
    pub mean_path: Vec<f64>,
    pub final_traits: Vec<f64>,
    pub jump_counts: Vec<usize>,
}

pub fn cmd_simulate_tss(ctx: &RunContext) -> Result<TssSummary, CliError> {
    let model = ctx.model()?;
    let sec = &ctx.config.tss;
    check_start(&model, sec.x0, "tss.x0")?;
    let epsilon = sec.epsilon.unwrap_or_else(|| model.jump_scale());
    let paths = run_replicates(ctx.seed, sec.replicates, |_, rng| {
        simulate_tss(&model, sec.x0, epsilon, sec.t_end, rng)
    });
    let paths: Vec<_> = paths.into_iter().collect::<Result<_, _>>()?;

    let grid = linspace(sec.t_end, sec.snapshots);
    let mean_path: Vec<f64> = grid
        .iter()
        .map(|&t| mean(paths.iter().map(|p| p.at(t))))
        .collect();
    for (r, path) in paths.iter().enumerate() {
        let (_, mut w) = ctx.create(&format!("tss_r{r}.csv"))?;
        writeln!(w, "{}", ctx.artifact_line())?;
        write_tss_csv(&mut w, &model, path)?;
        w.flush()?;
    }
    let (mean_file, mut w) = ctx.create("tss_mean.csv")?;
    writeln!(w, "{}", ctx.artifact_line())?;
    writeln!(w, "{}", ibm::TRAJECTORY_FORMAT)?;
    writeln!(w, "time,trait,density")?;
    for (&t, &x) in grid.iter().zip(&mean_path) {
        writeln!(w, "{t},{x},{}", model.monomorphic_equilibrium(x)?)?;
    }
    w.flush()?;

    let summary = TssSummary {
        artifact: ctx.artifact(),
        epsilon,
        t_end: sec.t_end,
        grid,
        mean_path,
        final_traits: paths.iter().map(|p| p.final_trait()).collect(),
        jump_counts: paths.iter().map(|p| p.jump_count()).collect(),
    };
    let path = ctx.write_summary("tss_summary.json", &summary)?;
    println!(
        "tss: {} replicates at epsilon = {epsilon}, mean final trait {:.4} -> {}, {}",
        summary.final_traits.len(),
        summary.mean_path.last().unwrap(),
        mean_file.display(),
        path.display()
    );
    Ok(summary)
}

// ---------------------------------------------------------- canonical --

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSummary {
    pub artifact: Artifact,
    pub t_end: f64,
    /// Uniform time grid shared with the tss command.
    pub grid: Vec<f64>,
    pub path: Vec<f64>,
    pub final_value: f64,
    pub error_estimate: f64,
}

pub fn cmd_canonical(ctx: &RunContext) -> Result<CanonicalSummary, CliError> {
    let model = ctx.model()?;
    let sec = &ctx.config.canonical;
    check_start(&model, sec.x0, "canonical.x0")?;
    let sol = solve_canonical(&model, sec.x0, sec.t_end, sec.tol)?;
    let grid = linspace(sec.t_end, sec.snapshots);
    let path: Vec<f64> = grid.iter().map(|&t| sol.at(t)).collect();
    let (csv, mut w) = ctx.create("canonical.csv")?;
    writeln!(w, "{}", ctx.artifact_line())?;
    writeln!(w, "{}", ibm::TRAJECTORY_FORMAT)?;
    writeln!(w, "time,trait,density")?;
    for (&t, &x) in grid.iter().zip(&path) {
        writeln!(w, "{t},{x},{}", model.monomorphic_equilibrium(x)?)?;
    }
    w.flush()?;
    let summary = CanonicalSummary {
        artifact: ctx.artifact(),
        t_end: sec.t_end,
        grid,
        final_value: sol.final_value(),
        error_estimate: sol.error_estimate(),
        path,
    };
    let path = ctx.write_summary("canonical_summary.json", &summary)?;
    println!(
        "canonical: x({}) = {:.6} (error estimate {:.2e}) -> {}, {}",
        sec.t_end,
        summary.final_value,
        summary.error_estimate,
        csv.display(),
        path.display()
    );
    Ok(summary)
}

// ------------------------------------------------------------ analyze --

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    #[serde(flatten)]
    pub report: SingularityReport,
    pub verdict: String,
    /// Absent at degenerate singularities, where the expansions are not
    /// meaningful.
    pub expansions: Option<ExpansionDiagnostics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub artifact: Artifact,
    pub reports: Vec<AnalyzeReport>,
}

pub fn cmd_analyze(ctx: &RunContext) -> Result<AnalyzeSummary, CliError> {
    let model = ctx.model()?;
    let sec = &ctx.config.analyze;
    let found = find_singularities(&model, &model.space().grid(sec.grid))?;
    if found.is_empty() {
        println!("no singularities on a {}-point grid", sec.grid);
    }
    let mut reports = Vec::with_capacity(found.len());
    for r in &found {
        let verdict = serde_name(&r.classification());
        println!(
            "singularity at x* = {:.6}: a = {:.6}, c = {:.6}",
            r.x_star(),
            r.a(),
            r.c()
        );
        println!("verdict: {verdict}");
        println!("coexistence nearby: {}", r.coexistence_nearby());
        let expansions = if r.classification() == Classification::Degenerate {
            println!("expansions: skipped (degenerate)");
            None
        } else {
            let diag = verify_expansions(&model, r, &sec.scales)?;
            let fmt = |v: &[f64]| {
                v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
            };
            println!(
                "expansion remainders r2: {} (decreasing: {})",
                fmt(&diag.r2),
                diag.r2_decreasing
            );
            println!(
                "expansion remainders r3: {} (decreasing: {})",
                fmt(&diag.r3),
                diag.r3_decreasing
            );
            println!(
                "pair mass relative error {:.3e}, identity residual {:.3e}",
                diag.pair_mass_rel_err, diag.es_identity_residual
            );
            Some(diag)
        };
        reports.push(AnalyzeReport { report: *r, verdict, expansions });
    }
    let summary = AnalyzeSummary { artifact: ctx.artifact(), reports };
    let path = ctx.write_summary("analysis.json", &summary)?;
    println!("analysis -> {}", path.display());
    Ok(summary)
}

// ---------------------------------------------------------------- pip --

#[derive(Debug, Clone, Serialize)]
pub struct PipSummary {
    pub artifact: Artifact,
    pub center: f64,
    pub window: (f64, f64),
    pub resolution: usize,
    /// Fraction of grid cells where mutant and resident invade each
    /// other.
    pub coexist_fraction: f64,
}

pub fn cmd_pip(ctx: &RunContext) -> Result<PipSummary, CliError> {
    let model = ctx.model()?;
    let sec = &ctx.config.pip;
    let center = match sec.center {
        Some(c) => {
            check_start(&model, c, "pip.center")?;
            c
        }
        None => find_singularities(&model, &model.space().grid(ctx.config.analyze.grid))?
            .first()
            .map(|r| r.x_star())
            .ok_or_else(|| {
                runtime("no singularity located; set pip.center for the window".into())
            })?,
    };
    let space = model.space();
    let lo = (center - sec.half_width).max(space.lower());
    let hi = (center + sec.half_width).min(space.upper());
    if !(lo < hi) {
        return Err(config_err(format!(
            "pip window around {center} collapses after clamping to the trait space"
        )));
    }
    let grid = pip(&model, (lo, hi), sec.resolution)?;
    let n = grid.resolution();
    let coexist =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| grid.coexist(i, j));
    let coexist_fraction = coexist.count() as f64 / (n * n) as f64;
    let (path, mut w) = ctx.create("pip.csv")?;
    writeln!(w, "{}", ctx.artifact_line())?;
    write_pip_csv(&mut w, &grid)?;
    w.flush()?;
    let summary = PipSummary {
        artifact: ctx.artifact(),
        center,
        window: (lo, hi),
        resolution: sec.resolution,
        coexist_fraction,
    };
    let json = ctx.write_summary("pip_summary.json", &summary)?;
    println!(
        "pip: window [{lo:.3}, {hi:.3}] at {n} points, coexistence in {:.1}% of pairs -> {}, {}",
        100.0 * coexist_fraction,
        path.display(),
        json.display()
    );
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(toml_text: &str, out: &std::path::Path) -> RunContext {
        let config: RunConfig = toml::from_str(toml_text).unwrap();
        config.validate().unwrap();
        RunContext {
            config,
            hash: "deadbeef0123".into(),
            seed: 7,
            out: out.to_path_buf(),
        }
    }

    const SMALL: &str = r#"
        [model]
        family = "gaussian_example"
        sigma_b = 0.9
        sigma_alpha = 1.0
        sigma = 0.1
        p = 0.1
        K = 50
        [ibm]
        t_end = 5.0
        snapshots = 11
        [tss]
        t_end = 2.0
        replicates = 3
        epsilon = 0.1
        snapshots = 21
        [canonical]
        t_end = 2.0
        snapshots = 21
        [pip]
        resolution = 24
        half_width = 0.3
    "#;

    #[test]
    fn advisory_fires_only_outside_the_scaling_window() {
        let hot = ctx(SMALL, std::path::Path::new(".")).model().unwrap();
        assert!(scaling_advisory(&hot).is_some());
        let cold = ctx(&SMALL.replace("K = 50", "K = 100\nu_K = 1e-5"), std::path::Path::new("."))
            .model()
            .unwrap();
        assert!(scaling_advisory(&cold).is_none());
    }

    #[test]
    fn classification_names_use_snake_case() {
        assert_eq!(serde_name(&Classification::Branching), "branching");
        assert_eq!(
            serde_name(&Classification::AttractingNoBranching),
            "attracting_no_branching"
        );
        assert_eq!(serde_name(&Killed::Alive), "none");
    }

    #[test]
    fn small_ibm_run_writes_headed_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(SMALL, dir.path());
        let summary = cmd_simulate_ibm(&ctx).unwrap();
        assert_eq!(summary.replicates.len(), 1);
        assert!(!summary.replicates[0].clusters.is_empty());
        let csv = std::fs::read_to_string(dir.path().join("ibm_r0.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("# evodyn v{} config=deadbeef0123 seed=7", env!("CARGO_PKG_VERSION"))
        );
        assert_eq!(lines.next().unwrap(), ibm::TRAJECTORY_FORMAT);
        assert_eq!(lines.next().unwrap(), "time,trait,density");
        let json = std::fs::read_to_string(dir.path().join("ibm_summary.json")).unwrap();
        assert!(json.contains("\"config\": \"deadbeef0123\""));
    }

    #[test]
    fn identical_seeds_reproduce_identical_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        cmd_simulate_ibm(&ctx(SMALL, a.path())).unwrap();
        cmd_simulate_ibm(&ctx(SMALL, b.path())).unwrap();
        for name in ["ibm_r0.csv", "ibm_summary.json"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs between reruns");
        }
    }

    #[test]
    fn tss_and_canonical_share_the_time_grid() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(SMALL, dir.path());
        let tss = cmd_simulate_tss(&ctx).unwrap();
        let canonical = cmd_canonical(&ctx).unwrap();
        assert_eq!(tss.grid, canonical.grid);
        assert_eq!(tss.mean_path.len(), tss.grid.len());
        // overlay files carry one row per grid point under the headers
        for name in ["tss_mean.csv", "canonical.csv"] {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert_eq!(text.lines().count(), 3 + tss.grid.len(), "{name}");
        }
    }

    #[test]
    fn analyze_and_pip_report_the_example_singularity() {
        let dir = tempfile::tempdir().unwrap();
        let ctx = ctx(SMALL, dir.path());
        let analysis = cmd_analyze(&ctx).unwrap();
        assert_eq!(analysis.reports.len(), 1);
        let r = &analysis.reports[0];
        assert!(r.report.x_star().abs() < 1e-6);
        assert_eq!(r.verdict, "attracting_no_branching");
        let diag = r.expansions.as_ref().unwrap();
        assert!(diag.r2_decreasing && diag.r3_decreasing);

        let pip = cmd_pip(&ctx).unwrap();
        assert!((pip.center - r.report.x_star()).abs() < 1e-9);
        assert!(pip.window.0 < 0.0 && pip.window.1 > 0.0);
        // a + c > 0 here, so a mutual-invasion cone touches the
        // singularity even though branching never follows
        assert!(pip.coexist_fraction > 0.0);
        let csv = std::fs::read_to_string(dir.path().join("pip.csv")).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "x,y,sign_fyx,sign_fxy,coexist");
    }
}
