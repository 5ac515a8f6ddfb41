//! Experiment files: TOML with one `[model]` table and one optional
//! section per command. Anything the user wrote in the file that cannot
//! produce a runnable experiment is a config error, which the binary maps
//! to exit code 2.

use evodyn_core::model::gaussian::GaussianExampleParams;
use evodyn_core::model::tabulated::TabulatedFamily;
use evodyn_core::model::ModelSpec;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

/// Hex characters of the config digest carried in output headers.
const HASH_LEN: usize = 12;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<evodyn_core::model::ModelError> for ConfigError {
    fn from(e: evodyn_core::model::ModelError) -> Self {
        ConfigError(e.to_string())
    }
}

/// The whole experiment file. Sections are optional; a missing section
/// means the command runs on its defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Absent means a fresh one from OS entropy, which is
    /// recorded in the output headers so the run can still be replayed.
    pub seed: Option<u64>,
    /// Output directory, created if missing. Defaults to the current
    /// directory.
    pub out: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub ibm: IbmSection,
    #[serde(default)]
    pub pes: PesSection,
    #[serde(default)]
    pub tss: TssSection,
    #[serde(default)]
    pub canonical: CanonicalSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub pip: PipSection,
}

/// Model table. `family` selects the closed-form Gaussian example or a
/// fully tabulated custom model; the scaling knobs K, u_K, epsilon are
/// shared by both.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    GaussianExample {
        sigma_b: f64,
        sigma_alpha: f64,
        sigma: f64,
        p: f64,
        #[serde(rename = "K")]
        k: u64,
        #[serde(rename = "u_K", default = "one")]
        u_k: f64,
        #[serde(default = "one")]
        epsilon: f64,
    },
    Custom {
        #[serde(flatten)]
        tables: TabulatedFamily,
        #[serde(rename = "K")]
        k: u64,
        #[serde(rename = "u_K", default = "one")]
        u_k: f64,
        #[serde(default = "one")]
        epsilon: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, ConfigError> {
        match self {
            ModelConfig::GaussianExample { sigma_b, sigma_alpha, sigma, p, k, u_k, epsilon } => {
                let params = GaussianExampleParams {
                    sigma_b: *sigma_b,
                    sigma_alpha: *sigma_alpha,
                    sigma: *sigma,
                    p: *p,
                };
                Ok(params.model(*k, *u_k, *epsilon)?)
            }
            ModelConfig::Custom { tables, k, u_k, epsilon } => {
                Ok(tables.model(*k, *u_k, *epsilon)?)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IbmSection {
    pub t_end: f64,
    pub snapshots: usize,
    pub x0: f64,
    /// Initial density: the run starts with round(K * initial_density)
    /// individuals at x0. The default 1.0 means K individuals.
    pub initial_density: f64,
    pub replicates: u64,
    pub log_events: bool,
}

impl Default for IbmSection {
    fn default() -> Self {
        IbmSection {
            t_end: 500.0,
            snapshots: 251,
            x0: -1.0,
            initial_density: 1.0,
            replicates: 1,
            log_events: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PesSection {
    pub t_end: f64,
    pub x0: f64,
    /// Window half-width for branching detection around the singularity.
    pub eta: f64,
    /// Singularity to center the detection window on. Absent means the
    /// located one nearest to where the replicates end up.
    pub x_star: Option<f64>,
    pub replicates: u64,
    pub variant: Variant,
}

impl Default for PesSection {
    fn default() -> Self {
        PesSection {
            t_end: 1500.0,
            x0: -1.0,
            eta: 0.2,
            x_star: None,
            replicates: 20,
            variant: Variant::Full,
        }
    }
}

/// Process variant: the full sequence or one of the killed versions that
/// stop at the first coexisting mutant (`killed1`) or the first stable
/// triple (`killed2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    Killed1,
    Killed2,
}

impl From<Variant> for evodyn_core::pes::PesVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Full => evodyn_core::pes::PesVariant::Full,
            Variant::Killed1 => evodyn_core::pes::PesVariant::Killed1,
            Variant::Killed2 => evodyn_core::pes::PesVariant::Killed2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TssSection {
    pub t_end: f64,
    pub x0: f64,
    /// Jump scale for the substitution sequence. Absent means the model's
    /// epsilon.
    pub epsilon: Option<f64>,
    pub replicates: u64,
    /// Sample count of the uniform time grid shared with `canonical`.
    pub snapshots: usize,
}

impl Default for TssSection {
    fn default() -> Self {
        TssSection { t_end: 50.0, x0: -1.0, epsilon: None, replicates: 20, snapshots: 101 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CanonicalSection {
    pub t_end: f64,
    pub x0: f64,
    pub tol: f64,
    pub snapshots: usize,
}

impl Default for CanonicalSection {
    fn default() -> Self {
        CanonicalSection { t_end: 50.0, x0: -1.0, tol: 1e-8, snapshots: 101 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    /// Search grid resolution over the trait space.
    pub grid: usize,
    /// Shrinking scales for the expansion diagnostics.
    pub scales: Vec<f64>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        AnalyzeSection { grid: 801, scales: vec![0.1, 0.05, 0.025, 0.0125] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipSection {
    /// Window half-width around the center.
    pub half_width: f64,
    pub resolution: usize,
    /// Window center. Absent means the located singularity.
    pub center: Option<f64>,
}

impl Default for PipSection {
    fn default() -> Self {
        PipSection { half_width: 0.5, resolution: 400, center: None }
    }
}

fn positive(v: f64, what: &str) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError(format!("{what} must be finite and positive, got {v}")))
    }
}

fn finite(v: f64, what: &str) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError(format!("{what} must be finite, got {v}")))
    }
}

impl RunConfig {
    /// Static checks on section values. Parameters the model constructor
    /// already validates are left to it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        positive(self.ibm.t_end, "ibm.t_end")?;
        finite(self.ibm.x0, "ibm.x0")?;
        positive(self.ibm.initial_density, "ibm.initial_density")?;
        if self.ibm.snapshots < 2 {
            return Err(ConfigError("ibm.snapshots must be at least 2".into()));
        }
        positive(self.pes.t_end, "pes.t_end")?;
        finite(self.pes.x0, "pes.x0")?;
        positive(self.pes.eta, "pes.eta")?;
        if let Some(x) = self.pes.x_star {
            finite(x, "pes.x_star")?;
        }
        positive(self.tss.t_end, "tss.t_end")?;
        finite(self.tss.x0, "tss.x0")?;
        if let Some(eps) = self.tss.epsilon {
            if !(eps.is_finite() && eps > 0.0 && eps <= 1.0) {
                return Err(ConfigError(format!(
                    "tss.epsilon must lie in (0, 1], got {eps}"
                )));
            }
        }
        if self.tss.snapshots < 2 {
            return Err(ConfigError("tss.snapshots must be at least 2".into()));
        }
        positive(self.canonical.t_end, "canonical.t_end")?;
        finite(self.canonical.x0, "canonical.x0")?;
        positive(self.canonical.tol, "canonical.tol")?;
        if self.canonical.snapshots < 2 {
            return Err(ConfigError("canonical.snapshots must be at least 2".into()));
        }
        if self.analyze.grid < 3 {
            return Err(ConfigError("analyze.grid must be at least 3".into()));
        }
        if self.analyze.scales.is_empty() {
            return Err(ConfigError("analyze.scales must not be empty".into()));
        }
        for &s in &self.analyze.scales {
            positive(s, "analyze.scales entry")?;
        }
        positive(self.pip.half_width, "pip.half_width")?;
        if let Some(c) = self.pip.center {
            finite(c, "pip.center")?;
        }
        if self.pip.resolution < 2 {
            return Err(ConfigError("pip.resolution must be at least 2".into()));
        }
        for (r, what) in [
            (self.ibm.replicates, "ibm.replicates"),
            (self.pes.replicates, "pes.replicates"),
            (self.tss.replicates, "tss.replicates"),
        ] {
            if r == 0 {
                return Err(ConfigError(format!("{what} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Parsed config plus the digest of the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// First 12 hex characters of the SHA-256 of the raw file bytes.
    pub hash: String,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| ConfigError(format!("{} is not UTF-8", path.display())))?;
    let config: RunConfig = toml::from_str(text)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    config.validate()?;
    let digest = Sha256::digest(&bytes);
    let hash: String = digest.iter().take(HASH_LEN / 2).map(|b| format!("{b:02x}")).collect();
    Ok(LoadedConfig { config, hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const GAUSSIAN: &str = r#"
        seed = 42
        [model]
        family = "gaussian_example"
        sigma_b = 0.9
        sigma_alpha = 0.7
        sigma = 0.01
        p = 0.1
        K = 1000
        [tss]
        epsilon = 0.02
    "#;

    fn write_temp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn gaussian_config_round_trips_into_a_model() {
        let f = write_temp(GAUSSIAN);
        let loaded = load_config(f.path()).unwrap();
        assert_eq!(loaded.config.seed, Some(42));
        assert_eq!(loaded.hash.len(), 12);
        assert!(loaded.hash.chars().all(|c| c.is_ascii_hexdigit()));
        let model = loaded.config.model.build().unwrap();
        assert_eq!(model.carrying_scale(), 1000);
        assert_eq!(model.jump_scale(), 1.0);
        // defaults fill the sections
        assert_eq!(loaded.config.ibm.t_end, 500.0);
        assert_eq!(loaded.config.pes.replicates, 20);
        assert_eq!(loaded.config.tss.epsilon, Some(0.02));
        assert_eq!(loaded.config.pip.resolution, 400);
    }

    #[test]
    fn hash_tracks_the_file_bytes() {
        let a = write_temp(GAUSSIAN);
        let b = write_temp(GAUSSIAN);
        let c = write_temp(&GAUSSIAN.replace("42", "43"));
        assert_eq!(load_config(a.path()).unwrap().hash, load_config(b.path()).unwrap().hash);
        assert_ne!(load_config(a.path()).unwrap().hash, load_config(c.path()).unwrap().hash);
    }

    #[test]
    fn custom_family_parses_inline_tables() {
        let text = r#"
            [model]
            family = "custom"
            grid = [0.0, 0.5, 1.0, 1.5, 2.0]
            lambda = [1.0, 1.1, 1.2, 1.1, 1.0]
            mu = [0.0, 0.0, 0.0, 0.0, 0.0]
            alpha = [
                [1.0, 0.9, 0.8, 0.7, 0.6],
                [0.9, 1.0, 0.9, 0.8, 0.7],
                [0.8, 0.9, 1.0, 0.9, 0.8],
                [0.7, 0.8, 0.9, 1.0, 0.9],
                [0.6, 0.7, 0.8, 0.9, 1.0],
            ]
            sigma = 0.1
            p = 0.5
            K = 200
            u_K = 0.5
            epsilon = 0.25
        "#;
        let f = write_temp(text);
        let loaded = load_config(f.path()).unwrap();
        let model = loaded.config.model.build().unwrap();
        assert_eq!(model.carrying_scale(), 200);
        assert_eq!(model.mut_rate_scale(), 0.5);
        assert_eq!(model.jump_scale(), 0.25);
        assert!((model.birth(0.5) - 1.1).abs() < 1e-12);
        assert!((model.competition(0.5, 1.5) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn malformed_files_are_config_errors() {
        // unknown section key
        let f = write_temp(&format!("{GAUSSIAN}\n[ibm]\nt_endd = 3.0\n"));
        assert!(load_config(f.path()).is_err());
        // bad section value
        let f = write_temp(&format!("{GAUSSIAN}\n[canonical]\ntol = -1.0\n"));
        assert!(load_config(f.path()).is_err());
        // unparseable TOML
        let f = write_temp("[model\nfamily=");
        assert!(load_config(f.path()).is_err());
        // unknown family
        let f = write_temp("[model]\nfamily = \"exotic\"\n");
        assert!(load_config(f.path()).is_err());
        // missing file
        assert!(load_config(Path::new("/nonexistent/run.toml")).is_err());
        // model constructor rejects the parameters
        let f = write_temp(&GAUSSIAN.replace("sigma_b = 0.9", "sigma_b = -0.9"));
        let loaded = load_config(f.path()).unwrap();
        assert!(loaded.config.model.build().is_err());
    }

    #[test]
    fn zero_replicates_are_rejected() {
        let f = write_temp(&format!("{GAUSSIAN}\n[pes]\nreplicates = 0\n"));
        let err = load_config(f.path()).unwrap_err();
        assert!(err.to_string().contains("pes.replicates"));
    }
}
