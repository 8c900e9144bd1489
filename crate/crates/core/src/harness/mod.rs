//! Experiment configs, validation and runs.
//!
//! A config is a JSON object
//!
//! ```json
//! {"experiment": "pcs", "seed": 7, "trials": 1, "output_dir": "out/pcs",
//!  "params": {"base": "64QAM", "kappas": [1.0, 1.2, 1.38], "snr_db": 10}}
//! ```
//!
//! Unknown keys anywhere are rejected. `params` is specific to the
//! experiment and every field in it has a default. A run writes its outputs
//! and a `manifest.json` with checksums into the output directory; CSV
//! outputs are byte-identical across runs with the same config and seed.

mod experiments;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

pub use experiments::{
    AcfCompareParams, CommParams, PcsParams, PipelineOutput, PrecodingParams, PulseDesignParams, RangeSceneParams,
};
pub use output::Artifact;

use crate::error::{Error, Result};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AcfCompare,
    PulseDesign,
    RangeScene,
    Pcs,
    Precoding,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::AcfCompare,
        ExperimentKind::PulseDesign,
        ExperimentKind::RangeScene,
        ExperimentKind::Pcs,
        ExperimentKind::Precoding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AcfCompare => "acf-compare",
            ExperimentKind::PulseDesign => "pulse-design",
            ExperimentKind::RangeScene => "range-scene",
            ExperimentKind::Pcs => "pcs",
            ExperimentKind::Precoding => "precoding",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::AcfCompare => "expected ISL and per-lag ACF statistics for each modulation basis",
            ExperimentKind::PulseDesign => "Nyquist pulse minimizing ACF energy over a delay region, against RRC",
            ExperimentKind::RangeScene => "weak-target detection behind a strong target, RRC vs designed pulse",
            ExperimentKind::Pcs => "kurtosis-constrained constellation shaping frontier",
            ExperimentKind::Precoding => "ergodic estimation error of DDP, DIP and isotropic precoders",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ExperimentParams {
    AcfCompare(AcfCompareParams),
    PulseDesign(PulseDesignParams),
    RangeScene(RangeSceneParams),
    Pcs(PcsParams),
    Precoding(PrecodingParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub params: ExperimentParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    #[serde(default)]
    seed: u64,
    trials: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    params: Option<serde_json::Value>,
}

/// One config problem, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn schema_error<E: fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> Diagnostic {
    let inner = e.path().to_string();
    let path = match (prefix, inner.as_str()) {
        ("", ".") => "config".to_string(),
        ("", p) => p.to_string(),
        (pre, ".") => pre.to_string(),
        (pre, p) => format!("{pre}.{p}"),
    };
    Diagnostic { path, message: e.into_inner().to_string() }
}

fn params_of<T: for<'de> Deserialize<'de> + Default>(v: Option<serde_json::Value>) -> Result<T, Diagnostic> {
    match v {
        None => Ok(T::default()),
        Some(v) => serde_path_to_error::deserialize(v).map_err(|e| schema_error("params", e)),
    }
}

impl ExperimentConfig {
    /// Parses and fully validates a config.
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| vec![schema_error("", e)])?;
        let params = match raw.experiment {
            ExperimentKind::AcfCompare => params_of(raw.params).map(ExperimentParams::AcfCompare),
            ExperimentKind::PulseDesign => params_of(raw.params).map(ExperimentParams::PulseDesign),
            ExperimentKind::RangeScene => params_of(raw.params).map(ExperimentParams::RangeScene),
            ExperimentKind::Pcs => params_of(raw.params).map(ExperimentParams::Pcs),
            ExperimentKind::Precoding => params_of(raw.params).map(ExperimentParams::Precoding),
        }
        .map_err(|d| vec![d])?;
        let cfg = ExperimentConfig {
            experiment: raw.experiment,
            seed: raw.seed,
            trials: raw.trials,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            params,
        };
        let diags = cfg.diagnostics();
        if diags.is_empty() {
            Ok(cfg)
        } else {
            Err(diags)
        }
    }

    /// Cross-field checks on an already well-typed config.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.trials == 0 {
            out.push(Diagnostic { path: "trials".into(), message: "must be at least 1".into() });
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            out.push(Diagnostic { path: "output_dir".into(), message: "exists and is not a directory".into() });
        }
        match &self.params {
            ExperimentParams::AcfCompare(p) => p.check(self.trials, &mut out),
            ExperimentParams::PulseDesign(p) => p.check(self.trials, &mut out),
            ExperimentParams::RangeScene(p) => p.check(self.trials, &mut out),
            ExperimentParams::Pcs(p) => p.check(self.trials, &mut out),
            ExperimentParams::Precoding(p) => p.check(self.trials, &mut out),
        }
        out
    }

    /// SHA-256 of the canonical JSON form (sorted keys, defaults filled in),
    /// excluding the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
        }
        Ok(output::sha256_hex(serde_json::to_string(&v)?.as_bytes()))
    }

    /// Runs the pipeline and returns its artifacts without writing anything.
    pub fn execute(&self) -> Result<PipelineOutput> {
        let diags = self.diagnostics();
        if !diags.is_empty() {
            return Err(config_error(&diags));
        }
        let (seed, trials) = (self.seed, self.trials);
        match &self.params {
            ExperimentParams::AcfCompare(p) => p.run(seed, trials),
            ExperimentParams::PulseDesign(p) => p.run(seed, trials),
            ExperimentParams::RangeScene(p) => p.run(seed, trials),
            ExperimentParams::Pcs(p) => p.run(seed, trials),
            ExperimentParams::Precoding(p) => p.run(seed, trials),
        }
    }
}

fn config_error(diags: &[Diagnostic]) -> Error {
    Error::Config(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))
}

/// Diagnostics for a config text; empty means it is runnable.
pub fn validate(text: &str) -> Vec<Diagnostic> {
    ExperimentConfig::parse(text).err().unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub toolkit_version: String,
    pub seed: u64,
    pub trials: usize,
    pub started_at: String,
    pub finished_at: String,
    pub converged: bool,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    /// Re-hashes every listed output under `dir` and returns the paths whose
    /// content no longer matches.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            let bytes = std::fs::read(dir.join(&o.path))?;
            if output::sha256_hex(&bytes) != o.sha256 {
                bad.push(o.path.clone());
            }
        }
        Ok(bad)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs a config, writes outputs and the manifest. Nothing is written when
/// the config is invalid or the pipeline fails.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    let started_at = now();
    let out = config.execute()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::with_capacity(out.artifacts.len());
    for a in &out.artifacts {
        output::write_atomic(dir, &a.name, &a.bytes)?;
        outputs.push(OutputEntry { path: a.name.clone(), sha256: a.sha256(), bytes: a.bytes.len() });
    }
    let manifest = RunManifest {
        experiment: config.experiment,
        config_hash: config.hash()?,
        toolkit_version: TOOLKIT_VERSION.into(),
        seed: config.seed,
        trials: config.trials,
        started_at,
        finished_at: now(),
        converged: out.converged,
        outputs,
    };
    let m = Artifact::json(MANIFEST_NAME, &manifest)?;
    output::write_atomic(dir, MANIFEST_NAME, &m.bytes)?;
    Ok(RunReport { manifest, output_dir: dir.clone() })
}

/// Parses `text`, applies command-line overrides and runs it.
pub fn run_text(text: &str, overrides: &RunOverrides) -> Result<RunReport> {
    let mut cfg = ExperimentConfig::parse(text).map_err(|d| config_error(&d))?;
    if let Some(d) = &overrides.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    run(&cfg)
}
