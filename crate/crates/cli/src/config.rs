//! Run configuration: a TOML file whose keys mirror the library configs,
//! overridden by command-line flags.
//!
//! ```toml
//! seed = 42
//! [mpo]
//! beta = 0.5
//! [generator]
//! samples = 500
//! nlf = "nlf1"
//! [generator.graph]
//! factors = 6
//! variables = 10
//! cycles = 0
//! [train]
//! lambda_anchor = 1.0
//! [train.arch]
//! dropout_rate = 0.5
//! ```
//!
//! Flags are applied as dotted-key overrides on the parsed table before it is
//! deserialized, so they go through the same type checks as the file.

use std::path::{Path, PathBuf};

use fluxmp_core::baselines::NoiseBenchConfig;
use fluxmp_core::synth::{DatasetOptions, NlfKind};
use fluxmp_core::trainer::TrainConfig;
use fluxmp_core::MpoConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub paths: PathsConfig,
    /// Balancer used by `balance`, `simulate` and `noise-bench`.
    pub mpo: MpoConfig,
    pub brw: BrwConfig,
    pub generator: GeneratorConfig,
    /// `train.seed` is taken from the top-level seed.
    pub train: TrainConfig,
    pub noise_bench: NoiseBenchOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            threads: None,
            paths: PathsConfig::default(),
            mpo: MpoConfig::default(),
            brw: BrwConfig::default(),
            generator: GeneratorConfig::default(),
            train: TrainConfig::default(),
            noise_bench: NoiseBenchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BrwConfig {
    pub epochs: usize,
}

impl Default for BrwConfig {
    fn default() -> Self {
        Self { epochs: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphShape {
    pub factors: usize,
    pub variables: usize,
    #[serde(default)]
    pub cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    /// Shape of a generated graph, used when no graph file is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphShape>,
    pub min_features: usize,
    pub max_features: usize,
    pub samples: usize,
    pub nlf: NlfKind,
    pub sparsity: f64,
    pub min_flux: f64,
    pub split: [f64; 3],
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let d = DatasetOptions::default();
        Self {
            graph: None,
            min_features: 3,
            max_features: 6,
            samples: d.samples,
            nlf: d.kind,
            sparsity: d.sparsity,
            min_flux: d.min_flux,
            split: d.fractions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBenchOptions {
    pub gammas: Vec<f64>,
    /// Number of seeds, counted up from the master seed.
    pub seeds: usize,
}

impl Default for NoiseBenchOptions {
    fn default() -> Self {
        let d = NoiseBenchConfig::default();
        Self {
            gammas: d.gammas,
            seeds: d.seeds.len(),
        }
    }
}

/// One flag-derived override: a dotted key and its value.
pub type Override = (String, Value);

/// Parses a `KEY=VALUE` assignment. The value is read as a TOML value and
/// falls back to a plain string.
pub fn parse_assignment(text: &str) -> CliResult<Override> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("expected KEY=VALUE, got `{text}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Usage(format!("empty key in `{text}`")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap_or_default();
    let mut cur = table;
    for (depth, part) in parts.iter().enumerate() {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::Usage(format!(
                    "`{}` is not a table",
                    parts[..=depth].join(".")
                )))
            }
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads `path` (or starts from defaults), applies `overrides` in order and
/// resolves the result. Unknown keys and type mismatches are usage errors.
pub fn load_config(path: Option<&Path>, overrides: &[Override]) -> CliResult<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for (key, value) in overrides {
        set_dotted(&mut table, key, value.clone())?;
    }
    if table
        .get("train")
        .and_then(Value::as_table)
        .is_some_and(|t| t.contains_key("seed"))
    {
        return Err(CliError::Usage(
            "unknown key `train.seed`: the training seed is the top-level `seed`".into(),
        ));
    }
    let mut cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("configuration: {}", e.message())))?;
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

impl RunConfig {
    /// TOML rendering of the fully resolved configuration.
    /// `train.seed` is left out since it mirrors `seed`.
    pub fn to_toml(&self) -> String {
        let mut value = match Value::try_from(self) {
            Ok(v) => v,
            Err(e) => return format!("# unrenderable: {e}\n"),
        };
        if let Some(train) = value.get_mut("train").and_then(Value::as_table_mut) {
            train.remove("seed");
        }
        toml::to_string(&value).unwrap_or_else(|e| format!("# unrenderable: {e}\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = file("");
        let cfg = load_config(Some(f.path()), &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.train.seed, 42);
    }

    #[test]
    fn flag_overrides_file() {
        let f = file("seed = 7\n[mpo]\nbeta = 0.3\n[train]\nlr = 0.01\n");
        let cfg = load_config(Some(f.path()), &[]).unwrap();
        assert_eq!((cfg.seed, cfg.train.seed, cfg.mpo.beta, cfg.train.lr), (7, 7, 0.3, 0.01));
        let ov = vec![
            ("mpo.beta".to_string(), Value::Float(0.9)),
            parse_assignment("train.arch.dropout_rate=0.25").unwrap(),
            parse_assignment("seed = 3").unwrap(),
        ];
        let cfg = load_config(Some(f.path()), &ov).unwrap();
        assert_eq!(cfg.mpo.beta, 0.9);
        assert_eq!(cfg.train.arch.dropout_rate, 0.25);
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.train.seed, 3);
    }

    #[test]
    fn unknown_key_names_the_key() {
        let f = file("[mpo]\nbetta = 0.3\n");
        let e = load_config(Some(f.path()), &[]).unwrap_err();
        assert!(matches!(e, CliError::Usage(_)));
        assert!(e.to_string().contains("betta"), "{e}");
        let e = load_config(None, &[parse_assignment("wat=1").unwrap()]).unwrap_err();
        assert!(e.to_string().contains("wat"), "{e}");
        let f = file("[train]\nseed = 1\n");
        assert!(load_config(Some(f.path()), &[]).unwrap_err().to_string().contains("train.seed"));
    }

    #[test]
    fn type_mismatch_is_usage_error() {
        let f = file("[train]\nmax_epochs = \"many\"\n");
        assert!(matches!(load_config(Some(f.path()), &[]), Err(CliError::Usage(_))));
        assert!(parse_assignment("novalue").is_err());
        assert_eq!(parse_assignment("a=b").unwrap().1, Value::String("b".into()));
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.generator.graph = Some(GraphShape { factors: 6, variables: 10, cycles: 0 });
        cfg.paths.out = Some("x".into());
        let text = cfg.to_toml();
        let f = file(&text);
        assert_eq!(load_config(Some(f.path()), &[]).unwrap(), cfg);
    }
}
