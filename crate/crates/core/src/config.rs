//! Run configuration: one TOML document with `model`, `env`, `oracle`,
//! `train` and `output` sections. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::{preset, LayerGraph};
use crate::oracle::{
    AccuracyOracle, Surrogate, SurrogateParams, TableOracle, DEFAULT_BASE_ACC, DEFAULT_DROP_SCALE,
    DEFAULT_EXPONENT,
};
use crate::perf::{
    Environment, BYTES_PER_KB, DEFAULT_ACC_REQ, DEFAULT_CLOUD_SECONDS_PER_FLOP, DEFAULT_R_COMP,
    DEFAULT_R_TRAN_KBPS,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub env: EnvConfig,
    pub oracle: OracleConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Option<String>,
    /// Layer description in the text format of [`LayerGraph::from_text`].
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub r_tran_kbps: f64,
    pub r_comp: f64,
    pub acc_req: f64,
    pub cloud_seconds_per_flop: f64,
    pub send_result: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            r_tran_kbps: DEFAULT_R_TRAN_KBPS,
            r_comp: DEFAULT_R_COMP,
            acc_req: DEFAULT_ACC_REQ,
            cloud_seconds_per_flop: DEFAULT_CLOUD_SECONDS_PER_FLOP,
            send_result: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Surrogate,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub base_acc: f64,
    pub drop_scale: f64,
    pub exponent: f64,
    /// Per-conv weights; derived from layer FLOPs when absent.
    pub sensitivity: Option<Vec<f64>>,
    pub table: Option<PathBuf>,
    pub strict: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Surrogate,
            base_acc: DEFAULT_BASE_ACC,
            drop_scale: DEFAULT_DROP_SCALE,
            exponent: DEFAULT_EXPONENT,
            sensitivity: None,
            table: None,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs/latest"),
        }
    }
}

/// Everything a command needs, built from a [`RunConfig`].
pub struct Resolved {
    pub graph: LayerGraph,
    pub env: Environment,
    pub oracle: Box<dyn AccuracyOracle>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        rebase(&mut cfg.model.file);
        rebase(&mut cfg.oracle.table);
        if cfg.output.dir.is_relative() && text.contains("[output]") {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn environment(&self) -> Result<Environment> {
        let e = &self.env;
        let env = Environment {
            r_tran: e.r_tran_kbps * BYTES_PER_KB,
            r_comp: e.r_comp,
            acc_req: e.acc_req,
            cloud_seconds_per_flop: e.cloud_seconds_per_flop,
            send_result: e.send_result,
        };
        env.validate()
            .map_err(|err| Error::Config(err.to_string()))?;
        Ok(env)
    }

    pub fn graph(&self) -> Result<LayerGraph> {
        match (&self.model.preset, &self.model.file) {
            (Some(_), Some(_)) => Err(Error::Config(
                "model.preset and model.file are mutually exclusive".into(),
            )),
            (Some(name), None) => preset(name),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                LayerGraph::from_text(&text)
            }
            (None, None) => Err(Error::Config(
                "no model: set model.preset or model.file".into(),
            )),
        }
    }

    pub fn oracle(&self, graph: &LayerGraph) -> Result<Box<dyn AccuracyOracle>> {
        let o = &self.oracle;
        match o.kind {
            OracleKind::Surrogate => {
                let mut params = SurrogateParams::from_flops(graph, o.base_acc);
                if let Some(s) = &o.sensitivity {
                    if s.len() != graph.conv_count() {
                        return Err(Error::Config(format!(
                            "oracle.sensitivity has {} entries for {} conv layers",
                            s.len(),
                            graph.conv_count()
                        )));
                    }
                    params.sensitivity = s.clone();
                }
                params.drop_scale = o.drop_scale;
                params.exponent = o.exponent;
                let s = Surrogate::new(params).map_err(|e| Error::Config(e.to_string()))?;
                Ok(Box::new(s))
            }
            OracleKind::Table => {
                let path = o.table.as_ref().ok_or_else(|| {
                    Error::Config("oracle.kind = \"table\" needs oracle.table".into())
                })?;
                Ok(Box::new(TableOracle::load(path, o.strict)?))
            }
        }
    }

    /// Validates every section and builds the model, environment and oracle.
    pub fn resolve(&self) -> Result<Resolved> {
        self.train.validate()?;
        let graph = self.graph()?;
        let env = self.environment()?;
        let oracle = self.oracle(&graph)?;
        Ok(Resolved { graph, env, oracle })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.env.r_tran_kbps, 1280.0);
        assert_eq!(c.env.r_comp, 20.0);
        assert_eq!(c.train.batch_size, 128);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::parse("[env]\nr_com = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("[extra]\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = RunConfig::default();
        c.model.preset = Some("toy4".into());
        c.train.seed = 42;
        c.oracle.sensitivity = Some(vec![0.25; 4]);
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn resolves_preset_and_rejects_missing_model() {
        let mut c = RunConfig::default();
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        c.model.preset = Some("nope".into());
        assert!(matches!(c.resolve(), Err(Error::NotFound { .. })));
        c.model.preset = Some("TOY3".into());
        let r = c.resolve().unwrap();
        assert_eq!(r.graph.conv_count(), 3);
        assert_eq!(r.env.r_tran, 1_310_720.0);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut c = RunConfig::default();
        c.model.preset = Some("toy3".into());
        c.env.acc_req = 1.5;
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        c.env.acc_req = 0.8;
        c.oracle.sensitivity = Some(vec![1.0]);
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
        c.oracle.sensitivity = None;
        c.oracle.kind = OracleKind::Table;
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("m.txt"),
            "name tiny\ninput 8 8 3\nconv 3 4 1\nfc - 2 -\n",
        )
        .unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[model]\nfile = \"m.txt\"\n[output]\ndir = \"out\"\n",
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.output.dir, dir.path().join("out"));
        assert_eq!(c.graph().unwrap().name, "tiny");
    }
}
