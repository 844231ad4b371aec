use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    BatchedElimination, LsviMg, LsviMgParams, NashVi, NashViParams, PhaseElimination, VLearning,
    VLearningParams,
};
use crate::batch::MultiBatchedAlgorithm;
use crate::delay::{DelayLaw, DelaySampler};
use crate::error::{Error, Result};
use crate::msdm::loader::{key_line, toml_error};
use crate::msdm::{loader, MsdmEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKind {
    BatchedElim,
    PhaseElim,
    NashVi,
    VLearning,
    LsviMg,
}

/// Theory constants shared across learners; unset values keep each learner's default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    /// Nash-VI bonus constant.
    #[serde(rename = "C")]
    pub big_c: Option<f64>,
    /// V-learning bonus constant.
    pub c: Option<f64>,
    /// LSVI-MG bonus scale.
    pub beta: Option<f64>,
    /// Per-state CCE tolerance.
    pub tol: Option<f64>,
    /// Failure probability in the log terms.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseElimParams {
    pub delta: Option<f64>,
    pub design_eps: f64,
}

impl Default for PhaseElimParams {
    fn default() -> Self {
        Self {
            delta: None,
            design_eps: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoSpec {
    pub kind: AlgoKind,
    pub params: toml::Table,
}

impl AlgoSpec {
    pub fn new(kind: AlgoKind) -> Self {
        Self {
            kind,
            params: toml::Table::new(),
        }
    }

    fn params_as<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        toml::Value::Table(self.params.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Contract(format!("algo.params: {}", e.message())))
    }

    /// Instantiates the learner for a run of `k` episodes on `env`.
    pub fn build(
        &self,
        constants: &Constants,
        env: &MsdmEnv,
        k: usize,
    ) -> Result<Box<dyn MultiBatchedAlgorithm>> {
        Ok(match self.kind {
            AlgoKind::BatchedElim => {
                if !self.params.is_empty() {
                    return Err(Error::Contract("batched_elim takes no algo.params".into()));
                }
                Box::new(BatchedElimination::new(env, k)?)
            }
            AlgoKind::PhaseElim => {
                let p: PhaseElimParams = self.params_as()?;
                Box::new(PhaseElimination::new(env, k, p.delta, p.design_eps)?)
            }
            AlgoKind::NashVi => {
                let mut p: NashViParams = self.params_as()?;
                p.c = constants.big_c.unwrap_or(p.c);
                p.p = constants.p.unwrap_or(p.p);
                p.tol = constants.tol.unwrap_or(p.tol);
                Box::new(NashVi::new(env, k, p)?)
            }
            AlgoKind::LsviMg => {
                let mut p: LsviMgParams = self.params_as()?;
                p.beta = constants.beta.or(p.beta);
                p.p = constants.p.unwrap_or(p.p);
                p.tol = constants.tol.unwrap_or(p.tol);
                Box::new(LsviMg::new(env, k, p)?)
            }
            AlgoKind::VLearning => {
                let mut p: VLearningParams = self.params_as()?;
                p.c = constants.c.unwrap_or(p.c);
                p.p = constants.p.unwrap_or(p.p);
                Box::new(VLearning::new(env, k, p)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub count: usize,
    pub base: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { count: 1, base: 0 }
    }
}

impl Seeds {
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.count as u64).map(move |i| self.base + i)
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub episodes: usize,
    /// CSV rows are written every `eval_cadence` episodes (and at the last one).
    pub eval_cadence: usize,
    pub env: Arc<MsdmEnv>,
    /// Path or "inline", for the summary.
    pub env_source: String,
    pub algo: AlgoSpec,
    /// `None` runs the undelayed protocol.
    pub delay: Option<DelaySampler>,
    pub seeds: Seeds,
    pub constants: Constants,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// A config built in code (no file), writing to `output_dir`.
    pub fn new(name: &str, env: MsdmEnv, algo: AlgoSpec, episodes: usize) -> Self {
        Self {
            name: name.to_string(),
            episodes,
            eval_cadence: 1,
            env: Arc::new(env),
            env_source: "inline".into(),
            algo,
            delay: None,
            seeds: Seeds::default(),
            constants: Constants::default(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    /// Parses a config; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        let at = |key: &str, msg: String| Error::Config {
            line: if key.starts_with('[') {
                section_line(text, key)
            } else {
                key_line(text, key)
            },
            message: msg,
        };
        let resolve = |p: &Path| match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        if raw.episodes == 0 {
            return Err(at("episodes", "episodes must be at least 1".into()));
        }
        if raw.eval_cadence == 0 {
            return Err(at("eval_cadence", "eval_cadence must be at least 1".into()));
        }
        if raw.seeds.count == 0 {
            return Err(at("count", "seeds.count must be at least 1".into()));
        }
        let (env, env_source) = match raw.env.get("path") {
            Some(toml::Value::String(p)) => {
                if raw.env.len() > 1 {
                    return Err(at("path", "env.path excludes inline env keys".into()));
                }
                let full = resolve(Path::new(p));
                let env = loader::load_env(&full).map_err(|e| match e {
                    Error::Config { line, message } => at(
                        "path",
                        format!("{}:{line}: {message}", full.display()),
                    ),
                    other => at("path", format!("{}: {other}", full.display())),
                })?;
                (env, full.display().to_string())
            }
            Some(_) => return Err(at("path", "env.path must be a string".into())),
            None => {
                let inline = toml::to_string(&raw.env)
                    .map_err(|e| at("[env]", format!("env: {e}")))?;
                let env = loader::parse_env(&inline).map_err(|e| match e {
                    Error::Config { message, .. } => at("[env]", format!("env: {message}")),
                    other => at("[env]", format!("env: {other}")),
                })?;
                (env, "inline".to_string())
            }
        };
        let delay = match raw.delay {
            None => None,
            Some(d) => {
                let mut table = d.params.clone();
                table.insert("kind".into(), toml::Value::String(d.kind.clone()));
                let law: DelayLaw = toml::Value::Table(table)
                    .try_into()
                    .map_err(|e: toml::de::Error| at("[delay]", format!("delay: {}", e.message())))?;
                let mut s = DelaySampler::new(law).map_err(|e| at("[delay]", format!("delay: {e}")))?;
                match (d.v, d.b) {
                    (Some(v), Some(b)) => {
                        s = s.with_subexp(v, b).map_err(|e| at("v", format!("delay: {e}")))?;
                    }
                    (None, None) => {}
                    _ => return Err(at("[delay]", "delay.v and delay.b go together".into())),
                }
                Some(s)
            }
        };
        let algo = AlgoSpec {
            kind: raw.algo.kind,
            params: raw.algo.params,
        };
        // dry build surfaces parameter and env-kind mismatches as config errors
        algo.build(&raw.constants, &env, raw.episodes)
            .map_err(|e| at("kind", format!("algo: {e}")))?;
        Ok(Self {
            name: raw.name.unwrap_or_else(|| "run".into()),
            episodes: raw.episodes,
            eval_cadence: raw.eval_cadence,
            env: Arc::new(env),
            env_source,
            algo,
            delay,
            seeds: raw.seeds,
            constants: raw.constants,
            output_dir: resolve(&raw.output.dir),
        })
    }
}

fn section_line(text: &str, header: &str) -> usize {
    text.lines()
        .position(|l| l.trim() == header)
        .map_or(1, |i| i + 1)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    episodes: usize,
    #[serde(default = "one")]
    eval_cadence: usize,
    env: toml::Table,
    algo: AlgoSection,
    delay: Option<DelaySection>,
    #[serde(default)]
    seeds: Seeds,
    #[serde(default)]
    constants: Constants,
    #[serde(default)]
    output: OutputSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgoSection {
    kind: AlgoKind,
    #[serde(default)]
    params: toml::Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DelaySection {
    kind: String,
    #[serde(default)]
    params: toml::Table,
    v: Option<f64>,
    b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}
