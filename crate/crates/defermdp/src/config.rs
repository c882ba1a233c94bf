//! Training configuration and its flat `key = value` file format.

use crate::dataset::{DatasetSpec, GraphModel};
use crate::problem::ProblemKind;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub problem: ProblemKind,
    /// Episode time limit T.
    pub horizon: usize,
    /// Steps collected per environment per update; episodes always finish
    /// within it because the horizon forces completion.
    pub unroll: usize,
    /// Environment copies per update; coupled in pairs, so must be even.
    pub envs_per_batch: usize,
    /// (episode, step) pairs per gradient step.
    pub minibatch: usize,
    pub grad_steps: usize,
    /// Diversification reward coefficient α.
    pub alpha: f64,
    pub entropy_coeff: f64,
    pub clip_eps: f64,
    pub lr: f64,
    pub updates: usize,
    /// Samples per validation graph (best-of-k).
    pub val_samples: usize,
    pub val_interval: usize,
    pub val_graphs: usize,
    pub seed: u64,
    pub dataset: DatasetSpec,
}

impl TrainConfig {
    /// Synthetic-graph defaults.
    pub fn table5() -> TrainConfig {
        TrainConfig {
            problem: ProblemKind::Mis,
            horizon: 32,
            unroll: 32,
            envs_per_batch: 32,
            minibatch: 16,
            grad_steps: 4,
            alpha: 0.1,
            entropy_coeff: 0.1,
            clip_eps: 0.2,
            lr: 1e-4,
            updates: 20_000,
            val_samples: 10,
            val_interval: 100,
            val_graphs: 100,
            seed: 0,
            dataset: DatasetSpec::er(50, 100, 0.15),
        }
    }

    /// Small sizes that train on one CPU core in minutes.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            horizon: 16,
            unroll: 16,
            updates: 2000,
            dataset: DatasetSpec::er(15, 20, 0.15),
            ..TrainConfig::table5()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive: [(&str, usize); 8] = [
            ("horizon", self.horizon),
            ("unroll", self.unroll),
            ("envs_per_batch", self.envs_per_batch),
            ("minibatch", self.minibatch),
            ("grad_steps", self.grad_steps),
            ("val_samples", self.val_samples),
            ("val_interval", self.val_interval),
            ("val_graphs", self.val_graphs),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(ConfigError::Invalid(format!("{key} must be positive")));
            }
        }
        if !self.envs_per_batch.is_multiple_of(2) {
            return Err(ConfigError::Invalid(
                "envs_per_batch must be even (environments are coupled in pairs)".into(),
            ));
        }
        if self.unroll < self.horizon {
            return Err(ConfigError::Invalid(
                "unroll must be at least the horizon".into(),
            ));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "clip_eps {} outside (0, 1)",
                self.clip_eps
            )));
        }
        if !(self.lr > 0.0 && self.alpha >= 0.0 && self.entropy_coeff >= 0.0) {
            return Err(ConfigError::Invalid(
                "lr must be positive; alpha and entropy_coeff nonnegative".into(),
            ));
        }
        self.dataset.validate().map_err(ConfigError::Invalid)
    }
}

pub fn problem_kind_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Mis => "mis",
        ProblemKind::Mwis => "mwis",
        ProblemKind::Pcmis => "pcmis",
        ProblemKind::MaxCut => "maxcut",
        ProblemKind::Ising => "ising",
    }
}

pub fn parse_problem_kind(name: &str) -> Option<ProblemKind> {
    Some(match name {
        "mis" => ProblemKind::Mis,
        "mwis" => ProblemKind::Mwis,
        "pcmis" => ProblemKind::Pcmis,
        "maxcut" => ProblemKind::MaxCut,
        "ising" => ProblemKind::Ising,
        _ => return None,
    })
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Result<String, ConfigError> {
        self.map
            .remove(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        let raw = self.take(key)?;
        raw.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            reason: format!("cannot parse `{raw}`"),
        })
    }
}

/// Parses the flat `key = value` format. Every key must appear exactly
/// once; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<TrainConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: i + 1,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey(key));
        }
    }
    let mut fields = Fields { map };

    let problem_raw = fields.take("problem")?;
    let problem = parse_problem_kind(&problem_raw).ok_or_else(|| ConfigError::BadValue {
        key: "problem".into(),
        reason: format!("unknown problem `{problem_raw}`"),
    })?;
    let model_raw = fields.take("dataset_model")?;
    let model = match model_raw.as_str() {
        "er" => GraphModel::Er {
            p: fields.parse("dataset_p")?,
        },
        "ba" => GraphModel::Ba {
            m_attach: fields.parse("dataset_m_attach")?,
        },
        "hk" => GraphModel::Hk {
            m_attach: fields.parse("dataset_m_attach")?,
            p_triad: fields.parse("dataset_p_triad")?,
        },
        "ws" => GraphModel::Ws {
            k: fields.parse("dataset_k")?,
            p_rewire: fields.parse("dataset_p_rewire")?,
        },
        other => {
            return Err(ConfigError::BadValue {
                key: "dataset_model".into(),
                reason: format!("unknown model `{other}`"),
            })
        }
    };

    let cfg = TrainConfig {
        problem,
        horizon: fields.parse("horizon")?,
        unroll: fields.parse("unroll")?,
        envs_per_batch: fields.parse("envs_per_batch")?,
        minibatch: fields.parse("minibatch")?,
        grad_steps: fields.parse("grad_steps")?,
        alpha: fields.parse("alpha")?,
        entropy_coeff: fields.parse("entropy_coeff")?,
        clip_eps: fields.parse("clip_eps")?,
        lr: fields.parse("lr")?,
        updates: fields.parse("updates")?,
        val_samples: fields.parse("val_samples")?,
        val_interval: fields.parse("val_interval")?,
        val_graphs: fields.parse("val_graphs")?,
        seed: fields.parse("seed")?,
        dataset: DatasetSpec {
            model,
            n_min: fields.parse("dataset_n_min")?,
            n_max: fields.parse("dataset_n_max")?,
        },
    };
    if let Some(key) = fields.map.into_keys().next() {
        return Err(ConfigError::UnknownKey(key));
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn format_config(cfg: &TrainConfig) -> String {
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    push("problem", problem_kind_name(cfg.problem).to_string());
    push("horizon", cfg.horizon.to_string());
    push("unroll", cfg.unroll.to_string());
    push("envs_per_batch", cfg.envs_per_batch.to_string());
    push("minibatch", cfg.minibatch.to_string());
    push("grad_steps", cfg.grad_steps.to_string());
    push("alpha", cfg.alpha.to_string());
    push("entropy_coeff", cfg.entropy_coeff.to_string());
    push("clip_eps", cfg.clip_eps.to_string());
    push("lr", cfg.lr.to_string());
    push("updates", cfg.updates.to_string());
    push("val_samples", cfg.val_samples.to_string());
    push("val_interval", cfg.val_interval.to_string());
    push("val_graphs", cfg.val_graphs.to_string());
    push("seed", cfg.seed.to_string());
    push("dataset_model", cfg.dataset.model.name().to_string());
    match cfg.dataset.model {
        GraphModel::Er { p } => push("dataset_p", p.to_string()),
        GraphModel::Ba { m_attach } => push("dataset_m_attach", m_attach.to_string()),
        GraphModel::Hk { m_attach, p_triad } => {
            push("dataset_m_attach", m_attach.to_string());
            push("dataset_p_triad", p_triad.to_string());
        }
        GraphModel::Ws { k, p_rewire } => {
            push("dataset_k", k.to_string());
            push("dataset_p_rewire", p_rewire.to_string());
        }
    }
    push("dataset_n_min", cfg.dataset.n_min.to_string());
    push("dataset_n_max", cfg.dataset.n_max.to_string());
    out
}
