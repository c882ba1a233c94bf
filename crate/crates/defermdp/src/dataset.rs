//! Dataset descriptions: which random-graph model, which size range, and
//! the manifest that makes generated datasets reproducible.

use crate::graph::{gen, Graph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum GraphModel {
    Er { p: f64 },
    Ba { m_attach: usize },
    Hk { m_attach: usize, p_triad: f64 },
    Ws { k: usize, p_rewire: f64 },
}

impl GraphModel {
    pub fn name(&self) -> &'static str {
        match self {
            GraphModel::Er { .. } => "er",
            GraphModel::Ba { .. } => "ba",
            GraphModel::Hk { .. } => "hk",
            GraphModel::Ws { .. } => "ws",
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Graph {
        match *self {
            GraphModel::Er { p } => gen::gen_er(n, p, seed),
            GraphModel::Ba { m_attach } => {
                gen::gen_ba(n, m_attach, seed).expect("attachment count validated")
            }
            GraphModel::Hk { m_attach, p_triad } => {
                gen::gen_hk(n, m_attach, p_triad, seed).expect("attachment count validated")
            }
            GraphModel::Ws { k, p_rewire } => {
                gen::gen_ws(n, k, p_rewire, seed).expect("ring degree validated")
            }
        }
    }
}

/// A family of graphs: model plus an inclusive vertex-count range.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub model: GraphModel,
    pub n_min: usize,
    pub n_max: usize,
}

impl DatasetSpec {
    pub fn er(n_min: usize, n_max: usize, p: f64) -> DatasetSpec {
        DatasetSpec {
            model: GraphModel::Er { p },
            n_min,
            n_max,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(format!(
                "vertex range [{}, {}] is empty or starts at zero",
                self.n_min, self.n_max
            ));
        }
        match self.model {
            GraphModel::Er { p } if !(0.0..=1.0).contains(&p) => {
                Err(format!("er probability {p} outside [0, 1]"))
            }
            GraphModel::Ba { m_attach } | GraphModel::Hk { m_attach, .. }
                if m_attach == 0 || m_attach >= self.n_min =>
            {
                Err(format!("attachment count {m_attach} must be in [1, n_min)"))
            }
            GraphModel::Hk { p_triad, .. } if !(0.0..=1.0).contains(&p_triad) => {
                Err(format!("triad probability {p_triad} outside [0, 1]"))
            }
            GraphModel::Ws { k, .. } if k == 0 || k % 2 != 0 || k >= self.n_min => {
                Err(format!("ring degree {k} must be even and in [2, n_min)"))
            }
            GraphModel::Ws { p_rewire, .. } if !(0.0..=1.0).contains(&p_rewire) => {
                Err(format!("rewiring probability {p_rewire} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Draws a size and a generator seed from the stream, then generates.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Graph {
        let (n, seed) = self.draw(rng);
        self.model.generate(n, seed)
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> (usize, u64) {
        let n = rng.gen_range(self.n_min..=self.n_max);
        (n, rng.gen())
    }
}

/// Sidecar written next to generated datasets; regeneration from it is
/// byte-identical.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub model: String,
    pub params: ManifestParams,
    pub n_min: usize,
    pub n_max: usize,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct ManifestParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_attach: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_triad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_rewire: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub file: String,
    pub n: usize,
    pub seed: u64,
}

impl Manifest {
    pub fn new(spec: &DatasetSpec) -> Manifest {
        let params = match spec.model {
            GraphModel::Er { p } => ManifestParams {
                p: Some(p),
                ..Default::default()
            },
            GraphModel::Ba { m_attach } => ManifestParams {
                m_attach: Some(m_attach),
                ..Default::default()
            },
            GraphModel::Hk { m_attach, p_triad } => ManifestParams {
                m_attach: Some(m_attach),
                p_triad: Some(p_triad),
                ..Default::default()
            },
            GraphModel::Ws { k, p_rewire } => ManifestParams {
                k: Some(k),
                p_rewire: Some(p_rewire),
                ..Default::default()
            },
        };
        Manifest {
            model: spec.model.name().to_string(),
            params,
            n_min: spec.n_min,
            n_max: spec.n_max,
            files: Vec::new(),
        }
    }

    /// Reconstructs the model from the recorded name and parameters.
    pub fn spec(&self) -> Result<DatasetSpec, String> {
        let missing = |what: &str| format!("manifest for model `{}` lacks `{what}`", self.model);
        let model = match self.model.as_str() {
            "er" => GraphModel::Er {
                p: self.params.p.ok_or_else(|| missing("p"))?,
            },
            "ba" => GraphModel::Ba {
                m_attach: self.params.m_attach.ok_or_else(|| missing("m_attach"))?,
            },
            "hk" => GraphModel::Hk {
                m_attach: self.params.m_attach.ok_or_else(|| missing("m_attach"))?,
                p_triad: self.params.p_triad.ok_or_else(|| missing("p_triad"))?,
            },
            "ws" => GraphModel::Ws {
                k: self.params.k.ok_or_else(|| missing("k"))?,
                p_rewire: self.params.p_rewire.ok_or_else(|| missing("p_rewire"))?,
            },
            other => return Err(format!("unknown model `{other}`")),
        };
        Ok(DatasetSpec {
            model,
            n_min: self.n_min,
            n_max: self.n_max,
        })
    }
}
