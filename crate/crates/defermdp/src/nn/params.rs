//! Named parameter storage with Adam, global gradient clipping, a
//! bit-exact checkpoint format, and a finite-difference gradient checker.

use super::tape::{ParamVars, Tape, Var};
use super::Tensor;
use serde_json::{Map, Value};
use std::path::Path;
use thiserror::Error;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Entry {
    name: String,
    value: Tensor<f32>,
    grad: Tensor<f32>,
    m: Tensor<f32>,
    v: Tensor<f32>,
}

/// Ordered map name → (value, gradient, Adam moments). Iteration order is
/// insertion order and determines the checkpoint layout.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor<f32>) {
        assert!(self.find(name).is_none(), "duplicate parameter `{name}`");
        let (r, c) = value.shape();
        self.entries.push(Entry {
            name: name.to_string(),
            value,
            grad: Tensor::zeros(r, c),
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
        });
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    fn entry(&self, name: &str) -> &Entry {
        &self.entries[self
            .find(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))]
    }

    pub fn get(&self, name: &str) -> &Tensor<f32> {
        &self.entry(name).value
    }

    pub fn grad(&self, name: &str) -> &Tensor<f32> {
        &self.entry(name).grad
    }

    /// Replaces a parameter's value; shape must match.
    pub fn set(&mut self, name: &str, value: Tensor<f32>) {
        let i = self
            .find(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"));
        assert_eq!(
            self.entries[i].value.shape(),
            value.shape(),
            "parameter shape mismatch"
        );
        self.entries[i].value = value;
    }

    pub fn add_grad(&mut self, name: &str, g: &Tensor<f32>) {
        let i = self
            .find(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"));
        let e = &mut self.entries[i];
        assert_eq!(e.value.shape(), g.shape(), "gradient shape mismatch");
        for (o, &x) in e.grad.data.iter_mut().zip(&g.data) {
            *o += x;
        }
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            for x in e.grad.data.iter_mut() {
                *x = 0.0;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn global_grad_norm(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.grad.data.iter())
            .map(|&g| g as f64 * g as f64)
            .sum::<f64>()
            .sqrt()
    }

    /// Scales all gradients jointly so the global norm is at most
    /// `max_norm`; a no-op when already within. Returns the pre-clip norm.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_grad_norm();
        if norm > max_norm {
            let scale = (max_norm / norm) as f32;
            for e in &mut self.entries {
                for g in e.grad.data.iter_mut() {
                    *g *= scale;
                }
            }
        }
        norm
    }

    /// One Adam update over all parameters, with bias correction.
    pub fn adam_step(&mut self, lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - BETA2.powi(self.step.min(i32::MAX as u64) as i32);
        for e in &mut self.entries {
            for j in 0..e.value.data.len() {
                let g = e.grad.data[j] as f64;
                let m = BETA1 * e.m.data[j] as f64 + (1.0 - BETA1) * g;
                let v = BETA2 * e.v.data[j] as f64 + (1.0 - BETA2) * g * g;
                e.m.data[j] = m as f32;
                e.v.data[j] = v as f32;
                let update = lr * (m / bc1) / ((v / bc2).sqrt() + ADAM_EPS);
                e.value.data[j] -= update as f32;
            }
        }
    }

    /// Serializes as one JSON header line `{name: [rows, cols], …}` in
    /// insertion order followed by each tensor's little-endian f32 data.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = Map::new();
        for e in &self.entries {
            header.insert(
                e.name.clone(),
                Value::Array(vec![e.value.rows.into(), e.value.cols.into()]),
            );
        }
        let mut out = serde_json::to_string(&Value::Object(header))
            .expect("header serialization cannot fail")
            .into_bytes();
        out.push(b'\n');
        for e in &self.entries {
            for &x in &e.value.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| CheckpointError::MalformedHeader("missing newline".into()))?;
        let header: Map<String, Value> = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| CheckpointError::MalformedHeader(e.to_string()))?;
        let mut shapes: Vec<(String, usize, usize)> = Vec::with_capacity(header.len());
        let mut expected_bytes: u64 = 0;
        for (name, shape) in &header {
            let dims = shape.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                CheckpointError::MalformedHeader(format!("`{name}` shape is not a pair"))
            })?;
            let mut parsed = [0usize; 2];
            for (slot, d) in parsed.iter_mut().zip(dims) {
                *slot = d
                    .as_u64()
                    .and_then(|x| usize::try_from(x).ok())
                    .ok_or_else(|| {
                        CheckpointError::MalformedHeader(format!(
                            "`{name}` has a non-integer dimension"
                        ))
                    })?;
            }
            let count = (parsed[0] as u64)
                .checked_mul(parsed[1] as u64)
                .and_then(|c| c.checked_mul(4))
                .and_then(|c| expected_bytes.checked_add(c))
                .ok_or_else(|| {
                    CheckpointError::MalformedHeader(format!("`{name}` shape overflows"))
                })?;
            expected_bytes = count;
            shapes.push((name.clone(), parsed[0], parsed[1]));
        }
        let body = &bytes[newline + 1..];
        if (body.len() as u64) < expected_bytes {
            return Err(CheckpointError::TruncatedData {
                expected: expected_bytes,
                found: body.len(),
            });
        }
        if body.len() as u64 > expected_bytes {
            return Err(CheckpointError::TrailingData(
                body.len() - expected_bytes as usize,
            ));
        }
        let mut store = ParamStore::new();
        let mut offset = 0usize;
        for (name, rows, cols) in shapes {
            let count = rows * cols;
            let data: Vec<f32> = body[offset..offset + 4 * count]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            offset += 4 * count;
            store.insert(&name, Tensor::from_vec(rows, cols, data));
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("malformed checkpoint header: {0}")]
    MalformedHeader(String),
    #[error("checkpoint truncated: expected {expected} data bytes, found {found}")]
    TruncatedData { expected: u64, found: usize },
    #[error("checkpoint has {0} trailing bytes")]
    TrailingData(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A scalar loss expressible at any precision, so the f32 training tape and
/// the f64 finite-difference reference can build the same computation.
pub trait LossFn {
    fn build<S: super::Scalar>(&self, tape: &mut Tape<S>, vars: &ParamVars) -> Var;
}

/// Checks the f32 backward pass against central finite differences. The
/// analytic gradient comes from an f32 tape bound to the store, exactly as
/// in training; the numeric reference evaluates the same loss in f64 so the
/// differences are not swamped by rounding. Checks every coordinate when
/// there are at most `max_coords`, otherwise a seeded uniform sample.
/// Returns the maximum relative error |g_a − g_n| / max(1e-8, |g_a| + |g_n|).
pub fn grad_check<F: LossFn>(
    store: &ParamStore,
    f: &F,
    eps: f64,
    max_coords: usize,
    seed: u64,
) -> f64 {
    use rand::SeedableRng;

    let mut tape: Tape<f32> = Tape::new();
    let vars = ParamVars::bind(&mut tape, store);
    let root = f.build(&mut tape, &vars);
    tape.backward(root);
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(store.iter())
        .map(|((_, v), (_, t))| {
            tape.grad(v)
                .map(Tensor::cast)
                .unwrap_or_else(|| Tensor::zeros(t.rows, t.cols))
        })
        .collect();

    let named: Vec<(String, Tensor<f64>)> = store
        .iter()
        .map(|(n, t)| (n.to_string(), t.cast()))
        .collect();
    let sizes: Vec<usize> = named.iter().map(|(_, t)| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let flat_coords: Vec<usize> = if total <= max_coords {
        (0..total).collect()
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, total, max_coords).into_vec()
    };

    let eval = |values: &[(String, Tensor<f64>)]| -> f64 {
        let mut tape: Tape<f64> = Tape::new();
        let vars = ParamVars::bind_values(&mut tape, values);
        let root = f.build(&mut tape, &vars);
        tape.value(root).item()
    };

    let mut max_rel = 0.0f64;
    let mut values = named;
    for flat in flat_coords {
        let mut idx = flat;
        let mut p = 0;
        while idx >= sizes[p] {
            idx -= sizes[p];
            p += 1;
        }
        let original = values[p].1.data[idx];
        values[p].1.data[idx] = original + eps;
        let plus = eval(&values);
        values[p].1.data[idx] = original - eps;
        let minus = eval(&values);
        values[p].1.data[idx] = original;
        let numeric = (plus - minus) / (2.0 * eps);
        let ga = analytic[p].data[idx];
        let rel = (ga - numeric).abs() / (1e-8f64).max(ga.abs() + numeric.abs());
        max_rel = max_rel.max(rel);
    }
    max_rel
}
