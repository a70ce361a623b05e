//! Small fully connected regressor mapping spectral features to a rate.
//!
//! Four rectified-linear hidden layers and an affine output. Features and the
//! target are standardized with constants stored in the model, so raw peak
//! powers spanning many decades do not swamp the rates.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::features::FEATURE_DIM;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::synthesis::config::RATE_BAND_BPM;

pub const DEFAULT_LAYER_DIMS: [usize; 6] = [FEATURE_DIM, 32, 32, 16, 8, 1];

/// Dense layer, weights row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> Dense<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            biases: vec![T::zero(); outputs],
        }
    }

    fn forward(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v)),
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel<T> {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<Dense<T>>,
    pub feature_mean: Vec<T>,
    pub feature_scale: Vec<T>,
    pub target_mean: T,
    pub target_scale: T,
}

impl<T: Real> RegressorModel<T> {
    /// All-zero weights with identity normalization.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) || *layer_dims.last().unwrap() != 1 {
            return Err(Error::InvalidModel(format!("bad layer dims {layer_dims:?}")));
        }
        let layers = layer_dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers,
            feature_mean: vec![T::zero(); layer_dims[0]],
            feature_scale: vec![T::one(); layer_dims[0]],
            target_mean: T::zero(),
            target_scale: T::one(),
        })
    }

    /// He-normal weights, zero biases.
    pub fn random(layer_dims: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut m.layers {
            let std = (2.0 / layer.inputs as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = T::lit(dist.sample(&mut rng)));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.layer_dims.len() != self.layers.len() + 1 {
            return bad("layer count does not match dims".into());
        }
        for (i, (l, w)) in self.layers.iter().zip(self.layer_dims.windows(2)).enumerate() {
            if l.inputs != w[0] || l.outputs != w[1] || l.weights.len() != w[0] * w[1] || l.biases.len() != w[1] {
                return bad(format!(
                    "layer {i} shape does not chain with dims {:?}",
                    self.layer_dims
                ));
            }
        }
        if self.layer_dims.last() != Some(&1) {
            return bad("final layer must have one output".into());
        }
        let d = self.layer_dims[0];
        if self.feature_mean.len() != d || self.feature_scale.len() != d {
            return bad("normalization length does not match input dimension".into());
        }
        if self.feature_scale.iter().any(|s| !(*s > T::zero())) || !(self.target_scale > T::zero()) {
            return bad("normalization scales must be positive".into());
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn normalize(&self, features: &[T]) -> Vec<T> {
        features
            .iter()
            .zip(self.feature_mean.iter().zip(&self.feature_scale))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    /// Network output in standardized target units, with every layer's
    /// pre-activation kept for backpropagation.
    fn forward_trace(&self, normalized: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(normalized.to_vec());
        let last = self.layers.len() - 1;
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(acts.last().unwrap(), &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            acts.push(z.clone());
        }
        acts
    }

    /// Unclamped prediction in bpm.
    pub fn predict_raw(&self, features: &[T]) -> Result<T> {
        if features.len() != self.input_dim() {
            return Err(Error::InvalidModel(format!(
                "feature dimension {} != model input {}",
                features.len(),
                self.input_dim()
            )));
        }
        let acts = self.forward_trace(&self.normalize(features));
        Ok(acts.last().unwrap()[0] * self.target_scale + self.target_mean)
    }

    /// Mean squared error in standardized target units.
    pub fn loss(&self, data: &[(Vec<T>, T)]) -> T {
        let n = T::from_usize_lossy(data.len().max(1));
        data.iter()
            .map(|(x, y)| {
                let acts = self.forward_trace(&self.normalize(x));
                let e = acts.last().unwrap()[0] - (*y - self.target_mean) / self.target_scale;
                e * e
            })
            .sum::<T>()
            / n
    }

    /// Loss and its gradient, flattened in [`Self::params`] order.
    pub fn loss_and_gradient(&self, data: &[(Vec<T>, T)]) -> (T, Vec<T>) {
        let mut grad_w: Vec<Vec<T>> = self.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect();
        let mut grad_b: Vec<Vec<T>> = self.layers.iter().map(|l| vec![T::zero(); l.biases.len()]).collect();
        let n = T::from_usize_lossy(data.len().max(1));
        let mut loss = T::zero();
        for (x, y) in data {
            let acts = self.forward_trace(&self.normalize(x));
            let e = acts.last().unwrap()[0] - (*y - self.target_mean) / self.target_scale;
            loss = loss + e * e;
            // dL/d(output) for the mean of squared errors
            let mut delta = vec![T::lit(2.0) * e / n];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                for (o, &d) in delta.iter().enumerate() {
                    grad_b[li][o] = grad_b[li][o] + d;
                    let row = &mut grad_w[li][o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &v) in row.iter_mut().zip(input) {
                        *g = *g + d * v;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut prev = vec![T::zero(); layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p = *p + w * d;
                    }
                }
                // ReLU derivative of the previous layer's output
                for (p, &a) in prev.iter_mut().zip(input) {
                    if !(a > T::zero()) {
                        *p = T::zero();
                    }
                }
                delta = prev;
            }
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, b) in grad_w.into_iter().zip(grad_b) {
            flat.extend(w);
            flat.extend(b);
        }
        (loss / n, flat)
    }

    /// All weights and biases, layer by layer (weights then biases).
    pub fn params(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.weights);
            v.extend_from_slice(&l.biases);
        }
        v
    }

    pub fn set_params(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidModel("parameter vector length mismatch".into()));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }
}

/// Predicted rate in bpm, clamped to the detection band.
pub fn regressor_forward<T: Real>(model: &RegressorModel<T>, features: &[T]) -> Result<T> {
    let raw = model.predict_raw(features)?;
    Ok(raw.max(T::lit(RATE_BAND_BPM.0)).min(T::lit(RATE_BAND_BPM.1)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    /// Stop once the training loss falls below this value.
    pub target_loss: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 2000,
            seed: 0,
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            target_loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Training loss after each epoch, in bpm² (standardized loss × scale²).
    pub losses: Vec<f64>,
    pub epochs_run: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Full-batch gradient descent with an adaptive step: a step that raises the
/// loss is undone and the rate halved, an accepted step grows it by 5%. The
/// recorded loss therefore never increases.
pub fn regressor_train<T: Real>(
    dataset: &[(Vec<T>, T)],
    hyper: &TrainHyper,
) -> Result<(RegressorModel<T>, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::TrainingFailure("empty dataset".into()));
    }
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0 && hyper.target_loss.is_finite()) {
        return Err(Error::TrainingFailure(
            "hyperparameters must be finite and positive".into(),
        ));
    }
    let mut model = RegressorModel::<T>::random(&hyper.layer_dims, hyper.seed)?;
    let dim = model.input_dim();
    if let Some((x, _)) = dataset.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::InvalidModel(format!(
            "sample has {} features, model expects {dim}",
            x.len()
        )));
    }
    for j in 0..dim {
        let (m, s) = mean_std(dataset.iter().map(|(x, _)| x[j].to_f64_lossy()));
        model.feature_mean[j] = T::lit(m);
        model.feature_scale[j] = T::lit(s);
    }
    let (tm, ts) = mean_std(dataset.iter().map(|(_, y)| y.to_f64_lossy()));
    model.target_mean = T::lit(tm);
    model.target_scale = T::lit(ts);
    let to_bpm2 = ts * ts;

    let mut lr = hyper.learning_rate;
    let mut params = model.params();
    let (mut loss, mut grad) = model.loss_and_gradient(dataset);
    let mut losses = Vec::with_capacity(hyper.epochs);
    let mut epochs_run = 0;
    for _ in 0..hyper.epochs {
        if !loss.to_f64_lossy().is_finite() {
            return Err(Error::TrainingFailure(format!("loss diverged at epoch {epochs_run}")));
        }
        if loss.to_f64_lossy() * to_bpm2 < hyper.target_loss {
            break;
        }
        epochs_run += 1;
        let trial: Vec<T> = params.iter().zip(&grad).map(|(&p, &g)| p - T::lit(lr) * g).collect();
        model.set_params(&trial)?;
        let (trial_loss, trial_grad) = model.loss_and_gradient(dataset);
        if trial_loss.to_f64_lossy().is_finite() && trial_loss <= loss {
            params = trial;
            loss = trial_loss;
            grad = trial_grad;
            lr *= 1.05;
        } else {
            model.set_params(&params)?;
            lr *= 0.5;
            if lr < 1e-300 {
                return Err(Error::TrainingFailure("step size collapsed".into()));
            }
        }
        losses.push(loss.to_f64_lossy() * to_bpm2);
    }
    if !loss.to_f64_lossy().is_finite() {
        return Err(Error::TrainingFailure("loss is not finite".into()));
    }
    Ok((model, TrainReport { losses, epochs_run }))
}

pub const RRNN_MAGIC: [u8; 4] = *b"RRNN";
pub const RRNN_VERSION: u16 = 1;

/// Serializes a model as `RRNN`:
///
/// ```text
/// magic "RRNN" | u16 version | u32 L (number of dims) | L × u32 dims
/// per layer: out×in f64 weights (row-major), out f64 biases
/// in f64 feature means | in f64 feature scales | f64 target mean | f64 target scale
/// ```
/// All integers and floats little-endian.
pub fn write_rrnn<T: Real, W: Write>(model: &RegressorModel<T>, mut w: W) -> Result<()> {
    model.validate()?;
    w.write_all(&RRNN_MAGIC)?;
    w.write_all(&RRNN_VERSION.to_le_bytes())?;
    w.write_all(&(model.layer_dims.len() as u32).to_le_bytes())?;
    for &d in &model.layer_dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    let mut put = |v: T| w.write_all(&v.to_f64_lossy().to_le_bytes());
    for l in &model.layers {
        for &v in l.weights.iter().chain(&l.biases) {
            put(v)?;
        }
    }
    for &v in model.feature_mean.iter().chain(&model.feature_scale) {
        put(v)?;
    }
    put(model.target_mean)?;
    put(model.target_scale)?;
    w.flush()?;
    Ok(())
}

pub fn read_rrnn<T: Real, R: Read>(mut r: R) -> Result<RegressorModel<T>> {
    let mut offset = 0u64;
    let mut take = |buf: &mut [u8], what: &str| -> Result<()> {
        r.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format {
                kind: "RRNN",
                offset,
                reason: format!("truncated while reading {what}"),
            },
            _ => e.into(),
        })?;
        offset += buf.len() as u64;
        Ok(())
    };
    let mut b4 = [0u8; 4];
    take(&mut b4, "magic")?;
    if b4 != RRNN_MAGIC {
        return Err(Error::Format {
            kind: "RRNN",
            offset: 0,
            reason: "bad magic, expected RRNN".into(),
        });
    }
    let mut b2 = [0u8; 2];
    take(&mut b2, "version")?;
    let version = u16::from_le_bytes(b2);
    if version != RRNN_VERSION {
        return Err(Error::Format {
            kind: "RRNN",
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    take(&mut b4, "dim count")?;
    let count = u32::from_le_bytes(b4) as usize;
    if !(2..=64).contains(&count) {
        return Err(Error::Format {
            kind: "RRNN",
            offset: 6,
            reason: format!("implausible layer count {count}"),
        });
    }
    let mut dims = Vec::with_capacity(count);
    for _ in 0..count {
        take(&mut b4, "layer dim")?;
        dims.push(u32::from_le_bytes(b4) as usize);
    }
    let mut model = RegressorModel::<T>::zeros(&dims)?;
    let mut b8 = [0u8; 8];
    let mut next = |what: &str| -> Result<T> {
        take(&mut b8, what)?;
        Ok(T::lit(f64::from_le_bytes(b8)))
    };
    for l in &mut model.layers {
        for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
            *v = next("weights")?;
        }
    }
    for v in model.feature_mean.iter_mut().chain(model.feature_scale.iter_mut()) {
        *v = next("normalization")?;
    }
    model.target_mean = next("target mean")?;
    model.target_scale = next("target scale")?;
    model.validate()?;
    Ok(model)
}

pub fn save_rrnn<T: Real>(model: &RegressorModel<T>, path: &std::path::Path) -> Result<()> {
    write_rrnn(model, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_rrnn<T: Real>(path: &std::path::Path) -> Result<RegressorModel<T>> {
    read_rrnn(std::io::BufReader::new(std::fs::File::open(path)?))
}
