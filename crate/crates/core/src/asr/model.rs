use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ctc::ctc_loss;
use super::decode::greedy_decode;
use super::features::{Frontend, MEL_BANDS};
use crate::autodiff::{Axis, BoundParams, Graph, ParameterSet, Tensor, Var};
use crate::error::{invalid, Result};
use crate::signal::{TokenSequence, Waveform, FRAME_LEN, HOP, VOCAB_SIZE};

/// Frames of context on each side of the centre frame.
pub const CONTEXT: usize = 2;
pub const HIDDEN: usize = 128;
pub const NUM_CLASSES: usize = VOCAB_SIZE + 1;
pub const INPUT_DIM: usize = MEL_BANDS * (2 * CONTEXT + 1);

const SHIFT: &str = "feat_shift";
const INV_STD: &str = "feat_inv_std";
const LAYERS: [(&str, &str, usize, usize); 3] = [
    ("w1", "b1", INPUT_DIM, HIDDEN),
    ("w2", "b2", HIDDEN, HIDDEN),
    ("w3", "b3", HIDDEN, NUM_CLASSES),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub width: usize,
    pub hop: usize,
    pub window: String,
}

/// JSON sidecar stored next to the parameter file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub frame: FrameConfig,
    pub mel_bands: usize,
    pub context: usize,
    pub layer_dims: Vec<[usize; 2]>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: VOCAB_SIZE,
            frame: FrameConfig {
                width: FRAME_LEN,
                hop: HOP,
                window: "sqrt-hann".into(),
            },
            mel_bands: MEL_BANDS,
            context: CONTEXT,
            layer_dims: LAYERS.iter().map(|l| [l.2, l.3]).collect(),
        }
    }
}

/// Log-mel front end, +-2 frame context stack and a three-layer perceptron
/// producing blank + vocabulary logits per frame.
#[derive(Clone)]
pub struct AcousticModel {
    params: ParameterSet,
    frontend: Arc<Frontend>,
}

impl std::fmt::Debug for AcousticModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AcousticModel").field("params", &self.params.len()).finish()
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

impl AcousticModel {
    /// Glorot-uniform weights, zero biases, identity feature normalization.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        params.insert(SHIFT, Tensor::zeros(&[MEL_BANDS]), false).expect("fresh set");
        params.insert(INV_STD, Tensor::filled(&[MEL_BANDS], 1.0), false).expect("fresh set");
        for (w, b, fan_in, fan_out) in LAYERS {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            params.insert(w, Tensor::matrix(fan_in, fan_out, data).expect("dims"), true).expect("fresh set");
            params.insert(b, Tensor::zeros(&[fan_out]), true).expect("fresh set");
        }
        Self {
            params,
            frontend: Frontend::shared(),
        }
    }

    pub fn from_params(mut params: ParameterSet) -> Result<Self> {
        let reference = Self::init(0);
        for p in reference.params.iter() {
            let t = params.require(&p.name)?;
            if t.shape() != p.tensor.shape() {
                return Err(invalid(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    p.name,
                    t.shape(),
                    p.tensor.shape()
                )));
            }
            params.set_trainable(&p.name, p.trainable)?;
        }
        Ok(Self {
            params,
            frontend: Frontend::shared(),
        })
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn frontend(&self) -> &Frontend {
        &self.frontend
    }

    /// Fix the per-band feature normalization from training statistics.
    pub fn set_normalization(&mut self, mean: &[f64], std: &[f64]) -> Result<()> {
        if mean.len() != MEL_BANDS || std.len() != MEL_BANDS {
            return Err(invalid("normalization vectors must have one entry per mel band"));
        }
        self.params.set(SHIFT, Tensor::vector(mean.iter().map(|m| -m).collect()))?;
        self.params.set(INV_STD, Tensor::vector(std.iter().map(|s| 1.0 / s.max(1e-6)).collect()))
    }

    /// Logits (`frames x NUM_CLASSES`) from a feature node.
    pub fn logits_from_features(&self, g: &mut Graph, p: &BoundParams, feats: Var) -> Result<Var> {
        let centred = g.add(feats, p.var(SHIFT)?)?;
        let normed = g.mul(centred, p.var(INV_STD)?)?;
        let stacked = stack_context(g, normed)?;
        let mut h = stacked;
        for (i, (w, b, _, _)) in LAYERS.iter().enumerate() {
            let z = g.matmul(h, p.var(w)?)?;
            let z = g.add(z, p.var(b)?)?;
            h = if i + 1 < LAYERS.len() { g.relu(z)? } else { z };
        }
        Ok(h)
    }

    /// Logits from raw samples held in `x`.
    pub fn logits_graph(&self, g: &mut Graph, p: &BoundParams, x: Var) -> Result<Var> {
        let feats = self.frontend.featurize(g, x)?;
        self.logits_from_features(g, p, feats)
    }

    pub fn logits(&self, w: &Waveform) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g)?;
        let x = g.leaf(Tensor::vector(w.samples().to_vec()))?;
        let l = self.logits_graph(&mut g, &p, x)?;
        Ok(g.value(l).clone())
    }

    pub fn transcribe(&self, w: &Waveform) -> Result<TokenSequence> {
        Ok(greedy_decode(&self.logits(w)?))
    }

    /// CTC loss at `samples` and its gradient with respect to every sample.
    pub fn loss_and_input_grad(&self, samples: &[f64], target: &TokenSequence) -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g)?;
        let x = g.leaf(Tensor::vector(samples.to_vec()))?;
        let logits = self.logits_graph(&mut g, &p, x)?;
        let loss = ctc_loss(&mut g, logits, target)?;
        let value = g.value(loss).item();
        let mut grads = g.backward(loss)?;
        let gx = grads.take(x).expect("input is a leaf").into_data();
        Ok((value, gx))
    }

    pub fn loss(&self, samples: &[f64], target: &TokenSequence) -> Result<f64> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g)?;
        let x = g.leaf(Tensor::vector(samples.to_vec()))?;
        let logits = self.logits_graph(&mut g, &p, x)?;
        let loss = ctc_loss(&mut g, logits, target)?;
        Ok(g.value(loss).item())
    }

    /// Write the parameter file and its JSON sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.params.save(path)?;
        let json = serde_json::to_string_pretty(&ModelConfig::default())?;
        std::fs::write(sidecar_path(path), json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let sidecar: ModelConfig = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        if sidecar != ModelConfig::default() {
            return Err(invalid(format!("unsupported model configuration {sidecar:?}")));
        }
        Self::from_params(ParameterSet::load(path)?)
    }
}

/// Concatenate each frame with its `CONTEXT` neighbours on either side;
/// frames past the edges are zero (the normalized mean).
fn stack_context(g: &mut Graph, x: Var) -> Result<Var> {
    let (frames, width) = g.value(x).dims2().expect("feature matrix");
    let mut parts = Vec::with_capacity(2 * CONTEXT + 1);
    for offset in -(CONTEXT as isize)..=(CONTEXT as isize) {
        let shift = offset.unsigned_abs();
        if offset == 0 {
            parts.push(x);
        } else if shift >= frames {
            parts.push(g.leaf(Tensor::zeros(&[frames, width]))?);
        } else {
            let zeros = g.leaf(Tensor::zeros(&[shift, width]))?;
            let part = if offset < 0 {
                let body = g.slice(x, Axis::Rows, 0, frames - shift)?;
                g.concat(&[zeros, body], Axis::Rows)?
            } else {
                let body = g.slice(x, Axis::Rows, shift, frames - shift)?;
                g.concat(&[body, zeros], Axis::Rows)?
            };
            parts.push(part);
        }
    }
    g.concat(&parts, Axis::Cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::signal::{synth_utterance, TokenSequence};

    #[test]
    fn output_width_is_vocab_plus_blank() {
        let m = AcousticModel::init(1);
        let w = synth_utterance(&TokenSequence(vec![1, 2, 3]), 4).unwrap();
        let l = m.logits(&w).unwrap();
        assert_eq!(l.shape(), &[Frontend::frame_count(w.len()).unwrap(), NUM_CLASSES]);
    }

    #[test]
    fn context_stack_layout() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let s = stack_context(&mut g, x).unwrap();
        assert_eq!(
            g.value(s).data(),
            &[0.0, 0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 2.0, 3.0, 0.0, 0.0]
        );
    }

    #[test]
    fn sample_gradient_matches_finite_differences() {
        let m = AcousticModel::init(3);
        for seed in 0..5u64 {
            let t = TokenSequence(vec![1 + seed as usize, 4, 7]);
            let w = synth_utterance(&t, seed).unwrap();
            // A short excerpt keeps the finite-difference sweep cheap; the
            // small step stays clear of ReLU kinks.
            let excerpt = Tensor::vector(w.samples()[600..2400].to_vec());
            let target = TokenSequence(vec![1 + seed as usize]);
            let err = grad_check(
                |g, x| {
                    let p = m.params().bind(g)?;
                    let l = m.logits_graph(g, &p, x)?;
                    ctc_loss(g, l, &target)
                },
                &excerpt,
                1e-6,
            )
            .unwrap();
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let m = AcousticModel::init(9);
        m.save(&path).unwrap();
        assert!(sidecar_path(&path).exists());
        let back = AcousticModel::load(&path).unwrap();
        assert_eq!(back.params(), m.params());
    }
}
