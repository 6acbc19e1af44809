use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ctc::ctc_loss;
use super::decode::greedy_decode;
use super::features::MEL_BANDS;
use super::model::AcousticModel;
use crate::autodiff::{Graph, Tensor};
use crate::error::{invalid, Error, Result};
use crate::metrics::wer;
use crate::signal::{Corpus, TokenSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Heavy-ball momentum; zero gives plain gradient descent.
    pub momentum: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            epochs: 8,
            batch: 16,
            seed: 0,
            momentum: 0.9,
            clip_norm: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-utterance CTC loss over the epoch.
    pub train_loss: f64,
    /// Mean per-utterance dev WER, when a dev split was given.
    pub dev_wer: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_dev_wer(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.dev_wer)
    }
}

struct Example {
    feats: Tensor,
    target: TokenSequence,
}

fn precompute(model: &AcousticModel, corpus: &Corpus) -> Result<Vec<Example>> {
    corpus
        .utterances
        .iter()
        .map(|u| {
            Ok(Example {
                feats: model.frontend().features(&u.waveform)?,
                target: u.transcript.clone(),
            })
        })
        .collect()
}

/// Per-band mean over every training frame, and one standard deviation
/// pooled over all bands. A shared scale keeps bands that sit at the
/// log floor from being blown up by their tiny variance.
fn band_stats(examples: &[Example]) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; MEL_BANDS];
    let mut n = 0usize;
    for ex in examples {
        for row in ex.feats.data().chunks_exact(MEL_BANDS) {
            sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            n += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = 0.0;
    for ex in examples {
        for row in ex.feats.data().chunks_exact(MEL_BANDS) {
            sq += row.iter().zip(&mean).map(|(v, m)| (v - m).powi(2)).sum::<f64>();
        }
    }
    let std = (sq / (n * MEL_BANDS) as f64).sqrt();
    (mean, vec![std; MEL_BANDS])
}

fn decode_features(model: &AcousticModel, feats: &Tensor) -> Result<TokenSequence> {
    let mut g = Graph::new();
    let p = model.params().bind(&mut g)?;
    let x = g.leaf(feats.clone())?;
    let l = model.logits_from_features(&mut g, &p, x)?;
    Ok(greedy_decode(g.value(l)))
}

fn mean_wer(model: &AcousticModel, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        total += wer(&ex.target, &decode_features(model, &ex.feats)?)?;
    }
    Ok(total / examples.len() as f64)
}

/// Train a fresh model from `seed`. Feature normalization is fixed from the
/// training split before the first step.
pub fn train_asr(train: &Corpus, dev: Option<&Corpus>, cfg: &TrainConfig) -> Result<(AcousticModel, TrainReport)> {
    if train.is_empty() {
        return Err(invalid("training split is empty"));
    }
    if cfg.batch == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(invalid(format!(
            "need batch >= 1, epochs >= 1 and lr > 0, got {}, {}, {}",
            cfg.batch, cfg.epochs, cfg.lr
        )));
    }
    let mut model = AcousticModel::init(cfg.seed);
    let examples = precompute(&model, train)?;
    let dev_examples = dev.map(|d| precompute(&model, d)).transpose()?;
    let (mean, std) = band_stats(&examples);
    model.set_normalization(&mean, &std)?;

    let trainable: Vec<bool> = model.params().iter().map(|p| p.trainable).collect();
    let mut velocity: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.tensor.len()]).collect();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut report = TrainReport::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch) {
            let mut acc: Vec<Vec<f64>> = velocity.iter().map(|v| vec![0.0; v.len()]).collect();
            for &i in batch {
                let ex = &examples[i];
                let mut g = Graph::new();
                let p = model.params().bind(&mut g)?;
                let x = g.leaf(ex.feats.clone())?;
                let logits = model.logits_from_features(&mut g, &p, x)?;
                let loss = ctc_loss(&mut g, logits, &ex.target).map_err(|e| match e {
                    Error::NonFinite { .. } => Error::TrainingFailure { epoch },
                    other => other,
                })?;
                epoch_loss += g.value(loss).item();
                let grads = g.backward(loss).map_err(|_| Error::TrainingFailure { epoch })?;
                for ((a, &v), &t) in acc.iter_mut().zip(p.vars()).zip(&trainable) {
                    if t {
                        for (s, d) in a.iter_mut().zip(grads.wrt(v).data()) {
                            *s += d;
                        }
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let norm = acc.iter().flatten().map(|d| (d * scale).powi(2)).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::TrainingFailure { epoch });
            }
            let clip = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            for ((param, a), v) in model.params_mut().iter_mut().zip(&acc).zip(&mut velocity) {
                if !param.trainable {
                    continue;
                }
                for ((w, d), m) in param.tensor.data_mut().iter_mut().zip(a).zip(v.iter_mut()) {
                    *m = cfg.momentum * *m + d * scale * clip;
                    *w -= cfg.lr * *m;
                }
            }
        }
        let train_loss = epoch_loss / examples.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::TrainingFailure { epoch });
        }
        let dev_wer = dev_examples.as_deref().map(|d| mean_wer(&model, d)).transpose()?;
        info!("epoch {epoch}: train loss {train_loss:.4}, dev wer {dev_wer:?}");
        report.epochs.push(EpochStats {
            epoch,
            train_loss,
            dev_wer,
        });
    }
    Ok((model, report))
}
