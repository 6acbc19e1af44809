//! White-box untargeted L-infinity attacks: PGD against the recognizer
//! alone and BPDA+EOT through a defense.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::asr::AcousticModel;
use crate::defense::{apply, DefenseKind, RvqCodec};
use crate::error::{invalid, Error, Result};
use crate::signal::{TokenSequence, Waveform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Pgd,
    Bpda,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Pgd => "pgd",
            AttackKind::Bpda => "bpda",
        })
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pgd" => Ok(AttackKind::Pgd),
            "bpda" => Ok(AttackKind::Bpda),
            other => Err(invalid(format!("unknown attack {other:?}; expected pgd or bpda"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub eot_samples: usize,
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl AttackConfig {
    pub const DEFAULT_ITERATIONS: usize = 100;
    pub const DEFAULT_EOT_SAMPLES: usize = 8;
    pub const DEFAULT_SIGMA: f64 = 0.001;

    /// Defaults for radius `epsilon`: step `epsilon / 25`, 100 iterations,
    /// 8 EOT draws at sigma 0.001.
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            step_size: epsilon / 25.0,
            iterations: Self::DEFAULT_ITERATIONS,
            eot_samples: Self::DEFAULT_EOT_SAMPLES,
            jitter_sigma: Self::DEFAULT_SIGMA,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !(self.step_size >= 0.0) || !(self.jitter_sigma >= 0.0) {
            return Err(invalid(format!(
                "epsilon, step size and sigma must be non-negative, got {}, {}, {}",
                self.epsilon, self.step_size, self.jitter_sigma
            )));
        }
        if self.iterations == 0 || self.eot_samples == 0 {
            return Err(invalid("attack needs at least one iteration and one EOT sample"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub adversarial: Waveform,
    pub delta: Waveform,
    /// Loss at the start of every iteration followed by the loss at the
    /// final perturbation (`iterations_run + 1` entries).
    pub loss_trace: Vec<f64>,
    pub iterations_run: usize,
}

impl AttackResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("non-empty trace")
    }

    pub fn delta_linf(&self) -> f64 {
        self.delta.peak()
    }
}

/// One line of the attack log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackLogEntry {
    pub id: String,
    pub eps: f64,
    pub kind: AttackKind,
    pub defense: DefenseKind,
    pub final_loss: f64,
    pub delta_linf: f64,
    pub adv_wav_path: Option<String>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Sign-gradient ascent from zero, projected onto the epsilon ball and the
/// sample range after every step. `objective` returns the loss and its
/// gradient at the given (clipped) input.
fn sign_ascent<F>(x: &Waveform, cfg: &AttackConfig, mut objective: F) -> Result<AttackResult>
where
    F: FnMut(usize, &[f64], bool) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let xs = x.samples();
    let mut delta = vec![0.0; xs.len()];
    let mut input = xs.to_vec();
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    for t in 0..cfg.iterations {
        let (loss, grad) = objective(t, &input, true)?;
        trace.push(loss);
        for (((d, g), &xv), a) in delta.iter_mut().zip(&grad).zip(xs).zip(input.iter_mut()) {
            let stepped = (*d + cfg.step_size * sign(*g)).clamp(-cfg.epsilon, cfg.epsilon);
            *a = (xv + stepped).clamp(-1.0, 1.0);
            *d = *a - xv;
        }
    }
    trace.push(objective(cfg.iterations, &input, false)?.0);
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op: "attack loss" });
    }
    Ok(AttackResult {
        adversarial: Waveform::new(input)?,
        delta: Waveform::new(delta)?,
        loss_trace: trace,
        iterations_run: cfg.iterations,
    })
}

/// Non-adaptive PGD on the undefended recognizer.
pub fn pgd(model: &AcousticModel, x: &Waveform, y: &TokenSequence, cfg: &AttackConfig) -> Result<AttackResult> {
    sign_ascent(x, cfg, |_, input, want_grad| {
        if want_grad {
            model.loss_and_input_grad(input, y)
        } else {
            Ok((model.loss(input, y)?, Vec::new()))
        }
    })
}

/// Gaussian jitter for EOT draw `k` of iteration `t`; each (seed, t, k)
/// has its own ChaCha stream.
pub fn eot_noise(seed: u64, t: usize, k: usize, len: usize, sigma: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((t as u64) << 32) | k as u64);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

/// Adaptive attack: the loss is averaged over `eot_samples` jittered copies
/// passed through the defense, and the defense is treated as the identity
/// when back-propagating.
pub fn bpda_eot(
    model: &AcousticModel,
    defense: DefenseKind,
    codec: Option<&RvqCodec>,
    x: &Waveform,
    y: &TokenSequence,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    defense.validate()?;
    if defense.needs_codec() && codec.is_none() {
        return Err(invalid("rvq defense needs a trained codec"));
    }
    let k = cfg.eot_samples;
    sign_ascent(x, cfg, |t, input, want_grad| {
        let mut loss = 0.0;
        let mut grad = vec![0.0; input.len()];
        for i in 0..k {
            let noise = eot_noise(cfg.seed, t, i, input.len(), cfg.jitter_sigma);
            let jittered = Waveform::new(input.iter().zip(&noise).map(|(a, n)| a + n).collect())?;
            let defended = apply(defense, &jittered, codec)?;
            if want_grad {
                let (l, g) = model.loss_and_input_grad(defended.samples(), y)?;
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(s, v)| *s += v);
            } else {
                loss += model.loss(defended.samples(), y)?;
            }
        }
        let n = k as f64;
        grad.iter_mut().for_each(|v| *v /= n);
        Ok((loss / n, grad))
    })
}
