//! Connectionist temporal classification loss.
//!
//! The target is extended with blanks (`_ a _ b _`), and the forward
//! (alpha) and backward (beta) recursions run over that extended sequence
//! in log space. The negative log-likelihood and its gradient with respect
//! to the per-frame log-probabilities come out of one pass.

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::signal::TokenSequence;

pub const BLANK: usize = 0;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Fewest frames able to emit `target`: one per label plus a separating
/// blank between equal neighbours.
pub fn min_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

/// CTC negative log-likelihood of `target` under `log_probs`
/// (`frames x classes`, row-normalized), together with its gradient with
/// respect to `log_probs`.
pub fn ctc_nll(log_probs: &Tensor, target: &[usize]) -> Result<(f64, Tensor)> {
    let (frames, classes) = log_probs
        .dims2()
        .ok_or_else(|| invalid(format!("ctc needs a matrix, got {:?}", log_probs.shape())))?;
    if let Some(&bad) = target.iter().find(|&&l| l == BLANK || l >= classes) {
        return Err(invalid(format!("target label {bad} outside 1..{classes}")));
    }
    let required = min_frames(target);
    if frames < required || frames == 0 {
        return Err(Error::InfeasibleAlignment { frames, required: required.max(1) });
    }

    let lp = |t: usize, k: usize| log_probs.data()[t * classes + k];
    let ext: Vec<usize> = std::iter::once(BLANK)
        .chain(target.iter().flat_map(|&l| [l, BLANK]))
        .collect();
    let s_len = ext.len();
    let can_skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];
    let neg = f64::NEG_INFINITY;

    let mut alpha = vec![neg; frames * s_len];
    alpha[0] = lp(0, ext[0]);
    if s_len > 1 {
        alpha[1] = lp(0, ext[1]);
    }
    for t in 1..frames {
        for s in 0..s_len {
            let mut a = alpha[(t - 1) * s_len + s];
            if s >= 1 {
                a = log_add(a, alpha[(t - 1) * s_len + s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, alpha[(t - 1) * s_len + s - 2]);
            }
            alpha[t * s_len + s] = if a == neg { neg } else { a + lp(t, ext[s]) };
        }
    }

    let mut beta = vec![neg; frames * s_len];
    let last = frames - 1;
    beta[last * s_len + s_len - 1] = lp(last, ext[s_len - 1]);
    if s_len > 1 {
        beta[last * s_len + s_len - 2] = lp(last, ext[s_len - 2]);
    }
    for t in (0..last).rev() {
        for s in 0..s_len {
            let mut b = beta[(t + 1) * s_len + s];
            if s + 1 < s_len {
                b = log_add(b, beta[(t + 1) * s_len + s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, beta[(t + 1) * s_len + s + 2]);
            }
            beta[t * s_len + s] = if b == neg { neg } else { b + lp(t, ext[s]) };
        }
    }

    let mut log_p = alpha[last * s_len + s_len - 1];
    if s_len > 1 {
        log_p = log_add(log_p, alpha[last * s_len + s_len - 2]);
    }
    if !log_p.is_finite() {
        return Err(Error::NonFinite { op: "ctc_nll" });
    }

    // d(-log p)/d lp[t,k] = -sum_{s: ext[s]=k} exp(alpha + beta - lp[t,k] - log p)
    let mut grad = vec![0.0; frames * classes];
    let mut acc = vec![neg; classes];
    for t in 0..frames {
        acc.iter_mut().for_each(|v| *v = neg);
        for s in 0..s_len {
            let ab = alpha[t * s_len + s] + beta[t * s_len + s];
            acc[ext[s]] = log_add(acc[ext[s]], ab);
        }
        for k in 0..classes {
            if acc[k] != neg {
                grad[t * classes + k] = -(acc[k] - lp(t, k) - log_p).exp();
            }
        }
    }
    Ok((-log_p, Tensor::matrix(frames, classes, grad)?))
}

/// CTC loss node on top of `log_softmax(logits)`.
pub fn ctc_loss(g: &mut Graph, logits: Var, target: &TokenSequence) -> Result<Var> {
    let lp = g.log_softmax(logits)?;
    let (loss, grad) = ctc_nll(g.value(lp), target.ids())?;
    g.custom_scalar(lp, loss, grad)
}
