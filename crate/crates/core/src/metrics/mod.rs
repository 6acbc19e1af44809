//! Evaluation quantities: WER, codebook change rate, SNR, Spearman rank
//! correlation and the per-row evaluation record.

mod record;
mod spearman;

pub use record::{delta_wer, EvalRecord, CSV_HEADER};
pub use spearman::{average_ranks, pearson, spearman};

use crate::defense::TokenGrid;
use crate::error::{invalid, Result};
use crate::signal::{TokenSequence, Waveform};

/// SNR reported for identical signals.
pub const SNR_CAP_DB: f64 = 99.0;

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance over reference length. May exceed one.
pub fn wer(reference: &TokenSequence, hypothesis: &TokenSequence) -> Result<f64> {
    if reference.is_empty() {
        return Err(invalid("reference transcript is empty"));
    }
    Ok(edit_distance(reference.ids(), hypothesis.ids()) as f64 / reference.len() as f64)
}

/// Fraction of (frame, stage) tokens that differ.
pub fn ccr(clean: &TokenGrid, adv: &TokenGrid) -> Result<f64> {
    if clean.frames() != adv.frames() || clean.depth() != adv.depth() {
        return Err(invalid(format!(
            "token grids differ in shape: {}x{} vs {}x{} (frame misalignment upstream?)",
            clean.frames(),
            clean.depth(),
            adv.frames(),
            adv.depth()
        )));
    }
    let total = clean.frames() * clean.depth();
    if total == 0 {
        return Ok(0.0);
    }
    let changed = clean.tokens().iter().zip(adv.tokens()).filter(|(a, b)| a != b).count();
    Ok(changed as f64 / total as f64)
}

/// `10 log10(|clean|^2 / |clean - other|^2)`, capped at [`SNR_CAP_DB`].
pub fn snr(clean: &Waveform, other: &Waveform) -> Result<f64> {
    if clean.len() != other.len() {
        return Err(invalid(format!(
            "snr needs equal lengths, got {} and {}",
            clean.len(),
            other.len()
        )));
    }
    let signal = clean.energy();
    let noise: f64 = clean.samples().iter().zip(other.samples()).map(|(a, b)| (a - b).powi(2)).sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}

/// Arithmetic mean and standard error of the mean (zero for fewer than two
/// values).
pub fn mean_sem(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || xs.iter().all(|&x| x == xs[0]) {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
