use super::ctc::BLANK;
use crate::autodiff::Tensor;
use crate::signal::TokenSequence;

/// Best class per frame; ties go to the lowest id.
pub fn best_path(logits: &Tensor) -> Vec<usize> {
    let (frames, _) = logits.dims2().expect("logits matrix");
    (0..frames)
        .map(|t| {
            let row = logits.row(t);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Collapse repeats, then drop blanks.
pub fn collapse(path: &[usize]) -> TokenSequence {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    TokenSequence(out)
}

pub fn greedy_decode(logits: &Tensor) -> TokenSequence {
    collapse(&best_path(logits))
}
