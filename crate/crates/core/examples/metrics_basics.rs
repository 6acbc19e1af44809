//! WER, codebook change rate, SNR and Spearman correlation on small inputs.
//!
//! ```bash
//! cargo run --release --example metrics_basics
//! ```

use rvqlab::defense::TokenGrid;
use rvqlab::metrics::{ccr, snr, spearman, wer};
use rvqlab::signal::{TokenSequence, Waveform};

fn main() -> rvqlab::Result<()> {
    let reference = TokenSequence::new(vec![1, 2, 3, 4])?;
    for hyp in [vec![1, 2, 3, 4], vec![1, 3, 4], vec![1, 2, 9, 4, 4], vec![5, 6, 7, 8, 9, 10]] {
        let hyp = TokenSequence::new(hyp)?;
        println!("WER {:?} vs {:?}: {:.3}", reference.ids(), hyp.ids(), wer(&reference, &hyp)?);
    }

    // Two frames, three stages; two of six tokens differ.
    let a = TokenGrid::new(2, 3, vec![5, 1, 9, 7, 7, 2])?;
    let b = TokenGrid::new(2, 3, vec![5, 1, 8, 7, 0, 2])?;
    println!("CCR {:.3}", ccr(&a, &b)?);

    let x = Waveform::new(vec![0.5, -0.5, 0.25, -0.25])?;
    let y = Waveform::new(vec![0.49, -0.5, 0.26, -0.25])?;
    println!("SNR {:.2} dB", snr(&x, &y)?);

    // Ties get average ranks.
    let depth = [2.0, 4.0, 8.0, 16.0, 32.0];
    let change = [0.01, 0.03, 0.08, 0.2, 0.4];
    let wer_gap = [0.02, 0.05, 0.05, 0.3, 0.6];
    println!("rho(depth, CCR) {:.3}", spearman(&depth, &change)?);
    println!("rho(CCR, delta WER) {:.3}", spearman(&change, &wer_gap)?);
    Ok(())
}
