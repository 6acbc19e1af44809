//! The median-filter and resampling baselines applied to a clean utterance
//! and to a noisy copy.
//!
//! ```bash
//! cargo run --release --example classic_defenses
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rvqlab::defense::{apply, DefenseKind};
use rvqlab::metrics::snr;
use rvqlab::signal::{synth_utterance, TokenSequence, Waveform};

fn main() -> rvqlab::Result<()> {
    let clean = synth_utterance(&TokenSequence::new(vec![2, 7, 4, 9])?, 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = Uniform::new_inclusive(-0.02, 0.02).expect("valid range");
    let noisy = Waveform::new(clean.samples().iter().map(|s| s + u.sample(&mut rng)).collect())?.clipped();
    println!("noisy input SNR {:.2} dB", snr(&clean, &noisy)?);
    for spec in ["none", "median:3", "median:5", "median:9", "resample"] {
        let d: DefenseKind = spec.parse()?;
        let on_clean = apply(d, &clean, None)?;
        let on_noisy = apply(d, &noisy, None)?;
        println!(
            "{spec:>9}: clean through defense {:6.2} dB, noisy through defense {:6.2} dB",
            snr(&clean, &on_clean)?,
            snr(&clean, &on_noisy)?
        );
    }
    Ok(())
}
