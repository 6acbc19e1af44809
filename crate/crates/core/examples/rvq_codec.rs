//! Train a shallow RVQ codec and watch reconstruction quality and bitrate
//! grow with depth.
//!
//! ```bash
//! cargo run --release --example rvq_codec
//! ```

use rvqlab::defense::{bitrate, train_codec, CodecConfig, CODEBOOK_SIZE};
use rvqlab::metrics::snr;
use rvqlab::signal::{gen_corpus, Split};

fn main() -> rvqlab::Result<()> {
    let train = gen_corpus(Split::Train, 300, 0)?;
    let cfg = CodecConfig {
        stages: 8,
        max_frames: Some(50 * CODEBOOK_SIZE),
        ..CodecConfig::default()
    };
    let (codec, report) = train_codec(&train, &cfg)?;
    println!("trained on {} frames; residual energy per stage {:?}", report.frames, report.residual_energy);

    let test = gen_corpus(Split::Test, 10, 0)?;
    let full: Vec<_> = test.utterances.iter().map(|u| codec.encode(&u.waveform, 8)).collect::<Result<_, _>>()?;
    for depth in 1..=8 {
        let mut total = 0.0;
        for (u, grid) in test.utterances.iter().zip(&full) {
            // Prefixes of the deepest encoding equal shallower encodings.
            let rec = codec.decode(&grid.prefix(depth)?)?;
            total += snr(&u.waveform, &rec)?;
        }
        println!(
            "depth {depth}: {:.1} kbps, mean SNR {:.2} dB",
            bitrate(CODEBOOK_SIZE, depth),
            total / test.len() as f64
        );
    }
    Ok(())
}
