//! Synthesize a few utterances, write them as WAV files plus a manifest,
//! and read one back.
//!
//! ```bash
//! cargo run --release --example synth_corpus -- /tmp/corpus
//! ```

use rvqlab::signal::{gen_corpus, read_manifest, read_wav, Split};

fn main() -> rvqlab::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus-demo".into());
    let corpus = gen_corpus(Split::Dev, 5, 0)?;
    for u in &corpus.utterances {
        println!(
            "{}: {:?}, {:.2} s, peak {:.2}",
            u.id,
            u.transcript.ids(),
            u.waveform.duration_secs(),
            u.waveform.peak()
        );
    }
    let manifest = corpus.write(&dir)?;
    let entries = read_manifest(&manifest)?;
    let back = read_wav(manifest.with_file_name(format!("{}.wav", entries[0].id)))?;
    // 16-bit PCM keeps about 96 dB of dynamic range.
    let err = back
        .samples()
        .iter()
        .zip(corpus.utterances[0].waveform.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("wrote {}; max round-trip error {err:.2e}", manifest.display());
    Ok(())
}
