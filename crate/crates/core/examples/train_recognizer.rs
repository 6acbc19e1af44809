//! Train the toy CTC recognizer on a small corpus and transcribe a few
//! held-out utterances.
//!
//! ```bash
//! cargo run --release --example train_recognizer -- model.bin
//! ```

use rvqlab::asr::{train_asr, TrainConfig};
use rvqlab::metrics::wer;
use rvqlab::signal::{gen_corpus, Split};

fn main() -> rvqlab::Result<()> {
    let out = std::env::args().nth(1);
    let train = gen_corpus(Split::Train, 400, 0)?;
    let dev = gen_corpus(Split::Dev, 50, 0)?;
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let (model, report) = train_asr(&train, Some(&dev), &cfg)?;
    for e in &report.epochs {
        println!("epoch {}: loss {:.3}, dev WER {:.3}", e.epoch, e.train_loss, e.dev_wer.unwrap_or(f64::NAN));
    }
    for u in gen_corpus(Split::Test, 3, 0)?.utterances {
        let hyp = model.transcribe(&u.waveform)?;
        println!("{:?} -> {:?} (WER {:.2})", u.transcript.ids(), hyp.ids(), wer(&u.transcript, &hyp)?);
    }
    if let Some(path) = out {
        model.save(&path)?;
        println!("saved {path}");
    }
    Ok(())
}
