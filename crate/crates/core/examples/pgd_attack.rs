//! Untargeted L-infinity PGD against the recognizer at several radii.
//!
//! Pass a model saved by `train_recognizer` or `rvqlab train-asr`;
//! otherwise a small one is trained first.
//!
//! ```bash
//! cargo run --release --example pgd_attack -- model.bin
//! ```

use rvqlab::asr::{train_asr, AcousticModel, TrainConfig};
use rvqlab::attack::{pgd, AttackConfig};
use rvqlab::metrics::wer;
use rvqlab::signal::{gen_corpus, Split};

fn main() -> rvqlab::Result<()> {
    let model = match std::env::args().nth(1) {
        Some(path) => AcousticModel::load(path)?,
        None => {
            let cfg = TrainConfig {
                epochs: 6,
                ..TrainConfig::default()
            };
            train_asr(&gen_corpus(Split::Train, 400, 0)?, None, &cfg)?.0
        }
    };
    let test = gen_corpus(Split::Test, 4, 0)?;
    for eps in [0.001, 0.005, 0.02] {
        let mut total = 0.0;
        for u in &test.utterances {
            let r = pgd(&model, &u.waveform, &u.transcript, &AttackConfig::new(eps, 0))?;
            let hyp = model.transcribe(&r.adversarial)?;
            total += wer(&u.transcript, &hyp)?;
            println!(
                "eps {eps}: {} loss {:.2} -> {:.2}, |delta|inf {:.4}, {:?} -> {:?}",
                u.id,
                r.loss_trace[0],
                r.final_loss(),
                r.delta_linf(),
                u.transcript.ids(),
                hyp.ids()
            );
        }
        println!("eps {eps}: mean WER {:.3}", total / test.len() as f64);
    }
    Ok(())
}
