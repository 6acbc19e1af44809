//! Adaptive BPDA+EOT attack through a defense, compared with plain PGD
//! that ignores it.
//!
//! Pass a model (and optionally a codec, to attack `rvq:9`); otherwise a
//! small model is trained and the median filter is attacked.
//!
//! ```bash
//! cargo run --release --example bpda_attack -- model.bin codec.rvq
//! ```

use rvqlab::asr::{train_asr, AcousticModel, TrainConfig};
use rvqlab::attack::{bpda_eot, pgd, AttackConfig};
use rvqlab::defense::{apply, DefenseKind, RvqCodec};
use rvqlab::metrics::wer;
use rvqlab::signal::{gen_corpus, Split};

fn main() -> rvqlab::Result<()> {
    let mut args = std::env::args().skip(1);
    let model = match args.next() {
        Some(path) => AcousticModel::load(path)?,
        None => {
            let cfg = TrainConfig {
                epochs: 6,
                ..TrainConfig::default()
            };
            train_asr(&gen_corpus(Split::Train, 400, 0)?, None, &cfg)?.0
        }
    };
    let codec = args.next().map(RvqCodec::load).transpose()?;
    let defense = if codec.is_some() {
        DefenseKind::Rvq(9)
    } else {
        DefenseKind::Median(5)
    };
    // Fewer steps than the default 100 keep the demo quick.
    let cfg = AttackConfig {
        iterations: 30,
        ..AttackConfig::new(0.02, 0)
    };
    for u in gen_corpus(Split::Test, 2, 0)?.utterances {
        let clean = apply(defense, &u.waveform, codec.as_ref())?;
        let plain = pgd(&model, &u.waveform, &u.transcript, &cfg)?;
        let adaptive = bpda_eot(&model, defense, codec.as_ref(), &u.waveform, &u.transcript, &cfg)?;
        let score = |w| -> rvqlab::Result<f64> {
            let defended = apply(defense, w, codec.as_ref())?;
            wer(&u.transcript, &model.transcribe(&defended)?)
        };
        println!(
            "{} through {defense}: clean WER {:.2}, PGD {:.2}, BPDA+EOT {:.2}",
            u.id,
            wer(&u.transcript, &model.transcribe(&clean)?)?,
            score(&plain.adversarial)?,
            score(&adaptive.adversarial)?
        );
    }
    Ok(())
}
