#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rvqlab::asr::{train_asr, AcousticModel, TrainConfig};
use rvqlab::defense::{train_codec, CodecConfig, RvqCodec};
use rvqlab::signal::{gen_corpus, Split};

/// A briefly trained recognizer and a small 4-stage, 8-centroid codec.
/// Cheap enough for every test that needs artifacts on disk.
pub struct Fixture {
    pub model: AcousticModel,
    pub codec: RvqCodec,
    pub model_path: PathBuf,
    pub codec_path: PathBuf,
}

pub fn fixture(dir: &Path) -> Fixture {
    let train = gen_corpus(Split::Train, 48, 3).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let (model, _) = train_asr(&train, None, &cfg).unwrap();
    let codec_cfg = CodecConfig {
        stages: 4,
        codebook_size: 8,
        max_frames: None,
        ..CodecConfig::default()
    };
    let (codec, _) = train_codec(&train, &codec_cfg).unwrap();
    let model_path = dir.join("model.bin");
    let codec_path = dir.join("codec.rvq");
    model.save(&model_path).unwrap();
    codec.save(&codec_path).unwrap();
    Fixture {
        model,
        codec,
        model_path,
        codec_path,
    }
}
