//! Waveforms, the synthetic formant corpus, WAV I/O and the framing
//! primitives shared by the recognizer front end and the codec.

mod framing;
mod synth;
mod wav;

pub use framing::{frame, overlap_add, sqrt_hann, FrameLayout, FrameMatrix, WindowKind, FRAME_LEN, HOP};
pub use synth::{
    formant_pair, gen_corpus, read_manifest, synth_utterance, Corpus, CorpusSpec, ManifestEntry, Split,
    BURST_SECONDS, GAP_SECONDS, LEN_RANGE, MANIFEST_FILE, NOISE_SNR_DB, PEAK_LEVEL,
};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Number of non-blank symbols. Ids run `1..=VOCAB_SIZE`; 0 is the CTC blank.
pub const VOCAB_SIZE: usize = 10;

/// Mono 16 kHz signal with finite samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("waveform must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    /// Copy with every sample clamped to `[-1, 1]`.
    pub fn clipped(&self) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s.clamp(-1.0, 1.0)).collect(),
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// Symbol ids with the blank excluded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = ids.iter().find(|&&id| id == 0 || id > VOCAB_SIZE) {
            return Err(invalid(format!("symbol id {bad} outside 1..={VOCAB_SIZE}")));
        }
        Ok(Self(ids))
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub waveform: Waveform,
    pub transcript: TokenSequence,
    pub seed: u64,
}
