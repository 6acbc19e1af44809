use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{write_wav, TokenSequence, Utterance, Waveform, SAMPLE_RATE, VOCAB_SIZE};
use crate::error::{invalid, Result};

pub const BURST_SECONDS: f64 = 0.12;
pub const GAP_SECONDS: f64 = 0.04;
pub const NOISE_SNR_DB: f64 = 30.0;
pub const PEAK_LEVEL: f64 = 0.7;
pub const LEN_RANGE: (usize, usize) = (3, 8);

const RAMP_SECONDS: f64 = 0.01;
const FORMANT_BANDWIDTH_HZ: f64 = 70.0;
const MAX_HARMONIC_HZ: f64 = 5000.0;
const F0_RANGE_HZ: (f64, f64) = (100.0, 180.0);

/// (F1, F2) per symbol, in Hz. Pairs are distinct.
const FORMANTS: [(f64, f64); VOCAB_SIZE] = [
    (270.0, 2290.0),
    (390.0, 1990.0),
    (530.0, 1840.0),
    (660.0, 1720.0),
    (730.0, 1090.0),
    (570.0, 840.0),
    (440.0, 1020.0),
    (300.0, 870.0),
    (640.0, 1190.0),
    (490.0, 1350.0),
];

pub fn formant_pair(symbol: usize) -> Option<(f64, f64)> {
    symbol.checked_sub(1).and_then(|i| FORMANTS.get(i)).copied()
}

fn burst_len() -> usize {
    (BURST_SECONDS * SAMPLE_RATE as f64).round() as usize
}

fn gap_len() -> usize {
    (GAP_SECONDS * SAMPLE_RATE as f64).round() as usize
}

fn render_burst(out: &mut [f64], symbol: usize, f0: f64) {
    let (f1, f2) = formant_pair(symbol).expect("validated symbol");
    let sr = SAMPLE_RATE as f64;
    let ramp = (RAMP_SECONDS * sr) as usize;
    let n = out.len();
    let mut h = 1;
    while h as f64 * f0 < MAX_HARMONIC_HZ {
        let freq = h as f64 * f0;
        let gain = |fc: f64| 1.0 / (1.0 + ((freq - fc) / FORMANT_BANDWIDTH_HZ).powi(2));
        let amp = (gain(f1) + 0.7 * gain(f2)) / (h as f64).sqrt();
        // Harmonics start in phase so a symbol has one waveform shape.
        for (t, v) in out.iter_mut().enumerate() {
            *v += amp * (2.0 * PI * freq * t as f64 / sr).sin();
        }
        h += 1;
    }
    for t in 0..ramp.min(n / 2) {
        let g = 0.5 - 0.5 * (PI * t as f64 / ramp as f64).cos();
        out[t] *= g;
        out[n - 1 - t] *= g;
    }
}

/// Render a transcript as formant bursts separated by silence, add noise at
/// 30 dB SNR and peak-normalize to 0.7.
///
/// Layout: gap, burst, gap, burst, ..., gap. The fundamental is drawn per
/// utterance and jittered per symbol.
pub fn synth_utterance(transcript: &TokenSequence, seed: u64) -> Result<Waveform> {
    if transcript.is_empty() {
        return Err(invalid("transcript must not be empty"));
    }
    let burst = burst_len();
    let gap = gap_len();
    let n = transcript.len();
    let mut samples = vec![0.0; n * burst + (n + 1) * gap];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.random_range(F0_RANGE_HZ.0..F0_RANGE_HZ.1);
    for (k, &sym) in transcript.ids().iter().enumerate() {
        let start = gap + k * (burst + gap);
        let jitter = rng.random_range(0.97..1.03);
        render_burst(&mut samples[start..start + burst], sym, f0 * jitter);
    }

    let power = samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64;
    let noise_std = (power / 10f64.powf(NOISE_SNR_DB / 10.0)).sqrt();
    for s in samples.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *s += noise_std * z;
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let scale = PEAK_LEVEL / peak;
    samples.iter_mut().for_each(|s| *s *= scale);
    Waveform::new(samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 0x7261_696e,
            Split::Dev => 0x6465_7600,
            Split::Test => 0x7465_7374,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Everything needed to regenerate a corpus split.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub split: Split,
    pub n_utts: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub split: Split,
    pub seed: u64,
    pub utterances: Vec<Utterance>,
}

/// One line of the corpus manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub transcript: Vec<usize>,
    pub wav_path: String,
    pub seed: u64,
}

/// Generate `n_utts` utterances with transcript lengths uniform in
/// [`LEN_RANGE`] and symbols uniform over the vocabulary. Each split draws
/// from its own seed stream.
pub fn gen_corpus(split: Split, n_utts: usize, seed: u64) -> Result<Corpus> {
    if n_utts == 0 {
        return Err(invalid("corpus needs at least one utterance"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split.stream());
    let utterances = (0..n_utts)
        .map(|i| {
            let len = rng.random_range(LEN_RANGE.0..=LEN_RANGE.1);
            let ids: Vec<usize> = (0..len).map(|_| rng.random_range(1..=VOCAB_SIZE)).collect();
            let utt_seed = rng.next_u64();
            let transcript = TokenSequence::new(ids)?;
            let waveform = synth_utterance(&transcript, utt_seed)?;
            Ok(Utterance {
                id: format!("{split}-{seed}-{i:05}"),
                waveform,
                transcript,
                seed: utt_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { split, seed, utterances })
}

impl Corpus {
    pub fn from_spec(spec: &CorpusSpec) -> Result<Self> {
        gen_corpus(spec.split, spec.n_utts, spec.seed)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Rebuild a corpus from manifest entries by re-synthesizing each
    /// utterance from its seed.
    pub fn from_manifest(split: Split, seed: u64, entries: &[ManifestEntry]) -> Result<Self> {
        let utterances = entries
            .iter()
            .map(|e| {
                let transcript = TokenSequence::new(e.transcript.clone())?;
                Ok(Utterance {
                    id: e.id.clone(),
                    waveform: synth_utterance(&transcript, e.seed)?,
                    transcript,
                    seed: e.seed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { split, seed, utterances })
    }

    /// Write one WAV per utterance plus `manifest.jsonl` into `dir` and
    /// return the manifest path. WAV paths in the manifest are relative to
    /// `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        for u in &self.utterances {
            let wav_path = format!("{}.wav", u.id);
            write_wav(dir.join(&wav_path), &u.waveform)?;
            let entry = ManifestEntry {
                id: u.id.clone(),
                transcript: u.transcript.ids().to_vec(),
                wav_path,
                seed: u.seed,
            };
            manifest.push_str(&serde_json::to_string(&entry)?);
            manifest.push('\n');
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest)?;
        Ok(path)
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
