use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use log::info;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dct::Dct;
use super::kmeans::{kmeans, Codebook, KmeansOptions};
use crate::error::{invalid, Error, Result};
use crate::signal::{sqrt_hann, Corpus, FrameLayout, Waveform, FRAME_LEN, HOP, SAMPLE_RATE};

pub const N_MAX: usize = 32;
pub const CODEBOOK_SIZE: usize = 256;
/// Training frames needed per centroid.
pub const MIN_FRAMES_PER_CENTROID: usize = 50;
const DEFAULT_FRAMES_PER_CENTROID: usize = 250;

const MAGIC: &[u8; 4] = b"RVQ1";

/// Frame x stage token matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenGrid {
    frames: usize,
    depth: usize,
    tokens: Vec<u32>,
    source_len: usize,
}

impl TokenGrid {
    /// The decoded length defaults to the longest signal whose analysis
    /// layout has `frames` frames.
    pub fn new(frames: usize, depth: usize, tokens: Vec<u32>) -> Result<Self> {
        if tokens.len() != frames * depth {
            return Err(invalid(format!(
                "{} tokens cannot fill a {frames}x{depth} grid",
                tokens.len()
            )));
        }
        Ok(Self {
            frames,
            depth,
            tokens,
            source_len: frames.saturating_sub(1) * HOP,
        })
    }

    pub fn with_source_len(mut self, len: usize) -> Result<Self> {
        if FrameLayout::analysis(len)?.frames != self.frames {
            return Err(invalid(format!("{len} samples do not give {} frames", self.frames)));
        }
        self.source_len = len;
        Ok(self)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn get(&self, frame: usize, stage: usize) -> u32 {
        self.tokens[frame * self.depth + stage]
    }

    /// The first `m` stages.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.depth {
            return Err(invalid(format!("prefix depth {m} outside 1..={}", self.depth)));
        }
        let tokens = self.tokens.chunks_exact(self.depth).flat_map(|row| row[..m].iter().copied()).collect();
        Ok(Self {
            frames: self.frames,
            depth: m,
            tokens,
            source_len: self.source_len,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub stages: usize,
    pub codebook_size: usize,
    pub seed: u64,
    /// Frames drawn (seeded, without replacement) from the corpus for
    /// training; `None` uses every frame. The default is 250 per centroid,
    /// below which the deep stages mostly fit noise.
    pub max_frames: Option<usize>,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            stages: N_MAX,
            codebook_size: CODEBOOK_SIZE,
            seed: 0,
            max_frames: Some(DEFAULT_FRAMES_PER_CENTROID * CODEBOOK_SIZE),
            max_iters: 25,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CodecReport {
    pub frames: usize,
    /// Mean squared norm of the training residual before any stage and
    /// after each stage.
    pub residual_energy: Vec<f64>,
}

/// DCT-domain residual vector quantizer over sqrt-Hann analysis frames.
#[derive(Clone, Debug)]
pub struct RvqCodec {
    seed: u64,
    stages: Vec<Codebook>,
    dct: Arc<Dct>,
    window: Arc<Vec<f64>>,
}

impl PartialEq for RvqCodec {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.stages == other.stages
    }
}

/// Windowed analysis frames of `w` in the DCT domain, row-major.
fn latents(dct: &Dct, window: &[f64], w: &Waveform) -> Result<(FrameLayout, Vec<f64>)> {
    let layout = FrameLayout::analysis(w.len())?;
    Ok((layout, dct.forward(&layout.extract(w.samples(), window))))
}

pub fn train_codec(corpus: &Corpus, cfg: &CodecConfig) -> Result<(RvqCodec, CodecReport)> {
    let dct = Dct::shared();
    let window = Arc::new(sqrt_hann(FRAME_LEN));
    let mut all = Vec::new();
    for u in &corpus.utterances {
        all.extend(latents(&dct, &window, &u.waveform)?.1);
    }
    train_on_latents(all, cfg)
}

/// Train on pre-computed DCT latent rows.
pub fn train_on_latents(mut data: Vec<f64>, cfg: &CodecConfig) -> Result<(RvqCodec, CodecReport)> {
    let dim = FRAME_LEN;
    let (stages, k) = (cfg.stages, cfg.codebook_size);
    if stages == 0 || k == 0 {
        return Err(invalid("codec needs at least one stage and one centroid"));
    }
    let available = data.len() / dim;
    let needed = MIN_FRAMES_PER_CENTROID * k;
    if available < needed {
        return Err(invalid(format!(
            "codec training needs at least {needed} frames ({MIN_FRAMES_PER_CENTROID} per centroid), got {available}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(limit) = cfg.max_frames {
        if limit < needed {
            return Err(invalid(format!("max_frames {limit} is below the {needed}-frame minimum")));
        }
        if available > limit {
            let mut picks = sample(&mut rng, available, limit).into_vec();
            picks.sort_unstable();
            data = picks.iter().flat_map(|&i| data[i * dim..(i + 1) * dim].iter().copied()).collect();
        }
    }
    let n = data.len() / dim;
    let energy = |d: &[f64]| d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut report = CodecReport {
        frames: n,
        residual_energy: vec![energy(&data)],
    };
    let opts = KmeansOptions {
        k,
        max_iters: cfg.max_iters,
        rel_tol: cfg.rel_tol,
    };
    let mut books = Vec::with_capacity(stages);
    for s in 0..stages {
        let mut stage_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        stage_rng.set_stream(s as u64 + 1);
        let book = kmeans(&data, dim, &opts, &mut stage_rng);
        let assign = book.assign(&data);
        for (r, &a) in data.chunks_exact_mut(dim).zip(&assign) {
            for (v, c) in r.iter_mut().zip(book.centroid(a)) {
                *v -= c;
            }
        }
        report.residual_energy.push(energy(&data));
        info!("stage {}: residual energy {:.6}", s + 1, report.residual_energy[s + 1]);
        books.push(book);
    }
    Ok((RvqCodec::from_stages(cfg.seed, books)?, report))
}

impl RvqCodec {
    fn from_stages(seed: u64, stages: Vec<Codebook>) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("codec needs at least one stage"));
        }
        let k = stages[0].len();
        for (s, b) in stages.iter().enumerate() {
            if b.dim != FRAME_LEN || b.len() != k || b.centroids.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("stage {s} codebook must hold {k} finite {FRAME_LEN}-dim centroids")));
            }
        }
        Ok(Self {
            seed,
            stages,
            dct: Dct::shared(),
            window: Arc::new(sqrt_hann(FRAME_LEN)),
        })
    }

    /// Build a codec from explicit stage-major centroid data.
    pub fn from_centroids(seed: u64, codebook_size: usize, centroids: Vec<Vec<f64>>) -> Result<Self> {
        let stages = centroids
            .into_iter()
            .map(|c| {
                if c.len() != codebook_size * FRAME_LEN {
                    return Err(invalid(format!(
                        "stage holds {} values, expected {}",
                        c.len(),
                        codebook_size * FRAME_LEN
                    )));
                }
                Ok(Codebook::new(FRAME_LEN, c))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_stages(seed, stages)
    }

    pub fn max_depth(&self) -> usize {
        self.stages.len()
    }

    pub fn codebook_size(&self) -> usize {
        self.stages[0].len()
    }

    pub fn dim(&self) -> usize {
        FRAME_LEN
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn codebook(&self, stage: usize) -> &Codebook {
        &self.stages[stage]
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth == 0 || depth > self.max_depth() {
            return Err(invalid(format!("depth {depth} outside 1..={}", self.max_depth())));
        }
        Ok(())
    }

    /// Greedy residual encoding; stage `k` picks the centroid nearest the
    /// residual left by stages `1..k`.
    pub fn encode(&self, w: &Waveform, depth: usize) -> Result<TokenGrid> {
        self.check_depth(depth)?;
        let (layout, mut residual) = latents(&self.dct, &self.window, w)?;
        let mut tokens = vec![0u32; layout.frames * depth];
        for (s, book) in self.stages[..depth].iter().enumerate() {
            let assign = book.assign(&residual);
            for (f, (r, &a)) in residual.chunks_exact_mut(FRAME_LEN).zip(&assign).enumerate() {
                tokens[f * depth + s] = a as u32;
                for (v, c) in r.iter_mut().zip(book.centroid(a)) {
                    *v -= c;
                }
            }
        }
        TokenGrid::new(layout.frames, depth, tokens)?.with_source_len(w.len())
    }

    /// Sum of selected centroids per frame, inverse DCT, sqrt-Hann
    /// overlap-add, crop, clip to [-1, 1].
    pub fn decode(&self, tg: &TokenGrid) -> Result<Waveform> {
        if tg.depth() == 0 || tg.depth() > self.max_depth() {
            return Err(Error::CorruptTokens(format!(
                "grid depth {} outside 1..={}",
                tg.depth(),
                self.max_depth()
            )));
        }
        let k = self.codebook_size();
        let mut coeffs = vec![0.0; tg.frames() * FRAME_LEN];
        for (f, row) in coeffs.chunks_exact_mut(FRAME_LEN).enumerate() {
            for s in 0..tg.depth() {
                let t = tg.get(f, s) as usize;
                if t >= k {
                    return Err(Error::CorruptTokens(format!("token {t} at frame {f}, stage {s} exceeds {k}")));
                }
                for (v, c) in row.iter_mut().zip(self.stages[s].centroid(t)) {
                    *v += c;
                }
            }
        }
        let layout = FrameLayout::analysis(tg.source_len())?;
        if layout.frames != tg.frames() {
            return Err(Error::CorruptTokens(format!(
                "{} frames do not match a {}-sample signal",
                tg.frames(),
                tg.source_len()
            )));
        }
        let rows = self.dct.inverse(&coeffs);
        Ok(Waveform::new(layout.synthesize(&rows, &self.window))?.clipped())
    }

    pub fn roundtrip(&self, w: &Waveform, depth: usize) -> Result<Waveform> {
        self.decode(&self.encode(w, depth)?)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.max_depth() as u32).to_le_bytes())?;
        w.write_all(&(self.codebook_size() as u32).to_le_bytes())?;
        w.write_all(&(FRAME_LEN as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for b in &self.stages {
            for v in &b.centroids {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let corrupt = |reason: String| Error::CorruptFile {
            path: path.to_path_buf(),
            reason,
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 24 || &bytes[..4] != MAGIC {
            return Err(corrupt("missing RVQ1 header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let (stages, k, dim) = (u32_at(4), u32_at(8), u32_at(12));
        let seed = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
        if dim != FRAME_LEN || stages == 0 || k == 0 {
            return Err(corrupt(format!("unsupported shape {stages}x{k}x{dim}")));
        }
        let expected = 24 + stages * k * dim * 8;
        if bytes.len() != expected {
            return Err(corrupt(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let values: Vec<f64> = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(corrupt("non-finite centroid".into()));
        }
        let per_stage = k * dim;
        let centroids = values.chunks_exact(per_stage).map(<[f64]>::to_vec).collect();
        Self::from_centroids(seed, k, centroids).map_err(|e| corrupt(e.to_string()))
    }
}

/// `n log2(K)` bits per frame at `SAMPLE_RATE / HOP` frames per second, in
/// kbit/s.
pub fn bitrate(codebook_size: usize, depth: usize) -> f64 {
    depth as f64 * (codebook_size as f64).log2() * (SAMPLE_RATE as f64 / HOP as f64) / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defense::kmeans::sq_dist;
    use crate::signal::{gen_corpus, Split};
    use rand::Rng;

    /// Small random codec: 4 stages of 8 centroids, with centroid 0 of every
    /// stage forced to zero.
    fn fixture(seed: u64) -> RvqCodec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stages = (0..4)
            .map(|s| {
                let scale = 0.5f64.powi(s);
                let mut c: Vec<f64> = (0..8 * FRAME_LEN).map(|_| rng.random_range(-scale..scale)).collect();
                c[..FRAME_LEN].iter_mut().for_each(|v| *v = 0.0);
                c
            })
            .collect();
        RvqCodec::from_centroids(seed, 8, stages).unwrap()
    }

    fn brute_encode(codec: &RvqCodec, w: &Waveform, depth: usize) -> Vec<u32> {
        let (_, mut residual) = latents(&codec.dct, &codec.window, w).unwrap();
        let mut out = Vec::new();
        for r in residual.chunks_exact_mut(FRAME_LEN) {
            for s in 0..depth {
                let book = codec.codebook(s);
                let mut best = 0;
                for j in 1..book.len() {
                    if sq_dist(r, book.centroid(j)) < sq_dist(r, book.centroid(best)) {
                        best = j;
                    }
                }
                out.push(best as u32);
                for (v, c) in r.iter_mut().zip(book.centroid(best)) {
                    *v -= c;
                }
            }
        }
        out
    }

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap()
    }

    #[test]
    fn encoder_matches_brute_force() {
        let codec = fixture(1);
        for seed in 0..5 {
            let w = noise(3000 + 517 * seed as usize, seed);
            assert_eq!(codec.encode(&w, 4).unwrap().tokens(), brute_encode(&codec, &w, 4).as_slice());
        }
    }

    #[test]
    fn prefix_property() {
        let codec = fixture(2);
        let w = noise(4000, 9);
        let full = codec.encode(&w, 4).unwrap();
        for m in 1..4 {
            assert_eq!(codec.encode(&w, m).unwrap(), full.prefix(m).unwrap());
        }
    }

    #[test]
    fn zero_grid_decodes_to_silence() {
        let codec = fixture(3);
        let tg = TokenGrid::new(10, 4, vec![0; 40]).unwrap();
        let w = codec.decode(&tg).unwrap();
        assert_eq!(w.len(), 9 * HOP);
        assert!(w.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_quantization_reconstructs() {
        // Stage 1 holds the signal's own latent frames, so every residual is
        // zero and only overlap-add rounding remains.
        let w = noise(6 * HOP, 7);
        let (layout, lat) = latents(&Dct::shared(), &sqrt_hann(FRAME_LEN), &w).unwrap();
        let mut stage1 = lat.clone();
        stage1.resize(8 * FRAME_LEN, 0.0);
        let codec = RvqCodec::from_centroids(0, 8, vec![stage1, vec![0.0; 8 * FRAME_LEN]]).unwrap();
        let tg = codec.encode(&w, 2).unwrap();
        assert_eq!(tg.frames(), layout.frames);
        let decoded = codec.decode(&tg).unwrap();
        for (a, b) in decoded.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn out_of_range_tokens_are_rejected() {
        let codec = fixture(5);
        let tg = TokenGrid::new(3, 1, vec![0, 8, 1]).unwrap();
        assert!(matches!(codec.decode(&tg), Err(Error::CorruptTokens(_))));
        assert!(codec.encode(&noise(2000, 1), 5).is_err());
        assert!(codec.encode(&noise(2000, 1), 0).is_err());
    }

    #[test]
    fn file_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codec.rvq");
        let codec = fixture(6);
        codec.save(&path).unwrap();
        assert_eq!(RvqCodec::load(&path).unwrap(), codec);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(RvqCodec::load(&path), Err(Error::CorruptFile { .. })));
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(RvqCodec::load(&path), Err(Error::CorruptFile { .. })));
    }

    #[test]
    fn bitrate_arithmetic() {
        assert_eq!(bitrate(256, 2), 1.0);
        assert_eq!(bitrate(256, 9), 4.5);
        assert_eq!(bitrate(256, 32), 16.0);
    }

    #[test]
    fn small_training_run() {
        let corpus = gen_corpus(Split::Train, 12, 3).unwrap();
        let cfg = CodecConfig {
            stages: 6,
            codebook_size: 8,
            seed: 2,
            max_frames: None,
            ..CodecConfig::default()
        };
        let (a, report) = train_codec(&corpus, &cfg).unwrap();
        let (b, _) = train_codec(&corpus, &cfg).unwrap();
        assert_eq!(a, b);
        for w in report.residual_energy.windows(2) {
            assert!(w[1] <= w[0], "{:?}", report.residual_energy);
        }
        let too_small = CodecConfig {
            codebook_size: 4096,
            ..cfg
        };
        assert!(matches!(train_codec(&corpus, &too_small), Err(Error::InvalidArgument(_))));
    }
}
