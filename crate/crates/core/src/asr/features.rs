use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::autodiff::{Axis, Graph, Tensor, Var};
use crate::error::{invalid, Result};
use crate::signal::{sqrt_hann, FrameLayout, Waveform, FRAME_LEN, SAMPLE_RATE};

pub const DFT_BINS: usize = FRAME_LEN / 2 + 1;
pub const MEL_BANDS: usize = 32;
pub const FEATURE_FLOOR: f64 = 1e-8;
/// DFT normalization. With `1/N` the noise floor of the synthetic corpus
/// lands near [`FEATURE_FLOOR`], so the log compresses sub-noise detail.
pub const DFT_SCALE: f64 = 1.0 / FRAME_LEN as f64;
/// Upper edge of the top mel triangle. The corpus has no harmonics above
/// 5 kHz, so bands past this would only see noise.
pub const MEL_TOP_HZ: f64 = 5500.0;

/// Fixed matrices of the differentiable log-mel front end.
pub struct Frontend {
    window: Arc<Vec<f64>>,
    /// `FRAME_LEN x 2*DFT_BINS`: cosine block then negated sine block.
    dft: Arc<Tensor>,
    /// `DFT_BINS x MEL_BANDS`; column `m` is triangle `m`.
    filterbank: Arc<Tensor>,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Mel-spaced triangles over the DFT bins, one row per band, each row
/// nonnegative and summing to one.
pub fn mel_filterbank() -> Vec<Vec<f64>> {
    let top = hz_to_mel(MEL_TOP_HZ);
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(top * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    let bin_hz = SAMPLE_RATE as f64 / FRAME_LEN as f64;
    (0..MEL_BANDS)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row: Vec<f64> = (0..DFT_BINS)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect();
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                let k = ((mid / bin_hz).round() as usize).min(DFT_BINS - 1);
                row[k] = 1.0;
            }
            row
        })
        .collect()
}

impl Frontend {
    fn build() -> Self {
        let mut dft = vec![0.0; FRAME_LEN * 2 * DFT_BINS];
        for n in 0..FRAME_LEN {
            for k in 0..DFT_BINS {
                let phase = 2.0 * PI * ((n * k) % FRAME_LEN) as f64 / FRAME_LEN as f64;
                dft[n * 2 * DFT_BINS + k] = DFT_SCALE * phase.cos();
                dft[n * 2 * DFT_BINS + DFT_BINS + k] = -DFT_SCALE * phase.sin();
            }
        }
        let rows = mel_filterbank();
        let mut fb = vec![0.0; DFT_BINS * MEL_BANDS];
        for (m, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                fb[k * MEL_BANDS + m] = v;
            }
        }
        Self {
            window: Arc::new(sqrt_hann(FRAME_LEN)),
            dft: Arc::new(Tensor::matrix(FRAME_LEN, 2 * DFT_BINS, dft).expect("dft shape")),
            filterbank: Arc::new(Tensor::matrix(DFT_BINS, MEL_BANDS, fb).expect("fb shape")),
        }
    }

    /// Process-wide shared instance.
    pub fn shared() -> Arc<Frontend> {
        static FRONTEND: OnceLock<Arc<Frontend>> = OnceLock::new();
        FRONTEND.get_or_init(|| Arc::new(Frontend::build())).clone()
    }

    pub fn filterbank(&self) -> &Tensor {
        &self.filterbank
    }

    /// Number of feature frames for a signal of `len` samples.
    pub fn frame_count(len: usize) -> Result<usize> {
        Ok(FrameLayout::analysis(len)?.frames)
    }

    /// Graph nodes for log-mel features of the sample vector `x`:
    /// frame, DFT power, mel pooling, `log(. + 1e-8)`. Output is
    /// `frames x MEL_BANDS`.
    pub fn featurize(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let len = g.value(x).len();
        if len == 0 {
            return Err(invalid("cannot featurize an empty signal"));
        }
        let layout = FrameLayout::analysis(len)?;
        let frames = g.frame(x, layout, self.window.clone())?;
        let spec = g.fixed_matmul(frames, self.dft.clone())?;
        let sq = g.square(spec)?;
        let re = g.slice(sq, Axis::Cols, 0, DFT_BINS)?;
        let im = g.slice(sq, Axis::Cols, DFT_BINS, DFT_BINS)?;
        let power = g.add(re, im)?;
        let mel = g.fixed_matmul(power, self.filterbank.clone())?;
        let shifted = g.add_const(mel, FEATURE_FLOOR)?;
        g.log(shifted)
    }

    /// Power spectrum `frames x DFT_BINS`, outside any graph.
    pub fn power_spectrum(&self, w: &Waveform) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(w.samples().to_vec()))?;
        let layout = FrameLayout::analysis(w.len())?;
        let frames = g.frame(x, layout, self.window.clone())?;
        let spec = g.fixed_matmul(frames, self.dft.clone())?;
        let sq = g.square(spec)?;
        let re = g.slice(sq, Axis::Cols, 0, DFT_BINS)?;
        let im = g.slice(sq, Axis::Cols, DFT_BINS, DFT_BINS)?;
        let power = g.add(re, im)?;
        Ok(g.value(power).clone())
    }

    /// Forward-only features.
    pub fn features(&self, w: &Waveform) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(w.samples().to_vec()))?;
        let f = self.featurize(&mut g, x)?;
        Ok(g.value(f).clone())
    }
}
