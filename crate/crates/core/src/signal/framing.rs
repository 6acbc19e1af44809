use std::f64::consts::PI;

use super::Waveform;
use crate::error::{invalid, Result};

pub const FRAME_LEN: usize = 512;
pub const HOP: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    SqrtHann,
    Rectangular,
}

/// Square root of the periodic Hann window. Its square overlap-adds to
/// exactly one at 50% hop.
pub fn sqrt_hann(width: usize) -> Vec<f64> {
    (0..width)
        .map(|n| (0.5 - 0.5 * (2.0 * PI * n as f64 / width as f64).cos()).max(0.0).sqrt())
        .collect()
}

fn window(kind: WindowKind, width: usize) -> Vec<f64> {
    match kind {
        WindowKind::SqrtHann => sqrt_hann(width),
        WindowKind::Rectangular => vec![1.0; width],
    }
}

/// Where frames sit relative to the source samples.
///
/// Frame `f` covers padded positions `[f*hop, f*hop + width)`; padded
/// position `p` maps to source sample `p - front_pad` when that is in range
/// and to zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameLayout {
    pub width: usize,
    pub hop: usize,
    pub front_pad: usize,
    pub frames: usize,
    pub source_len: usize,
}

impl FrameLayout {
    /// Tail padding to a multiple of `hop` only.
    pub fn plain(source_len: usize, width: usize, hop: usize) -> Result<Self> {
        Self::build(source_len, width, hop, 0)
    }

    /// Both ends padded by `width - hop` so every source sample lies in at
    /// least two frames, then the tail padded to a multiple of `hop`. Used by
    /// the recognizer front end and the codec.
    pub fn analysis(source_len: usize) -> Result<Self> {
        Self::build(source_len, FRAME_LEN, HOP, FRAME_LEN - HOP)
    }

    fn build(source_len: usize, width: usize, hop: usize, edge_pad: usize) -> Result<Self> {
        if !width.is_power_of_two() || !hop.is_power_of_two() || hop > width {
            return Err(invalid(format!(
                "frame width {width} and hop {hop} must be powers of two with hop <= width"
            )));
        }
        let padded = source_len + 2 * edge_pad;
        let padded = padded.div_ceil(hop) * hop;
        if padded < width {
            return Err(invalid(format!(
                "signal of {source_len} samples is shorter than one {width}-sample frame"
            )));
        }
        Ok(Self {
            width,
            hop,
            front_pad: edge_pad,
            frames: (padded - width) / hop + 1,
            source_len,
        })
    }

    pub fn padded_len(&self) -> usize {
        (self.frames - 1) * self.hop + self.width
    }

    /// Source index for frame `f`, tap `j`, if it falls inside the signal.
    #[inline]
    pub fn source_index(&self, f: usize, j: usize) -> Option<usize> {
        (f * self.hop + j)
            .checked_sub(self.front_pad)
            .filter(|&i| i < self.source_len)
    }

    /// Windowed frames, row-major `frames x width`.
    pub fn extract(&self, samples: &[f64], win: &[f64]) -> Vec<f64> {
        debug_assert_eq!(samples.len(), self.source_len);
        let mut out = vec![0.0; self.frames * self.width];
        for f in 0..self.frames {
            let row = &mut out[f * self.width..(f + 1) * self.width];
            for (j, v) in row.iter_mut().enumerate() {
                if let Some(i) = self.source_index(f, j) {
                    *v = samples[i] * win[j];
                }
            }
        }
        out
    }

    /// Window each row with `win`, overlap-add, and crop to the source span.
    pub fn synthesize(&self, rows: &[f64], win: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rows.len(), self.frames * self.width);
        let mut out = vec![0.0; self.source_len];
        for f in 0..self.frames {
            let row = &rows[f * self.width..(f + 1) * self.width];
            for (j, v) in row.iter().enumerate() {
                if let Some(i) = self.source_index(f, j) {
                    out[i] += v * win[j];
                }
            }
        }
        out
    }
}

/// `frames x width` matrix of windowed frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrix {
    pub data: Vec<f64>,
    pub layout: FrameLayout,
    pub window: WindowKind,
}

impl FrameMatrix {
    pub fn frames(&self) -> usize {
        self.layout.frames
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn hop(&self) -> usize {
        self.layout.hop
    }

    pub fn row(&self, f: usize) -> &[f64] {
        &self.data[f * self.layout.width..(f + 1) * self.layout.width]
    }
}

/// Split a waveform into 512-sample sqrt-Hann frames at hop 256, padding the
/// tail with zeros to a multiple of the hop.
pub fn frame(w: &Waveform) -> Result<FrameMatrix> {
    frame_with(w, FRAME_LEN, HOP, WindowKind::SqrtHann)
}

pub fn frame_with(w: &Waveform, width: usize, hop: usize, window_kind: WindowKind) -> Result<FrameMatrix> {
    let layout = FrameLayout::plain(w.len(), width, hop)?;
    let win = window(window_kind, width);
    Ok(FrameMatrix {
        data: layout.extract(w.samples(), &win),
        layout,
        window: window_kind,
    })
}

/// Inverse of [`frame`]: sqrt-Hann synthesis window and overlap-add.
/// Identity on the interior of the signal.
pub fn overlap_add(fm: &FrameMatrix) -> Result<Waveform> {
    if fm.window != WindowKind::SqrtHann || fm.layout.hop * 2 != fm.layout.width {
        return Err(invalid(format!(
            "overlap_add needs sqrt-Hann frames at 50% hop, got {:?} width {} hop {}",
            fm.window, fm.layout.width, fm.layout.hop
        )));
    }
    let win = sqrt_hann(fm.layout.width);
    Waveform::new(fm.layout.synthesize(&fm.data, &win))
}
