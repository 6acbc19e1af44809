use std::sync::OnceLock;

use crate::error::{invalid, Result};
use crate::signal::Waveform;

pub const RESAMPLE_TAPS: usize = 120;
/// Low-pass cutoff as a fraction of the input Nyquist frequency.
pub const RESAMPLE_CUTOFF: f64 = 0.45;

/// Running median of odd width `width`. Near the edges the window shrinks
/// symmetrically so it stays centred and odd.
pub fn median_filter(w: &Waveform, width: usize) -> Result<Waveform> {
    if width < 3 || width.is_multiple_of(2) {
        return Err(invalid(format!("median width must be odd and >= 3, got {width}")));
    }
    let x = w.samples();
    let half = width / 2;
    let mut buf = Vec::with_capacity(width);
    let out = (0..x.len())
        .map(|i| {
            let h = half.min(i).min(x.len() - 1 - i);
            buf.clear();
            buf.extend_from_slice(&x[i - h..=i + h]);
            let mid = buf.len() / 2;
            *buf.select_nth_unstable_by(mid, f64::total_cmp).1
        })
        .collect();
    Waveform::new(out)
}

/// Hamming-windowed sinc low-pass with unit DC gain.
pub fn lowpass_taps() -> &'static [f64] {
    static TAPS: OnceLock<Vec<f64>> = OnceLock::new();
    TAPS.get_or_init(|| {
        let n = RESAMPLE_TAPS;
        let fc = RESAMPLE_CUTOFF / 2.0;
        let centre = (n - 1) as f64 / 2.0;
        let mut h: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 - centre;
                let sinc = if t == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
                };
                let win = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
                sinc * win
            })
            .collect();
        let dc: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= dc);
        h
    })
}

/// `y[n] = gain * sum_k h[k] x[n + lead - k]`, zero outside the signal.
fn fir(x: &[f64], h: &[f64], lead: usize, gain: f64) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let mut s = 0.0;
            for (k, &c) in h.iter().enumerate() {
                if let Some(i) = (n + lead).checked_sub(k) {
                    if i < x.len() {
                        s += c * x[i];
                    }
                }
            }
            gain * s
        })
        .collect()
}

/// Low-pass, keep even samples, zero-stuff back to the original rate and
/// low-pass again with gain 2. The two filters' combined 119-sample delay
/// is removed so the output stays aligned with the input.
pub fn resample(w: &Waveform, factor: usize) -> Result<Waveform> {
    if factor != 2 {
        return Err(invalid(format!("only resample factor 2 is supported, got {factor}")));
    }
    let h = lowpass_taps();
    let delay = RESAMPLE_TAPS - 1;
    let first = delay / 2;
    let filtered = fir(w.samples(), h, first, 1.0);
    let stuffed: Vec<f64> = filtered
        .iter()
        .enumerate()
        .map(|(i, &v)| if i % 2 == 0 { v } else { 0.0 })
        .collect();
    let out = fir(&stuffed, h, delay - first, 2.0);
    Ok(Waveform::new(out)?.clipped())
}
