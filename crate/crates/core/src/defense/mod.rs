//! Input-transformation defenses: the depth-controlled RVQ codec and the
//! median-filter and resampling baselines.

mod baselines;
mod codec;
mod dct;
mod kmeans;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use baselines::{lowpass_taps, median_filter, resample, RESAMPLE_CUTOFF, RESAMPLE_TAPS};
pub use codec::{
    bitrate, train_codec, train_on_latents, CodecConfig, CodecReport, RvqCodec, TokenGrid, CODEBOOK_SIZE,
    MIN_FRAMES_PER_CENTROID, N_MAX,
};
pub use dct::Dct;
pub use kmeans::{kmeans, Codebook, KmeansOptions};

use crate::error::{invalid, Result};
use crate::signal::Waveform;

pub const DEFAULT_MEDIAN_WIDTH: usize = 5;

/// Written as `none`, `rvq:<n>`, `median:<w>` or `resample`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DefenseKind {
    None,
    Rvq(usize),
    Median(usize),
    Resample(usize),
}

impl DefenseKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DefenseKind::Rvq(n) if n == 0 || n > N_MAX => Err(invalid(format!("rvq depth {n} outside 1..={N_MAX}"))),
            DefenseKind::Median(w) if w < 3 || w % 2 == 0 => {
                Err(invalid(format!("median width must be odd and >= 3, got {w}")))
            }
            DefenseKind::Resample(r) if r != 2 => Err(invalid(format!("resample factor must be 2, got {r}"))),
            _ => Ok(()),
        }
    }

    pub fn needs_codec(&self) -> bool {
        matches!(self, DefenseKind::Rvq(_))
    }
}

impl fmt::Display for DefenseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefenseKind::None => write!(f, "none"),
            DefenseKind::Rvq(n) => write!(f, "rvq:{n}"),
            DefenseKind::Median(w) => write!(f, "median:{w}"),
            DefenseKind::Resample(_) => write!(f, "resample"),
        }
    }
}

impl FromStr for DefenseKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: &str| {
            a.parse::<usize>()
                .map_err(|_| invalid(format!("bad defense parameter {a:?} in {s:?}")))
        };
        let kind = match (name, arg) {
            ("none", None) => DefenseKind::None,
            ("rvq", Some(a)) => DefenseKind::Rvq(num(a)?),
            ("median", None) => DefenseKind::Median(DEFAULT_MEDIAN_WIDTH),
            ("median", Some(a)) => DefenseKind::Median(num(a)?),
            ("resample", None) => DefenseKind::Resample(2),
            ("resample", Some(a)) => DefenseKind::Resample(num(a)?),
            _ => {
                return Err(invalid(format!(
                    "unknown defense {s:?}; expected none, rvq:<n>, median:<w> or resample"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl Serialize for DefenseKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DefenseKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Run `w` through the defense. The codec is required for `rvq` only.
pub fn apply(kind: DefenseKind, w: &Waveform, codec: Option<&RvqCodec>) -> Result<Waveform> {
    kind.validate()?;
    match kind {
        DefenseKind::None => Ok(w.clone()),
        DefenseKind::Rvq(n) => {
            let codec = codec.ok_or_else(|| invalid("rvq defense needs a trained codec"))?;
            codec.roundtrip(w, n)
        }
        DefenseKind::Median(width) => median_filter(w, width),
        DefenseKind::Resample(r) => resample(w, r),
    }
}
