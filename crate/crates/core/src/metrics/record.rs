use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attack::AttackKind;
use crate::defense::DefenseKind;
use crate::error::{invalid, Error, Result};

pub const CSV_HEADER: &str = "id,defense,depth,eps,attack,wer_clean,wer_adv,delta_wer,ccr,snr_db,seed";

/// Metrics for one utterance under one (defense, epsilon, attack, seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub defense: DefenseKind,
    pub eps: f64,
    pub attack: AttackKind,
    /// WER of the clean signal through the same defense.
    pub wer_clean: f64,
    pub wer_adv: f64,
    pub delta_wer: f64,
    /// Only defined for RVQ defenses.
    pub ccr: Option<f64>,
    pub snr_db: f64,
    pub seed: u64,
}

impl EvalRecord {
    pub fn depth(&self) -> Option<usize> {
        match self.defense {
            DefenseKind::Rvq(n) => Some(n),
            _ => None,
        }
    }

    pub fn key(&self) -> (String, String, u64, AttackKind, u64) {
        (self.id.clone(), self.defense.to_string(), self.eps.to_bits(), self.attack, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.wer_clean < 0.0 || self.wer_adv < 0.0 {
            return Err(invalid(format!("negative WER in record {}", self.id)));
        }
        if let Some(c) = self.ccr {
            if !(0.0..=1.0).contains(&c) {
                return Err(invalid(format!("ccr {c} outside [0, 1] in record {}", self.id)));
            }
        }
        Ok(())
    }

    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        let depth = self.depth().map(|d| d.to_string()).unwrap_or_default();
        let ccr = self.ccr.map(|c| c.to_string()).unwrap_or_default();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.id,
            self.defense,
            depth,
            self.eps,
            self.attack,
            self.wer_clean,
            self.wer_adv,
            self.delta_wer,
            ccr,
            self.snr_db,
            self.seed
        )
        .expect("string write");
        s
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(invalid(format!("expected 11 CSV fields, got {}: {line:?}", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse::<f64>()
                .map_err(|_| invalid(format!("field {i} is not a number: {:?}", f[i])))
        };
        Ok(Self {
            id: f[0].to_string(),
            defense: f[1].parse()?,
            eps: num(3)?,
            attack: f[4].parse()?,
            wer_clean: num(5)?,
            wer_adv: num(6)?,
            delta_wer: num(7)?,
            ccr: if f[8].is_empty() { None } else { Some(num(8)?) },
            snr_db: num(9)?,
            seed: f[10]
                .parse()
                .map_err(|_| invalid(format!("seed is not an integer: {:?}", f[10])))?,
        })
    }
}

/// `wer_adv` minus the WER of the epsilon-zero record for the same
/// utterance, defense and seed. Negative values are kept.
pub fn delta_wer(record: &EvalRecord, table: &[EvalRecord]) -> Result<f64> {
    let baseline = table
        .iter()
        .find(|r| r.eps == 0.0 && r.id == record.id && r.defense == record.defense && r.seed == record.seed)
        .ok_or_else(|| {
            Error::MissingBaseline(format!("{} / {} / seed {}", record.id, record.defense, record.seed))
        })?;
    Ok(record.wer_adv - baseline.wer_adv)
}
