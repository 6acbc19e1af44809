use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackConfig, AttackKind};
use crate::defense::DefenseKind;
use crate::error::{invalid, Result};
use crate::signal::CorpusSpec;

pub const PGD_EPSILONS: [f64; 5] = [0.001, 0.005, 0.01, 0.02, 0.05];
pub const BPDA_EPSILONS: [f64; 2] = [0.01, 0.02];
/// Depth used for adaptive sweeps when none is given: 4.5 kbps.
pub const BPDA_DEPTH: usize = 9;

pub fn pgd_depths() -> Vec<usize> {
    (2..=32).step_by(2).collect()
}

/// One sweep, read from JSON. Absent lists take the defaults of the
/// chosen attack.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub model: PathBuf,
    #[serde(default)]
    pub codec: Option<PathBuf>,
    #[serde(default = "default_attack")]
    pub attack: AttackKind,
    /// RVQ depths, each becoming an `rvq:<n>` defense.
    #[serde(default)]
    pub depths: Option<Vec<usize>>,
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    /// Defenses evaluated next to the RVQ depths.
    #[serde(default = "default_defenses")]
    pub defenses: Vec<DefenseKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub eot_samples: Option<usize>,
    #[serde(default)]
    pub jitter_sigma: Option<f64>,
    /// Aggregate over seeds as well as utterances.
    #[serde(default)]
    pub pool_seeds: bool,
}

fn default_attack() -> AttackKind {
    AttackKind::Pgd
}

fn default_defenses() -> Vec<DefenseKind> {
    vec![DefenseKind::None]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    pub fn new(corpus: CorpusSpec, model: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus,
            model: model.into(),
            codec: None,
            attack: AttackKind::Pgd,
            depths: None,
            epsilons: None,
            defenses: default_defenses(),
            seeds: default_seeds(),
            output_dir: output_dir.into(),
            iterations: None,
            eot_samples: None,
            jitter_sigma: None,
            pool_seeds: false,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn resolved_depths(&self) -> Vec<usize> {
        self.depths.clone().unwrap_or_else(|| match self.attack {
            AttackKind::Pgd => pgd_depths(),
            AttackKind::Bpda => vec![BPDA_DEPTH],
        })
    }

    /// The configured radii with the clean baseline (zero) first.
    pub fn resolved_epsilons(&self) -> Vec<f64> {
        let mut eps = self.epsilons.clone().unwrap_or_else(|| match self.attack {
            AttackKind::Pgd => PGD_EPSILONS.to_vec(),
            AttackKind::Bpda => BPDA_EPSILONS.to_vec(),
        });
        eps.retain(|&e| e != 0.0);
        eps.insert(0, 0.0);
        eps
    }

    /// RVQ depths in order, then the other defenses, without repeats.
    pub fn resolved_defenses(&self) -> Vec<DefenseKind> {
        let mut out: Vec<DefenseKind> = Vec::new();
        let all = self.resolved_depths().into_iter().map(DefenseKind::Rvq).chain(self.defenses.iter().copied());
        for d in all {
            if !out.contains(&d) {
                out.push(d);
            }
        }
        out
    }

    pub fn attack_config(&self, eps: f64, seed: u64) -> AttackConfig {
        let base = AttackConfig::new(eps, seed);
        AttackConfig {
            iterations: self.iterations.unwrap_or(base.iterations),
            eot_samples: self.eot_samples.unwrap_or(base.eot_samples),
            jitter_sigma: self.jitter_sigma.unwrap_or(base.jitter_sigma),
            ..base
        }
    }

    /// Everything except file existence, which [`ExperimentConfig::check_paths`]
    /// covers.
    pub fn validate(&self) -> Result<()> {
        let defenses = self.resolved_defenses();
        if self.seeds.is_empty() || defenses.is_empty() || self.epsilons.as_ref().is_some_and(|e| e.is_empty()) {
            return Err(invalid("seed, defense and epsilon lists must not be empty"));
        }
        if let Some(e) = self.resolved_epsilons().iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(invalid(format!("epsilon {e} is not a finite non-negative number")));
        }
        for d in &defenses {
            d.validate()?;
        }
        if defenses.iter().any(|d| d.needs_codec()) && self.codec.is_none() {
            return Err(invalid("rvq defenses need a codec path"));
        }
        self.attack_config(0.01, 0).validate()
    }

    pub fn check_paths(&self) -> Result<()> {
        let paths = std::iter::once(&self.model).chain(self.codec.iter());
        for p in paths {
            if !p.exists() {
                return Err(invalid(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
