use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::asr::AcousticModel;
use crate::attack::{bpda_eot, pgd, AttackKind};
use crate::defense::{apply, DefenseKind, RvqCodec, TokenGrid};
use crate::error::{invalid, Error, Result};
use crate::metrics::{ccr, delta_wer, mean_sem, snr, wer, EvalRecord, CSV_HEADER};
use crate::signal::{Corpus, Utterance, Waveform};

/// Worker count override.
pub const WORKERS_ENV: &str = "RVQLAB_WORKERS";

pub const ERRORS_HEADER: &str = "id,defense,eps,attack,seed,code,message";

pub const AGGREGATE_HEADER: &str = "defense,depth,eps,attack,seed,n,wer_clean_mean,wer_clean_sem,wer_adv_mean,\
wer_adv_sem,delta_wer_mean,delta_wer_sem,ccr_mean,ccr_sem,snr_db_mean,snr_db_sem";

/// A row that could not be produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub id: String,
    pub defense: DefenseKind,
    pub eps: f64,
    pub attack: AttackKind,
    pub seed: u64,
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug)]
struct Failure {
    code: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

/// Mean and standard error over the rows of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub defense: DefenseKind,
    pub eps: f64,
    pub attack: AttackKind,
    /// `None` when seeds are pooled.
    pub seed: Option<u64>,
    pub n: usize,
    pub wer_clean: (f64, f64),
    pub wer_adv: (f64, f64),
    pub delta_wer: (f64, f64),
    pub ccr: Option<(f64, f64)>,
    pub snr_db: (f64, f64),
}

impl Aggregate {
    fn to_csv_row(&self) -> String {
        let depth = match self.defense {
            DefenseKind::Rvq(n) => n.to_string(),
            _ => String::new(),
        };
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        let ccr = self.ccr.map(|(m, s)| format!("{m},{s}")).unwrap_or_else(|| ",".into());
        format!(
            "{},{depth},{},{},{seed},{},{},{},{},{},{},{},{ccr},{},{}",
            self.defense,
            self.eps,
            self.attack,
            self.n,
            self.wer_clean.0,
            self.wer_clean.1,
            self.wer_adv.0,
            self.wer_adv.1,
            self.delta_wer.0,
            self.delta_wer.1,
            self.snr_db.0,
            self.snr_db.1
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub records: Vec<EvalRecord>,
    pub errors: Vec<RowError>,
}

impl SweepTable {
    pub fn records_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.to_csv_row());
            s.push('\n');
        }
        s
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::from(ERRORS_HEADER);
        s.push('\n');
        for e in &self.errors {
            let message = e.message.replace([',', '\n'], ";");
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.id, e.defense, e.eps, e.attack, e.seed, e.code, message
            ));
        }
        s
    }

    /// Parse a records CSV as written by [`SweepTable::records_csv`].
    pub fn from_records_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => return Err(invalid(format!("unexpected CSV header {other:?}"))),
        }
        let records = lines
            .filter(|l| !l.is_empty())
            .map(EvalRecord::from_csv_row)
            .collect::<Result<_>>()?;
        Ok(Self {
            records,
            errors: Vec::new(),
        })
    }

    /// One aggregate per (defense, eps, attack[, seed]) in first-seen order.
    pub fn aggregates(&self, pool_seeds: bool) -> Vec<Aggregate> {
        aggregate(&self.records, pool_seeds)
    }

    pub fn aggregates_csv(&self, pool_seeds: bool) -> String {
        let mut s = String::from(AGGREGATE_HEADER);
        s.push('\n');
        for a in self.aggregates(pool_seeds) {
            s.push_str(&a.to_csv_row());
            s.push('\n');
        }
        s
    }
}

pub fn aggregate(records: &[EvalRecord], pool_seeds: bool) -> Vec<Aggregate> {
    let mut order: Vec<(DefenseKind, u64, AttackKind, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(DefenseKind, u64, AttackKind, Option<u64>), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.defense, r.eps.to_bits(), r.attack, (!pool_seeds).then_some(r.seed));
        let group = groups.entry(key).or_default();
        if group.is_empty() {
            order.push(key);
        }
        group.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let col = |f: &dyn Fn(&EvalRecord) -> f64| mean_sem(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let ccr = if rows.iter().all(|r| r.ccr.is_some()) {
                Some(col(&|r| r.ccr.unwrap_or(0.0)))
            } else {
                None
            };
            Aggregate {
                defense: key.0,
                eps: f64::from_bits(key.1),
                attack: key.2,
                seed: key.3,
                n: rows.len(),
                wer_clean: col(&|r| r.wer_clean),
                wer_adv: col(&|r| r.wer_adv),
                delta_wer: col(&|r| r.delta_wer),
                ccr,
                snr_db: col(&|r| r.snr_db),
            }
        })
        .collect()
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// A defended signal and, for RVQ, its tokens.
#[derive(Clone)]
struct Defended {
    wave: Waveform,
    tokens: Option<TokenGrid>,
}

/// Run `w` through every defense. RVQ depths share one encoding at the
/// deepest requested depth and decode its prefixes.
fn defend_all(defenses: &[DefenseKind], codec: Option<&RvqCodec>, w: &Waveform) -> Vec<Result<Defended, Failure>> {
    let deepest = defenses
        .iter()
        .filter_map(|d| match d {
            DefenseKind::Rvq(n) => Some(*n),
            _ => None,
        })
        .max();
    let full: Option<Result<TokenGrid, Failure>> = deepest.map(|n| {
        let codec = codec.ok_or_else(|| invalid("rvq defense needs a trained codec"))?;
        Ok(codec.encode(w, n)?)
    });
    defenses
        .iter()
        .map(|&d| match d {
            DefenseKind::Rvq(n) => {
                let full = full.as_ref().expect("deepest depth exists").clone()?;
                let tokens = full.prefix(n)?;
                let codec = codec.expect("encode succeeded with a codec");
                Ok(Defended {
                    wave: codec.decode(&tokens)?,
                    tokens: Some(tokens),
                })
            }
            other => Ok(Defended {
                wave: apply(other, w, codec)?,
                tokens: None,
            }),
        })
        .collect()
}

struct CleanSide {
    defended: Defended,
    wer: f64,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    model: &'a AcousticModel,
    codec: Option<&'a RvqCodec>,
    defenses: Vec<DefenseKind>,
}

impl Context<'_> {
    fn clean_side(&self, utt: &Utterance) -> Vec<Result<CleanSide, Failure>> {
        defend_all(&self.defenses, self.codec, &utt.waveform)
            .into_iter()
            .map(|d| {
                let d = d?;
                let hyp = self.model.transcribe(&d.wave)?;
                Ok(CleanSide {
                    wer: wer(&utt.transcript, &hyp)?,
                    defended: d,
                })
            })
            .collect()
    }

    fn record(
        &self,
        utt: &Utterance,
        defense: DefenseKind,
        eps: f64,
        seed: u64,
        clean: &CleanSide,
        adv: &Defended,
    ) -> Result<EvalRecord, Failure> {
        let hyp = self.model.transcribe(&adv.wave)?;
        let ccr = match (&clean.defended.tokens, &adv.tokens) {
            (Some(c), Some(a)) => Some(ccr(c, a)?),
            _ => None,
        };
        let r = EvalRecord {
            id: utt.id.clone(),
            defense,
            eps,
            attack: self.config.attack,
            wer_clean: clean.wer,
            wer_adv: wer(&utt.transcript, &hyp)?,
            delta_wer: 0.0,
            ccr,
            snr_db: snr(&utt.waveform, &adv.wave)?,
            seed,
        };
        r.validate()?;
        Ok(r)
    }

    /// Rows for one utterance at one (eps, seed). PGD attacks once and
    /// reuses the adversarial signal for every defense; BPDA attacks each
    /// defense separately.
    fn job(
        &self,
        utt: &Utterance,
        clean: &[Result<CleanSide, Failure>],
        eps: f64,
        seed: u64,
    ) -> Vec<(DefenseKind, Result<EvalRecord, Failure>)> {
        let cfg = self.config.attack_config(eps, seed);
        let adv_sides: Vec<Result<Defended, Failure>> = if eps == 0.0 {
            clean
                .iter()
                .map(|c| c.as_ref().map(|c| c.defended.clone()).map_err(Clone::clone))
                .collect()
        } else {
            match self.config.attack {
                AttackKind::Pgd => match pgd(self.model, &utt.waveform, &utt.transcript, &cfg) {
                    Ok(r) => defend_all(&self.defenses, self.codec, &r.adversarial),
                    Err(e) => {
                        let f = Failure::from(e);
                        vec![Err(f); self.defenses.len()]
                    }
                },
                AttackKind::Bpda => self
                    .defenses
                    .iter()
                    .map(|&d| {
                        let r = bpda_eot(self.model, d, self.codec, &utt.waveform, &utt.transcript, &cfg)?;
                        let mut one = defend_all(&[d], self.codec, &r.adversarial);
                        one.pop().expect("one defense")
                    })
                    .collect(),
            }
        };
        self.defenses
            .iter()
            .zip(clean)
            .zip(adv_sides)
            .map(|((&d, c), a)| {
                let row = (|| {
                    let c = c.as_ref().map_err(Clone::clone)?;
                    self.record(utt, d, eps, seed, c, &a?)
                })();
                (d, row)
            })
            .collect()
    }
}

/// Load the corpus, model and codec named by `config` and sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    config.validate()?;
    config.check_paths()?;
    let corpus = Corpus::from_spec(&config.corpus)?;
    let model = AcousticModel::load(&config.model)?;
    let codec = config.codec.as_ref().map(RvqCodec::load).transpose()?;
    run_sweep_with(config, &model, codec.as_ref(), &corpus)
}

/// Sweep already-loaded artifacts. Rows come out ordered by epsilon, seed,
/// utterance and defense whatever the worker count.
pub fn run_sweep_with(
    config: &ExperimentConfig,
    model: &AcousticModel,
    codec: Option<&RvqCodec>,
    corpus: &Corpus,
) -> Result<SweepTable> {
    config.validate()?;
    let ctx = Context {
        config,
        model,
        codec,
        defenses: config.resolved_defenses(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    let utts = &corpus.utterances;
    let eps_list = config.resolved_epsilons();
    let jobs: Vec<(f64, u64, usize)> = eps_list
        .iter()
        .flat_map(|&e| config.seeds.iter().flat_map(move |&s| (0..utts.len()).map(move |u| (e, s, u))))
        .collect();
    info!(
        "sweep: {} utterances, {} defenses, {} epsilons, {} seeds, {} jobs",
        utts.len(),
        ctx.defenses.len(),
        eps_list.len(),
        config.seeds.len(),
        jobs.len()
    );

    let results = pool.install(|| {
        let clean: Vec<Vec<Result<CleanSide, Failure>>> = utts.par_iter().map(|u| ctx.clean_side(u)).collect();
        jobs.par_iter()
            .map(|&(eps, seed, u)| ctx.job(&utts[u], &clean[u], eps, seed))
            .collect::<Vec<_>>()
    });

    let mut table = SweepTable::default();
    for (&(eps, seed, u), rows) in jobs.iter().zip(results) {
        for (defense, row) in rows {
            match row {
                Ok(r) => table.records.push(r),
                Err(f) => {
                    warn!("{} {defense} eps {eps} seed {seed}: {}", utts[u].id, f.message);
                    table.errors.push(RowError {
                        id: utts[u].id.clone(),
                        defense,
                        eps,
                        attack: config.attack,
                        seed,
                        code: f.code.to_string(),
                        message: f.message,
                    });
                }
            }
        }
    }
    fill_delta_wer(&mut table);
    Ok(table)
}

/// Set `delta_wer` on every record; rows whose baseline is missing move to
/// the error list.
fn fill_delta_wer(table: &mut SweepTable) {
    let deltas: Vec<Result<f64>> = table.records.iter().map(|r| delta_wer(r, &table.records)).collect();
    let records = std::mem::take(&mut table.records);
    for (mut r, d) in records.into_iter().zip(deltas) {
        match d {
            Ok(d) => {
                r.delta_wer = d;
                table.records.push(r);
            }
            Err(e) => table.errors.push(RowError {
                id: r.id,
                defense: r.defense,
                eps: r.eps,
                attack: r.attack,
                seed: r.seed,
                code: e.code().to_string(),
                message: e.to_string(),
            }),
        }
    }
}

/// Output file names inside the sweep directory.
pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const RECORDS: &str = "records.csv";
    pub const ERRORS: &str = "errors.csv";
    pub const AGGREGATES: &str = "aggregates.csv";
    pub const METADATA: &str = "metadata.json";
}

#[derive(Serialize)]
struct Metadata {
    version: &'static str,
    finished_unix_secs: u64,
    elapsed_secs: f64,
    workers: usize,
    rows: usize,
    failed_rows: usize,
}

/// Run the sweep and write config echo, records, errors and aggregates to
/// the output directory. Wall-clock data goes only to the metadata file.
pub fn run_and_write(config: &ExperimentConfig) -> Result<SweepTable> {
    let start = Instant::now();
    let table = run_sweep(config)?;
    write_outputs(config, &table, &config.output_dir)?;
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        finished_unix_secs: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        elapsed_secs: start.elapsed().as_secs_f64(),
        workers: worker_count(),
        rows: table.records.len(),
        failed_rows: table.errors.len(),
    };
    fs::write(config.output_dir.join(files::METADATA), serde_json::to_string_pretty(&meta)?)?;
    Ok(table)
}

pub fn write_outputs(config: &ExperimentConfig, table: &SweepTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(files::CONFIG), serde_json::to_string_pretty(config)? + "\n")?;
    fs::write(dir.join(files::RECORDS), table.records_csv())?;
    fs::write(dir.join(files::ERRORS), table.errors_csv())?;
    fs::write(dir.join(files::AGGREGATES), table.aggregates_csv(config.pool_seeds))?;
    Ok(())
}
