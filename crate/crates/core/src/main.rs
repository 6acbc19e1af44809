use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use rvqlab::asr::{train_asr, AcousticModel, TrainConfig};
use rvqlab::attack::{bpda_eot, pgd, AttackConfig, AttackKind, AttackLogEntry};
use rvqlab::defense::{train_codec, CodecConfig, DefenseKind, RvqCodec};
use rvqlab::harness::{self, ExperimentConfig, SweepTable, BPDA_DEPTH};
use rvqlab::metrics::wer;
use rvqlab::signal::{gen_corpus, write_wav, Split};

#[derive(Parser)]
#[command(name = "rvqlab", version, about = "RVQ depth as a defense against gradient attacks on a toy recognizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a corpus split to WAV files plus a manifest.
    GenCorpus {
        #[arg(long, default_value = "train")]
        split: Split,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the CTC recognizer on a synthetic train split.
    TrainAsr {
        #[arg(long, default_value_t = 2000)]
        n_train: usize,
        #[arg(long, default_value_t = 200)]
        n_dev: usize,
        #[arg(long, default_value_t = 0)]
        corpus_seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the RVQ codec on a synthetic train split.
    TrainCodec {
        #[arg(long, default_value_t = 2000)]
        n_train: usize,
        #[arg(long, default_value_t = 0)]
        corpus_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_frames: Option<usize>,
        /// Number of quantizer stages, at most 32.
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attack test utterances and write adversarial WAVs and a JSON-lines log.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        codec: Option<PathBuf>,
        #[arg(long, default_value = "pgd")]
        kind: AttackKind,
        #[arg(long, default_value = "none")]
        defense: DefenseKind,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        corpus_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iters: Option<usize>,
        /// EOT draws per step (bpda only).
        #[arg(long)]
        eot_k: Option<usize>,
        /// EOT jitter standard deviation (bpda only).
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Build depth curves, correlation and baseline table from a sweep.
    Report {
        /// Sweep output directory holding records.csv.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = BPDA_DEPTH)]
        depth: usize,
        #[arg(long, default_value_t = 0.02)]
        eps: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::GenCorpus { split, n, seed, out } => {
            let corpus = gen_corpus(split, n, seed)?;
            let manifest = corpus.write(&out)?;
            println!("{}", manifest.display());
        }
        Command::TrainAsr {
            n_train,
            n_dev,
            corpus_seed,
            epochs,
            lr,
            seed,
            out,
        } => {
            let defaults = TrainConfig::default();
            let cfg = TrainConfig {
                epochs: epochs.unwrap_or(defaults.epochs),
                lr: lr.unwrap_or(defaults.lr),
                seed: seed.unwrap_or(defaults.seed),
                ..defaults
            };
            let train = gen_corpus(Split::Train, n_train, corpus_seed)?;
            let dev = if n_dev > 0 {
                Some(gen_corpus(Split::Dev, n_dev, corpus_seed)?)
            } else {
                None
            };
            let (model, report) = train_asr(&train, dev.as_ref(), &cfg)?;
            model.save(&out)?;
            fs::write(out.with_extension("report.json"), serde_json::to_string_pretty(&report)?)?;
            println!("dev wer {:?}", report.final_dev_wer());
        }
        Command::TrainCodec {
            n_train,
            corpus_seed,
            seed,
            max_frames,
            stages,
            out,
        } => {
            let defaults = CodecConfig::default();
            let cfg = CodecConfig {
                stages: stages.unwrap_or(defaults.stages),
                seed,
                max_frames: max_frames.or(defaults.max_frames),
                ..defaults
            };
            let train = gen_corpus(Split::Train, n_train, corpus_seed)?;
            let (codec, report) = train_codec(&train, &cfg)?;
            codec.save(&out)?;
            fs::write(out.with_extension("report.json"), serde_json::to_string_pretty(&report)?)?;
            println!("final residual energy {:?}", report.residual_energy.last());
        }
        Command::Attack {
            model,
            codec,
            kind,
            defense,
            eps,
            n,
            corpus_seed,
            seed,
            iters,
            eot_k,
            sigma,
            out,
        } => {
            let model = AcousticModel::load(&model)?;
            let codec = codec.map(RvqCodec::load).transpose()?;
            let corpus = gen_corpus(Split::Test, n, corpus_seed)?;
            let mut cfg = AttackConfig::new(eps, seed);
            cfg.iterations = iters.unwrap_or(cfg.iterations);
            cfg.eot_samples = eot_k.unwrap_or(cfg.eot_samples);
            cfg.jitter_sigma = sigma.unwrap_or(cfg.jitter_sigma);
            cfg.validate()?;
            fs::create_dir_all(&out)?;
            let mut log = String::new();
            for u in &corpus.utterances {
                let r = match kind {
                    AttackKind::Pgd => pgd(&model, &u.waveform, &u.transcript, &cfg)?,
                    AttackKind::Bpda => bpda_eot(&model, defense, codec.as_ref(), &u.waveform, &u.transcript, &cfg)?,
                };
                let wav = out.join(format!("{}-adv.wav", u.id));
                write_wav(&wav, &r.adversarial)?;
                let hyp = model.transcribe(&r.adversarial)?;
                info!("{}: loss {:.3} -> {:.3}, undefended wer {:.3}", u.id, r.loss_trace[0], r.final_loss(), wer(&u.transcript, &hyp)?);
                let entry = AttackLogEntry {
                    id: u.id.clone(),
                    eps,
                    kind,
                    defense,
                    final_loss: r.final_loss(),
                    delta_linf: r.delta_linf(),
                    adv_wav_path: Some(wav.display().to_string()),
                };
                log.push_str(&serde_json::to_string(&entry)?);
                log.push('\n');
            }
            fs::write(out.join("attack_log.jsonl"), log)?;
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let table = harness::run_and_write(&cfg)?;
            println!(
                "{} rows, {} failed, written to {}",
                table.records.len(),
                table.errors.len(),
                cfg.output_dir.display()
            );
            if !table.errors.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report { dir, out, depth, eps } => {
            let path = dir.join(harness::files::RECORDS);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let table = SweepTable::from_records_csv(&text)?;
            if table.records.is_empty() {
                bail!("{} has no rows", path.display());
            }
            let outcome = harness::write_reports(&table.records, &out.unwrap_or(dir), depth, eps)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
