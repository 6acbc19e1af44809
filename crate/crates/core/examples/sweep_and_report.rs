//! A small config-driven sweep over RVQ depths and radii, followed by the
//! depth-curve, correlation and baseline reports.
//!
//! Needs a model and codec on disk, e.g. from `rvqlab train-asr` and
//! `rvqlab train-codec`.
//!
//! ```bash
//! cargo run --release --example sweep_and_report -- model.bin codec.rvq out/
//! ```

use std::path::PathBuf;

use rvqlab::defense::{DefenseKind, RvqCodec};
use rvqlab::harness::{run_and_write, write_reports, ExperimentConfig, BPDA_DEPTH};
use rvqlab::signal::{CorpusSpec, Split};

fn main() -> rvqlab::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() != 3 {
        eprintln!("usage: sweep_and_report <model> <codec> <out-dir>");
        std::process::exit(1);
    }
    let out = PathBuf::from(&args[2]);
    let corpus = CorpusSpec {
        split: Split::Test,
        n_utts: 8,
        seed: 0,
    };
    let mut cfg = ExperimentConfig::new(corpus, &args[0], out.join("sweep"));
    cfg.codec = Some(PathBuf::from(&args[1]));
    // Shallow codecs only get the depths they have.
    let max_depth = RvqCodec::load(&args[1])?.max_depth();
    let compare_at = BPDA_DEPTH.min(max_depth);
    cfg.depths = Some([2, 4, 8, 16, 32].into_iter().filter(|&d| d <= max_depth).collect());
    cfg.epsilons = Some(vec![0.005, 0.02]);
    cfg.defenses = vec![
        DefenseKind::None,
        DefenseKind::Rvq(compare_at),
        DefenseKind::Median(5),
        DefenseKind::Resample(2),
    ];
    let table = run_and_write(&cfg)?;
    println!("{} rows, {} errors", table.records.len(), table.errors.len());
    print!("{}", table.aggregates_csv(false));

    let outcome = write_reports(&table.records, &out.join("reports"), compare_at, 0.02)?;
    println!("written {:?}", outcome.written);
    for (name, why) in &outcome.skipped {
        println!("skipped {name}: {why}");
    }
    Ok(())
}
