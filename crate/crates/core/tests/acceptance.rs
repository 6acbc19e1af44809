//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Trains the recognizer and codec from scratch, so a full run takes tens of
//! minutes on one core. Sweep outputs and reports land in
//! `$CARGO_TARGET_TMPDIR/acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rvqlab::asr::{ctc_loss, ctc_nll, min_frames, train_asr, AcousticModel, TrainConfig, BLANK, NUM_CLASSES};
use rvqlab::attack::AttackKind;
use rvqlab::autodiff::{grad_check, Axis, Graph, Tensor, Var};
use rvqlab::defense::{train_codec, CodecConfig, CodecReport, DefenseKind, Dct, RvqCodec};
use rvqlab::harness::{self, pgd_depths, run_sweep_with, ExperimentConfig, SweepTable};
use rvqlab::metrics::{mean_sem, EvalRecord};
use rvqlab::signal::{
    gen_corpus, sqrt_hann, synth_utterance, Corpus, CorpusSpec, FrameLayout, Split, TokenSequence, Waveform, FRAME_LEN,
};

const N_TRAIN: usize = 2000;
const N_DEV: usize = 200;
const N_TEST: usize = 100;
/// BPDA+EOT costs about 25 s per utterance over the three defenses.
const N_BPDA: usize = 24;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EPS: f64 = 0.02;
const CCR_DEPTHS: [usize; 5] = [2, 4, 8, 16, 32];
const CCR_EPS: [f64; 2] = [0.005, 0.02];

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn verdict(id: usize, pass: bool, detail: String) -> Verdict {
    println!("criterion {id:2}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
    Verdict { id, pass, detail }
}

fn rel_err_suite() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut rand_t = |shape: &[usize]| {
        let n = shape.iter().product();
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-1.5..1.5);
                // Keep relu inputs off the kink.
                if x.abs() < 0.05 {
                    0.05f64.copysign(x)
                } else {
                    x
                }
            })
            .collect();
        Tensor::new(shape.to_vec(), v).unwrap()
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x0 = rand_t(&[4, 6]);
        let w = rand_t(&[6, 3]);
        let m = Arc::new(rand_t(&[6, 6]));
        let bias = rand_t(&[6]);
        let c = rand_t(&[4, 6]);
        type Case<'a> = Box<dyn Fn(&mut Graph, Var) -> rvqlab::Result<Var> + 'a>;
        let cases: Vec<Case> = vec![
            Box::new(|g, x| {
                let wv = g.leaf(w.clone())?;
                let y = g.matmul(x, wv)?;
                let s = g.square(y)?;
                g.sum(s)
            }),
            Box::new(|g, x| {
                let y = g.fixed_matmul(x, m.clone())?;
                let s = g.square(y)?;
                g.mean(s)
            }),
            Box::new(|g, x| {
                let b = g.leaf(bias.clone())?;
                let y = g.add(x, b)?;
                let y = g.mul(y, b)?;
                let s = g.square(y)?;
                g.sum(s)
            }),
            Box::new(|g, x| {
                let y = g.relu(x)?;
                let k = g.leaf(c.clone())?;
                let z = g.mul(y, k)?;
                g.sum(z)
            }),
            Box::new(|g, x| {
                let s = g.square(x)?;
                let s = g.add_const(s, 0.5)?;
                let y = g.log(s)?;
                let e = g.exp(x)?;
                let z = g.mul(y, e)?;
                g.sum(z)
            }),
            Box::new(|g, x| {
                let a = g.slice(x, Axis::Cols, 1, 3)?;
                let b = g.slice(x, Axis::Rows, 0, 2)?;
                let b = g.slice(b, Axis::Cols, 2, 3)?;
                let cc = g.concat(&[a, b], Axis::Rows)?;
                let d = g.scale(cc, -1.5)?;
                let s = g.square(d)?;
                g.sum(s)
            }),
            Box::new(|g, x| {
                let y = g.log_softmax(x)?;
                let k = g.leaf(c.clone())?;
                let z = g.mul(y, k)?;
                g.sum(z)
            }),
        ];
        for f in &cases {
            worst = worst.max(grad_check(|g, x| f(g, x), &x0, 1e-5).unwrap());
        }
    }
    worst
}

fn criterion_1() -> Verdict {
    let t0 = Instant::now();
    let ops = rel_err_suite();
    let model = AcousticModel::init(3);
    let mut ctc = 0.0f64;
    for seed in 0..5u64 {
        let t = TokenSequence(vec![1 + seed as usize, 4, 7]);
        let w = synth_utterance(&t, seed).unwrap();
        let excerpt = Tensor::vector(w.samples()[600..2400].to_vec());
        let target = TokenSequence(vec![1 + seed as usize]);
        let err = grad_check(
            |g, x| {
                let p = model.params().bind(g)?;
                let l = model.logits_graph(g, &p, x)?;
                ctc_loss(g, l, &target)
            },
            &excerpt,
            1e-6,
        )
        .unwrap();
        ctc = ctc.max(err);
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        ops <= 1e-6 && ctc <= 1e-4 && secs < 60.0,
        format!("op suite max rel err {ops:.2e} (<= 1e-6), dctc/dsamples {ctc:.2e} (<= 1e-4), {secs:.1} s (< 60 s)"),
    )
}

fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if Some(k) != prev && k != BLANK {
            out.push(k);
        }
        prev = Some(k);
    }
    out
}

/// Negative log of the summed probability of every path collapsing to
/// `target`, by enumeration.
fn brute_force_nll(lp: &[f64], frames: usize, target: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut path = vec![0usize; frames];
    loop {
        if collapse(&path) == target {
            total += path.iter().enumerate().map(|(t, &k)| lp[t * NUM_CLASSES + k]).sum::<f64>().exp();
        }
        let mut i = 0;
        loop {
            if i == frames {
                return -total.ln();
            }
            path[i] += 1;
            if path[i] < NUM_CLASSES {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

fn criterion_2() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 200 {
        let frames = rng.random_range(1..=4);
        let len = rng.random_range(1..=frames);
        let target: Vec<usize> = (0..len).map(|_| rng.random_range(1..NUM_CLASSES)).collect();
        if min_frames(&target) > frames {
            continue;
        }
        let mut lp = Vec::with_capacity(frames * NUM_CLASSES);
        for _ in 0..frames {
            let row: Vec<f64> = (0..NUM_CLASSES).map(|_| rng.random_range(-3.0..3.0)).collect();
            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            lp.extend(row.iter().map(|v| v - lse));
        }
        let t = Tensor::matrix(frames, NUM_CLASSES, lp.clone()).unwrap();
        let (nll, _) = ctc_nll(&t, &target).unwrap();
        worst = worst.max((nll - brute_force_nll(&lp, frames, &target)).abs());
        done += 1;
    }
    verdict(
        2,
        worst <= 1e-9,
        format!("max |ctc - brute force| {worst:.2e} over 200 instances (<= 1e-9), {:.2} s", t0.elapsed().as_secs_f64()),
    )
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn criterion_3(codec: &RvqCodec, report: &CodecReport, test: &Corpus) -> Verdict {
    let dct = Dct::shared();
    let window = sqrt_hann(FRAME_LEN);
    let depth = codec.max_depth();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut sources: Vec<Waveform> = test.utterances.iter().take(20).map(|u| u.waveform.clone()).collect();
    for _ in 0..5 {
        let noise = (0..8000).map(|_| rng.random_range(-0.5..0.5)).collect();
        sources.push(Waveform::new(noise).unwrap());
    }
    // (source, frame) pairs, 1000 of them drawn at random.
    let mut all = Vec::new();
    for (i, w) in sources.iter().enumerate() {
        let frames = FrameLayout::analysis(w.len()).unwrap().frames;
        all.extend((0..frames).map(|f| (i, f)));
    }
    let picks: Vec<(usize, usize)> = (0..1000).map(|_| all[rng.random_range(0..all.len())]).collect();
    let grids: Vec<_> = sources.iter().map(|w| codec.encode(w, depth).unwrap()).collect();
    let latents: Vec<Vec<f64>> = sources
        .iter()
        .map(|w| dct.forward(&FrameLayout::analysis(w.len()).unwrap().extract(w.samples(), &window)))
        .collect();
    let mut mismatches = 0;
    for &(i, f) in &picks {
        let mut r = latents[i][f * FRAME_LEN..(f + 1) * FRAME_LEN].to_vec();
        for s in 0..depth {
            let book = codec.codebook(s);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for j in 0..book.len() {
                let d = sq_dist(&r, book.centroid(j));
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            if grids[i].get(f, s) as usize != best {
                mismatches += 1;
            }
            for (v, c) in r.iter_mut().zip(book.centroid(best)) {
                *v -= c;
            }
        }
    }

    let mut prefix_ok = true;
    for w in sources.iter().take(6) {
        let full = codec.encode(w, depth).unwrap();
        for m in 1..=depth {
            let direct = codec.encode(w, m).unwrap();
            let pre = full.prefix(m).unwrap();
            prefix_ok &= direct == pre && codec.decode(&direct).unwrap() == codec.decode(&pre).unwrap();
        }
    }

    let e = &report.residual_energy;
    let increases = e.windows(2).filter(|p| p[1] > p[0]).count();
    verdict(
        3,
        mismatches == 0 && prefix_ok && increases == 0 && e.len() == depth + 1,
        format!(
            "{mismatches} token mismatches vs brute force over 1000 frames x {depth} stages, prefix consistent for m <= {depth}: {prefix_ok}, \
             residual energy {:.4} -> {:.4} with {increases} increases",
            e[0],
            e[e.len() - 1]
        ),
    )
}

/// Mean of a column over the rows matching `pick`.
fn mean_of(records: &[EvalRecord], pick: impl Fn(&EvalRecord) -> bool, col: impl Fn(&EvalRecord) -> f64) -> f64 {
    let xs: Vec<f64> = records.iter().filter(|r| pick(r)).map(col).collect();
    assert!(!xs.is_empty(), "no rows matched");
    mean_sem(&xs).0
}

fn criterion_4(dev_wer: f64, records: &[EvalRecord], elapsed: Duration) -> Verdict {
    let clean = |d: DefenseKind| mean_of(records, |r| r.eps == 0.0 && r.defense == d, |r| r.wer_clean);
    let base = clean(DefenseKind::None);
    let mut worst = (0, f64::NEG_INFINITY);
    for d in pgd_depths().into_iter().filter(|&d| d >= 8) {
        let rise = clean(DefenseKind::Rvq(d)) - base;
        if rise > worst.1 {
            worst = (d, rise);
        }
    }
    let secs = elapsed.as_secs_f64();
    verdict(
        4,
        dev_wer <= 0.10 && worst.1 <= 0.05 && secs <= 900.0,
        format!(
            "dev WER {dev_wer:.3} (<= 0.10), test clean WER {base:.3}, worst rise at depth >= 8 is {:+.3} at rvq:{} (<= 0.05), \
             pipeline {secs:.0} s (<= 900 s)",
            worst.1, worst.0
        ),
    )
}

fn criterion_5(records: &[EvalRecord]) -> Verdict {
    let rows: Vec<&EvalRecord> = records.iter().filter(|r| r.eps == EPS && r.defense == DefenseKind::None).collect();
    let hit = rows.iter().filter(|r| r.wer_adv > r.wer_clean && r.wer_adv >= 3.0 * r.wer_clean).count();
    let frac = hit as f64 / rows.len() as f64;
    let clean = mean_sem(&rows.iter().map(|r| r.wer_clean).collect::<Vec<_>>()).0;
    let adv = mean_sem(&rows.iter().map(|r| r.wer_adv).collect::<Vec<_>>()).0;
    verdict(
        5,
        frac >= 0.9,
        format!(
            "{hit}/{} utterances with adversarial WER >= 3x clean and above it ({:.0}%, >= 90%); mean WER {clean:.3} -> {adv:.3}",
            rows.len(),
            100.0 * frac
        ),
    )
}

fn criterion_6(records: &[EvalRecord]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in CCR_EPS {
        let ccr: Vec<f64> = CCR_DEPTHS
            .iter()
            .map(|&d| mean_of(records, |r| r.eps == eps && r.defense == DefenseKind::Rvq(d), |r| r.ccr.unwrap()))
            .collect();
        let drops: Vec<f64> = ccr.windows(2).map(|p| p[0] - p[1]).filter(|&d| d > 0.0).collect();
        let ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.01);
        pass &= ok;
        let shown: Vec<String> = ccr.iter().map(|c| format!("{c:.3}")).collect();
        parts.push(format!("eps {eps}: [{}] {} drop(s)", shown.join(", "), drops.len()));
    }
    verdict(6, pass, format!("mean CCR at depths {CCR_DEPTHS:?}: {}", parts.join("; ")))
}

/// Argmin depth of mean defended WER at `EPS` and its margin over the
/// worse-placed endpoint.
fn interior_min(records: &[EvalRecord]) -> (usize, f64, bool) {
    let depths = pgd_depths();
    let wer: Vec<f64> = depths
        .iter()
        .map(|&d| mean_of(records, |r| r.eps == EPS && r.defense == DefenseKind::Rvq(d), |r| r.wer_adv))
        .collect();
    let best = (0..wer.len()).fold(0, |b, i| if wer[i] < wer[b] { i } else { b });
    let margin = wer[0].min(wer[wer.len() - 1]) - wer[best];
    let interior = best != 0 && best != wer.len() - 1;
    (depths[best], margin, interior && margin >= 0.02)
}

fn criterion_7(per_seed: &[(u64, usize, f64, bool)]) -> Verdict {
    let wins = per_seed.iter().filter(|s| s.3).count();
    let shown: Vec<String> = per_seed
        .iter()
        .map(|(s, d, m, ok)| format!("seed {s}: rvq:{d} by {m:+.3}{}", if *ok { "" } else { " (miss)" }))
        .collect();
    verdict(7, wins >= 3, format!("{wins}/5 seeds with an interior argmin beating both endpoints by >= 0.02 ({})", shown.join(", ")))
}

fn criterion_8(records: &[EvalRecord]) -> Verdict {
    let summary = harness::correlation(records, AttackKind::Pgd).unwrap();
    let per_eps: Vec<String> = summary
        .per_eps
        .iter()
        .map(|(e, r)| match r.rho {
            Some(v) => format!("{e}: {v:.3}"),
            None => format!("{e}: undefined"),
        })
        .collect();
    let rho = summary.grid.rho.unwrap_or(f64::NAN);
    let (pass, gate) = if rho >= 0.7 {
        (true, "meets 0.7")
    } else if rho >= 0.5 {
        (true, "below 0.7, judged at the widened 0.5 gate")
    } else {
        (false, "below 0.5")
    };
    verdict(
        8,
        pass,
        format!(
            "Spearman rho over {} (depth, eps) means {rho:.3} ({gate}); per eps {}",
            summary.points.len(),
            per_eps.join(", ")
        ),
    )
}

fn criterion_9(pgd: &[EvalRecord], bpda: &[EvalRecord]) -> Verdict {
    let ids: Vec<&str> = bpda.iter().map(|r| r.id.as_str()).collect();
    let wer = |rows: &[EvalRecord], d: DefenseKind| {
        mean_of(rows, |r| r.eps == EPS && r.defense == d && ids.contains(&r.id.as_str()), |r| r.wer_adv)
    };
    let rvq = DefenseKind::Rvq(harness::BPDA_DEPTH);
    let (pgd_rvq, bpda_rvq) = (wer(pgd, rvq), wer(bpda, rvq));
    let median = wer(bpda, DefenseKind::Median(5));
    let resample = wer(bpda, DefenseKind::Resample(2));
    verdict(
        9,
        bpda_rvq >= pgd_rvq && bpda_rvq < median && bpda_rvq < resample,
        format!(
            "on {} utterances at eps {EPS}: rvq:9 BPDA {bpda_rvq:.3} >= PGD {pgd_rvq:.3}; BPDA median {median:.3}, resample {resample:.3} (rvq:9 must be lower)",
            bpda.iter().filter(|r| r.eps == EPS && r.defense == rvq).count()
        ),
    )
}

fn criterion_10(work: &Path, model: &Path, codec: &Path) -> Verdict {
    let mut cfg = ExperimentConfig::new(
        CorpusSpec {
            split: Split::Test,
            n_utts: 3,
            seed: 7,
        },
        model,
        work.join("unused"),
    );
    cfg.codec = Some(codec.to_path_buf());
    cfg.depths = Some(vec![4, 8]);
    cfg.epsilons = Some(vec![0.01, 0.02]);
    cfg.defenses = vec![DefenseKind::None, DefenseKind::Median(5)];
    cfg.seeds = vec![0, 1];
    cfg.iterations = Some(10);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let mut c = cfg.clone();
        c.output_dir = work.join(format!("determinism-{run}"));
        let path = work.join(format!("determinism-{run}.json"));
        fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_rvqlab"))
            .args(["sweep", "--config"])
            .arg(&path)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success(), "sweep exited with {status}");
        outputs.push(c.output_dir);
    }
    let mut same = Vec::new();
    let mut differ = Vec::new();
    for name in [harness::files::RECORDS, harness::files::ERRORS, harness::files::AGGREGATES] {
        let a = fs::read(outputs[0].join(name)).unwrap();
        let b = fs::read(outputs[1].join(name)).unwrap();
        if a == b && !a.is_empty() {
            same.push(name);
        } else {
            differ.push(name);
        }
    }
    verdict(
        10,
        differ.is_empty(),
        format!("two `rvqlab sweep` runs: identical {same:?}, differing {differ:?}"),
    )
}

fn main_config(out: &Path, n: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        CorpusSpec {
            split: Split::Test,
            n_utts: n,
            seed,
        },
        "in-memory",
        out,
    );
    cfg.codec = Some("in-memory".into());
    cfg.defenses = vec![
        DefenseKind::None,
        DefenseKind::Rvq(harness::BPDA_DEPTH),
        DefenseKind::Median(5),
        DefenseKind::Resample(2),
    ];
    cfg
}

fn sweep(cfg: &ExperimentConfig, model: &AcousticModel, codec: &RvqCodec, corpus: &Corpus) -> SweepTable {
    let t0 = Instant::now();
    let table = run_sweep_with(cfg, model, Some(codec), corpus).unwrap();
    assert!(table.errors.is_empty(), "sweep rows failed: {:?}", table.errors);
    harness::write_outputs(cfg, &table, &cfg.output_dir).unwrap();
    eprintln!("sweep {} done in {:.0} s", cfg.output_dir.display(), t0.elapsed().as_secs_f64());
    table
}

fn main() {
    let work: PathBuf = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&work).unwrap();
    let mut verdicts = vec![criterion_1(), criterion_2()];

    let t0 = Instant::now();
    let train = gen_corpus(Split::Train, N_TRAIN, 0).unwrap();
    let dev = gen_corpus(Split::Dev, N_DEV, 0).unwrap();
    let (model, report) = train_asr(&train, Some(&dev), &TrainConfig::default()).unwrap();
    let dev_wer = report.final_dev_wer().unwrap();
    eprintln!("asr trained in {:.0} s, dev WER {dev_wer:.3}", t0.elapsed().as_secs_f64());
    let (codec, codec_report) = train_codec(&train, &CodecConfig::default()).unwrap();
    eprintln!("codec trained at {:.0} s", t0.elapsed().as_secs_f64());
    let test = gen_corpus(Split::Test, N_TEST, 0).unwrap();
    let mut clean_cfg = main_config(&work.join("clean"), N_TEST, 0);
    clean_cfg.epsilons = Some(vec![0.0]);
    let clean = sweep(&clean_cfg, &model, &codec, &test);
    let pipeline_time = t0.elapsed();
    drop(train);

    verdicts.push(criterion_3(&codec, &codec_report, &test));
    verdicts.push(criterion_4(dev_wer, &clean.records, pipeline_time));

    let main = sweep(&main_config(&work.join("pgd"), N_TEST, 0), &model, &codec, &test);
    verdicts.push(criterion_5(&main.records));
    verdicts.push(criterion_6(&main.records));

    let mut per_seed = Vec::new();
    let (d, m, ok) = interior_min(&main.records);
    per_seed.push((0, d, m, ok));
    for &seed in &SEEDS[1..] {
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let (model_s, _) = train_asr(&gen_corpus(Split::Train, N_TRAIN, 0).unwrap(), None, &cfg).unwrap();
        let test_s = gen_corpus(Split::Test, N_TEST, seed).unwrap();
        let mut cfg = main_config(&work.join(format!("pgd-seed{seed}")), N_TEST, seed);
        cfg.epsilons = Some(vec![EPS]);
        cfg.defenses = vec![DefenseKind::None];
        let t = sweep(&cfg, &model_s, &codec, &test_s);
        let (d, m, ok) = interior_min(&t.records);
        per_seed.push((seed, d, m, ok));
    }
    verdicts.push(criterion_7(&per_seed));
    verdicts.push(criterion_8(&main.records));

    let bpda_test = gen_corpus(Split::Test, N_BPDA, 0).unwrap();
    let mut bpda_cfg = main_config(&work.join("bpda"), N_BPDA, 0);
    bpda_cfg.attack = AttackKind::Bpda;
    bpda_cfg.epsilons = Some(vec![EPS]);
    bpda_cfg.depths = Some(vec![harness::BPDA_DEPTH]);
    bpda_cfg.defenses = vec![DefenseKind::Median(5), DefenseKind::Resample(2)];
    let bpda = sweep(&bpda_cfg, &model, &codec, &bpda_test);
    verdicts.push(criterion_9(&main.records, &bpda.records));

    let mut all = main.records.clone();
    all.extend(bpda.records.iter().cloned());
    harness::write_reports(&all, &work.join("reports"), harness::BPDA_DEPTH, EPS).unwrap();

    let model_path = work.join("model.bin");
    let codec_path = work.join("codec.rvq");
    model.save(&model_path).unwrap();
    codec.save(&codec_path).unwrap();
    verdicts.push(criterion_10(&work, &model_path, &codec_path));

    let summary: BTreeMap<usize, (bool, String)> = verdicts.into_iter().map(|v| (v.id, (v.pass, v.detail))).collect();
    fs::write(work.join("verdicts.json"), serde_json::to_string_pretty(&summary).unwrap()).unwrap();
    let failed: Vec<usize> = summary.iter().filter(|(_, v)| !v.0).map(|(k, _)| *k).collect();
    println!("acceptance: {}/{} criteria pass", summary.len() - failed.len(), summary.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
