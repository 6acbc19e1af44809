use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::svg::{self, Panel, Series};
use crate::attack::AttackKind;
use crate::defense::DefenseKind;
use crate::error::{invalid, Error, Result};
use crate::metrics::{mean_sem, spearman, EvalRecord};

/// Mean WER and CCR against depth for one (attack, epsilon).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthCurve {
    pub attack: AttackKind,
    pub eps: f64,
    pub depths: Vec<usize>,
    pub ccr: Vec<f64>,
    pub wer: Vec<f64>,
    pub argmin_depth: usize,
    /// The minimum is at neither the shallowest nor the deepest depth.
    pub interior: bool,
    /// Smaller endpoint WER minus the minimum WER.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub curves: Vec<DepthCurve>,
}

fn mean(xs: &[f64]) -> f64 {
    mean_sem(xs).0
}

/// Per-(attack, eps, depth) means over every RVQ row, pooling utterances
/// and seeds. Ordered by attack, eps and depth.
fn rvq_means(records: &[EvalRecord]) -> BTreeMap<(AttackKind, u64, usize), (f64, f64, f64)> {
    let mut groups: BTreeMap<(AttackKind, u64, usize), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        if let (Some(d), true) = (r.depth(), r.eps >= 0.0) {
            // Non-negative floats order like their bit patterns.
            groups.entry((r.attack, r.eps.to_bits(), d)).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .map(|(k, rows)| {
            let col = |f: fn(&EvalRecord) -> f64| mean(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            (k, (col(|r| r.ccr.unwrap_or(0.0)), col(|r| r.wer_adv), col(|r| r.delta_wer)))
        })
        .collect()
}

pub fn depth_curves(records: &[EvalRecord]) -> Result<DepthSummary> {
    let mut by_curve: BTreeMap<(AttackKind, u64), Vec<(usize, f64, f64)>> = BTreeMap::new();
    for ((attack, eps, depth), (ccr, wer, _)) in rvq_means(records) {
        by_curve.entry((attack, eps)).or_default().push((depth, ccr, wer));
    }
    let mut curves = Vec::new();
    let mut short = None;
    for ((attack, eps), pts) in by_curve {
        if pts.len() < 2 {
            let why = format!(
                "depth curves need at least 2 depths, {attack} eps {} has {}",
                f64::from_bits(eps),
                pts.len()
            );
            warn!("{why}; curve left out");
            short = Some(why);
            continue;
        }
        let wer: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let mut best = 0;
        for (i, &w) in wer.iter().enumerate() {
            if w < wer[best] {
                best = i;
            }
        }
        let last = wer.len() - 1;
        curves.push(DepthCurve {
            attack,
            eps: f64::from_bits(eps),
            depths: pts.iter().map(|p| p.0).collect(),
            ccr: pts.iter().map(|p| p.1).collect(),
            argmin_depth: pts[best].0,
            interior: best != 0 && best != last,
            margin: wer[0].min(wer[last]) - wer[best],
            wer,
        });
    }
    if curves.is_empty() {
        return Err(invalid(short.unwrap_or_else(|| "depth curves need rvq rows".into())));
    }
    Ok(DepthSummary { curves })
}

/// CCR and WER against depth, one panel pair per attack. CCR at epsilon
/// zero is identically zero and left out.
pub fn depth_curves_svg(summary: &DepthSummary) -> String {
    let mut panels = Vec::new();
    let mut attacks: Vec<AttackKind> = summary.curves.iter().map(|c| c.attack).collect();
    attacks.dedup();
    for attack in attacks {
        let curves: Vec<&DepthCurve> = summary.curves.iter().filter(|c| c.attack == attack).collect();
        let series = |f: fn(&DepthCurve) -> &Vec<f64>, skip_clean: bool| -> Vec<Series> {
            curves
                .iter()
                .filter(|c| !(skip_clean && c.eps == 0.0))
                .map(|c| Series {
                    label: format!("eps {}", c.eps),
                    points: c.depths.iter().map(|&d| d as f64).zip(f(c).iter().copied()).collect(),
                    radii: None,
                })
                .collect()
        };
        panels.push(Panel {
            title: format!("CCR vs depth ({attack})"),
            x_label: "RVQ depth".into(),
            y_label: "CCR".into(),
            series: series(|c| &c.ccr, true),
        });
        panels.push(Panel {
            title: format!("WER vs depth ({attack})"),
            x_label: "RVQ depth".into(),
            y_label: "WER".into(),
            series: series(|c| &c.wer, false),
        });
    }
    svg::render(&panels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub depth: usize,
    pub eps: f64,
    pub ccr: f64,
    pub delta_wer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rho {
    pub rho: Option<f64>,
    /// Why `rho` is absent.
    pub error: Option<String>,
}

impl From<Result<f64>> for Rho {
    fn from(r: Result<f64>) -> Self {
        match r {
            Ok(v) => Self { rho: Some(v), error: None },
            Err(e) => Self {
                rho: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub attack: AttackKind,
    /// What one point stands for.
    pub unit: String,
    pub points: Vec<GridPoint>,
    /// Spearman rho across depths, per epsilon.
    pub per_eps: Vec<(f64, Rho)>,
    /// Average of the defined per-epsilon values.
    pub mean_rho: Option<f64>,
    /// Spearman rho over the whole depth x epsilon grid.
    pub grid: Rho,
}

/// CCR against delta-WER over configuration means with epsilon > 0.
pub fn correlation(records: &[EvalRecord], attack: AttackKind) -> Result<CorrelationSummary> {
    let points: Vec<GridPoint> = rvq_means(records)
        .into_iter()
        .filter(|((a, eps, _), _)| *a == attack && f64::from_bits(*eps) > 0.0)
        .map(|((_, eps, depth), (ccr, _, dw))| GridPoint {
            depth,
            eps: f64::from_bits(eps),
            ccr,
            delta_wer: dw,
        })
        .collect();
    if points.len() < 3 {
        return Err(invalid(format!(
            "correlation needs at least 3 (depth, eps > 0) configurations, got {}",
            points.len()
        )));
    }
    let mut eps_values: Vec<f64> = points.iter().map(|p| p.eps).collect();
    eps_values.dedup();
    let per_eps: Vec<(f64, Rho)> = eps_values
        .iter()
        .map(|&e| {
            let sub: Vec<&GridPoint> = points.iter().filter(|p| p.eps == e).collect();
            let xs: Vec<f64> = sub.iter().map(|p| p.ccr).collect();
            let ys: Vec<f64> = sub.iter().map(|p| p.delta_wer).collect();
            (e, Rho::from(spearman(&xs, &ys)))
        })
        .collect();
    let defined: Vec<f64> = per_eps.iter().filter_map(|(_, r)| r.rho).collect();
    let xs: Vec<f64> = points.iter().map(|p| p.ccr).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.delta_wer).collect();
    Ok(CorrelationSummary {
        attack,
        unit: "configuration mean over utterances and seeds, one per (depth, eps)".into(),
        mean_rho: (!defined.is_empty()).then(|| mean(&defined)),
        grid: Rho::from(spearman(&xs, &ys)),
        per_eps,
        points,
    })
}

/// Delta-WER against CCR; marker size grows with depth, color marks epsilon.
pub fn correlation_svg(summary: &CorrelationSummary) -> String {
    let mut eps_values: Vec<f64> = summary.points.iter().map(|p| p.eps).collect();
    eps_values.dedup();
    let series = eps_values
        .iter()
        .map(|&e| {
            let pts: Vec<&GridPoint> = summary.points.iter().filter(|p| p.eps == e).collect();
            Series {
                label: format!("eps {e}"),
                points: pts.iter().map(|p| (p.ccr, p.delta_wer)).collect(),
                radii: Some(pts.iter().map(|p| 2.0 + (p.depth as f64).sqrt()).collect()),
            }
        })
        .collect();
    let rho = summary
        .grid
        .rho
        .map(|r| format!("{r:.3}"))
        .unwrap_or_else(|| "undefined".into());
    svg::render(&[Panel {
        title: format!("delta WER vs CCR ({}), rho {rho}", summary.attack),
        x_label: "CCR".into(),
        y_label: "delta WER".into(),
        series,
    }])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub attack: AttackKind,
    pub defense: DefenseKind,
    pub n: usize,
    pub wer_adv: (f64, f64),
    pub wer_clean: (f64, f64),
}

pub const BASELINE_HEADER: &str = "attack,defense,n,wer_adv_mean,wer_adv_sem,wer_clean_mean,wer_clean_sem";

/// Mean and standard error per defense at one epsilon, one section per
/// attack present. A section needs none, `rvq:depth`, a median filter and
/// resampling; incomplete sections are left out, and if none is complete
/// the missing configurations are the error.
pub fn baseline_rows(records: &[EvalRecord], depth: usize, eps: f64) -> Result<Vec<BaselineRow>> {
    let at_eps: Vec<&EvalRecord> = records.iter().filter(|r| r.eps == eps).collect();
    let mut attacks: Vec<AttackKind> = at_eps.iter().map(|r| r.attack).collect();
    attacks.sort();
    attacks.dedup();
    if attacks.is_empty() {
        attacks.push(AttackKind::Pgd);
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for attack in attacks {
        let mut section = Vec::new();
        let missing_before = missing.len();
        let wanted: [(&str, fn(&DefenseKind, usize) -> bool); 4] = [
            ("none", |d, _| *d == DefenseKind::None),
            ("rvq", |d, n| *d == DefenseKind::Rvq(n)),
            ("median", |d, _| matches!(d, DefenseKind::Median(_))),
            ("resample", |d, _| matches!(d, DefenseKind::Resample(_))),
        ];
        for (name, matches) in wanted {
            let mut kinds: Vec<DefenseKind> = at_eps
                .iter()
                .filter(|r| r.attack == attack && matches(&r.defense, depth))
                .map(|r| r.defense)
                .collect();
            kinds.sort();
            kinds.dedup();
            if kinds.is_empty() {
                let label = if name == "rvq" { format!("rvq:{depth}") } else { name.to_string() };
                missing.push(format!("{attack}/{label}"));
            }
            for kind in kinds {
                let sel: Vec<&&EvalRecord> = at_eps.iter().filter(|r| r.attack == attack && r.defense == kind).collect();
                section.push(BaselineRow {
                    attack,
                    defense: kind,
                    n: sel.len(),
                    wer_adv: mean_sem(&sel.iter().map(|r| r.wer_adv).collect::<Vec<_>>()),
                    wer_clean: mean_sem(&sel.iter().map(|r| r.wer_clean).collect::<Vec<_>>()),
                });
            }
        }
        if missing.len() == missing_before {
            rows.extend(section);
        }
    }
    if rows.is_empty() {
        return Err(Error::MissingConfig(missing));
    }
    if !missing.is_empty() {
        warn!("baseline sections left out for missing {missing:?}");
    }
    Ok(rows)
}

pub fn baseline_csv(rows: &[BaselineRow]) -> String {
    let mut s = String::from(BASELINE_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.attack, r.defense, r.n, r.wer_adv.0, r.wer_adv.1, r.wer_clean.0, r.wer_clean.1
        ));
    }
    s
}

/// Report files inside the output directory.
pub mod files {
    pub const DEPTH_SVG: &str = "depth_curves.svg";
    pub const DEPTH_JSON: &str = "depth_summary.json";
    pub const CORRELATION_SVG: &str = "correlation.svg";
    pub const CORRELATION_JSON: &str = "correlation.json";
    pub const BASELINE_CSV: &str = "baseline.csv";
}

/// Which reports were written and why the others were skipped.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportOutcome {
    pub written: Vec<String>,
    pub skipped: Vec<(String, String)>,
}

/// Write every report the records support. Correlation uses the first
/// attack present; the baseline table compares at `depth` and `eps`.
pub fn write_reports(records: &[EvalRecord], dir: &Path, depth: usize, eps: f64) -> Result<ReportOutcome> {
    fs::create_dir_all(dir)?;
    let mut out = ReportOutcome::default();
    let note = |name: &str, r: Result<()>, out: &mut ReportOutcome| match r {
        Ok(()) => out.written.push(name.to_string()),
        Err(e) => {
            warn!("{name} skipped: {e}");
            out.skipped.push((name.to_string(), e.to_string()));
        }
    };

    let depth_result = depth_curves(records).and_then(|s| {
        fs::write(dir.join(files::DEPTH_SVG), depth_curves_svg(&s))?;
        fs::write(dir.join(files::DEPTH_JSON), serde_json::to_string_pretty(&s)? + "\n")?;
        Ok(())
    });
    note("depth curves", depth_result, &mut out);

    let attack = records.first().map(|r| r.attack).unwrap_or(AttackKind::Pgd);
    let corr_result = correlation(records, attack).and_then(|s| {
        fs::write(dir.join(files::CORRELATION_SVG), correlation_svg(&s))?;
        fs::write(dir.join(files::CORRELATION_JSON), serde_json::to_string_pretty(&s)? + "\n")?;
        Ok(())
    });
    note("correlation", corr_result, &mut out);

    let base_result = baseline_rows(records, depth, eps).and_then(|rows| {
        fs::write(dir.join(files::BASELINE_CSV), baseline_csv(&rows))?;
        Ok(())
    });
    note("baseline table", base_result, &mut out);
    Ok(out)
}
