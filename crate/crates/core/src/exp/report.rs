//! Report emission: summary JSON, CSV tables, and SVG plots (score
//! distributions by variant, k-sweep lines, rank-correlation grid).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use crate::eval::spearman_rank_correlation;
use crate::pairs::SharingMode;
use crate::stats::median;

use super::{ExpError, RunRecord, SCHEMA_VERSION};

/// Training metrics carried into the rank-correlation analysis.
const TRAIN_METRICS: [&str; 3] = ["weak_recon_loss", "loss", "elbo"];
const SCORE_NAMES: [&str; 8] = [
    "mig",
    "dci_disentanglement",
    "dci_completeness",
    "dci_informativeness",
    "sap",
    "modularity",
    "beta_vae",
    "factor_vae",
];

fn score_value(record: &RunRecord, name: &str) -> Option<f64> {
    let m = record.metrics.as_ref()?;
    match name {
        "mig" => Some(m.mig),
        "dci_disentanglement" => Some(m.dci_disentanglement),
        "dci_completeness" => Some(m.dci_completeness),
        "dci_informativeness" => Some(m.dci_informativeness),
        "sap" => Some(m.sap),
        "modularity" => Some(m.modularity),
        "beta_vae" => Some(m.beta_vae),
        "factor_vae" => m.factor_vae,
        _ => None,
    }
}

fn train_metric_value(record: &RunRecord, name: &str) -> Option<f64> {
    match name {
        "weak_recon_loss" => Some(record.final_weak_recon_loss),
        "loss" => record.trace.last().map(|p| p.loss),
        "elbo" => record.trace.last().map(|p| p.elbo),
        _ => None,
    }
}

#[derive(Debug, Serialize)]
struct VariantSummary {
    n_runs: usize,
    median_weak_recon_loss: Option<f64>,
    median_scores: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Serialize)]
struct Summary {
    schema_version: u32,
    n_runs: usize,
    variants: BTreeMap<String, VariantSummary>,
    selected_run: Option<String>,
    selection_criterion: &'static str,
    rank_correlations: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

/// Emitted artifact paths.
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub summary_json: PathBuf,
    pub records_csv: PathBuf,
    pub rank_correlations_csv: PathBuf,
    /// Per-cell tables for downstream/shift/fairness outcomes, present
    /// when any record carries them.
    pub cell_tables: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

/// Write summary JSON, per-run CSV, rank-correlation CSV, and SVG plots.
pub fn emit_report(records: &[RunRecord], out_dir: &Path) -> Result<ReportFiles, ExpError> {
    std::fs::create_dir_all(out_dir)?;
    let plots_dir = out_dir.join("plots");
    std::fs::create_dir_all(&plots_dir)?;

    // per-variant medians
    let mut by_variant: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_variant
            .entry(r.config.model.name().to_string())
            .or_default()
            .push(r);
    }
    let mut variants = BTreeMap::new();
    for (name, rs) in &by_variant {
        let losses: Vec<f64> = rs
            .iter()
            .map(|r| r.final_weak_recon_loss)
            .filter(|v| v.is_finite())
            .collect();
        let mut median_scores = BTreeMap::new();
        for score in SCORE_NAMES {
            let vals: Vec<f64> = rs.iter().filter_map(|r| score_value(r, score)).collect();
            median_scores.insert(
                score.to_string(),
                if vals.is_empty() {
                    None
                } else {
                    Some(median(&vals))
                },
            );
        }
        variants.insert(
            name.clone(),
            VariantSummary {
                n_runs: rs.len(),
                median_weak_recon_loss: if losses.is_empty() {
                    None
                } else {
                    Some(median(&losses))
                },
                median_scores,
            },
        );
    }

    // rank correlations between training metrics and scores
    let mut rank_correlations = BTreeMap::new();
    for tm in TRAIN_METRICS {
        let mut row = BTreeMap::new();
        for score in SCORE_NAMES {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter_map(|r| Some((train_metric_value(r, tm)?, score_value(r, score)?)))
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .collect();
            let rho = if pairs.len() >= 3 {
                let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                spearman_rank_correlation(&xs, &ys).ok()
            } else {
                None
            };
            row.insert(score.to_string(), rho);
        }
        rank_correlations.insert(tm.to_string(), row);
    }

    let selected_run = super::select_model(records)
        .ok()
        .map(|r| r.run_id.clone());
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        n_runs: records.len(),
        variants,
        selected_run,
        selection_criterion: "weak_reconstruction_loss",
        rank_correlations: rank_correlations.clone(),
    };
    let summary_json = out_dir.join("summary.json");
    std::fs::write(&summary_json, serde_json::to_vec_pretty(&summary)?)?;

    // per-run CSV; missing scores stay empty
    let records_csv = out_dir.join("records.csv");
    let mut csv = String::new();
    write!(
        csv,
        "run_id,variant,beta,sharing,seed,steps,diverged,weak_recon_loss,final_loss,final_elbo"
    )
    .unwrap();
    for s in SCORE_NAMES {
        write!(csv, ",{s}").unwrap();
    }
    csv.push('\n');
    for r in records {
        let sharing = match r.config.sharing {
            SharingMode::FixedK(k) => format!("k={k}"),
            SharingMode::RandomK => "rnd".to_string(),
        };
        write!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.run_id,
            r.config.model.name(),
            r.config.beta,
            sharing,
            r.seed,
            r.config.steps,
            r.diverged,
            fmt_opt(Some(r.final_weak_recon_loss).filter(|v| v.is_finite())),
            fmt_opt(r.trace.last().map(|p| p.loss)),
            fmt_opt(r.trace.last().map(|p| p.elbo)),
        )
        .unwrap();
        for s in SCORE_NAMES {
            write!(csv, ",{}", fmt_opt(score_value(r, s))).unwrap();
        }
        csv.push('\n');
    }
    std::fs::write(&records_csv, csv)?;

    // rank-correlation CSV (the grid the heat map draws)
    let rank_correlations_csv = out_dir.join("rank_correlations.csv");
    let mut csv = String::from("train_metric");
    for s in SCORE_NAMES {
        write!(csv, ",{s}").unwrap();
    }
    csv.push('\n');
    for tm in TRAIN_METRICS {
        write!(csv, "{tm}").unwrap();
        for s in SCORE_NAMES {
            write!(csv, ",{}", fmt_opt(rank_correlations[tm][s])).unwrap();
        }
        csv.push('\n');
    }
    std::fs::write(&rank_correlations_csv, csv)?;

    let cell_tables = emit_cell_tables(records, out_dir)?;

    let mut plots = Vec::new();
    plots.push(plot_scores_by_variant(records, &plots_dir)?);
    if let Some(p) = plot_k_sweep(records, &plots_dir)? {
        plots.push(p);
    }
    plots.push(plot_rank_grid(&rank_correlations, &plots_dir)?);

    Ok(ReportFiles {
        summary_json,
        records_csv,
        rank_correlations_csv,
        cell_tables,
        plots,
    })
}

/// One CSV row per evaluation cell, across all records that carry the
/// corresponding outcome section.
fn emit_cell_tables(records: &[RunRecord], out_dir: &Path) -> Result<Vec<PathBuf>, ExpError> {
    let mut tables = Vec::new();

    let mut downstream = String::from("run_id,factor,train_size,classifier,accuracy\n");
    let mut have_downstream = false;
    let mut shift = String::from(
        "run_id,target,repetition,intervened,train_value,strong,weak,prior_baseline,resampled_with_replacement\n",
    );
    let mut have_shift = false;
    let mut unfairness = String::from("run_id,target,sensitive,unfairness\n");
    let mut have_unfairness = false;

    for r in records {
        let Some(outcome) = &r.downstream else {
            continue;
        };
        for c in &outcome.downstream {
            have_downstream = true;
            writeln!(
                downstream,
                "{},{},{},{:?},{}",
                r.run_id, c.factor, c.train_size, c.classifier, c.accuracy
            )
            .unwrap();
        }
        for c in &outcome.shift {
            have_shift = true;
            writeln!(
                shift,
                "{},{},{},{},{},{},{},{},{}",
                r.run_id,
                c.target,
                c.repetition,
                c.spec.intervened_factor,
                c.spec.train_value,
                c.strong,
                c.weak,
                c.prior_baseline,
                c.resampled_with_replacement
            )
            .unwrap();
        }
        for c in &outcome.unfairness {
            have_unfairness = true;
            writeln!(unfairness, "{},{},{},{}", r.run_id, c.target, c.sensitive, c.unfairness)
                .unwrap();
        }
    }
    for (have, body, name) in [
        (have_downstream, downstream, "downstream_cells.csv"),
        (have_shift, shift, "shift_cells.csv"),
        (have_unfairness, unfairness, "unfairness_cells.csv"),
    ] {
        if have {
            let path = out_dir.join(name);
            std::fs::write(&path, body)?;
            tables.push(path);
        }
    }
    Ok(tables)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Box plot of DCI disentanglement per variant.
fn plot_scores_by_variant(records: &[RunRecord], dir: &Path) -> Result<PathBuf, ExpError> {
    let path = dir.join("scores_by_variant.svg");
    let mut by_variant: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(v) = score_value(r, "dci_disentanglement") {
            by_variant.entry(r.config.model.name().to_string()).or_default().push(v);
        }
    }
    let names: Vec<String> = by_variant.keys().cloned().collect();
    {
        let root = SVGBackend::new(&path, (640, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("DCI disentanglement by variant", ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(42)
            .y_label_area_size(42)
            .build_cartesian_2d(
                (0..names.len().max(1) as i32).into_segmented(),
                0f32..1f32,
            )
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_labels(names.len().max(1))
            .x_label_formatter(&|x| {
                let idx = match x {
                    SegmentValue::CenterOf(i) | SegmentValue::Exact(i) => *i,
                    SegmentValue::Last => return String::new(),
                } as usize;
                names.get(idx).cloned().unwrap_or_default()
            })
            .y_desc("DCI disentanglement")
            .draw()
            .map_err(draw_err)?;
        for (i, name) in names.iter().enumerate() {
            let vals = &by_variant[name];
            let q = Quartiles::new(vals);
            chart
                .draw_series(std::iter::once(
                    Boxplot::new_vertical(SegmentValue::CenterOf(i as i32), &q).width(22),
                ))
                .map_err(draw_err)?;
        }
        root.present().map_err(draw_err)?;
    }
    Ok(path)
}

/// Median DCI as a function of k for fixed-k runs (skipped without them).
fn plot_k_sweep(records: &[RunRecord], dir: &Path) -> Result<Option<PathBuf>, ExpError> {
    let mut by_variant_k: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in records {
        if let (SharingMode::FixedK(k), Some(v)) =
            (r.config.sharing, score_value(r, "dci_disentanglement"))
        {
            by_variant_k
                .entry(r.config.model.name().to_string())
                .or_default()
                .entry(k)
                .or_default()
                .push(v);
        }
    }
    if by_variant_k.is_empty() {
        return Ok(None);
    }
    let path = dir.join("k_sweep.svg");
    {
        let max_k = by_variant_k
            .values()
            .flat_map(|m| m.keys())
            .copied()
            .max()
            .unwrap_or(1);
        let root = SVGBackend::new(&path, (640, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("Median DCI by number of changed factors", ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(42)
            .y_label_area_size(42)
            .build_cartesian_2d(0.5f64..max_k as f64 + 0.5, 0f64..1f64)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc("k")
            .y_desc("median DCI disentanglement")
            .draw()
            .map_err(draw_err)?;
        let palette = [&RED, &BLUE, &GREEN, &MAGENTA, &CYAN];
        for (ci, (name, by_k)) in by_variant_k.iter().enumerate() {
            let series: Vec<(f64, f64)> = by_k
                .iter()
                .map(|(&k, vals)| (k as f64, median(vals)))
                .collect();
            let color = palette[ci % palette.len()];
            chart
                .draw_series(LineSeries::new(series.iter().copied(), color))
                .map_err(draw_err)?
                .label(name.clone())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 16, y)], color)
                });
            chart
                .draw_series(series.iter().map(|&(x, y)| Circle::new((x, y), 3, color.filled())))
                .map_err(draw_err)?;
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.8))
            .draw()
            .map_err(draw_err)?;
        root.present().map_err(draw_err)?;
    }
    Ok(Some(path))
}

/// Heat grid of Spearman correlations between training metrics and scores.
fn plot_rank_grid(
    grid: &BTreeMap<String, BTreeMap<String, Option<f64>>>,
    dir: &Path,
) -> Result<PathBuf, ExpError> {
    let path = dir.join("rank_correlations.svg");
    {
        let root = SVGBackend::new(&path, (760, 300)).into_drawing_area();
        root.fill(&WHITE).map_err(draw_err)?;
        let rows = TRAIN_METRICS.len();
        let cols = SCORE_NAMES.len();
        let mut chart = ChartBuilder::on(&root)
            .caption("Rank correlation: training metrics vs scores", ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(90)
            .y_label_area_size(120)
            .build_cartesian_2d(0..cols as i32, 0..rows as i32)
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_labels(cols)
            .y_labels(rows)
            .x_label_formatter(&|x| {
                SCORE_NAMES
                    .get(*x as usize)
                    .map(|s| s.to_string())
                    .unwrap_or_default()
            })
            .y_label_formatter(&|y| {
                TRAIN_METRICS
                    .get(*y as usize)
                    .map(|s| s.to_string())
                    .unwrap_or_default()
            })
            .x_label_style(("sans-serif", 11).into_text_style(&root).transform(FontTransform::Rotate90))
            .draw()
            .map_err(draw_err)?;
        for (yi, tm) in TRAIN_METRICS.iter().enumerate() {
            for (xi, score) in SCORE_NAMES.iter().enumerate() {
                let value = grid[*tm][*score];
                let color = match value {
                    None => RGBColor(220, 220, 220),
                    Some(rho) => {
                        // blue for negative, red for positive
                        let t = (rho.clamp(-1.0, 1.0) + 1.0) / 2.0;
                        RGBColor(
                            (255.0 * t) as u8,
                            60,
                            (255.0 * (1.0 - t)) as u8,
                        )
                    }
                };
                chart
                    .draw_series(std::iter::once(Rectangle::new(
                        [(xi as i32, yi as i32), (xi as i32 + 1, yi as i32 + 1)],
                        color.filled(),
                    )))
                    .map_err(draw_err)?;
                if let Some(rho) = value {
                    chart
                        .draw_series(std::iter::once(Text::new(
                            format!("{rho:.2}"),
                            (xi as i32, yi as i32),
                            ("sans-serif", 12).into_font().color(&WHITE),
                        )))
                        .map_err(draw_err)?;
                }
            }
        }
        root.present().map_err(draw_err)?;
    }
    Ok(path)
}

fn draw_err<E: std::fmt::Display>(e: E) -> ExpError {
    ExpError::Config(format!("plotting: {e}"))
}
