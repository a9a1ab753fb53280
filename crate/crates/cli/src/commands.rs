use std::fmt::Write as _;
use std::path::Path;

use aumask_core::balance::{self, BalanceTarget, SelectionConfig};
use aumask_core::labelstore::{self, DatasetTable, MergedDatabase};
use aumask_core::loss::{self, SoftF1Config};
use aumask_core::metrics::{self, MetricReport, OccurrenceWeights};
use aumask_core::trainer::{self, SynthConfig, ToyModel, TrainConfig};
use aumask_core::write_atomic;
use serde_json::json;

use crate::inputs::{read_predictions, read_weights, GradFixture};
use crate::{CliError, Format};

type CmdResult = Result<String, CliError>;

/// Gradient checks at or above this relative error fail the command.
pub const GRAD_CHECK_LIMIT: f64 = 1e-5;

fn jsonl(lines: impl IntoIterator<Item = serde_json::Value>) -> String {
    lines.into_iter().map(|v| format!("{v}\n")).collect()
}

fn load_nonempty(path: &Path) -> Result<MergedDatabase, CliError> {
    let db = labelstore::load(path)?;
    if db.is_empty() {
        return Err(CliError::domain(format!("{}: database has no records", path.display())));
    }
    Ok(db)
}

fn parse_table_arg(arg: &str) -> (String, &Path) {
    match arg.split_once('=') {
        Some((name, path)) => (name.to_string(), Path::new(path)),
        None => {
            let path = Path::new(arg);
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (stem, path)
        }
    }
}

pub fn merge(descriptor_paths: &[std::path::PathBuf], table_args: &[String], out: &Path, f: Format) -> CmdResult {
    let descriptors = descriptor_paths
        .iter()
        .map(labelstore::read_descriptor)
        .collect::<Result<Vec<_>, _>>()?;
    let tables = table_args
        .iter()
        .map(|arg| {
            let (name, path) = parse_table_arg(arg);
            labelstore::read_table(path, &name)
        })
        .collect::<Result<Vec<DatasetTable>, _>>()?;
    let db = labelstore::merge(&descriptors, &tables)?;
    let missing = db.missing_fraction()?;
    labelstore::save(&db, out)?;
    Ok(match f {
        Format::Table => format!(
            "records: {}\nclasses: {}\nmissing_fraction: {missing:.4}\n",
            db.len(),
            db.class_names().len()
        ),
        Format::Jsonl => jsonl([json!({
            "records": db.len(),
            "classes": db.class_names().len(),
            "missing_fraction": missing,
        })]),
    })
}

pub fn stats(db_path: &Path, f: Format) -> CmdResult {
    let db = load_nonempty(db_path)?;
    let h = db.class_histogram();
    let missing = db.missing_fraction()?;
    let total = h.totals();
    Ok(match f {
        Format::Table => {
            let mut out = String::from("class,displayed,not_displayed,unknown\n");
            for (name, c) in h.class_names.iter().zip(&h.counts) {
                writeln!(out, "{name},{},{},{}", c.displayed, c.not_displayed, c.unknown).unwrap();
            }
            writeln!(out, "total,{},{},{}", total.displayed, total.not_displayed, total.unknown).unwrap();
            writeln!(out, "records: {}", h.records).unwrap();
            writeln!(out, "missing_fraction: {missing:.4}").unwrap();
            out
        }
        Format::Jsonl => jsonl(
            h.class_names
                .iter()
                .zip(&h.counts)
                .map(|(name, c)| {
                    json!({
                        "class": name,
                        "displayed": c.displayed,
                        "not_displayed": c.not_displayed,
                        "unknown": c.unknown,
                    })
                })
                .chain([json!({
                    "total": {
                        "displayed": total.displayed,
                        "not_displayed": total.not_displayed,
                        "unknown": total.unknown,
                    },
                    "records": h.records,
                    "missing_fraction": missing,
                })]),
        ),
    })
}

pub fn filter(db_path: &Path, threshold: u64, out: &Path, f: Format) -> CmdResult {
    let db = labelstore::load(db_path)?;
    let selected = balance::occurrence_filter(&db, &SelectionConfig { min_occurrences: threshold });
    if selected.is_empty() {
        return Err(CliError::domain(format!("no class has at least {threshold} displayed labels")));
    }
    let kept = balance::drop_all_unknown(&db, &selected)?;
    let restricted = kept.restrict_classes(&selected)?;
    labelstore::save(&restricted, out)?;
    Ok(match f {
        Format::Table => format!(
            "selected: {}\nrecords: {} (dropped {})\n",
            selected.join(","),
            restricted.len(),
            db.len() - restricted.len()
        ),
        Format::Jsonl => jsonl([json!({
            "selected": selected,
            "records": restricted.len(),
            "dropped": db.len() - restricted.len(),
        })]),
    })
}

pub fn balance(
    db_path: &Path,
    threshold: u64,
    target: Option<u64>,
    max_iterations: Option<u64>,
    out: &Path,
    f: Format,
) -> CmdResult {
    let db = labelstore::load(db_path)?;
    let selected = balance::occurrence_filter(&db, &SelectionConfig { min_occurrences: threshold });
    if selected.is_empty() {
        return Err(CliError::domain(format!("no class has at least {threshold} displayed labels")));
    }
    let kept = balance::drop_all_unknown(&db, &selected)?;
    let target = target.map_or(BalanceTarget::MinMax, BalanceTarget::AtLeast);
    let plan = balance::greedy_balance(&kept, &selected, target, max_iterations)?;
    balance::save_plan(&plan, out)?;
    Ok(match f {
        Format::Table => {
            let mut s = String::from("class,achieved_displayed\n");
            for (c, n) in plan.selected_classes.iter().zip(&plan.achieved_counts) {
                writeln!(s, "{c},{n}").unwrap();
            }
            writeln!(s, "samples: {}", plan.weights.len()).unwrap();
            writeln!(s, "copies_added: {}", plan.copies_added).unwrap();
            writeln!(s, "initial_ratio: {:.4}", plan.initial_ratio).unwrap();
            writeln!(s, "ratio: {:.4}", plan.ratio).unwrap();
            s
        }
        Format::Jsonl => jsonl([json!({
            "selected": plan.selected_classes,
            "achieved_counts": plan.achieved_counts,
            "samples": plan.weights.len(),
            "copies_added": plan.copies_added,
            "initial_ratio": plan.initial_ratio,
            "ratio": plan.ratio,
        })]),
    })
}

fn report_jsonl(report: &MetricReport) -> String {
    jsonl(
        report
            .per_class
            .iter()
            .map(|c| {
                json!({
                    "class": c.class,
                    "f1": c.f1,
                    "accuracy": c.accuracy,
                    "annotated": c.counts.annotated(),
                })
            })
            .chain([json!({
                "macro_f1": report.macro_f1,
                "accuracy": report.accuracy,
                "weighted_macro_f1": report.weighted_macro_f1,
                "skipped_classes": report.skipped_classes,
                "selection_score": report.selection_score,
            })]),
    )
}

pub fn evaluate(
    db_path: &Path,
    predictions: &Path,
    threshold: f64,
    weights: Option<&Path>,
    weights_db: Option<&Path>,
    out: Option<&Path>,
    f: Format,
) -> CmdResult {
    let db = labelstore::load(db_path)?;
    let pred = read_predictions(predictions, &db)?;
    let weights: Option<OccurrenceWeights> = match (weights, weights_db) {
        (Some(p), _) => Some(read_weights(p)?),
        (None, Some(p)) => Some(OccurrenceWeights::from_histogram(&labelstore::load(p)?.class_histogram())),
        (None, None) => None,
    };
    let report = metrics::evaluate(&db.label_matrix(), &pred, threshold, weights.as_ref())?;
    if let Some(out) = out {
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        bytes.push(b'\n');
        write_atomic(out, &bytes)?;
    }
    Ok(match f {
        Format::Table => report.render_table(),
        Format::Jsonl => report_jsonl(&report),
    })
}

pub fn train_demo(
    synth: &SynthConfig,
    config: &TrainConfig,
    out_report: Option<&Path>,
    out_model: Option<&Path>,
    f: Format,
) -> CmdResult {
    let task = trainer::synth_dataset(synth)?;
    let mut model = ToyModel::zeros(task.labels.class_names().to_vec(), synth.features);
    let report = trainer::fit(&mut model, &task.features, &task.labels, config)?;
    if let Some(p) = out_report {
        write_atomic(p, &report.to_json())?;
    }
    if let Some(p) = out_model {
        trainer::save_model(&report.best_model, p)?;
    }

    let fmt_loss = |l: Option<f64>| l.map_or_else(|| "-".to_string(), |l| format!("{l:.4}"));
    Ok(match f {
        Format::Table => {
            let mut s = String::from("epoch  train_loss  val_f1_macro  val_accuracy  selection\n");
            for e in &report.history {
                writeln!(
                    s,
                    "{:>5}  {:>10}  {:>12.4}  {:>12.4}  {:>9.4}",
                    e.epoch,
                    fmt_loss(e.train_loss),
                    e.validation.macro_f1,
                    e.validation.accuracy,
                    e.selection_score
                )
                .unwrap();
            }
            match report.best() {
                Some(b) => {
                    writeln!(s, "best_epoch: {}", b.epoch).unwrap();
                    writeln!(s, "best_macro_f1: {:.4}", b.validation.macro_f1).unwrap();
                    writeln!(s, "best_accuracy: {:.4}", b.validation.accuracy).unwrap();
                }
                None => s.push_str("best_epoch: none\n"),
            }
            s
        }
        Format::Jsonl => jsonl(
            report
                .history
                .iter()
                .map(|e| {
                    json!({
                        "epoch": e.epoch,
                        "train_loss": e.train_loss,
                        "val_macro_f1": e.validation.macro_f1,
                        "val_accuracy": e.validation.accuracy,
                        "selection_score": e.selection_score,
                    })
                })
                .chain([json!({
                    "best_epoch": report.best_epoch,
                    "best_macro_f1": report.best().map(|b| b.validation.macro_f1),
                    "best_accuracy": report.best().map(|b| b.validation.accuracy),
                })]),
        ),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn grad_check(
    fixture: Option<&Path>,
    seed: u64,
    step: f64,
    epsilon: f64,
    samples: usize,
    classes: usize,
    missingness: f64,
    f: Format,
) -> Result<(String, u8), CliError> {
    let fixture = match fixture {
        Some(p) => GradFixture::read(p)?,
        None => GradFixture::random(seed, samples, classes, missingness)?,
    };
    let (pred, truth) = fixture.matrices()?;
    let config = SoftF1Config {
        epsilon,
        ..Default::default()
    };
    let result = loss::soft_f1_loss(&pred, &truth, &config)?;
    let check = loss::finite_difference_check(&pred, &truth, &config, step)?;
    let passed = check.max_relative_error < GRAD_CHECK_LIMIT;

    let out = match f {
        Format::Table => {
            let mut s = String::from("class,soft_f1,annotated\n");
            for ((c, score), n) in result.per_class_soft_f1.iter().zip(&result.annotated_counts) {
                let score = score.map_or_else(|| "skipped".to_string(), |v| format!("{v:.6}"));
                writeln!(s, "{c},{score},{n}").unwrap();
            }
            writeln!(s, "loss: {:.6}", result.loss).unwrap();
            writeln!(s, "checked: {}", check.checked).unwrap();
            writeln!(s, "excluded: {}", check.excluded).unwrap();
            writeln!(s, "max_relative_error: {:.3e}", check.max_relative_error).unwrap();
            writeln!(s, "status: {}", if passed { "ok" } else { "FAILED" }).unwrap();
            s
        }
        Format::Jsonl => jsonl(
            result
                .per_class_soft_f1
                .iter()
                .zip(&result.annotated_counts)
                .map(|((c, score), n)| json!({"class": c, "soft_f1": score, "annotated": n}))
                .chain([json!({
                    "loss": result.loss,
                    "checked": check.checked,
                    "excluded": check.excluded,
                    "max_relative_error": check.max_relative_error,
                    "passed": passed,
                })]),
        ),
    };
    Ok((out, if passed { 0 } else { 1 }))
}
