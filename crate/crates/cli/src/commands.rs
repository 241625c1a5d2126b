//! The five experiment commands. Each one validates its inputs, runs the
//! corresponding core routine, writes its artifacts under the output
//! directory, and prints a short human-readable report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use edl_core::downstream::compare_losses;
use edl_core::evolve::{gd_pretrain, run_evolution, GenerationRecord, MutationMode, RunResult};
use edl_core::fitness::{variance_probe, EvalSet};
use edl_core::lossnet::LossNetParams;
use edl_core::{fitness, seeds, Error, Result};

use crate::config::{LogFormat, RunConfig};
use crate::logging::{
    generation_csv_row, run_id, write_csv, JsonlLog, GENERATION_CSV_HEADER,
};
use crate::summary::{
    summarize, summary_csv_row, summary_table_row, RunSummary, SUMMARY_CSV_HEADER,
    SUMMARY_TABLE_HEADER,
};

/// Hash only the scientific part of the config, so identical experiments
/// get identical run ids regardless of where their artifacts land.
fn science_id(command: &str, cfg: &RunConfig, mode: MutationMode, seed: u64) -> Result<String> {
    let evolution = serde_json::to_string(&cfg.evolution)?;
    let mixture = serde_json::to_string(&cfg.mixture)?;
    Ok(run_id(&[
        command,
        &evolution,
        &mixture,
        &mode.to_string(),
        &seed.to_string(),
    ]))
}

fn write_generation_log(
    dir: &Path,
    stem: &str,
    format: LogFormat,
    id: &str,
    history: &[GenerationRecord],
) -> Result<PathBuf> {
    match format {
        LogFormat::Jsonl => {
            let path = dir.join(format!("{stem}.jsonl"));
            let mut log = JsonlLog::create(&path, id)?;
            for record in history {
                log.push(record)?;
            }
            log.finish()?;
            Ok(path)
        }
        LogFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            let rows: Vec<String> = history.iter().map(generation_csv_row).collect();
            write_csv(&path, GENERATION_CSV_HEADER, &rows)?;
            Ok(path)
        }
    }
}

fn run_one(cfg: &RunConfig, mode: MutationMode, seed: u64) -> Result<RunResult> {
    run_evolution(&cfg.evolution, &cfg.mixture, mode, seed, |_| {})
}

/// Pretrain one loss network and write checkpoint, log, and summary.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let mode = cfg.mutation_mode;
    let seed = cfg.seed;
    let id = science_id("pretrain", cfg, mode, seed)?;
    let dir = cfg.output_dir.join(format!("pretrain-{mode}-seed{seed}"));
    fs::create_dir_all(&dir)?;

    let result = run_one(cfg, mode, seed)?;

    let log_path = write_generation_log(&dir, "generations", cfg.log_format, &id, &result.history)?;
    let checkpoint_path = dir.join("checkpoint.json");
    result.best.save(&checkpoint_path)?;

    let s = summarize(&result.history);
    let summary_path = dir.join("summary.csv");
    write_csv(
        &summary_path,
        SUMMARY_CSV_HEADER,
        &[summary_csv_row(&id, &mode.to_string(), seed, &s)],
    )?;

    println!("run {id}: mode={mode} seed={seed}");
    println!("{SUMMARY_TABLE_HEADER}");
    println!("{}", summary_table_row(&mode.to_string(), &s));
    println!(
        "wrote {}, {}, {}",
        log_path.display(),
        checkpoint_path.display(),
        summary_path.display()
    );
    Ok(())
}

/// Mean of each summary statistic over a set of runs.
fn aggregate(summaries: &[RunSummary]) -> RunSummary {
    let n = summaries.len() as f64;
    RunSummary {
        final_best: summaries.iter().map(|s| s.final_best).sum::<f64>() / n,
        mean_fit: summaries.iter().map(|s| s.mean_fit).sum::<f64>() / n,
        max_acc: summaries.iter().map(|s| s.max_acc).sum::<f64>() / n,
        mean_acc: summaries.iter().map(|s| s.mean_acc).sum::<f64>() / n,
        std_acc: summaries.iter().map(|s| s.std_acc).sum::<f64>() / n,
        epoch_at_best: (summaries.iter().map(|s| s.epoch_at_best).sum::<usize>() as f64 / n)
            .round() as usize,
    }
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Run both mutation modes over the ablation seed list and write the
/// paired summary plus seed-averaged fitness curves.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    if cfg.ablation_seeds.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ablation needs at least 2 seeds to report a spread, got {}",
            cfg.ablation_seeds.len()
        )));
    }
    let dir = cfg.output_dir.join("ablate");
    fs::create_dir_all(&dir)?;

    let modes = [MutationMode::Normal, MutationMode::Chaotic];
    let mut summary_rows = Vec::new();
    let mut curves: Vec<Vec<Vec<f64>>> = vec![Vec::new(), Vec::new()];
    let mut summaries: Vec<Vec<RunSummary>> = vec![Vec::new(), Vec::new()];

    for (mi, &mode) in modes.iter().enumerate() {
        for &seed in &cfg.ablation_seeds {
            let id = science_id("ablate", cfg, mode, seed)?;
            let result = run_one(cfg, mode, seed)?;
            write_generation_log(
                &dir,
                &format!("{mode}-seed{seed}"),
                cfg.log_format,
                &id,
                &result.history,
            )?;
            let s = summarize(&result.history);
            summary_rows.push(summary_csv_row(&id, &mode.to_string(), seed, &s));
            summaries[mi].push(s);
            curves[mi].push(
                result
                    .history
                    .iter()
                    .map(|g| g.global_best_fitness)
                    .collect(),
            );
        }
    }

    let summary_path = dir.join("summary.csv");
    write_csv(&summary_path, SUMMARY_CSV_HEADER, &summary_rows)?;

    // Seed-averaged global-best curves, one row per generation.
    let generations = cfg.evolution.generations;
    let mut curve_rows = Vec::with_capacity(generations);
    for g in 0..generations {
        let normal: Vec<f64> = curves[0].iter().map(|c| c[g]).collect();
        let chaotic: Vec<f64> = curves[1].iter().map(|c| c[g]).collect();
        let (nm, ns) = mean_and_std(&normal);
        let (cm, cs) = mean_and_std(&chaotic);
        curve_rows.push(format!("{g},{nm},{ns},{cm},{cs}"));
    }
    let curves_path = dir.join("curves.csv");
    write_csv(
        &curves_path,
        "generation,normal_mean,normal_std,chaotic_mean,chaotic_std",
        &curve_rows,
    )?;

    let agg_normal = aggregate(&summaries[0]);
    let agg_chaotic = aggregate(&summaries[1]);
    println!(
        "ablation over {} seeds per mode",
        cfg.ablation_seeds.len()
    );
    println!("{SUMMARY_TABLE_HEADER}");
    println!("{}", summary_table_row("normal", &agg_normal));
    println!("{}", summary_table_row("chaotic", &agg_chaotic));
    println!(
        "gain     {:>9.2}% {:>9.2}%",
        100.0 * (agg_chaotic.final_best / agg_normal.final_best - 1.0),
        100.0 * (agg_chaotic.mean_fit / agg_normal.mean_fit - 1.0)
    );
    println!(
        "wrote {}, {}",
        summary_path.display(),
        curves_path.display()
    );
    Ok(())
}

/// Re-score a saved checkpoint on a fresh seeded validation set.
pub fn cmd_eval(checkpoint: &Path, cfg: &RunConfig) -> Result<()> {
    let net = LossNetParams::load(checkpoint)?;
    let mut rng = seeds::stream(cfg.seed, seeds::tag::VALIDATION, 0);
    let set = EvalSet::sample(
        &cfg.mixture,
        net.class_count(),
        cfg.evolution.validation_pairs,
        &mut rng,
    )?;
    let mut ws = net.workspace();
    let report = fitness::evaluate(&net, &set, &mut ws)?;
    println!(
        "checkpoint {} (classes={}, {} parameters)",
        checkpoint.display(),
        net.class_count(),
        net.param_count()
    );
    println!(
        "fitness {:.6}  accuracy {:.4}  pairs {}  ties {}",
        report.fitness, report.accuracy, report.pair_count, report.tie_count
    );
    Ok(())
}

#[derive(Serialize)]
struct EpochRow<'a> {
    schema_version: u32,
    run_id: &'a str,
    loss: &'a str,
    seed: u64,
    epoch: usize,
    mean_loss: f64,
    train_accuracy: f64,
    test_accuracy: f64,
}

/// Train the blob classifier with cross-entropy and with the learned loss,
/// and write the paired comparison.
pub fn cmd_downstream(checkpoint: &Path, cfg: &RunConfig) -> Result<()> {
    let net = LossNetParams::load(checkpoint)?;
    let ds = &cfg.downstream;
    if net.class_count() != ds.blob.classes {
        return Err(Error::ClassMismatch {
            expected: net.class_count(),
            got: ds.blob.classes,
        });
    }
    let dir = cfg.output_dir.join("downstream");
    fs::create_dir_all(&dir)?;

    let blob_json = serde_json::to_string(&ds.blob)?;
    let seeds_join = ds
        .seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let id = run_id(&[
        "downstream",
        &blob_json,
        &ds.epochs.to_string(),
        &ds.learning_rate.to_string(),
        &seeds_join,
    ]);

    let report = compare_losses(&ds.blob, &net, ds.epochs, ds.learning_rate, &ds.seeds)?;

    let comparison_path = dir.join("comparison.csv");
    let rows: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.seed,
                r.ce_train_accuracy,
                r.learned_train_accuracy,
                r.ce_test_accuracy,
                r.learned_test_accuracy,
                r.ce_final_loss,
                r.learned_final_loss
            )
        })
        .collect();
    write_csv(
        &comparison_path,
        "seed,ce_train_accuracy,learned_train_accuracy,ce_test_accuracy,\
learned_test_accuracy,ce_final_loss,learned_final_loss",
        &rows,
    )?;

    let history_path = dir.join("history.jsonl");
    {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(fs::File::create(&history_path)?);
        for arm in &report.histories {
            for e in &arm.history {
                let row = EpochRow {
                    schema_version: crate::config::SCHEMA_VERSION,
                    run_id: &id,
                    loss: arm.loss,
                    seed: arm.seed,
                    epoch: e.epoch,
                    mean_loss: e.mean_loss,
                    train_accuracy: e.train_accuracy,
                    test_accuracy: e.test_accuracy,
                };
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
    }

    println!("downstream blobs: {} seeds, {} epochs", ds.seeds.len(), ds.epochs);
    println!("loss            mean test accuracy");
    println!("cross_entropy   {:>10.4}", report.mean_ce_accuracy);
    println!("learned         {:>10.4}", report.mean_learned_accuracy);
    for r in &report.rows {
        println!(
            "  seed {}: train {:.4} vs {:.4}, test {:.4} vs {:.4}",
            r.seed,
            r.ce_train_accuracy,
            r.learned_train_accuracy,
            r.ce_test_accuracy,
            r.learned_test_accuracy
        );
    }
    println!(
        "wrote {}, {}",
        comparison_path.display(),
        history_path.display()
    );
    Ok(())
}

/// Measure the Monte-Carlo variance of the fitness estimator per batch
/// count, on a freshly initialized network.
pub fn cmd_probe_variance(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)?;
    let mut init_rng = seeds::stream(cfg.seed, seeds::tag::INIT, 0);
    let net = LossNetParams::init(
        cfg.evolution.class_count,
        &mut init_rng,
        cfg.evolution.init_scale,
    )?;
    let rows = variance_probe(
        &net,
        &cfg.mixture,
        &cfg.probe.batch_counts,
        cfg.probe.pairs_per_batch,
        cfg.probe.trials,
        cfg.seed,
    )?;

    let base = rows[0].variance;
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.batches,
                r.trials,
                r.mean_fitness,
                r.variance,
                if base > 0.0 { r.variance / base } else { 0.0 }
            )
        })
        .collect();
    let path = cfg.output_dir.join("variance.csv");
    write_csv(
        &path,
        "batches,trials,mean_fitness,variance,variance_ratio",
        &csv_rows,
    )?;

    println!("batches  trials  mean_fitness      variance  ratio_to_b1");
    for r in &rows {
        println!(
            "{:>7} {:>7}  {:>12.6}  {:>12.3e}  {:>11.4}",
            r.batches,
            r.trials,
            r.mean_fitness,
            r.variance,
            if base > 0.0 { r.variance / base } else { 0.0 }
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Train the gradient-descent baseline and write its checkpoint and final
/// validation report.
pub fn cmd_gd(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.output_dir.join(format!("gd-seed{}", cfg.seed));
    fs::create_dir_all(&dir)?;
    let out = gd_pretrain(&cfg.gd, &cfg.mixture, cfg.seed, |_| {})?;

    let checkpoint_path = dir.join("checkpoint.json");
    out.params.save(&checkpoint_path)?;

    let steps_path = dir.join("steps.csv");
    let rows: Vec<String> = out
        .history
        .iter()
        .map(|s| format!("{},{},{}", s.step, s.train_fitness, s.grad_norm))
        .collect();
    write_csv(&steps_path, "step,train_fitness,grad_norm", &rows)?;

    println!(
        "gd baseline: {} steps, validation fitness {:.6}, accuracy {:.4}",
        cfg.gd.steps, out.final_val.fitness, out.final_val.accuracy
    );
    println!(
        "wrote {}, {}",
        checkpoint_path.display(),
        steps_path.display()
    );
    Ok(())
}
