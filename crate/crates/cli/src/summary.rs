//! Per-run summary statistics over the generation history.
//!
//! Definitions (documented here once, used by every command):
//! - final_best: last value of the non-increasing global-best fitness curve
//! - mean_fit: mean of that curve over all generations
//! - max/mean/std accuracy: statistics of the per-generation best
//!   candidate's trend accuracy, reported in percent; std is the sample
//!   standard deviation (n − 1)
//! - epoch_at_best: first generation, counted from 1, whose global best
//!   already equals the final value

use edl_core::evolve::GenerationRecord;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub final_best: f64,
    pub mean_fit: f64,
    /// Best per-generation accuracy, percent.
    pub max_acc: f64,
    /// Mean per-generation accuracy, percent.
    pub mean_acc: f64,
    /// Sample standard deviation of per-generation accuracy, percent.
    pub std_acc: f64,
    /// 1-based generation where the final best fitness first appeared.
    pub epoch_at_best: usize,
}

pub fn summarize(history: &[GenerationRecord]) -> RunSummary {
    assert!(!history.is_empty(), "summary of an empty run");
    let n = history.len() as f64;
    let final_best = history.last().unwrap().global_best_fitness;
    let mean_fit = history.iter().map(|g| g.global_best_fitness).sum::<f64>() / n;

    let accs: Vec<f64> = history.iter().map(|g| g.best_accuracy * 100.0).collect();
    let max_acc = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_acc = accs.iter().sum::<f64>() / n;
    let std_acc = if history.len() < 2 {
        0.0
    } else {
        (accs.iter().map(|a| (a - mean_acc).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };

    let epoch_at_best = history
        .iter()
        .position(|g| g.global_best_fitness == final_best)
        .expect("final value occurs in the curve")
        + 1;

    RunSummary {
        final_best,
        mean_fit,
        max_acc,
        mean_acc,
        std_acc,
        epoch_at_best,
    }
}

pub const SUMMARY_CSV_HEADER: &str =
    "run_id,mode,seed,final_best,mean_fit,max_acc,mean_acc,std_acc,epoch_at_best";

pub fn summary_csv_row(run_id: &str, mode: &str, seed: u64, s: &RunSummary) -> String {
    format!(
        "{run_id},{mode},{seed},{},{},{},{},{},{}",
        s.final_best, s.mean_fit, s.max_acc, s.mean_acc, s.std_acc, s.epoch_at_best
    )
}

/// Human-facing one-line rendering (fitness to 5 decimals, accuracy to 2,
/// matching the reference table style).
pub fn summary_table_row(label: &str, s: &RunSummary) -> String {
    format!(
        "{label:<8} {:>10.5} {:>10.5} {:>8.2} {:>8.2} {:>8.2} {:>6}",
        s.final_best, s.mean_fit, s.max_acc, s.mean_acc, s.std_acc, s.epoch_at_best
    )
}

pub const SUMMARY_TABLE_HEADER: &str =
    "mode     final_best   mean_fit  max_acc mean_acc  std_acc  epoch";
