//! Downstream demonstration: train a classifier through a learned loss.
//!
//! The task is deliberately small: Gaussian blobs with one cluster per
//! class, centers spaced on a circle, and a linear softmax classifier
//! trained by full-batch gradient descent. The loss is pluggable: either
//! ordinary cross-entropy or a frozen loss network applied to the softmax
//! output. Gradients flow through the learned loss by the chain rule
//!
//! `dL/dz_j = p_j * (g_j - sum_i g_i p_i)` with `g = dL/dp`,
//!
//! so the classifier update needs only the loss network's input gradient.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::lossnet::LossNetParams;
use crate::probspace::ProbLabelPair;
use crate::seeds;
use crate::{Error, Result};

/// Synthetic blob-task shape. Defaults give a clearly separable problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobConfig {
    pub classes: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of each cluster.
    pub spread: f64,
    /// Radius of the circle the cluster centers sit on.
    pub radius: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            dim: 10,
            train_per_class: 100,
            test_per_class: 50,
            spread: 0.4,
            radius: 4.0,
        }
    }
}

impl BlobConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "classes = {} must be at least 2",
                self.classes
            )));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "dim = {} must be at least 2",
                self.dim
            )));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::InvalidArgument(
                "train_per_class and test_per_class must be positive".into(),
            ));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spread = {} must be positive",
                self.spread
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius = {} must be positive",
                self.radius
            )));
        }
        Ok(())
    }
}

/// One split of feature rows (`len * dim`, row-major) with labels.
#[derive(Debug, Clone)]
pub struct Split {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize, dim: usize) -> &[f64] {
        &self.features[i * dim..(i + 1) * dim]
    }
}

/// Train and test splits of the blob task.
#[derive(Debug, Clone)]
pub struct BlobDataset {
    pub classes: usize,
    pub dim: usize,
    pub train: Split,
    pub test: Split,
}

/// Generate the blob task. Cluster `k` sits at angle `2 pi k / classes` on
/// a circle in the first two feature dimensions; remaining dimensions carry
/// pure noise. Rows come out grouped by class (full-batch training makes
/// order irrelevant).
pub fn make_blobs(cfg: &BlobConfig, seed: u64) -> Result<BlobDataset> {
    cfg.validate()?;
    let mut rng = seeds::stream(seed, seeds::tag::DOWNSTREAM, 0);
    let centers: Vec<[f64; 2]> = (0..cfg.classes)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / cfg.classes as f64;
            [cfg.radius * angle.cos(), cfg.radius * angle.sin()]
        })
        .collect();
    let mut draw_split = |per_class: usize| {
        let n = per_class * cfg.classes;
        let mut features = Vec::with_capacity(n * cfg.dim);
        let mut labels = Vec::with_capacity(n);
        for class in 0..cfg.classes {
            for _ in 0..per_class {
                for d in 0..cfg.dim {
                    let noise: f64 = rng.sample(StandardNormal);
                    let center = if d < 2 { centers[class][d] } else { 0.0 };
                    features.push(center + cfg.spread * noise);
                }
                labels.push(class);
            }
        }
        Split { features, labels }
    };
    let train = draw_split(cfg.train_per_class);
    let test = draw_split(cfg.test_per_class);
    Ok(BlobDataset {
        classes: cfg.classes,
        dim: cfg.dim,
        train,
        test,
    })
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Linear softmax classifier, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    classes: usize,
    dim: usize,
    /// Row-major `classes x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|j| {
                let row = &self.weights[j * self.dim..(j + 1) * self.dim];
                self.bias[j] + row.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Argmax prediction; ties resolve to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for j in 1..logits.len() {
            if logits[j] > logits[best] {
                best = j;
            }
        }
        best
    }

    pub fn accuracy(&self, split: &Split, dim: usize) -> f64 {
        let correct = (0..split.len())
            .filter(|&i| self.predict(split.row(i, dim)) == split.labels[i])
            .count();
        correct as f64 / split.len() as f64
    }
}

/// The training objective applied to the softmax output.
#[derive(Debug, Clone, Copy)]
pub enum LossKind<'a> {
    CrossEntropy,
    /// A frozen loss network; its class count must match the task.
    Learned(&'a LossNetParams),
}

impl LossKind<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Learned(_) => "learned",
        }
    }
}

/// Gradient of a learned loss with respect to the logits that produced
/// `probs`, by the softmax chain rule.
pub fn learned_logit_gradient(
    net: &LossNetParams,
    probs: &[f64],
    label: usize,
) -> Result<Vec<f64>> {
    let pair = ProbLabelPair::new(probs.to_vec(), label)?;
    let grads = net.backward(&pair, 1.0)?;
    let g = &grads.d_input[..probs.len()];
    let inner: f64 = g.iter().zip(probs.iter()).map(|(gi, pi)| gi * pi).sum();
    Ok(probs
        .iter()
        .zip(g.iter())
        .map(|(pj, gj)| pj * (gj - inner))
        .collect())
}

/// Per-epoch training statistics. The loss is measured on the forward pass
/// of the epoch; accuracies are measured after its update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// A trained classifier plus its epoch history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub classifier: LinearClassifier,
    pub history: Vec<EpochStat>,
}

/// Full-batch gradient descent from a zero-initialized classifier. The
/// procedure is deterministic given the dataset; the loss choice only
/// changes the gradient signal.
pub fn train_with_loss(
    data: &BlobDataset,
    loss: LossKind<'_>,
    epochs: usize,
    learning_rate: f64,
) -> Result<TrainOutcome> {
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be positive".into()));
    }
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning_rate = {learning_rate} must be finite and non-negative"
        )));
    }
    if let LossKind::Learned(net) = loss {
        if net.class_count() != data.classes {
            return Err(Error::ClassMismatch {
                expected: net.class_count(),
                got: data.classes,
            });
        }
    }

    let (classes, dim) = (data.classes, data.dim);
    let n = data.train.len() as f64;
    let mut model = LinearClassifier::new(classes, dim);
    let mut grad_w = vec![0.0; classes * dim];
    let mut grad_b = vec![0.0; classes];
    let mut history = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        grad_w.iter_mut().for_each(|v| *v = 0.0);
        grad_b.iter_mut().for_each(|v| *v = 0.0);
        let mut loss_sum = 0.0;

        for i in 0..data.train.len() {
            let x = data.train.row(i, dim);
            let y = data.train.labels[i];
            let probs = model.probabilities(x);
            let dz = match loss {
                LossKind::CrossEntropy => {
                    loss_sum += -probs[y].max(1e-300).ln();
                    let mut dz = probs.clone();
                    dz[y] -= 1.0;
                    dz
                }
                LossKind::Learned(net) => {
                    let pair = ProbLabelPair::new(probs.clone(), y)?;
                    loss_sum += net.forward(&pair)?;
                    learned_logit_gradient(net, &probs, y)?
                }
            };
            for (j, &dzj) in dz.iter().enumerate() {
                if dzj != 0.0 {
                    let row = &mut grad_w[j * dim..(j + 1) * dim];
                    for (g, v) in row.iter_mut().zip(x.iter()) {
                        *g += dzj * v;
                    }
                }
                grad_b[j] += dzj;
            }
        }

        for (w, g) in model.weights.iter_mut().zip(grad_w.iter()) {
            *w -= learning_rate * g / n;
        }
        for (b, g) in model.bias.iter_mut().zip(grad_b.iter()) {
            *b -= learning_rate * g / n;
        }

        let mean_loss = loss_sum / n;
        if !mean_loss.is_finite() {
            return Err(Error::NonFinite {
                context: format!("downstream training loss at epoch {epoch}"),
            });
        }
        history.push(EpochStat {
            epoch,
            mean_loss,
            train_accuracy: model.accuracy(&data.train, dim),
            test_accuracy: model.accuracy(&data.test, dim),
        });
    }

    Ok(TrainOutcome {
        classifier: model,
        history,
    })
}

/// Head-to-head outcome on one dataset draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub ce_train_accuracy: f64,
    pub learned_train_accuracy: f64,
    pub ce_test_accuracy: f64,
    pub learned_test_accuracy: f64,
    pub ce_final_loss: f64,
    pub learned_final_loss: f64,
}

/// Epoch-by-epoch record of one training arm.
#[derive(Debug, Clone)]
pub struct ArmHistory {
    pub seed: u64,
    /// `cross_entropy` or `learned`.
    pub loss: &'static str,
    pub history: Vec<EpochStat>,
}

/// Cross-entropy and learned-loss training compared over several dataset
/// seeds. Both arms see exactly the same data per seed.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub histories: Vec<ArmHistory>,
    pub mean_ce_accuracy: f64,
    pub mean_learned_accuracy: f64,
}

pub fn compare_losses(
    cfg: &BlobConfig,
    net: &LossNetParams,
    epochs: usize,
    learning_rate: f64,
    seeds: &[u64],
) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "compare_losses needs at least one seed".into(),
        ));
    }
    let mut rows = Vec::with_capacity(seeds.len());
    let mut histories = Vec::with_capacity(2 * seeds.len());
    for &seed in seeds {
        let data = make_blobs(cfg, seed)?;
        let ce = train_with_loss(&data, LossKind::CrossEntropy, epochs, learning_rate)?;
        let learned = train_with_loss(&data, LossKind::Learned(net), epochs, learning_rate)?;
        let ce_last = ce.history.last().unwrap();
        let learned_last = learned.history.last().unwrap();
        rows.push(ComparisonRow {
            seed,
            ce_train_accuracy: ce_last.train_accuracy,
            learned_train_accuracy: learned_last.train_accuracy,
            ce_test_accuracy: ce_last.test_accuracy,
            learned_test_accuracy: learned_last.test_accuracy,
            ce_final_loss: ce_last.mean_loss,
            learned_final_loss: learned_last.mean_loss,
        });
        histories.push(ArmHistory {
            seed,
            loss: LossKind::CrossEntropy.name(),
            history: ce.history,
        });
        histories.push(ArmHistory {
            seed,
            loss: LossKind::Learned(net).name(),
            history: learned.history,
        });
    }
    let mean = |f: fn(&ComparisonRow) -> f64| {
        rows.iter().map(f).sum::<f64>() / rows.len() as f64
    };
    Ok(ComparisonReport {
        mean_ce_accuracy: mean(|r| r.ce_test_accuracy),
        mean_learned_accuracy: mean(|r| r.learned_test_accuracy),
        rows,
        histories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> BlobConfig {
        BlobConfig {
            classes: 3,
            dim: 2,
            train_per_class: 60,
            test_per_class: 40,
            spread: 0.4,
            radius: 4.0,
        }
    }

    #[test]
    fn blobs_are_deterministic_and_shaped() {
        let cfg = small_cfg();
        let a = make_blobs(&cfg, 7).unwrap();
        let b = make_blobs(&cfg, 7).unwrap();
        assert_eq!(a.train.features, b.train.features);
        assert_eq!(a.test.labels, b.test.labels);
        assert_eq!(a.train.len(), 180);
        assert_eq!(a.test.len(), 120);
        assert_eq!(a.train.features.len(), 180 * 2);

        let c = make_blobs(&cfg, 8).unwrap();
        assert_ne!(a.train.features, c.train.features);
    }

    #[test]
    fn blob_points_cluster_around_their_centers() {
        let cfg = small_cfg();
        let data = make_blobs(&cfg, 3).unwrap();
        for i in 0..data.train.len() {
            let x = data.train.row(i, 2);
            let k = data.train.labels[i];
            let angle = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            let cx = 4.0 * angle.cos();
            let cy = 4.0 * angle.sin();
            let dist = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)).sqrt();
            assert!(dist < 4.0 * 0.4 * 2.0, "point {i} is {dist} from its center");
        }
    }

    #[test]
    fn config_validation_rejects_degenerate_shapes() {
        for bad in [
            BlobConfig { classes: 1, ..small_cfg() },
            BlobConfig { dim: 1, ..small_cfg() },
            BlobConfig { train_per_class: 0, ..small_cfg() },
            BlobConfig { spread: 0.0, ..small_cfg() },
            BlobConfig { radius: -1.0, ..small_cfg() },
        ] {
            assert!(make_blobs(&bad, 0).is_err());
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let cfg = BlobConfig {
            train_per_class: 6,
            test_per_class: 2,
            ..small_cfg()
        };
        let data = make_blobs(&cfg, 5).unwrap();
        // One epoch at learning rate 1 turns the update into the exact
        // mean gradient, recoverable from the weight delta.
        let out = train_with_loss(&data, LossKind::CrossEntropy, 1, 1.0).unwrap();
        let analytic: Vec<f64> = out.classifier.weights().iter().map(|w| -w).collect();

        let h = 1e-6;
        let n = data.train.len() as f64;
        let mean_ce = |weights: &[f64]| {
            let mut sum = 0.0;
            for i in 0..data.train.len() {
                let x = data.train.row(i, 2);
                let logits: Vec<f64> = (0..3)
                    .map(|j| x.iter().zip(&weights[j * 2..(j + 1) * 2]).map(|(a, b)| a * b).sum())
                    .collect();
                let p = softmax(&logits);
                sum += -p[data.train.labels[i]].ln();
            }
            sum / n
        };
        let base = vec![0.0; 6];
        for k in 0..6 {
            let mut plus = base.clone();
            plus[k] += h;
            let mut minus = base.clone();
            minus[k] -= h;
            let fd = (mean_ce(&plus) - mean_ce(&minus)) / (2.0 * h);
            assert!(
                (fd - analytic[k]).abs() < 1e-6,
                "weight {k}: fd {fd} vs analytic {}",
                analytic[k]
            );
        }
    }

    #[test]
    fn learned_logit_gradient_matches_finite_differences() {
        let mut rng = seeds::stream(1, seeds::tag::PROBE, 0);
        let net = LossNetParams::init(3, &mut rng, 1.5).unwrap();
        let logits = [0.3, -0.7, 1.1];
        let label = 2;
        let probs = softmax(&logits);
        let analytic = learned_logit_gradient(&net, &probs, label).unwrap();

        let h = 1e-6;
        for j in 0..3 {
            let mut zp = logits;
            zp[j] += h;
            let mut zm = logits;
            zm[j] -= h;
            let fp = net
                .forward(&ProbLabelPair::new(softmax(&zp), label).unwrap())
                .unwrap();
            let fm = net
                .forward(&ProbLabelPair::new(softmax(&zm), label).unwrap())
                .unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let scale = fd.abs().max(analytic[j].abs()).max(1e-8);
            assert!(
                (fd - analytic[j]).abs() / scale < 1e-4,
                "logit {j}: fd {fd} vs analytic {}",
                analytic[j]
            );
        }
    }

    #[test]
    fn cross_entropy_solves_separable_blobs() {
        let data = make_blobs(&small_cfg(), 11).unwrap();
        let out = train_with_loss(&data, LossKind::CrossEntropy, 200, 0.5).unwrap();
        let last = out.history.last().unwrap();
        assert!(last.test_accuracy >= 0.98, "{}", last.test_accuracy);
        // Loss decreases from the uniform-prediction start ln(3).
        assert!(out.history[0].mean_loss > last.mean_loss);
        assert!((out.history[0].mean_loss - 3.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn constant_loss_network_gives_no_learning_signal() {
        // The zero network outputs ln 2 for every input, so its input
        // gradient vanishes and the classifier never moves.
        let net = LossNetParams::zeros(3).unwrap();
        let data = make_blobs(&small_cfg(), 13).unwrap();
        let out = train_with_loss(&data, LossKind::Learned(&net), 5, 0.5).unwrap();
        assert!(out.classifier.weights().iter().all(|&w| w == 0.0));
        // Zero logits predict class 0 everywhere: exactly chance on the
        // balanced split.
        let last = out.history.last().unwrap();
        assert!((last.test_accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!((last.mean_loss - std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn zero_learning_rate_freezes_the_classifier() {
        let data = make_blobs(&small_cfg(), 17).unwrap();
        let out = train_with_loss(&data, LossKind::CrossEntropy, 3, 0.0).unwrap();
        assert_eq!(out.classifier, LinearClassifier::new(3, 2));
    }

    #[test]
    fn class_count_mismatch_is_rejected() {
        let net = LossNetParams::zeros(5).unwrap();
        let data = make_blobs(&small_cfg(), 19).unwrap();
        assert!(matches!(
            train_with_loss(&data, LossKind::Learned(&net), 1, 0.1),
            Err(Error::ClassMismatch { expected: 5, got: 3 })
        ));
    }

    #[test]
    fn comparison_runs_both_arms_on_identical_data() {
        let net = LossNetParams::zeros(3).unwrap();
        let report = compare_losses(&small_cfg(), &net, 5, 0.5, &[1, 2]).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.ce_test_accuracy.is_finite());
            assert!(row.learned_test_accuracy.is_finite());
        }
        assert!(compare_losses(&small_cfg(), &net, 5, 0.5, &[]).is_err());
    }
}
