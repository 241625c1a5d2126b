//! Ranking fitness in probability space.
//!
//! A candidate loss is judged by whether it orders samples the way the
//! hardness proxy `D(p, y) = 1 - p_y` does. For a pair of samples `(a, b)`
//! with `s = sign(D(a) - D(b))` and loss gap `dL = L(a) - L(b)`, the
//! pairwise objective is `softplus(-s * dL)`: near zero when the loss
//! agrees with the hardness ordering by a wide margin, growing linearly
//! when it disagrees. Fitness is the mean over sampled pairs (lower is
//! better); trend accuracy is the fraction of non-tied pairs with
//! `s * dL > 0`.

use rand::Rng;

use crate::lossnet::{sigmoid, softplus, LossGradients, LossNetParams, Workspace};
use crate::probspace::{hardness, sample_pair, MixtureConfig, ProbLabelPair};
use crate::seeds;
use crate::{Error, Result};

/// Two samples plus the precomputed hardness ordering between them.
#[derive(Debug, Clone)]
pub struct PairSample {
    a: ProbLabelPair,
    b: ProbLabelPair,
    sign: i8,
    hardness_gap: f64,
}

impl PairSample {
    pub fn new(a: ProbLabelPair, b: ProbLabelPair) -> Result<Self> {
        if a.class_count() != b.class_count() {
            return Err(Error::ClassMismatch {
                expected: a.class_count(),
                got: b.class_count(),
            });
        }
        let gap = hardness(&a) - hardness(&b);
        let sign = if gap > 0.0 {
            1
        } else if gap < 0.0 {
            -1
        } else {
            0
        };
        Ok(Self {
            a,
            b,
            sign,
            hardness_gap: gap,
        })
    }

    pub fn a(&self) -> &ProbLabelPair {
        &self.a
    }

    pub fn b(&self) -> &ProbLabelPair {
        &self.b
    }

    /// `sign(D(a) - D(b))`; 0 marks a hardness tie.
    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn hardness_gap(&self) -> f64 {
        self.hardness_gap
    }
}

/// A fixed collection of pair comparisons sharing one class count.
#[derive(Debug, Clone)]
pub struct EvalSet {
    comparisons: Vec<PairSample>,
    class_count: usize,
}

impl EvalSet {
    /// Draw `n_pairs` comparisons (two mixture samples each) from `rng`.
    pub fn sample<R: Rng + ?Sized>(
        mixture: &MixtureConfig,
        class_count: usize,
        n_pairs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_pairs == 0 {
            return Err(Error::InvalidArgument(
                "an evaluation set needs at least one pair".into(),
            ));
        }
        let mut comparisons = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let a = sample_pair(mixture, class_count, rng)?;
            let b = sample_pair(mixture, class_count, rng)?;
            comparisons.push(PairSample::new(a, b)?);
        }
        Ok(Self {
            comparisons,
            class_count,
        })
    }

    /// Wrap explicit comparisons; they must agree on the class count.
    pub fn from_comparisons(comparisons: Vec<PairSample>) -> Result<Self> {
        let class_count = match comparisons.first() {
            Some(c) => c.a.class_count(),
            None => {
                return Err(Error::InvalidArgument(
                    "an evaluation set needs at least one pair".into(),
                ))
            }
        };
        if comparisons.iter().any(|c| c.a.class_count() != class_count) {
            return Err(Error::InvalidArgument(
                "comparisons mix class counts".into(),
            ));
        }
        Ok(Self {
            comparisons,
            class_count,
        })
    }

    pub fn comparisons(&self) -> &[PairSample] {
        &self.comparisons
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.comparisons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparisons.is_empty()
    }
}

/// Aggregate fitness statistics over a set of comparisons.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FitnessReport {
    /// Mean pairwise ranking objective; lower is better.
    pub fitness: f64,
    /// Fraction of non-tied pairs ordered consistently with hardness;
    /// 0 when every pair is tied.
    pub accuracy: f64,
    /// Total comparisons scored.
    pub pair_count: usize,
    /// Comparisons with equal hardness, excluded from accuracy.
    pub tie_count: usize,
    /// Monte-Carlo batches pooled into this report.
    pub batch_count: usize,
}

/// Hardness and loss deltas for one ordered pair of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairComparison {
    /// `D(a) - D(b)`.
    pub delta_d: f64,
    /// `signum(delta_d)`.
    pub sign: i8,
    /// `L(a) - L(b)`.
    pub delta_l: f64,
}

/// Compare two samples under a candidate loss: the hardness gap, its sign,
/// and the loss gap. Swapping the arguments negates all three.
pub fn compare_pair(
    net: &LossNetParams,
    a: &ProbLabelPair,
    b: &ProbLabelPair,
) -> Result<PairComparison> {
    if a.class_count() != b.class_count() {
        return Err(Error::ClassMismatch {
            expected: a.class_count(),
            got: b.class_count(),
        });
    }
    let mut ws = net.workspace();
    let delta_d = hardness(a) - hardness(b);
    let delta_l = net.forward_with(a, &mut ws)? - net.forward_with(b, &mut ws)?;
    let sign = if delta_d > 0.0 {
        1
    } else if delta_d < 0.0 {
        -1
    } else {
        0
    };
    Ok(PairComparison {
        delta_d,
        sign,
        delta_l,
    })
}

/// Ranking objective of one comparison: `softplus(-sign * delta_l)`.
pub fn ranking_loss(cmp: &PairComparison) -> f64 {
    pair_loss(cmp.sign, cmp.delta_l)
}

/// Pairwise ranking objective `softplus(-s * dL)`. Ties score
/// `softplus(0) = ln 2` regardless of the loss gap.
#[inline]
pub fn pair_loss(sign: i8, loss_gap: f64) -> f64 {
    softplus(-(sign as f64) * loss_gap)
}

/// Score a network against a fixed evaluation set. Consumes no randomness.
pub fn evaluate(net: &LossNetParams, set: &EvalSet, ws: &mut Workspace) -> Result<FitnessReport> {
    if set.class_count() != net.class_count() {
        return Err(Error::ClassMismatch {
            expected: net.class_count(),
            got: set.class_count(),
        });
    }
    let mut err = None;
    let report = evaluate_fn(set, |pair| match net.forward_with(pair, ws) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if !report.fitness.is_finite() {
        return Err(Error::NonFinite {
            context: "fitness evaluation".into(),
        });
    }
    Ok(report)
}

/// Score an arbitrary loss function against a fixed evaluation set. This is
/// the reference path used by oracle losses and closed-form checks.
pub fn evaluate_fn<F: FnMut(&ProbLabelPair) -> f64>(set: &EvalSet, mut loss: F) -> FitnessReport {
    let mut sum = 0.0;
    let mut correct = 0usize;
    let mut ties = 0usize;
    for cmp in &set.comparisons {
        let gap = loss(&cmp.a) - loss(&cmp.b);
        sum += pair_loss(cmp.sign, gap);
        if cmp.sign == 0 {
            ties += 1;
        } else if (cmp.sign as f64) * gap > 0.0 {
            correct += 1;
        }
    }
    let scored = set.comparisons.len() - ties;
    FitnessReport {
        fitness: sum / set.comparisons.len() as f64,
        accuracy: if scored == 0 {
            0.0
        } else {
            correct as f64 / scored as f64
        },
        pair_count: set.comparisons.len(),
        tie_count: ties,
        batch_count: 1,
    }
}

/// Monte-Carlo fitness estimate: draw `batches` evaluation sets of
/// `pairs_per_batch` comparisons and pool the scores. The estimator's
/// variance shrinks as `1 / batches`.
pub fn estimate_fitness<R: Rng + ?Sized>(
    net: &LossNetParams,
    mixture: &MixtureConfig,
    batches: usize,
    pairs_per_batch: usize,
    rng: &mut R,
    ws: &mut Workspace,
) -> Result<FitnessReport> {
    if batches == 0 {
        return Err(Error::InvalidArgument(
            "batches must be at least 1".into(),
        ));
    }
    let mut fitness_sum = 0.0;
    let mut correct = 0.0;
    let mut pairs = 0usize;
    let mut ties = 0usize;
    for _ in 0..batches {
        let set = EvalSet::sample(mixture, net.class_count(), pairs_per_batch, rng)?;
        let r = evaluate(net, &set, ws)?;
        fitness_sum += r.fitness;
        correct += r.accuracy * (r.pair_count - r.tie_count) as f64;
        pairs += r.pair_count;
        ties += r.tie_count;
    }
    Ok(FitnessReport {
        fitness: fitness_sum / batches as f64,
        accuracy: if pairs == ties {
            0.0
        } else {
            correct / (pairs - ties) as f64
        },
        pair_count: pairs,
        tie_count: ties,
        batch_count: batches,
    })
}

/// One row of a Monte-Carlo variance probe.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct VarianceProbeRow {
    pub batches: usize,
    pub trials: usize,
    pub mean_fitness: f64,
    /// Sample variance (Bessel-corrected) of the fitness estimate.
    pub variance: f64,
}

/// Measure the spread of [`estimate_fitness`] for each batch count by
/// repeating the estimate `trials` times with independent draws. Requires
/// at least 30 trials for a usable variance estimate.
pub fn variance_probe(
    net: &LossNetParams,
    mixture: &MixtureConfig,
    batch_counts: &[usize],
    pairs_per_batch: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<VarianceProbeRow>> {
    if trials < 30 {
        return Err(Error::InvalidArgument(format!(
            "variance probe needs at least 30 trials, got {trials}"
        )));
    }
    if batch_counts.is_empty() || batch_counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "batch_counts must be non-empty and positive".into(),
        ));
    }
    let mut ws = net.workspace();
    let mut rows = Vec::with_capacity(batch_counts.len());
    for (bi, &batches) in batch_counts.iter().enumerate() {
        let mut values = Vec::with_capacity(trials);
        for trial in 0..trials {
            let idx = (bi as u64) << 32 | trial as u64;
            let mut rng = seeds::stream(seed, seeds::tag::FRESH_EVAL, idx);
            let r = estimate_fitness(net, mixture, batches, pairs_per_batch, &mut rng, &mut ws)?;
            values.push(r.fitness);
        }
        let mean = values.iter().sum::<f64>() / trials as f64;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (trials - 1) as f64;
        rows.push(VarianceProbeRow {
            batches,
            trials,
            mean_fitness: mean,
            variance,
        });
    }
    Ok(rows)
}

/// Fitness and its exact parameter gradient over one evaluation set.
/// `grads` is cleared and receives the gradient of the mean ranking
/// objective; ties contribute nothing (their term is constant).
pub fn batch_loss_and_grad(
    net: &LossNetParams,
    set: &EvalSet,
    ws: &mut Workspace,
    grads: &mut LossGradients,
) -> Result<f64> {
    if set.class_count() != net.class_count() {
        return Err(Error::ClassMismatch {
            expected: net.class_count(),
            got: set.class_count(),
        });
    }
    grads.d_params.iter_mut().for_each(|v| *v = 0.0);
    grads.d_input.iter_mut().for_each(|v| *v = 0.0);
    let n = set.len() as f64;
    let mut sum = 0.0;
    for cmp in &set.comparisons {
        let la = net.forward_with(&cmp.a, ws)?;
        let lb = net.forward_with(&cmp.b, ws)?;
        let s = cmp.sign as f64;
        let gap = la - lb;
        sum += softplus(-s * gap);
        if cmp.sign != 0 {
            // d softplus(-s * gap) / d gap = -s * sigmoid(-s * gap).
            let coef = -s * sigmoid(-s * gap) / n;
            net.backward_acc(&cmp.a, coef, ws, grads)?;
            net.backward_acc(&cmp.b, -coef, ws, grads)?;
        }
    }
    let fitness = sum / n;
    if !fitness.is_finite() {
        return Err(Error::NonFinite {
            context: "fitness gradient evaluation".into(),
        });
    }
    Ok(fitness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn rng(seed: u64) -> ChaCha8Rng {
        seeds::stream(seed, 0xf17, 0)
    }

    fn small_set(c: usize, n: usize, seed: u64) -> EvalSet {
        EvalSet::sample(&MixtureConfig::default(), c, n, &mut rng(seed)).unwrap()
    }

    #[test]
    fn ranking_loss_identities() {
        assert_eq!(pair_loss(0, 123.4), LN_2);
        assert_eq!(pair_loss(0, -5.0), LN_2);
        assert_eq!(pair_loss(1, 2.0), softplus(-2.0));
        assert_eq!(pair_loss(-1, 2.0), softplus(2.0));
        // Reward for agreeing with the ordering by a wide margin.
        assert!(pair_loss(1, 10.0) < 1e-4);
        // Penalty grows linearly for disagreeing.
        assert!(pair_loss(1, -10.0) > 9.9);
    }

    #[test]
    fn compare_pair_deltas_and_antisymmetry() {
        let net = LossNetParams::init(3, &mut rng(11), 1.0).unwrap();
        // Hardness 0.8 and 0.3 by construction.
        let a = ProbLabelPair::new(vec![0.2, 0.55, 0.25], 0).unwrap();
        let b = ProbLabelPair::new(vec![0.7, 0.2, 0.1], 0).unwrap();

        let same = compare_pair(&net, &a, &a).unwrap();
        assert_eq!(same.delta_d, 0.0);
        assert_eq!(same.sign, 0);
        assert_eq!(same.delta_l, 0.0);
        assert_eq!(ranking_loss(&same), LN_2);

        let cmp = compare_pair(&net, &a, &b).unwrap();
        assert!((cmp.delta_d - 0.5).abs() < 1e-15);
        assert_eq!(cmp.sign, 1);
        let mut ws = net.workspace();
        let expect_gap = net.forward_with(&a, &mut ws).unwrap() - net.forward_with(&b, &mut ws).unwrap();
        assert_eq!(cmp.delta_l, expect_gap);
        assert_eq!(ranking_loss(&cmp), pair_loss(1, expect_gap));

        let swapped = compare_pair(&net, &b, &a).unwrap();
        assert_eq!(swapped.delta_d, -cmp.delta_d);
        assert_eq!(swapped.sign, -cmp.sign);
        assert_eq!(swapped.delta_l, -cmp.delta_l);

        let wide = ProbLabelPair::new(vec![0.5, 0.5], 0).unwrap();
        assert!(matches!(
            compare_pair(&net, &a, &wide),
            Err(Error::ClassMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn evaluate_matches_flat_reference_loop() {
        let net = LossNetParams::init(10, &mut rng(1), 1.5).unwrap();
        let set = small_set(10, 256, 2);
        let mut ws = net.workspace();
        let report = evaluate(&net, &set, &mut ws).unwrap();

        // Independent accumulation straight from the definitions.
        let mut sum = 0.0;
        let mut correct = 0usize;
        let mut ties = 0usize;
        for cmp in set.comparisons() {
            let da = hardness(cmp.a());
            let db = hardness(cmp.b());
            let s = if da > db {
                1.0
            } else if da < db {
                -1.0
            } else {
                0.0
            };
            let gap = net.forward(cmp.a()).unwrap() - net.forward(cmp.b()).unwrap();
            let x = -s * gap;
            sum += x.max(0.0) + (-x.abs()).exp().ln_1p();
            if s == 0.0 {
                ties += 1;
            } else if s * gap > 0.0 {
                correct += 1;
            }
        }
        let expect_fitness = sum / set.len() as f64;
        let expect_acc = correct as f64 / (set.len() - ties) as f64;
        assert!((report.fitness - expect_fitness).abs() < 1e-12);
        assert!((report.accuracy - expect_acc).abs() < 1e-12);
        assert_eq!(report.tie_count, ties);
        assert_eq!(report.pair_count, 256);
    }

    #[test]
    fn zero_network_scores_ln2_with_zero_accuracy() {
        let net = LossNetParams::zeros(10).unwrap();
        let set = small_set(10, 512, 3);
        let mut ws = net.workspace();
        let r = evaluate(&net, &set, &mut ws).unwrap();
        // Every pair contributes exactly ln 2; the mean picks up only
        // summation rounding.
        assert!((r.fitness - LN_2).abs() < 1e-14);
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn hardness_oracle_has_perfect_trend_accuracy() {
        let set = small_set(10, 1024, 4);
        let r = evaluate_fn(&set, hardness);
        assert_eq!(r.accuracy, 1.0);
        assert!(r.fitness < LN_2);

        // The reversed oracle gets every non-tied pair wrong.
        let rev = evaluate_fn(&set, |p| p.true_class_prob());
        assert_eq!(rev.accuracy, 0.0);
        assert!(rev.fitness > LN_2);
    }

    #[test]
    fn ties_are_excluded_from_accuracy() {
        let a = ProbLabelPair::new(vec![0.7, 0.2, 0.1], 0).unwrap();
        let b = ProbLabelPair::new(vec![0.7, 0.15, 0.15], 0).unwrap();
        let c = ProbLabelPair::new(vec![0.2, 0.7, 0.1], 0).unwrap();
        let set = EvalSet::from_comparisons(vec![
            PairSample::new(a.clone(), b.clone()).unwrap(),
            PairSample::new(a.clone(), c.clone()).unwrap(),
        ])
        .unwrap();
        assert_eq!(set.comparisons()[0].sign(), 0);
        assert_eq!(set.comparisons()[1].sign(), -1);

        // Hardness-aligned oracle: the tie contributes ln 2 to fitness and
        // nothing to accuracy.
        let r = evaluate_fn(&set, hardness);
        assert_eq!(r.tie_count, 1);
        assert_eq!(r.accuracy, 1.0);
        assert!((r.fitness - (LN_2 + pair_loss(-1, -0.5)) / 2.0).abs() < 1e-12);

        // All ties: accuracy defined as 0.
        let all_tied =
            EvalSet::from_comparisons(vec![PairSample::new(a.clone(), a.clone()).unwrap()])
                .unwrap();
        let r = evaluate_fn(&all_tied, hardness);
        assert_eq!(r.accuracy, 0.0);
        assert_eq!(r.tie_count, 1);
    }

    #[test]
    fn estimate_is_deterministic_and_counts_pairs() {
        let net = LossNetParams::init(10, &mut rng(5), 1.0).unwrap();
        let mix = MixtureConfig::default();
        let mut ws = net.workspace();
        let a = estimate_fitness(&net, &mix, 4, 128, &mut rng(6), &mut ws).unwrap();
        let b = estimate_fitness(&net, &mix, 4, 128, &mut rng(6), &mut ws).unwrap();
        assert_eq!(a.fitness.to_bits(), b.fitness.to_bits());
        assert_eq!(a.pair_count, 512);
        assert!(estimate_fitness(&net, &mix, 0, 128, &mut rng(7), &mut ws).is_err());
    }

    #[test]
    fn variance_shrinks_with_batch_count() {
        let net = LossNetParams::init(3, &mut rng(8), 1.5).unwrap();
        let mix = MixtureConfig::default();
        let rows = variance_probe(&net, &mix, &[1, 4], 64, 48, 99).unwrap();
        assert_eq!(rows.len(), 2);
        let ratio = rows[0].variance / rows[1].variance;
        // Expected ratio 4 (variance ~ 1/B); allow a factor of 2 either way.
        assert!(
            ratio > 2.0 && ratio < 8.0,
            "variance ratio {ratio} outside [2, 8]"
        );
        // Means agree: both estimate the same expectation.
        assert!((rows[0].mean_fitness - rows[1].mean_fitness).abs() < 0.05);
    }

    #[test]
    fn variance_probe_validates_inputs() {
        let net = LossNetParams::zeros(3).unwrap();
        let mix = MixtureConfig::default();
        assert!(variance_probe(&net, &mix, &[1], 16, 29, 0).is_err());
        assert!(variance_probe(&net, &mix, &[], 16, 30, 0).is_err());
        assert!(variance_probe(&net, &mix, &[1, 0], 16, 30, 0).is_err());
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let net = LossNetParams::init(3, &mut rng(10), 1.5).unwrap();
        let set = small_set(3, 8, 11);
        let mut ws = net.workspace();
        let mut grads = LossGradients::zeros_like(&net);
        let fit = batch_loss_and_grad(&net, &set, &mut ws, &mut grads).unwrap();
        let direct = evaluate(&net, &set, &mut ws).unwrap();
        assert!((fit - direct.fitness).abs() < 1e-12);

        let h = 1e-5;
        for k in (0..net.param_count()).step_by(7) {
            let mut plus = net.clone();
            plus.flat_mut()[k] += h;
            let mut minus = net.clone();
            minus.flat_mut()[k] -= h;
            let fp = evaluate(&plus, &set, &mut ws).unwrap().fitness;
            let fm = evaluate(&minus, &set, &mut ws).unwrap().fitness;
            let fd = (fp - fm) / (2.0 * h);
            let scale = fd.abs().max(grads.d_params[k].abs()).max(1e-6);
            assert!(
                (fd - grads.d_params[k]).abs() / scale < 1e-4,
                "param {k}: fd {fd} vs analytic {}",
                grads.d_params[k]
            );
        }
    }

    #[test]
    fn mismatched_class_counts_are_rejected() {
        let a = ProbLabelPair::new(vec![0.5, 0.5], 0).unwrap();
        let b = ProbLabelPair::new(vec![0.3, 0.3, 0.4], 1).unwrap();
        assert!(PairSample::new(a, b).is_err());

        let net = LossNetParams::zeros(5).unwrap();
        let set = small_set(3, 4, 12);
        let mut ws = net.workspace();
        assert!(matches!(
            evaluate(&net, &set, &mut ws),
            Err(Error::ClassMismatch { expected: 5, got: 3 })
        ));
    }

    proptest::proptest! {
        #[test]
        fn pair_loss_is_nonnegative_and_anchored_at_ln2(
            sign in -1i8..=1,
            gap in -10.0f64..10.0,
        ) {
            let v = pair_loss(sign, gap);
            proptest::prop_assert!(v >= 0.0);
            let drive = sign as f64 * gap;
            if drive == 0.0 {
                proptest::prop_assert_eq!(v, LN_2);
            } else if drive > 0.0 {
                proptest::prop_assert!(v < LN_2);
            } else {
                proptest::prop_assert!(v > LN_2);
            }
        }
    }
}
