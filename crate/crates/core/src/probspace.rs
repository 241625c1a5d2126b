//! Synthetic prediction-label pairs on the probability simplex.
//!
//! Samples `(p, y)` from a controllable three-component mixture so that the
//! regions that dominate classifier training dynamics are well covered:
//!
//! - `uniform`: a flat draw over the whole simplex (broad intermediate
//!   coverage),
//! - `extreme`: one dominant coordinate pushed close to 1, chosen to be the
//!   true class half of the time (confidently-right and confidently-wrong
//!   predictions),
//! - `boundary`: the true class and one competitor share most of the mass
//!   with a small gap between them (boundary-confusing predictions).
//!
//! Labels are always drawn uniformly. The error-severity proxy for a sample
//! is `hardness(p, y) = 1 - p[y]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Entries below this are clamped before renormalization so downstream code
/// never sees exact zeros from floating-point underflow.
const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on the sum-to-one invariant.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// One synthetic prediction-label sample: a probability vector over `C`
/// classes and a true-class index.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbLabelPair {
    p: Vec<f64>,
    y: usize,
}

impl ProbLabelPair {
    /// Build a pair, enforcing the simplex invariants.
    pub fn new(p: Vec<f64>, y: usize) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "probability vector needs at least 2 entries, got {}",
                p.len()
            )));
        }
        if y >= p.len() {
            return Err(Error::InvalidArgument(format!(
                "label {} out of range for {} classes",
                y,
                p.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "probability entry {i} = {v} outside [0, 1]"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, expected 1 within {SIMPLEX_TOL}"
            )));
        }
        Ok(Self { p, y })
    }

    /// Internal constructor for samplers whose output is valid by
    /// construction.
    fn from_parts(p: Vec<f64>, y: usize) -> Self {
        debug_assert!(y < p.len());
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        Self { p, y }
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn label(&self) -> usize {
        self.y
    }

    pub fn class_count(&self) -> usize {
        self.p.len()
    }

    /// Probability assigned to the true class.
    pub fn true_class_prob(&self) -> f64 {
        self.p[self.y]
    }
}

/// Mixture weights and shape knobs for the synthetic sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    /// Fraction of flat simplex draws.
    pub weight_uniform: f64,
    /// Fraction of extreme-confidence draws (one coordinate near 1).
    pub weight_extreme: f64,
    /// Fraction of boundary-confusing draws (two near-equal top entries).
    pub weight_boundary: f64,
    /// How hard the dominant coordinate of an extreme draw is pushed toward
    /// 1; the dominant value is `1 - 0.05 * u^extreme_concentration` with
    /// `u ~ Unif(0,1)`, so it always lands in `[0.95, 1)`.
    pub extreme_concentration: f64,
    /// Upper bound on the top-two probability gap in boundary draws.
    pub boundary_gap: f64,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            weight_uniform: 0.4,
            weight_extreme: 0.35,
            weight_boundary: 0.25,
            extreme_concentration: 4.0,
            boundary_gap: 0.1,
        }
    }
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [
            ("weight_uniform", self.weight_uniform),
            ("weight_extreme", self.weight_extreme),
            ("weight_boundary", self.weight_boundary),
        ];
        for (name, v) in w {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        let sum = self.weight_uniform + self.weight_extreme + self.weight_boundary;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {sum}, expected 1 within 1e-9"
            )));
        }
        if !(self.extreme_concentration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "extreme_concentration = {} must be positive",
                self.extreme_concentration
            )));
        }
        if !(0.0..=1.0).contains(&self.boundary_gap) {
            return Err(Error::InvalidArgument(format!(
                "boundary_gap = {} must lie in [0, 1]",
                self.boundary_gap
            )));
        }
        Ok(())
    }
}

/// Error-severity (hardness) score: `1 - p[y]`.
pub fn hardness(pair: &ProbLabelPair) -> f64 {
    1.0 - pair.true_class_prob()
}

/// Draw one synthetic pair from the mixture.
pub fn sample_pair<R: Rng + ?Sized>(
    cfg: &MixtureConfig,
    class_count: usize,
    rng: &mut R,
) -> Result<ProbLabelPair> {
    cfg.validate()?;
    if class_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "class_count = {class_count} must be at least 2"
        )));
    }
    Ok(sample_pair_unchecked(cfg, class_count, rng))
}

/// Draw exactly `n` pairs. Deterministic given the rng state.
pub fn sample_batch<R: Rng + ?Sized>(
    cfg: &MixtureConfig,
    class_count: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ProbLabelPair>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "batch size must be at least 1".into(),
        ));
    }
    cfg.validate()?;
    if class_count < 2 {
        return Err(Error::InvalidArgument(format!(
            "class_count = {class_count} must be at least 2"
        )));
    }
    Ok((0..n)
        .map(|_| sample_pair_unchecked(cfg, class_count, rng))
        .collect())
}

/// Mixture draw with preconditions already checked.
///
/// Draw order is fixed (label, component selector, component-specific draws)
/// so a seeded stream always produces the same batch.
fn sample_pair_unchecked<R: Rng + ?Sized>(
    cfg: &MixtureConfig,
    c: usize,
    rng: &mut R,
) -> ProbLabelPair {
    let y = rng.random_range(0..c);
    let selector: f64 = rng.random();
    let mut p = if selector < cfg.weight_uniform {
        sample_uniform(c, rng)
    } else if selector < cfg.weight_uniform + cfg.weight_extreme {
        sample_extreme(cfg, c, y, rng)
    } else {
        sample_boundary(cfg, c, y, rng)
    };
    clamp_renormalize(&mut p);
    ProbLabelPair::from_parts(p, y)
}

/// Flat simplex draw: normalized independent unit-rate exponentials.
fn sample_uniform<R: Rng + ?Sized>(c: usize, rng: &mut R) -> Vec<f64> {
    let mut p: Vec<f64> = (0..c).map(|_| exponential(rng)).collect();
    normalize_to(&mut p, 1.0);
    p
}

/// One coordinate in [0.95, 1), the rest a flat split of the remainder.
/// The dominant coordinate is the true class with probability 0.5.
fn sample_extreme<R: Rng + ?Sized>(cfg: &MixtureConfig, c: usize, y: usize, rng: &mut R) -> Vec<f64> {
    let dominant = if rng.random::<f64>() < 0.5 {
        y
    } else {
        wrong_class(c, y, rng)
    };
    let u: f64 = rng.random();
    let v = 1.0 - 0.05 * u.powf(cfg.extreme_concentration);
    let mut rest: Vec<f64> = (0..c - 1).map(|_| exponential(rng)).collect();
    normalize_to(&mut rest, 1.0 - v);
    let mut p = Vec::with_capacity(c);
    let mut it = rest.into_iter();
    for i in 0..c {
        p.push(if i == dominant { v } else { it.next().unwrap() });
    }
    p
}

/// The true class and one competitor share mass `m ~ Unif[0.6, 1]` with gap
/// `delta <= boundary_gap`; the remainder is split flatly over the other
/// coordinates, rescaled if needed so the chosen two stay on top.
fn sample_boundary<R: Rng + ?Sized>(cfg: &MixtureConfig, c: usize, y: usize, rng: &mut R) -> Vec<f64> {
    let competitor = wrong_class(c, y, rng);
    let m = if c == 2 {
        1.0
    } else {
        0.6 + 0.4 * rng.random::<f64>()
    };
    let delta = rng.random::<f64>() * cfg.boundary_gap.min(m);
    let mut hi = (m + delta) / 2.0;
    let mut lo = (m - delta) / 2.0;
    let remainder = 1.0 - m;

    let mut rest = if c > 2 {
        let mut rest: Vec<f64> = (0..c - 2).map(|_| exponential(rng)).collect();
        normalize_to(&mut rest, remainder);
        rest
    } else {
        Vec::new()
    };

    // Keep the chosen pair strictly on top: if any remainder entry would
    // reach the smaller pair value, shrink the remainder and move the slack
    // onto the pair (split evenly, preserving the gap).
    if let Some(max_rest) = rest.iter().copied().fold(None::<f64>, |m, v| {
        Some(m.map_or(v, |m| m.max(v)))
    }) {
        if max_rest >= 0.999 * lo {
            let scale = if max_rest > 0.0 { 0.5 * lo / max_rest } else { 0.0 };
            for v in &mut rest {
                *v *= scale;
            }
            let slack = remainder * (1.0 - scale);
            hi += slack / 2.0;
            lo += slack / 2.0;
        }
    }

    let larger_to_true = rng.random::<f64>() < 0.5;
    let (true_val, comp_val) = if larger_to_true { (hi, lo) } else { (lo, hi) };
    let mut p = Vec::with_capacity(c);
    let mut it = rest.into_iter();
    for i in 0..c {
        if i == y {
            p.push(true_val);
        } else if i == competitor {
            p.push(comp_val);
        } else {
            p.push(it.next().unwrap());
        }
    }
    p
}

/// Uniform draw over the classes other than `y`.
fn wrong_class<R: Rng + ?Sized>(c: usize, y: usize, rng: &mut R) -> usize {
    let k = rng.random_range(0..c - 1);
    if k >= y {
        k + 1
    } else {
        k
    }
}

/// Unit-rate exponential variate.
fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random(); // [0, 1)
    -(1.0 - u).ln()
}

/// Scale a non-negative vector so it sums to `mass`.
fn normalize_to(v: &mut [f64], mass: f64) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        for x in v.iter_mut() {
            *x *= mass / sum;
        }
    } else {
        // All draws collapsed to zero; split evenly.
        let each = mass / v.len() as f64;
        v.iter_mut().for_each(|x| *x = each);
    }
}

/// Clamp exact-zero-ish entries to `PROB_FLOOR` and renormalize.
fn clamp_renormalize(p: &mut [f64]) {
    let mut changed = false;
    for v in p.iter_mut() {
        if *v < PROB_FLOOR {
            *v = PROB_FLOOR;
            changed = true;
        }
    }
    let sum: f64 = p.iter().sum();
    if changed || (sum - 1.0).abs() > 1e-15 {
        for v in p.iter_mut() {
            *v /= sum;
        }
    }
}
