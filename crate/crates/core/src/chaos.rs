//! Chaotic coefficient stream for mutation scaling.
//!
//! The driver is the logistic map `x <- r x (1 - x)` at `r = 4`, where the
//! orbit is chaotic on (0, 1) with the arcsine invariant density
//! `1 / (pi sqrt(x (1 - x)))`. Coefficients therefore concentrate near 0
//! and 1: long quiet stretches interleaved with bursts of large steps.
//!
//! At `r = 4` a handful of states are degenerate: 0 and 1 collapse to the
//! absorbing point 0, and 0.75 is an exact fixed point (as are short
//! periodic orbits that finite precision can land on). [`ChaosState::next`]
//! detects both escapes, reseeds from the source RNG, and keeps going, so
//! the stream never silently turns constant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Logistic-map growth rate; fixed to the fully chaotic regime.
pub const LOGISTIC_R: f64 = 4.0;

/// Coefficients outside `(EDGE_TOL, 1 - EDGE_TOL)` are treated as collapsed
/// onto the absorbing boundary and trigger a reseed.
pub const EDGE_TOL: f64 = 1e-9;

const INIT_MARGIN: f64 = 1e-6;
const FIXED_POINT: f64 = 0.75;

/// One logistic-map orbit plus the RNG used to (re)seed it.
#[derive(Debug, Clone)]
pub struct ChaosState {
    x: f64,
    steps: u64,
    reseeds: u64,
    rng: ChaCha8Rng,
}

impl ChaosState {
    /// Seed a fresh orbit. The initial point is drawn uniformly from
    /// `(1e-6, 1 - 1e-6)`, re-drawing anything within `1e-9` of the fixed
    /// point 0.75.
    pub fn new(mut rng: ChaCha8Rng) -> Self {
        let x = Self::draw_start(&mut rng);
        Self {
            x,
            steps: 0,
            reseeds: 0,
            rng,
        }
    }

    /// Start from an explicit coefficient. Degenerate starting points are
    /// accepted; the escape logic in [`Self::next`] handles them. Intended
    /// for tests that pin the orbit.
    pub fn with_start(x0: f64, rng: ChaCha8Rng) -> Self {
        assert!((0.0..=1.0).contains(&x0), "start must lie in [0, 1]");
        Self {
            x: x0,
            steps: 0,
            reseeds: 0,
            rng,
        }
    }

    fn draw_start(rng: &mut ChaCha8Rng) -> f64 {
        loop {
            let u: f64 = rng.random();
            let x = INIT_MARGIN + u * (1.0 - 2.0 * INIT_MARGIN);
            if (x - FIXED_POINT).abs() > EDGE_TOL {
                return x;
            }
        }
    }

    /// Current coefficient without advancing the orbit.
    pub fn current(&self) -> f64 {
        self.x
    }

    /// Total map applications so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// How many times the orbit escaped and was reseeded.
    pub fn reseeds(&self) -> u64 {
        self.reseeds
    }

    /// Advance the map once and return the new coefficient, reseeding past
    /// any degenerate state. The returned value always lies strictly inside
    /// `(EDGE_TOL, 1 - EDGE_TOL)`.
    pub fn next(&mut self) -> f64 {
        loop {
            let next = LOGISTIC_R * self.x * (1.0 - self.x);
            self.steps += 1;
            if next <= EDGE_TOL || next >= 1.0 - EDGE_TOL || next == self.x {
                // Boundary collapse or an exact fixed point (0.75, or a
                // short cycle closed under rounding): restart the orbit.
                self.x = Self::draw_start(&mut self.rng);
                self.reseeds += 1;
                continue;
            }
            self.x = next;
            return next;
        }
    }
}
