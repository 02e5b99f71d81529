//! Seeded multi-start Hooke-Jeeves pattern search.
//!
//! Restarts draw their generators from `(seed, restart index)` alone, so the
//! reduction over restarts gives the same answer serially or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Settings shared by every variational estimator in the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Maximum number of exploratory sweeps per restart.
    pub max_iters: usize,
    /// A sweep that lowers the objective by less than this halves the step.
    pub tol: f64,
    pub seed: u64,
    /// Overrides the default ensemble size of the decomposition searches.
    pub ensemble_size: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { restarts: 32, max_iters: 2000, tol: 1e-8, seed: 0, ensemble_size: None }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Usage("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Usage("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Usage(format!("tol must be positive, got {}", self.tol)));
        }
        if self.ensemble_size == Some(0) {
            return Err(Error::Usage("ensemble size must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn search_options(&self) -> SearchOptions {
        SearchOptions { max_iters: self.max_iters, tol: self.tol, ..SearchOptions::default() }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { initial_step: 0.5, min_step: 1e-5, max_iters: 2000, tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct LocalOutcome {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// The step shrank below `min_step` before the sweep budget ran out.
    pub converged: bool,
    /// Objective decrease achieved by the final sweep.
    pub residual: f64,
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// One coordinate sweep of step `h` around `x`; updates `x` and returns its value.
fn explore<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &mut [f64], mut fx: f64, h: f64) -> f64 {
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = sanitize(f(x));
        if up < fx {
            fx = up;
            continue;
        }
        x[i] = orig - h;
        let down = sanitize(f(x));
        if down < fx {
            fx = down;
            continue;
        }
        x[i] = orig;
    }
    fx
}

/// Hooke-Jeeves pattern search from `x0`.
pub fn pattern_search<F: FnMut(&[f64]) -> f64>(mut f: F, x0: Vec<f64>, opts: &SearchOptions) -> LocalOutcome {
    let mut base = x0;
    let mut f_base = sanitize(f(&base));
    let mut h = opts.initial_step;
    let mut iterations = 0;
    let mut residual = 0.0;
    let mut converged = false;
    let mut trial = base.clone();

    while iterations < opts.max_iters {
        trial.copy_from_slice(&base);
        let f_trial = explore(&mut f, &mut trial, f_base, h);
        iterations += 1;
        let start = f_base;
        if f_trial < f_base {
            // Pattern moves along the last successful displacement.
            let mut prev = std::mem::replace(&mut base, trial.clone());
            f_base = f_trial;
            while iterations < opts.max_iters {
                let mut probe: Vec<f64> = base.iter().zip(&prev).map(|(b, p)| 2.0 * b - p).collect();
                let f_probe = sanitize(f(&probe));
                let f_probe = explore(&mut f, &mut probe, f_probe, h);
                iterations += 1;
                if f_probe < f_base {
                    prev = std::mem::replace(&mut base, probe);
                    f_base = f_probe;
                } else {
                    break;
                }
            }
        }
        residual = start - f_base;
        if residual < opts.tol {
            h *= 0.5;
            if h < opts.min_step {
                converged = true;
                break;
            }
        }
    }
    LocalOutcome { params: base, value: f_base, iterations, converged, residual }
}

#[derive(Clone, Debug)]
pub struct MultiStartOutcome {
    pub best: LocalOutcome,
    pub best_restart: usize,
    pub restarts_used: usize,
}

/// Generator for restart `index` under `seed`.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `restarts` independent pattern searches and keeps the lowest value,
/// breaking ties by restart index. `start` produces the initial point of a
/// restart; `objective` builds a fresh (stateful) objective per restart.
pub fn multi_start<S, M, F>(
    restarts: usize,
    seed: u64,
    opts: &SearchOptions,
    start: S,
    objective: M,
) -> MultiStartOutcome
where
    S: Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync,
    M: Fn() -> F + Sync,
    F: FnMut(&[f64]) -> f64,
{
    let run = |index: usize| {
        let mut rng = restart_rng(seed, index);
        let x0 = start(index, &mut rng);
        pattern_search(objective(), x0, opts)
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<LocalOutcome> = {
        use rayon::prelude::*;
        (0..restarts).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<LocalOutcome> = (0..restarts).map(run).collect();

    let mut best_restart = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value < outcomes[best_restart].value {
            best_restart = i;
        }
    }
    let best = outcomes.into_iter().nth(best_restart).expect("at least one restart");
    MultiStartOutcome { best, best_restart, restarts_used: restarts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pattern_search_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + 0.5 * x[0] * x[1];
        let out = pattern_search(f, vec![0.0, 0.0], &SearchOptions::default());
        // Stationary point: 2x + 0.5y = 2, 0.5x + 20y = -40 (Cramer's rule).
        let det = 2.0 * 20.0 - 0.25;
        let a = (2.0 * 20.0 - 0.5 * (-40.0)) / det;
        let b = (2.0 * (-40.0) - 0.5 * 2.0) / det;
        assert!(out.converged);
        assert!((out.params[0] - a).abs() < 1e-5, "{:?} vs {a}", out.params);
        assert!((out.params[1] - b).abs() < 1e-5);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 3.0).powi(2)).sum::<f64>();
        let opts = SearchOptions { max_iters: 2, ..SearchOptions::default() };
        let out = pattern_search(f, vec![0.0; 4], &opts);
        assert!(!out.converged);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn nan_objective_is_never_accepted() {
        let f = |x: &[f64]| if x[0] > 0.2 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let out = pattern_search(f, vec![0.0], &SearchOptions::default());
        assert!(out.value.is_finite());
        assert!(out.params[0] <= 0.2);
    }

    #[test]
    fn multi_start_is_deterministic_and_picks_lowest() {
        let opts = SearchOptions::default();
        let start = |_: usize, rng: &mut ChaCha8Rng| vec![rng.random_range(-3.0..3.0)];
        // Double well with the deeper minimum near x = -1.
        let make = || |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.3 * x[0];
        let a = multi_start(8, 7, &opts, start, make);
        let b = multi_start(8, 7, &opts, start, make);
        assert_eq!(a.best.value.to_bits(), b.best.value.to_bits());
        assert_eq!(a.best_restart, b.best_restart);
        assert!(a.best.params[0] < 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { restarts: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { ensemble_size: Some(0), ..Default::default() }.validate().is_err());
    }
}
