//! Simultaneous posterior-maximum-likelihood fitting of every rating in a
//! tournament graph, plus rating-sum diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::probability::logistic;
use crate::tournament::{Identity, Neighbor, TournamentGraph, BETA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Shift every rating afterwards so their mean is this value.
    pub target_mean: Option<f64>,
    pub rating_floor: Option<f64>,
    /// Largest move of one rating in one sweep.
    pub max_step: f64,
    pub execution: Execution,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            tol: 0.05,
            max_iters: 100_000,
            damping: 0.5,
            target_mean: None,
            rating_floor: None,
            max_step: 400.0,
            execution: Execution::default(),
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be > 0, got {}", self.tol),
            });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "damping",
                reason: format!("must lie in (0, 1], got {}", self.damping),
            });
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "max_step",
                reason: "must be > 0".into(),
            });
        }
        if let Some(t) = self.target_mean {
            crate::error::check_finite(t, "target mean")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub identities: Vec<Identity>,
    pub ratings: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub shift_applied: f64,
    /// Largest undamped per-player change in the final sweep.
    pub max_change: f64,
}

impl BatchResult {
    pub fn rating_of(&self, id: &Identity) -> Option<f64> {
        self.identities
            .iter()
            .position(|x| x == id)
            .map(|k| self.ratings[k])
    }
}

/// Actual score of every identity over all its games.
pub fn actual_scores(adj: &[Vec<Neighbor>]) -> Vec<f64> {
    adj.iter().map(|ns| ns.iter().map(|n| n.score).sum()).collect()
}

/// Solve `R_i = mu_i + K_i (A_i - E_i(R))` for all non-frozen players at once.
///
/// Each sweep computes every player's linearised step from the previous
/// iterate only, so the result does not depend on execution mode. Frozen
/// (`sigma = 0`) and isolated players keep their prior mean exactly.
pub fn fit_pml(graph: &TournamentGraph, cfg: &BatchConfig) -> Result<BatchResult> {
    cfg.validate()?;
    let priors = graph.priors();
    if cfg.target_mean.is_some() && priors.iter().any(|p| p.is_frozen()) {
        return Err(Error::InvalidParameter {
            name: "target_mean",
            reason: "a uniform shift would move frozen anchors; pin the scale with one or the other"
                .into(),
        });
    }
    let adj = graph.adjacency();
    let actual = actual_scores(&adj);
    let mut r: Vec<f64> = priors.iter().map(|p| p.mu).collect();
    let active: Vec<bool> = (0..graph.len())
        .map(|i| !priors[i].is_frozen() && !adj[i].is_empty())
        .collect();

    let mut iterations = 0;
    let mut max_change = 0.0;
    let mut converged = !active.iter().any(|&a| a);
    while !converged {
        if iterations == cfg.max_iters {
            return Err(Error::NonConvergence {
                iterations,
                max_change,
                last_iterate: r,
            });
        }
        iterations += 1;
        let prev = &r;
        let steps: Vec<(f64, f64)> = map_indices(cfg.execution, graph.len(), |i| {
            if !active[i] {
                return (prev[i], 0.0);
            }
            let ri = prev[i];
            let (mut e, mut var) = (0.0, 0.0);
            for n in &adj[i] {
                let p = logistic(ri - prev[n.opponent]);
                e += n.games * p;
                var += n.games * p * (1.0 - p);
            }
            let (mu, k) = (priors[i].mu, priors[i].k);
            let delta = ((mu - ri + k * (actual[i] - e)) / (1.0 + BETA * var * k))
                .clamp(-cfg.max_step, cfg.max_step);
            let mut next = ri + cfg.damping * delta;
            if let Some(floor) = cfg.rating_floor {
                if next < floor {
                    // a player held at the floor has stopped moving
                    next = floor;
                    return (next, (ri - floor).abs() / cfg.damping);
                }
            }
            (next, delta.abs())
        });
        max_change = steps.iter().map(|s| s.1).fold(0.0, f64::max);
        if !max_change.is_finite() {
            return Err(Error::NonFinite("batch iterate"));
        }
        r = steps.into_iter().map(|s| s.0).collect();
        converged = max_change < cfg.tol;
    }

    let mut shift = 0.0;
    if let Some(t) = cfg.target_mean {
        shift = t - r.iter().sum::<f64>() / r.len() as f64;
        r.iter_mut().for_each(|x| *x += shift);
    }
    Ok(BatchResult {
        identities: graph.identities().to_vec(),
        ratings: r,
        iterations,
        converged,
        shift_applied: shift,
        max_change,
    })
}

/// One simultaneous classic step: every player moves by `K_i (A_i - E_i)`
/// computed from the same starting ratings.
pub fn classic_batch_update(graph: &TournamentGraph, ratings: &[f64], k: &[f64]) -> Result<Vec<f64>> {
    if ratings.len() != graph.len() || k.len() != graph.len() {
        return Err(Error::InvalidParameter {
            name: "ratings",
            reason: "one rating and one K per identity required".into(),
        });
    }
    let adj = graph.adjacency();
    Ok((0..graph.len())
        .map(|i| {
            let e: f64 = adj[i]
                .iter()
                .map(|n| n.games * logistic(ratings[i] - ratings[n.opponent]))
                .sum();
            let a: f64 = adj[i].iter().map(|n| n.score).sum();
            ratings[i] + k[i] * (a - e)
        })
        .collect())
}

/// Change in the rating total, `sum(after) - sum(before)`.
pub fn rating_sum_delta(before: &[f64], after: &[f64], k_values: &[f64]) -> Result<f64> {
    if before.len() != after.len() || before.len() != k_values.len() {
        return Err(Error::InvalidParameter {
            name: "ratings",
            reason: "before, after and K must cover the same players".into(),
        });
    }
    Ok(after.iter().sum::<f64>() - before.iter().sum::<f64>())
}

/// Expected change of `R_A + R_B` per game when the stronger A (factor
/// `k_a`) is predicted to win with probability `q` but wins with frequency `f`.
pub fn expected_sum_change(k_a: f64, k_b: f64, q: f64, f: f64) -> f64 {
    (k_b - k_a) * ((1.0 - f) * q - f * (1.0 - q))
}
