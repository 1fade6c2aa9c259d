//! Least-squares ratings from pairwise log-odds advantages.
//!
//! Each comparison edge becomes an advantage `A_ij` with its own statistical
//! uncertainty. Ratings minimise the squared mismatch `R_i - R_j - A_ij`, and
//! whatever mismatch remains is reported as structural uncertainty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::probability::{
    advantage_moments_approx_weighted, advantage_moments_numeric_weighted, MomentMethod,
    DEFAULT_NUMERIC_GRID,
};
use crate::tournament::{connected_components, Identity, RatingEstimate, TournamentGraph, DEFAULT_MEAN};

/// Prior weight used when building advantages for fitting.
pub const FIT_PRIOR_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEdge {
    pub i: usize,
    pub j: usize,
    /// Posterior-mean advantage of `i` over `j`, Elo points.
    pub a_ij: f64,
    pub sigma_ij: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageGraph {
    pub identities: Vec<Identity>,
    pub priors: Vec<RatingEstimate>,
    pub edges: Vec<AdvantageEdge>,
}

impl AdvantageGraph {
    pub fn new(identities: Vec<Identity>, edges: Vec<AdvantageEdge>) -> Result<Self> {
        let priors = vec![RatingEstimate::default(); identities.len()];
        AdvantageGraph::with_priors(identities, priors, edges)
    }

    pub fn with_priors(
        identities: Vec<Identity>,
        priors: Vec<RatingEstimate>,
        edges: Vec<AdvantageEdge>,
    ) -> Result<Self> {
        let n = identities.len();
        if priors.len() != n {
            return Err(Error::InvalidParameter {
                name: "priors",
                reason: "one prior per identity required".into(),
            });
        }
        for e in &edges {
            if e.i >= n || e.j >= n || e.i == e.j {
                return Err(Error::InvalidRecord(format!("bad advantage edge ({}, {})", e.i, e.j)));
            }
            if !e.a_ij.is_finite() || !(e.sigma_ij > 0.0) || !e.sigma_ij.is_finite() {
                return Err(Error::InvalidRecord(format!(
                    "advantage edge ({}, {}) needs a finite advantage and sigma > 0",
                    e.i, e.j
                )));
            }
        }
        Ok(AdvantageGraph {
            identities,
            priors,
            edges,
        })
    }

    /// Convenience constructor from `(i, j, a_ij, sigma_ij)` with named nodes.
    pub fn from_named(edges: &[(&str, &str, f64, f64)]) -> Result<Self> {
        let mut names: Vec<&str> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
        names.sort_unstable();
        names.dedup();
        let identities = names.iter().map(|s| Identity::parse(s)).collect::<Result<Vec<_>>>()?;
        let pos = |s: &str| names.binary_search(&s).expect("collected above");
        let edges = edges
            .iter()
            .map(|&(a, b, adv, sd)| AdvantageEdge {
                i: pos(a),
                j: pos(b),
                a_ij: adv,
                sigma_ij: sd,
            })
            .collect();
        AdvantageGraph::new(identities, edges)
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    /// `(opponent, A_i,opponent, sigma_ij)` per node.
    pub fn incidence(&self) -> Vec<Vec<(usize, f64, f64)>> {
        let mut inc = vec![Vec::new(); self.len()];
        for e in &self.edges {
            inc[e.i].push((e.j, e.a_ij, e.sigma_ij));
            inc[e.j].push((e.i, -e.a_ij, e.sigma_ij));
        }
        inc
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        connected_components(self.len(), self.edges.iter().map(|e| (e.i, e.j)))
    }
}

/// Turn every comparison edge into a posterior advantage. Draws (and
/// margin-weighted scores) enter as fractional wins, so the posterior uses
/// `wins = weighted_score_i` and `losses = games - weighted_score_i`.
///
/// With small prior weights the one-sigma band of the approximate method can
/// leave the unit interval on lopsided edges; those edges use the numeric
/// moments instead.
pub fn build_advantage_graph(
    graph: &TournamentGraph,
    prior_weight: f64,
    method: MomentMethod,
) -> Result<AdvantageGraph> {
    let edges = graph
        .edges()
        .iter()
        .map(|e| {
            let w = e.weighted_score_i;
            let l = e.games() as f64 - w;
            let m = match method {
                MomentMethod::Approx => advantage_moments_approx_weighted(w, l, prior_weight).or_else(
                    |err| match err {
                        Error::ProbabilityOutOfRange { .. } => advantage_moments_numeric_weighted(
                            w,
                            l,
                            prior_weight,
                            DEFAULT_NUMERIC_GRID,
                        ),
                        other => Err(other),
                    },
                )?,
                MomentMethod::Numeric => {
                    advantage_moments_numeric_weighted(w, l, prior_weight, DEFAULT_NUMERIC_GRID)?
                }
            };
            Ok(AdvantageEdge {
                i: e.i,
                j: e.j,
                a_ij: m.mean,
                sigma_ij: m.stdev,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AdvantageGraph::with_priors(graph.identities().to_vec(), graph.priors().to_vec(), edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlsConfig {
    pub target_mean: f64,
    pub tol: f64,
    pub damping: f64,
    pub max_iters: usize,
    /// Fit disconnected components separately (each shifted to the target
    /// mean) instead of rejecting the graph.
    pub per_component: bool,
    pub execution: Execution,
}

impl Default for LlsConfig {
    fn default() -> Self {
        LlsConfig {
            target_mean: DEFAULT_MEAN,
            tol: 0.05,
            damping: 0.5,
            max_iters: 100_000,
            per_component: true,
            execution: Execution::default(),
        }
    }
}

impl LlsConfig {
    fn validate(&self) -> Result<()> {
        crate::error::check_finite(self.target_mean, "target mean")?;
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
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub total: f64,
    pub statistical: f64,
    pub structural: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlsResult {
    pub identities: Vec<Identity>,
    pub ratings: Vec<f64>,
    /// `None` for identities without any edge.
    pub uncertainty: Vec<Option<Uncertainty>>,
    pub iterations: usize,
    /// Largest `|R_i - mean_j(R_j + A_ij)|` at the returned ratings.
    pub max_residual: f64,
    /// Connected components, listed only when there is more than one.
    pub components: Vec<Vec<Identity>>,
}

impl LlsResult {
    pub fn rating_of(&self, id: &Identity) -> Option<f64> {
        self.identities.iter().position(|x| x == id).map(|k| self.ratings[k])
    }
}

fn check_components(graph: &AdvantageGraph, per_component: bool) -> Result<Vec<Vec<usize>>> {
    if graph.edges.is_empty() {
        return Err(Error::EmptyInput("advantage edges"));
    }
    let comps = graph.components();
    if comps.len() > 1 && !per_component {
        return Err(Error::Disconnected(
            comps
                .iter()
                .map(|c| c.iter().map(|&k| graph.identities[k].to_string()).collect())
                .collect(),
        ));
    }
    Ok(comps)
}

/// Damped Jacobi iteration to the fixed point of `update`, reading only the
/// previous iterate each sweep.
fn iterate<F>(
    n: usize,
    start: Vec<f64>,
    tol: f64,
    damping: f64,
    max_iters: usize,
    exec: Execution,
    update: F,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(usize, &[f64]) -> Option<f64> + Sync + Send,
{
    let mut r = start;
    for it in 1..=max_iters {
        let prev = &r;
        let steps: Vec<(f64, f64)> = map_indices(exec, n, |i| match update(i, prev) {
            Some(target) => (prev[i] + damping * (target - prev[i]), (target - prev[i]).abs()),
            None => (prev[i], 0.0),
        });
        let change = steps.iter().map(|s| s.1).fold(0.0, f64::max);
        if !change.is_finite() {
            return Err(Error::NonFinite("least-squares iterate"));
        }
        r = steps.into_iter().map(|s| s.0).collect();
        if change < tol {
            return Ok((r, it));
        }
    }
    let change = (0..n)
        .filter_map(|i| update(i, &r).map(|t| (t - r[i]).abs()))
        .fold(0.0, f64::max);
    Err(Error::NonConvergence {
        iterations: max_iters,
        max_change: change,
        last_iterate: r,
    })
}

fn max_residual(inc: &[Vec<(usize, f64, f64)>], r: &[f64]) -> f64 {
    inc.iter()
        .enumerate()
        .filter(|(_, es)| !es.is_empty())
        .map(|(i, es)| {
            let m = es.iter().map(|&(j, a, _)| r[j] + a).sum::<f64>() / es.len() as f64;
            (r[i] - m).abs()
        })
        .fold(0.0, f64::max)
}

fn component_names(graph: &AdvantageGraph, comps: &[Vec<usize>]) -> Vec<Vec<Identity>> {
    if comps.len() < 2 {
        return Vec::new();
    }
    comps
        .iter()
        .map(|c| c.iter().map(|&k| graph.identities[k].clone()).collect())
        .collect()
}

/// Equal-weight least squares: `R_i = mean over edges of (R_j + A_ij)`, then
/// each connected component is shifted so its mean is `target_mean`.
pub fn fit_lls(graph: &AdvantageGraph, cfg: &LlsConfig) -> Result<LlsResult> {
    cfg.validate()?;
    let comps = check_components(graph, cfg.per_component)?;
    let inc = graph.incidence();
    let (mut r, iterations) = iterate(
        graph.len(),
        vec![cfg.target_mean; graph.len()],
        cfg.tol,
        cfg.damping,
        cfg.max_iters,
        cfg.execution,
        |i, prev| {
            let es = &inc[i];
            (!es.is_empty()).then(|| es.iter().map(|&(j, a, _)| prev[j] + a).sum::<f64>() / es.len() as f64)
        },
    )?;
    for c in &comps {
        let shift = cfg.target_mean - c.iter().map(|&k| r[k]).sum::<f64>() / c.len() as f64;
        for &k in c {
            r[k] += shift;
        }
    }
    Ok(LlsResult {
        identities: graph.identities.clone(),
        uncertainty: uncertainty_decomposition(&r, graph),
        max_residual: max_residual(&inc, &r),
        ratings: r,
        iterations,
        components: component_names(graph, &comps),
    })
}

/// Precision-weighted least squares: each rating is the precision-weighted
/// average of its prior mean (precision `1/sigma_i^2`) and the edge
/// observations `R_j + A_ij` (precision `1/(sigma_j^2 + sigma_ij^2)`).
/// Frozen players (`sigma_i = 0`) do not move. Priors pin the scale, so no
/// shift is applied.
pub fn fit_lls_weighted(graph: &AdvantageGraph, cfg: &LlsConfig) -> Result<LlsResult> {
    cfg.validate()?;
    let comps = check_components(graph, true)?;
    let inc = graph.incidence();
    let priors = &graph.priors;
    for (i, p) in priors.iter().enumerate() {
        p.validate()?;
        let p_i = 1.0 / (p.sigma * p.sigma);
        if p_i == 0.0 && inc[i].is_empty() {
            return Err(Error::InvalidParameter {
                name: "priors",
                reason: format!("`{}` has neither prior precision nor edges", graph.identities[i]),
            });
        }
    }
    let (r, iterations) = iterate(
        graph.len(),
        priors.iter().map(|p| p.mu).collect(),
        cfg.tol,
        cfg.damping,
        cfg.max_iters,
        cfg.execution,
        |i, prev| {
            let p = &priors[i];
            if p.is_frozen() || inc[i].is_empty() {
                return None;
            }
            let p_i = 1.0 / (p.sigma * p.sigma);
            let (mut num, mut den) = (p_i * p.mu, p_i);
            for &(j, a, s_ij) in &inc[i] {
                let s_j = priors[j].sigma;
                let p_ij = 1.0 / (s_j * s_j + s_ij * s_ij);
                num += p_ij * (prev[j] + a);
                den += p_ij;
            }
            Some(num / den)
        },
    )?;
    Ok(LlsResult {
        identities: graph.identities.clone(),
        uncertainty: uncertainty_decomposition(&r, graph),
        max_residual: max_residual(&inc, &r),
        ratings: r,
        iterations,
        components: component_names(graph, &comps),
    })
}

/// Statistical, structural and total uncertainty per identity. `N_i` is the
/// number of incident edges, not games.
pub fn uncertainty_decomposition(ratings: &[f64], graph: &AdvantageGraph) -> Vec<Option<Uncertainty>> {
    graph
        .incidence()
        .iter()
        .enumerate()
        .map(|(i, es)| {
            if es.is_empty() {
                return None;
            }
            let n = es.len() as f64;
            let stat = es.iter().map(|e| e.2 * e.2).sum::<f64>() / n;
            let structural = es
                .iter()
                .map(|&(j, a, _)| (ratings[i] - ratings[j] - a).powi(2))
                .sum::<f64>()
                / n;
            Some(Uncertainty {
                total: (stat + structural).sqrt(),
                statistical: stat.sqrt(),
                structural: structural.sqrt(),
            })
        })
        .collect()
}

/// Squared additivity violation of a triangle, scaled by its variance:
/// `(A_ij + A_jk - A_ik)^2 / (s_ij^2 + s_jk^2 + s_ik^2)`.
pub fn consistency_measure(a_ij: f64, a_jk: f64, a_ik: f64, sigmas: [f64; 3]) -> Result<f64> {
    let var: f64 = sigmas.iter().map(|s| s * s).sum();
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigmas",
            reason: "total variance must be positive".into(),
        });
    }
    Ok((a_ij + a_jk - a_ik).powi(2) / var)
}

/// `sum(x / s^2) / sum(1 / s^2)`.
pub fn precision_weighted_average(values: &[f64], sigmas: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("values"));
    }
    if values.len() != sigmas.len() {
        return Err(Error::InvalidParameter {
            name: "sigmas",
            reason: "length differs from values".into(),
        });
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "sigmas",
            reason: "every sigma must be > 0".into(),
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (x, s) in values.iter().zip(sigmas) {
        let p = 1.0 / (s * s);
        num += p * x;
        den += p;
    }
    Ok(num / den)
}

/// Recursive whole-history estimate. At each step the previous estimates
/// become priors with uncertainty `process_sigma` (anchors, with prior sigma
/// 0 in `initial`, stay fixed) and the step's advantage edges are folded in by
/// [`fit_lls_weighted`]. Only the latest estimate is carried forward.
///
/// Returns the ratings after every step.
pub fn whole_history_filter(
    identities: &[Identity],
    initial: &[RatingEstimate],
    steps: &[Vec<AdvantageEdge>],
    process_sigma: f64,
    cfg: &LlsConfig,
) -> Result<Vec<Vec<f64>>> {
    if !(process_sigma > 0.0) || !process_sigma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "process_sigma",
            reason: format!("must be > 0, got {process_sigma}"),
        });
    }
    if initial.len() != identities.len() {
        return Err(Error::InvalidParameter {
            name: "initial",
            reason: "one initial estimate per identity required".into(),
        });
    }
    let mut current: Vec<RatingEstimate> = initial
        .iter()
        .map(|p| if p.is_frozen() { *p } else { RatingEstimate::new(p.mu, process_sigma) })
        .collect();
    let mut out = Vec::with_capacity(steps.len());
    for edges in steps {
        let ratings = if edges.is_empty() {
            current.iter().map(|p| p.mu).collect()
        } else {
            let g = AdvantageGraph::with_priors(identities.to_vec(), current.clone(), edges.clone())?;
            fit_lls_weighted(&g, cfg)?.ratings
        };
        for (p, &r) in current.iter_mut().zip(&ratings) {
            if !p.is_frozen() {
                *p = RatingEstimate::new(r, process_sigma);
            }
        }
        out.push(ratings);
    }
    Ok(out)
}
