//! Two-role tournaments: every agent gets one rating per role, and the pair
//! is decomposed into an overall rating, a global side advantage and a
//! per-agent residual.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::batch_fit::{fit_pml, BatchConfig};
use crate::error::{Error, Result};
use crate::lls_fit::{build_advantage_graph, fit_lls, LlsConfig};
use crate::probability::MomentMethod;
use crate::tournament::{PlayerId, TournamentGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RoleFitter {
    Pml(BatchConfig),
    Lls {
        cfg: LlsConfig,
        prior_weight: f64,
        method: MomentMethod,
    },
}

/// Ratings per agent in each of two roles, centred so `sum(rp + rg) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleRatings {
    pub first_role: String,
    pub second_role: String,
    pub agents: Vec<PlayerId>,
    pub rp: Vec<f64>,
    pub rg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// Side advantage of the first role.
    pub rho: f64,
    pub overall: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Index of each identity as (agent, is_first_role).
fn role_layout(
    graph: &TournamentGraph,
    first: &str,
    second: &str,
) -> Result<(Vec<PlayerId>, Vec<(usize, bool)>)> {
    let mut agents = BTreeMap::new();
    let mut slots = Vec::with_capacity(graph.len());
    for id in graph.identities() {
        let role = id.role.as_deref().ok_or_else(|| {
            Error::InvalidRecord(format!("`{id}` has no role; build the graph with role split"))
        })?;
        let is_first = if role == first {
            true
        } else if role == second {
            false
        } else {
            return Err(Error::InvalidRecord(format!(
                "`{id}`: role is neither `{first}` nor `{second}`"
            )));
        };
        let next = agents.len();
        let a = *agents.entry(id.player.clone()).or_insert(next);
        slots.push((a, is_first));
    }
    for e in graph.edges() {
        if slots[e.i].1 == slots[e.j].1 {
            return Err(Error::InvalidRecord(format!(
                "`{}` vs `{}`: contests are only allowed across roles",
                graph.identity(e.i),
                graph.identity(e.j)
            )));
        }
    }
    let mut names: Vec<(PlayerId, usize)> = agents.into_iter().collect();
    names.sort_by_key(|x| x.1);
    Ok((names.into_iter().map(|x| x.0).collect(), slots))
}

/// Fit one rating per (agent, role) with the chosen fitter and centre them.
pub fn fit_role_ratings(
    graph: &TournamentGraph,
    first_role: &str,
    second_role: &str,
    fitter: &RoleFitter,
) -> Result<RoleRatings> {
    let (agents, slots) = role_layout(graph, first_role, second_role)?;
    let ratings = match fitter {
        RoleFitter::Pml(cfg) => fit_pml(graph, cfg)?.ratings,
        RoleFitter::Lls {
            cfg,
            prior_weight,
            method,
        } => fit_lls(&build_advantage_graph(graph, *prior_weight, *method)?, cfg)?.ratings,
    };
    let mut rp = vec![f64::NAN; agents.len()];
    let mut rg = vec![f64::NAN; agents.len()];
    for (k, &(a, first)) in slots.iter().enumerate() {
        if first {
            rp[a] = ratings[k];
        } else {
            rg[a] = ratings[k];
        }
    }
    for (a, name) in agents.iter().enumerate() {
        if rp[a].is_nan() || rg[a].is_nan() {
            return Err(Error::InvalidRecord(format!(
                "agent `{name}` needs games in both `{first_role}` and `{second_role}`"
            )));
        }
    }
    let mean = (rp.iter().sum::<f64>() + rg.iter().sum::<f64>()) / (2 * agents.len()) as f64;
    rp.iter_mut().chain(rg.iter_mut()).for_each(|x| *x -= mean);
    Ok(RoleRatings {
        first_role: first_role.to_string(),
        second_role: second_role.to_string(),
        agents,
        rp,
        rg,
    })
}

/// Decompose role ratings with the unweighted mean over agents.
pub fn anova(rr: &RoleRatings) -> AnovaResult {
    anova_weighted(rr, &vec![1.0; rr.agents.len()]).expect("unit weights are valid")
}

/// Decompose role ratings with per-agent weights (e.g. games played) in the
/// side-advantage average.
pub fn anova_weighted(rr: &RoleRatings, weights: &[f64]) -> Result<AnovaResult> {
    if weights.len() != rr.agents.len() || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: "one positive weight per agent required".into(),
        });
    }
    let wsum: f64 = weights.iter().sum();
    let mean = |v: &[f64]| v.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let rho = 0.5 * (mean(&rr.rp) - mean(&rr.rg));
    let overall = rr.rp.iter().zip(&rr.rg).map(|(p, g)| 0.5 * (p + g)).collect();
    let residual = rr
        .rp
        .iter()
        .zip(&rr.rg)
        .map(|(p, g)| 0.5 * ((p - rho) - (g + rho)))
        .collect();
    Ok(AnovaResult {
        rho,
        overall,
        residual,
    })
}

/// Games per (agent, role) cell and whether every cell has the same count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub cells: Vec<(String, u64)>,
    pub balanced: bool,
}

pub fn balance_diagnostic(graph: &TournamentGraph) -> BalanceReport {
    let games = graph.games_played();
    let cells: Vec<(String, u64)> = graph
        .identities()
        .iter()
        .zip(games)
        .map(|(id, g)| (id.to_string(), g))
        .collect();
    let balanced = cells.windows(2).all(|w| w[0].1 == w[1].1);
    BalanceReport { cells, balanced }
}
