//! Margin-of-victory scoring and the ECF rating scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::lls_fit::{fit_lls, AdvantageEdge, AdvantageGraph, LlsConfig};
use crate::probability::{advantage_from_prob, logistic};
use crate::tournament::{GameRecord, Identity, Outcome, PlayerId, WeightedComparison};

/// How a raw score gap becomes a rematch-win probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginPolicy {
    /// Plain win/draw/loss; the margin is ignored.
    Off,
    /// Fixed noise scale in score units.
    Fixed(f64),
    /// Noise scale as a fraction of the game's RMS score.
    RmsFraction(f64),
}

impl MarginPolicy {
    /// Parse `off`, `fixed:D` or `rms:F`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter {
            name: "margin",
            reason: format!("expected off, fixed:DELTA or rms:FRACTION, got `{s}`"),
        };
        let policy = match s.split_once(':') {
            None if s == "off" => MarginPolicy::Off,
            Some(("fixed", v)) => MarginPolicy::Fixed(v.parse().map_err(|_| bad())?),
            Some(("rms", v)) => MarginPolicy::RmsFraction(v.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        match policy {
            MarginPolicy::Fixed(v) | MarginPolicy::RmsFraction(v) if !(v > 0.0) || !v.is_finite() => {
                Err(bad())
            }
            p => Ok(p),
        }
    }

    /// Noise scale for one game, `None` when the margin is ignored.
    pub fn delta(&self, s_x: f64, s_y: f64) -> Option<f64> {
        match *self {
            MarginPolicy::Off => None,
            MarginPolicy::Fixed(d) => Some(d),
            MarginPolicy::RmsFraction(f) => Some(f * ((s_x * s_x + s_y * s_y) / 2.0).sqrt()),
        }
    }
}

/// Probability that the winner (score `s_x >= s_y`) would win a rematch:
/// `(D^2 + d^2) / (D^2 + 2 d^2)` with `D = s_x - s_y`.
pub fn margin_prob(s_x: f64, s_y: f64, policy: MarginPolicy) -> Result<f64> {
    check_finite(s_x, "score")?;
    check_finite(s_y, "score")?;
    if s_x < s_y {
        return Err(Error::InvalidParameter {
            name: "scores",
            reason: "call with the winner's score first".into(),
        });
    }
    let gap = s_x - s_y;
    match policy.delta(s_x, s_y) {
        None => Ok(if gap > 0.0 { 1.0 } else { 0.5 }),
        Some(d) if d > 0.0 => {
            let (g2, d2) = (gap * gap, d * d);
            Ok((g2 + d2) / (g2 + 2.0 * d2))
        }
        Some(_) => Err(Error::InvalidParameter {
            name: "delta",
            reason: "noise scale is zero (both scores zero?)".into(),
        }),
    }
}

/// Score credited to the side with `own` points against `opp`.
pub fn game_score(own: f64, opp: f64, policy: MarginPolicy) -> Result<f64> {
    if own >= opp {
        margin_prob(own, opp, policy)
    } else {
        Ok(1.0 - margin_prob(opp, own, policy)?)
    }
}

/// Sum of margin-weighted scores over `(own, opponent)` score pairs.
pub fn weighted_actual_score(games: &[(f64, f64)], policy: MarginPolicy) -> Result<f64> {
    games.iter().map(|&(o, p)| game_score(o, p, policy)).sum()
}

/// Final reward for a win by `n` points: `(n + 1) / (n + 2)`.
pub fn margin_reward(n: f64) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "margin",
            reason: "winner's margin must be >= 0; negate the reward for the loser".into(),
        });
    }
    if n.is_infinite() {
        return Ok(1.0);
    }
    Ok((n + 1.0) / (n + 2.0))
}

/// Like-for-like comparisons from non-interactive score records: within each
/// (scenario, role) cell, every pair of different players is compared on raw
/// score. Scores from different cells are never compared.
pub fn like_for_like_comparisons(
    records: &[GameRecord],
    policy: MarginPolicy,
) -> Result<Vec<WeightedComparison>> {
    let mut cells: BTreeMap<(&str, &str), Vec<(&GameRecord, bool)>> = BTreeMap::new();
    for r in records {
        if r.score_a.is_none() || r.score_b.is_none() {
            return Err(Error::InvalidRecord(format!("game `{}` has no scores", r.game_id)));
        }
        cells.entry((&r.scenario, &r.role_a)).or_default().push((r, true));
        cells.entry((&r.scenario, &r.role_b)).or_default().push((r, false));
    }
    let mut out = Vec::new();
    for ((_, role), entries) in cells {
        fn side<'a>(&(r, a): &(&'a GameRecord, bool)) -> (&'a PlayerId, f64) {
            if a {
                (&r.player_a, r.score_a.unwrap())
            } else {
                (&r.player_b, r.score_b.unwrap())
            }
        }
        for x in 0..entries.len() {
            for y in x + 1..entries.len() {
                let (px, sx) = side(&entries[x]);
                let (py, sy) = side(&entries[y]);
                if px == py {
                    continue;
                }
                let outcome = match sx.partial_cmp(&sy) {
                    Some(std::cmp::Ordering::Greater) => Outcome::AWins,
                    Some(std::cmp::Ordering::Less) => Outcome::BWins,
                    _ => Outcome::Draw,
                };
                out.push(WeightedComparison {
                    a: Identity::with_role(px.clone(), role),
                    b: Identity::with_role(py.clone(), role),
                    outcome,
                    score_a: game_score(sx, sy, policy)?,
                });
            }
        }
    }
    Ok(out)
}

/// Rating on the English Chess Federation scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EcfRating(pub f64);

/// Game score of X under the ECF rules: a win counts as the opponent's rating
/// plus 50 (never less than own rating plus 10), a loss as minus 50 (never
/// more than own minus 10), a draw as the opponent's rating.
pub fn ecf_game_score(r_x: EcfRating, r_y: EcfRating, outcome: Outcome) -> f64 {
    match outcome {
        Outcome::AWins => (r_y.0 + 50.0).max(r_x.0 + 10.0),
        Outcome::BWins => (r_y.0 - 50.0).min(r_x.0 - 10.0),
        Outcome::Draw => r_y.0,
    }
}

/// The linear ECF relation only holds for gaps under 40 points.
pub const ECF_LIMIT: f64 = 40.0;

/// Elo advantage of an ECF gap `b`, through `p = 1/2 + b/100`.
pub fn ecf_to_elo(b: f64) -> Result<f64> {
    if !(b.abs() < ECF_LIMIT) {
        return Err(Error::OutOfRange {
            value: b,
            bound: "|ECF difference| < 40 (win probability between 0.1 and 0.9)",
        });
    }
    advantage_from_prob(0.5 + b / 100.0)
}

/// ECF gap of an Elo advantage; inverse of [`ecf_to_elo`].
pub fn elo_to_ecf(a: f64) -> Result<f64> {
    check_finite(a, "advantage")?;
    let b = 100.0 * (logistic(a) - 0.5);
    if !(b.abs() < ECF_LIMIT) {
        return Err(Error::OutOfRange {
            value: a,
            bound: "|ECF difference| < 40 (win probability between 0.1 and 0.9)",
        });
    }
    Ok(b)
}

/// A win probability of `i` over `j`, for [`ecf_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEdge {
    pub i: usize,
    pub j: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcfFit {
    pub ratings: Vec<f64>,
    pub iterations: usize,
    /// Edges whose probability falls outside (0.1, 0.9).
    pub out_of_range: Vec<(usize, usize)>,
    pub components: Vec<Vec<Identity>>,
}

/// ECF ratings consistent with observed win probabilities: the same damped
/// least-squares iteration as [`fit_lls`] on gaps `100 (P_ij - 1/2)`.
pub fn ecf_fit(identities: &[Identity], edges: &[ProbabilityEdge], cfg: &LlsConfig) -> Result<EcfFit> {
    let mut flagged = Vec::new();
    let adv = edges
        .iter()
        .map(|e| {
            if !(e.p >= 0.0 && e.p <= 1.0) {
                return Err(Error::ProbabilityOutOfRange { p: e.p });
            }
            if !(e.p > 0.1 && e.p < 0.9) {
                flagged.push((e.i, e.j));
            }
            Ok(AdvantageEdge {
                i: e.i,
                j: e.j,
                a_ij: 100.0 * (e.p - 0.5),
                sigma_ij: 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let g = AdvantageGraph::new(identities.to_vec(), adv)?;
    let res = fit_lls(&g, cfg)?;
    Ok(EcfFit {
        ratings: res.ratings,
        iterations: res.iterations,
        out_of_range: flagged,
        components: res.components,
    })
}
