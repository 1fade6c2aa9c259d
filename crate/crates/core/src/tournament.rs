//! Domain types and tournament-graph construction shared by every estimator.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale factor between Elo points and natural log-odds: `ln(10) / 400`.
pub const BETA: f64 = std::f64::consts::LN_10 / 400.0;

/// Rating assigned to players without an explicit prior.
pub const DEFAULT_MEAN: f64 = 1000.0;

/// Prior uncertainty for players without an explicit prior (effectively uninformative).
pub const DEFAULT_SIGMA: f64 = 1000.0;

/// Rating-system constants that callers may want to tweak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub default_mean: f64,
    /// Lower clamp for fitted ratings. Off unless configured.
    pub rating_floor: Option<f64>,
}

impl Constants {
    pub fn beta(&self) -> f64 {
        BETA
    }
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            default_mean: DEFAULT_MEAN,
            rating_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidRecord("player id must be non-empty".into()));
        }
        Ok(PlayerId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PlayerId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        PlayerId::new(s)
    }
}

impl From<PlayerId> for String {
    fn from(p: PlayerId) -> String {
        p.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A node of the tournament graph: a player, or a (player, role) pair when
/// roles are rated separately.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Identity {
    pub player: PlayerId,
    pub role: Option<String>,
}

impl Identity {
    pub fn player(player: PlayerId) -> Self {
        Identity { player, role: None }
    }

    pub fn with_role(player: PlayerId, role: impl Into<String>) -> Self {
        Identity {
            player,
            role: Some(role.into()),
        }
    }

    /// Parse the `player` or `player/role` form produced by `Display`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.rsplit_once('/') {
            Some((p, r)) if !r.is_empty() => Ok(Identity::with_role(PlayerId::new(p)?, r)),
            _ => Ok(Identity::player(PlayerId::new(s)?)),
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.role {
            Some(r) => write!(f, "{}/{}", self.player, r),
            None => write!(f, "{}", self.player),
        }
    }
}

/// Rating mean and uncertainty, in Elo points, with the matching adjustment
/// factor `k = BETA * sigma^2`. `sigma == 0` marks a frozen anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingEstimate {
    pub mu: f64,
    pub sigma: f64,
    pub k: f64,
}

impl RatingEstimate {
    pub fn new(mu: f64, sigma: f64) -> Self {
        RatingEstimate {
            mu,
            sigma,
            k: BETA * sigma * sigma,
        }
    }

    /// Build from an Elo `K` factor instead of a standard deviation.
    pub fn from_k(mu: f64, k: f64) -> Self {
        RatingEstimate {
            mu,
            sigma: (k / BETA).sqrt(),
            k,
        }
    }

    pub fn anchor(mu: f64) -> Self {
        RatingEstimate::new(mu, 0.0)
    }

    pub fn is_frozen(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::NonFinite("prior mean"));
        }
        if self.sigma.is_nan() || self.sigma < 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be >= 0, got {}", self.sigma),
            });
        }
        Ok(())
    }
}

impl Default for RatingEstimate {
    fn default() -> Self {
        RatingEstimate::new(DEFAULT_MEAN, DEFAULT_SIGMA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    AWins,
    BWins,
    Draw,
}

impl Outcome {
    pub fn parse(code: &str) -> Result<Self> {
        match code.trim() {
            "A" | "a" => Ok(Outcome::AWins),
            "B" | "b" => Ok(Outcome::BWins),
            "D" | "d" => Ok(Outcome::Draw),
            other => Err(Error::InvalidRecord(format!("unknown outcome code `{other}`"))),
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Outcome::AWins => "A",
            Outcome::BWins => "B",
            Outcome::Draw => "D",
        }
    }

    /// Score of side A: 1, 0.5 or 0.
    pub fn score_a(self) -> f64 {
        match self {
            Outcome::AWins => 1.0,
            Outcome::Draw => 0.5,
            Outcome::BWins => 0.0,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Outcome::AWins => Outcome::BWins,
            Outcome::BWins => Outcome::AWins,
            Outcome::Draw => Outcome::Draw,
        }
    }
}

/// One contest between two (player, role) sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub game_id: String,
    pub player_a: PlayerId,
    pub role_a: String,
    pub player_b: PlayerId,
    pub role_b: String,
    pub scenario: String,
    pub score_a: Option<f64>,
    pub score_b: Option<f64>,
    pub outcome: Outcome,
}

impl GameRecord {
    pub fn new(
        game_id: impl Into<String>,
        (player_a, role_a): (&str, &str),
        (player_b, role_b): (&str, &str),
        outcome: Outcome,
    ) -> Result<Self> {
        let rec = GameRecord {
            game_id: game_id.into(),
            player_a: PlayerId::new(player_a)?,
            role_a: role_a.to_string(),
            player_b: PlayerId::new(player_b)?,
            role_b: role_b.to_string(),
            scenario: String::new(),
            score_a: None,
            score_b: None,
            outcome,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn with_scenario(mut self, scenario: impl Into<String>) -> Self {
        self.scenario = scenario.into();
        self
    }

    pub fn with_scores(mut self, score_a: f64, score_b: f64) -> Self {
        self.score_a = Some(score_a);
        self.score_b = Some(score_b);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.game_id.is_empty() {
            return Err(Error::InvalidRecord("empty game id".into()));
        }
        if self.player_a == self.player_b && self.role_a == self.role_b {
            return Err(Error::InvalidRecord(format!(
                "game `{}`: player `{}` cannot play itself in the same role",
                self.game_id, self.player_a
            )));
        }
        for s in [self.score_a, self.score_b].into_iter().flatten() {
            if !s.is_finite() {
                return Err(Error::InvalidRecord(format!(
                    "game `{}`: non-finite score",
                    self.game_id
                )));
            }
        }
        Ok(())
    }

    pub fn identity_a(&self, role_split: bool) -> Identity {
        identity_for(&self.player_a, &self.role_a, role_split)
    }

    pub fn identity_b(&self, role_split: bool) -> Identity {
        identity_for(&self.player_b, &self.role_b, role_split)
    }
}

fn identity_for(player: &PlayerId, role: &str, role_split: bool) -> Identity {
    if role_split {
        Identity::with_role(player.clone(), role)
    } else {
        Identity::player(player.clone())
    }
}

/// Aggregated results between identities `i < j` (graph indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEdge {
    pub i: usize,
    pub j: usize,
    pub wins_i: u64,
    pub draws: u64,
    pub wins_j: u64,
    /// Score credited to `i`; `wins_i + draws / 2` unless margin-weighted.
    pub weighted_score_i: f64,
}

impl ComparisonEdge {
    pub fn games(&self) -> u64 {
        self.wins_i + self.draws + self.wins_j
    }

    pub fn weighted_score_j(&self) -> f64 {
        self.games() as f64 - self.weighted_score_i
    }

    /// Score of `node` on this edge, which must be one of its endpoints.
    pub fn score_of(&self, node: usize) -> f64 {
        if node == self.i {
            self.weighted_score_i
        } else {
            self.weighted_score_j()
        }
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.i {
            self.j
        } else {
            self.i
        }
    }
}

/// One side's view of an edge: opponent index, games played, own score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub opponent: usize,
    pub games: f64,
    pub score: f64,
}

/// A pairwise result with an explicit (possibly fractional) score for side a.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComparison {
    pub a: Identity,
    pub b: Identity,
    pub outcome: Outcome,
    pub score_a: f64,
}

/// Players (with priors) plus aggregated pairwise results. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentGraph {
    identities: Vec<Identity>,
    priors: Vec<RatingEstimate>,
    edges: Vec<ComparisonEdge>,
    #[serde(skip)]
    index: HashMap<Identity, usize>,
}

#[derive(Default)]
struct Tally {
    wins_i: u64,
    draws: u64,
    wins_j: u64,
    scores_i: Vec<f64>,
}

impl TournamentGraph {
    /// Assemble a graph from explicit parts. Edges must reference valid indices.
    pub fn from_parts(
        identities: Vec<Identity>,
        priors: Vec<RatingEstimate>,
        edges: Vec<ComparisonEdge>,
    ) -> Result<Self> {
        if identities.len() != priors.len() {
            return Err(Error::InvalidParameter {
                name: "priors",
                reason: "one prior per identity required".into(),
            });
        }
        let mut index = HashMap::with_capacity(identities.len());
        for (k, id) in identities.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(Error::InvalidRecord(format!("duplicate identity `{id}`")));
            }
        }
        let mut seen = HashSet::new();
        for e in &edges {
            let n = identities.len();
            if e.i >= n || e.j >= n || e.i == e.j {
                return Err(Error::InvalidRecord(format!(
                    "edge ({}, {}) does not join two distinct identities",
                    e.i, e.j
                )));
            }
            if e.games() == 0 {
                return Err(Error::InvalidRecord("edge with zero games".into()));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidRecord(format!(
                    "duplicate edge between `{}` and `{}`",
                    identities[e.i], identities[e.j]
                )));
            }
        }
        for p in &priors {
            p.validate()?;
        }
        Ok(TournamentGraph {
            identities,
            priors,
            edges,
            index,
        })
    }

    /// Build from comparisons carrying explicit scores. Duplicate unordered
    /// pairs are merged; the result does not depend on input order.
    pub fn from_weighted_comparisons(comparisons: &[WeightedComparison]) -> Result<Self> {
        if comparisons.is_empty() {
            return Err(Error::EmptyInput("comparison list"));
        }
        let identities: Vec<Identity> = comparisons
            .iter()
            .flat_map(|c| [c.a.clone(), c.b.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&Identity, usize> =
            identities.iter().enumerate().map(|(k, id)| (id, k)).collect();

        let mut tallies: BTreeMap<(usize, usize), Tally> = BTreeMap::new();
        for c in comparisons {
            if c.a == c.b {
                return Err(Error::InvalidRecord(format!("`{}` compared with itself", c.a)));
            }
            if !(0.0..=1.0).contains(&c.score_a) {
                return Err(Error::InvalidRecord(format!(
                    "score {} outside [0, 1]",
                    c.score_a
                )));
            }
            let (ia, ib) = (index[&c.a], index[&c.b]);
            let (i, j, outcome, score_i) = if ia < ib {
                (ia, ib, c.outcome, c.score_a)
            } else {
                (ib, ia, c.outcome.swapped(), 1.0 - c.score_a)
            };
            let t = tallies.entry((i, j)).or_default();
            match outcome {
                Outcome::AWins => t.wins_i += 1,
                Outcome::BWins => t.wins_j += 1,
                Outcome::Draw => t.draws += 1,
            }
            t.scores_i.push(score_i);
        }

        let edges = tallies
            .into_iter()
            .map(|((i, j), mut t)| {
                // fixed summation order keeps merging order-independent
                t.scores_i.sort_by(f64::total_cmp);
                ComparisonEdge {
                    i,
                    j,
                    wins_i: t.wins_i,
                    draws: t.draws,
                    wins_j: t.wins_j,
                    weighted_score_i: t.scores_i.iter().sum(),
                }
            })
            .collect();
        let priors = vec![RatingEstimate::default(); identities.len()];
        TournamentGraph::from_parts(identities, priors, edges)
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn identities(&self) -> &[Identity] {
        &self.identities
    }

    pub fn identity(&self, k: usize) -> &Identity {
        &self.identities[k]
    }

    pub fn index_of(&self, id: &Identity) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn priors(&self) -> &[RatingEstimate] {
        &self.priors
    }

    pub fn edges(&self) -> &[ComparisonEdge] {
        &self.edges
    }

    pub fn set_prior(&mut self, id: &Identity, prior: RatingEstimate) -> Result<()> {
        prior.validate()?;
        let k = self
            .index_of(id)
            .ok_or_else(|| Error::UnknownIdentity(id.to_string()))?;
        self.priors[k] = prior;
        Ok(())
    }

    pub fn with_uniform_prior(mut self, prior: RatingEstimate) -> Self {
        self.priors.iter_mut().for_each(|p| *p = prior);
        self
    }

    /// Apply priors keyed by identity; identities not in the map keep theirs.
    pub fn with_priors(mut self, priors: &BTreeMap<Identity, RatingEstimate>) -> Result<Self> {
        for (id, p) in priors {
            self.set_prior(id, *p)?;
        }
        Ok(self)
    }

    /// Per-identity neighbour lists in edge order.
    pub fn adjacency(&self) -> Vec<Vec<Neighbor>> {
        let mut adj = vec![Vec::new(); self.len()];
        for e in &self.edges {
            let games = e.games() as f64;
            adj[e.i].push(Neighbor {
                opponent: e.j,
                games,
                score: e.weighted_score_i,
            });
            adj[e.j].push(Neighbor {
                opponent: e.i,
                games,
                score: e.weighted_score_j(),
            });
        }
        adj
    }

    /// Games played by each identity.
    pub fn games_played(&self) -> Vec<u64> {
        let mut g = vec![0; self.len()];
        for e in &self.edges {
            g[e.i] += e.games();
            g[e.j] += e.games();
        }
        g
    }

    /// Connected components as sorted index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        connected_components(self.len(), self.edges.iter().map(|e| (e.i, e.j)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            identities: Vec<Identity>,
            priors: Vec<RatingEstimate>,
            edges: Vec<ComparisonEdge>,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        TournamentGraph::from_parts(raw.identities, raw.priors, raw.edges)
    }
}

pub(crate) fn connected_components(
    n: usize,
    links: impl Iterator<Item = (usize, usize)>,
) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in links {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..n {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(k);
    }
    groups.into_values().collect()
}

/// Aggregate game records into a tournament graph.
///
/// With `role_split`, each (player, role) pair becomes its own node. Identities
/// are sorted so the graph does not depend on record order. Every identity
/// gets the default (uninformative) prior.
pub fn build_graph(records: &[GameRecord], role_split: bool) -> Result<TournamentGraph> {
    if records.is_empty() {
        return Err(Error::EmptyInput("game records"));
    }
    let mut ids = HashSet::with_capacity(records.len());
    let mut comparisons = Vec::with_capacity(records.len());
    for r in records {
        r.validate()?;
        if !ids.insert(r.game_id.as_str()) {
            return Err(Error::DuplicateGameId(r.game_id.clone()));
        }
        let (a, b) = (r.identity_a(role_split), r.identity_b(role_split));
        if a == b {
            return Err(Error::InvalidRecord(format!(
                "game `{}`: self-play collapses to one identity without role split",
                r.game_id
            )));
        }
        comparisons.push(WeightedComparison {
            a,
            b,
            outcome: r.outcome,
            score_a: r.outcome.score_a(),
        });
    }
    TournamentGraph::from_weighted_comparisons(&comparisons)
}
