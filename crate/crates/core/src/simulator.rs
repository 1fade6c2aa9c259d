//! Seeded synthetic tournaments with era-based populations of two-role agents.
//!
//! Agents have no playing ability beyond two assigned numbers, a Red and a
//! Blue capability. Each era introduces new agents whose average capability is
//! `era_step` higher than the last; the best few of each era are carried into
//! the next. Winners are drawn from the logistic win probability of the two
//! role capabilities in play.
//!
//! Randomness comes from ChaCha8 seeded with `seed`. The population uses
//! stream 0 and the schedule stream 1, so the same (config, seed) always
//! produces the same records.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::batch_fit::{fit_pml, BatchConfig};
use crate::error::{Error, Result};
use crate::lls_fit::{build_advantage_graph, fit_lls, LlsConfig, FIT_PRIOR_WEIGHT};
use crate::probability::{win_prob, MomentMethod};
use crate::tournament::{build_graph, GameRecord, Identity, Outcome, PlayerId, DEFAULT_MEAN};

pub const PRNG_NAME: &str = "ChaCha8";
pub const RED: &str = "Red";
pub const BLUE: &str = "Blue";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Uniform on `[-spread, +spread]`.
    #[default]
    Uniform,
    /// Normal with the same variance as the uniform, `spread / sqrt(3)`.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleAssignment {
    /// The new agent takes Red and Blue in turn.
    #[default]
    Alternate,
    CoinFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub eras: usize,
    pub agents_per_era: usize,
    pub carryover: usize,
    /// Games each new agent plays in each role.
    pub games_per_pairing_block: usize,
    pub era_step: f64,
    /// Average capability of the first era.
    pub base_mean: f64,
    pub base_spread: f64,
    pub role_spread: f64,
    pub seed: u64,
    pub perturbation: Perturbation,
    pub roles: RoleAssignment,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            eras: 10,
            agents_per_era: 20,
            carryover: 5,
            games_per_pairing_block: 100,
            era_step: 150.0,
            base_mean: DEFAULT_MEAN,
            base_spread: 200.0,
            role_spread: 200.0,
            seed: 0,
            perturbation: Perturbation::Uniform,
            roles: RoleAssignment::Alternate,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let count = |name: &'static str, v: usize, min: usize| {
            if v < min {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be >= {min}, got {v}"),
                })
            } else {
                Ok(())
            }
        };
        count("eras", self.eras, 1)?;
        // the first era has nobody to play but its own agents
        count("agents_per_era", self.agents_per_era, 2)?;
        count("carryover", self.carryover, 1)?;
        count("games_per_pairing_block", self.games_per_pairing_block, 1)?;
        if self.carryover > self.agents_per_era {
            return Err(Error::InvalidParameter {
                name: "carryover",
                reason: "cannot exceed agents_per_era".into(),
            });
        }
        for (name, v) in [("base_spread", self.base_spread), ("role_spread", self.role_spread)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        crate::error::check_finite(self.era_step, "era_step")?;
        crate::error::check_finite(self.base_mean, "base_mean")?;
        Ok(())
    }

    /// Number of records [`play_schedule`] emits.
    pub fn total_games(&self) -> usize {
        self.eras * self.agents_per_era * 2 * self.games_per_pairing_block
    }

    fn era_mean(&self, era: usize) -> f64 {
        self.base_mean + self.era_step * (era - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAgent {
    pub id: PlayerId,
    /// 1-based era of creation.
    pub era: usize,
    pub red_cap: f64,
    pub blue_cap: f64,
    /// Harmonic average of the two role capabilities.
    pub true_combined: f64,
}

fn harmonic(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::OutOfRange {
            value: a.min(b),
            bound: "capabilities must be > 0 for the harmonic average; raise base_mean",
        });
    }
    Ok(2.0 * a * b / (a + b))
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn perturb(rng: &mut ChaCha8Rng, kind: Perturbation, spread: f64) -> f64 {
    if spread == 0.0 {
        return 0.0;
    }
    match kind {
        Perturbation::Uniform => spread * (2.0 * rng.random::<f64>() - 1.0),
        Perturbation::Normal => Normal::new(0.0, spread / 3f64.sqrt())
            .expect("spread is finite and positive")
            .sample(rng),
    }
}

/// Draw every agent of every era. Ids are `a0001`, `a0002`, ... in creation
/// order.
pub fn generate_population(cfg: &SimConfig) -> Result<Vec<SimAgent>> {
    cfg.validate()?;
    let mut r = rng(cfg.seed, 0);
    let width = (cfg.eras * cfg.agents_per_era).to_string().len().max(4);
    let mut agents = Vec::with_capacity(cfg.eras * cfg.agents_per_era);
    for era in 1..=cfg.eras {
        for _ in 0..cfg.agents_per_era {
            let base = cfg.era_mean(era) + perturb(&mut r, cfg.perturbation, cfg.base_spread);
            let red_cap = base + perturb(&mut r, cfg.perturbation, cfg.role_spread);
            let blue_cap = base + perturb(&mut r, cfg.perturbation, cfg.role_spread);
            agents.push(SimAgent {
                id: PlayerId::new(format!("a{:0width$}", agents.len() + 1))?,
                era,
                red_cap,
                blue_cap,
                true_combined: harmonic(red_cap, blue_cap)?,
            });
        }
    }
    Ok(agents)
}

/// Play every era. Each new agent plays `games_per_pairing_block` games as Red
/// and as many as Blue, cycling through its opponents: the carry-overs from
/// the previous era, or in the first era the other new agents. The carry-overs
/// are the `carryover` agents with the best win percentage over the previous
/// era, ties going to the smaller id.
pub fn play_schedule(agents: &[SimAgent], cfg: &SimConfig) -> Result<Vec<GameRecord>> {
    cfg.validate()?;
    if agents.len() != cfg.eras * cfg.agents_per_era {
        return Err(Error::InvalidParameter {
            name: "agents",
            reason: "population does not match the config".into(),
        });
    }
    let mut r = rng(cfg.seed, 1);
    let mut records = Vec::with_capacity(cfg.total_games());
    let mut carried: Vec<usize> = Vec::new();
    for era in 1..=cfg.eras {
        let new: Vec<usize> = ((era - 1) * cfg.agents_per_era..era * cfg.agents_per_era).collect();
        let mut wins = vec![0u32; agents.len()];
        let mut played = vec![0u32; agents.len()];
        for &a in &new {
            let pool: Vec<usize> = if carried.is_empty() {
                new.iter().copied().filter(|&b| b != a).collect()
            } else {
                carried.clone()
            };
            for g in 0..2 * cfg.games_per_pairing_block {
                let b = pool[(g / 2) % pool.len()];
                let a_red = match cfg.roles {
                    RoleAssignment::Alternate => g % 2 == 0,
                    RoleAssignment::CoinFlip => r.random::<bool>(),
                };
                let (red, blue) = if a_red { (a, b) } else { (b, a) };
                let p = win_prob(agents[red].red_cap, agents[blue].blue_cap)?;
                let red_wins = r.random::<f64>() < p;
                let winner = if red_wins { red } else { blue };
                wins[winner] += 1;
                played[red] += 1;
                played[blue] += 1;
                let mut rec = GameRecord::new(
                    format!("g{:06}", records.len() + 1),
                    (agents[red].id.as_str(), RED),
                    (agents[blue].id.as_str(), BLUE),
                    if red_wins { Outcome::AWins } else { Outcome::BWins },
                )?;
                rec.scenario = format!("era{era}");
                records.push(rec);
            }
        }
        let mut field: Vec<usize> = carried.iter().chain(&new).copied().collect();
        field.sort_by(|&x, &y| {
            let px = wins[x] as f64 / played[x] as f64;
            let py = wins[y] as f64 / played[y] as f64;
            py.total_cmp(&px).then_with(|| agents[x].id.cmp(&agents[y].id))
        });
        carried = field[..cfg.carryover].to_vec();
    }
    Ok(records)
}

/// Which estimator [`evaluate_fit`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimFitter {
    Pml(BatchConfig),
    Lls(LlsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEvaluation {
    /// Pearson correlation of fitted ratings with `true_combined`.
    pub correlation: f64,
    /// RMS deviation after shifting the fit to the truth's mean.
    pub rms_error: f64,
    /// Fitted rating per agent, in population order.
    pub fitted: Vec<f64>,
    pub iterations: usize,
}

/// Fit ratings (one per agent, roles pooled, uninformative priors) and
/// compare with the true combined capabilities.
pub fn evaluate_fit(records: &[GameRecord], agents: &[SimAgent], fitter: &SimFitter) -> Result<FitEvaluation> {
    let graph = build_graph(records, false)?;
    let (by_id, iterations): (Vec<(Identity, f64)>, usize) = match fitter {
        SimFitter::Pml(cfg) => {
            let res = fit_pml(&graph, cfg)?;
            (res.identities.into_iter().zip(res.ratings).collect(), res.iterations)
        }
        SimFitter::Lls(cfg) => {
            let adv = build_advantage_graph(&graph, FIT_PRIOR_WEIGHT, MomentMethod::Approx)?;
            let res = fit_lls(&adv, cfg)?;
            (res.identities.into_iter().zip(res.ratings).collect(), res.iterations)
        }
    };
    let lookup: std::collections::HashMap<&Identity, f64> = by_id.iter().map(|(i, r)| (i, *r)).collect();
    let fitted = agents
        .iter()
        .map(|a| {
            lookup
                .get(&Identity::player(a.id.clone()))
                .copied()
                .ok_or_else(|| Error::UnknownIdentity(a.id.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<f64> = agents.iter().map(|a| a.true_combined).collect();
    Ok(FitEvaluation {
        correlation: pearson(&fitted, &truth),
        rms_error: aligned_rms(&fitted, &truth),
        fitted,
        iterations,
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// RMS of `x - y` once both are shifted to zero mean.
pub fn aligned_rms(x: &[f64], y: &[f64]) -> f64 {
    let shift = mean(y) - mean(x);
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a + shift - b).powi(2)).sum();
    (ss / x.len() as f64).sqrt()
}

/// Mean of `values` per era of creation.
pub fn era_means(agents: &[SimAgent], values: &[f64]) -> Vec<f64> {
    let eras = agents.iter().map(|a| a.era).max().unwrap_or(0);
    let mut sum = vec![0.0; eras];
    let mut n = vec![0usize; eras];
    for (a, v) in agents.iter().zip(values) {
        sum[a.era - 1] += v;
        n[a.era - 1] += 1;
    }
    sum.iter().zip(&n).map(|(s, &k)| s / k as f64).collect()
}

pub const TRUTH_COLUMNS: [&str; 5] = ["agent", "era", "red_cap", "blue_cap", "true_combined"];

/// Write the truth table as CSV after `# ` comment lines.
pub fn write_truth<W: Write>(mut w: W, comments: &[String], agents: &[SimAgent]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRUTH_COLUMNS)?;
    for a in agents {
        out.write_record([
            a.id.to_string(),
            a.era.to_string(),
            a.red_cap.to_string(),
            a.blue_cap.to_string(),
            a.true_combined.to_string(),
        ])?;
    }
    out.flush()
}

pub fn read_truth<R: Read>(r: R) -> Result<Vec<SimAgent>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut agents = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let parse_err = |message: String| Error::Parse { line: k + 2, message };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        if row.len() != TRUTH_COLUMNS.len() {
            return Err(parse_err(format!("expected {} columns", TRUTH_COLUMNS.len())));
        }
        let num = |c: usize| -> Result<f64> {
            row[c]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad {} `{}`", TRUTH_COLUMNS[c], &row[c])))
        };
        agents.push(SimAgent {
            id: PlayerId::new(row[0].trim())?,
            era: row[1].trim().parse().map_err(|_| parse_err(format!("bad era `{}`", &row[1])))?,
            red_cap: num(2)?,
            blue_cap: num(3)?,
            true_combined: num(4)?,
        });
    }
    if agents.is_empty() {
        return Err(Error::EmptyInput("truth file"));
    }
    Ok(agents)
}
