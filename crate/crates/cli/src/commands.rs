use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use scelo::asymmetric::{anova, fit_role_ratings, RoleFitter};
use scelo::batch_fit::{actual_scores, fit_pml, BatchConfig};
use scelo::betting::{optimal_bet, BetParams, Risk};
use scelo::elo_update::{
    classic_update, expected_score, sc_update, sc_update_uninformative, Opponent, ScConfig, UpdateContext,
};
use scelo::io::{parse_priors, read_records, write_records};
use scelo::lls_fit::{build_advantage_graph, fit_lls, fit_lls_weighted, LlsConfig, LlsResult};
use scelo::probability::{elo_average, population_improvement, required_sample_size, MomentMethod};
use scelo::scoring::{ecf_to_elo, elo_to_ecf, like_for_like_comparisons, MarginPolicy};
use scelo::simulator::{
    aligned_rms, generate_population, pearson, play_schedule, read_truth, write_truth, SimConfig, PRNG_NAME,
};
use scelo::{build_graph, Error, Execution, GameRecord, Identity, RatingEstimate, TournamentGraph};
use serde_json::json;

use crate::report::{
    in_file, read_file, sha256_hex, write_file, CliError, CliResult, Diagnostics, InputDigest, Manifest,
    PlayerRow, Report, RoleBlock, RoleRow,
};
use crate::{EvalArgs, FitArgs, Fitter, InputArgs, Moments, RateArgs, RateMethod, SimulateArgs, Tool};

struct Loaded {
    graph: TournamentGraph,
    records: Vec<GameRecord>,
    inputs: Vec<InputDigest>,
    warnings: Vec<String>,
}

fn utf8(path: &Path, bytes: &[u8]) -> CliResult<String> {
    String::from_utf8(bytes.to_vec()).map_err(|e| CliError::BadFile {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Read records (and priors), aggregate into a graph with priors applied.
fn load(input: &InputArgs, role_split: bool) -> CliResult<Loaded> {
    let bytes = read_file(&input.records)?;
    let records = in_file(&input.records, read_records(bytes.as_slice()))?;
    let mut inputs = vec![InputDigest::new(&input.records, &bytes)];
    let margin = MarginPolicy::parse(&input.margin)?;
    let mut graph = if margin == MarginPolicy::Off {
        build_graph(&records, role_split)?
    } else {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.game_id.as_str()) {
                return Err(Error::DuplicateGameId(r.game_id.clone()).into());
            }
        }
        let mut cmp = like_for_like_comparisons(&records, margin)?;
        if !role_split {
            for c in &mut cmp {
                c.a = Identity::player(c.a.player.clone());
                c.b = Identity::player(c.b.player.clone());
            }
        }
        TournamentGraph::from_weighted_comparisons(&cmp)?
    };

    let mut warnings = Vec::new();
    if let Some(path) = &input.priors {
        let bytes = read_file(path)?;
        let priors = in_file(path, parse_priors(&utf8(path, &bytes)?))?;
        inputs.push(InputDigest::new(path, &bytes));
        let mut used = HashSet::new();
        for k in 0..graph.len() {
            let id = graph.identity(k).clone();
            let pooled = Identity::player(id.player.clone());
            let hit = priors.get_key_value(&id).or_else(|| priors.get_key_value(&pooled));
            if let Some((key, prior)) = hit {
                used.insert(key.clone());
                graph.set_prior(&id, *prior)?;
            }
        }
        for key in priors.keys().filter(|k| !used.contains(*k)) {
            warnings.push(format!("prior for `{key}` matches no player in the records"));
        }
    }
    Ok(Loaded {
        graph,
        records,
        inputs,
        warnings,
    })
}

fn component_names(graph: &TournamentGraph) -> Vec<Vec<String>> {
    graph
        .components()
        .into_iter()
        .map(|c| c.into_iter().map(|k| graph.identity(k).to_string()).collect())
        .collect()
}

fn emit(report: &Report, out: Option<&Path>) -> CliResult<()> {
    let json = report.to_json()?;
    for w in &report.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = out {
        write_file(path, json.as_bytes())?;
    }
    print!("{}", report.table());
    Ok(())
}

pub fn rate(args: RateArgs) -> CliResult<()> {
    if let Some(k) = args.k {
        if !(k > 0.0) || !k.is_finite() {
            return Err(CliError::Usage(format!("--k must be a positive number, got {k}")));
        }
    }
    let Loaded {
        graph,
        inputs,
        mut warnings,
        ..
    } = load(&args.input, args.roles)?;
    let adj = graph.adjacency();
    let priors = graph.priors();
    let games = graph.games_played();
    let sc = ScConfig {
        tol: args.input.tol,
        max_iters: args.input.max_iters,
        ..ScConfig::default()
    };
    let mut players = Vec::with_capacity(graph.len());
    let mut most_iters = 0;
    for i in 0..graph.len() {
        let mut prior = priors[i];
        if let (Some(k), false) = (args.k, prior.is_frozen()) {
            prior = RatingEstimate::from_k(prior.mu, k);
        }
        let opponents = adj[i]
            .iter()
            .map(|n| Opponent::new(priors[n.opponent].mu, n.games))
            .collect();
        let a: f64 = adj[i].iter().map(|n| n.score).sum();
        let ctx = UpdateContext::new(prior, opponents, a)?;
        let res = if prior.is_frozen() {
            classic_update(&ctx)
        } else {
            match args.method {
                RateMethod::Classic => classic_update(&ctx),
                RateMethod::Sc => sc_update(&ctx, &sc)?,
                RateMethod::ScFlat => sc_update_uninformative(&ctx, sc.tol, sc.max_iters)?,
            }
        };
        most_iters = most_iters.max(res.iterations);
        players.push(PlayerRow {
            id: graph.identity(i).to_string(),
            rating: res.rating,
            sigma_total: Some(if prior.is_frozen() { 0.0 } else { res.sigma }),
            sigma_statistical: None,
            sigma_structural: None,
            games: games[i],
            actual_score: a,
            expected_score: Some(expected_score(res.rating, &ctx.opponents)),
            iterations: Some(res.iterations),
        });
    }
    let components = component_names(&graph);
    if components.len() > 1 {
        warnings.push(format!("records form {} separate groups of players", components.len()));
    }
    let config = json!({
        "method": args.method,
        "k": args.k,
        "tol": args.input.tol,
        "max_iters": args.input.max_iters,
        "margin": args.input.margin,
        "roles": args.roles,
    });
    let report = Report {
        manifest: Manifest::new("rate", config, inputs, None),
        players,
        roles: None,
        diagnostics: Diagnostics {
            iterations: Some(most_iters),
            max_residual: None,
            components,
            warnings,
        },
    };
    emit(&report, args.input.out.as_deref())
}

fn role_pair(records: &[GameRecord], arg: &str) -> CliResult<(String, String)> {
    if !arg.is_empty() {
        return match arg.split_once(',') {
            Some((a, b)) if !a.is_empty() && !b.is_empty() && a != b => Ok((a.into(), b.into())),
            _ => Err(CliError::Usage(format!("--roles expects FIRST,SECOND, got `{arg}`"))),
        };
    }
    let roles: std::collections::BTreeSet<&str> =
        records.iter().flat_map(|r| [r.role_a.as_str(), r.role_b.as_str()]).collect();
    let roles: Vec<&str> = roles.into_iter().collect();
    match roles.as_slice() {
        [a, b] if !a.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(CliError::Usage(format!(
            "cannot infer two roles from the records (found {:?}); pass --roles FIRST,SECOND",
            roles
        ))),
    }
}

fn lls_rows(graph: &TournamentGraph, res: &LlsResult) -> Vec<PlayerRow> {
    let scores = actual_scores(&graph.adjacency());
    let games = graph.games_played();
    (0..graph.len())
        .map(|k| PlayerRow {
            id: res.identities[k].to_string(),
            rating: res.ratings[k],
            sigma_total: res.uncertainty[k].map(|u| u.total),
            sigma_statistical: res.uncertainty[k].map(|u| u.statistical),
            sigma_structural: res.uncertainty[k].map(|u| u.structural),
            games: games[k],
            actual_score: scores[k],
            expected_score: None,
            iterations: None,
        })
        .collect()
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    let role_split = args.roles.is_some();
    let Loaded {
        graph,
        records,
        inputs,
        mut warnings,
    } = load(&args.input, role_split)?;
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let method = match args.moments {
        Moments::Approx => MomentMethod::Approx,
        Moments::Numeric => MomentMethod::Numeric,
    };
    let batch = BatchConfig {
        tol: args.input.tol,
        max_iters: args.input.max_iters,
        target_mean: args.target_mean,
        execution,
        ..BatchConfig::default()
    };
    let lls = LlsConfig {
        tol: args.input.tol,
        max_iters: args.input.max_iters,
        target_mean: args.target_mean.unwrap_or(scelo::DEFAULT_MEAN),
        execution,
        ..LlsConfig::default()
    };
    let components = component_names(&graph);
    if components.len() > 1 {
        for (k, c) in components.iter().enumerate() {
            warnings.push(format!("component {}: {}", k + 1, c.join(", ")));
        }
        warnings.push(format!(
            "the graph has {} disconnected components; ratings are only comparable within one",
            components.len()
        ));
    }

    let (players, iterations, max_residual) = match args.fitter {
        Fitter::Pml => {
            let res = fit_pml(&graph, &batch)?;
            let scores = actual_scores(&graph.adjacency());
            let games = graph.games_played();
            let rows = (0..graph.len())
                .map(|k| PlayerRow {
                    id: res.identities[k].to_string(),
                    rating: res.ratings[k],
                    sigma_total: None,
                    sigma_statistical: None,
                    sigma_structural: None,
                    games: games[k],
                    actual_score: scores[k],
                    expected_score: None,
                    iterations: None,
                })
                .collect();
            (rows, res.iterations, res.max_change)
        }
        Fitter::Lls | Fitter::LlsWeighted => {
            let adv = build_advantage_graph(&graph, args.prior_weight, method)?;
            let res = if matches!(args.fitter, Fitter::Lls) {
                fit_lls(&adv, &lls)?
            } else {
                if args.target_mean.is_some() {
                    warnings.push("lls-weighted keeps the prior means; --target-mean ignored".into());
                }
                fit_lls_weighted(&adv, &lls)?
            };
            (lls_rows(&graph, &res), res.iterations, res.max_residual)
        }
    };

    let roles = match &args.roles {
        None => None,
        Some(arg) => {
            let (first, second) = role_pair(&records, arg)?;
            let fitter = match args.fitter {
                Fitter::Pml => RoleFitter::Pml(batch),
                Fitter::Lls | Fitter::LlsWeighted => RoleFitter::Lls {
                    cfg: lls,
                    prior_weight: args.prior_weight,
                    method,
                },
            };
            let rr = fit_role_ratings(&graph, &first, &second, &fitter)?;
            let a = anova(&rr);
            Some(RoleBlock {
                first_role: first,
                second_role: second,
                rho: a.rho,
                agents: (0..rr.agents.len())
                    .map(|k| RoleRow {
                        agent: rr.agents[k].to_string(),
                        first: rr.rp[k],
                        second: rr.rg[k],
                        overall: a.overall[k],
                        residual: a.residual[k],
                    })
                    .collect(),
            })
        }
    };

    let config = json!({
        "fitter": args.fitter,
        "tol": args.input.tol,
        "max_iters": args.input.max_iters,
        "margin": args.input.margin,
        "roles": args.roles,
        "target_mean": args.target_mean,
        "prior_weight": args.prior_weight,
        "moments": args.moments,
    });
    let report = Report {
        manifest: Manifest::new("fit", config, inputs, None),
        players,
        roles,
        diagnostics: Diagnostics {
            iterations: Some(iterations),
            max_residual: Some(max_residual),
            components,
            warnings,
        },
    };
    emit(&report, args.input.out.as_deref())
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut inputs = Vec::new();
    let mut cfg = match &args.config {
        Some(path) => {
            let bytes = read_file(path)?;
            inputs.push(InputDigest::new(path, &bytes));
            in_file(path, SimConfig::from_toml(&utf8(path, &bytes)?))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let agents = generate_population(&cfg)?;
    let records = play_schedule(&agents, &cfg)?;
    let config = serde_json::to_value(&cfg).expect("config serialises");
    let manifest = Manifest::new("simulate", config, inputs, Some(cfg.seed));
    let mut comments = manifest.lines();
    comments.insert(1, format!("prng {PRNG_NAME}"));

    let mut rec_bytes = Vec::new();
    write_records(&mut rec_bytes, &comments, &records).expect("writing to memory");
    let mut truth_bytes = Vec::new();
    write_truth(&mut truth_bytes, &comments, &agents).expect("writing to memory");
    write_file(&args.records, &rec_bytes)?;
    write_file(&args.truth, &truth_bytes)?;

    for l in &comments {
        println!("# {l}");
    }
    println!("agents  {:>6}  {}  sha256 {}", agents.len(), args.truth.display(), sha256_hex(&truth_bytes));
    println!("records {:>6}  {}  sha256 {}", records.len(), args.records.display(), sha256_hex(&rec_bytes));
    Ok(())
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let bytes = read_file(&args.report)?;
    let report: Report = serde_json::from_slice(&bytes).map_err(|e| CliError::BadFile {
        path: args.report.clone(),
        message: e.to_string(),
    })?;
    let truth_bytes = read_file(&args.truth)?;
    let agents = in_file(&args.truth, read_truth(truth_bytes.as_slice()))?;
    let fitted: BTreeMap<&str, f64> = report.players.iter().map(|p| (p.id.as_str(), p.rating)).collect();
    let mut x = Vec::with_capacity(agents.len());
    let mut y = Vec::with_capacity(agents.len());
    for a in &agents {
        let r = fitted
            .get(a.id.as_str())
            .ok_or_else(|| Error::UnknownIdentity(format!("{} (in truth, not in report)", a.id)))?;
        x.push(*r);
        y.push(a.true_combined);
    }
    println!("agents {}", agents.len());
    println!("correlation {:.5}", pearson(&x, &y));
    println!("rms_error {:.1}", aligned_rms(&x, &y));
    Ok(())
}

pub fn tool(t: Tool) -> CliResult<()> {
    match t {
        Tool::ConvertEcf { value, to_ecf } => {
            let v = if to_ecf { elo_to_ecf(value)? } else { ecf_to_elo(value)? };
            println!("{v:.1}");
        }
        Tool::SampleSize { advantage, k_sigma } => {
            println!("{}", required_sample_size(advantage, k_sigma)?);
        }
        Tool::Bet { p, r, pain, curvature } => {
            let risk = match (pain, curvature) {
                (Some(d), None) => Risk::Pain(d),
                (None, Some(a)) => Risk::Curvature(a),
                _ => return Err(CliError::Usage("give exactly one of --pain or --curvature".into())),
            };
            println!("{:.2}", optimal_bet(&BetParams::new(p, r, risk)?)?);
        }
        Tool::EloAverage { opponent, ratings } => {
            println!("{:.1}", elo_average(opponent, &ratings)?.rating);
        }
        Tool::PopulationShift { p1, p2 } => {
            println!("{:+.1}", population_improvement(p1, p2)?);
        }
    }
    Ok(())
}
