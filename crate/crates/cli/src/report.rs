use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scelo::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("non-finite value in report: {0}")]
    NonFinite(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::BadFile { .. } => 3,
            CliError::NonFinite(_) => 5,
            CliError::Core(e) => match e {
                Error::InvalidParameter { .. } => 2,
                Error::Parse { .. }
                | Error::InvalidRecord(_)
                | Error::DuplicateGameId(_)
                | Error::UnknownIdentity(_)
                | Error::EmptyInput(_)
                | Error::Disconnected(_) => 3,
                Error::NonConvergence { .. } => 4,
                Error::OutOfRange { .. } | Error::ProbabilityOutOfRange { .. } | Error::NonFinite(_) => 5,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.into(), source })
}

/// Attach the file name to parse errors so the message points somewhere.
pub fn in_file<T>(path: &Path, r: scelo::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => CliError::Core(Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        }),
        other => CliError::Core(other),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, inputs: Vec<InputDigest>, seed: Option<u64>) -> Self {
        Manifest {
            tool: "scelo".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs,
            seed,
        }
    }

    /// The manifest as `# `-free comment lines.
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("{} {} {}", self.tool, self.command, self.version)];
        for i in &self.inputs {
            out.push(format!("input {} sha256 {}", i.path, i.sha256));
        }
        if let Some(s) = self.seed {
            out.push(format!("seed {s}"));
        }
        out.push(format!("config {}", self.config));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRow {
    pub id: String,
    pub rating: f64,
    pub sigma_total: Option<f64>,
    pub sigma_statistical: Option<f64>,
    pub sigma_structural: Option<f64>,
    pub games: u64,
    /// Observed score in this file, margin-weighted when margins are on.
    pub actual_score: f64,
    pub expected_score: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleRow {
    pub agent: String,
    pub first: f64,
    pub second: f64,
    pub overall: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleBlock {
    pub first_role: String,
    pub second_role: String,
    /// Side advantage of the first role.
    pub rho: f64,
    pub agents: Vec<RoleRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: Option<usize>,
    pub max_residual: Option<f64>,
    pub components: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: Manifest,
    pub players: Vec<PlayerRow>,
    pub roles: Option<RoleBlock>,
    pub diagnostics: Diagnostics,
}

impl Report {
    fn numbers(&self) -> Vec<(String, f64)> {
        let mut v = Vec::new();
        for p in &self.players {
            v.push((format!("{} rating", p.id), p.rating));
            v.push((format!("{} actual score", p.id), p.actual_score));
            for (what, x) in [
                ("sigma", p.sigma_total),
                ("statistical sigma", p.sigma_statistical),
                ("structural sigma", p.sigma_structural),
                ("expected score", p.expected_score),
            ] {
                if let Some(x) = x {
                    v.push((format!("{} {what}", p.id), x));
                }
            }
        }
        if let Some(r) = &self.roles {
            v.push(("rho".into(), r.rho));
            for a in &r.agents {
                for x in [a.first, a.second, a.overall, a.residual] {
                    v.push((a.agent.clone(), x));
                }
            }
        }
        if let Some(x) = self.diagnostics.max_residual {
            v.push(("max residual".into(), x));
        }
        v
    }

    /// JSON with a trailing newline; refuses to serialise NaN or infinity.
    pub fn to_json(&self) -> CliResult<String> {
        if let Some((what, _)) = self.numbers().into_iter().find(|(_, x)| !x.is_finite()) {
            return Err(CliError::NonFinite(what));
        }
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        Ok(s)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for l in self.manifest.lines() {
            let _ = writeln!(out, "# {l}");
        }
        let width = self.players.iter().map(|p| p.id.len()).max().unwrap_or(6).max(6);
        let _ = writeln!(
            out,
            "{:<width$} {:>10} {:>8} {:>8} {:>8} {:>6} {:>9}",
            "player", "rating", "sigma", "stat", "struct", "games", "score"
        );
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.1}"));
        for p in &self.players {
            let _ = writeln!(
                out,
                "{:<width$} {:>10.1} {:>8} {:>8} {:>8} {:>6} {:>9.3}",
                p.id,
                p.rating,
                opt(p.sigma_total),
                opt(p.sigma_statistical),
                opt(p.sigma_structural),
                p.games,
                p.actual_score
            );
        }
        if let Some(r) = &self.roles {
            let _ = writeln!(out, "side advantage of {} over {}: {:.1} (role ratings centred on 0)", r.first_role, r.second_role, r.rho);
            let w = r.agents.iter().map(|a| a.agent.len()).max().unwrap_or(5).max(5);
            let _ = writeln!(
                out,
                "{:<w$} {:>10} {:>10} {:>10} {:>9}",
                "agent", r.first_role, r.second_role, "overall", "residual"
            );
            for a in &r.agents {
                let _ = writeln!(
                    out,
                    "{:<w$} {:>10.1} {:>10.1} {:>10.1} {:>9.1}",
                    a.agent, a.first, a.second, a.overall, a.residual
                );
            }
        }
        if let Some(i) = self.diagnostics.iterations {
            let _ = writeln!(out, "iterations: {i}");
        }
        if let Some(m) = self.diagnostics.max_residual {
            let _ = writeln!(out, "max residual: {m:.4}");
        }
        out
    }
}
