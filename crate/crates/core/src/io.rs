//! Flat-file formats: game records (CSV), priors (TOML), truth tables.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tournament::{GameRecord, Identity, Outcome, PlayerId, RatingEstimate};

/// Column order of the game-record format.
pub const RECORD_COLUMNS: [&str; 9] = [
    "game_id", "player_a", "role_a", "player_b", "role_b", "scenario", "score_a", "score_b",
    "outcome",
];

/// Read game records. Lines starting with `#` are comments; a leading
/// header line naming the columns is skipped. Errors carry 1-based line numbers.
pub fn read_records<R: Read>(mut reader: R) -> Result<Vec<GameRecord>> {
    let mut text = String::new();
    reader.read_to_string(&mut text).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    let mut seen_data = false;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line, message };
        let row = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(trimmed.as_bytes())
            .records()
            .next()
            .transpose()
            .map_err(|e| err(e.to_string()))?
            .ok_or_else(|| err("empty record".into()))?;
        if !seen_data && row.get(0) == Some("game_id") {
            seen_data = true;
            continue;
        }
        seen_data = true;
        if row.len() != RECORD_COLUMNS.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                RECORD_COLUMNS.len(),
                row.len()
            )));
        }
        let score = |k: usize| -> Result<Option<f64>> {
            match &row[k] {
                "" => Ok(None),
                s => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| err(format!("bad {} `{s}`", RECORD_COLUMNS[k]))),
            }
        };
        let rec = GameRecord {
            game_id: row[0].to_string(),
            player_a: PlayerId::new(&row[1]).map_err(|e| err(e.to_string()))?,
            role_a: row[2].to_string(),
            player_b: PlayerId::new(&row[3]).map_err(|e| err(e.to_string()))?,
            role_b: row[4].to_string(),
            scenario: row[5].to_string(),
            score_a: score(6)?,
            score_b: score(7)?,
            outcome: Outcome::parse(&row[8]).map_err(|e| err(e.to_string()))?,
        };
        rec.validate().map_err(|e| err(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_records(text: &str) -> Result<Vec<GameRecord>> {
    read_records(text.as_bytes())
}

/// Write records with a header row, preceded by `# ` comment lines.
pub fn write_records<W: Write>(
    mut w: W,
    comments: &[String],
    records: &[GameRecord],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RECORD_COLUMNS)?;
    for r in records {
        let fmt = |s: Option<f64>| s.map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([
            r.game_id.as_str(),
            r.player_a.as_str(),
            &r.role_a,
            r.player_b.as_str(),
            &r.role_b,
            &r.scenario,
            &fmt(r.score_a),
            &fmt(r.score_b),
            r.outcome.code(),
        ])?;
    }
    wtr.flush()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorEntry {
    mu: f64,
    sigma: Option<f64>,
    k: Option<f64>,
}

/// Parse a priors file: a TOML table mapping `player` or `player/role` to
/// `{ mu = .., sigma = .. }` (or `k = ..` in place of sigma).
pub fn parse_priors(text: &str) -> Result<BTreeMap<Identity, RatingEstimate>> {
    let raw: BTreeMap<String, PriorEntry> = toml::from_str(text).map_err(|e| Error::Parse {
        line: e
            .span()
            .map_or(0, |s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    let mut out = BTreeMap::new();
    for (name, entry) in raw {
        let est = match (entry.sigma, entry.k) {
            (Some(s), None) => RatingEstimate::new(entry.mu, s),
            (None, Some(k)) if k >= 0.0 => RatingEstimate::from_k(entry.mu, k),
            (None, None) => RatingEstimate::new(entry.mu, crate::DEFAULT_SIGMA),
            _ => {
                return Err(Error::InvalidParameter {
                    name: "priors",
                    reason: format!("`{name}`: give either sigma or a non-negative k"),
                })
            }
        };
        est.validate()?;
        out.insert(Identity::parse(&name)?, est);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# comment
game_id,player_a,role_a,player_b,role_b,scenario,score_a,score_b,outcome
1,X,Blue,Y,Blue,North,18.6,13.7,A
2,X,Red,Y,Red,North,, ,B
";

    #[test]
    fn reads_with_header_and_comments() {
        let recs = parse_records(SAMPLE).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].score_a, Some(18.6));
        assert_eq!(recs[1].score_b, None);
        assert_eq!(recs[1].outcome, Outcome::BWins);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "1,X,,Y,,s,,,A\n2,X,,Y,,s,,,Q\n";
        match parse_records(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let short = "# c\n1,X,,Y\n";
        let got = parse_records(short);
        assert!(matches!(got, Err(Error::Parse { line: 2, .. })), "{got:?}");
    }

    #[test]
    fn write_read_round_trip() {
        let recs = parse_records(SAMPLE).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &["seed 7".into()], &recs).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn priors_file() {
        let p = parse_priors("\"A\" = { mu = 1250, k = 116 }\n\"X/Blue\" = { mu = 1000, sigma = 0 }\n")
            .unwrap();
        assert!(p[&Identity::parse("X/Blue").unwrap()].is_frozen());
        assert!((p[&Identity::parse("A").unwrap()].k - 116.0).abs() < 1e-9);
        assert!(parse_priors("A = { mu = 1, sigma = 2, k = 3 }").is_err());
        assert!(matches!(parse_priors("A = ["), Err(Error::Parse { .. })));
    }
}
