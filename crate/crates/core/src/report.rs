//! Reference table of official shared-task BLEU scores, loaded from a TSV
//! fixture (`team<TAB>direction<TAB>score`, one header row).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::render_columns;

/// The fixture shipped with this crate.
pub const DEFAULT_FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/official_bleu.tsv");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("fixture {path}: {reason}")]
    Fixture { path: PathBuf, reason: String },
    #[error("no scores for direction {0:?}")]
    UnknownDirection(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub team: String,
    pub direction: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OfficialScores {
    pub entries: Vec<ScoreEntry>,
}

pub fn load_official_scores(path: &Path) -> Result<OfficialScores, ReportError> {
    let fixture_err = |reason: String| ReportError::Fixture {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| fixture_err(e.to_string()))?;
    OfficialScores::parse(&text).map_err(fixture_err)
}

impl OfficialScores {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("team\tdirection\tscore") {
            return Err("missing header row".into());
        }
        let mut entries = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [team, direction, score] = cols[..] else {
                return Err(format!("line {}: expected three columns", i + 2));
            };
            let score: f64 = score
                .trim()
                .parse()
                .ok()
                .filter(|s: &f64| (0.0..=100.0).contains(s))
                .ok_or_else(|| format!("line {}: bad score {score:?}", i + 2))?;
            entries.push(ScoreEntry {
                team: team.trim().to_string(),
                direction: direction.trim().to_uppercase(),
                score,
            });
        }
        if entries.is_empty() {
            return Err("no rows".into());
        }
        Ok(OfficialScores { entries })
    }

    /// Teams in fixture order.
    pub fn teams(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.team.as_str()) {
                out.push(&e.team);
            }
        }
        out
    }

    /// Directions in fixture order.
    pub fn directions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.direction.as_str()) {
                out.push(&e.direction);
            }
        }
        out
    }

    pub fn score(&self, team: &str, direction: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.team == team && e.direction == direction)
            .map(|e| e.score)
    }

    pub fn best(&self, direction: &str) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.score)
            .max_by(f64::total_cmp)
    }

    /// Team × direction table; the best score per direction carries a `*`.
    /// With `direction` set, only that column is shown.
    pub fn render(&self, direction: Option<&str>) -> Result<String, ReportError> {
        let directions: Vec<String> = match direction {
            Some(d) => {
                let d = d.trim().to_uppercase();
                if self.best(&d).is_none() {
                    return Err(ReportError::UnknownDirection(d));
                }
                vec![d]
            }
            None => self.directions().into_iter().map(str::to_string).collect(),
        };
        let mut grid = vec![std::iter::once("team".to_string())
            .chain(directions.iter().cloned())
            .collect::<Vec<_>>()];
        for team in self.teams() {
            let cells: Vec<String> = directions
                .iter()
                .map(|d| match self.score(team, d) {
                    None => "- ".to_string(),
                    Some(s) if Some(s) == self.best(d) => format!("{s:.2}*"),
                    Some(s) => format!("{s:.2} "),
                })
                .collect();
            if direction.is_some() && cells.iter().all(|c| c == "- ") {
                continue;
            }
            grid.push(std::iter::once(team.to_string()).chain(cells).collect());
        }
        Ok(render_columns(&grid))
    }
}
