//! Game specification files and small file helpers shared by the CLI.
//!
//! Exact quantities are written as `"p/q"` strings everywhere, so every
//! artifact round-trips without loss.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::game::{default_dev_sequence, GameConfig, DEFAULT_SAMPLES};
use crate::moments::MomentMatrix;
use crate::predicate::Predicate;
use crate::rational::{fmt_q, parse_q, Q};
use crate::{Error, Result};

/// Where the hardness player's points come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DevSource {
    /// Noise-shifted moments of dyadic distributions on `f^{-1}(1)`,
    /// level `p` giving `R_p`.
    Dyadic,
    /// Explicit points, already shifted; the `p` grid is ignored.
    Explicit(Vec<MomentMatrix>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    pub f: Predicate,
    pub delta: Q,
    pub d: usize,
    pub samples: usize,
    pub seed: u64,
    pub guard: bool,
    pub dev: DevSource,
    pub p_grid: Vec<u32>,
    pub q_grid: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    predicate: serde_json::Value,
    #[serde(default = "default_delta")]
    delta: String,
    #[serde(default)]
    d: Option<usize>,
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_guard")]
    guard: bool,
    #[serde(default)]
    dev_points: Option<Vec<Vec<Vec<String>>>>,
    #[serde(default = "default_grid")]
    p_grid: Vec<u32>,
    #[serde(default = "default_grid")]
    q_grid: Vec<u32>,
}

fn default_delta() -> String {
    "1/4".into()
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_guard() -> bool {
    true
}

fn default_grid() -> Vec<u32> {
    vec![0]
}

impl GameSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let f = Predicate::from_value(&file.predicate)?;
        let dev = match &file.dev_points {
            Some(points) => DevSource::Explicit(points.iter().map(|rows| MomentMatrix::from_strings(rows)).collect::<Result<_>>()?),
            None => DevSource::Dyadic,
        };
        if file.p_grid.is_empty() || file.q_grid.is_empty() {
            return Err(Error::Parse("empty p or q grid".into()));
        }
        Ok(Self {
            d: file.d.unwrap_or(f.k() + 1),
            f,
            delta: parse_q(&file.delta)?,
            samples: file.samples,
            seed: file.seed,
            guard: file.guard,
            dev,
            p_grid: file.p_grid,
            q_grid: file.q_grid,
        })
    }

    pub fn to_json(&self) -> String {
        let file = GameFile {
            predicate: self.f.to_value(),
            delta: fmt_q(&self.delta),
            d: Some(self.d),
            samples: self.samples,
            seed: self.seed,
            guard: self.guard,
            dev_points: match &self.dev {
                DevSource::Dyadic => None,
                DevSource::Explicit(points) => Some(points.iter().map(MomentMatrix::to_strings).collect()),
            },
            p_grid: self.p_grid.clone(),
            q_grid: self.q_grid.clone(),
        };
        serde_json::to_string_pretty(&file).expect("game spec serializes")
    }

    /// Nested point sets, one per entry of the `p` grid (sorted ascending).
    pub fn dev_sets(&self) -> Result<Vec<Vec<MomentMatrix>>> {
        match &self.dev {
            DevSource::Explicit(points) => Ok(vec![points.clone()]),
            DevSource::Dyadic => {
                let top = *self.p_grid.iter().max().expect("grid is non-empty");
                let seq = default_dev_sequence(&self.f, &self.delta, top)?;
                let mut ps = self.p_grid.clone();
                ps.sort_unstable();
                ps.dedup();
                Ok(ps.iter().map(|&p| seq[p as usize].clone()).collect())
            }
        }
    }

    /// Game configuration for one point set at refinement `q`.
    pub fn config(&self, dev_points: Vec<MomentMatrix>, q: u32) -> GameConfig {
        GameConfig {
            f: self.f.clone(),
            delta: self.delta.clone(),
            d: self.d,
            q,
            dev_points,
            samples: self.samples,
            seed: self.seed,
            guard: self.guard,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Tab-separated table with a header row.
pub fn tsv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let text = r#"{"predicate": {"k": 2, "satisfying": ["++", "--"]}, "q_grid": [0, 1]}"#;
        let spec = GameSpec::parse(text).unwrap();
        assert_eq!(spec.f, Predicate::two_lin());
        assert_eq!(spec.d, 3);
        assert_eq!(spec.delta, crate::rational::q(1, 4));
        assert_eq!(spec.dev, DevSource::Dyadic);
        assert_eq!(GameSpec::parse(&spec.to_json()).unwrap(), spec);
        let sets = spec.dev_sets().unwrap();
        assert_eq!(sets.len(), 1);
        assert!(!sets[0].is_empty());
    }

    #[test]
    fn explicit_points_round_trip() {
        let f = Predicate::two_lin();
        let z = crate::game::shifted_uniform(&f, &[0, 3], &crate::rational::q(1, 4)).unwrap();
        let spec = GameSpec {
            f,
            delta: crate::rational::q(1, 4),
            d: 2,
            samples: 10,
            seed: 3,
            guard: false,
            dev: DevSource::Explicit(vec![z]),
            p_grid: vec![0],
            q_grid: vec![0],
        };
        assert_eq!(GameSpec::parse(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn tsv_layout() {
        assert_eq!(tsv(&["a", "b"], &[vec!["1".into(), "2".into()]]), "a\tb\n1\t2\n");
    }
}
