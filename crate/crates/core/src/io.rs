//! JSON file formats.
//!
//! Distribution files use either the full table
//! `{"nx", "ny", "na", "nb", "p": [x][y][a][b]}` or, for binary outcomes,
//! the correlation form `{"C": [x][y], "MA": [x], "MB": [y]}` (marginals
//! default to zero). A file carrying both forms is rejected.

use serde::{Deserialize, Serialize};

use crate::correlation::{from_correlation_rep, CorrelationRep};
use crate::dist::{Alphabets, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::games::XorGame;
use crate::simulate::DEFAULT_REPLAYS;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DistributionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub na: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "MA", default, skip_serializing_if = "Option::is_none")]
    pub ma: Option<Vec<f64>>,
    #[serde(rename = "MB", default, skip_serializing_if = "Option::is_none")]
    pub mb: Option<Vec<f64>>,
}

/// What a distribution file decoded to. The correlation form keeps its
/// representation so callers needing `C` do not recompute it.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionInput {
    Table(ConditionalDistribution),
    Correlation { rep: CorrelationRep, dist: ConditionalDistribution },
}

impl DistributionInput {
    pub fn distribution(&self) -> &ConditionalDistribution {
        match self {
            DistributionInput::Table(d) => d,
            DistributionInput::Correlation { dist, .. } => dist,
        }
    }

    pub fn into_distribution(self) -> ConditionalDistribution {
        match self {
            DistributionInput::Table(d) => d,
            DistributionInput::Correlation { dist, .. } => dist,
        }
    }
}

impl DistributionFile {
    pub fn decode(self) -> Result<DistributionInput> {
        let has_table = self.p.is_some();
        let has_corr = self.c.is_some() || self.ma.is_some() || self.mb.is_some();
        match (has_table, has_corr) {
            (true, true) => Err(Error::InvalidInput(
                "distribution file carries both \"p\" and \"C\"/\"MA\"/\"MB\"; use one form".into(),
            )),
            (false, false) => Err(Error::InvalidInput("distribution file needs \"p\" or \"C\"".into())),
            (true, false) => {
                let field = |v: Option<usize>, name: &str| {
                    v.ok_or_else(|| Error::InvalidInput(format!("table form needs integer field \"{name}\"")))
                };
                let s = Alphabets::new(
                    field(self.nx, "nx")?,
                    field(self.ny, "ny")?,
                    field(self.na, "na")?,
                    field(self.nb, "nb")?,
                )?;
                Ok(DistributionInput::Table(ConditionalDistribution::from_nested(s, self.p.as_deref().unwrap())?))
            }
            (false, true) => {
                let c = self.c.ok_or_else(|| Error::InvalidInput("correlation form needs \"C\"".into()))?;
                let nx = c.len();
                let ny = c.first().map_or(0, Vec::len);
                let ma = self.ma.unwrap_or_else(|| vec![0.0; nx]);
                let mb = self.mb.unwrap_or_else(|| vec![0.0; ny]);
                let rep = CorrelationRep::new(c, ma, mb)?;
                let dist = from_correlation_rep(&rep)?;
                Ok(DistributionInput::Correlation { rep, dist })
            }
        }
    }

    pub fn from_distribution(p: &ConditionalDistribution) -> Self {
        let s = p.alphabets();
        Self {
            nx: Some(s.nx),
            ny: Some(s.ny),
            na: Some(s.na),
            nb: Some(s.nb),
            p: Some(p.to_nested()),
            ..Self::default()
        }
    }
}

pub fn parse_distribution(text: &str) -> Result<DistributionInput> {
    serde_json::from_str::<DistributionFile>(text)?.decode()
}

pub fn distribution_to_json(p: &ConditionalDistribution) -> Result<String> {
    Ok(serde_json::to_string(&DistributionFile::from_distribution(p))?)
}

/// Parses `{"G": [x][y] of +-1, "mu": [x][y]}` and checks it.
pub fn parse_game(text: &str) -> Result<XorGame> {
    let game: XorGame = serde_json::from_str(text)?;
    game.check()?;
    Ok(game)
}

/// Simulation settings. `input` names the distribution file whose optimal
/// affine model is simulated; `trials` and `pool` override the planned
/// `T` and `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default)]
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replays")]
    pub replays: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<u64>,
}

fn default_replays() -> usize {
    DEFAULT_REPLAYS
}

pub fn parse_simulation_config(text: &str) -> Result<SimulationConfig> {
    let cfg: SimulationConfig = serde_json::from_str(text)?;
    if !(0.0..0.5).contains(&cfg.epsilon) || !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::InvalidInput("config needs epsilon in [0, 0.5) and delta in (0, 1)".into()));
    }
    if cfg.replays == 0 || cfg.trials == Some(0) || cfg.pool == Some(0) {
        return Err(Error::InvalidInput("replays, trials and pool must be positive".into()));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_form_round_trips() {
        let pr = ConditionalDistribution::pr_box();
        let text = distribution_to_json(&pr).unwrap();
        assert_eq!(parse_distribution(&text).unwrap(), DistributionInput::Table(pr));
    }

    #[test]
    fn correlation_form() {
        let input = parse_distribution(r#"{"C": [[1, 1], [1, -1]], "MA": [0, 0], "MB": [0, 0]}"#).unwrap();
        assert_eq!(input.distribution(), &ConditionalDistribution::pr_box());
        let short = parse_distribution(r#"{"C": [[1, 1], [1, -1]]}"#).unwrap();
        assert_eq!(short.distribution(), input.distribution());
    }

    #[test]
    fn rejects_both_forms_and_neither() {
        let both = r#"{"nx":1,"ny":1,"na":1,"nb":1,"p":[[[[1]]]],"C":[[1]]}"#;
        assert!(matches!(parse_distribution(both), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_distribution("{}"), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_distribution(r#"{"nx":1,"p":[[[[1]]]]}"#), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_distribution("[1"), Err(Error::Json(_))));
    }

    #[test]
    fn shape_mismatch() {
        let bad = r#"{"nx":1,"ny":1,"na":2,"nb":1,"p":[[[[1]]]]}"#;
        assert!(matches!(parse_distribution(bad), Err(Error::Shape(_))));
    }

    #[test]
    fn games_and_configs() {
        let g = parse_game(r#"{"G": [[1, 1], [1, -1]], "mu": [[0.25, 0.25], [0.25, 0.25]]}"#).unwrap();
        assert_eq!(g, XorGame::chsh());
        assert!(parse_game(r#"{"G": [[1, 0.5]], "mu": [[0.5, 0.5]]}"#).is_err());

        let cfg = parse_simulation_config(r#"{"delta": 0.1, "seed": 4}"#).unwrap();
        assert_eq!((cfg.epsilon, cfg.seed, cfg.replays, cfg.trials), (0.0, 4, DEFAULT_REPLAYS, None));
        assert!(parse_simulation_config(r#"{"delta": 0.0}"#).is_err());
        assert!(parse_simulation_config(r#"{"delta": 0.1, "bogus": 1}"#).is_err());
    }
}
