//! Uniform entry point over the four ranking procedures.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureTable;
use crate::ensemble::{self, EnsembleConfig};
use crate::error::Result;
use crate::ranking::{Provenance, Ranking};
use crate::scores;
use crate::urelief::{self, UReliefConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "config", rename_all = "snake_case")]
pub enum RankingMethod {
    Genie3(EnsembleConfig),
    Symbolic(EnsembleConfig),
    RfScore(EnsembleConfig),
    Urelief(UReliefConfig),
}

impl RankingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RankingMethod::Genie3(_) => "genie3",
            RankingMethod::Symbolic(_) => "symbolic",
            RankingMethod::RfScore(_) => "rf-score",
            RankingMethod::Urelief(_) => "urelief",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RankingMethod::Genie3(c) | RankingMethod::Symbolic(c) | RankingMethod::RfScore(c) => {
                c.seed
            }
            RankingMethod::Urelief(c) => c.seed,
        }
    }

    /// Same method and parameters with a different seed.
    pub fn with_seed(&self, seed: u64) -> RankingMethod {
        match *self {
            RankingMethod::Genie3(c) => RankingMethod::Genie3(EnsembleConfig { seed, ..c }),
            RankingMethod::Symbolic(c) => RankingMethod::Symbolic(EnsembleConfig { seed, ..c }),
            RankingMethod::RfScore(c) => RankingMethod::RfScore(EnsembleConfig { seed, ..c }),
            RankingMethod::Urelief(c) => RankingMethod::Urelief(UReliefConfig { seed, ..c }),
        }
    }

    /// Short human-readable label including the parameters that matter.
    pub fn label(&self) -> String {
        match self {
            RankingMethod::Genie3(c) | RankingMethod::Symbolic(c) | RankingMethod::RfScore(c) => {
                format!(
                    "{}/{}/{}/T={}",
                    self.name(),
                    c.method.as_str(),
                    c.subset_rule.as_str(),
                    c.trees
                )
            }
            RankingMethod::Urelief(c) => {
                let k = c.neighbors.map_or_else(|| "30".to_owned(), |k| k.to_string());
                let i = match c.iterations {
                    urelief::Iterations::All => "m".to_owned(),
                    urelief::Iterations::Fraction(f) => format!("{f}m"),
                    urelief::Iterations::Count(n) => n.to_string(),
                };
                format!("urelief/K={k}/I={i}")
            }
        }
    }

    /// Importances of every attribute of `table`. Only the features are
    /// visible here; targets never reach a ranking procedure.
    pub fn importances(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        match self {
            RankingMethod::Genie3(c) => Ok(scores::genie3(&ensemble::build(table, c)?)),
            RankingMethod::Symbolic(c) => Ok(scores::symbolic(&ensemble::build(table, c)?)),
            RankingMethod::RfScore(c) => {
                scores::random_forest_score(&ensemble::build(table, c)?, table)
            }
            RankingMethod::Urelief(c) => urelief::urelief_on(table, c),
        }
    }

    pub fn rank(&self, table: &FeatureTable, dataset: &str) -> Result<Ranking> {
        let importance = self.importances(table)?;
        Ranking::new(
            self.name(),
            table.names(),
            importance,
            Provenance {
                dataset: dataset.to_owned(),
                seed: self.seed(),
                config: serde_json::to_value(self)?,
            },
        )
    }
}
