use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a ranking came from: enough to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Per-feature importances and the induced order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub method: String,
    pub attributes: Vec<String>,
    pub importance: Vec<f64>,
    /// Attribute indices sorted by descending importance; ties go to the
    /// lower index.
    pub order: Vec<usize>,
    pub provenance: Provenance,
}

impl Ranking {
    pub fn new(
        method: impl Into<String>,
        attributes: Vec<String>,
        importance: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if attributes.len() != importance.len() {
            return Err(Error::Computation(format!(
                "{} attribute names for {} importances",
                attributes.len(),
                importance.len()
            )));
        }
        if let Some(i) = importance.iter().position(|v| !v.is_finite()) {
            return Err(Error::Computation(format!(
                "importance of '{}' is not finite",
                attributes[i]
            )));
        }
        let order = descending_order(&importance);
        Ok(Ranking {
            method: method.into(),
            attributes,
            importance,
            order,
            provenance,
        })
    }

    /// The `k` highest-ranked attribute indices.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    /// `rank,attribute,importance` rows, rank 1 first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,attribute,importance\n");
        for (pos, &i) in self.order.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                pos + 1,
                csv_field(&self.attributes[i]),
                self.importance[i]
            ));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Stable descending order with index tie-break.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}
