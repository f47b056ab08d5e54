//! Feature importances read off a tree ensemble.

use rayon::prelude::*;

use crate::dataset::FeatureTable;
use crate::ensemble::{oob_error, Ensemble};
use crate::error::{Error, Result};

/// Genie3: per attribute, the sum of `h*` over internal nodes testing it,
/// averaged over trees.
pub fn genie3(ensemble: &Ensemble) -> Vec<f64> {
    node_sums(ensemble, |h_star, _| h_star)
}

/// Symbolic: like Genie3 but each test occurrence weighs the number of
/// (bootstrap) examples reaching the node.
pub fn symbolic(ensemble: &Ensemble) -> Vec<f64> {
    node_sums(ensemble, |_, n_reached| n_reached as f64)
}

fn node_sums(ensemble: &Ensemble, weight: impl Fn(f64, usize) -> f64) -> Vec<f64> {
    let n = ensemble.n_attributes();
    let mut totals = vec![0.0; n];
    for tree in ensemble.trees() {
        let mut per_tree = vec![0.0; n];
        for (test, h_star, n_reached) in tree.internal_nodes() {
            per_tree[test.attribute()] += weight(h_star, n_reached);
        }
        for (t, p) in totals.iter_mut().zip(per_tree) {
            *t += p;
        }
    }
    let count = ensemble.trees().len() as f64;
    totals.iter().map(|t| t / count).collect()
}

/// Permutation score: mean over trees of the relative increase of the OOB
/// reconstruction error when one attribute is shuffled within the OOB set.
///
/// Trees whose OOB set is empty or reconstructed without error are skipped
/// and the mean runs over the remaining trees.
pub fn random_forest_score(ensemble: &Ensemble, table: &FeatureTable) -> Result<Vec<f64>> {
    let n = ensemble.n_attributes();
    if table.n() != n {
        return Err(Error::InvalidData(format!(
            "ensemble has {n} attributes, table has {}",
            table.n()
        )));
    }
    let per_tree: Vec<Option<Vec<f64>>> = (0..ensemble.trees().len())
        .into_par_iter()
        .map(|t| -> Result<Option<Vec<f64>>> {
            let oob = &ensemble.bags()[t].oob;
            if oob.is_empty() {
                return Ok(None);
            }
            let base = oob_error(ensemble, table, t, oob, None)?;
            if base <= 0.0 {
                return Ok(None);
            }
            (0..n)
                .map(|i| {
                    let seed = ensemble.permutation_seed(t, i);
                    let permuted = oob_error(ensemble, table, t, oob, Some((i, seed)))?;
                    Ok((permuted - base) / base)
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some)
        })
        .collect::<Result<_>>()?;

    let mut totals = vec![0.0; n];
    let mut used = 0usize;
    for increases in per_tree.into_iter().flatten() {
        used += 1;
        for (t, v) in totals.iter_mut().zip(increases) {
            *t += v;
        }
    }
    if used == 0 {
        return Err(Error::ScoreUndefined(
            "every tree has an empty out-of-bag set or zero out-of-bag error".into(),
        ));
    }
    Ok(totals.iter().map(|t| t / used as f64).collect())
}
