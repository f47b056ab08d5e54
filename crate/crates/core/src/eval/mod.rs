//! Cross-validated evaluation of rankings with a 1-nearest-neighbor
//! regressor on the top-ranked features, plus the clustering-hypothesis check
//! and rank-based comparison of methods.

mod cluster;
mod compare;

pub use cluster::{adjusted_rand_index, clustering_hypothesis_ari, kmeans, AriReport, KMeansResult};
pub use compare::{
    average_ranks, compare_methods, friedman, nemenyi_critical_distance, studentized_range_quantile,
    ComparisonReport,
};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, FeatureTable};
use crate::error::{Error, Result};
use crate::method::RankingMethod;
use crate::ranking::{csv_field, Ranking};
use crate::rng::{derive_seed, stream, TAG_FOLDS};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_TOP_K: usize = 16;

/// Seeded, non-stratified assignment of rows to folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: usize,
    pub seed: u64,
    /// Fold of each row.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn new(m: usize, folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 folds, got {folds}"
            )));
        }
        if folds > m {
            return Err(Error::InvalidConfig(format!(
                "{folds} folds for only {m} examples"
            )));
        }
        let mut rows: Vec<usize> = (0..m).collect();
        rows.shuffle(&mut stream(seed, &[TAG_FOLDS]));
        let mut assignment = vec![0; m];
        for (pos, &r) in rows.iter().enumerate() {
            assignment[r] = pos % folds;
        }
        Ok(FoldPlan {
            folds,
            seed,
            assignment,
        })
    }

    /// `(train, test)` row indices of fold `f`, each ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignment.len()).partition(|&r| self.assignment[r] != f)
    }
}

/// Target of the training row nearest to `test_row` under the unweighted
/// Euclidean distance over `selected` attributes (nominal attributes add 1
/// per mismatch). Ties go to the lowest training row.
pub fn knn_predict(
    train: &FeatureTable,
    train_target: &[f64],
    test_row: &[f64],
    selected: &[usize],
) -> Result<f64> {
    if train.m() == 0 || train_target.is_empty() {
        return Err(Error::EmptyRows);
    }
    if selected.is_empty() {
        return Err(Error::InvalidConfig("no attributes selected".into()));
    }
    let mut attrs = selected.to_vec();
    attrs.sort_unstable();
    let nominal: Vec<bool> = attrs
        .iter()
        .map(|&i| matches!(train.attribute(i).kind, AttributeKind::Nominal(_)))
        .collect();
    let mut best = f64::INFINITY;
    let mut best_row = 0;
    for r in 0..train.m() {
        let mut d = 0.0;
        for (&i, &nom) in attrs.iter().zip(&nominal) {
            let diff = train.value(r, i) - test_row[i];
            d += if nom {
                f64::from(u8::from(diff != 0.0))
            } else {
                diff * diff
            };
        }
        if d < best {
            best = d;
            best_row = r;
        }
    }
    Ok(train_target[best_row])
}

/// Powers of two up to `n`, then `n` itself if it is not one.
pub fn k_grid(n: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 1;
    while k <= n {
        ks.push(k);
        k *= 2;
    }
    if ks.last() != Some(&n) && n > 0 {
        ks.push(n);
    }
    ks
}

/// Ranking learned on the training part of fold `fold`. The ranking sees
/// only the training rows' features.
pub fn fold_ranking(
    dataset: &Dataset,
    method: &RankingMethod,
    plan: &FoldPlan,
    fold: usize,
) -> Result<Ranking> {
    let (train_rows, _) = plan.split(fold);
    let train = dataset.features().subset(&train_rows)?;
    fold_method(method, fold).rank(&train, dataset.name())
}

fn fold_method(method: &RankingMethod, fold: usize) -> RankingMethod {
    method.with_seed(derive_seed(method.seed(), &[TAG_FOLDS, fold as u64]))
}

fn fold_mse(
    dataset: &Dataset,
    train: &FeatureTable,
    train_target: &[f64],
    test_rows: &[usize],
    selected: &[usize],
) -> Result<f64> {
    let target = require_target(dataset)?;
    let mut sse = 0.0;
    for &r in test_rows {
        let pred = knn_predict(train, train_target, &dataset.features().row(r), selected)?;
        sse += (pred - target[r]).powi(2);
    }
    Ok(sse / test_rows.len() as f64)
}

fn require_target(dataset: &Dataset) -> Result<&[f64]> {
    dataset.target().ok_or_else(|| {
        Error::InvalidData(format!("dataset '{}' has no target column", dataset.name()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub method: String,
    pub label: String,
    pub dataset: String,
    pub top_k: usize,
    pub per_fold: Vec<f64>,
    pub mean: f64,
}

/// Mean over folds of the test MSE of a 1NN regressor restricted to the
/// `k_features` attributes ranked highest on the training part.
pub fn cv_mse(
    dataset: &Dataset,
    method: &RankingMethod,
    k_features: usize,
    plan: &FoldPlan,
) -> Result<CvResult> {
    let curve = curve_over(dataset, method, plan, &[k_features])?;
    Ok(CvResult {
        method: curve.method,
        label: curve.label,
        dataset: curve.dataset,
        top_k: k_features,
        per_fold: curve.per_fold.iter().map(|f| f[0]).collect(),
        mean: curve.mean[0],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub method: String,
    pub label: String,
    pub dataset: String,
    pub k_values: Vec<usize>,
    /// `per_fold[f][j]`: MSE of fold `f` using the top `k_values[j]` features.
    pub per_fold: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl CurveReport {
    /// Plot-ready `k,mean_mse` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mean_mse\n");
        for (k, m) in self.k_values.iter().zip(&self.mean) {
            out.push_str(&format!("{k},{m}\n"));
        }
        out
    }
}

/// Error curve over [`k_grid`]. Each fold's ranking is computed once and
/// reused for every `k`.
pub fn error_curve(
    dataset: &Dataset,
    method: &RankingMethod,
    plan: &FoldPlan,
) -> Result<CurveReport> {
    curve_over(dataset, method, plan, &k_grid(dataset.n()))
}

fn curve_over(
    dataset: &Dataset,
    method: &RankingMethod,
    plan: &FoldPlan,
    ks: &[usize],
) -> Result<CurveReport> {
    let target = require_target(dataset)?;
    if plan.assignment.len() != dataset.m() {
        return Err(Error::InvalidConfig(format!(
            "fold plan covers {} rows, dataset has {}",
            plan.assignment.len(),
            dataset.m()
        )));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > dataset.n()) {
        return Err(Error::InvalidConfig(format!(
            "top-k of {k} is outside 1..={}",
            dataset.n()
        )));
    }
    let per_fold: Vec<Vec<f64>> = (0..plan.folds)
        .into_par_iter()
        .map(|f| {
            let (train_rows, test_rows) = plan.split(f);
            let train = dataset.features().subset(&train_rows)?;
            let train_target: Vec<f64> = train_rows.iter().map(|&r| target[r]).collect();
            let ranking = fold_method(method, f).rank(&train, dataset.name())?;
            ks.iter()
                .map(|&k| fold_mse(dataset, &train, &train_target, &test_rows, ranking.top(k)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let folds = per_fold.len() as f64;
    let mean = (0..ks.len())
        .map(|j| per_fold.iter().map(|f| f[j]).sum::<f64>() / folds)
        .collect();
    Ok(CurveReport {
        method: method.name().to_owned(),
        label: method.label(),
        dataset: dataset.name().to_owned(),
        k_values: ks.to_vec(),
        per_fold,
        mean,
    })
}

/// Table of several curves on one dataset: `k,<label>,...`.
pub fn curves_to_csv(curves: &[CurveReport]) -> Result<String> {
    let Some(first) = curves.first() else {
        return Ok(String::new());
    };
    if curves.iter().any(|c| c.k_values != first.k_values) {
        return Err(Error::InvalidData("curves use different k grids".into()));
    }
    let mut out = String::from("k");
    for c in curves {
        out.push(',');
        out.push_str(&csv_field(&c.label));
    }
    out.push('\n');
    for (j, k) in first.k_values.iter().enumerate() {
        out.push_str(&k.to_string());
        for c in curves {
            out.push_str(&format!(",{}", c.mean[j]));
        }
        out.push('\n');
    }
    Ok(out)
}
