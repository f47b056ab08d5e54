//! URelief: neighbor-based unsupervised Relief.
//!
//! For a reference example and each of its `K` nearest neighbors, the
//! per-attribute distance `d_i` stands in for "the attribute differs" and the
//! mean distance `d_X` for "the examples differ". Accumulated over `I`
//! references, these estimate `P(diff attr)`, `P(diff examples)` and their
//! joint (as the product `d_i · d_X`); the weight of attribute `i` is
//! `P(diff attr | diff examples) − P(diff attr | same examples)`.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{compute_stats, AttributeKind, AttributeStats, FeatureTable};
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_RELIEF};

pub const DEFAULT_NEIGHBORS: usize = 30;

/// Clamp applied to `P(diff examples)` before the final division.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Reference rows handled by one accumulation chunk. Fixed so partial sums,
/// and therefore the result, do not depend on the worker count.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Iterations {
    /// `I = m`.
    All,
    /// `I = round(fraction · m)`, at least 1.
    Fraction(f64),
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UReliefConfig {
    /// `K`. When absent, `min(30, m − 1)`.
    pub neighbors: Option<usize>,
    pub iterations: Iterations,
    pub seed: u64,
}

impl Default for UReliefConfig {
    fn default() -> Self {
        UReliefConfig {
            neighbors: None,
            iterations: Iterations::All,
            seed: 0,
        }
    }
}

impl UReliefConfig {
    /// `(K, I)` for a training set of `m` examples.
    pub fn resolve(&self, m: usize) -> Result<(usize, usize)> {
        if m < 2 {
            return Err(Error::InvalidData(format!(
                "URelief needs at least 2 examples, got {m}"
            )));
        }
        let k = match self.neighbors {
            None => DEFAULT_NEIGHBORS.min(m - 1),
            Some(0) => return Err(Error::InvalidConfig("neighbor count must be at least 1".into())),
            Some(k) if k >= m => {
                return Err(Error::InvalidConfig(format!(
                    "{k} neighbors requested but only {m} examples (need m > K)"
                )))
            }
            Some(k) => k,
        };
        let i = match self.iterations {
            Iterations::All => m,
            Iterations::Fraction(f) if f > 0.0 && f.is_finite() => {
                ((f * m as f64).round() as usize).max(1)
            }
            Iterations::Fraction(f) => {
                return Err(Error::InvalidConfig(format!(
                    "iteration fraction must be positive, got {f}"
                )))
            }
            Iterations::Count(0) => {
                return Err(Error::InvalidConfig("iteration count must be at least 1".into()))
            }
            Iterations::Count(c) => c,
        };
        Ok((k, i))
    }
}

/// Distance of attribute `i` between rows `a` and `b`, in `[0, 1]`.
pub fn attr_distance(table: &FeatureTable, stats: &AttributeStats, i: usize, a: usize, b: usize) -> f64 {
    let (x, y) = (table.value(a, i), table.value(b, i));
    match &table.attribute(i).kind {
        AttributeKind::Nominal(_) => f64::from(u8::from(x != y)),
        AttributeKind::Numeric => match stats.get(i).range() {
            Some(range) if range > 0.0 => ((x - y).abs() / range).min(1.0),
            _ => 0.0,
        },
    }
}

/// Mean of [`attr_distance`] over all attributes.
pub fn example_distance(table: &FeatureTable, stats: &AttributeStats, a: usize, b: usize) -> f64 {
    let n = table.n();
    (0..n).map(|i| attr_distance(table, stats, i, a, b)).sum::<f64>() / n as f64
}

/// Columns rescaled so that `|u − v|` (numeric) or `u != v` (nominal) is the
/// attribute distance directly.
struct ScaledColumns {
    columns: Vec<Vec<f64>>,
    nominal: Vec<bool>,
}

impl ScaledColumns {
    fn new(table: &FeatureTable, stats: &AttributeStats) -> Self {
        let mut columns = Vec::with_capacity(table.n());
        let mut nominal = Vec::with_capacity(table.n());
        for i in 0..table.n() {
            let col = table.column(i);
            match &table.attribute(i).kind {
                AttributeKind::Nominal(_) => {
                    nominal.push(true);
                    columns.push(col.to_vec());
                }
                AttributeKind::Numeric => {
                    nominal.push(false);
                    match stats.get(i).range() {
                        Some(range) if range > 0.0 => {
                            columns.push(col.iter().map(|v| v / range).collect())
                        }
                        _ => columns.push(vec![0.0; col.len()]),
                    }
                }
            }
        }
        ScaledColumns { columns, nominal }
    }

    #[inline]
    fn distance(&self, i: usize, a: usize, b: usize) -> f64 {
        let col = &self.columns[i];
        if self.nominal[i] {
            f64::from(u8::from(col[a] != col[b]))
        } else {
            (col[a] - col[b]).abs().min(1.0)
        }
    }

    /// `d_X(reference, j)` for every row `j`, in one pass per attribute.
    fn distances_from(&self, reference: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|d| *d = 0.0);
        for (col, &nominal) in self.columns.iter().zip(&self.nominal) {
            let r = col[reference];
            if nominal {
                for (d, &v) in out.iter_mut().zip(col) {
                    *d += f64::from(u8::from(v != r));
                }
            } else {
                for (d, &v) in out.iter_mut().zip(col) {
                    *d += (v - r).abs().min(1.0);
                }
            }
        }
        let n = self.columns.len() as f64;
        out.iter_mut().for_each(|d| *d /= n);
    }
}

/// Probability estimates accumulated by the algorithm, already normalized by
/// `I·K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UReliefState {
    pub p_diff_attr: Vec<f64>,
    pub p_diff_attr_diff_clus: Vec<f64>,
    pub p_diff_clus: f64,
}

impl UReliefState {
    fn zeros(n: usize) -> Self {
        UReliefState {
            p_diff_attr: vec![0.0; n],
            p_diff_attr_diff_clus: vec![0.0; n],
            p_diff_clus: 0.0,
        }
    }

    fn merge(&mut self, other: &UReliefState) {
        self.p_diff_clus += other.p_diff_clus;
        for (a, b) in self.p_diff_attr.iter_mut().zip(&other.p_diff_attr) {
            *a += b;
        }
        for (a, b) in self
            .p_diff_attr_diff_clus
            .iter_mut()
            .zip(&other.p_diff_attr_diff_clus)
        {
            *a += b;
        }
    }

    /// Final weights. Zero when no neighbor pair differed at all.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.p_diff_attr.len();
        if self.p_diff_clus <= 0.0 {
            return vec![0.0; n];
        }
        let p = self
            .p_diff_clus
            .clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR);
        (0..n)
            .map(|i| {
                let joint = self.p_diff_attr_diff_clus[i];
                joint / p - (self.p_diff_attr[i] - joint) / (1.0 - p)
            })
            .collect()
    }
}

/// Reference rows visited: a seeded permutation prefix when `I <= m`,
/// draws with replacement otherwise.
fn reference_rows(m: usize, iterations: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed, &[TAG_RELIEF]);
    if iterations <= m {
        let mut rows: Vec<usize> = (0..m).collect();
        rows.shuffle(&mut rng);
        rows.truncate(iterations);
        rows
    } else {
        (0..iterations).map(|_| rng.gen_range(0..m)).collect()
    }
}

/// The `k` rows nearest to `reference` (excluding it), ties by row index.
fn nearest(distances: &[f64], reference: usize, k: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..distances.len()).filter(|&j| j != reference).collect();
    let cmp = |a: &usize, b: &usize| distances[*a].total_cmp(&distances[*b]).then(a.cmp(b));
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, cmp);
        candidates.truncate(k);
    }
    candidates.sort_by(cmp);
    candidates
}

/// Runs the accumulation and returns the normalized probability estimates.
pub fn urelief_state(
    table: &FeatureTable,
    cfg: &UReliefConfig,
    stats: &AttributeStats,
) -> Result<UReliefState> {
    let m = table.m();
    let n = table.n();
    let (k, iterations) = cfg.resolve(m)?;
    let scaled = ScaledColumns::new(table, stats);
    let references = reference_rows(m, iterations, cfg.seed);

    let partials: Vec<UReliefState> = references
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = UReliefState::zeros(n);
            let mut dist = vec![0.0; m];
            for &r in chunk {
                scaled.distances_from(r, &mut dist);
                for j in nearest(&dist, r, k) {
                    let dx = dist[j];
                    acc.p_diff_clus += dx;
                    for i in 0..n {
                        let di = scaled.distance(i, r, j);
                        acc.p_diff_attr[i] += di;
                        acc.p_diff_attr_diff_clus[i] += di * dx;
                    }
                }
            }
            acc
        })
        .collect();

    let mut state = UReliefState::zeros(n);
    for p in &partials {
        state.merge(p);
    }
    let norm = (iterations * k) as f64;
    state.p_diff_clus /= norm;
    state.p_diff_attr.iter_mut().for_each(|v| *v /= norm);
    state.p_diff_attr_diff_clus.iter_mut().for_each(|v| *v /= norm);
    Ok(state)
}

/// URelief weights of every attribute, using `stats` for numeric ranges.
pub fn urelief(table: &FeatureTable, cfg: &UReliefConfig, stats: &AttributeStats) -> Result<Vec<f64>> {
    Ok(urelief_state(table, cfg, stats)?.weights())
}

/// URelief with ranges taken from the table itself.
pub fn urelief_on(table: &FeatureTable, cfg: &UReliefConfig) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..table.m()).collect();
    let stats = compute_stats(table, &all)?;
    urelief(table, cfg, &stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Attribute;

    fn table(rows: &[Vec<f64>]) -> FeatureTable {
        FeatureTable::from_rows(rows).unwrap()
    }

    fn stats_of(t: &FeatureTable) -> AttributeStats {
        compute_stats(t, &(0..t.m()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn attribute_distances() {
        let t = table(&[vec![2.0, 0.0], vec![7.0, 10.0], vec![0.0, 5.0], vec![10.0, 5.0]]);
        let s = stats_of(&t);
        assert_eq!(attr_distance(&t, &s, 0, 0, 1), 0.5);
        assert_eq!(attr_distance(&t, &s, 0, 1, 1), 0.0);
        assert_eq!(example_distance(&t, &s, 2, 2), 0.0);
        // d_0 = 0.2, d_1 = 0.6 -> 0.4
        let t = table(&[vec![0.0, 0.0], vec![2.0, 6.0], vec![10.0, 10.0]]);
        let s = stats_of(&t);
        assert!((example_distance(&t, &s, 0, 1) - 0.4).abs() < 1e-15);
        assert_eq!(example_distance(&t, &s, 0, 2), 1.0);
    }

    #[test]
    fn nominal_indicator_distance() {
        let kind = AttributeKind::nominal(["x", "y"]).unwrap();
        let t = FeatureTable::new(
            vec![Attribute {
                name: "c".into(),
                kind,
            }],
            vec![vec![0.0, 1.0, 0.0]],
        )
        .unwrap();
        let s = stats_of(&t);
        assert_eq!(attr_distance(&t, &s, 0, 0, 1), 1.0);
        assert_eq!(attr_distance(&t, &s, 0, 0, 2), 0.0);
    }

    #[test]
    fn constant_numeric_distance_is_zero() {
        let t = table(&[vec![3.0], vec![3.0]]);
        let s = stats_of(&t);
        assert_eq!(attr_distance(&t, &s, 0, 0, 1), 0.0);
    }

    #[test]
    fn identical_rows_give_zero_weights() {
        let t = table(&vec![vec![1.0, 4.0, 2.0]; 8]);
        let w = urelief_on(&t, &UReliefConfig::default()).unwrap();
        assert_eq!(w, vec![0.0; 3]);
    }

    #[test]
    fn duplicated_columns_get_equal_weights() {
        let mut rng = stream(5, &[]);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let a: f64 = rng.gen();
                vec![a, rng.gen(), a]
            })
            .collect();
        let t = table(&rows);
        let w = urelief_on(&t, &UReliefConfig::default()).unwrap();
        assert!((w[0] - w[2]).abs() <= 1e-12);
    }

    #[test]
    fn rejects_too_many_neighbors() {
        let t = table(&[vec![1.0], vec![2.0], vec![3.0]]);
        let cfg = UReliefConfig {
            neighbors: Some(3),
            ..Default::default()
        };
        assert!(matches!(urelief_on(&t, &cfg), Err(Error::InvalidConfig(_))));
        let cfg = UReliefConfig {
            neighbors: Some(2),
            ..Default::default()
        };
        assert!(urelief_on(&t, &cfg).is_ok());
    }

    #[test]
    fn default_neighbors_cap_at_m_minus_one() {
        let cfg = UReliefConfig::default();
        assert_eq!(cfg.resolve(10).unwrap(), (9, 10));
        assert_eq!(cfg.resolve(100).unwrap(), (30, 100));
        let cfg = UReliefConfig {
            iterations: Iterations::Fraction(0.25),
            ..Default::default()
        };
        assert_eq!(cfg.resolve(100).unwrap().1, 25);
    }

    #[test]
    fn nearest_breaks_ties_by_index() {
        let d = [0.0, 0.5, 0.2, 0.5, 0.5];
        assert_eq!(nearest(&d, 0, 2), vec![2, 1]);
        assert_eq!(nearest(&d, 2, 3), vec![0, 1, 3]);
    }

    #[test]
    fn oversampled_references_with_replacement() {
        let refs = reference_rows(5, 12, 3);
        assert_eq!(refs.len(), 12);
        assert!(refs.iter().all(|&r| r < 5));
        let mut perm = reference_rows(5, 5, 3);
        perm.sort_unstable();
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn weights_stay_in_unit_interval() {
        let mut rng = stream(9, &[]);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = (i % 2) as f64 * 5.0;
                vec![c + rng.gen::<f64>(), rng.gen(), c + rng.gen::<f64>()]
            })
            .collect();
        let t = table(&rows);
        let state = urelief_state(&t, &UReliefConfig::default(), &stats_of(&t)).unwrap();
        for i in 0..3 {
            assert!(state.p_diff_attr_diff_clus[i] <= state.p_diff_attr[i] + 1e-12);
        }
        let w = state.weights();
        assert!(w.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
