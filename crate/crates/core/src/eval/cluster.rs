//! k-means and the adjusted Rand index, used to check whether clusters in
//! descriptive space follow the class labels.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, Dataset, FeatureTable};
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_KMEANS};

pub const MAX_ITERATIONS: usize = 300;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major points for clustering: numeric attributes as-is, nominal ones
/// one-hot encoded.
fn embed(table: &FeatureTable) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new(); table.m()];
    for i in 0..table.n() {
        let col = table.column(i);
        match &table.attribute(i).kind {
            AttributeKind::Numeric => {
                for (p, &v) in points.iter_mut().zip(col) {
                    p.push(v);
                }
            }
            AttributeKind::Nominal(domain) => {
                for (p, &v) in points.iter_mut().zip(col) {
                    p.extend((0..domain.len()).map(|c| f64::from(u8::from(c as f64 == v))));
                }
            }
        }
    }
    points
}

/// Lloyd's algorithm with k-means++ seeding. Stops when the inertia improves
/// by less than [`RELATIVE_TOLERANCE`] (relative) or after
/// [`MAX_ITERATIONS`].
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Result<KMeansResult> {
    let m = points.len();
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "cannot form {k} clusters from {m} points"
        )));
    }
    let mut centers = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; m];
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut current = 0.0;
        for (p, label) in points.iter().zip(labels.iter_mut()) {
            let (best, d) = nearest_center(p, &centers);
            *label = best;
            current += d;
        }

        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..m)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centers[labels[a]]);
                        let db = sq_dist(&points[b], &centers[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centers[c] = points[far].clone();
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }

        let converged = inertia.is_finite()
            && (inertia - current).abs() <= RELATIVE_TOLERANCE * inertia.max(f64::MIN_POSITIVE);
        inertia = current;
        if converged {
            break;
        }
    }
    // Final assignment against the last centers.
    inertia = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let (best, d) = nearest_center(p, &centers);
        *label = best;
        inertia += d;
    }
    Ok(KMeansResult {
        labels,
        centers,
        inertia,
        iterations,
    })
}

fn nearest_center(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

fn plus_plus_init<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut centers = vec![points[rng.gen_range(0..m)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..m)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = m - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        };
        centers.push(points[next].clone());
        let c = centers.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centers
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// When both labelings are trivial (the expected and maximal index coincide)
/// the labelings agree perfectly and the index is 1.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidData(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidData("need at least 2 labeled items".into()));
    }
    let mut table: BTreeMap<(&A, &B), usize> = BTreeMap::new();
    let mut rows: BTreeMap<&A, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&B, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(a.len());
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AriReport {
    pub dataset: String,
    pub class_count: usize,
    pub runs: Vec<f64>,
    pub median: f64,
    pub seed: u64,
}

/// Median ARI between k-means clusters (k = number of classes) and class
/// labels over `runs` seeded restarts.
pub fn clustering_hypothesis_ari(
    dataset: &Dataset,
    class_count: Option<usize>,
    runs: usize,
    seed: u64,
) -> Result<AriReport> {
    let target = dataset.target().ok_or_else(|| {
        Error::InvalidData(format!("dataset '{}' has no target column", dataset.name()))
    })?;
    // Class labels are compared by bit pattern; targets are finite.
    let labels: Vec<u64> = target.iter().map(|v| (v + 0.0).to_bits()).collect();
    let distinct = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct < 2 {
        return Err(Error::InvalidData(
            "target has a single class; the clustering check needs at least 2".into(),
        ));
    }
    if runs == 0 {
        return Err(Error::InvalidConfig("run count must be at least 1".into()));
    }
    let k = class_count.unwrap_or(distinct);
    let points = embed(dataset.features());
    let aris = (0..runs)
        .map(|run| {
            let mut rng = stream(seed, &[TAG_KMEANS, run as u64]);
            let clusters = kmeans(&points, k, &mut rng)?;
            adjusted_rand_index(&clusters.labels, &labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    let median = median(&aris);
    Ok(AriReport {
        dataset: dataset.name().to_owned(),
        class_count: k,
        runs: aris,
        median,
        seed,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}
