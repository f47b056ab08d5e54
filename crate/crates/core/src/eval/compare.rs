//! Average ranks, the Friedman test and the Nemenyi critical distance.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ranking::csv_field;

/// `q_α / √2` for the Nemenyi test with 2..=10 methods.
const NEMENYI_Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const NEMENYI_Q_010: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Fractional ranks of `values` (1 = smallest); ties share the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

/// Friedman chi-square statistic and its p-value for `mean_ranks` over
/// `datasets` datasets.
pub fn friedman(mean_ranks: &[f64], datasets: usize) -> Result<(f64, f64)> {
    let k = mean_ranks.len();
    if k < 2 || datasets < 2 {
        return Err(Error::InvalidData(
            "the Friedman test needs at least 2 methods and 2 datasets".into(),
        ));
    }
    let kf = k as f64;
    let nf = datasets as f64;
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let stat = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    // Ranks are multiples of 1/(2N); a statistic this small is a tie.
    let stat = if stat < 1e-12 { 0.0 } else { stat };
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::Computation(e.to_string()))?;
    let p = if stat == 0.0 { 1.0 } else { 1.0 - chi.cdf(stat) };
    Ok((stat, p))
}

/// CDF of the studentized range of `k` standard normals (infinite degrees of
/// freedom): `k ∫ φ(z) [Φ(z) − Φ(z − q)]^(k−1) dz`.
fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (lo, hi, steps) = (-9.0, 9.0, 4000);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| normal.pdf(z) * (normal.cdf(z) - normal.cdf(z - q)).powi(k as i32 - 1);
    let mut acc = f(lo) + f(hi);
    for s in 1..steps {
        let z = lo + s as f64 * h;
        acc += if s % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    (k as f64 * acc * h / 3.0).clamp(0.0, 1.0)
}

/// Upper-`alpha` quantile of the studentized range (infinite df) for `k`
/// groups, by bisection.
pub fn studentized_range_quantile(alpha: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || k < 2 {
        return Err(Error::InvalidConfig(format!(
            "no studentized range quantile for alpha={alpha}, k={k}"
        )));
    }
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..100 {
        let mid = (lo + hi) / 2.0;
        if studentized_range_cdf(mid, k) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// Nemenyi critical distance `q_α/√2 · sqrt(k(k+1)/(6N))`. Uses the
/// standard table for α ∈ {0.05, 0.10} and k ≤ 10; computes the quantile
/// otherwise.
pub fn nemenyi_critical_distance(alpha: f64, methods: usize, datasets: usize) -> Result<f64> {
    if methods < 2 || datasets < 1 {
        return Err(Error::InvalidData(
            "critical distance needs at least 2 methods and 1 dataset".into(),
        ));
    }
    let tabulated = match alpha {
        a if a == 0.05 => NEMENYI_Q_005.get(methods - 2).copied(),
        a if a == 0.10 => NEMENYI_Q_010.get(methods - 2).copied(),
        _ => None,
    };
    let q = match tabulated {
        Some(q) => q,
        None => studentized_range_quantile(alpha, methods)? / std::f64::consts::SQRT_2,
    };
    let k = methods as f64;
    Ok(q * (k * (k + 1.0) / (6.0 * datasets as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    /// `scores[d][j]`: error of method `j` on dataset `d` (lower is better).
    pub scores: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
    pub average_ranks: Vec<f64>,
    pub friedman_statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub critical_distance: f64,
    /// Maximal sets of methods whose average ranks lie within the critical
    /// distance of each other, best first.
    pub groups: Vec<Vec<String>>,
}

impl ComparisonReport {
    /// Dataset rows, one column per method, closing with the average ranks.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset");
        for m in &self.methods {
            out.push(',');
            out.push_str(&csv_field(m));
        }
        out.push('\n');
        for (name, row) in self.datasets.iter().zip(&self.scores) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out.push_str("Average rank");
        for r in &self.average_ranks {
            out.push_str(&format!(",{r}"));
        }
        out.push('\n');
        out
    }
}

/// Ranks methods per dataset (lower score is better), then runs the
/// Friedman test and the Nemenyi post-hoc analysis.
pub fn compare_methods(
    datasets: &[String],
    methods: &[String],
    scores: &[Vec<f64>],
    alpha: f64,
) -> Result<ComparisonReport> {
    if methods.len() < 2 || datasets.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 methods and 2 datasets, got {} and {}",
            methods.len(),
            datasets.len()
        )));
    }
    if scores.len() != datasets.len() || scores.iter().any(|r| r.len() != methods.len()) {
        return Err(Error::InvalidData(format!(
            "score matrix must be {} x {}",
            datasets.len(),
            methods.len()
        )));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("score matrix has non-finite entries".into()));
    }
    let ranks: Vec<Vec<f64>> = scores.iter().map(|row| average_ranks(row)).collect();
    let nd = datasets.len() as f64;
    let average_ranks: Vec<f64> = (0..methods.len())
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / nd)
        .collect();
    let (friedman_statistic, p_value) = friedman(&average_ranks, datasets.len())?;
    let critical_distance = nemenyi_critical_distance(alpha, methods.len(), datasets.len())?;
    let groups = cliques(&average_ranks, critical_distance)
        .into_iter()
        .map(|g| g.into_iter().map(|j| methods[j].clone()).collect())
        .collect();
    Ok(ComparisonReport {
        methods: methods.to_vec(),
        datasets: datasets.to_vec(),
        scores: scores.to_vec(),
        ranks,
        average_ranks,
        friedman_statistic,
        p_value,
        alpha,
        critical_distance,
        groups,
    })
}

/// Maximal runs of rank-sorted methods spanning less than `cd`, skipping runs
/// contained in an earlier one and singletons.
fn cliques(avg: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..avg.len()).collect();
    order.sort_by(|&a, &b| avg[a].total_cmp(&avg[b]).then(a.cmp(&b)));
    let mut groups = Vec::new();
    let mut last_end = 0;
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && avg[order[end + 1]] - avg[order[start]] < cd {
            end += 1;
        }
        if end > start && end > last_end {
            groups.push(order[start..=end].to_vec());
            last_end = end;
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn ranks_share_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks(&[5.0, 5.0]), vec![1.5, 1.5]);
    }

    #[test]
    fn all_ties_have_no_evidence() {
        let scores = vec![vec![1.0, 1.0, 1.0]; 6];
        let r = compare_methods(&names("d", 6), &names("m", 3), &scores, 0.05).unwrap();
        assert_eq!(r.average_ranks, vec![2.0; 3]);
        assert_eq!(r.friedman_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.groups.len(), 1);
    }

    #[test]
    fn dominant_method_two_way() {
        // Closed form for two methods: chi2 = 12N/6 · (1 + 4 − 4.5) = N.
        let scores = vec![vec![0.1, 0.2]; 10];
        let r = compare_methods(&names("d", 10), &names("m", 2), &scores, 0.05).unwrap();
        assert_eq!(r.average_ranks, vec![1.0, 2.0]);
        assert!((r.friedman_statistic - 10.0).abs() < 1e-12);
        assert!(r.p_value < 0.01);
        for row in &r.ranks {
            assert_eq!(row.iter().sum::<f64>(), 3.0);
        }
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let scores = vec![
            vec![0.3, 0.1, 0.5],
            vec![2.0, 3.0, 1.0],
            vec![0.7, 0.6, 0.9],
            vec![1.1, 1.2, 1.3],
        ];
        let warped: Vec<Vec<f64>> = scores
            .iter()
            .map(|r| r.iter().map(|v: &f64| v.ln() * 3.0 + 7.0).collect())
            .collect();
        let a = compare_methods(&names("d", 4), &names("m", 3), &scores, 0.05).unwrap();
        let b = compare_methods(&names("d", 4), &names("m", 3), &warped, 0.05).unwrap();
        assert_eq!(a.friedman_statistic, b.friedman_statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn quantile_matches_table() {
        for (k, &q) in (2..=10).zip(NEMENYI_Q_005.iter()) {
            let got = studentized_range_quantile(0.05, k).unwrap() / std::f64::consts::SQRT_2;
            assert!((got - q).abs() < 2e-3, "k={k}: {got} vs {q}");
        }
        for (k, &q) in (2..=10).zip(NEMENYI_Q_010.iter()) {
            let got = studentized_range_quantile(0.10, k).unwrap() / std::f64::consts::SQRT_2;
            assert!((got - q).abs() < 2e-3, "k={k}: {got} vs {q}");
        }
    }

    #[test]
    fn critical_distance_formula() {
        // Seven methods on 26 datasets at alpha = 0.05.
        let cd = nemenyi_critical_distance(0.05, 7, 26).unwrap();
        assert!((cd - 2.949 * (7.0 * 8.0 / 156.0f64).sqrt()).abs() < 1e-12);
        // Beyond the table the quantile is computed.
        assert!(nemenyi_critical_distance(0.05, 30, 26).unwrap() > cd);
    }

    #[test]
    fn malformed_matrix_rejected() {
        let bad = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(compare_methods(&names("d", 2), &names("m", 2), &bad, 0.05).is_err());
        let one = vec![vec![1.0, 2.0]];
        assert!(compare_methods(&names("d", 1), &names("m", 2), &one, 0.05).is_err());
    }

    #[test]
    fn groups_follow_critical_distance() {
        let g = cliques(&[1.0, 1.5, 3.0, 3.2], 1.0);
        assert_eq!(g, vec![vec![0, 1], vec![2, 3]]);
        let g = cliques(&[1.0, 1.8, 2.6], 1.0);
        assert_eq!(g, vec![vec![0, 1], vec![1, 2]]);
    }
}
