//! Seeded ensembles of predictive clustering trees.
//!
//! All three schemes grow every tree on a bootstrap replicate; they differ in
//! the split search: bagging evaluates every threshold of every attribute,
//! random forests every threshold of a random attribute subset, and extra
//! trees one random threshold per sampled attribute.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{compute_stats, AttributeKind, AttributeStats, FeatureTable};
use crate::error::{Error, Result};
use crate::pct::{grow_tree, SplitSearchPolicy, ThresholdMode, Tree};
use crate::rng::{derive_seed, stream, TAG_PERMUTE, TAG_TREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    Bagging,
    RandomForest,
    ExtraTrees,
}

impl EnsembleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleMethod::Bagging => "bagging",
            EnsembleMethod::RandomForest => "random_forest",
            EnsembleMethod::ExtraTrees => "extra_trees",
        }
    }
}

/// Rule that turns the feature count `n` into the per-node candidate count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetRule {
    /// `ceil(log2 n)`
    Log2,
    /// `round(sqrt n)`
    Sqrt,
    /// `n`
    All,
}

impl SubsetRule {
    pub fn resolve(self, n: usize) -> usize {
        let k = match self {
            SubsetRule::Log2 => (n as f64).log2().ceil() as usize,
            SubsetRule::Sqrt => (n as f64).sqrt().round() as usize,
            SubsetRule::All => n,
        };
        k.clamp(1, n.max(1))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubsetRule::Log2 => "log2",
            SubsetRule::Sqrt => "sqrt",
            SubsetRule::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub method: EnsembleMethod,
    pub trees: usize,
    pub subset_rule: SubsetRule,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            method: EnsembleMethod::ExtraTrees,
            trees: 100,
            subset_rule: SubsetRule::Log2,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn policy(&self, n: usize) -> SplitSearchPolicy {
        match self.method {
            EnsembleMethod::Bagging => SplitSearchPolicy {
                subset_size: n,
                thresholds: ThresholdMode::AllThresholds,
            },
            EnsembleMethod::RandomForest => SplitSearchPolicy {
                subset_size: self.subset_rule.resolve(n),
                thresholds: ThresholdMode::AllThresholds,
            },
            EnsembleMethod::ExtraTrees => SplitSearchPolicy {
                subset_size: self.subset_rule.resolve(n),
                thresholds: ThresholdMode::OneRandomThreshold,
            },
        }
    }
}

/// Bootstrap replicate of one tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    /// Number of times each row was drawn; sums to `m`.
    pub in_bag: Vec<u32>,
    /// Rows never drawn, ascending.
    pub oob: Vec<usize>,
}

impl Bag {
    fn draw<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut in_bag = vec![0u32; m];
        for _ in 0..m {
            in_bag[rng.gen_range(0..m)] += 1;
        }
        let oob = (0..m).filter(|&r| in_bag[r] == 0).collect();
        Bag { in_bag, oob }
    }

    /// The in-bag multiset as a sorted list of row indices.
    pub fn rows(&self) -> Vec<usize> {
        self.in_bag
            .iter()
            .enumerate()
            .flat_map(|(r, &c)| std::iter::repeat_n(r, c as usize))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    config: EnsembleConfig,
    policy: SplitSearchPolicy,
    trees: Vec<Tree>,
    bags: Vec<Bag>,
    stats: AttributeStats,
}

/// Grows `cfg.trees` trees in parallel on the current rayon pool. Tree `t`
/// draws its bootstrap and split randomness from its own stream, so results
/// do not depend on the number of workers.
pub fn build(table: &FeatureTable, cfg: &EnsembleConfig) -> Result<Ensemble> {
    let m = table.m();
    if m < 2 {
        return Err(Error::InvalidData(format!(
            "an ensemble needs at least 2 examples, got {m}"
        )));
    }
    if cfg.trees == 0 {
        return Err(Error::InvalidConfig("tree count must be at least 1".into()));
    }
    let all: Vec<usize> = (0..m).collect();
    let stats = compute_stats(table, &all)?;
    let policy = cfg.policy(table.n());
    let grown: Vec<(Tree, Bag)> = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, &[TAG_TREE, t as u64]);
            let bag = Bag::draw(m, &mut rng);
            let tree = grow_tree(table, bag.rows(), &policy, &stats, &mut rng);
            (tree, bag)
        })
        .collect();
    let (trees, bags) = grown.into_iter().unzip();
    Ok(Ensemble {
        config: *cfg,
        policy,
        trees,
        bags,
        stats,
    })
}

impl Ensemble {
    /// Assembles an ensemble from parts. Useful for hand-built fixtures.
    pub fn from_parts(
        config: EnsembleConfig,
        policy: SplitSearchPolicy,
        trees: Vec<Tree>,
        bags: Vec<Bag>,
        stats: AttributeStats,
    ) -> Result<Self> {
        if trees.is_empty() || trees.len() != bags.len() {
            return Err(Error::InvalidData(
                "need one bag per tree and at least one tree".into(),
            ));
        }
        Ok(Ensemble {
            config,
            policy,
            trees,
            bags,
            stats,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn policy(&self) -> &SplitSearchPolicy {
        &self.policy
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    /// Statistics of the full training table.
    pub fn stats(&self) -> &AttributeStats {
        &self.stats
    }

    pub fn n_attributes(&self) -> usize {
        self.stats.len()
    }

    /// Seed of the permutation applied to `attr` within tree `t`'s OOB set.
    pub fn permutation_seed(&self, t: usize, attr: usize) -> u64 {
        derive_seed(self.config.seed, &[TAG_PERMUTE, t as u64, attr as u64])
    }

    /// Writes `manifest.json` plus one nested `tree_NNNN.json` per tree.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tree_files = Vec::with_capacity(self.trees.len());
        for (t, tree) in self.trees.iter().enumerate() {
            let file = format!("tree_{t:04}.json");
            let path = dir.join(&file);
            let body = serde_json::to_string(&tree.nested())?;
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            tree_files.push(file);
        }
        let manifest = Manifest {
            config: &self.config,
            policy: &self.policy,
            stats: &self.stats,
            trees: tree_files
                .iter()
                .zip(&self.bags)
                .map(|(file, bag)| ManifestTree { file, bag })
                .collect(),
        };
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, body).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a EnsembleConfig,
    policy: &'a SplitSearchPolicy,
    stats: &'a AttributeStats,
    trees: Vec<ManifestTree<'a>>,
}

#[derive(Serialize)]
struct ManifestTree<'a> {
    file: &'a str,
    #[serde(flatten)]
    bag: &'a Bag,
}

/// Mean normalized reconstruction error of tree `t` on `rows`.
///
/// Each row is routed to a leaf and compared with its prototype attribute by
/// attribute: squared difference over the training variance for numeric
/// attributes, 0/1 mismatch for nominal ones, averaged over all `n`
/// attributes. Attributes with zero training dispersion contribute 0.
///
/// With `permuted = Some((attr, seed))`, the values of `attr` are shuffled
/// among `rows` before routing and scoring.
pub fn oob_error(
    ensemble: &Ensemble,
    table: &FeatureTable,
    t: usize,
    rows: &[usize],
    permuted: Option<(usize, u64)>,
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let tree = &ensemble.trees[t];
    let stats = &ensemble.stats;
    let n = table.n();
    let replaced: Option<(usize, Vec<f64>)> = permuted.map(|(attr, seed)| {
        let col = table.column(attr);
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        values.shuffle(&mut stream(seed, &[]));
        (attr, values)
    });
    let mut total = 0.0;
    for (p, &r) in rows.iter().enumerate() {
        let value = |a: usize| match &replaced {
            Some((attr, values)) if *attr == a => values[p],
            _ => table.value(r, a),
        };
        let proto = tree.prototype(tree.leaf_index_by(value));
        let mut err = 0.0;
        for i in 0..n {
            let denom = stats.get(i).dispersion();
            if denom <= 0.0 {
                continue;
            }
            let x = value(i);
            err += match &table.attribute(i).kind {
                AttributeKind::Numeric => (x - proto[i]) * (x - proto[i]) / denom,
                AttributeKind::Nominal(_) => f64::from(u8::from(x != proto[i])),
            };
        }
        total += err / n as f64;
    }
    Ok(total / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AttributeStat;
    use crate::pct::{Node, NodeKind};

    fn table(rows: &[Vec<f64>]) -> FeatureTable {
        FeatureTable::from_rows(rows).unwrap()
    }

    fn noisy_table(m: usize, n: usize, seed: u64) -> FeatureTable {
        let mut rng = stream(seed, &[99]);
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.gen::<f64>()).collect())
            .collect();
        table(&rows)
    }

    #[test]
    fn subset_rules() {
        assert_eq!(SubsetRule::Log2.resolve(500), 9);
        assert_eq!(SubsetRule::Log2.resolve(16), 4);
        assert_eq!(SubsetRule::Log2.resolve(1), 1);
        assert_eq!(SubsetRule::Sqrt.resolve(500), 22);
        assert_eq!(SubsetRule::All.resolve(7), 7);
    }

    #[test]
    fn bagging_equals_random_forest_with_all_attributes() {
        let t = noisy_table(30, 4, 3);
        let bag = EnsembleConfig {
            method: EnsembleMethod::Bagging,
            trees: 5,
            subset_rule: SubsetRule::Log2,
            seed: 11,
        };
        let rf = EnsembleConfig {
            method: EnsembleMethod::RandomForest,
            subset_rule: SubsetRule::All,
            ..bag
        };
        let a = build(&t, &bag).unwrap();
        let b = build(&t, &rf).unwrap();
        assert_eq!(a.trees(), b.trees());
        assert_eq!(a.bags(), b.bags());
    }

    #[test]
    fn bags_partition_rows() {
        let t = noisy_table(40, 3, 1);
        let e = build(
            &t,
            &EnsembleConfig {
                trees: 8,
                ..Default::default()
            },
        )
        .unwrap();
        for bag in e.bags() {
            assert_eq!(bag.in_bag.iter().map(|&c| c as usize).sum::<usize>(), 40);
            for r in 0..40 {
                assert_eq!(bag.in_bag[r] == 0, bag.oob.contains(&r));
            }
        }
        assert_eq!(e.trees().len(), 8);
    }

    #[test]
    fn constant_data_gives_leaves_and_nonempty_oob() {
        let t = table(&vec![vec![1.0, 1.0]; 12]);
        for seed in 0..20 {
            let e = build(
                &t,
                &EnsembleConfig {
                    trees: 1,
                    seed,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(e.trees()[0].nodes().len(), 1);
            assert!(!e.bags()[0].oob.is_empty());
        }
    }

    #[test]
    fn seeds_change_bags() {
        let t = noisy_table(20, 2, 0);
        let cfg = EnsembleConfig {
            trees: 3,
            ..Default::default()
        };
        let a = build(&t, &cfg).unwrap();
        let b = build(&t, &EnsembleConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.bags(), b.bags());
    }

    #[test]
    fn rejects_tiny_inputs() {
        let t = table(&[vec![1.0]]);
        assert!(build(&t, &EnsembleConfig::default()).is_err());
        let t = table(&[vec![1.0], vec![2.0]]);
        let cfg = EnsembleConfig {
            trees: 0,
            ..Default::default()
        };
        assert!(matches!(build(&t, &cfg), Err(Error::InvalidConfig(_))));
    }

    /// Stump on x0 <= 5 with leaf prototypes (0, 0) and (10, 10).
    fn stump_ensemble(stats: AttributeStats, oob: Vec<usize>, m: usize) -> Ensemble {
        let tree_nodes = vec![
            Node {
                n_reached: 4,
                kind: NodeKind::Internal {
                    test: crate::pct::Test::Threshold {
                        attribute: 0,
                        threshold: 5.0,
                    },
                    h_star: 1.0,
                    yes: 1,
                    no: 2,
                },
            },
            Node {
                n_reached: 2,
                kind: NodeKind::Leaf {
                    prototype: vec![0.0, 0.0],
                },
            },
            Node {
                n_reached: 2,
                kind: NodeKind::Leaf {
                    prototype: vec![10.0, 10.0],
                },
            },
        ];
        let tree = Tree::from_nodes(tree_nodes).unwrap();
        let mut in_bag = vec![1u32; m];
        for &r in &oob {
            in_bag[r] = 0;
        }
        let cfg = EnsembleConfig::default();
        Ensemble::from_parts(
            cfg,
            cfg.policy(2),
            vec![tree],
            vec![Bag { in_bag, oob }],
            stats,
        )
        .unwrap()
    }

    fn numeric_stats(v0: f64, v1: f64) -> AttributeStats {
        AttributeStats {
            per_attribute: vec![
                AttributeStat::Numeric {
                    min: 0.0,
                    max: 10.0,
                    variance: v0,
                },
                AttributeStat::Numeric {
                    min: 0.0,
                    max: 10.0,
                    variance: v1,
                },
            ],
        }
    }

    #[test]
    fn exact_prototype_match_has_zero_error() {
        let t = table(&[vec![0.0, 0.0], vec![10.0, 10.0]]);
        let e = stump_ensemble(numeric_stats(25.0, 25.0), vec![0, 1], 2);
        assert_eq!(oob_error(&e, &t, 0, &[0, 1], None).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_two_row_error() {
        // Row 0 -> leaf (0,0): errors (1^2/4, 2^2/16) -> mean 0.25
        // Row 1 -> leaf (10,10): errors (2^2/4, 0) -> mean 0.5
        let t = table(&[vec![1.0, 2.0], vec![8.0, 10.0]]);
        let e = stump_ensemble(numeric_stats(4.0, 16.0), vec![0, 1], 2);
        let got = oob_error(&e, &t, 0, &[0, 1], None).unwrap();
        assert!((got - 0.375).abs() < 1e-15);
    }

    #[test]
    fn constant_column_permutation_is_identity() {
        let t = table(&[vec![1.0, 3.0], vec![8.0, 3.0], vec![2.0, 3.0]]);
        let e = stump_ensemble(numeric_stats(4.0, 0.0), vec![0, 1, 2], 3);
        let base = oob_error(&e, &t, 0, &[0, 1, 2], None).unwrap();
        for seed in 0..10 {
            assert_eq!(oob_error(&e, &t, 0, &[0, 1, 2], Some((1, seed))).unwrap(), base);
        }
    }

    #[test]
    fn empty_rows_are_an_error() {
        let t = table(&[vec![1.0, 3.0], vec![8.0, 3.0]]);
        let e = stump_ensemble(numeric_stats(4.0, 4.0), vec![], 2);
        assert!(matches!(oob_error(&e, &t, 0, &[], None), Err(Error::EmptyRows)));
    }

    #[test]
    fn save_dir_writes_manifest_and_trees() {
        let t = noisy_table(15, 3, 2);
        let e = build(
            &t,
            &EnsembleConfig {
                trees: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        e.save_dir(dir.path()).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["trees"].as_array().unwrap().len(), 2);
        assert_eq!(manifest["config"]["method"], "extra_trees");
        assert!(dir.path().join("tree_0001.json").exists());
    }
}
