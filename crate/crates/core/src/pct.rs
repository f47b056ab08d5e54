//! Predictive clustering trees for the unsupervised setting.
//!
//! Every attribute is at once descriptive (usable in tests), clustering (part
//! of the impurity) and target (predicted by leaf prototypes). The impurity of
//! an example multiset `E` is the mean over attributes of the attribute's
//! variance (numeric) or Gini value (nominal) on `E`, each divided by the same
//! quantity on the training set. A split's heuristic is
//! `|E|·impu(E) − Σ |E_k|·impu(E_k)`.
//!
//! Row sets are multisets: a row index that appears twice counts twice in
//! every frequency, mean and variance.

use rand::seq::index::sample;
use rand::Rng;
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeKind, AttributeStats, FeatureTable};

/// Relative margin a candidate's heuristic must clear to replace the incumbent.
///
/// Scaled by `|E|·impu(E)`, the largest heuristic a node can reach, so exact
/// ties and round-off noise keep the first-enumerated test.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Test {
    /// `x[attribute] <= threshold`
    Threshold { attribute: usize, threshold: f64 },
    /// `x[attribute] == category` (category is the label's domain index)
    Category { attribute: usize, category: usize },
}

impl Test {
    pub fn attribute(&self) -> usize {
        match *self {
            Test::Threshold { attribute, .. } | Test::Category { attribute, .. } => attribute,
        }
    }

    /// Whether a value of the tested attribute takes the "yes" branch.
    #[inline]
    pub fn accepts(&self, value: f64) -> bool {
        match *self {
            Test::Threshold { threshold, .. } => value <= threshold,
            Test::Category { category, .. } => value == category as f64,
        }
    }

    #[inline]
    pub fn passes(&self, x: &[f64]) -> bool {
        self.accepts(x[self.attribute()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Every midpoint between consecutive distinct values (every present
    /// category for nominal attributes).
    AllThresholds,
    /// One uniformly drawn threshold (or category) per candidate attribute.
    OneRandomThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSearchPolicy {
    /// Number of attributes sampled as candidates in each node.
    pub subset_size: usize,
    pub thresholds: ThresholdMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub test: Test,
    pub h_star: f64,
    pub yes: Vec<usize>,
    pub no: Vec<usize>,
}

/// Mean normalized impurity of `rows`. Attributes whose training dispersion is
/// zero contribute nothing.
pub fn impurity(table: &FeatureTable, rows: &[usize], stats: &AttributeStats) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    weighted_impurity(table, rows, stats) / rows.len() as f64
}

/// `|rows| · impurity(rows)`, computed with a two-pass variance.
pub(crate) fn weighted_impurity(
    table: &FeatureTable,
    rows: &[usize],
    stats: &AttributeStats,
) -> f64 {
    let count = rows.len() as f64;
    let mut total = 0.0;
    for i in 0..table.n() {
        let denom = stats.get(i).dispersion();
        if denom <= 0.0 {
            continue;
        }
        let col = table.column(i);
        let scatter = match &table.attribute(i).kind {
            AttributeKind::Numeric => {
                let mean = rows.iter().map(|&r| col[r]).sum::<f64>() / count;
                rows.iter().map(|&r| (col[r] - mean).powi(2)).sum::<f64>()
            }
            AttributeKind::Nominal(domain) => {
                let mut counts = vec![0usize; domain.len()];
                for &r in rows {
                    counts[col[r] as usize] += 1;
                }
                count - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / count
            }
        };
        total += scatter / denom;
    }
    total / table.n() as f64
}

/// Attributes with positive training dispersion, ascending.
pub(crate) fn eligible_attributes(stats: &AttributeStats) -> Vec<usize> {
    (0..stats.len())
        .filter(|&i| stats.get(i).dispersion() > 0.0)
        .collect()
}

/// Draws the candidate attributes for one node, in the order they were
/// sampled; that order decides ties. When every eligible attribute is a
/// candidate they come in ascending index order and no randomness is used.
fn candidate_attributes<R: Rng + ?Sized>(
    eligible: &[usize],
    subset_size: usize,
    rng: &mut R,
) -> Vec<usize> {
    if subset_size >= eligible.len() {
        return eligible.to_vec();
    }
    sample(rng, eligible.len(), subset_size)
        .into_iter()
        .map(|k| eligible[k])
        .collect()
}

/// Per-node sufficient statistics for the clustering attributes.
///
/// Numeric values are shifted by the node mean before accumulating sums and
/// squared sums, which keeps `Σv² − (Σv)²/N` well conditioned.
struct NodeFrame<'a> {
    table: &'a FeatureTable,
    rows: &'a [usize],
    /// Clustering attributes (positive training dispersion).
    attrs: Vec<usize>,
    /// `1 / (n · dispersion)` per clustering attribute.
    weight: Vec<f64>,
    /// Shifted numeric values, row-major: `values[p * attrs.len() + k]`.
    values: Vec<f64>,
    numeric: Vec<bool>,
    /// Offset of each nominal attribute's count block; unused for numeric.
    count_offset: Vec<usize>,
    count_len: usize,
    totals: Accumulator,
}

#[derive(Clone)]
struct Accumulator {
    size: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    counts: Vec<usize>,
}

impl Accumulator {
    fn new(k: usize, count_len: usize) -> Self {
        Accumulator {
            size: 0,
            sum: vec![0.0; k],
            sum_sq: vec![0.0; k],
            counts: vec![0; count_len],
        }
    }

    fn clear(&mut self) {
        self.size = 0;
        self.sum.iter_mut().for_each(|v| *v = 0.0);
        self.sum_sq.iter_mut().for_each(|v| *v = 0.0);
        self.counts.iter_mut().for_each(|v| *v = 0);
    }
}

impl<'a> NodeFrame<'a> {
    fn new(table: &'a FeatureTable, rows: &'a [usize], stats: &AttributeStats, attrs: Vec<usize>) -> Self {
        let k = attrs.len();
        let n = table.n() as f64;
        let count = rows.len() as f64;
        let mut weight = Vec::with_capacity(k);
        let mut numeric = Vec::with_capacity(k);
        let mut count_offset = Vec::with_capacity(k);
        let mut count_len = 0;
        let mut values = vec![0.0; rows.len() * k];
        for (slot, &i) in attrs.iter().enumerate() {
            weight.push(1.0 / (n * stats.get(i).dispersion()));
            let col = table.column(i);
            match &table.attribute(i).kind {
                AttributeKind::Numeric => {
                    numeric.push(true);
                    count_offset.push(0);
                    let mean = rows.iter().map(|&r| col[r]).sum::<f64>() / count;
                    for (p, &r) in rows.iter().enumerate() {
                        values[p * k + slot] = col[r] - mean;
                    }
                }
                AttributeKind::Nominal(domain) => {
                    numeric.push(false);
                    count_offset.push(count_len);
                    count_len += domain.len();
                    for (p, &r) in rows.iter().enumerate() {
                        values[p * k + slot] = col[r];
                    }
                }
            }
        }
        let mut frame = NodeFrame {
            table,
            rows,
            attrs,
            weight,
            values,
            numeric,
            count_offset,
            count_len,
            totals: Accumulator::new(k, count_len),
        };
        let mut totals = Accumulator::new(k, count_len);
        for p in 0..rows.len() {
            frame.add(&mut totals, p);
        }
        frame.totals = totals;
        frame
    }

    fn empty_accumulator(&self) -> Accumulator {
        Accumulator::new(self.attrs.len(), self.count_len)
    }

    #[inline]
    fn add(&self, acc: &mut Accumulator, p: usize) {
        let k = self.attrs.len();
        let row = &self.values[p * k..(p + 1) * k];
        acc.size += 1;
        for (slot, &v) in row.iter().enumerate() {
            if self.numeric[slot] {
                acc.sum[slot] += v;
                acc.sum_sq[slot] += v * v;
            } else {
                acc.counts[self.count_offset[slot] + v as usize] += 1;
            }
        }
    }

    /// `|S|·impu(S)` for the accumulated multiset `S`.
    fn scatter(&self, acc: &Accumulator) -> f64 {
        if acc.size == 0 {
            return 0.0;
        }
        let size = acc.size as f64;
        let mut total = 0.0;
        for slot in 0..self.attrs.len() {
            let s = if self.numeric[slot] {
                (acc.sum_sq[slot] - acc.sum[slot] * acc.sum[slot] / size).max(0.0)
            } else {
                let (lo, hi) = self.count_block(slot);
                let sq: usize = acc.counts[lo..hi].iter().map(|&c| c * c).sum();
                (size - sq as f64 / size).max(0.0)
            };
            total += s * self.weight[slot];
        }
        total
    }

    /// Scatter of the complement `totals − acc`.
    fn complement_scatter(&self, acc: &Accumulator) -> f64 {
        let size = (self.totals.size - acc.size) as f64;
        if size == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for slot in 0..self.attrs.len() {
            let s = if self.numeric[slot] {
                let sum = self.totals.sum[slot] - acc.sum[slot];
                let sum_sq = self.totals.sum_sq[slot] - acc.sum_sq[slot];
                (sum_sq - sum * sum / size).max(0.0)
            } else {
                let (lo, hi) = self.count_block(slot);
                let sq: usize = self.totals.counts[lo..hi]
                    .iter()
                    .zip(&acc.counts[lo..hi])
                    .map(|(&t, &a)| (t - a) * (t - a))
                    .sum();
                (size - sq as f64 / size).max(0.0)
            };
            total += s * self.weight[slot];
        }
        total
    }

    fn count_block(&self, slot: usize) -> (usize, usize) {
        let i = self.attrs[slot];
        let len = match &self.table.attribute(i).kind {
            AttributeKind::Nominal(domain) => domain.len(),
            AttributeKind::Numeric => 0,
        };
        (self.count_offset[slot], self.count_offset[slot] + len)
    }

    fn raw(&self, p: usize, attr: usize) -> f64 {
        self.table.value(self.rows[p], attr)
    }
}

/// Best split of `rows` among the candidate tests drawn by `policy`, or `None`
/// when no candidate improves the heuristic beyond zero.
pub fn best_test<R: Rng + ?Sized>(
    table: &FeatureTable,
    rows: &[usize],
    policy: &SplitSearchPolicy,
    stats: &AttributeStats,
    rng: &mut R,
) -> Option<Split> {
    if rows.len() < 2 {
        return None;
    }
    let eligible = eligible_attributes(stats);
    if eligible.is_empty() {
        return None;
    }
    let candidates = candidate_attributes(&eligible, policy.subset_size.max(1), rng);
    let frame = NodeFrame::new(table, rows, stats, eligible);
    let parent = frame.scatter(&frame.totals);
    if parent <= 0.0 {
        return None;
    }
    let margin = TIE_TOLERANCE * parent;

    let mut best: Option<(Test, f64)> = None;
    let mut best_h = 0.0;
    let mut consider = |test: Test, h: f64| {
        if h > best_h + margin {
            best_h = h;
            best = Some((test, h));
        }
    };

    let mut left = frame.empty_accumulator();
    for &attr in &candidates {
        match (&table.attribute(attr).kind, policy.thresholds) {
            (AttributeKind::Numeric, ThresholdMode::AllThresholds) => {
                let mut order: Vec<usize> = (0..rows.len()).collect();
                order.sort_by(|&a, &b| frame.raw(a, attr).total_cmp(&frame.raw(b, attr)));
                left.clear();
                for w in 0..order.len() - 1 {
                    frame.add(&mut left, order[w]);
                    let lo = frame.raw(order[w], attr);
                    let hi = frame.raw(order[w + 1], attr);
                    if lo < hi {
                        let h = parent - frame.scatter(&left) - frame.complement_scatter(&left);
                        consider(
                            Test::Threshold {
                                attribute: attr,
                                threshold: midpoint(lo, hi),
                            },
                            h,
                        );
                    }
                }
            }
            (AttributeKind::Numeric, ThresholdMode::OneRandomThreshold) => {
                let (lo, hi) = (0..rows.len())
                    .map(|p| frame.raw(p, attr))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                        (a.min(v), b.max(v))
                    });
                if lo >= hi {
                    continue;
                }
                let threshold = draw_open(rng, lo, hi);
                let test = Test::Threshold {
                    attribute: attr,
                    threshold,
                };
                left.clear();
                for p in 0..rows.len() {
                    if test.accepts(frame.raw(p, attr)) {
                        frame.add(&mut left, p);
                    }
                }
                let h = parent - frame.scatter(&left) - frame.complement_scatter(&left);
                consider(test, h);
            }
            (AttributeKind::Nominal(domain), mode) => {
                let mut counts = vec![0usize; domain.len()];
                for p in 0..rows.len() {
                    counts[frame.raw(p, attr) as usize] += 1;
                }
                let present: Vec<usize> = (0..domain.len()).filter(|&c| counts[c] > 0).collect();
                if present.len() < 2 {
                    continue;
                }
                let categories = match mode {
                    ThresholdMode::AllThresholds => present,
                    ThresholdMode::OneRandomThreshold => {
                        vec![present[rng.gen_range(0..present.len())]]
                    }
                };
                for category in categories {
                    let test = Test::Category {
                        attribute: attr,
                        category,
                    };
                    left.clear();
                    for p in 0..rows.len() {
                        if test.accepts(frame.raw(p, attr)) {
                            frame.add(&mut left, p);
                        }
                    }
                    let h = parent - frame.scatter(&left) - frame.complement_scatter(&left);
                    consider(test, h);
                }
            }
        }
    }

    let (test, h_star) = best?;
    let col = table.column(test.attribute());
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| test.accepts(col[r]));
    Some(Split {
        test,
        h_star,
        yes,
        no,
    })
}

/// Midpoint that always separates `lo < hi`, even for adjacent floats.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Uniform draw strictly inside `(lo, hi)`; falls back to the midpoint if the
/// interval holds no representable interior point.
fn draw_open<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    for _ in 0..16 {
        let t = rng.gen_range(lo..hi);
        if t > lo && t < hi {
            return t;
        }
    }
    midpoint(lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal {
        test: Test,
        h_star: f64,
        yes: usize,
        no: usize,
    },
    Leaf {
        prototype: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub n_reached: usize,
    pub kind: NodeKind,
}

/// A binary tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from an explicit arena (node 0 is the root). Child
    /// indices must point forward and every node except the root must have
    /// exactly one parent.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Tree, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut parents = vec![0usize; nodes.len()];
        for (idx, node) in nodes.iter().enumerate() {
            if let NodeKind::Internal { yes, no, .. } = node.kind {
                for child in [yes, no] {
                    if child <= idx || child >= nodes.len() {
                        return Err(format!("node {idx} has invalid child {child}"));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err("nodes do not form a single tree".into());
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// `(test, h_star, n_reached)` for every internal node.
    pub fn internal_nodes(&self) -> impl Iterator<Item = (&Test, f64, usize)> + '_ {
        self.nodes.iter().filter_map(|node| match &node.kind {
            NodeKind::Internal { test, h_star, .. } => Some((test, *h_star, node.n_reached)),
            NodeKind::Leaf { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, d)) = stack.pop() {
            deepest = deepest.max(d);
            if let NodeKind::Internal { yes, no, .. } = self.nodes[idx].kind {
                stack.push((yes, d + 1));
                stack.push((no, d + 1));
            }
        }
        deepest
    }

    /// Index of the leaf `x` is routed to.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        self.leaf_index_by(|attr| x[attr])
    }

    /// Leaf reached when attribute values are supplied by `value`.
    pub fn leaf_index_by(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx].kind {
                NodeKind::Internal { test, yes, no, .. } => {
                    idx = if test.accepts(value(test.attribute())) {
                        *yes
                    } else {
                        *no
                    };
                }
                NodeKind::Leaf { .. } => return idx,
            }
        }
    }

    pub fn prototype(&self, leaf: usize) -> &[f64] {
        match &self.nodes[leaf].kind {
            NodeKind::Leaf { prototype } => prototype,
            NodeKind::Internal { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Prototype of the leaf `x` falls into.
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        self.prototype(self.leaf_index(x))
    }

    /// Wraps the tree for nested JSON serialization.
    pub fn nested(&self) -> NestedTree<'_> {
        NestedTree {
            tree: self,
            index: 0,
        }
    }
}

/// Serializes a subtree as nested objects.
pub struct NestedTree<'a> {
    tree: &'a Tree,
    index: usize,
}

impl Serialize for NestedTree<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let node = &self.tree.nodes[self.index];
        match &node.kind {
            NodeKind::Internal {
                test,
                h_star,
                yes,
                no,
            } => {
                let mut s = serializer.serialize_struct("Internal", 5)?;
                s.serialize_field("n_reached", &node.n_reached)?;
                s.serialize_field("test", test)?;
                s.serialize_field("h_star", h_star)?;
                s.serialize_field(
                    "yes",
                    &NestedTree {
                        tree: self.tree,
                        index: *yes,
                    },
                )?;
                s.serialize_field(
                    "no",
                    &NestedTree {
                        tree: self.tree,
                        index: *no,
                    },
                )?;
                s.end()
            }
            NodeKind::Leaf { prototype } => {
                let mut s = serializer.serialize_struct("Leaf", 2)?;
                s.serialize_field("n_reached", &node.n_reached)?;
                s.serialize_field("prototype", prototype)?;
                s.end()
            }
        }
    }
}

/// Means of numeric attributes and modes (lowest index on ties) of nominal
/// ones over the multiset `rows`.
pub fn prototype(table: &FeatureTable, rows: &[usize]) -> Vec<f64> {
    let count = rows.len() as f64;
    (0..table.n())
        .map(|i| {
            let col = table.column(i);
            match &table.attribute(i).kind {
                AttributeKind::Numeric => rows.iter().map(|&r| col[r]).sum::<f64>() / count,
                AttributeKind::Nominal(domain) => {
                    let mut counts = vec![0usize; domain.len()];
                    for &r in rows {
                        counts[col[r] as usize] += 1;
                    }
                    let mut mode = 0;
                    for (c, &k) in counts.iter().enumerate() {
                        if k > counts[mode] {
                            mode = c;
                        }
                    }
                    mode as f64
                }
            }
        })
        .collect()
}

/// Grows a fully developed tree on the multiset `rows`.
///
/// Nodes are expanded depth-first, "yes" branch first, so the random stream
/// is consumed in a fixed order.
pub fn grow_tree<R: Rng + ?Sized>(
    table: &FeatureTable,
    rows: Vec<usize>,
    policy: &SplitSearchPolicy,
    stats: &AttributeStats,
    rng: &mut R,
) -> Tree {
    assert!(!rows.is_empty(), "cannot grow a tree on an empty row set");
    let mut nodes = vec![placeholder()];
    let mut work = vec![(0usize, rows)];
    while let Some((idx, rows)) = work.pop() {
        let n_reached = rows.len();
        match best_test(table, &rows, policy, stats, rng) {
            Some(split) => {
                let yes = nodes.len();
                let no = yes + 1;
                nodes.push(placeholder());
                nodes.push(placeholder());
                nodes[idx] = Node {
                    n_reached,
                    kind: NodeKind::Internal {
                        test: split.test,
                        h_star: split.h_star,
                        yes,
                        no,
                    },
                };
                work.push((no, split.no));
                work.push((yes, split.yes));
            }
            None => {
                nodes[idx] = Node {
                    n_reached,
                    kind: NodeKind::Leaf {
                        prototype: prototype(table, &rows),
                    },
                };
            }
        }
    }
    Tree { nodes }
}

fn placeholder() -> Node {
    Node {
        n_reached: 0,
        kind: NodeKind::Leaf {
            prototype: Vec::new(),
        },
    }
}
