//! Iterated SVM splitting for cohorts that a single hyperplane cannot
//! separate.
//!
//! A group whose majority label reaches the purity threshold becomes a leaf.
//! Otherwise an SVM is trained on the group and its members are routed by
//! the sign of the decision value (`>= 0` goes left), and both sides are
//! split again. Leaves are summarized by the mean and spread of their
//! majority-labeled members.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::svm::{self, dot, LabeledVector, SvmConfig, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Inclusive: a group with purity exactly at the threshold stops.
    pub purity_threshold: f64,
    pub min_group_size: usize,
    pub max_depth: usize,
    pub svm: SvmConfig,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            purity_threshold: 0.8,
            min_group_size: 3,
            max_depth: 16,
            svm: SvmConfig::default(),
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.purity_threshold > 0.5 && self.purity_threshold <= 1.0) {
            return Err(Error::usage(format!(
                "purity threshold must lie in (0.5, 1], got {}",
                self.purity_threshold
            )));
        }
        if self.min_group_size == 0 {
            return Err(Error::usage("minimum group size must be positive"));
        }
        if self.max_depth == 0 {
            return Err(Error::usage("maximum depth must be positive"));
        }
        self.svm.validate()
    }
}

/// Why a leaf stopped splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafStatus {
    PureEnough,
    TooSmall,
    /// The trained hyperplane put every member on one side.
    Unsplittable,
    DepthCapped,
}

impl LeafStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LeafStatus::PureEnough => "pure_enough",
            LeafStatus::TooSmall => "too_small",
            LeafStatus::Unsplittable => "unsplittable",
            LeafStatus::DepthCapped => "depth_capped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Purity {
    pub label: Label,
    pub fraction: f64,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSummary {
    pub center: Vec<f64>,
    /// Population standard deviation per component.
    pub stdevs: Vec<f64>,
    /// Euclidean norm of `stdevs`.
    pub radius: f64,
    pub max_member_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub indices: Vec<usize>,
    pub majority_label: Label,
    pub purity: f64,
    pub summary: SubgroupSummary,
    pub status: LeafStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitTree {
    Node {
        model: SvmModel,
        /// Decision value `>= 0`.
        left: Box<SplitTree>,
        right: Box<SplitTree>,
    },
    Leaf(Leaf),
}

impl SplitTree {
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match self {
            SplitTree::Leaf(leaf) => out.push(leaf),
            SplitTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            SplitTree::Leaf(_) => 0,
            SplitTree::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Leaf reached by routing `x`.
    pub fn route(&self, x: &[f64]) -> Result<&Leaf> {
        let mut node = self;
        loop {
            match node {
                SplitTree::Leaf(leaf) => {
                    if leaf.summary.center.len() != x.len() {
                        return Err(Error::usage(format!(
                            "input has dimension {} but the tree expects {}",
                            x.len(),
                            leaf.summary.center.len()
                        )));
                    }
                    return Ok(leaf);
                }
                SplitTree::Node { model, left, right } => {
                    node = if svm::decision_value(model, x)? >= 0.0 { left } else { right };
                }
            }
        }
    }
}

/// Majority label and its share. An even split reports the case label with
/// `tie` set.
pub fn purity(group: &[LabeledVector]) -> Result<Purity> {
    if group.is_empty() {
        return Err(Error::usage("purity of an empty group"));
    }
    let cases = group.iter().filter(|v| v.y == Label::Case).count();
    let controls = group.len() - cases;
    let (label, count) = if cases >= controls {
        (Label::Case, cases)
    } else {
        (Label::Control, controls)
    };
    Ok(Purity {
        label,
        fraction: count as f64 / group.len() as f64,
        tie: cases == controls,
    })
}

/// Center and spread of the members carrying `majority_label`; other members
/// are ignored.
pub fn summarize(group: &[LabeledVector], majority_label: Label) -> Result<SubgroupSummary> {
    let members: Vec<&[f64]> = group
        .iter()
        .filter(|v| v.y == majority_label)
        .map(|v| v.x.as_slice())
        .collect();
    let first = members
        .first()
        .ok_or_else(|| Error::usage(format!("group has no {majority_label} members")))?;
    let n = first.len();
    if members.iter().any(|x| x.len() != n) {
        return Err(Error::schema("group members have inconsistent dimensions"));
    }
    let m = members.len() as f64;
    let mut center = vec![0.0; n];
    for x in &members {
        for (c, v) in center.iter_mut().zip(x.iter()) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= m);
    let mut var = vec![0.0; n];
    for x in &members {
        for ((s, v), c) in var.iter_mut().zip(x.iter()).zip(&center) {
            *s += (v - c) * (v - c);
        }
    }
    let stdevs: Vec<f64> = var.iter().map(|s| (s / m).sqrt()).collect();
    let radius = svm::norm(&stdevs);
    let max_member_distance = members
        .iter()
        .map(|x| distance(x, &center))
        .fold(0.0, f64::max);
    Ok(SubgroupSummary {
        center,
        stdevs,
        radius,
        max_member_distance,
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    dot(&d, &d).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeRoute {
    pub label: Label,
    pub purity: f64,
    pub distance_to_center: f64,
    pub status: LeafStatus,
}

pub fn classify_by_tree(tree: &SplitTree, x: &[f64]) -> Result<TreeRoute> {
    let leaf = tree.route(x)?;
    Ok(TreeRoute {
        label: leaf.majority_label,
        purity: leaf.purity,
        distance_to_center: distance(x, &leaf.summary.center),
        status: leaf.status,
    })
}

/// Builds the split tree. Sibling subtrees are built in parallel; each
/// node's SVM seed depends only on the root seed and the node's path, so the
/// result is deterministic.
pub fn split_recursive(data: &[LabeledVector], config: &SplitConfig) -> Result<SplitTree> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::usage("cannot split an empty cohort"));
    }
    let n = data[0].x.len();
    if let Some(i) = data.iter().position(|v| v.x.len() != n) {
        return Err(Error::schema(format!(
            "vector {i} has dimension {} but expected {n}",
            data[i].x.len()
        )));
    }
    let indices: Vec<usize> = (0..data.len()).collect();
    build(data, indices, config, 0, config.svm.seed)
}

fn build(
    data: &[LabeledVector],
    indices: Vec<usize>,
    config: &SplitConfig,
    depth: usize,
    seed: u64,
) -> Result<SplitTree> {
    let group: Vec<LabeledVector> = indices.iter().map(|&i| data[i].clone()).collect();
    let p = purity(&group)?;
    let stop = if p.fraction >= config.purity_threshold {
        Some(LeafStatus::PureEnough)
    } else if group.len() < config.min_group_size {
        Some(LeafStatus::TooSmall)
    } else if depth >= config.max_depth {
        Some(LeafStatus::DepthCapped)
    } else {
        None
    };
    if let Some(status) = stop {
        return leaf(&group, indices, p, status);
    }

    let svm_config = SvmConfig {
        seed,
        ..config.svm
    };
    let (model, _diagnostics) = svm::train(&group, &svm_config)?;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (&i, v) in indices.iter().zip(&group) {
        if svm::decision_value(&model, &v.x)? >= 0.0 {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    if left.is_empty() || right.is_empty() {
        return leaf(&group, indices, p, LeafStatus::Unsplittable);
    }
    let (l, r) = rayon::join(
        || build(data, left, config, depth + 1, child_seed(seed, 0)),
        || build(data, right, config, depth + 1, child_seed(seed, 1)),
    );
    Ok(SplitTree::Node {
        model,
        left: Box::new(l?),
        right: Box::new(r?),
    })
}

fn leaf(group: &[LabeledVector], indices: Vec<usize>, p: Purity, status: LeafStatus) -> Result<SplitTree> {
    Ok(SplitTree::Leaf(Leaf {
        indices,
        majority_label: p.label,
        purity: p.fraction,
        summary: summarize(group, p.label)?,
        status,
    }))
}

/// SplitMix64 finalizer over the parent seed and branch.
fn child_seed(parent: u64, branch: u64) -> u64 {
    let mut z = parent
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(branch.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(x: &[f64], y: i8) -> LabeledVector {
        LabeledVector::new(x.to_vec(), if y > 0 { Label::Case } else { Label::Control })
    }

    fn labeled(cases: usize, total: usize) -> Vec<LabeledVector> {
        (0..total)
            .map(|i| lv(&[i as f64], if i < cases { 1 } else { -1 }))
            .collect()
    }

    #[test]
    fn purity_examples() {
        let p = purity(&labeled(4, 4)).unwrap();
        assert_eq!((p.label, p.fraction, p.tie), (Label::Case, 1.0, false));
        let p = purity(&labeled(17, 20)).unwrap();
        assert_eq!((p.label, p.fraction), (Label::Case, 0.85));
        let p = purity(&labeled(10, 20)).unwrap();
        assert_eq!((p.label, p.fraction, p.tie), (Label::Case, 0.5, true));
        let p = purity(&labeled(1, 5)).unwrap();
        assert_eq!((p.label, p.fraction), (Label::Control, 0.8));
        assert!(purity(&[]).is_err());
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[lv(&[3.0, -1.0], 1)], Label::Case).unwrap();
        assert_eq!(s.center, vec![3.0, -1.0]);
        assert_eq!(s.radius, 0.0);
        assert_eq!(s.max_member_distance, 0.0);

        let pair = [lv(&[0.0, 0.0], 1), lv(&[2.0, 0.0], 1)];
        let s = summarize(&pair, Label::Case).unwrap();
        assert_eq!(s.center, vec![1.0, 0.0]);
        assert_eq!(s.stdevs, vec![1.0, 0.0]);
        assert_eq!(s.radius, 1.0);
        assert_eq!(s.max_member_distance, 1.0);

        let mixed = [lv(&[0.0, 0.0], 1), lv(&[9.0, 9.0], -1), lv(&[2.0, 0.0], 1)];
        assert_eq!(summarize(&mixed, Label::Case).unwrap(), s);
        assert!(summarize(&pair, Label::Control).is_err());
    }

    #[test]
    fn pure_input_is_one_leaf() {
        // 9 of 10 cases
        let data = labeled(9, 10);
        let tree = split_recursive(&data, &SplitConfig::default()).unwrap();
        match &tree {
            SplitTree::Leaf(l) => {
                assert_eq!(l.status, LeafStatus::PureEnough);
                assert_eq!(l.indices.len(), 10);
                assert_eq!(l.purity, 0.9);
            }
            other => panic!("expected leaf, got {other:?}"),
        }
    }

    #[test]
    fn worked_example_splits_in_two() {
        let data = vec![lv(&[0.0, 2.0], 1), lv(&[0.0, -2.0], -1)];
        let cfg = SplitConfig {
            min_group_size: 2,
            svm: SvmConfig::hard_margin(),
            ..Default::default()
        };
        let tree = split_recursive(&data, &cfg).unwrap();
        let leaves = tree.leaves();
        assert_eq!(leaves.len(), 2);
        assert!(leaves.iter().all(|l| l.status == LeafStatus::PureEnough));
        let r = classify_by_tree(&tree, &[0.0, 3.0]).unwrap();
        assert_eq!(r.label, Label::Case);
        let r = classify_by_tree(&tree, &[0.0, -2.0]).unwrap();
        assert_eq!(r.label, Label::Control);
        assert_eq!(r.distance_to_center, 0.0);
        assert!(classify_by_tree(&tree, &[0.0]).is_err());
    }

    #[test]
    fn contradictory_duplicates_are_unsplittable() {
        let data: Vec<_> = (0..6).map(|i| lv(&[1.0, 2.0], if i % 2 == 0 { 1 } else { -1 })).collect();
        let tree = split_recursive(&data, &SplitConfig::default()).unwrap();
        match tree {
            SplitTree::Leaf(l) => assert_eq!(l.status, LeafStatus::Unsplittable),
            other => panic!("expected leaf, got {other:?}"),
        }
    }

    #[test]
    fn small_groups_stop() {
        let data = vec![lv(&[0.0], 1), lv(&[1.0], -1)];
        let tree = split_recursive(&data, &SplitConfig::default()).unwrap();
        assert!(matches!(tree, SplitTree::Leaf(Leaf { status: LeafStatus::TooSmall, .. })));
    }

    #[test]
    fn single_leaf_tree_ignores_input() {
        let tree = split_recursive(&labeled(5, 5), &SplitConfig::default()).unwrap();
        for x in [-100.0, 0.0, 7.5] {
            assert_eq!(classify_by_tree(&tree, &[x]).unwrap().label, Label::Case);
        }
    }

    #[test]
    fn config_validation() {
        let bad = SplitConfig {
            purity_threshold: 0.5,
            ..Default::default()
        };
        assert!(split_recursive(&labeled(1, 2), &bad).is_err());
        let bad = SplitConfig {
            max_depth: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(split_recursive(&[], &SplitConfig::default()).is_err());
    }

    #[test]
    fn child_seeds_differ_by_branch() {
        assert_ne!(child_seed(7, 0), child_seed(7, 1));
        assert_eq!(child_seed(7, 0), child_seed(7, 0));
    }
}
