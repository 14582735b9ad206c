//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use proptest::prelude::*;

use dhondtxai::trees::{tree_importance_exact, Dataset, ImportanceMode, TreeNode};

pub type Q = Ratio<i64>;

pub fn dataset(rows: &[Vec<i64>], target: &[u8]) -> Dataset {
    let names = (0..rows[0].len()).map(|i| format!("x{i}")).collect();
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    Dataset::new(names, rows, target.to_vec()).unwrap()
}

/// Small integer-valued datasets; the narrow value range forces ties.
pub fn dataset_strategy(
    max_rows: usize,
    max_features: usize,
) -> impl Strategy<Value = (Vec<Vec<i64>>, Vec<u8>)> {
    (2..=max_rows, 1..=max_features).prop_flat_map(|(n, f)| {
        (
            prop::collection::vec(prop::collection::vec(0i64..6, f), n),
            prop::collection::vec(0u8..2, n),
        )
    })
}

pub fn gini(neg: i64, pos: i64) -> Q {
    let n = neg + pos;
    if n == 0 {
        return Q::from_integer(0);
    }
    Q::from_integer(1) - Q::new(neg * neg + pos * pos, n * n)
}

pub fn gain(parent: (i64, i64), left: (i64, i64), right: (i64, i64)) -> Q {
    let n = parent.0 + parent.1;
    gini(parent.0, parent.1)
        - Q::new(left.0 + left.1, n) * gini(left.0, left.1)
        - Q::new(right.0 + right.1, n) * gini(right.0, right.1)
}

fn counts<'a>(labels: impl Iterator<Item = &'a u8>) -> (i64, i64) {
    labels.fold(
        (0, 0),
        |(n, p), &t| if t == 1 { (n, p + 1) } else { (n + 1, p) },
    )
}

/// Best root split by enumerating every (feature, midpoint) pair, keeping the
/// first maximum in feature-then-threshold order. `None` when no candidate
/// has positive gain.
pub fn exhaustive_root_split(rows: &[Vec<i64>], target: &[u8]) -> Option<(usize, f64, Q)> {
    let parent = counts(target.iter());
    let mut best: Option<(usize, f64, Q)> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<i64> = rows.iter().map(|r| r[f]).collect();
        values.sort_unstable();
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) as f64 / 2.0;
            let left = counts(
                rows.iter()
                    .zip(target)
                    .filter(|(r, _)| (r[f] as f64) <= t)
                    .map(|(_, y)| y),
            );
            let right = (parent.0 - left.0, parent.1 - left.1);
            let g = gain(parent, left, right);
            if best.as_ref().is_none_or(|b| g > b.2) {
                best = Some((f, t, g));
            }
        }
    }
    best.filter(|b| b.2 > Q::from_integer(0))
}

pub fn to_big(q: Q) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

/// Checks every split's stored gain against a recomputation from the child
/// class counts, gain non-negativity, and the per-tree identity
/// `sum(importances) == sum(split gains)`.
pub fn check_tree(tree: &TreeNode, n_features: usize) -> Result<(), String> {
    let zero = BigRational::from_integer(0.into());
    let mut total = zero.clone();
    for s in tree.splits() {
        if s.gain < zero {
            return Err(format!("negative gain {}", s.gain));
        }
        let c = |n: &TreeNode| {
            let k = n.class_counts();
            (k.negative as i64, k.positive as i64)
        };
        let expected = gain(
            (
                s.class_counts.negative as i64,
                s.class_counts.positive as i64,
            ),
            c(&s.left),
            c(&s.right),
        );
        if to_big(expected) != s.gain {
            return Err(format!("stored gain {} != recomputed {expected}", s.gain));
        }
        total += &s.gain;
    }
    let importance: BigRational =
        tree_importance_exact(tree, n_features, ImportanceMode::Unweighted)
            .into_iter()
            .fold(zero, |a, b| a + b);
    if importance != total {
        return Err(format!("importance sum {importance} != gain sum {total}"));
    }
    Ok(())
}

/// Root split found by `train_tree` compared with the exhaustive oracle.
pub fn check_root_split(tree: &TreeNode, rows: &[Vec<i64>], target: &[u8]) -> Result<(), String> {
    match (tree, exhaustive_root_split(rows, target)) {
        (TreeNode::Leaf(_), None) => Ok(()),
        (TreeNode::Split(s), Some((f, t, g))) => {
            if s.feature == f && s.threshold == t && s.gain == to_big(g) {
                Ok(())
            } else {
                Err(format!(
                    "tree split ({}, {}, {}) != oracle ({f}, {t}, {g})",
                    s.feature, s.threshold, s.gain
                ))
            }
        }
        (TreeNode::Leaf(_), Some(o)) => Err(format!("tree is a leaf, oracle split {o:?}")),
        (TreeNode::Split(s), None) => Err(format!(
            "oracle found no positive gain, tree split feature {} at {}",
            s.feature, s.threshold
        )),
    }
}
