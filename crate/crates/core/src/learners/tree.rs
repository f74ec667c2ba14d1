//! CART classification tree with Gini impurity.
//!
//! Numeric splits test `x < t` at midpoints between consecutive distinct
//! values; categorical splits test `x == level`. Ties in gain go to the lower
//! feature index, then the lower threshold or level code.

use serde::{Deserialize, Serialize};

use super::ClassProbs;
use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeHyper {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeHyper {
    fn default() -> Self {
        TreeHyper {
            max_depth: 3,
            min_leaf: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTest {
    LessThan(f64),
    Equals(u32),
}

impl SplitTest {
    pub fn goes_left(&self, value: f64) -> bool {
        match *self {
            SplitTest::LessThan(t) => value < t,
            SplitTest::Equals(code) => value as u32 == code,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Class counts aligned with [`TreeModel::class_ids`].
    Leaf { counts: Vec<usize> },
    Split {
        feature: usize,
        test: SplitTest,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub class_ids: Vec<usize>,
    pub nodes: Vec<Node>,
    pub hyper: TreeHyper,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub test: SplitTest,
    pub gain: f64,
}

const GAIN_EPS: f64 = 1e-12;

/// Best split of `samples` (each `(row, local class)`), or `None` when no
/// split has strictly positive gain with both sides at least `min_leaf`.
pub fn best_split(
    rows: &[&[f64]],
    y: &[usize],
    n_classes: usize,
    kinds: &[FeatureKind],
    min_leaf: usize,
) -> Option<Split> {
    let n = y.len();
    let min_leaf = min_leaf.max(1);
    if n < 2 * min_leaf {
        return None;
    }
    let mut parent = vec![0usize; n_classes];
    for &c in y {
        parent[c] += 1;
    }
    let g_parent = gini(&parent);
    if g_parent == 0.0 {
        return None;
    }
    let nf = n as f64;
    let gain_of = |left: &[usize], nl: usize| {
        let right: Vec<usize> = parent.iter().zip(left).map(|(p, l)| p - l).collect();
        let nr = n - nl;
        g_parent - (nl as f64 / nf) * gini(left) - (nr as f64 / nf) * gini(&right)
    };
    let mut best: Option<Split> = None;
    let mut consider = |feature: usize, test: SplitTest, gain: f64| {
        if gain > GAIN_EPS && best.is_none_or(|b| gain > b.gain + GAIN_EPS) {
            best = Some(Split { feature, test, gain });
        }
    };
    for (j, kind) in kinds.iter().enumerate() {
        match kind {
            FeatureKind::Numeric => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| rows[a][j].total_cmp(&rows[b][j]));
                let mut left = vec![0usize; n_classes];
                for pos in 0..n - 1 {
                    left[y[order[pos]]] += 1;
                    let a = rows[order[pos]][j];
                    let b = rows[order[pos + 1]][j];
                    let nl = pos + 1;
                    if a == b || nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    let mut t = a + (b - a) / 2.0;
                    if t <= a {
                        t = b;
                    }
                    consider(j, SplitTest::LessThan(t), gain_of(&left, nl));
                }
            }
            FeatureKind::Categorical => {
                let mut codes: Vec<u32> = rows.iter().map(|r| r[j] as u32).collect();
                codes.sort_unstable();
                codes.dedup();
                if codes.len() < 2 {
                    continue;
                }
                for code in codes {
                    let mut left = vec![0usize; n_classes];
                    let mut nl = 0;
                    for (r, &c) in rows.iter().zip(y) {
                        if r[j] as u32 == code {
                            left[c] += 1;
                            nl += 1;
                        }
                    }
                    if nl < min_leaf || n - nl < min_leaf {
                        continue;
                    }
                    consider(j, SplitTest::Equals(code), gain_of(&left, nl));
                }
            }
        }
    }
    best
}

pub fn dt_fit(ds: &Dataset, members: &[usize], hyper: &TreeHyper) -> Result<TreeModel> {
    if members.is_empty() {
        return Err(Error::Fit("decision tree on an empty member set".into()));
    }
    let mut class_ids: Vec<usize> = members.iter().map(|&i| ds.label(i)).collect();
    class_ids.sort_unstable();
    class_ids.dedup();
    let kinds = ds.kinds();
    let local = |i: usize| class_ids.binary_search(&ds.label(i)).expect("class present");
    let mut model = TreeModel {
        class_ids: class_ids.clone(),
        nodes: Vec::new(),
        hyper: *hyper,
    };
    // (node slot, samples, depth)
    let mut pending = vec![(0usize, members.to_vec(), 0usize)];
    model.nodes.push(Node::Leaf { counts: Vec::new() });
    while let Some((slot, samples, depth)) = pending.pop() {
        let rows: Vec<&[f64]> = samples.iter().map(|&i| ds.row(i)).collect();
        let y: Vec<usize> = samples.iter().map(|&i| local(i)).collect();
        let split = (depth < hyper.max_depth)
            .then(|| best_split(&rows, &y, class_ids.len(), &kinds, hyper.min_leaf))
            .flatten();
        match split {
            None => {
                let mut counts = vec![0usize; class_ids.len()];
                for &c in &y {
                    counts[c] += 1;
                }
                model.nodes[slot] = Node::Leaf { counts };
            }
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = samples
                    .iter()
                    .partition(|&&i| s.test.goes_left(ds.row(i)[s.feature]));
                let left = model.nodes.len();
                let right = left + 1;
                model.nodes.push(Node::Leaf { counts: Vec::new() });
                model.nodes.push(Node::Leaf { counts: Vec::new() });
                model.nodes[slot] = Node::Split {
                    feature: s.feature,
                    test: s.test,
                    left,
                    right,
                };
                pending.push((right, r, depth + 1));
                pending.push((left, l, depth + 1));
            }
        }
    }
    Ok(model)
}

impl TreeModel {
    fn leaf(&self, row: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    test,
                    left,
                    right,
                } => at = if test.goes_left(row[*feature]) { *left } else { *right },
            }
        }
    }

    /// Majority class at the reached leaf; ties go to the lowest class id.
    pub fn predict(&self, row: &[f64]) -> usize {
        let counts = self.leaf(row);
        let mut best = 0;
        for (c, &v) in counts.iter().enumerate() {
            if v > counts[best] {
                best = c;
            }
        }
        self.class_ids[best]
    }

    pub fn predict_proba(&self, row: &[f64]) -> ClassProbs {
        let counts = self.leaf(row);
        let total: usize = counts.iter().sum();
        ClassProbs {
            classes: self.class_ids.clone(),
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            unseen_level: false,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { counts } => Some(counts.iter().sum()),
                Node::Split { .. } => None,
            })
            .collect()
    }
}

pub fn dt_predict(model: &TreeModel, row: &[f64]) -> usize {
    model.predict(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_d(xs: &[f64], labels: &[usize]) -> Dataset {
        Dataset::from_numeric(xs.iter().map(|&x| vec![x]).collect(), labels.to_vec()).unwrap()
    }

    #[test]
    fn threshold_lands_between_classes() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let ds = one_d(&xs, &labels);
        let all: Vec<usize> = (0..10).collect();
        let model = dt_fit(&ds, &all, &TreeHyper::default()).unwrap();
        match model.nodes[0] {
            Node::Split {
                test: SplitTest::LessThan(t),
                ..
            } => assert!(t > 4.0 && t < 5.0, "threshold {t}"),
            ref other => panic!("expected split, got {other:?}"),
        }
        for i in 0..10 {
            assert_eq!(model.predict(ds.row(i)), labels[i]);
        }
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let ds = one_d(&[0.0, 1.0, 2.0], &[1, 1, 1]);
        let model = dt_fit(&ds, &[0, 1, 2], &TreeHyper::default()).unwrap();
        assert_eq!(model.nodes.len(), 1);
        assert_eq!(model.predict(&[7.0]), 1);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert!((gini(&[5, 5]) - 0.5).abs() < 1e-15);
        assert!((gini(&[1, 1, 1]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gain_ties_prefer_lower_feature() {
        // both features separate the classes identically
        let ds = Dataset::from_numeric(
            vec![vec![0.0, 10.0], vec![1.0, 11.0], vec![2.0, 12.0], vec![3.0, 13.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let model = dt_fit(&ds, &[0, 1, 2, 3], &TreeHyper::default()).unwrap();
        assert!(matches!(model.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn categorical_equality_split() {
        use crate::data::{Column, FeatureSchema};
        let schema = FeatureSchema::new(vec![Column::categorical("c")], "y", None).unwrap();
        let ds = Dataset::from_parts(
            schema,
            vec![vec![0.0], vec![1.0], vec![2.0], vec![1.0]],
            vec![vec!["a".into(), "b".into(), "c".into()]],
            vec![0, 1, 0, 1],
            vec!["0".into(), "1".into()],
            None,
        )
        .unwrap();
        let model = dt_fit(&ds, &[0, 1, 2, 3], &TreeHyper::default()).unwrap();
        assert!(matches!(
            model.nodes[0],
            Node::Split {
                test: SplitTest::Equals(1),
                ..
            }
        ));
        for i in 0..4 {
            assert_eq!(model.predict(ds.row(i)), ds.label(i));
        }
    }

    /// Exhaustive scan over every feature and every midpoint.
    fn oracle_best_gain(rows: &[Vec<f64>], y: &[usize], k: usize, min_leaf: usize) -> f64 {
        let n = y.len();
        let mut parent = vec![0; k];
        y.iter().for_each(|&c| parent[c] += 1);
        let mut best = 0.0f64;
        for j in 0..rows[0].len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let mut l = vec![0; k];
                let mut r = vec![0; k];
                for (row, &c) in rows.iter().zip(y) {
                    if row[j] < t {
                        l[c] += 1
                    } else {
                        r[c] += 1
                    }
                }
                let nl: usize = l.iter().sum();
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let g = gini(&parent)
                    - nl as f64 / n as f64 * gini(&l)
                    - (n - nl) as f64 / n as f64 * gini(&r);
                best = best.max(g);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn split_search_matches_exhaustive_scan(
            data in prop::collection::vec((0i32..8, 0i32..8, 0usize..3), 4..30),
            min_leaf in 1usize..4,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|&(a, b, _)| vec![f64::from(a), f64::from(b)]).collect();
            let y: Vec<usize> = data.iter().map(|d| d.2).collect();
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let kinds = [FeatureKind::Numeric, FeatureKind::Numeric];
            let found = best_split(&refs, &y, 3, &kinds, min_leaf);
            let oracle = oracle_best_gain(&rows, &y, 3, min_leaf);
            match found {
                Some(s) => prop_assert!((s.gain - oracle).abs() < 1e-9),
                None => prop_assert!(oracle <= 1e-12),
            }
        }

        #[test]
        fn fitted_tree_respects_limits(
            data in prop::collection::vec((0i32..20, 0i32..20, 0usize..3), 2..60),
            max_depth in 0usize..5,
            min_leaf in 1usize..6,
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|&(a, b, _)| vec![f64::from(a), f64::from(b)]).collect();
            let y: Vec<usize> = data.iter().map(|d| d.2).collect();
            let ds = Dataset::from_numeric(rows, y).unwrap();
            let all: Vec<usize> = (0..ds.n()).collect();
            let hyper = TreeHyper { max_depth, min_leaf };
            let model = dt_fit(&ds, &all, &hyper).unwrap();
            prop_assert!(model.depth() <= max_depth);
            let sizes = model.leaf_sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), ds.n());
            if model.nodes.len() > 1 {
                prop_assert!(sizes.iter().all(|&s| s >= min_leaf));
            }
            prop_assert!(sizes.iter().all(|&s| s > 0));
        }
    }
}
