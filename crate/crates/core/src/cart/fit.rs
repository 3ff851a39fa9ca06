//! Tree growth and the parameter-sweep helper.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::split::best_split;
use super::{
    accuracy_score, r2_score, CartError, Criterion, Dataset, DecisionTree, FeatureColumn, Node,
    Prediction, Split, StoppingCriteria, Target,
};

/// A frontier leaf awaiting possible expansion.
struct Candidate<S> {
    slot: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Option<Split<S>>,
}

/// Fits a binary tree. Growth is best-first (expand the frontier leaf whose
/// best split has the largest impurity decrease, ties to the oldest leaf)
/// when `max_leaf_nodes` is set, plain depth-first otherwise.
pub fn fit_tree<S: Scalar>(
    data: &Dataset<S>,
    target: &Target<S>,
    criterion: Criterion,
    stopping: &StoppingCriteria,
) -> Result<DecisionTree<S>, CartError> {
    stopping.validate()?;
    let n = data.n_rows();
    if n == 0 || target.is_empty() {
        return Err(CartError::Empty);
    }
    if target.len() != n {
        return Err(CartError::LengthMismatch(target.len(), n));
    }
    match (criterion, target) {
        (Criterion::Mse, Target::Regression(_)) => {}
        (Criterion::Gini, Target::Classification { .. }) => {}
        (Criterion::Mse, _) => return Err(CartError::NonNumericTarget),
        (Criterion::Gini, _) => return Err(CartError::NonClassTarget),
    }

    let mut tree = DecisionTree {
        criterion,
        stopping: stopping.clone(),
        nodes: Vec::new(),
        feature_names: data.features.iter().map(|f| f.name.clone()).collect(),
        feature_categories: data
            .features
            .iter()
            .map(|f| match &f.column {
                FeatureColumn::Numeric(_) => Vec::new(),
                FeatureColumn::Categorical { categories, .. } => categories.clone(),
            })
            .collect(),
        classes: match target {
            Target::Regression(_) => Vec::new(),
            Target::Classification { classes, .. } => classes.clone(),
        },
    };

    let all_rows: Vec<usize> = (0..n).collect();
    tree.nodes.push(make_leaf(target, &all_rows));
    let root = candidate(data, target, criterion, stopping, n, 0, 0, all_rows)?;

    match stopping.max_leaf_nodes {
        Some(budget) => {
            let mut frontier = vec![root];
            let mut leaves = 1;
            while leaves < budget {
                let pick = frontier
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.split.is_some())
                    .max_by(|(_, a), (_, b)| {
                        let ga = a.split.as_ref().unwrap().impurity_decrease;
                        let gb = b.split.as_ref().unwrap().impurity_decrease;
                        ga.partial_cmp(&gb)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            // Oldest slot wins ties; max_by keeps the later of
                            // equals, so order by descending slot.
                            .then(b.slot.cmp(&a.slot))
                    })
                    .map(|(i, _)| i);
                let Some(i) = pick else { break };
                let cand = frontier.swap_remove(i);
                let [(ls, left), (rs, right)] = expand(&mut tree, data, target, &cand)?;
                frontier.push(candidate(data, target, criterion, stopping, n, ls, cand.depth + 1, left)?);
                frontier.push(candidate(data, target, criterion, stopping, n, rs, cand.depth + 1, right)?);
                leaves += 1;
            }
        }
        None => {
            let mut stack = vec![root];
            while let Some(cand) = stack.pop() {
                if cand.split.is_none() {
                    continue;
                }
                let [(ls, left), (rs, right)] = expand(&mut tree, data, target, &cand)?;
                let l = candidate(data, target, criterion, stopping, n, ls, cand.depth + 1, left)?;
                let r = candidate(data, target, criterion, stopping, n, rs, cand.depth + 1, right)?;
                // Pop order: left subtree is completed before the right one.
                stack.push(r);
                stack.push(l);
            }
        }
    }

    // Dense leaf ids in arena order.
    let mut next_id = 0;
    for node in &mut tree.nodes {
        if let Node::Leaf { id, .. } = node {
            *id = next_id;
            next_id += 1;
        }
    }
    Ok(tree)
}

#[allow(clippy::too_many_arguments)]
fn candidate<S: Scalar>(
    data: &Dataset<S>,
    target: &Target<S>,
    criterion: Criterion,
    stopping: &StoppingCriteria,
    n_total: usize,
    slot: usize,
    depth: usize,
    rows: Vec<usize>,
) -> Result<Candidate<S>, CartError> {
    let depth_ok = stopping.max_depth.map_or(true, |d| depth < d);
    let split = if depth_ok {
        best_split(data, target, &rows, criterion, stopping, n_total)?
    } else {
        None
    };
    Ok(Candidate { slot, rows, depth, split })
}

/// Replaces the candidate's leaf with an internal node and appends the two
/// child leaves; returns each child's arena slot with its row partition.
fn expand<S: Scalar>(
    tree: &mut DecisionTree<S>,
    data: &Dataset<S>,
    target: &Target<S>,
    cand: &Candidate<S>,
) -> Result<[(usize, Vec<usize>); 2], CartError> {
    let split = cand.split.as_ref().expect("expand requires a split");
    let (left_rows, right_rows) = partition(data, &cand.rows, &split.rule);
    debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

    let left_slot = tree.nodes.len();
    tree.nodes.push(make_leaf(target, &left_rows));
    let right_slot = tree.nodes.len();
    tree.nodes.push(make_leaf(target, &right_rows));
    tree.nodes[cand.slot] = Node::Internal {
        rule: split.rule.clone(),
        left: left_slot,
        right: right_slot,
        majority_left: left_rows.len() >= right_rows.len(),
        n: cand.rows.len(),
    };
    Ok([(left_slot, left_rows), (right_slot, right_rows)])
}

fn partition<S: Scalar>(
    data: &Dataset<S>,
    rows: &[usize],
    rule: &super::SplitRule<S>,
) -> (Vec<usize>, Vec<usize>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &r in rows {
        let goes_left = match (rule, &data.features[rule.feature()].column) {
            (super::SplitRule::Threshold { threshold, .. }, FeatureColumn::Numeric(v)) => {
                v[r] <= *threshold
            }
            (super::SplitRule::Subset { left, .. }, FeatureColumn::Categorical { codes, .. }) => {
                left.binary_search(&codes[r]).is_ok()
            }
            _ => unreachable!("rule kind matches column kind"),
        };
        if goes_left {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    (left, right)
}

fn make_leaf<S: Scalar>(target: &Target<S>, rows: &[usize]) -> Node<S> {
    match target {
        Target::Regression(y) => {
            let n = S::from_usize(rows.len());
            let mean = rows.iter().fold(S::zero(), |a, &r| a + y[r]) / n;
            Node::Leaf { id: 0, n: rows.len(), prediction: mean, class_probs: None }
        }
        Target::Classification { classes, labels } => {
            let mut counts = vec![0usize; classes.len()];
            for &r in rows {
                counts[labels[r] as usize] += 1;
            }
            // Majority class, ties to the lowest class id.
            let majority = counts
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let n = S::from_usize(rows.len());
            let probs = counts.iter().map(|&c| S::from_usize(c) / n).collect();
            Node::Leaf {
                id: 0,
                n: rows.len(),
                prediction: S::from_usize(majority),
                class_probs: Some(probs),
            }
        }
    }
}

/// One grid point of the parameter sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint<S> {
    pub max_leaf_nodes: usize,
    pub min_samples_leaf: usize,
    /// Test R² (mse criterion) or test accuracy (gini criterion).
    pub score: S,
    pub n_leaves: usize,
}

/// Stepwise grid search over `max_leaf_nodes` × `min_samples_leaf`; returns
/// every grid point plus the index of the best (highest score, first wins
/// ties in grid order).
#[allow(clippy::too_many_arguments)]
pub fn sweep<S: Scalar>(
    train: &Dataset<S>,
    train_target: &Target<S>,
    test: &Dataset<S>,
    test_target: &Target<S>,
    criterion: Criterion,
    base: &StoppingCriteria,
    max_leaf_grid: &[usize],
    min_leaf_grid: &[usize],
) -> Result<(Vec<SweepPoint<S>>, usize), CartError> {
    let mut points = Vec::new();
    for &mln in max_leaf_grid {
        for &msl in min_leaf_grid {
            let stopping = StoppingCriteria {
                max_leaf_nodes: Some(mln),
                min_samples_leaf: msl,
                ..base.clone()
            };
            let tree = fit_tree(train, train_target, criterion, &stopping)?;
            let score = score_tree(&tree, test, test_target)?;
            points.push(SweepPoint {
                max_leaf_nodes: mln,
                min_samples_leaf: msl,
                score,
                n_leaves: tree.n_leaves(),
            });
        }
    }
    if points.is_empty() {
        return Err(CartError::Empty);
    }
    let best = points
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            a.score
                .partial_cmp(&b.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(j.cmp(i))
        })
        .map(|(i, _)| i)
        .unwrap();
    Ok((points, best))
}

/// Test-set score: R² for regression trees, accuracy for classification.
pub fn score_tree<S: Scalar>(
    tree: &DecisionTree<S>,
    test: &Dataset<S>,
    test_target: &Target<S>,
) -> Result<S, CartError> {
    match test_target {
        Target::Regression(y) => {
            let mut preds = Vec::with_capacity(test.n_rows());
            for i in 0..test.n_rows() {
                match tree.predict(&test.row(i))? {
                    Prediction::Value(v) => preds.push(v),
                    Prediction::Class(_) => return Err(CartError::NonNumericTarget),
                }
            }
            r2_score(&preds, y)
        }
        Target::Classification { classes, labels } => {
            let mut preds = Vec::with_capacity(test.n_rows());
            for i in 0..test.n_rows() {
                match tree.predict(&test.row(i))? {
                    Prediction::Class(c) => preds.push(c),
                    Prediction::Value(_) => return Err(CartError::NonClassTarget),
                }
            }
            let pred_refs: Vec<&str> = preds.iter().map(|s| s.as_str()).collect();
            let actual: Vec<&str> =
                labels.iter().map(|&l| classes[l as usize].as_str()).collect();
            accuracy_score(&pred_refs, &actual)
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::super::{gini, node_mse, Value};
    use super::*;

    fn perfect_feature() -> (Dataset<f64>, Target<f64>) {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("flag", vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        (d, Target::Regression(vec![0.0, 0.0, 10.0, 10.0]))
    }

    #[test]
    fn perfect_feature_yields_two_pure_leaves() {
        let (d, t) = perfect_feature();
        let tree = fit_tree(&d, &t, Criterion::Mse, &StoppingCriteria::default()).unwrap();
        assert_eq!(tree.n_leaves(), 2);
        assert_eq!(tree.depth(), 1);
        assert_relative_eq!(tree.training_impurity(&d, &t).unwrap(), 0.0);
    }

    #[test]
    fn root_only_tree_predicts_the_mean() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", vec![1.0, 2.0, 3.0]).unwrap();
        let t = Target::Regression(vec![1.0, 2.0, 3.0]);
        let stop = StoppingCriteria { max_depth: Some(0), ..StoppingCriteria::default() };
        let tree = fit_tree(&d, &t, Criterion::Mse, &stop).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        match tree.predict(&[Value::Number(99.0)]).unwrap() {
            Prediction::Value(v) => assert_relative_eq!(v, 2.0),
            _ => panic!("regression tree"),
        }
    }

    #[test]
    fn max_leaf_nodes_caps_growth() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", (0..16).map(|i| i as f64).collect()).unwrap();
        let t = Target::Regression((0..16).map(|i| (i * i) as f64).collect());
        let stop =
            StoppingCriteria { max_leaf_nodes: Some(4), ..StoppingCriteria::default() };
        let tree = fit_tree(&d, &t, Criterion::Mse, &stop).unwrap();
        assert_eq!(tree.n_leaves(), 4);
    }

    #[test]
    fn leaf_sizes_respect_the_floor() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", (0..10).map(|i| i as f64).collect()).unwrap();
        let t = Target::Regression((0..10).map(|i| i as f64).collect());
        let stop = StoppingCriteria { min_samples_leaf: 3, ..StoppingCriteria::default() };
        let tree = fit_tree(&d, &t, Criterion::Mse, &stop).unwrap();
        for node in &tree.nodes {
            if let Node::Leaf { n, .. } = node {
                assert!(*n >= 3);
            }
        }
    }

    #[test]
    fn classification_tree_recovers_labels() {
        let mut d = Dataset::<f64>::new();
        d.add_categorical("site", &["a", "a", "b", "b"]).unwrap();
        let t = Target::classification(&["yes", "yes", "no", "no"]);
        let tree = fit_tree(&d, &t, Criterion::Gini, &StoppingCriteria::default()).unwrap();
        match tree.predict(&[Value::Category("a")]).unwrap() {
            Prediction::Class(c) => assert_eq!(c, "yes"),
            _ => panic!("classification tree"),
        }
    }

    #[test]
    fn unseen_category_routes_with_the_majority() {
        let mut d = Dataset::<f64>::new();
        d.add_categorical("site", &["a", "a", "a", "b"]).unwrap();
        let t = Target::Regression(vec![1.0, 1.0, 1.0, 9.0]);
        let tree = fit_tree(&d, &t, Criterion::Mse, &StoppingCriteria::default()).unwrap();
        // Three of four training rows sit on the "a" side.
        match tree.predict(&[Value::Category("zzz")]).unwrap() {
            Prediction::Value(v) => assert_relative_eq!(v, 1.0),
            _ => panic!("regression tree"),
        }
        match tree.predict(&[Value::Missing]).unwrap() {
            Prediction::Value(v) => assert_relative_eq!(v, 1.0),
            _ => panic!("regression tree"),
        }
    }

    #[test]
    fn leaf_assignments_agree_with_predict() {
        let (d, t) = perfect_feature();
        let tree = fit_tree(&d, &t, Criterion::Mse, &StoppingCriteria::default()).unwrap();
        let leaves = tree.leaf_assignments(&d).unwrap();
        assert_eq!(leaves[0], leaves[1]);
        assert_eq!(leaves[2], leaves[3]);
        assert_ne!(leaves[0], leaves[2]);
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (d, t) = perfect_feature();
        let tree = fit_tree(&d, &t, Criterion::Mse, &StoppingCriteria::default()).unwrap();
        let json = tree.to_json().unwrap();
        let back: DecisionTree<f64> = DecisionTree::from_json(&json).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(tree.predict(&d.row(i)).unwrap(), back.predict(&d.row(i)).unwrap());
        }
    }

    #[test]
    fn render_text_mentions_the_split() {
        let (d, t) = perfect_feature();
        let tree = fit_tree(&d, &t, Criterion::Mse, &StoppingCriteria::default()).unwrap();
        let text = tree.render_text();
        assert!(text.contains("flag <= 0.5"), "got:\n{text}");
    }

    #[test]
    fn sweep_reports_every_grid_point_and_the_best() {
        let mut train = Dataset::<f64>::new();
        train.add_numeric("x", (0..20).map(|i| i as f64).collect()).unwrap();
        let tt = Target::Regression((0..20).map(|i| (i / 5) as f64).collect());
        let (points, best) = sweep(
            &train,
            &tt,
            &train,
            &tt,
            Criterion::Mse,
            &StoppingCriteria::default(),
            &[2, 4],
            &[1, 2],
        )
        .unwrap();
        assert_eq!(points.len(), 4);
        assert!(points[best].score >= points[0].score);
    }

    #[test]
    fn impurity_helpers_match_leaf_statistics() {
        // Weighted child impurity after a fit equals the tree's training
        // impurity for a depth-1 tree.
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let y = vec![1.0, 3.0, 10.0, 14.0];
        let t = Target::Regression(y.clone());
        let tree = fit_tree(&d, &t, Criterion::Mse, &StoppingCriteria::default()).unwrap();
        let per_leaf = (node_mse(&y[..2]).unwrap() + node_mse(&y[2..]).unwrap()) / 2.0;
        assert_relative_eq!(tree.training_impurity(&d, &t).unwrap(), per_leaf);
        assert_eq!(gini::<f64>(&[0, 0]).unwrap(), 0.0);
    }
}
