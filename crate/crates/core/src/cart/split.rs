//! Exhaustive search for the best binary split at one node.

use crate::scalar::Scalar;

use super::{
    CartError, Criterion, Dataset, FeatureColumn, Split, SplitRule, StoppingCriteria, Target,
};

/// Split candidates explode combinatorially above this many categories, so
/// classification falls back to one-vs-rest subsets.
const SUBSET_ENUMERATION_LIMIT: usize = 12;

/// Accumulates enough target statistics to score one side of a split.
#[derive(Clone)]
enum SideStats<S> {
    Regression { n: usize, sum: S, sum_sq: S },
    Classification { n: usize, counts: Vec<usize> },
}

impl<S: Scalar> SideStats<S> {
    fn empty(target: &Target<S>) -> Self {
        match target {
            Target::Regression(_) => {
                SideStats::Regression { n: 0, sum: S::zero(), sum_sq: S::zero() }
            }
            Target::Classification { classes, .. } => {
                SideStats::Classification { n: 0, counts: vec![0; classes.len()] }
            }
        }
    }

    fn add_row(&mut self, target: &Target<S>, row: usize) {
        match (self, target) {
            (SideStats::Regression { n, sum, sum_sq }, Target::Regression(y)) => {
                *n += 1;
                *sum = *sum + y[row];
                *sum_sq = *sum_sq + y[row] * y[row];
            }
            (SideStats::Classification { n, counts }, Target::Classification { labels, .. }) => {
                *n += 1;
                counts[labels[row] as usize] += 1;
            }
            _ => unreachable!("stats kind matches target kind by construction"),
        }
    }

    fn remove_row(&mut self, target: &Target<S>, row: usize) {
        match (self, target) {
            (SideStats::Regression { n, sum, sum_sq }, Target::Regression(y)) => {
                *n -= 1;
                *sum = *sum - y[row];
                *sum_sq = *sum_sq - y[row] * y[row];
            }
            (SideStats::Classification { n, counts }, Target::Classification { labels, .. }) => {
                *n -= 1;
                counts[labels[row] as usize] -= 1;
            }
            _ => unreachable!(),
        }
    }

    fn n(&self) -> usize {
        match self {
            SideStats::Regression { n, .. } | SideStats::Classification { n, .. } => *n,
        }
    }

    /// Node impurity: population variance or Gini.
    fn impurity(&self) -> S {
        match self {
            SideStats::Regression { n, sum, sum_sq } => {
                if *n == 0 {
                    return S::zero();
                }
                let nf = S::from_usize(*n);
                let mean = *sum / nf;
                let var = *sum_sq / nf - mean * mean;
                var.max(S::zero())
            }
            SideStats::Classification { n, counts } => {
                if *n == 0 {
                    return S::zero();
                }
                let nf = S::from_usize(*n);
                let sum_sq = counts.iter().fold(S::zero(), |a, &c| {
                    let p = S::from_usize(c) / nf;
                    a + p * p
                });
                S::one() - sum_sq
            }
        }
    }
}

/// Returns the split maximizing impurity decrease at this node, or `None`
/// when no admissible split clears `min_impurity_decrease` while leaving at
/// least `leaf_floor` rows on both sides.
///
/// Tie-break: lowest feature index, then lowest threshold for numeric splits
/// and lexicographically smallest left subset for categorical ones — the
/// enumeration order below visits candidates exactly in that order and only
/// strictly better gains displace the incumbent.
pub fn best_split<S: Scalar>(
    data: &Dataset<S>,
    target: &Target<S>,
    rows: &[usize],
    criterion: Criterion,
    stopping: &StoppingCriteria,
    n_total: usize,
) -> Result<Option<Split<S>>, CartError> {
    if rows.is_empty() {
        return Err(CartError::Empty);
    }
    match (criterion, target) {
        (Criterion::Mse, Target::Regression(_)) => {}
        (Criterion::Gini, Target::Classification { .. }) => {}
        (Criterion::Mse, _) => return Err(CartError::NonNumericTarget),
        (Criterion::Gini, _) => return Err(CartError::NonClassTarget),
    }
    let floor = stopping.leaf_floor(n_total);
    if rows.len() < stopping.min_samples_split || rows.len() < 2 * floor {
        return Ok(None);
    }

    let mut parent = SideStats::empty(target);
    for &r in rows {
        parent.add_row(target, r);
    }
    let parent_impurity = parent.impurity();
    let n_node = S::from_usize(rows.len());

    let mut best: Option<Split<S>> = None;
    let mut consider = |rule: SplitRule<S>, left: &SideStats<S>, right: &SideStats<S>| {
        if left.n() < floor || right.n() < floor {
            return;
        }
        let weighted = (S::from_usize(left.n()) * left.impurity()
            + S::from_usize(right.n()) * right.impurity())
            / n_node;
        let gain = parent_impurity - weighted;
        let better = match &best {
            None => true,
            Some(b) => gain > b.impurity_decrease,
        };
        if better {
            best = Some(Split { rule, impurity_decrease: gain });
        }
    };

    for (f, feature) in data.features.iter().enumerate() {
        match &feature.column {
            FeatureColumn::Numeric(values) => {
                let mut order: Vec<usize> = rows.to_vec();
                order.sort_by(|&a, &b| {
                    values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal)
                });
                let mut left = SideStats::empty(target);
                let mut right = parent.clone();
                for w in 0..order.len() - 1 {
                    let r = order[w];
                    left.add_row(target, r);
                    right.remove_row(target, r);
                    let lo = values[r];
                    let hi = values[order[w + 1]];
                    if lo == hi {
                        continue;
                    }
                    let threshold = (lo + hi) / S::from_f64(2.0);
                    consider(SplitRule::Threshold { feature: f, threshold }, &left, &right);
                }
            }
            FeatureColumn::Categorical { categories, codes } => {
                let mut present: Vec<u32> = rows.iter().map(|&r| codes[r]).collect();
                present.sort_unstable();
                present.dedup();
                if present.len() < 2 {
                    continue;
                }
                let candidates =
                    subset_candidates(&present, criterion, target, codes, rows, categories.len());
                for left_set in candidates {
                    let mut left = SideStats::empty(target);
                    let mut right = parent.clone();
                    for &r in rows {
                        if left_set.binary_search(&codes[r]).is_ok() {
                            left.add_row(target, r);
                            right.remove_row(target, r);
                        }
                    }
                    consider(SplitRule::Subset { feature: f, left: left_set }, &left, &right);
                }
            }
        }
    }

    match best {
        // Zero-gain splits are never taken: a pure (or constant-target) node
        // is terminal even with min_impurity_decrease = 0.
        Some(split)
            if split.impurity_decrease > S::zero()
                && split.impurity_decrease.as_f64() >= stopping.min_impurity_decrease =>
        {
            Ok(Some(split))
        }
        _ => Ok(None),
    }
}

/// Candidate left subsets for a categorical feature, in lexicographic order
/// of the (sorted) code set.
///
/// Regression: categories ordered by target mean admit an exact contiguous
/// scan, but to honour the lexicographic tie-break we still emit the cut
/// sets sorted. Classification enumerates every proper subset containing the
/// smallest code up to [`SUBSET_ENUMERATION_LIMIT`] categories, then falls
/// back to one-vs-rest.
fn subset_candidates<S: Scalar>(
    present: &[u32],
    criterion: Criterion,
    target: &Target<S>,
    codes: &[u32],
    rows: &[usize],
    _n_categories: usize,
) -> Vec<Vec<u32>> {
    match (criterion, target) {
        (Criterion::Mse, Target::Regression(y)) => {
            // Order categories by mean target; contiguous prefixes of that
            // order cover the optimal subset (classic CART result).
            let mut stats: Vec<(u32, f64, usize)> =
                present.iter().map(|&c| (c, 0.0, 0usize)).collect();
            for &r in rows {
                let slot = stats.iter_mut().find(|(c, _, _)| *c == codes[r]).unwrap();
                slot.1 += y[r].as_f64();
                slot.2 += 1;
            }
            let mut ordered: Vec<(u32, f64)> = stats
                .into_iter()
                .map(|(c, sum, n)| (c, sum / n as f64))
                .collect();
            ordered.sort_by(|a, b| {
                a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
            });
            let mut out = Vec::new();
            for cut in 1..ordered.len() {
                let mut left: Vec<u32> = ordered[..cut].iter().map(|(c, _)| *c).collect();
                left.sort_unstable();
                out.push(left);
            }
            out.sort();
            out.dedup();
            out
        }
        (Criterion::Gini, _) if present.len() <= SUBSET_ENUMERATION_LIMIT => {
            // All proper nonempty subsets containing the smallest code: each
            // unordered {left, right} pair appears exactly once.
            let rest = &present[1..];
            let mut out = Vec::new();
            for mask in 0..(1u32 << rest.len()) {
                let mut left = vec![present[0]];
                for (i, &c) in rest.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        left.push(c);
                    }
                }
                if left.len() < present.len() {
                    left.sort_unstable();
                    out.push(left);
                }
            }
            out.sort();
            out
        }
        _ => {
            // One-vs-rest heuristic above the enumeration limit; documented
            // as potentially suboptimal.
            present.iter().map(|&c| vec![c]).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn default_stop() -> StoppingCriteria {
        StoppingCriteria::default()
    }

    #[test]
    fn perfect_binary_feature_gives_full_variance_gain() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("flag", vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let target = Target::Regression(vec![0.0, 0.0, 10.0, 10.0]);
        let rows = [0, 1, 2, 3];
        let split = best_split(&d, &target, &rows, Criterion::Mse, &default_stop(), 4)
            .unwrap()
            .unwrap();
        assert_eq!(split.rule, SplitRule::Threshold { feature: 0, threshold: 0.5 });
        assert_relative_eq!(split.impurity_decrease, 25.0);
    }

    #[test]
    fn constant_target_yields_no_split() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", vec![1.0, 2.0, 3.0]).unwrap();
        let target = Target::Regression(vec![7.0, 7.0, 7.0]);
        let got = best_split(&d, &target, &[0, 1, 2], Criterion::Mse, &default_stop(), 3).unwrap();
        assert!(got.is_none());
    }

    #[test]
    fn min_samples_leaf_excludes_edge_cuts() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let target = Target::Regression(vec![0.0, 5.0, 5.0, 5.0]);
        let stop = StoppingCriteria { min_samples_leaf: 2, ..StoppingCriteria::default() };
        let split = best_split(&d, &target, &[0, 1, 2, 3], Criterion::Mse, &stop, 4)
            .unwrap()
            .unwrap();
        // The best cut (after row 0) leaves one row on the left; with the
        // floor at 2 only the middle cut at 2.5 survives.
        assert_eq!(split.rule, SplitRule::Threshold { feature: 0, threshold: 2.5 });
    }

    #[test]
    fn categorical_split_separates_classes() {
        let mut d = Dataset::<f64>::new();
        d.add_categorical("site", &["a", "a", "b", "b"]).unwrap();
        let target = Target::classification(&["yes", "yes", "no", "no"]);
        let split = best_split(&d, &target, &[0, 1, 2, 3], Criterion::Gini, &default_stop(), 4)
            .unwrap()
            .unwrap();
        assert_eq!(split.rule, SplitRule::Subset { feature: 0, left: vec![0] });
        assert_relative_eq!(split.impurity_decrease, 0.5);
    }

    #[test]
    fn regression_subset_uses_target_mean_ordering() {
        let mut d = Dataset::<f64>::new();
        d.add_categorical("site", &["a", "b", "c", "a", "b", "c"]).unwrap();
        let target = Target::Regression(vec![1.0, 10.0, 1.5, 1.0, 10.0, 1.5]);
        let split = best_split(&d, &target, &[0, 1, 2, 3, 4, 5], Criterion::Mse, &default_stop(), 6)
            .unwrap()
            .unwrap();
        // Means: a=1, c=1.5, b=10 → optimal left subset {a, c}.
        assert_eq!(split.rule, SplitRule::Subset { feature: 0, left: vec![0, 2] });
    }

    #[test]
    fn mse_criterion_rejects_class_target() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("x", vec![1.0, 2.0]).unwrap();
        let target = Target::classification(&["a", "b"]);
        assert!(matches!(
            best_split(&d, &target, &[0, 1], Criterion::Mse, &default_stop(), 2),
            Err(CartError::NonNumericTarget)
        ));
    }
}
