//! Binary CART trees: regression on squared error, classification on Gini.
//!
//! Trees are grown by exhaustive search over binary splits — numeric
//! thresholds at midpoints between distinct values, categorical subset splits
//! — and stored as a flat node arena. Growth is best-first (largest impurity
//! decrease first) when a leaf budget is set, depth-first otherwise.

mod fit;
mod split;

pub use fit::{fit_tree, sweep, SweepPoint};
pub use split::best_split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CartError {
    #[error("empty input")]
    Empty,
    #[error("column lengths disagree: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid stopping criteria: {0}")]
    BadStopping(String),
    #[error("mse criterion requires a numeric target")]
    NonNumericTarget,
    #[error("gini criterion requires a class target")]
    NonClassTarget,
    #[error("r2 is undefined when the reference values have zero variance")]
    ZeroVariance,
    #[error("row has {0} features but the tree was fitted on {1}")]
    RowShape(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Mse,
    Gini,
}

/// The stopping parameters of tree growth, all optional-with-defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoppingCriteria {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_weight_fraction_leaf: f64,
    pub max_leaf_nodes: Option<usize>,
    pub min_impurity_decrease: f64,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_weight_fraction_leaf: 0.0,
            max_leaf_nodes: None,
            min_impurity_decrease: 0.0,
        }
    }
}

impl StoppingCriteria {
    pub fn validate(&self) -> Result<(), CartError> {
        if self.min_samples_split < 2 {
            return Err(CartError::BadStopping("min_samples_split must be >= 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(CartError::BadStopping("min_samples_leaf must be >= 1".into()));
        }
        if !(0.0..=0.5).contains(&self.min_weight_fraction_leaf) {
            return Err(CartError::BadStopping(
                "min_weight_fraction_leaf must lie in [0, 0.5]".into(),
            ));
        }
        if let Some(m) = self.max_leaf_nodes {
            if m < 2 {
                return Err(CartError::BadStopping("max_leaf_nodes must be >= 2".into()));
            }
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return Err(CartError::BadStopping("min_impurity_decrease must be >= 0".into()));
        }
        Ok(())
    }

    /// Leaf size floor combining the absolute and fractional minima.
    pub(crate) fn leaf_floor(&self, n_total: usize) -> usize {
        let frac = (self.min_weight_fraction_leaf * n_total as f64).ceil() as usize;
        self.min_samples_leaf.max(frac).max(1)
    }
}

/// One feature column; categoricals are stored as codes into a sorted
/// category table so subset splits have a canonical order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FeatureColumn<S> {
    Numeric(Vec<S>),
    Categorical { categories: Vec<String>, codes: Vec<u32> },
}

impl<S> FeatureColumn<S> {
    pub fn len(&self) -> usize {
        match self {
            FeatureColumn::Numeric(v) => v.len(),
            FeatureColumn::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Feature<S> {
    pub name: String,
    pub column: FeatureColumn<S>,
}

/// Columnar training matrix.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset<S> {
    pub features: Vec<Feature<S>>,
    n_rows: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new() -> Self {
        Self { features: Vec::new(), n_rows: 0 }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    fn check_len(&mut self, len: usize) -> Result<(), CartError> {
        if self.features.is_empty() {
            self.n_rows = len;
            Ok(())
        } else if self.n_rows != len {
            Err(CartError::LengthMismatch(self.n_rows, len))
        } else {
            Ok(())
        }
    }

    pub fn add_numeric(&mut self, name: impl Into<String>, values: Vec<S>) -> Result<(), CartError> {
        self.check_len(values.len())?;
        self.features.push(Feature { name: name.into(), column: FeatureColumn::Numeric(values) });
        Ok(())
    }

    /// Adds a categorical feature; categories are interned in sorted order.
    pub fn add_categorical(
        &mut self,
        name: impl Into<String>,
        values: &[&str],
    ) -> Result<(), CartError> {
        self.check_len(values.len())?;
        let mut table: BTreeMap<&str, u32> = BTreeMap::new();
        for v in values {
            let next = table.len() as u32;
            table.entry(v).or_insert(next);
        }
        // Re-number so codes follow lexicographic category order.
        let categories: Vec<String> = table.keys().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, u32> =
            categories.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32)).collect();
        let codes = values.iter().map(|v| index[v]).collect();
        self.features.push(Feature {
            name: name.into(),
            column: FeatureColumn::Categorical { categories, codes },
        });
        Ok(())
    }

    /// One row as prediction-time values (borrowing category names).
    pub fn row(&self, i: usize) -> Vec<Value<'_, S>> {
        self.features
            .iter()
            .map(|f| match &f.column {
                FeatureColumn::Numeric(v) => Value::Number(v[i]),
                FeatureColumn::Categorical { categories, codes } => {
                    Value::Category(&categories[codes[i] as usize])
                }
            })
            .collect()
    }
}

/// A prediction-time feature value.
#[derive(Debug, Clone, Copy)]
pub enum Value<'a, S> {
    Number(S),
    Category(&'a str),
    /// Routed to the majority child, mirroring unseen categories.
    Missing,
}

/// Fit target: numeric for regression, interned class labels otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Target<S> {
    Regression(Vec<S>),
    Classification { classes: Vec<String>, labels: Vec<u32> },
}

impl<S: Scalar> Target<S> {
    pub fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classification { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classification(values: &[&str]) -> Self {
        let mut table: BTreeMap<&str, u32> = BTreeMap::new();
        for v in values {
            let next = table.len() as u32;
            table.entry(v).or_insert(next);
        }
        let classes: Vec<String> = table.keys().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, u32> =
            classes.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32)).collect();
        let labels = values.iter().map(|v| index[v]).collect();
        Target::Classification { classes, labels }
    }

    /// Number of distinct classes (0 for regression targets).
    pub fn n_classes(&self) -> usize {
        match self {
            Target::Regression(_) => 0,
            Target::Classification { classes, .. } => classes.len(),
        }
    }
}

/// How a split partitions rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule<S> {
    /// value <= threshold goes left.
    Threshold { feature: usize, threshold: S },
    /// category code in `left` goes left; codes are kept sorted.
    Subset { feature: usize, left: Vec<u32> },
}

impl<S> SplitRule<S> {
    pub fn feature(&self) -> usize {
        match self {
            SplitRule::Threshold { feature, .. } | SplitRule::Subset { feature, .. } => *feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split<S> {
    pub rule: SplitRule<S>,
    /// The gain x_a: parent impurity minus child-weighted impurity.
    pub impurity_decrease: S,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node<S> {
    Internal {
        rule: SplitRule<S>,
        left: usize,
        right: usize,
        /// True when most training rows at this node went left; unseen or
        /// missing values at predict time follow the majority.
        majority_left: bool,
        n: usize,
    },
    Leaf {
        id: usize,
        n: usize,
        /// Node mean for regression; majority-class index for classification.
        prediction: S,
        /// Empirical class frequencies (classification only).
        class_probs: Option<Vec<S>>,
    },
}

/// A fitted tree stored as a node arena rooted at index 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree<S> {
    pub criterion: Criterion,
    pub stopping: StoppingCriteria,
    pub nodes: Vec<Node<S>>,
    pub feature_names: Vec<String>,
    /// Per-feature category tables (empty vec for numeric features).
    pub feature_categories: Vec<Vec<String>>,
    /// Class labels when fitted with the gini criterion.
    pub classes: Vec<String>,
}

/// Prediction output: a number for regression, a class for classification.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction<S> {
    Value(S),
    Class(String),
}

impl<S: Scalar> DecisionTree<S> {
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk<S>(nodes: &[Node<S>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf node a row is routed to.
    pub fn route(&self, row: &[Value<'_, S>]) -> Result<usize, CartError> {
        if row.len() != self.feature_names.len() {
            return Err(CartError::RowShape(row.len(), self.feature_names.len()));
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return Ok(at),
                Node::Internal { rule, left, right, majority_left, .. } => {
                    let goes_left = match (rule, &row[rule.feature()]) {
                        (SplitRule::Threshold { threshold, .. }, Value::Number(v)) => {
                            Some(*v <= *threshold)
                        }
                        (SplitRule::Subset { feature, left }, Value::Category(name)) => self
                            .feature_categories[*feature]
                            .iter()
                            .position(|c| c == name)
                            .map(|code| left.binary_search(&(code as u32)).is_ok()),
                        _ => None,
                    };
                    at = match goes_left.unwrap_or(*majority_left) {
                        true => *left,
                        false => *right,
                    };
                }
            }
        }
    }

    pub fn predict(&self, row: &[Value<'_, S>]) -> Result<Prediction<S>, CartError> {
        let at = self.route(row)?;
        let Node::Leaf { prediction, .. } = &self.nodes[at] else { unreachable!() };
        Ok(match self.criterion {
            Criterion::Mse => Prediction::Value(*prediction),
            Criterion::Gini => Prediction::Class(self.classes[prediction.as_f64() as usize].clone()),
        })
    }

    /// Leaf id (dense, 0-based) for every row of a dataset.
    pub fn leaf_assignments(&self, data: &Dataset<S>) -> Result<Vec<usize>, CartError> {
        (0..data.n_rows())
            .map(|i| {
                let at = self.route(&data.row(i))?;
                let Node::Leaf { id, .. } = &self.nodes[at] else { unreachable!() };
                Ok(*id)
            })
            .collect()
    }

    /// Mean squared training error implied by the leaf payloads.
    pub fn training_impurity(&self, data: &Dataset<S>, target: &Target<S>) -> Result<S, CartError> {
        let n = data.n_rows();
        if n == 0 {
            return Err(CartError::Empty);
        }
        let mut total = S::zero();
        for i in 0..n {
            let at = self.route(&data.row(i))?;
            let Node::Leaf { prediction, class_probs, .. } = &self.nodes[at] else {
                unreachable!()
            };
            match (target, self.criterion) {
                (Target::Regression(y), Criterion::Mse) => {
                    let d = y[i] - *prediction;
                    total = total + d * d;
                }
                (Target::Classification { labels, .. }, Criterion::Gini) => {
                    // Contribution of this row to leaf-weighted Gini: handled
                    // below via probabilities; count misfit mass instead.
                    let probs = class_probs.as_ref().expect("classification leaf");
                    let p_true = probs[labels[i] as usize];
                    total = total + (S::one() - p_true);
                }
                _ => return Err(CartError::NonNumericTarget),
            }
        }
        Ok(total / S::from_usize(n))
    }

    /// Indented text rendering for review.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        self.render_node(0, 0, &mut out);
        out
    }

    fn render_node(&self, at: usize, depth: usize, out: &mut String) {
        use std::fmt::Write;
        let pad = "  ".repeat(depth);
        match &self.nodes[at] {
            Node::Leaf { id, n, prediction, class_probs } => match class_probs {
                None => {
                    let _ = writeln!(out, "{pad}leaf #{id} n={n} mean={:.4}", prediction.as_f64());
                }
                Some(p) => {
                    let class = &self.classes[prediction.as_f64() as usize];
                    let probs: Vec<String> =
                        p.iter().map(|q| format!("{:.3}", q.as_f64())).collect();
                    let _ = writeln!(
                        out,
                        "{pad}leaf #{id} n={n} class={class} p=[{}]",
                        probs.join(", ")
                    );
                }
            },
            Node::Internal { rule, left, right, n, .. } => {
                let cond = match rule {
                    SplitRule::Threshold { feature, threshold } => {
                        format!("{} <= {:.4}", self.feature_names[*feature], threshold.as_f64())
                    }
                    SplitRule::Subset { feature, left } => {
                        let names: Vec<&str> = left
                            .iter()
                            .map(|&c| self.feature_categories[*feature][c as usize].as_str())
                            .collect();
                        format!("{} in {{{}}}", self.feature_names[*feature], names.join(", "))
                    }
                };
                let _ = writeln!(out, "{pad}if {cond} (n={n})");
                self.render_node(*left, depth + 1, out);
                let _ = writeln!(out, "{pad}else");
                self.render_node(*right, depth + 1, out);
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String>
    where
        S: serde::Serialize,
    {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self>
    where
        S: serde::de::DeserializeOwned,
    {
        serde_json::from_str(text)
    }
}

/// Population variance of `targets` (Eq. impurity for regression nodes).
pub fn node_mse<S: Scalar>(targets: &[S]) -> Result<S, CartError> {
    if targets.is_empty() {
        return Err(CartError::Empty);
    }
    let n = S::from_usize(targets.len());
    let mean = targets.iter().fold(S::zero(), |a, &y| a + y) / n;
    let sse = targets.iter().fold(S::zero(), |a, &y| a + (y - mean) * (y - mean));
    Ok(sse / n)
}

/// 1 − Σ p_i² over empirical class frequencies.
pub fn gini<S: Scalar>(labels: &[u32]) -> Result<S, CartError> {
    if labels.is_empty() {
        return Err(CartError::Empty);
    }
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = S::from_usize(labels.len());
    let sum_sq = counts
        .values()
        .fold(S::zero(), |a, &c| {
            let p = S::from_usize(c) / n;
            a + p * p
        });
    Ok(S::one() - sum_sq)
}

/// R² = 1 − SSE/SST with SST about the mean of `actual`.
pub fn r2_score<S: Scalar>(pred: &[S], actual: &[S]) -> Result<S, CartError> {
    if pred.is_empty() || actual.is_empty() {
        return Err(CartError::Empty);
    }
    if pred.len() != actual.len() {
        return Err(CartError::LengthMismatch(pred.len(), actual.len()));
    }
    let n = S::from_usize(actual.len());
    let mean = actual.iter().fold(S::zero(), |a, &y| a + y) / n;
    let sst = actual.iter().fold(S::zero(), |a, &y| a + (y - mean) * (y - mean));
    if sst == S::zero() {
        return Err(CartError::ZeroVariance);
    }
    let sse = pred
        .iter()
        .zip(actual)
        .fold(S::zero(), |a, (&p, &y)| a + (p - y) * (p - y));
    Ok(S::one() - sse / sst)
}

/// Fraction of exact matches.
pub fn accuracy_score<S: Scalar>(pred: &[&str], actual: &[&str]) -> Result<S, CartError> {
    if pred.is_empty() || actual.is_empty() {
        return Err(CartError::Empty);
    }
    if pred.len() != actual.len() {
        return Err(CartError::LengthMismatch(pred.len(), actual.len()));
    }
    let hits = pred.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(S::from_usize(hits) / S::from_usize(pred.len()))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    #[test]
    fn mse_of_constant_node_is_zero() {
        assert_eq!(node_mse(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn mse_of_symmetric_pair() {
        assert_relative_eq!(node_mse(&[1.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn mse_rejects_empty() {
        assert!(matches!(node_mse::<f64>(&[]), Err(CartError::Empty)));
    }

    #[test]
    fn gini_pure_and_even() {
        assert_eq!(gini::<f64>(&[1, 1, 1]).unwrap(), 0.0);
        assert_relative_eq!(gini::<f64>(&[0, 1, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn gini_bounded_by_class_count() {
        let g: f64 = gini(&[0, 1, 2]).unwrap();
        assert!(g <= 1.0 - 1.0 / 3.0 + 1e-12);
    }

    #[test]
    fn r2_perfect_and_baseline() {
        let actual = [1.0, 2.0, 3.0];
        assert_relative_eq!(r2_score(&actual, &actual).unwrap(), 1.0);
        let mean = [2.0, 2.0, 2.0];
        assert_relative_eq!(r2_score(&mean, &actual).unwrap(), 0.0);
    }

    #[test]
    fn r2_zero_variance_is_an_error() {
        assert!(matches!(
            r2_score(&[1.0, 2.0], &[5.0, 5.0]),
            Err(CartError::ZeroVariance)
        ));
    }

    #[test]
    fn accuracy_counts_matches() {
        let acc: f64 = accuracy_score(&["1", "0", "1"], &["1", "1", "1"]).unwrap();
        assert_relative_eq!(acc, 2.0 / 3.0);
    }

    #[test]
    fn dataset_interns_categories_in_sorted_order() {
        let mut d = Dataset::<f64>::new();
        d.add_categorical("c", &["zeta", "alpha", "zeta"]).unwrap();
        match &d.features[0].column {
            FeatureColumn::Categorical { categories, codes } => {
                assert_eq!(categories, &["alpha", "zeta"]);
                assert_eq!(codes, &[1, 0, 1]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn dataset_rejects_ragged_columns() {
        let mut d = Dataset::<f64>::new();
        d.add_numeric("a", vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            d.add_numeric("b", vec![1.0]),
            Err(CartError::LengthMismatch(2, 1))
        ));
    }

    #[test]
    fn stopping_ranges_are_enforced() {
        let mut s = StoppingCriteria::default();
        s.max_leaf_nodes = Some(1);
        assert!(s.validate().is_err());
        s.max_leaf_nodes = Some(2);
        s.min_weight_fraction_leaf = 0.6;
        assert!(s.validate().is_err());
        s.min_weight_fraction_leaf = 0.0;
        assert!(s.validate().is_ok());
    }
}
