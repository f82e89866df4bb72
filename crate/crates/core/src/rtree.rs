//! CART regression tree over feature-table rows.
//!
//! Growth is greedy: each node takes the split with the largest reduction in
//! within-node sum of squared deviations. Numeric features split at midpoints
//! between sorted unique values (`value < threshold` goes left); categorical
//! features split on prefixes of the categories ordered by target mean. The
//! grown tree is then cost-complexity pruned, with the complexity parameter
//! picked by k-fold cross-validation and the one-standard-error rule.
//!
//! Leaves hold the mean target of the rows routed to them. Every split also
//! keeps its subtree mean, which is the prediction when the split feature is
//! Missing or carries a category never seen at that node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{FeatureRow, FeatureTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    DayOfWeek,
    TimeOfDaySlot,
    Semester,
    HolidayFlag,
    MaxTemp,
    AvgTemp,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::DayOfWeek,
        Feature::TimeOfDaySlot,
        Feature::Semester,
        Feature::HolidayFlag,
        Feature::MaxTemp,
        Feature::AvgTemp,
    ];

    /// Number of categories, or `None` for numeric features.
    pub fn categories(self) -> Option<usize> {
        match self {
            Feature::DayOfWeek => Some(7),
            Feature::Semester => Some(3),
            Feature::HolidayFlag => Some(2),
            Feature::TimeOfDaySlot | Feature::MaxTemp | Feature::AvgTemp => None,
        }
    }

    /// Calendar-derived features need one-time collection; weather does not.
    pub fn is_static(self) -> bool {
        !matches!(self, Feature::MaxTemp | Feature::AvgTemp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::DayOfWeek => "day_of_week",
            Feature::TimeOfDaySlot => "time_of_day_slot",
            Feature::Semester => "semester",
            Feature::HolidayFlag => "holiday_flag",
            Feature::MaxTemp => "max_temp",
            Feature::AvgTemp => "avg_temp",
        }
    }

    /// Numeric encoding: category index for categorical features.
    pub fn value(self, row: &FeatureRow) -> Option<f64> {
        match self {
            Feature::DayOfWeek => row.day_of_week.map(|d| d.index() as f64),
            Feature::TimeOfDaySlot => row.time_of_day_slot.map(f64::from),
            Feature::Semester => row.semester.map(|s| s.index() as f64),
            Feature::HolidayFlag => row.holiday_flag.map(|h| h as u8 as f64),
            Feature::MaxTemp => row.max_temp,
            Feature::AvgTemp => row.avg_temp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Folds for pruning cross-validation; below 2 disables pruning.
    pub cv_folds: usize,
    /// Restrict to these features; default is every feature fully present in
    /// the training table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Feature>>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 5,
            max_depth: 12,
            cv_folds: 10,
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Go left if `value < threshold`.
    Below { threshold: f64 },
    /// Go left if the category is in `left`; right if it is in `seen` but not
    /// `left`; otherwise stop here.
    InSet { left: Vec<u8>, seen: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        count: usize,
    },
    Split {
        feature: Feature,
        rule: SplitRule,
        /// Mean training target under this node.
        mean: f64,
        count: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &FeatureRow) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    rule,
                    mean,
                    left,
                    right,
                    ..
                } => {
                    let Some(v) = feature.value(row) else {
                        return *mean;
                    };
                    node = match rule {
                        SplitRule::Below { threshold } => {
                            if v < *threshold {
                                left
                            } else {
                                right
                            }
                        }
                        SplitRule::InSet { left: l, seen } => {
                            let cat = v as u8;
                            if l.contains(&cat) {
                                left
                            } else if seen.contains(&cat) {
                                right
                            } else {
                                return *mean;
                            }
                        }
                    };
                }
            }
        }
    }

    pub fn predict_table(&self, table: &FeatureTable) -> Vec<f64> {
        table.rows().iter().map(|r| self.predict(r)).collect()
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            TreeNode::Leaf { count, .. } | TreeNode::Split { count, .. } => *count,
        }
    }

    /// Features used by at least one split.
    pub fn features_used(&self) -> Vec<Feature> {
        fn walk(n: &TreeNode, out: &mut Vec<Feature>) {
            if let TreeNode::Split {
                feature, left, right, ..
            } = n
            {
                if !out.contains(feature) {
                    out.push(*feature);
                }
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

/// Training data in column-major form over the usable features.
struct Matrix<'a> {
    features: Vec<Feature>,
    columns: Vec<Vec<f64>>,
    y: &'a [f64],
}

#[derive(Debug, Clone)]
enum Rule {
    Below(f64),
    /// Bit masks over category ids.
    InSet { left: u16, seen: u16 },
}

#[derive(Debug, Clone)]
struct Split {
    column: usize,
    rule: Rule,
    left: usize,
    right: usize,
}

#[derive(Debug, Clone)]
struct Node {
    mean: f64,
    count: usize,
    sse: f64,
    split: Option<Split>,
}

struct Candidate {
    column: usize,
    gain: f64,
    rule: Rule,
}

fn goes_left(rule: &Rule, v: f64) -> Option<bool> {
    match *rule {
        Rule::Below(t) => Some(v < t),
        Rule::InSet { left, seen } => {
            let bit = 1u16 << (v as u32);
            if left & bit != 0 {
                Some(true)
            } else if seen & bit != 0 {
                Some(false)
            } else {
                None
            }
        }
    }
}

fn mean_and_sse(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    // shifted by the first value so a constant group's mean is exact
    let y0 = y[rows[0]];
    let mean = y0 + rows.iter().map(|&r| y[r] - y0).sum::<f64>() / n;
    let sse = rows.iter().map(|&r| (y[r] - mean).powi(2)).sum();
    (mean, sse)
}

fn best_split(m: &Matrix, rows: &[usize], mean: f64, sse: f64, min_leaf: usize) -> Option<Candidate> {
    let n = rows.len();
    let eps = sse * 1e-12;
    let mut best: Option<Candidate> = None;
    let consider = |cand: Candidate, best: &mut Option<Candidate>| {
        if cand.gain <= eps {
            return;
        }
        let better = match best {
            None => true,
            Some(b) => {
                if cand.gain > b.gain + eps {
                    true
                } else if (cand.gain - b.gain).abs() <= eps && cand.column == b.column {
                    // same column, tied gain: smaller subset in canonical bit order
                    matches!((&cand.rule, &b.rule),
                        (Rule::InSet { left: a, .. }, Rule::InSet { left: c, .. }) if a < c)
                } else {
                    false
                }
            }
        };
        if better {
            *best = Some(cand);
        }
    };

    for (column, feature) in m.features.iter().enumerate() {
        let x = &m.columns[column];
        match feature.categories() {
            None => {
                let mut order: Vec<usize> = rows.to_vec();
                order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
                let total: f64 = order.iter().map(|&r| m.y[r] - mean).sum();
                let mut left_sum = 0.0;
                for i in 0..n - 1 {
                    left_sum += m.y[order[i]] - mean;
                    let (lo, hi) = (x[order[i]], x[order[i + 1]]);
                    let nl = i + 1;
                    let nr = n - nl;
                    if lo == hi || nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let right_sum = total - left_sum;
                    let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64
                        - total * total / n as f64;
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if !(lo < threshold) {
                        threshold = hi;
                    }
                    consider(
                        Candidate {
                            column,
                            gain,
                            rule: Rule::Below(threshold),
                        },
                        &mut best,
                    );
                }
            }
            Some(k) => {
                let mut sums = vec![0.0; k];
                let mut counts = vec![0usize; k];
                for &r in rows {
                    let c = x[r] as usize;
                    sums[c] += m.y[r] - mean;
                    counts[c] += 1;
                }
                let mut cats: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
                if cats.len() < 2 {
                    continue;
                }
                let seen: u16 = cats.iter().fold(0, |acc, &c| acc | 1 << c);
                cats.sort_by(|&a, &b| {
                    (sums[a] / counts[a] as f64)
                        .total_cmp(&(sums[b] / counts[b] as f64))
                        .then(a.cmp(&b))
                });
                let total: f64 = sums.iter().sum();
                let (mut left_sum, mut nl, mut mask) = (0.0, 0usize, 0u16);
                for &c in &cats[..cats.len() - 1] {
                    left_sum += sums[c];
                    nl += counts[c];
                    mask |= 1 << c;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let right_sum = total - left_sum;
                    let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64
                        - total * total / n as f64;
                    // the complement describes the same partition; keep the smaller mask
                    let left = mask.min(seen & !mask);
                    consider(
                        Candidate {
                            column,
                            gain,
                            rule: Rule::InSet { left, seen },
                        },
                        &mut best,
                    );
                }
            }
        }
    }
    best
}

fn grow(m: &Matrix, rows: Vec<usize>, params: &TreeParams) -> Vec<Node> {
    let mut arena: Vec<Node> = Vec::new();
    let (mean, sse) = mean_and_sse(m.y, &rows);
    arena.push(Node {
        mean,
        count: rows.len(),
        sse,
        split: None,
    });
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let Node { mean, sse, .. } = arena[id];
        if depth >= params.max_depth || rows.len() < 2 * params.min_leaf || sse <= 0.0 {
            continue;
        }
        let Some(cand) = best_split(m, &rows, mean, sse, params.min_leaf) else {
            continue;
        };
        let x = &m.columns[cand.column];
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| goes_left(&cand.rule, x[r]).unwrap_or(false));
        let mut child = |rows: &[usize]| {
            let (mean, sse) = mean_and_sse(m.y, rows);
            arena.push(Node {
                mean,
                count: rows.len(),
                sse,
                split: None,
            });
            arena.len() - 1
        };
        let left = child(&l_rows);
        let right = child(&r_rows);
        arena[id].split = Some(Split {
            column: cand.column,
            rule: cand.rule,
            left,
            right,
        });
        stack.push((right, r_rows, depth + 1));
        stack.push((left, l_rows, depth + 1));
    }
    arena
}

/// Subtree in a pruning sequence: `collapsed[i]` marks node i as a leaf.
#[derive(Debug, Clone)]
struct Pruned {
    alpha: f64,
    collapsed: Vec<bool>,
}

fn is_leaf(arena: &[Node], collapsed: &[bool], id: usize) -> bool {
    collapsed[id] || arena[id].split.is_none()
}

/// (subtree SSE, leaf count) for every node reachable under `collapsed`.
fn subtree_stats(arena: &[Node], collapsed: &[bool]) -> Vec<Option<(f64, usize)>> {
    fn visit(arena: &[Node], collapsed: &[bool], id: usize, out: &mut Vec<Option<(f64, usize)>>) -> (f64, usize) {
        let stats = if is_leaf(arena, collapsed, id) {
            (arena[id].sse, 1)
        } else {
            let s = arena[id].split.as_ref().expect("internal node");
            let (a, la) = visit(arena, collapsed, s.left, out);
            let (b, lb) = visit(arena, collapsed, s.right, out);
            (a + b, la + lb)
        };
        out[id] = Some(stats);
        stats
    }
    let mut out = vec![None; arena.len()];
    visit(arena, collapsed, 0, &mut out);
    out
}

/// Weakest-link pruning: nested subtrees with increasing complexity parameter,
/// from the full tree down to the root alone.
fn pruning_sequence(arena: &[Node]) -> Vec<Pruned> {
    let mut collapsed = vec![false; arena.len()];
    let mut seq = vec![Pruned {
        alpha: 0.0,
        collapsed: collapsed.clone(),
    }];
    let scale = arena[0].sse.max(f64::MIN_POSITIVE);
    while !is_leaf(arena, &collapsed, 0) {
        let stats = subtree_stats(arena, &collapsed);
        let g = |id: usize| -> Option<f64> {
            let (sub_sse, leaves) = stats[id]?;
            if is_leaf(arena, &collapsed, id) {
                return None;
            }
            Some(((arena[id].sse - sub_sse) / (leaves - 1) as f64).max(0.0))
        };
        let alpha = (0..arena.len())
            .filter_map(g)
            .fold(f64::INFINITY, f64::min);
        let cut: Vec<usize> = (0..arena.len())
            .filter(|&id| g(id).is_some_and(|v| v <= alpha + 1e-12 * scale))
            .collect();
        for id in cut {
            collapsed[id] = true;
        }
        seq.push(Pruned {
            alpha,
            collapsed: collapsed.clone(),
        });
    }
    seq
}

fn predict_arena(arena: &[Node], collapsed: &[bool], m: &Matrix, row: usize) -> f64 {
    let mut id = 0;
    loop {
        if is_leaf(arena, collapsed, id) {
            return arena[id].mean;
        }
        let s = arena[id].split.as_ref().expect("internal node");
        match goes_left(&s.rule, m.columns[s.column][row]) {
            Some(true) => id = s.left,
            Some(false) => id = s.right,
            None => return arena[id].mean,
        }
    }
}

/// Index into `seq` of the pruned subtree in effect at complexity `alpha`.
fn subtree_at(seq: &[Pruned], alpha: f64) -> usize {
    seq.iter().rposition(|p| p.alpha <= alpha).unwrap_or(0)
}

/// Pick the pruning level by cross-validation and the one-standard-error rule.
fn choose_by_cv(m: &Matrix, seq: &[Pruned], params: &TreeParams) -> usize {
    let n = m.y.len();
    let folds = params.cv_folds.min(n);
    if folds < 2 || seq.len() == 1 {
        return 0;
    }
    // representative alpha for each interval [alpha_j, alpha_{j+1})
    let betas: Vec<f64> = (0..seq.len())
        .map(|j| match seq.get(j + 1) {
            Some(next) => (seq[j].alpha * next.alpha).sqrt(),
            None => seq[j].alpha,
        })
        .collect();

    let mut sq_err = vec![vec![0.0; n]; betas.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
        let arena = grow(m, train, params);
        let fold_seq = pruning_sequence(&arena);
        for (j, &beta) in betas.iter().enumerate() {
            let pruned = &fold_seq[subtree_at(&fold_seq, beta)];
            for row in (fold..n).step_by(folds) {
                let e = predict_arena(&arena, &pruned.collapsed, m, row) - m.y[row];
                sq_err[j][row] = e * e;
            }
        }
    }

    let stats: Vec<(f64, f64)> = sq_err
        .iter()
        .map(|errs| {
            let mean = errs.iter().sum::<f64>() / n as f64;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
            (mean, (var / n as f64).sqrt())
        })
        .collect();
    let (best, _) = stats
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &(r, _))| if r < acc.1 { (j, r) } else { acc });
    let threshold = stats[best].0 + stats[best].1;
    (0..stats.len())
        .rev()
        .find(|&j| stats[j].0 <= threshold)
        .unwrap_or(best)
}

fn to_tree(arena: &[Node], collapsed: &[bool], features: &[Feature], id: usize) -> TreeNode {
    let node = &arena[id];
    if is_leaf(arena, collapsed, id) {
        return TreeNode::Leaf {
            value: node.mean,
            count: node.count,
        };
    }
    let s = node.split.as_ref().expect("internal node");
    let bits = |mask: u16| (0..16u8).filter(|b| mask & (1 << b) != 0).collect::<Vec<u8>>();
    let rule = match s.rule {
        Rule::Below(threshold) => SplitRule::Below { threshold },
        Rule::InSet { left, seen } => SplitRule::InSet {
            left: bits(left),
            seen: bits(seen),
        },
    };
    TreeNode::Split {
        feature: features[s.column],
        rule,
        mean: node.mean,
        count: node.count,
        left: Box::new(to_tree(arena, collapsed, features, s.left)),
        right: Box::new(to_tree(arena, collapsed, features, s.right)),
    }
}

/// Features fully observed over `rows` (restricted to `params.features` if set).
/// A partially Missing column is not used for fitting.
pub fn usable_features(rows: &[FeatureRow], params: &TreeParams) -> Vec<Feature> {
    let wanted = params.features.clone().unwrap_or_else(|| Feature::ALL.to_vec());
    let mut out: Vec<Feature> = Feature::ALL
        .iter()
        .copied()
        .filter(|f| wanted.contains(f))
        .filter(|f| rows.iter().all(|r| f.value(r).is_some()))
        .collect();
    out.sort();
    out
}

fn validate(params: &TreeParams) -> Result<()> {
    if params.min_leaf == 0 || params.max_depth == 0 {
        return Err(Error::InvalidPlan(
            "tree min_leaf and max_depth must be positive".into(),
        ));
    }
    Ok(())
}

/// Grow and prune a tree. Also returns the unpruned tree.
pub fn fit_tree_with_grown(rows: &[FeatureRow], targets: &[f64], params: &TreeParams) -> Result<(TreeNode, TreeNode)> {
    validate(params)?;
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch(format!(
            "{} feature rows vs {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let need = 2 * params.min_leaf;
    if rows.len() < need {
        return Err(Error::TooFewRows {
            need,
            got: rows.len(),
        });
    }
    if let Some(bad) = targets.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonPositive { index: 0, value: *bad });
    }
    let features = usable_features(rows, params);
    let columns = features
        .iter()
        .map(|f| rows.iter().map(|r| f.value(r).expect("usable")).collect())
        .collect();
    let m = Matrix {
        features: features.clone(),
        columns,
        y: targets,
    };
    let arena = grow(&m, (0..rows.len()).collect(), params);
    let seq = pruning_sequence(&arena);
    let chosen = choose_by_cv(&m, &seq, params);
    let grown = to_tree(&arena, &seq[0].collapsed, &features, 0);
    let pruned = to_tree(&arena, &seq[chosen].collapsed, &features, 0);
    Ok((pruned, grown))
}

pub fn fit_tree(train: &FeatureTable, targets: &[f64], params: &TreeParams) -> Result<TreeNode> {
    fit_tree_with_grown(train.rows(), targets, params).map(|(t, _)| t)
}

pub fn predict_tree(t: &TreeNode, row: &FeatureRow) -> f64 {
    t.predict(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{DayOfWeek, Semester};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(dow: usize, holiday: bool) -> FeatureRow {
        FeatureRow {
            day_of_week: Some(DayOfWeek::ALL[dow]),
            holiday_flag: Some(holiday),
            semester: Some(Semester::ALL[dow % 3]),
            ..FeatureRow::default()
        }
    }

    fn holiday_data() -> (Vec<FeatureRow>, Vec<f64>) {
        let rows: Vec<FeatureRow> = (0..140).map(|i| row(i % 7, i % 9 == 4)).collect();
        let y = rows
            .iter()
            .map(|r| if r.holiday_flag == Some(true) { 50.0 } else { 150.0 })
            .collect();
        (rows, y)
    }

    #[test]
    fn single_split_on_holiday() {
        let (rows, y) = holiday_data();
        let (tree, _) = fit_tree_with_grown(&rows, &y, &TreeParams::default()).unwrap();
        match &tree {
            TreeNode::Split {
                feature, left, right, ..
            } => {
                assert_eq!(*feature, Feature::HolidayFlag);
                assert_eq!(tree.leaf_count(), 2);
                let vals = [left.as_ref(), right.as_ref()].map(|n| match n {
                    TreeNode::Leaf { value, .. } => *value,
                    _ => panic!("expected leaf"),
                });
                assert!(vals.contains(&50.0) && vals.contains(&150.0));
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(tree.predict(&row(2, true)), 50.0);
        assert_eq!(tree.predict(&row(2, false)), 150.0);

        // Missing split feature -> count-weighted mean of both leaves
        let mut missing = row(2, false);
        missing.holiday_flag = None;
        let holidays = rows.iter().filter(|r| r.holiday_flag == Some(true)).count() as f64;
        let expect = (50.0 * holidays + 150.0 * (140.0 - holidays)) / 140.0;
        assert!((tree.predict(&missing) - expect).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let rows: Vec<FeatureRow> = (0..30).map(|i| row(i % 7, i % 4 == 0)).collect();
        let t = fit_tree(
            &FeatureTable::new(crate::series::parse_timestamp("2010-01-01T00:00").unwrap(), crate::Granularity::Hour24, rows.clone()).unwrap(),
            &[12.5; 30],
            &TreeParams::default(),
        )
        .unwrap();
        assert_eq!(t, TreeNode::Leaf { value: 12.5, count: 30 });
        assert_eq!(t.predict(&row(0, true)), 12.5);
    }

    #[test]
    fn too_few_rows() {
        let rows: Vec<FeatureRow> = (0..9).map(|i| row(i % 7, false)).collect();
        assert!(matches!(
            fit_tree_with_grown(&rows, &[1.0; 9], &TreeParams::default()),
            Err(Error::TooFewRows { need: 10, got: 9 })
        ));
    }

    #[test]
    fn unseen_category_stops_at_subtree_mean() {
        // Only Mon and Tue in training
        let rows: Vec<FeatureRow> = (0..40).map(|i| row(1 + i % 2, false)).collect();
        let y: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 10.0 } else { 30.0 }).collect();
        let t = fit_tree_with_grown(&rows, &y, &TreeParams { features: Some(vec![Feature::DayOfWeek]), ..Default::default() })
            .unwrap()
            .0;
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(t.predict(&row(1, false)), 10.0);
        assert_eq!(t.predict(&row(5, false)), 20.0);
    }

    #[test]
    fn leaf_values_are_routed_means_and_pruning_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<FeatureRow> = (0..300)
            .map(|i| FeatureRow {
                day_of_week: Some(DayOfWeek::ALL[i % 7]),
                max_temp: Some(rng.random_range(50.0..100.0)),
                holiday_flag: Some(rng.random_bool(0.1)),
                ..FeatureRow::default()
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                let t = r.max_temp.unwrap();
                100.0 + 2.0 * (t - 70.0).max(0.0) + 10.0 * r.day_of_week.unwrap().index() as f64
                    + rng.random_range(-5.0..5.0)
            })
            .collect();
        let (pruned, grown) = fit_tree_with_grown(&rows, &y, &TreeParams::default()).unwrap();
        assert!(pruned.leaf_count() <= grown.leaf_count());
        let sse = |t: &TreeNode| rows.iter().zip(&y).map(|(r, v)| (t.predict(r) - v).powi(2)).sum::<f64>();
        assert!(sse(&pruned) >= sse(&grown) - 1e-9);

        // replay training rows and compare each leaf's value with its routed mean
        for t in [&pruned, &grown] {
            let mut groups: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
            for (r, v) in rows.iter().zip(&y) {
                let e = groups.entry(t.predict(r).to_bits()).or_default();
                e.0 += v;
                e.1 += 1;
            }
            for (bits, (sum, count)) in groups {
                assert!((f64::from_bits(bits) - sum / count as f64).abs() < 1e-9);
                assert!(count >= TreeParams::default().min_leaf);
            }
        }
    }

    #[test]
    fn deterministic_and_serializable() {
        let (rows, y) = holiday_data();
        let a = fit_tree_with_grown(&rows, &y, &TreeParams::default()).unwrap().0;
        let b = fit_tree_with_grown(&rows, &y, &TreeParams::default()).unwrap().0;
        assert_eq!(a, b);
        let back: TreeNode = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn pruning_sequence_is_nested_and_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<FeatureRow> = (0..200)
            .map(|_| FeatureRow {
                max_temp: Some(rng.random_range(0.0..1.0)),
                ..FeatureRow::default()
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r.max_temp.unwrap() * 10.0 + rng.random_range(0.0..3.0)).collect();
        let params = TreeParams { min_leaf: 2, ..Default::default() };
        let features = usable_features(&rows, &params);
        let m = Matrix {
            columns: features.iter().map(|f| rows.iter().map(|r| f.value(r).unwrap()).collect()).collect(),
            features,
            y: &y,
        };
        let arena = grow(&m, (0..200).collect(), &params);
        let seq = pruning_sequence(&arena);
        assert!(seq.len() > 2);
        for w in seq.windows(2) {
            assert!(w[1].alpha >= w[0].alpha);
            for (a, b) in w[0].collapsed.iter().zip(&w[1].collapsed) {
                assert!(!a || *b, "collapsed nodes stay collapsed");
            }
        }
        assert!(is_leaf(&arena, &seq.last().unwrap().collapsed, 0));
    }
}
