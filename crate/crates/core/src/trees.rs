//! CART regression trees over binned features.
//!
//! Splits are thresholds on bin indices: a row goes left when its bin is
//! `<= threshold`. Candidate splits are scanned feature by feature in
//! ascending index order, thresholds ascending, and only a strictly larger
//! gain replaces the incumbent, so ties resolve to the lowest feature and
//! then the lowest threshold.

use serde::{Deserialize, Serialize};

use crate::data::BinnedMatrix;
use crate::error::{Error, Result};

/// Relative floor below which a split gain counts as zero.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Squared-error reduction, leaf value = mean.
    Sse,
    /// Absolute-error reduction, leaf value = median.
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub criterion: SplitCriterion,
}

impl TreeParams {
    /// Regression-tree baseline: depth 4, min split 4, min leaf 1, MAE.
    pub fn rt_baseline() -> Self {
        Self {
            max_depth: 4,
            min_samples_split: 4,
            min_samples_leaf: 1,
            criterion: SplitCriterion::Mae,
        }
    }

    /// Squared-error weak learner for boosting.
    pub fn weak_learner(max_depth: usize, min_samples_split: usize) -> Self {
        Self {
            max_depth,
            min_samples_split,
            min_samples_leaf: 1,
            criterion: SplitCriterion::Sse,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::param("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::param("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: u16,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

/// Flat node array; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64, count: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value, count }],
        }
    }

    /// Index of the leaf reached by a row whose bin for feature `f` is
    /// `bin(f)`.
    #[inline]
    pub fn leaf_index(&self, bin: impl Fn(usize) -> u16) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if bin(feature) <= threshold { left } else { right },
            }
        }
    }

    #[inline]
    pub fn predict_with(&self, bin: impl Fn(usize) -> u16) -> f64 {
        match self.nodes[self.leaf_index(bin)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Distinct features used by split nodes, ascending.
    pub fn features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Weighted items (rows or histogram cells) that split search runs over.
trait SplitSource {
    fn bin(&self, item: usize, feature: usize) -> u16;
    fn sum(&self, item: usize) -> f64;
    fn count(&self, item: usize) -> usize;
}

struct Rows<'a> {
    data: &'a BinnedMatrix,
    y: &'a [f64],
}

impl SplitSource for Rows<'_> {
    #[inline]
    fn bin(&self, item: usize, feature: usize) -> u16 {
        self.data.columns[feature][item]
    }
    #[inline]
    fn sum(&self, item: usize) -> f64 {
        self.y[item]
    }
    #[inline]
    fn count(&self, _item: usize) -> usize {
        1
    }
}

/// Aggregated targets over the bin grid of one or two features.
///
/// Fitting a squared-error tree on the histogram is equivalent to fitting it
/// on the rows, because every row in a cell shares the same bins.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistogram {
    features: Vec<usize>,
    dims: Vec<usize>,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl CellHistogram {
    pub fn single(feature: usize, n_bins: usize, bins: &[u16], targets: &[f64]) -> Self {
        let mut sums = vec![0.0; n_bins];
        let mut counts = vec![0usize; n_bins];
        for (&b, &t) in bins.iter().zip(targets) {
            sums[b as usize] += t;
            counts[b as usize] += 1;
        }
        Self {
            features: vec![feature],
            dims: vec![n_bins],
            sums,
            counts,
        }
    }

    /// Row-major grid: cell `(a, b)` is at `a * dims.1 + b`.
    pub fn pair(
        features: (usize, usize),
        dims: (usize, usize),
        bins_a: &[u16],
        bins_b: &[u16],
        targets: &[f64],
    ) -> Self {
        let mut sums = vec![0.0; dims.0 * dims.1];
        let mut counts = vec![0usize; dims.0 * dims.1];
        for ((&a, &b), &t) in bins_a.iter().zip(bins_b).zip(targets) {
            let c = a as usize * dims.1 + b as usize;
            sums[c] += t;
            counts[c] += 1;
        }
        Self {
            features: vec![features.0, features.1],
            dims: vec![dims.0, dims.1],
            sums,
            counts,
        }
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Fits a squared-error tree restricted to this histogram's features.
    pub fn fit(&self, params: &TreeParams) -> Result<RegressionTree> {
        params.validate()?;
        let items: Vec<usize> = (0..self.counts.len()).filter(|&c| self.counts[c] > 0).collect();
        if items.is_empty() {
            return Err(Error::Empty("training rows"));
        }
        let mut n_bins = vec![0usize; self.features.iter().max().unwrap() + 1];
        for (f, d) in self.features.iter().zip(&self.dims) {
            n_bins[*f] = *d;
        }
        let mut features = self.features.clone();
        features.sort_unstable();
        let mut nodes = Vec::new();
        grow_sse(self, items, &features, &n_bins, params, 0, &mut nodes);
        Ok(RegressionTree { nodes })
    }
}

impl SplitSource for CellHistogram {
    #[inline]
    fn bin(&self, item: usize, feature: usize) -> u16 {
        if self.features.len() == 1 {
            item as u16
        } else if feature == self.features[0] {
            (item / self.dims[1]) as u16
        } else {
            (item % self.dims[1]) as u16
        }
    }
    #[inline]
    fn sum(&self, item: usize) -> f64 {
        self.sums[item]
    }
    #[inline]
    fn count(&self, item: usize) -> usize {
        self.counts[item]
    }
}

struct Candidate {
    feature: usize,
    threshold: u16,
    gain: f64,
}

fn grow_sse<S: SplitSource>(
    src: &S,
    items: Vec<usize>,
    features: &[usize],
    n_bins: &[usize],
    params: &TreeParams,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let (total, n) = items
        .iter()
        .fold((0.0, 0usize), |(s, c), &i| (s + src.sum(i), c + src.count(i)));
    let id = nodes.len();
    nodes.push(Node::Leaf {
        value: total / n as f64,
        count: n,
    });
    if depth >= params.max_depth || n < params.min_samples_split {
        return id;
    }
    let parent = total * total / n as f64;
    let mut best: Option<Candidate> = None;
    let mut sums = Vec::new();
    let mut counts = Vec::new();
    for &f in features {
        let nb = n_bins[f];
        if nb < 2 {
            continue;
        }
        sums.clear();
        sums.resize(nb, 0.0);
        counts.clear();
        counts.resize(nb, 0usize);
        for &i in &items {
            let b = (src.bin(i, f) as usize).min(nb - 1);
            sums[b] += src.sum(i);
            counts[b] += src.count(i);
        }
        let (mut ls, mut ln) = (0.0, 0usize);
        for t in 0..nb - 1 {
            ls += sums[t];
            ln += counts[t];
            let rn = n - ln;
            if ln < params.min_samples_leaf || rn < params.min_samples_leaf {
                continue;
            }
            let rs = total - ls;
            let gain = ls * ls / ln as f64 + rs * rs / rn as f64 - parent;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold: t as u16,
                    gain,
                });
            }
        }
    }
    let Some(best) = best.filter(|b| b.gain > GAIN_EPS * (1.0 + parent)) else {
        return id;
    };
    let (left_items, right_items): (Vec<usize>, Vec<usize>) = items
        .into_iter()
        .partition(|&i| src.bin(i, best.feature) <= best.threshold);
    let left = grow_sse(src, left_items, features, n_bins, params, depth + 1, nodes);
    let right = grow_sse(src, right_items, features, n_bins, params, depth + 1, nodes);
    nodes[id] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    id
}

/// Fenwick tree over target ranks holding counts and value sums.
struct Fenwick {
    cnt: Vec<i64>,
    sum: Vec<f64>,
    log: usize,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        let mut log = 1;
        while (1 << log) <= n {
            log += 1;
        }
        Self {
            cnt: vec![0; n + 1],
            sum: vec![0.0; n + 1],
            log,
        }
    }

    fn add(&mut self, rank: usize, c: i64, v: f64) {
        let mut i = rank + 1;
        while i < self.cnt.len() {
            self.cnt[i] += c;
            self.sum[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Rank of the k-th smallest present element (k >= 1) and the value sum
    /// of the first k elements.
    fn kth(&self, k: i64) -> (usize, f64) {
        let mut pos = 0usize;
        let mut remaining = k;
        let mut acc = 0.0;
        for step in (0..self.log).rev() {
            let next = pos + (1 << step);
            if next < self.cnt.len() && self.cnt[next] < remaining {
                pos = next;
                remaining -= self.cnt[next];
                acc += self.sum[next];
            }
        }
        // pos is the count of ranks strictly before the k-th element
        (pos, acc)
    }
}

/// Sum of absolute deviations from the median of the `k` elements held in
/// `fw`, whose values total `total`.
fn sad(fw: &Fenwick, by_rank: &[f64], k: i64, total: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let h = (k - 1) / 2 + 1;
    let (rank, below) = fw.kth(h);
    let med = by_rank[rank];
    let sum_le = below + med;
    (med * h as f64 - sum_le) + ((total - sum_le) - med * (k - h) as f64)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

struct MaeCtx<'a> {
    data: &'a BinnedMatrix,
    y: &'a [f64],
    rank: Vec<usize>,
    by_rank: Vec<f64>,
    features: &'a [usize],
    params: &'a TreeParams,
}

fn grow_mae(
    ctx: &MaeCtx<'_>,
    rows: Vec<usize>,
    depth: usize,
    left_fw: &mut Fenwick,
    right_fw: &mut Fenwick,
    nodes: &mut Vec<Node>,
) -> usize {
    let n = rows.len();
    let mut vals: Vec<f64> = rows.iter().map(|&r| ctx.y[r]).collect();
    let id = nodes.len();
    nodes.push(Node::Leaf {
        value: median(&mut vals),
        count: n,
    });
    let params = ctx.params;
    if depth >= params.max_depth || n < params.min_samples_split {
        return id;
    }
    let total: f64 = rows.iter().map(|&r| ctx.y[r]).sum();
    for &r in &rows {
        right_fw.add(ctx.rank[r], 1, ctx.y[r]);
    }
    let parent = sad(right_fw, &ctx.by_rank, n as i64, total);
    let mut best: Option<Candidate> = None;
    for &f in ctx.features {
        let nb = ctx.data.n_bins[f];
        let col = &ctx.data.columns[f];
        let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); nb.max(1)];
        for &r in &rows {
            by_bin[(col[r] as usize).min(nb.max(1) - 1)].push(r);
        }
        let (mut ln, mut ls) = (0usize, 0.0);
        // after the scan every row sits in `left_fw`; swap so the next
        // feature starts with a full right side
        for (t, bucket) in by_bin.iter().enumerate() {
            for &r in bucket {
                right_fw.add(ctx.rank[r], -1, -ctx.y[r]);
                left_fw.add(ctx.rank[r], 1, ctx.y[r]);
                ln += 1;
                ls += ctx.y[r];
            }
            if t + 1 >= nb {
                continue;
            }
            let rn = n - ln;
            if ln < params.min_samples_leaf || rn < params.min_samples_leaf {
                continue;
            }
            let cost = sad(left_fw, &ctx.by_rank, ln as i64, ls)
                + sad(right_fw, &ctx.by_rank, rn as i64, total - ls);
            let gain = parent - cost;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold: t as u16,
                    gain,
                });
            }
        }
        std::mem::swap(left_fw, right_fw);
    }
    // leave both trees empty for the caller
    for &r in &rows {
        right_fw.add(ctx.rank[r], -1, -ctx.y[r]);
    }
    let Some(best) = best.filter(|b| b.gain > GAIN_EPS * (1.0 + parent)) else {
        return id;
    };
    let col = &ctx.data.columns[best.feature];
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| col[r] <= best.threshold);
    let left = grow_mae(ctx, left_rows, depth + 1, left_fw, right_fw, nodes);
    let right = grow_mae(ctx, right_rows, depth + 1, left_fw, right_fw, nodes);
    nodes[id] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    id
}

fn fit_with_features(
    data: &BinnedMatrix,
    y: &[f64],
    features: &[usize],
    params: &TreeParams,
) -> Result<RegressionTree> {
    params.validate()?;
    if data.rows == 0 || y.is_empty() {
        return Err(Error::Empty("training rows"));
    }
    if y.len() != data.rows {
        return Err(Error::LengthMismatch {
            expected: data.rows,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("tree targets must be finite"));
    }
    let rows: Vec<usize> = (0..data.rows).collect();
    let mut nodes = Vec::new();
    match params.criterion {
        SplitCriterion::Sse => {
            grow_sse(&Rows { data, y }, rows, features, &data.n_bins, params, 0, &mut nodes);
        }
        SplitCriterion::Mae => {
            let mut order: Vec<usize> = (0..y.len()).collect();
            order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
            let mut rank = vec![0usize; y.len()];
            for (k, &r) in order.iter().enumerate() {
                rank[r] = k;
            }
            let ctx = MaeCtx {
                data,
                y,
                rank,
                by_rank: order.iter().map(|&r| y[r]).collect(),
                features,
                params,
            };
            let mut a = Fenwick::new(y.len());
            let mut b = Fenwick::new(y.len());
            grow_mae(&ctx, rows, 0, &mut a, &mut b, &mut nodes);
        }
    }
    Ok(RegressionTree { nodes })
}

/// Greedy CART over every feature of `data`.
pub fn fit_cart(data: &BinnedMatrix, y: &[f64], params: &TreeParams) -> Result<RegressionTree> {
    let features: Vec<usize> = (0..data.n_features()).collect();
    fit_with_features(data, y, &features, params)
}

/// CART whose split search is limited to one or two features. Squared-error
/// trees are fitted on the cell histogram of the allowed features.
pub fn fit_restricted_tree(
    data: &BinnedMatrix,
    y: &[f64],
    allowed: &[usize],
    params: &TreeParams,
) -> Result<RegressionTree> {
    let mut features = allowed.to_vec();
    features.sort_unstable();
    features.dedup();
    if features.is_empty() || features.len() > 2 || features.len() != allowed.len() {
        return Err(Error::param("allowed features must be one or two distinct indices"));
    }
    if let Some(&f) = features.iter().find(|&&f| f >= data.n_features()) {
        return Err(Error::DimensionMismatch {
            expected: data.n_features(),
            got: f + 1,
        });
    }
    if params.criterion == SplitCriterion::Mae {
        return fit_with_features(data, y, &features, params);
    }
    if data.rows == 0 {
        return Err(Error::Empty("training rows"));
    }
    if y.len() != data.rows {
        return Err(Error::LengthMismatch {
            expected: data.rows,
            got: y.len(),
        });
    }
    let hist = match features[..] {
        [f] => CellHistogram::single(f, data.n_bins[f], &data.columns[f], y),
        [a, b] => CellHistogram::pair(
            (a, b),
            (data.n_bins[a], data.n_bins[b]),
            &data.columns[a],
            &data.columns[b],
            y,
        ),
        _ => unreachable!(),
    };
    hist.fit(params)
}

/// Leaf value for every row of `data`. Bins beyond a split's range route
/// like the nearest valid bin.
pub fn predict_tree(tree: &RegressionTree, data: &BinnedMatrix) -> Result<Vec<f64>> {
    if let Some(&f) = tree.features().last() {
        if f >= data.n_features() {
            return Err(Error::DimensionMismatch {
                expected: f + 1,
                got: data.n_features(),
            });
        }
    }
    Ok((0..data.rows)
        .map(|r| tree.predict_with(|f| data.columns[f][r]))
        .collect())
}

/// Evaluates a tree restricted to `features` (`(index, n_bins)`, one or two
/// entries) on every bin, or every bin pair in row-major order.
pub fn tree_as_bin_table(tree: &RegressionTree, features: &[(usize, usize)]) -> Result<Vec<f64>> {
    if features.is_empty() || features.len() > 2 {
        return Err(Error::param("bin tables cover one or two features"));
    }
    if let Some(f) = tree
        .features()
        .into_iter()
        .find(|f| !features.iter().any(|(g, _)| g == f))
    {
        return Err(Error::DisallowedFeature(f));
    }
    Ok(match features[..] {
        [(f, n)] => (0..n)
            .map(|b| tree.predict_with(|g| if g == f { b as u16 } else { 0 }))
            .collect(),
        [(fa, na), (fb, nb)] => {
            let mut table = Vec::with_capacity(na * nb);
            for a in 0..na {
                for b in 0..nb {
                    table.push(tree.predict_with(|g| {
                        if g == fa {
                            a as u16
                        } else if g == fb {
                            b as u16
                        } else {
                            0
                        }
                    }));
                }
            }
            table
        }
        _ => unreachable!(),
    })
}
