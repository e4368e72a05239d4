//! Second-order gradient boosting on binned features with a logistic loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinMapper, BinnedData};
use super::tree::{Node, Tree};
use super::{Dataset, EnsembleModel, ModelError, ModelKind, ModelParams};
use crate::Scalar;

/// Leaf regularizer on the hessian sum.
pub const LAMBDA: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
    pub subsample: f64,
    pub seed: u64,
    /// Weight positives by negatives/positives.
    pub balance_classes: bool,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 200,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 20,
            n_bins: 256,
            subsample: 1.0,
            seed: 0,
            balance_classes: false,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Params(m.to_string()));
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(2..=256).contains(&self.n_bins) {
            return bad("n_bins must be in [2, 256]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Stats {
    g: f64,
    h: f64,
    n: u32,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn score(self) -> f64 {
        self.g * self.g / (self.h + LAMBDA)
    }

    fn leaf(self) -> f64 {
        -self.g / (self.h + LAMBDA)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: u8,
    left: Stats,
    right: Stats,
}

fn gain(parent: Stats, left: Stats, right: Stats) -> f64 {
    0.5 * (left.score() + right.score() - parent.score())
}

/// Best split of one feature for every active slot.
fn best_for_feature(
    binned: &BinnedData,
    n_bins: usize,
    feature: usize,
    slot_of_row: &[i32],
    totals: &[Stats],
    splittable: &[bool],
    grad: &[f64],
    hess: &[f64],
    min_leaf: u32,
) -> Vec<Option<Candidate>> {
    let n_slots = totals.len();
    let mut hist = vec![Stats::default(); n_slots * n_bins];
    let col = binned.column(feature);
    for &r in &binned.uncommon_rows[feature] {
        let r = r as usize;
        let s = slot_of_row[r];
        if s >= 0 {
            hist[s as usize * n_bins + col[r] as usize].add(grad[r], hess[r]);
        }
    }
    let common = binned.common_bin[feature] as usize;
    (0..n_slots)
        .map(|s| {
            if !splittable[s] {
                return None;
            }
            let h = &mut hist[s * n_bins..(s + 1) * n_bins];
            let others = h.iter().fold(Stats::default(), |mut a, b| {
                a.g += b.g;
                a.h += b.h;
                a.n += b.n;
                a
            });
            h[common] = totals[s].minus(others);
            let mut best: Option<Candidate> = None;
            let mut left = Stats::default();
            for b in 0..n_bins - 1 {
                left.g += h[b].g;
                left.h += h[b].h;
                left.n += h[b].n;
                let right = totals[s].minus(left);
                if left.n < min_leaf || right.n < min_leaf {
                    continue;
                }
                let g = gain(totals[s], left, right);
                if g > MIN_GAIN && best.is_none_or(|c| g > c.gain) {
                    best = Some(Candidate { gain: g, feature, bin: b as u8, left, right });
                }
            }
            best
        })
        .collect()
}

/// Best split per slot over all features; ties go to the lower feature
/// index, then the lower threshold.
fn best_splits(
    binned: &BinnedData,
    mapper_bins: &[usize],
    slot_of_row: &[i32],
    totals: &[Stats],
    splittable: &[bool],
    grad: &[f64],
    hess: &[f64],
    min_leaf: u32,
) -> Vec<Option<Candidate>> {
    let per_feature: Vec<Vec<Option<Candidate>>> = (0..mapper_bins.len())
        .into_par_iter()
        .map(|f| {
            if mapper_bins[f] < 2 {
                return vec![None; totals.len()];
            }
            best_for_feature(binned, mapper_bins[f], f, slot_of_row, totals, splittable, grad, hess, min_leaf)
        })
        .collect();
    let mut best = vec![None::<Candidate>; totals.len()];
    for cands in per_feature {
        for (b, c) in best.iter_mut().zip(cands) {
            if let Some(c) = c {
                if b.is_none_or(|cur| c.gain > cur.gain) {
                    *b = Some(c);
                }
            }
        }
    }
    best
}

struct Grower<'a, T> {
    binned: &'a BinnedData,
    mapper: &'a BinMapper<T>,
    n_bins: Vec<usize>,
    max_depth: usize,
    min_leaf: u32,
}

impl<T: Scalar> Grower<'_, T> {
    /// Grows one level-wise tree on the in-bag rows and returns it with
    /// the f64 leaf value reached by every row.
    fn grow(&self, grad: &[f64], hess: &[f64], in_bag: &[bool]) -> (Tree<T>, Vec<f64>) {
        let n = self.binned.n_rows;
        let mut root = Stats::default();
        for r in (0..n).filter(|&r| in_bag[r]) {
            root.add(grad[r], hess[r]);
        }
        let mut nodes: Vec<Node<T>> = vec![Node::Leaf { value: T::zero() }];
        let mut leaf_f64: Vec<f64> = vec![0.0];
        let mut node_of_row = vec![0u32; n];
        // (node index, stats) of nodes that may still split
        let mut active: Vec<(usize, Stats)> = vec![(0, root)];

        for _depth in 0..self.max_depth {
            if active.is_empty() {
                break;
            }
            let mut slot_of_node = vec![-1i32; nodes.len()];
            for (s, &(nd, _)) in active.iter().enumerate() {
                slot_of_node[nd] = s as i32;
            }
            let slot_of_row: Vec<i32> = (0..n)
                .map(|r| if in_bag[r] { slot_of_node[node_of_row[r] as usize] } else { -1 })
                .collect();
            let totals: Vec<Stats> = active.iter().map(|a| a.1).collect();
            let splittable: Vec<bool> = totals.iter().map(|t| t.n >= 2 * self.min_leaf).collect();
            let cands = best_splits(
                self.binned,
                &self.n_bins,
                &slot_of_row,
                &totals,
                &splittable,
                grad,
                hess,
                self.min_leaf,
            );

            let mut split_of_node: Vec<Option<(usize, u8, u32, u32)>> = vec![None; nodes.len()];
            let mut next = Vec::new();
            for (&(nd, stats), cand) in active.iter().zip(cands) {
                match cand {
                    Some(c) => {
                        let (l, r) = (nodes.len() as u32, nodes.len() as u32 + 1);
                        nodes.push(Node::Leaf { value: T::zero() });
                        nodes.push(Node::Leaf { value: T::zero() });
                        leaf_f64.extend([0.0, 0.0]);
                        nodes[nd] = Node::Split {
                            feature: c.feature as u32,
                            threshold: self.mapper.cuts[c.feature][c.bin as usize],
                            left: l,
                            right: r,
                        };
                        split_of_node[nd] = Some((c.feature, c.bin, l, r));
                        next.push((l as usize, c.left));
                        next.push((r as usize, c.right));
                    }
                    None => {
                        leaf_f64[nd] = stats.leaf();
                        nodes[nd] = Node::Leaf { value: T::of(stats.leaf()) };
                    }
                }
            }
            for (r, nd) in node_of_row.iter_mut().enumerate() {
                if let Some((f, bin, l, rt)) = split_of_node[*nd as usize] {
                    *nd = if self.binned.get(r, f) <= bin { l } else { rt };
                }
            }
            active = next;
        }
        for (nd, stats) in active {
            leaf_f64[nd] = stats.leaf();
            nodes[nd] = Node::Leaf { value: T::of(stats.leaf()) };
        }
        let per_row = node_of_row.iter().map(|&nd| leaf_f64[nd as usize]).collect();
        (Tree { nodes }, per_row)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Weighted mean logistic loss of raw scores.
fn log_loss(raw: &[f64], labels: &[u8], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((&f, &y), &w) in raw.iter().zip(labels).zip(weights) {
        // log(1 + e^f) - y f, computed stably
        let softplus = if f > 0.0 { f + (-f).exp().ln_1p() } else { f.exp().ln_1p() };
        total += w * (softplus - y as f64 * f);
    }
    total / weights.iter().sum::<f64>()
}

pub fn train_gbdt<T: Scalar>(data: &Dataset<T>, params: &GbdtParams) -> Result<EnsembleModel<T>, ModelError> {
    params.validate()?;
    data.check_both_classes()?;
    let n = data.n_rows();
    let labels = data.labels();
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let pos_weight = if params.balance_classes { (n as f64 - n_pos) / n_pos } else { 1.0 };
    let weights: Vec<f64> = labels.iter().map(|&y| if y == 1 { pos_weight } else { 1.0 }).collect();
    let w_pos = n_pos * pos_weight;
    let rate = w_pos / weights.iter().sum::<f64>();
    let base = (rate / (1.0 - rate)).ln();

    let mapper = BinMapper::fit(data, params.n_bins);
    let binned = BinnedData::new(data, &mapper);
    let grower = Grower {
        binned: &binned,
        mapper: &mapper,
        n_bins: (0..data.n_cols()).map(|f| mapper.n_bins(f)).collect(),
        max_depth: params.max_depth,
        min_leaf: params.min_samples_leaf as u32,
    };

    let mut raw = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut in_bag = vec![true; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut loss_trace = vec![log_loss(&raw, labels, &weights)];
    for _ in 0..params.n_trees {
        for r in 0..n {
            let p = sigmoid(raw[r]);
            grad[r] = weights[r] * (p - labels[r] as f64);
            hess[r] = weights[r] * p * (1.0 - p);
        }
        if params.subsample < 1.0 {
            for b in in_bag.iter_mut() {
                *b = rng.random_bool(params.subsample);
            }
        }
        let (tree, leaf_per_row) = grower.grow(&grad, &hess, &in_bag);
        for (f, v) in raw.iter_mut().zip(&leaf_per_row) {
            *f += params.learning_rate * v;
        }
        loss_trace.push(log_loss(&raw, labels, &weights));
        trees.push(tree);
    }
    Ok(EnsembleModel {
        kind: ModelKind::Gbdt,
        params: ModelParams::Gbdt(params.clone()),
        n_features: data.n_cols(),
        base_score: T::of(base),
        trees,
        loss_trace,
    })
}

/// A chosen split: feature, threshold and second-order gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: f64,
}

/// Root split found through the binned histograms.
pub fn histogram_root_split<T: Scalar>(
    data: &Dataset<T>,
    grad: &[f64],
    hess: &[f64],
    n_bins: usize,
    min_leaf: usize,
) -> Option<SplitChoice<T>> {
    let mapper = BinMapper::fit(data, n_bins);
    let binned = BinnedData::new(data, &mapper);
    let mut root = Stats::default();
    for r in 0..data.n_rows() {
        root.add(grad[r], hess[r]);
    }
    let bins: Vec<usize> = (0..data.n_cols()).map(|f| mapper.n_bins(f)).collect();
    let slot = vec![0i32; data.n_rows()];
    let c = best_splits(&binned, &bins, &slot, &[root], &[true], grad, hess, min_leaf as u32)[0]?;
    Some(SplitChoice {
        feature: c.feature,
        threshold: mapper.cuts[c.feature][c.bin as usize],
        gain: c.gain,
    })
}

/// Root split by sorting every feature and trying every midpoint between
/// distinct values. Reference for the histogram search.
pub fn exact_root_split<T: Scalar>(
    data: &Dataset<T>,
    grad: &[f64],
    hess: &[f64],
    min_leaf: usize,
) -> Option<SplitChoice<T>> {
    let n = data.n_rows();
    let mut root = Stats::default();
    for r in 0..n {
        root.add(grad[r], hess[r]);
    }
    let mut best: Option<SplitChoice<T>> = None;
    for f in 0..data.n_cols() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data.get(a, f).partial_cmp(&data.get(b, f)).unwrap());
        let mut left = Stats::default();
        for i in 0..n - 1 {
            let r = order[i];
            left.add(grad[r], hess[r]);
            let (v, next) = (data.get(r, f), data.get(order[i + 1], f));
            if v == next {
                continue;
            }
            let right = root.minus(left);
            if (left.n as usize) < min_leaf || (right.n as usize) < min_leaf {
                continue;
            }
            let g = gain(root, left, right);
            if g > MIN_GAIN && best.is_none_or(|b| g > b.gain) {
                let threshold = super::binning::feature_cuts(&[v, next], 2)[0];
                best = Some(SplitChoice { feature: f, threshold, gain: g });
            }
        }
    }
    best
}
