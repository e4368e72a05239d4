//! CART trees with Gini splits, and a bagged forest of them.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinMapper, BinnedData};
use super::tree::{Node, Tree};
use super::{Dataset, EnsembleModel, ModelError, ModelKind, ModelParams};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
    /// Features tried per split; `None` means ceil(sqrt(d)).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: 16,
            min_samples_leaf: 5,
            n_bins: 256,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Params(m.to_string()));
        if self.n_trees < 1 {
            return bad("n_trees must be >= 1");
        }
        if !(2..=256).contains(&self.n_bins) {
            return bad("n_bins must be in [2, 256]");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if self.max_features == Some(0) {
            return bad("max_features must be >= 1");
        }
        Ok(())
    }

    fn features_per_split(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1))
    }
}

/// Settings for a single unbagged tree over all features.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
}

struct Cart<'a, T> {
    binned: &'a BinnedData,
    mapper: &'a BinMapper<T>,
    labels: &'a [u8],
    max_depth: usize,
    min_leaf: usize,
    mtry: usize,
}

/// `n * gini`, i.e. twice the pos/neg product over n.
fn weighted_gini(n: usize, pos: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        2.0 * pos as f64 * (n - pos) as f64 / n as f64
    }
}

impl<T: Scalar> Cart<'_, T> {
    fn grow(&self, rows: Vec<u32>, rng: &mut ChaCha8Rng) -> Tree<T> {
        let d = self.mapper.cuts.len();
        let mut nodes: Vec<Node<T>> = vec![Node::Leaf { value: T::zero() }];
        // (node, rows, depth)
        let mut stack = vec![(0usize, rows, 0usize)];
        let mut counts = Vec::new();
        while let Some((nd, rows, depth)) = stack.pop() {
            let n = rows.len();
            let pos = rows.iter().filter(|&&r| self.labels[r as usize] == 1).count();
            let leaf = Node::Leaf {
                value: T::of(pos as f64 / n as f64),
            };
            if depth >= self.max_depth || n < 2 * self.min_leaf || pos == 0 || pos == n {
                nodes[nd] = leaf;
                continue;
            }
            let features: Vec<usize> = if self.mtry >= d {
                (0..d).collect()
            } else {
                let mut f = sample(rng, d, self.mtry).into_vec();
                f.sort_unstable();
                f
            };
            let parent = weighted_gini(n, pos);
            let mut best: Option<(f64, usize, u8)> = None;
            for f in features {
                let nb = self.mapper.n_bins(f);
                if nb < 2 {
                    continue;
                }
                counts.clear();
                counts.resize(nb, (0usize, 0usize));
                let col = self.binned.column(f);
                for &r in &rows {
                    let c = &mut counts[col[r as usize] as usize];
                    c.0 += 1;
                    c.1 += self.labels[r as usize] as usize;
                }
                let (mut nl, mut pl) = (0, 0);
                for (b, &(cn, cp)) in counts[..nb - 1].iter().enumerate() {
                    nl += cn;
                    pl += cp;
                    if nl < self.min_leaf || n - nl < self.min_leaf {
                        continue;
                    }
                    let imp = weighted_gini(nl, pl) + weighted_gini(n - nl, pos - pl);
                    if imp < parent - 1e-12 && best.is_none_or(|(bi, _, _)| imp < bi) {
                        best = Some((imp, f, b as u8));
                    }
                }
            }
            let Some((_, f, bin)) = best else {
                nodes[nd] = leaf;
                continue;
            };
            let col = self.binned.column(f);
            let (left, right): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(|&r| col[r as usize] <= bin);
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { value: T::zero() });
            nodes.push(Node::Leaf { value: T::zero() });
            nodes[nd] = Node::Split {
                feature: f as u32,
                threshold: self.mapper.cuts[f][bin as usize],
                left: l as u32,
                right: r as u32,
            };
            // right first so the left subtree is expanded first
            stack.push((r, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        Tree { nodes }
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// One CART tree over every row and every feature.
pub fn train_decision_tree<T: Scalar>(data: &Dataset<T>, params: &TreeParams) -> Result<Tree<T>, ModelError> {
    data.check_both_classes()?;
    if !(2..=256).contains(&params.n_bins) || params.min_samples_leaf < 1 {
        return Err(ModelError::Params("n_bins in [2, 256] and min_samples_leaf >= 1".into()));
    }
    let mapper = BinMapper::fit(data, params.n_bins);
    let binned = BinnedData::new(data, &mapper);
    let cart = Cart {
        binned: &binned,
        mapper: &mapper,
        labels: data.labels(),
        max_depth: params.max_depth,
        min_leaf: params.min_samples_leaf,
        mtry: data.n_cols(),
    };
    Ok(cart.grow((0..data.n_rows() as u32).collect(), &mut tree_rng(0, 0)))
}

pub fn train_random_forest<T: Scalar>(data: &Dataset<T>, params: &ForestParams) -> Result<EnsembleModel<T>, ModelError> {
    params.validate()?;
    data.check_both_classes()?;
    let n = data.n_rows();
    let mapper = BinMapper::fit(data, params.n_bins);
    let binned = BinnedData::new(data, &mapper);
    let cart = Cart {
        binned: &binned,
        mapper: &mapper,
        labels: data.labels(),
        max_depth: params.max_depth,
        min_leaf: params.min_samples_leaf,
        mtry: params.features_per_split(data.n_cols()),
    };
    let trees: Vec<Tree<T>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let rows: Vec<u32> = if params.bootstrap {
                let mut rows: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
                rows.sort_unstable();
                rows
            } else {
                (0..n as u32).collect()
            };
            cart.grow(rows, &mut rng)
        })
        .collect();
    Ok(EnsembleModel {
        kind: ModelKind::RandomForest,
        params: ModelParams::Forest(params.clone()),
        n_features: data.n_cols(),
        base_score: T::zero(),
        trees,
        loss_trace: Vec::new(),
    })
}
