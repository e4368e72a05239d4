//! Per-feature cut points and the binned, column-major training view.

use crate::Scalar;

use super::Dataset;

/// Bin `b` of a feature holds values in `(cuts[b-1], cuts[b]]`, so routing
/// a value left of cut `b` is the same as `value <= cuts[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper<T> {
    pub cuts: Vec<Vec<T>>,
}

/// Midpoint that is strictly below `hi`, so `lo` goes left and `hi` right
/// even when the halfway value rounds up.
fn split_point<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::of(2.0);
    if mid < hi && mid >= lo {
        mid
    } else {
        lo
    }
}

/// Cut points for one column: midpoints between consecutive distinct
/// values, or between quantile boundaries when there are more distinct
/// values than bins.
pub fn feature_cuts<T: Scalar>(values: &[T], n_bins: usize) -> Vec<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= n_bins {
        return distinct.windows(2).map(|w| split_point(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<T> = Vec::with_capacity(n_bins - 1);
    for i in 1..n_bins {
        let lo = sorted[(i * n / n_bins).max(1) - 1];
        // first value strictly above lo
        let j = sorted.partition_point(|v| *v <= lo);
        if j == n {
            break;
        }
        let cut = split_point(lo, sorted[j]);
        if cuts.last().is_none_or(|last| cut > *last) {
            cuts.push(cut);
        }
    }
    cuts
}

impl<T: Scalar> BinMapper<T> {
    pub fn fit(data: &Dataset<T>, n_bins: usize) -> Self {
        let (n, d) = (data.n_rows(), data.n_cols());
        let cuts = (0..d)
            .map(|c| {
                let col: Vec<T> = (0..n).map(|r| data.get(r, c)).collect();
                feature_cuts(&col, n_bins)
            })
            .collect();
        BinMapper { cuts }
    }

    pub fn bin(&self, feature: usize, value: T) -> u8 {
        self.cuts[feature].partition_point(|c| *c < value) as u8
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }
}

/// Column-major bins plus, per feature, the rows that are not in its most
/// frequent bin. Histograms only touch those rows and recover the common
/// bin from node totals, which keeps sparse fingerprint columns cheap.
#[derive(Debug, Clone)]
pub struct BinnedData {
    pub n_rows: usize,
    pub bins: Vec<u8>,
    pub common_bin: Vec<u8>,
    pub uncommon_rows: Vec<Vec<u32>>,
}

impl BinnedData {
    pub fn new<T: Scalar>(data: &Dataset<T>, mapper: &BinMapper<T>) -> Self {
        let (n, d) = (data.n_rows(), data.n_cols());
        let mut bins = vec![0u8; n * d];
        let mut common_bin = vec![0u8; d];
        let mut uncommon_rows = Vec::with_capacity(d);
        for f in 0..d {
            let col = &mut bins[f * n..(f + 1) * n];
            let mut counts = vec![0usize; mapper.n_bins(f)];
            for (r, b) in col.iter_mut().enumerate() {
                *b = mapper.bin(f, data.get(r, f));
                counts[*b as usize] += 1;
            }
            // lowest bin wins ties
            let common = (0..counts.len()).max_by_key(|&b| (counts[b], std::cmp::Reverse(b))).unwrap_or(0) as u8;
            common_bin[f] = common;
            uncommon_rows.push((0..n as u32).filter(|&r| col[r as usize] != common).collect());
        }
        BinnedData {
            n_rows: n,
            bins,
            common_bin,
            uncommon_rows,
        }
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> u8 {
        self.bins[feature * self.n_rows + row]
    }

    pub fn column(&self, feature: usize) -> &[u8] {
        &self.bins[feature * self.n_rows..(feature + 1) * self.n_rows]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_cardinality_cuts_are_midpoints() {
        assert_eq!(feature_cuts(&[3.0, 1.0, 2.0, 1.0], 256), vec![1.5, 2.5]);
        assert_eq!(feature_cuts(&[0.0f32, 1.0, 1.0], 256), vec![0.5]);
        assert!(feature_cuts(&[4.0, 4.0], 256).is_empty());
    }

    #[test]
    fn quantile_cuts_cap_bin_count() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64).sqrt()).collect();
        let cuts = feature_cuts(&values, 16);
        assert!(cuts.len() <= 15 && cuts.len() >= 14);
        assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bin_routing_matches_threshold() {
        let cuts = vec![vec![1.5, 2.5]];
        let m = BinMapper { cuts };
        for (v, b) in [(1.0, 0), (1.5, 0), (2.0, 1), (2.5, 1), (9.0, 2)] {
            assert_eq!(m.bin(0, v), b);
        }
    }

    #[test]
    fn adjacent_floats_still_separate() {
        let a = 1.0f32;
        let b = f32::from_bits(a.to_bits() + 1);
        let cut = split_point(a, b);
        assert!(a <= cut && b > cut);
    }
}
