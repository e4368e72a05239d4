//! Model file layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "NFPM"
//! version      u16      1
//! scalar       u8       4 (f32) or 8 (f64)
//! kind         u8       0 gbdt, 1 random forest
//! n_features   u32
//! base_score   f64
//! params       gbdt:   u32 n_trees, f64 learning_rate, u32 max_depth,
//!                      u32 min_samples_leaf, u32 n_bins, f64 subsample,
//!                      u64 seed, u8 balance_classes
//!              forest: u32 n_trees, u32 max_depth, u32 min_samples_leaf,
//!                      u32 n_bins, u32 max_features (0 = sqrt), u8 bootstrap,
//!                      u64 seed
//! loss trace   u32 count, then f64 each
//! trees        u32 count, then per tree u32 node count and per node
//!              u8 tag 0: f64 leaf value
//!              u8 tag 1: u32 feature, f64 threshold, u32 left, u32 right
//! ```
//!
//! Scalars are widened to f64 on write, which is lossless for f32.

use super::forest::ForestParams;
use super::gbdt::GbdtParams;
use super::tree::{Node, Tree};
use super::{EnsembleModel, ModelError, ModelKind, ModelParams};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"NFPM";
pub const FORMAT_VERSION: u16 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or(ModelError::Truncated)?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length"))
    }
    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<usize, ModelError> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn flag(&mut self) -> Result<bool, ModelError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(ModelError::Corrupt(format!("flag byte {b}"))),
        }
    }
}

pub fn serialize<T: Scalar>(model: &EnsembleModel<T>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u16(FORMAT_VERSION);
    w.u8(T::BYTES);
    w.u8(match model.kind {
        ModelKind::Gbdt => 0,
        ModelKind::RandomForest => 1,
    });
    w.u32(model.n_features);
    w.f64(model.base_score.f64());
    match &model.params {
        ModelParams::Gbdt(p) => {
            w.u32(p.n_trees);
            w.f64(p.learning_rate);
            w.u32(p.max_depth);
            w.u32(p.min_samples_leaf);
            w.u32(p.n_bins);
            w.f64(p.subsample);
            w.u64(p.seed);
            w.u8(p.balance_classes as u8);
        }
        ModelParams::Forest(p) => {
            w.u32(p.n_trees);
            w.u32(p.max_depth);
            w.u32(p.min_samples_leaf);
            w.u32(p.n_bins);
            w.u32(p.max_features.unwrap_or(0));
            w.u8(p.bootstrap as u8);
            w.u64(p.seed);
        }
    }
    w.u32(model.loss_trace.len());
    for &l in &model.loss_trace {
        w.f64(l);
    }
    w.u32(model.trees.len());
    for tree in &model.trees {
        w.u32(tree.nodes.len());
        for node in &tree.nodes {
            match *node {
                Node::Leaf { value } => {
                    w.u8(0);
                    w.f64(value.f64());
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.u8(1);
                    w.u32(feature as usize);
                    w.f64(threshold.f64());
                    w.u32(left as usize);
                    w.u32(right as usize);
                }
            }
        }
    }
    w.0
}

pub fn deserialize<T: Scalar>(bytes: &[u8]) -> Result<EnsembleModel<T>, ModelError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take().map_err(|_| ModelError::FormatVersionMismatch {
        found: "truncated header".into(),
    })?;
    if &magic != MAGIC {
        return Err(ModelError::FormatVersionMismatch {
            found: format!("magic {magic:02x?}"),
        });
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::FormatVersionMismatch {
            found: format!("version {version}"),
        });
    }
    let scalar = r.u8()?;
    if scalar != T::BYTES {
        return Err(ModelError::ScalarMismatch {
            expected: T::BYTES,
            found: scalar,
        });
    }
    let kind = match r.u8()? {
        0 => ModelKind::Gbdt,
        1 => ModelKind::RandomForest,
        k => return Err(ModelError::Corrupt(format!("model kind {k}"))),
    };
    let n_features = r.u32()?;
    let base_score = T::of(r.f64()?);
    let params = match kind {
        ModelKind::Gbdt => ModelParams::Gbdt(GbdtParams {
            n_trees: r.u32()?,
            learning_rate: r.f64()?,
            max_depth: r.u32()?,
            min_samples_leaf: r.u32()?,
            n_bins: r.u32()?,
            subsample: r.f64()?,
            seed: r.u64()?,
            balance_classes: r.flag()?,
        }),
        ModelKind::RandomForest => ModelParams::Forest(ForestParams {
            n_trees: r.u32()?,
            max_depth: r.u32()?,
            min_samples_leaf: r.u32()?,
            n_bins: r.u32()?,
            max_features: Some(r.u32()?).filter(|&m| m > 0),
            bootstrap: r.flag()?,
            seed: r.u64()?,
        }),
    };
    let n_loss = r.u32()?;
    let loss_trace = (0..n_loss).map(|_| r.f64()).collect::<Result<_, _>>()?;
    let n_trees = r.u32()?;
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for _ in 0..n_trees {
        let n_nodes = r.u32()?;
        if n_nodes == 0 {
            return Err(ModelError::Corrupt("empty tree".into()));
        }
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        for i in 0..n_nodes {
            nodes.push(match r.u8()? {
                0 => Node::Leaf { value: T::of(r.f64()?) },
                1 => {
                    let feature = r.u32()?;
                    let threshold = T::of(r.f64()?);
                    let (left, right) = (r.u32()?, r.u32()?);
                    if feature >= n_features || left <= i || right <= i || left >= n_nodes || right >= n_nodes {
                        return Err(ModelError::Corrupt(format!("node {i} references out of range")));
                    }
                    Node::Split {
                        feature: feature as u32,
                        threshold,
                        left: left as u32,
                        right: right as u32,
                    }
                }
                t => return Err(ModelError::Corrupt(format!("node tag {t}"))),
            });
        }
        trees.push(Tree { nodes });
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Corrupt("trailing bytes".into()));
    }
    Ok(EnsembleModel {
        kind,
        params,
        n_features,
        base_score,
        trees,
        loss_trace,
    })
}
