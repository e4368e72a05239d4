use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{create, format_err, open, ExperimentError, SplitConfig};

/// Row indices into the imputed matrix, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles each class with the configured seed and sends
/// `round(train_fraction * n_class)` rows of it to training, keeping at
/// least one row of every class on each side. Without stratification the
/// whole table is shuffled once.
pub fn stratified_split(ids: &[String], labels: &[u8], cfg: &SplitConfig) -> Result<Split, ExperimentError> {
    if ids.len() != labels.len() {
        return Err(ExperimentError::Data("split: ids and labels differ in length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let groups: Vec<Vec<usize>> = if cfg.stratified {
        [0u8, 1]
            .iter()
            .map(|&y| (0..labels.len()).filter(|&i| labels[i] == y).collect())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut g in groups {
        g.shuffle(&mut rng);
        let mut k = (cfg.train_fraction * g.len() as f64).round() as usize;
        if g.len() >= 2 {
            k = k.clamp(1, g.len() - 1);
        }
        train.extend_from_slice(&g[..k]);
        test.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    for (name, side) in [("training", &train), ("test", &test)] {
        let pos = side.iter().filter(|&&i| labels[i] == 1).count();
        if pos == 0 || pos == side.len() {
            return Err(ExperimentError::Data(format!("the {name} split does not contain both classes")));
        }
    }
    Ok(Split { train, test })
}

impl Split {
    /// `stay_id,partition` in matrix row order.
    pub fn write_csv(&self, ids: &[String], path: &Path) -> Result<(), ExperimentError> {
        let mut side = vec![""; ids.len()];
        for &i in &self.train {
            side[i] = "train";
        }
        for &i in &self.test {
            side[i] = "test";
        }
        let mut w = csv::Writer::from_writer(create(path)?);
        let err = |e: csv::Error| format_err(path)(e.to_string());
        w.write_record(["stay_id", "partition"]).map_err(err)?;
        for (id, s) in ids.iter().zip(side) {
            w.write_record([id.as_str(), s]).map_err(err)?;
        }
        w.flush().map_err(|e| format_err(path)(e.to_string()))
    }

    /// Maps a saved split onto the rows of `ids`.
    pub fn read_csv(ids: &[String], path: &Path) -> Result<Self, ExperimentError> {
        let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut rdr = csv::Reader::from_reader(open(path)?);
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| format_err(path)(e.to_string()))?;
            let i = *pos
                .get(&rec[0])
                .ok_or_else(|| format_err(path)(format!("unknown stay {}", &rec[0])))?;
            match rec.get(1) {
                Some("train") => train.push(i),
                Some("test") => test.push(i),
                other => return Err(format_err(path)(format!("bad partition {other:?}"))),
            }
        }
        train.sort_unstable();
        test.sort_unstable();
        if train.len() + test.len() != ids.len() {
            return Err(format_err(path)("split does not cover every row".into()));
        }
        Ok(Split { train, test })
    }
}
