//! Golden fixture format: one record per line,
//! `SMILES<TAB>radius<TAB>width<TAB>comma-separated sorted bit indices`.
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenRecord {
    pub smiles: String,
    pub radius: u32,
    pub width: usize,
    pub bits: Vec<usize>,
}

impl GoldenRecord {
    pub fn to_line(&self) -> String {
        let mut s = format!("{}\t{}\t{}\t", self.smiles, self.radius, self.width);
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{b}").unwrap();
        }
        s
    }
}

pub fn parse_golden(text: &str) -> Result<Vec<GoldenRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, line)| {
            let bad = |what: &str| format!("line {}: {what}", n + 1);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 tab-separated columns"));
            }
            let bits = if cols[3].is_empty() {
                Vec::new()
            } else {
                cols[3]
                    .split(',')
                    .map(|b| b.parse().map_err(|_| bad("bad bit index")))
                    .collect::<Result<Vec<usize>, _>>()?
            };
            Ok(GoldenRecord {
                smiles: cols[0].to_string(),
                radius: cols[1].parse().map_err(|_| bad("bad radius"))?,
                width: cols[2].parse().map_err(|_| bad("bad width"))?,
                bits,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let r = GoldenRecord {
            smiles: "CCO".into(),
            radius: 2,
            width: 1024,
            bits: vec![1, 80, 900],
        };
        assert_eq!(r.to_line(), "CCO\t2\t1024\t1,80,900");
        assert_eq!(parse_golden(&format!("# header\n{}\n", r.to_line())).unwrap(), vec![r]);
        assert!(parse_golden("CCO\t2\t1024").is_err());
    }
}
