//! External CSV to the internal dataset layout.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use cpte_core::{Dataset, Matrix};

use crate::config::IngestConfig;
use crate::error::{CliError, Stage};
use crate::io;

fn is_missing(s: &str) -> bool {
    let s = s.trim();
    s.is_empty() || ["na", "n/a", "nan", "null"].iter().any(|m| s.eq_ignore_ascii_case(m))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    /// Internal feature name and its source, e.g. `("x3", "site=north")`.
    pub features: Vec<(String, String)>,
    pub filled: Vec<(String, usize, f64)>,
}

impl IngestReport {
    pub fn dropped(&self) -> usize {
        self.rows_read - self.rows_kept
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "read {} rows, kept {}, dropped {} (missing outcome)\n",
            self.rows_read,
            self.rows_kept,
            self.dropped()
        );
        for (col, k, m) in &self.filled {
            s += &format!("filled {k} missing value(s) in {col} with median {m}\n");
        }
        s += "feature map:\n";
        for (x, src) in &self.features {
            s += &format!("  {x} <- {src}\n");
        }
        s
    }
}

pub fn ingest(spec: &IngestConfig, data_path: &Path, out: &Path) -> Result<IngestReport, CliError> {
    if spec.outcomes.is_empty() {
        return Err(CliError::Schema("ingest: at least one outcome column is required".into()));
    }
    if !spec.orientation.is_empty() && spec.orientation.len() != spec.outcomes.len() {
        return Err(CliError::Schema(format!(
            "ingest: {} orientation value(s) for {} outcome(s)",
            spec.orientation.len(),
            spec.outcomes.len()
        )));
    }
    let f = std::fs::File::open(data_path).map_err(|e| CliError::io(format!("reading {}", data_path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f);
    let headers = rdr.headers()?.clone();
    let pos: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let col = |name: &str| {
        pos.get(name)
            .copied()
            .ok_or_else(|| CliError::Schema(format!("missing column `{name}`")))
    };
    let t_col = col(&spec.treatment)?;
    let y_cols = spec.outcomes.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    let cat_cols = spec.categorical.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    let cont_cols = spec.continuous.iter().map(|c| col(c)).collect::<Result<Vec<_>, _>>()?;
    if cat_cols.is_empty() && cont_cols.is_empty() {
        return Err(CliError::Schema("ingest: no feature columns declared".into()));
    }

    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    let rows_read = records.len();

    let mut kept = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    'rows: for (i, rec) in records.iter().enumerate() {
        let tv = &rec[t_col];
        let ti = match tv.trim() {
            "0" | "0.0" => false,
            "1" | "1.0" => true,
            _ => {
                return Err(CliError::Schema(format!(
                    "treatment column `{}` is not binary: row {} has {tv:?}",
                    spec.treatment,
                    i + 1
                )))
            }
        };
        let mut yr = Vec::with_capacity(y_cols.len());
        for (&c, name) in y_cols.iter().zip(&spec.outcomes) {
            if is_missing(&rec[c]) {
                continue 'rows;
            }
            yr.push(parse(&rec[c], name, i)?);
        }
        kept.push(i);
        t.push(ti);
        y.extend(yr);
    }
    if kept.is_empty() {
        return Err(CliError::Degenerate(format!("all {rows_read} rows dropped for missing outcomes")));
    }

    let mut features = Vec::new();
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut filled = Vec::new();
    for (&c, name) in cont_cols.iter().zip(&spec.continuous) {
        let mut vals = Vec::with_capacity(kept.len());
        for &i in &kept {
            let s = &records[i][c];
            vals.push(if is_missing(s) { None } else { Some(parse(s, name, i)?) });
        }
        let present: Vec<f64> = vals.iter().flatten().copied().collect();
        if present.is_empty() {
            return Err(CliError::Schema(format!("continuous column `{name}` has no values")));
        }
        let m = median(present);
        let missing = vals.iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            filled.push((name.clone(), missing, m));
        }
        features.push(name.clone());
        blocks.push(vals.into_iter().map(|v| vec![v.unwrap_or(m)]).collect());
    }
    for (&c, name) in cat_cols.iter().zip(&spec.categorical) {
        let levels: BTreeSet<&str> = kept.iter().map(|&i| records[i][c].trim()).filter(|s| !is_missing(s)).collect();
        let levels: Vec<&str> = levels.into_iter().collect();
        features.extend(levels.iter().map(|l| format!("{name}={l}")));
        blocks.push(
            kept.iter()
                .map(|&i| {
                    let v = records[i][c].trim();
                    levels.iter().map(|l| if *l == v { 1.0 } else { 0.0 }).collect()
                })
                .collect(),
        );
    }

    let p = features.len();
    let mut x = Vec::with_capacity(kept.len() * p);
    for r in 0..kept.len() {
        for b in &blocks {
            x.extend_from_slice(&b[r]);
        }
    }
    let d = spec.outcomes.len();
    let data = Dataset::new(
        Matrix::from_vec(x, p).map_err(|e| CliError::from_core(e, Stage::Data))?,
        t,
        Matrix::from_vec(y, d).map_err(|e| CliError::from_core(e, Stage::Data))?,
    )
    .map_err(|e| CliError::from_core(e, Stage::Data))?;
    io::write_dataset(out, &data, None)?;

    Ok(IngestReport {
        rows_read,
        rows_kept: kept.len(),
        features: features.into_iter().enumerate().map(|(j, s)| (format!("x{j}"), s)).collect(),
        filled,
    })
}

fn parse(s: &str, col: &str, row: usize) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Schema(format!("column `{col}`, row {}: cannot parse {s:?} as a number", row + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tokens() {
        for s in ["", " ", "NA", "n/a", "NaN", "null"] {
            assert!(is_missing(s), "{s:?}");
        }
        assert!(!is_missing("0"));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
