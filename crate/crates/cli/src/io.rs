//! CSV interchange.
//!
//! Dataset columns: `x0..x{p-1}`, `t` (0/1), then `y` (one outcome) or
//! `y_0..y_{d-1}`. Generated files may append the hidden potential outcomes
//! (`y0`, `y1`, or `y0_{c}`, `y1_{c}` per coordinate) and `propensity`;
//! readers ignore those.

use std::fs::File;
use std::path::Path;

use cpte_core::{Dataset, Matrix};

use crate::error::{CliError, Stage};

pub fn create_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    let f = File::create(path).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn write_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(format!("writing {}", path.display()), io),
        other => CliError::Schema(format!("csv: {other:?}")),
    }
}

pub fn outcome_names(d: usize) -> Vec<String> {
    if d == 1 {
        vec!["y".into()]
    } else {
        (0..d).map(|c| format!("y_{c}")).collect()
    }
}

fn potential_names(arm: usize, d: usize) -> Vec<String> {
    if d == 1 {
        vec![format!("y{arm}")]
    } else {
        (0..d).map(|c| format!("y{arm}_{c}")).collect()
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Hidden columns written with `--with-oracle`.
pub struct OracleColumns<'a> {
    pub y0: &'a Matrix,
    pub y1: &'a Matrix,
    pub propensity: &'a [f64],
}

pub fn write_dataset(path: &Path, data: &Dataset, oracle: Option<OracleColumns<'_>>) -> Result<(), CliError> {
    let d = data.outcome_dim();
    let mut header: Vec<String> = (0..data.n_features()).map(|j| format!("x{j}")).collect();
    header.push("t".into());
    header.extend(outcome_names(d));
    if oracle.is_some() {
        header.extend(potential_names(0, d));
        header.extend(potential_names(1, d));
        header.push("propensity".into());
    }
    let mut w = create_writer(path)?;
    let err = write_err(path);
    w.write_record(&header).map_err(&err)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.x.row(i).iter().map(|&v| fmt(v)).collect();
        rec.push(if data.t[i] { "1" } else { "0" }.into());
        rec.extend(data.y.row(i).iter().map(|&v| fmt(v)));
        if let Some(o) = &oracle {
            rec.extend(o.y0.row(i).iter().map(|&v| fmt(v)));
            rec.extend(o.y1.row(i).iter().map(|&v| fmt(v)));
            rec.push(fmt(o.propensity[i]));
        }
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    X(usize),
    T,
    Y(usize),
    Propensity,
    Ignored,
}

fn indexed(name: &str, prefix: &str) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
        return None;
    }
    rest.parse().ok()
}

fn role(name: &str) -> Option<Role> {
    if let Some(j) = indexed(name, "x") {
        return Some(Role::X(j));
    }
    if let Some(c) = indexed(name, "y_") {
        return Some(Role::Y(c));
    }
    if name == "y0" || name == "y1" || indexed(name, "y0_").is_some() || indexed(name, "y1_").is_some() {
        return Some(Role::Ignored);
    }
    match name {
        "t" => Some(Role::T),
        "y" => Some(Role::Y(0)),
        "propensity" => Some(Role::Propensity),
        _ => None,
    }
}

/// Checks that the indices of one column family run `0..k` with no gaps.
fn contiguous(name: &str, mut idx: Vec<usize>) -> Result<usize, CliError> {
    idx.sort_unstable();
    for (want, &got) in idx.iter().enumerate() {
        if want != got {
            let col = if name == "y" { format!("y_{want}") } else { format!("{name}{want}") };
            return Err(CliError::Schema(format!("missing column `{col}`")));
        }
    }
    Ok(idx.len())
}

fn parse_cell(s: &str, col: &str, row: usize) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Schema(format!("column `{col}`, row {}: cannot parse {s:?} as a number", row + 1)))?;
    if !v.is_finite() {
        return Err(CliError::Schema(format!("column `{col}`, row {}: non-finite value", row + 1)));
    }
    Ok(v)
}

/// A dataset as read back, with the stored propensities when present.
pub struct LoadedData {
    pub data: Dataset,
    pub propensity: Option<Vec<f64>>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn header_roles(headers: &csv::StringRecord) -> Result<Vec<Role>, CliError> {
    headers
        .iter()
        .map(|h| role(h).ok_or_else(|| CliError::Schema(format!("unknown column `{h}`"))))
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<LoadedData, CliError> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let roles = header_roles(&headers)?;
    let p = contiguous("x", roles.iter().filter_map(|r| if let Role::X(j) = r { Some(*j) } else { None }).collect())?;
    let d = contiguous("y", roles.iter().filter_map(|r| if let Role::Y(c) = r { Some(*c) } else { None }).collect())?;
    if !roles.contains(&Role::T) {
        return Err(CliError::Schema("missing column `t`".into()));
    }
    if d == 0 {
        return Err(CliError::Schema("missing column `y`".into()));
    }
    if p == 0 {
        return Err(CliError::Schema("missing column `x0`".into()));
    }
    let has_prop = roles.contains(&Role::Propensity);

    let (mut x, mut t, mut y, mut prop) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let (mut xr, mut yr) = (vec![0.0; p], vec![0.0; d]);
        for ((cell, &r), name) in rec.iter().zip(&roles).zip(headers.iter()) {
            match r {
                Role::X(j) => xr[j] = parse_cell(cell, name, i)?,
                Role::Y(c) => yr[c] = parse_cell(cell, name, i)?,
                Role::T => t.push(match cell {
                    "0" => false,
                    "1" => true,
                    _ => {
                        return Err(CliError::Schema(format!(
                            "column `t`, row {}: expected 0 or 1, got {cell:?}",
                            i + 1
                        )))
                    }
                }),
                Role::Propensity => prop.push(parse_cell(cell, name, i)?),
                Role::Ignored => {}
            }
        }
        x.extend(xr);
        y.extend(yr);
    }
    if t.is_empty() {
        return Err(CliError::Degenerate(format!("{}: no data rows", path.display())));
    }
    let data = Dataset::new(
        Matrix::from_vec(x, p).map_err(|e| CliError::from_core(e, Stage::Data))?,
        t,
        Matrix::from_vec(y, d).map_err(|e| CliError::from_core(e, Stage::Data))?,
    )
    .map_err(|e| CliError::from_core(e, Stage::Data))?;
    Ok(LoadedData {
        data,
        propensity: has_prop.then_some(prop),
    })
}

/// Query points: the `x` columns of any dataset-shaped CSV, other known columns ignored.
pub fn read_points(path: &Path, p: usize) -> Result<Matrix, CliError> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let roles = header_roles(&headers)?;
    let got = contiguous("x", roles.iter().filter_map(|r| if let Role::X(j) = r { Some(*j) } else { None }).collect())?;
    if got != p {
        let col = if got < p { format!("x{got}") } else { format!("x{p}") };
        return Err(CliError::Schema(format!(
            "points have {got} feature column(s), data has {p}: first mismatched column `{col}`"
        )));
    }
    let mut x = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut xr = vec![0.0; p];
        for ((cell, &r), name) in rec.iter().zip(&roles).zip(headers.iter()) {
            if let Role::X(j) = r {
                xr[j] = parse_cell(cell, name, i)?;
            }
        }
        x.extend(xr);
    }
    Matrix::from_vec(x, p).map_err(|e| CliError::from_core(e, Stage::Data))
}
