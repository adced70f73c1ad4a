//! Series tables, stationarity transforms and the direct-forecast regression
//! design.
//!
//! Time is indexed by the row of the raw table throughout; values that are
//! undefined at a given row (first differences, lags, h-step targets) are
//! carried as `NaN` until rows are selected.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw panel: one date column plus `N` numeric series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// `columns[j][t]`, all of equal length.
    pub columns: Vec<Vec<f64>>,
    /// Transform code per series (1 = level, 5 = log first difference).
    pub codes: Vec<u8>,
}

impl SeriesTable {
    pub fn new(dates: Vec<String>, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Structure(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = dates.len();
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::Structure(format!(
                "column {} has {} rows, expected {n}",
                names[j],
                c.len()
            )));
        }
        let codes = vec![1; columns.len()];
        Ok(SeriesTable {
            dates,
            names,
            columns,
            codes,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
            .ok_or_else(|| Error::Data(format!("no series named {name:?}")))
    }

    /// Attach transform codes by series name. Unlisted series keep their
    /// current code.
    pub fn set_codes(&mut self, codes: &BTreeMap<String, u8>) -> Result<()> {
        for (name, &code) in codes {
            check_code(code)?;
            let j = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Config(format!("transform code for unknown series {name:?}")))?;
            self.codes[j] = code;
        }
        Ok(())
    }

    /// Apply every series' transform, keeping the row index (undefined
    /// leading values become `NaN`).
    pub fn transformed(&self) -> Result<SeriesTable> {
        let mut columns = Vec::with_capacity(self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            let code = self.codes[j];
            check_code(code)?;
            let mut out = vec![f64::NAN; col.len()];
            match code {
                1 => out.copy_from_slice(col),
                _ => {
                    if let Some(t) = col.iter().position(|v| v.is_finite() && *v <= 0.0) {
                        return Err(Error::Data(format!(
                            "series {} has nonpositive value {} at row {t} under code 5",
                            self.names[j], col[t]
                        )));
                    }
                    for t in 1..col.len() {
                        out[t] = (col[t] / col[t - 1]).ln();
                    }
                }
            }
            columns.push(out);
        }
        Ok(SeriesTable {
            dates: self.dates.clone(),
            names: self.names.clone(),
            columns,
            codes: vec![1; self.codes.len()],
        })
    }

    /// Drop leading rows in which any series is missing. Interior gaps are
    /// rejected.
    pub fn trim_leading_missing(&self) -> Result<SeriesTable> {
        let start = (0..self.len())
            .find(|&t| self.columns.iter().all(|c| c[t].is_finite()))
            .ok_or_else(|| Error::Data("no row without missing values".into()))?;
        for (j, c) in self.columns.iter().enumerate() {
            if let Some(t) = c[start..].iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "series {} has a missing value at row {} after the leading block",
                    self.names[j],
                    start + t
                )));
            }
        }
        Ok(SeriesTable {
            dates: self.dates[start..].to_vec(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c[start..].to_vec()).collect(),
            codes: self.codes.clone(),
        })
    }
}

fn check_code(code: u8) -> Result<()> {
    match code {
        1 | 5 => Ok(()),
        other => Err(Error::Config(format!(
            "transform code {other} not supported (only 1 and 5)"
        ))),
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|e| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("{s:?}: {e}"),
    })
}

/// Read a comma-separated table with a header row and a leading date column.
///
/// A row whose first cell is `transform` (FRED-QD layout) supplies the
/// transform codes; empty and `NA` cells are read as missing.
pub fn load_table(path: impl AsRef<Path>) -> Result<SeriesTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file)
}

pub fn read_table<R: std::io::Read>(reader: R) -> Result<SeriesTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Structure(e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(Error::Structure(
            "need a date column and at least one series".into(),
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    let mut codes: Option<Vec<u8>> = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => {
                Error::Structure(format!("ragged row {row}: {e}"))
            }
            _ => Error::Structure(e.to_string()),
        })?;
        let first = record.get(0).unwrap_or_default();
        if first.eq_ignore_ascii_case("transform") {
            let mut c = Vec::with_capacity(names.len());
            for (j, cell) in record.iter().skip(1).enumerate() {
                let v = parse_cell(cell, row, &names[j])?;
                let code = v as u8;
                if v.fract() != 0.0 || !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: names[j].clone(),
                        message: format!("transform code {cell:?}"),
                    });
                }
                check_code(code)?;
                c.push(code);
            }
            codes = Some(c);
            continue;
        }
        if first.eq_ignore_ascii_case("factors") {
            continue;
        }
        dates.push(first.to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            columns[j].push(parse_cell(cell, row, &names[j])?);
        }
    }
    let mut table = SeriesTable::new(dates, names, columns)?;
    if let Some(c) = codes {
        table.codes = c;
    }
    Ok(table)
}

/// Write a table in the layout accepted by [`read_table`].
pub fn write_table<W: std::io::Write>(table: &SeriesTable, writer: W, with_codes: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(table.names.iter().cloned());
    let io = |e: csv::Error| Error::Structure(e.to_string());
    w.write_record(&header).map_err(io)?;
    if with_codes {
        let mut row = vec!["transform".to_string()];
        row.extend(table.codes.iter().map(|c| c.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    for t in 0..table.len() {
        let mut row = vec![table.dates[t].clone()];
        row.extend(table.columns.iter().map(|c| format!("{}", c[t])));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Structure(e.to_string()))?;
    Ok(())
}

/// Stationarity transform of a single series: code 1 is the identity, code 5
/// the log first difference (one observation shorter).
pub fn transform_series(x: &[f64], code: u8) -> Result<Vec<f64>> {
    check_code(code)?;
    match code {
        1 => Ok(x.to_vec()),
        _ => {
            if let Some(t) = x.iter().position(|v| !(*v > 0.0)) {
                return Err(Error::Data(format!(
                    "nonpositive value {} at position {t} under code 5",
                    x[t]
                )));
            }
            Ok(x.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        }
    }
}

/// Direct h-step target `y_{t+h} = ln(P_{t+h}/P_t) - ln(P_t/P_{t-1})`,
/// indexed by the origin `t` (same length as `price`; `NaN` where undefined).
pub fn build_target(price: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if horizon < 1 {
        return Err(Error::Config("forecast horizon must be at least 1".into()));
    }
    target_by_origin(price, horizon)
}

pub(crate) fn target_by_origin(price: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if price.len() < horizon + 2 {
        return Err(Error::Data(format!(
            "price series of length {} too short for horizon {horizon}",
            price.len()
        )));
    }
    if let Some(t) = price.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::Data(format!("nonpositive price {} at {t}", price[t])));
    }
    let n = price.len();
    let mut y = vec![f64::NAN; n];
    for t in 1..n.saturating_sub(horizon) {
        y[t] = (price[t + horizon] / price[t]).ln() - (price[t] / price[t - 1]).ln();
    }
    Ok(y)
}

/// Role of one design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTag {
    OwnLag { lag: usize },
    ExogLag { series: usize, lag: usize },
    Intercept,
    /// A regressor used as-is (no lag structure).
    Plain { series: usize },
}

/// Lagged regressors for every row where all lags are defined.
#[derive(Debug, Clone)]
pub struct Design {
    /// Origin (raw row index) of each design row.
    pub origins: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub tags: Vec<ColumnTag>,
    pub lags: usize,
}

impl Design {
    pub fn n_cols(&self) -> usize {
        self.tags.len()
    }

    pub fn row_for_origin(&self, origin: usize) -> Option<&[f64]> {
        self.origins
            .iter()
            .position(|&o| o == origin)
            .map(|i| self.rows[i].as_slice())
    }
}

/// Options for [`build_design`].
#[derive(Debug, Clone, Copy)]
pub struct DesignOptions {
    pub lags: usize,
    pub own_lags: bool,
    pub intercept: bool,
}

/// Regressor rows `x_t = (y_t, …, y_{t-p+1}, d_t', …, d_{t-p+1}', 1)'` for
/// explaining a target dated after `t`; lag `l` of a series is its value at
/// row `t + 1 - l`.
///
/// Columns are ordered own lags (l = 1..p), exogenous lags grouped by lag,
/// then the intercept. Rows with an undefined lag are dropped.
pub fn build_design(own: &[f64], exog: &[Vec<f64>], opts: DesignOptions) -> Result<Design> {
    let p = opts.lags;
    if p == 0 {
        return Err(Error::Config("lag count must be positive".into()));
    }
    let n = own.len();
    if let Some(c) = exog.iter().find(|c| c.len() != n) {
        return Err(Error::Structure(format!(
            "exogenous series of length {} vs own series of length {n}",
            c.len()
        )));
    }
    let mut tags = Vec::new();
    if opts.own_lags {
        tags.extend((1..=p).map(|lag| ColumnTag::OwnLag { lag }));
    }
    for lag in 1..=p {
        tags.extend((0..exog.len()).map(|series| ColumnTag::ExogLag { series, lag }));
    }
    if opts.intercept {
        tags.push(ColumnTag::Intercept);
    }
    if tags.is_empty() {
        return Err(Error::Config("design has no columns".into()));
    }
    let mut origins = Vec::new();
    let mut rows = Vec::new();
    for t in (p - 1)..n {
        let row: Vec<f64> = tags
            .iter()
            .map(|tag| match *tag {
                ColumnTag::OwnLag { lag } => own[t + 1 - lag],
                ColumnTag::ExogLag { series, lag } => exog[series][t + 1 - lag],
                ColumnTag::Intercept => 1.0,
                ColumnTag::Plain { .. } => unreachable!(),
            })
            .collect();
        if row.iter().all(|v| v.is_finite()) {
            origins.push(t);
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("not enough observations to form {p} lags")));
    }
    Ok(Design {
        origins,
        rows,
        tags,
        lags: p,
    })
}

/// Column means and standard deviations frozen from an estimation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Columns left untouched (the intercept).
    pub skip: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>], tags: &[ColumnTag]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Data("need at least two rows to standardize".into()));
        }
        let k = tags.len();
        let mut mean = vec![0.0; k];
        let mut sd = vec![1.0; k];
        let skip: Vec<bool> = tags.iter().map(|t| *t == ColumnTag::Intercept).collect();
        for j in 0..k {
            if skip[j] {
                mean[j] = 0.0;
                continue;
            }
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            if !(v > 0.0) {
                return Err(Error::Data(format!("design column {j} is constant")));
            }
            mean[j] = m;
            sd[j] = v.sqrt();
        }
        Ok(Standardizer { mean, sd, skip })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| if self.skip[j] { v } else { (v - self.mean[j]) / self.sd[j] })
            .collect()
    }
}

/// Response vector and design matrix ready for estimation.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub tags: Vec<ColumnTag>,
    /// Origin (raw row index) of each observation.
    pub origins: Vec<usize>,
    pub lags: usize,
}

impl RegressionData {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, tags: Vec<ColumnTag>) -> Result<Self> {
        if y.len() != x.nrows() || tags.len() != x.ncols() {
            return Err(Error::Structure(format!(
                "y has {} rows, X is {}x{}, {} column tags",
                y.len(),
                x.nrows(),
                x.ncols(),
                tags.len()
            )));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in regression data".into()));
        }
        let origins = (0..y.len()).collect();
        Ok(RegressionData {
            y,
            x,
            tags,
            origins,
            lags: 0,
        })
    }

    pub fn t(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.x.row(t).transpose()
    }

    /// Pair design rows with the target, keeping origins `<= last_origin`
    /// whose target is defined, and standardize with statistics from those
    /// rows only.
    pub fn from_design(
        design: &Design,
        target: &[f64],
        last_origin: usize,
        standardize: bool,
    ) -> Result<(RegressionData, Option<Standardizer>)> {
        let idx: Vec<usize> = (0..design.origins.len())
            .filter(|&i| {
                let o = design.origins[i];
                o <= last_origin && o < target.len() && target[o].is_finite()
            })
            .collect();
        if idx.is_empty() {
            return Err(Error::Data("no usable observations in estimation window".into()));
        }
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| design.rows[i].clone()).collect();
        let scaler = if standardize {
            Some(Standardizer::fit(&rows, &design.tags)?)
        } else {
            None
        };
        let rows: Vec<Vec<f64>> = match &scaler {
            Some(s) => rows.iter().map(|r| s.apply(r)).collect(),
            None => rows,
        };
        let k = design.n_cols();
        let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| target[design.origins[i]]));
        let origins = idx.iter().map(|&i| design.origins[i]).collect();
        let mut data = RegressionData::new(y, x, design.tags.clone())?;
        data.origins = origins;
        data.lags = design.lags;
        Ok((data, scaler))
    }
}
