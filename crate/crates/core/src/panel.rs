//! Panel data: K groups of `T_k x d` observations, CSV ingestion, period
//! splitting and demeaning.
//!
//! Rows index time and columns index coordinates. The on-disk format is a
//! long-form CSV with header `group,time,x1,...,xd`; rows of one group must
//! be contiguous and time must be strictly increasing within a group.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{AnovaError, Result};

/// Minimum number of time points per group accepted by the data layer.
pub const MIN_GROUP_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    groups: Vec<Array2<f64>>,
}

impl Panel {
    /// Validate and wrap `groups`. Requires `K >= 2`, a shared `d >= 1`,
    /// `T_k >= 3` and finite entries.
    pub fn new(groups: Vec<Array2<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(AnovaError::InvalidArgument(format!(
                "a panel needs at least 2 groups, got {}",
                groups.len()
            )));
        }
        let d = groups[0].ncols();
        if d == 0 {
            return Err(AnovaError::ShapeMismatch("d must be at least 1".into()));
        }
        for (k, g) in groups.iter().enumerate() {
            if g.ncols() != d {
                return Err(AnovaError::ShapeMismatch(format!(
                    "group {} has {} columns, group 1 has {}",
                    k + 1,
                    g.ncols(),
                    d
                )));
            }
            if g.nrows() < MIN_GROUP_LEN {
                return Err(AnovaError::TooShort(format!(
                    "group {} has {} rows, need at least {}",
                    k + 1,
                    g.nrows(),
                    MIN_GROUP_LEN
                )));
            }
            if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                return Err(AnovaError::MalformedData(format!(
                    "group {} has a non-finite value at row {}",
                    k + 1,
                    pos / d + 1
                )));
            }
        }
        Ok(Self { groups })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.groups[0].ncols()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.nrows()).collect()
    }

    /// `min_k T_k`.
    pub fn min_len(&self) -> usize {
        self.groups.iter().map(|g| g.nrows()).min().unwrap_or(0)
    }

    /// Group `k`, zero-based.
    pub fn group(&self, k: usize) -> ArrayView2<'_, f64> {
        self.groups[k].view()
    }

    pub fn groups(&self) -> &[Array2<f64>] {
        &self.groups
    }

    pub fn into_groups(self) -> Vec<Array2<f64>> {
        self.groups
    }

    /// Largest absolute entry across all groups.
    pub fn max_abs(&self) -> f64 {
        self.groups
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Per-group sample means `mu_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub means: Vec<Array1<f64>>,
}

/// Residuals `x_{t,k} - mu_k`, same shape as the source panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel {
    groups: Vec<Array2<f64>>,
}

impl ResidualPanel {
    pub fn group(&self, k: usize) -> ArrayView2<'_, f64> {
        self.groups[k].view()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Array2<f64>] {
        &self.groups
    }

    /// Re-wrap the residuals as a panel (they satisfy every panel invariant).
    pub fn to_panel(&self) -> Panel {
        Panel {
            groups: self.groups.clone(),
        }
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn column_means(x: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    x.axis_iter(Axis(1))
        .map(|col| compensated_sum(col.iter().copied()) / n)
        .collect()
}

/// Subtract the grand mean over all rows of all groups.
///
/// The banded within-group sums weight boundary rows less than interior
/// rows, so with a common mean `mu` the statistic picks up a linear term
/// `2 muᵀ sum_t (n_t / V - 1 / T) eps_t` that the bootstrap does not
/// reproduce. Centering first leaves mean differences and the statistic's
/// expectation unchanged and makes that term second order.
pub fn center_pooled(panel: &Panel) -> Panel {
    let d = panel.dim();
    let n: usize = panel.lengths().iter().sum();
    let grand: Array1<f64> = (0..d)
        .map(|j| {
            compensated_sum(panel.groups().iter().flat_map(|g| g.column(j).to_vec())) / n as f64
        })
        .collect();
    let row = grand.view().insert_axis(Axis(0));
    Panel {
        groups: panel.groups().iter().map(|g| g - &row).collect(),
    }
}

/// Group means and residuals.
pub fn demean(panel: &Panel) -> (GroupMeans, ResidualPanel) {
    let mut means = Vec::with_capacity(panel.n_groups());
    let mut groups = Vec::with_capacity(panel.n_groups());
    for g in panel.groups() {
        let mu = column_means(g.view());
        let res = g - &mu.view().insert_axis(Axis(0));
        means.push(mu);
        groups.push(res);
    }
    (GroupMeans { means }, ResidualPanel { groups })
}

/// Split one `T x d` series into `n_periods` contiguous blocks. Block lengths
/// differ by at most one; remainder rows go to the earliest blocks.
pub fn split_periods(series: ArrayView2<'_, f64>, n_periods: usize) -> Result<Panel> {
    if n_periods < 2 {
        return Err(AnovaError::InvalidArgument(format!(
            "need at least 2 periods, got {n_periods}"
        )));
    }
    let t = series.nrows();
    if t < MIN_GROUP_LEN * n_periods {
        return Err(AnovaError::TooShort(format!(
            "{t} rows cannot be split into {n_periods} periods of at least {MIN_GROUP_LEN}"
        )));
    }
    let base = t / n_periods;
    let extra = t % n_periods;
    let mut start = 0;
    let mut groups = Vec::with_capacity(n_periods);
    for p in 0..n_periods {
        let len = base + usize::from(p < extra);
        groups.push(series.slice(s![start..start + len, ..]).to_owned());
        start += len;
    }
    Panel::new(groups)
}

struct RawGroup {
    id: i64,
    last_time: i64,
    width: usize,
    values: Vec<f64>,
}

fn parse_int(field: &str, what: &str, line: u64) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| {
        AnovaError::MalformedData(format!("line {line}: cannot parse {what} `{field}`"))
    })
}

/// Read the raw groups of a long-form CSV without enforcing `K >= 2`.
fn read_groups<R: Read>(reader: R) -> Result<Vec<Array2<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.len() < 3
        || header.get(0).map(str::trim) != Some("group")
        || header.get(1).map(str::trim) != Some("time")
    {
        return Err(AnovaError::MalformedData(
            "header must be `group,time,x1,...,xd`".into(),
        ));
    }
    let header_width = header.len() - 2;

    let mut groups: Vec<RawGroup> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 3 {
            return Err(AnovaError::MalformedData(format!(
                "line {line}: expected group, time and at least one value"
            )));
        }
        let id = parse_int(&record[0], "group", line)?;
        let time = parse_int(&record[1], "time", line)?;
        let width = record.len() - 2;

        let start_new = groups.last().is_none_or(|g| g.id != id);
        if start_new {
            if groups.iter().any(|g| g.id == id) {
                return Err(AnovaError::MalformedData(format!(
                    "line {line}: rows of group {id} are not contiguous"
                )));
            }
            groups.push(RawGroup {
                id,
                last_time: i64::MIN,
                width,
                values: Vec::new(),
            });
        }
        let g = groups.last_mut().expect("group pushed above");
        if width != g.width {
            return Err(AnovaError::ShapeMismatch(format!(
                "line {line}: group {id} rows have inconsistent width ({width} vs {})",
                g.width
            )));
        }
        if time <= g.last_time {
            return Err(AnovaError::MalformedData(format!(
                "line {line}: time must be strictly increasing within group {id}"
            )));
        }
        g.last_time = time;
        for (j, field) in record.iter().skip(2).enumerate() {
            let field = field.trim();
            if field.is_empty() {
                return Err(AnovaError::MalformedData(format!(
                    "line {line}: missing value in column x{}",
                    j + 1
                )));
            }
            let v: f64 = field.parse().map_err(|_| {
                AnovaError::MalformedData(format!("line {line}: cannot parse value `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(AnovaError::MalformedData(format!(
                    "line {line}: non-finite value `{field}`"
                )));
            }
            g.values.push(v);
        }
    }

    if groups.is_empty() {
        return Err(AnovaError::MalformedData("no data rows".into()));
    }
    let d = groups[0].width;
    if let Some(g) = groups.iter().find(|g| g.width != d) {
        return Err(AnovaError::ShapeMismatch(format!(
            "group {} has {} value columns, group {} has {}",
            g.id, g.width, groups[0].id, d
        )));
    }
    if d != header_width {
        return Err(AnovaError::MalformedData(format!(
            "header declares {header_width} value columns, rows carry {d}"
        )));
    }

    groups.sort_by_key(|g| g.id);
    for (expected, g) in (1..).zip(groups.iter()) {
        if g.id != expected {
            return Err(AnovaError::MalformedData(format!(
                "group ids must be 1..K, found {} where {expected} was expected",
                g.id
            )));
        }
    }

    groups
        .into_iter()
        .map(|g| {
            let rows = g.values.len() / d;
            Array2::from_shape_vec((rows, d), g.values)
                .map_err(|e| AnovaError::MalformedData(e.to_string()))
        })
        .collect()
}

pub fn read_panel<R: Read>(reader: R) -> Result<Panel> {
    Panel::new(read_groups(reader)?)
}

/// Load a panel from a CSV file.
pub fn load_panel(path: impl AsRef<Path>) -> Result<Panel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| AnovaError::io(path, e))?;
    read_panel(file)
}

/// Load a single `T x d` series stored with the panel schema and one group id.
pub fn load_series(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| AnovaError::io(path, e))?;
    let mut groups = read_groups(file)?;
    if groups.len() != 1 {
        return Err(AnovaError::InvalidArgument(format!(
            "expected a single series (one group id), found {} groups",
            groups.len()
        )));
    }
    Ok(groups.remove(0))
}

/// Write groups in the long-form schema. `f64` values use Rust's shortest
/// round-trip formatting, so reading the file back is lossless.
pub fn write_groups<W: Write>(groups: &[Array2<f64>], writer: W) -> Result<()> {
    let d = groups.first().map_or(0, |g| g.ncols());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["group".to_string(), "time".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    wtr.write_record(&header)?;
    for (k, g) in groups.iter().enumerate() {
        for (t, row) in g.outer_iter().enumerate() {
            let mut rec = Vec::with_capacity(d + 2);
            rec.push((k + 1).to_string());
            rec.push((t + 1).to_string());
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush().map_err(|e| AnovaError::io("<writer>", e))?;
    Ok(())
}

pub fn write_panel<W: Write>(panel: &Panel, writer: W) -> Result<()> {
    write_groups(panel.groups(), writer)
}

pub fn save_panel(panel: &Panel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| AnovaError::io(path, e))?;
    write_panel(panel, file)
}
