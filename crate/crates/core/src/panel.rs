//! Multi-series daily traffic panels and their canonical CSV form.
//!
//! The CSV layout is one observation per row:
//!
//! ```text
//! series_id,date,value
//! cell_0000,2017-09-01,1532.25
//! ```
//!
//! Rows may arrive in any order. On load every series must cover the same
//! gapless run of days. On write rows are sorted by `series_id`, then `date`,
//! and values use Rust's shortest round-trip float formatting so that
//! `load_panel(write_panel(p)) == p` bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["series_id", "date", "value"];
pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// N equal-length daily series sharing one date axis.
///
/// Series are kept sorted by id; construction fails unless every invariant
/// holds, so a `SeriesPanel` in hand is always valid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPanel {
    series_ids: Vec<String>,
    start_date: NaiveDate,
    values: Vec<Vec<f64>>,
}

impl SeriesPanel {
    pub fn new(
        series_ids: Vec<String>,
        start_date: NaiveDate,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if series_ids.is_empty() {
            return Err(Error::invalid("panel", "panel has no series"));
        }
        if series_ids.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} series ids for {} value rows",
                series_ids.len(),
                values.len()
            )));
        }
        let n = values[0].len();
        if n == 0 {
            return Err(Error::invalid("panel", "series length must be at least 1"));
        }
        let mut rows: Vec<(String, Vec<f64>)> = series_ids.into_iter().zip(values).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Series {
                    series_id: pair[0].0.clone(),
                    message: "duplicate series id".into(),
                });
            }
        }
        for (id, row) in rows.iter_mut() {
            if id.is_empty() {
                return Err(Error::invalid("panel", "empty series id"));
            }
            if row.len() != n {
                return Err(Error::Series {
                    series_id: id.clone(),
                    message: format!("unequal series lengths: {} vs {}", row.len(), n),
                });
            }
            for (t, v) in row.iter_mut().enumerate() {
                if !v.is_finite() || *v < 0.0 {
                    return Err(Error::Series {
                        series_id: id.clone(),
                        message: format!("value {v} at step {} is negative or non-finite", t + 1),
                    });
                }
                // Normalise -0.0 so the canonical text form never carries a sign.
                if *v == 0.0 {
                    *v = 0.0;
                }
            }
        }
        let (series_ids, values) = rows.into_iter().unzip();
        Ok(Self {
            series_ids,
            start_date,
            values,
        })
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    /// Number of series (N).
    pub fn num_series(&self) -> usize {
        self.values.len()
    }

    /// Series length in days (n).
    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    /// Always false; a valid panel holds at least one day.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.series_ids
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().map(Vec::as_slice))
    }

    /// Date of the 1-based step `t`.
    pub fn date_of(&self, t: usize) -> NaiveDate {
        self.start_date + Days::new(t as u64 - 1)
    }

    /// Panel restricted to the 1-based inclusive step range `from..=to`.
    pub fn slice_steps(&self, from: usize, to: usize) -> Result<Self> {
        if from < 1 || from > to || to > self.len() {
            return Err(Error::invalid(
                "step range",
                format!("{from}..={to} outside 1..={}", self.len()),
            ));
        }
        Ok(Self {
            series_ids: self.series_ids.clone(),
            start_date: self.date_of(from),
            values: self
                .values
                .iter()
                .map(|row| row[from - 1..to].to_vec())
                .collect(),
        })
    }
}

/// Boundaries of a forecast experiment on a panel, 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    t0: usize,
    last: usize,
}

impl SplitSpec {
    /// `t0` is the first predicted step, `last` (T) the final one.
    pub fn new(t0: usize, last: usize) -> Result<Self> {
        if t0 <= 1 {
            return Err(Error::invalid(
                "split",
                format!("t0 = {t0} leaves no conditioning range"),
            ));
        }
        if last < t0 {
            return Err(Error::invalid(
                "split",
                format!("T = {last} precedes t0 = {t0}"),
            ));
        }
        Ok(Self { t0, last })
    }

    /// Split holding out the final `horizon` days of an `n`-day panel.
    pub fn holdout(n: usize, horizon: usize) -> Result<Self> {
        if horizon >= n {
            return Err(Error::invalid(
                "split",
                format!("holdout of {horizon} days leaves no training data in {n} days"),
            ));
        }
        Self::new(n - horizon + 1, n)
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn last(&self) -> usize {
        self.last
    }

    pub fn horizon(&self) -> usize {
        self.last - self.t0 + 1
    }

    pub fn validate_for(&self, panel: &SeriesPanel) -> Result<()> {
        if self.last > panel.len() {
            return Err(Error::invalid(
                "split",
                format!("T = {} exceeds panel length {}", self.last, panel.len()),
            ));
        }
        Ok(())
    }
}

/// Splits into the conditioning range `1..t0` and the prediction range `t0..=T`.
pub fn split_panel(panel: &SeriesPanel, split: SplitSpec) -> Result<(SeriesPanel, SeriesPanel)> {
    split.validate_for(panel)?;
    let train = panel.slice_steps(1, split.t0() - 1)?;
    let test = panel.slice_steps(split.t0(), split.last())?;
    Ok((train, test))
}

struct Observation {
    date: NaiveDate,
    value: f64,
    line: u64,
}

pub fn load_panel(path: impl AsRef<Path>) -> Result<SeriesPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`", CSV_HEADER.join(",")),
        ));
    }

    let mut by_series: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(parse_err(line, "empty series_id".into()));
        }
        let date = NaiveDate::parse_from_str(&record[1], DATE_FORMAT).map_err(|e| {
            parse_err(
                line,
                format!("series `{id}`: bad date `{}`: {e}", &record[1]),
            )
        })?;
        let value: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("series `{id}`: bad value `{}`", &record[2])))?;
        if !value.is_finite() || value < 0.0 {
            return Err(parse_err(
                line,
                format!("series `{id}`: value {value} is negative or non-finite"),
            ));
        }
        by_series
            .entry(id)
            .or_default()
            .push(Observation { date, value, line });
    }
    if by_series.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }

    let mut ids = Vec::with_capacity(by_series.len());
    let mut values = Vec::with_capacity(by_series.len());
    let mut axis: Option<(String, NaiveDate, usize)> = None;
    for (id, mut obs) in by_series {
        obs.sort_by_key(|o| o.date);
        for pair in obs.windows(2) {
            if pair[0].date == pair[1].date {
                return Err(parse_err(
                    pair[1].line,
                    format!("series `{id}`: duplicate date {}", pair[1].date),
                ));
            }
            if pair[0].date.succ_opt() != Some(pair[1].date) {
                return Err(parse_err(
                    pair[1].line,
                    format!(
                        "series `{id}`: date gap between {} and {}",
                        pair[0].date, pair[1].date
                    ),
                ));
            }
        }
        let start = obs[0].date;
        match &axis {
            None => axis = Some((id.clone(), start, obs.len())),
            Some((first_id, first_start, first_len)) => {
                if obs.len() != *first_len {
                    return Err(parse_err(
                        obs[0].line,
                        format!(
                            "series `{id}`: unequal series lengths ({} days vs {} in `{first_id}`)",
                            obs.len(),
                            first_len
                        ),
                    ));
                }
                if start != *first_start {
                    return Err(parse_err(
                        obs[0].line,
                        format!(
                            "series `{id}`: starts {start} but `{first_id}` starts {first_start}"
                        ),
                    ));
                }
            }
        }
        values.push(obs.iter().map(|o| o.value).collect());
        ids.push(id);
    }
    let (_, start, _) = axis.expect("at least one series");
    SeriesPanel::new(ids, start, values)
}

pub fn write_panel(panel: &SeriesPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let io = |e: csv::Error| csv_error(path, e);
    writer.write_record(CSV_HEADER).map_err(io)?;
    for (id, row) in panel.iter() {
        for (t, v) in row.iter().enumerate() {
            let date = panel.date_of(t + 1).format(DATE_FORMAT).to_string();
            writer
                .write_record([id, date.as_str(), v.to_string().as_str()])
                .map_err(io)?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Series id → row index lookup, used when joining forecast files to panels.
pub fn index_by_id(panel: &SeriesPanel) -> BTreeMap<&str, usize> {
    panel
        .series_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect()
}
