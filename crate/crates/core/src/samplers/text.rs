//! Line-oriented text formats for samples, spike trains and matrices.
//!
//! Numbers are written with 17 significant digits so every `f64` round-trips
//! exactly.

use std::fmt::Write as _;

use crate::error::{ReconError, Result};
use crate::signal::GridSpec;

use super::SpikeTrain;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| ReconError::Parse(format!("not a number: '{s}'")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| ReconError::Parse(format!("not a count: '{s}'")))
}

/// One `t_k,s_k` row, optionally tagged with a channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRow {
    pub channel: Option<usize>,
    pub time: f64,
    pub value: f64,
}

/// Header `scheme,T,R,count` followed by `count` rows `t_k,s_k`
/// (or `i,t_k,s_k` when rows carry a channel).
#[derive(Clone, Debug, PartialEq)]
pub struct SampleText {
    pub scheme: String,
    pub spec: GridSpec,
    pub rows: Vec<SampleRow>,
}

impl SampleText {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{},{},{},{}\n",
            self.scheme,
            self.spec.period(),
            self.spec.rate(),
            self.rows.len()
        );
        for r in &self.rows {
            if let Some(c) = r.channel {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{},{}", fmt_f64(r.time), fmt_f64(r.value));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| ReconError::Parse("empty input".into()))?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 4 {
            return Err(ReconError::Parse(format!("bad header '{header}'")));
        }
        let spec = GridSpec::new(parse_usize(fields[1])?, parse_usize(fields[2])?)?;
        let count = parse_usize(fields[3])?;
        let mut rows = Vec::with_capacity(count);
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            let row = match cols.as_slice() {
                [t, s] => SampleRow { channel: None, time: parse_f64(t)?, value: parse_f64(s)? },
                [c, t, s] => SampleRow {
                    channel: Some(parse_usize(c)?),
                    time: parse_f64(t)?,
                    value: parse_f64(s)?,
                },
                _ => return Err(ReconError::Parse(format!("bad row '{line}'"))),
            };
            rows.push(row);
        }
        if rows.len() != count {
            return Err(ReconError::Parse(format!("header announces {count} rows, found {}", rows.len())));
        }
        Ok(Self { scheme: fields[0].trim().to_string(), spec, rows })
    }
}

/// Rows of a spike train: the reset time with value 0, then every spike time
/// with the integral of the interval it closes.
pub fn spike_rows(train: &SpikeTrain, channel: Option<usize>) -> Vec<SampleRow> {
    let values = std::iter::once(0.0).chain(train.samples().iter().copied());
    train
        .times()
        .iter()
        .zip(values)
        .map(|(&time, value)| SampleRow { channel, time, value })
        .collect()
}

pub fn spike_train_from_rows(rows: &[SampleRow]) -> Result<SpikeTrain> {
    let times = rows.iter().map(|r| r.time).collect();
    let samples = rows.iter().skip(1).map(|r| r.value).collect();
    SpikeTrain::new(times, samples)
}

/// Per-channel spike trains in one file with a channel column.
pub fn render_channel_spikes(trains: &[SpikeTrain], spec: GridSpec) -> String {
    let rows = trains
        .iter()
        .enumerate()
        .flat_map(|(i, t)| spike_rows(t, Some(i)))
        .collect();
    SampleText { scheme: "multichannel_tem".into(), spec, rows }.render()
}

pub fn parse_channel_spikes(text: &str) -> Result<(GridSpec, Vec<SpikeTrain>)> {
    let parsed = SampleText::parse(text)?;
    let mut per: Vec<Vec<SampleRow>> = Vec::new();
    for r in &parsed.rows {
        let c = r.channel.ok_or_else(|| ReconError::Parse("missing channel column".into()))?;
        if per.len() <= c {
            per.resize(c + 1, Vec::new());
        }
        per[c].push(*r);
    }
    let trains = per.iter().map(|rows| spike_train_from_rows(rows)).collect::<Result<_>>()?;
    Ok((parsed.spec, trains))
}

/// Row-major matrix with a free-form header line.
pub fn render_matrix(header: &str, rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> String {
    let mut out = format!("{header}\n");
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| fmt_f64(at(i, j))).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses the body written by [`render_matrix`]; returns the header and rows.
pub fn parse_matrix(text: &str) -> Result<(String, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| ReconError::Parse("empty input".into()))?.to_string();
    let rows = lines
        .map(|l| l.split(',').map(parse_f64).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}
