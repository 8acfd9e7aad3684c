//! CSV reading and writing.
//!
//! Wide trial layout: `id, A0..A{K-1}, C0..C{K-1}, Y1..YK, W_<name>..., L{t}_<name>...`.
//! Missing cells are spelled `NA`; an absent treatment is written `NA` in its
//! A column. Row numbers in parse errors count data records from 1.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{apply_conventions, validate_dataset, Censoring, Outcome, SubjectRecord, Treatment, TrialDataset, Timeline};
use crate::discretize::EventTimes;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulate::PotentialRecord;
use crate::strategy::{CompetingDataset, IceRecord};

pub const NA: &str = "NA";

/// How the 0/1 cells of the C columns are read and written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorCoding {
    #[default]
    OneIsCensored,
    OneIsUncensored,
}

impl CensorCoding {
    fn decode(self, flag: bool) -> Censoring {
        let censored = match self {
            CensorCoding::OneIsCensored => flag,
            CensorCoding::OneIsUncensored => !flag,
        };
        if censored {
            Censoring::Censored
        } else {
            Censoring::Uncensored
        }
    }

    fn encode(self, c: Censoring) -> &'static str {
        match (self, c.is_censored()) {
            (CensorCoding::OneIsCensored, true) | (CensorCoding::OneIsUncensored, false) => "1",
            _ => "0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub censor_coding: CensorCoding,
    /// When set, the header must carry exactly this many follow-ups.
    pub k: Option<usize>,
    /// Time unit recorded on the timeline.
    pub unit: Option<String>,
}

fn parse_err(row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Parse { row, column: column.to_string(), reason: reason.into() }
}

fn parse_scalar<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    let v = T::from_str_radix(cell, 10).map_err(|_| parse_err(row, column, format!("`{cell}` is not a number")))?;
    if v.is_nan() {
        return Err(parse_err(row, column, "NaN is not allowed"));
    }
    Ok(v)
}

fn parse_flag(cell: &str, row: usize, column: &str) -> Result<bool> {
    match cell {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(parse_err(row, column, format!("expected 0 or 1, got `{cell}`"))),
    }
}

fn parse_bool(cell: &str, row: usize, column: &str) -> Result<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        _ => Err(parse_err(row, column, format!("expected a boolean, got `{cell}`"))),
    }
}

fn parse_usize(cell: &str, row: usize, column: &str) -> Result<usize> {
    cell.parse().map_err(|_| parse_err(row, column, format!("`{cell}` is not a nonnegative integer")))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

fn headers<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    let h: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if h.iter().all(String::is_empty) {
        return Err(parse_err(0, "", "empty input: no header"));
    }
    Ok(h)
}

fn column_of(headers: &[String], name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| parse_err(0, name, "required column missing"))
}

/// Column roles of a wide header.
struct WideLayout {
    id: usize,
    k: usize,
    a: Vec<usize>,
    c: Vec<usize>,
    /// Outcome columns, blocks in prefix order.
    y: Vec<usize>,
    w_names: Vec<String>,
    w: Vec<usize>,
    tv_names: Vec<String>,
    /// l[t-1][q]: column of L(t) component q.
    l: Vec<Vec<usize>>,
}

fn indexed(name: &str, prefix: &str) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// `L{t}_<name>` as (t, name).
fn l_column(name: &str) -> Option<(usize, &str)> {
    let rest = name.strip_prefix('L')?;
    let (t, n) = rest.split_once('_')?;
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) || n.is_empty() {
        return None;
    }
    Some((t.parse().ok()?, n))
}

fn wide_layout(headers: &[String], prefix_y: &[&str]) -> Result<WideLayout> {
    let id = column_of(headers, "id")?;
    let mut a = Vec::new();
    let mut c = Vec::new();
    let mut ys: Vec<Vec<(usize, usize)>> = vec![Vec::new(); prefix_y.len()];
    let mut w = Vec::new();
    let mut l_cols: Vec<(usize, String, usize)> = Vec::new();
    for (col, h) in headers.iter().enumerate() {
        if col == id {
            continue;
        }
        if let Some(j) = indexed(h, "A") {
            a.push((j, col));
        } else if let Some(j) = indexed(h, "C") {
            c.push((j, col));
        } else if let Some(p) = prefix_y.iter().position(|p| indexed(h, p).is_some()) {
            ys[p].push((indexed(h, prefix_y[p]).unwrap_or(0), col));
        } else if let Some(name) = h.strip_prefix("W_").filter(|n| !n.is_empty()) {
            w.push((name.to_string(), col));
        } else if let Some((t, name)) = l_column(h) {
            l_cols.push((t, name.to_string(), col));
        } else {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }
    let k = a.len();
    if k == 0 {
        return Err(parse_err(0, "A0", "no treatment columns"));
    }
    let ordered = |mut v: Vec<(usize, usize)>, prefix: &str, first: usize| -> Result<Vec<usize>> {
        v.sort_unstable();
        if v.len() != k || v.iter().enumerate().any(|(i, &(j, _))| j != i + first) {
            return Err(parse_err(0, prefix, format!("expected {prefix}{first}..{prefix}{} to match the {k} treatment columns", k + first - 1)));
        }
        Ok(v.into_iter().map(|(_, col)| col).collect())
    };
    let a = ordered(a, "A", 0)?;
    let c = ordered(c, "C", 0)?;
    let ys = ys
        .into_iter()
        .zip(prefix_y)
        .map(|(v, p)| ordered(v, p, 1))
        .collect::<Result<Vec<_>>>()?;

    let mut tv_names: Vec<String> = Vec::new();
    for (t, name, _) in &l_cols {
        if *t == 1 && !tv_names.contains(name) {
            tv_names.push(name.clone());
        }
    }
    let mut l = vec![vec![usize::MAX; tv_names.len()]; k - 1];
    for (t, name, col) in &l_cols {
        let q = tv_names.iter().position(|n| n == name);
        match q {
            Some(q) if (1..k).contains(t) && l[t - 1][q] == usize::MAX => l[t - 1][q] = *col,
            _ => return Err(Error::UnknownColumn(headers[*col].clone())),
        }
    }
    if let Some((t, q)) =
        l.iter().enumerate().find_map(|(i, row)| row.iter().position(|&c| c == usize::MAX).map(|q| (i + 1, q)))
    {
        return Err(parse_err(0, &format!("L{t}_{}", tv_names[q]), "time-varying column missing"));
    }
    let (w_names, w) = w.into_iter().unzip();
    Ok(WideLayout { id, k, a, c, y: ys.into_iter().flatten().collect(), w_names, w, tv_names, l })
}

fn parse_outcome(cell: &str, row: usize, column: &str) -> Result<Outcome> {
    if cell == NA {
        Ok(Outcome::Na)
    } else {
        parse_flag(cell, row, column).map(Outcome::from_flag)
    }
}

struct Common<T> {
    id: String,
    w: Vec<T>,
    a: Vec<Treatment>,
    c: Vec<Censoring>,
    l: Vec<Option<Vec<T>>>,
}

fn parse_common<T: Scalar>(
    lay: &WideLayout,
    headers: &[String],
    rec: &csv::StringRecord,
    row: usize,
    coding: CensorCoding,
) -> Result<Common<T>> {
    let cell = |col: usize| rec.get(col).unwrap_or("");
    let id = cell(lay.id).to_string();
    if id.is_empty() {
        return Err(parse_err(row, "id", "empty id"));
    }
    let a = lay
        .a
        .iter()
        .map(|&col| {
            let v = cell(col);
            if v == NA {
                Ok(Treatment::Absent)
            } else {
                v.parse::<u32>()
                    .map(Treatment::Code)
                    .map_err(|_| parse_err(row, &headers[col], format!("`{v}` is not a treatment code")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let c = lay
        .c
        .iter()
        .map(|&col| parse_flag(cell(col), row, &headers[col]).map(|f| coding.decode(f)))
        .collect::<Result<Vec<_>>>()?;
    let w = lay.w.iter().map(|&col| parse_scalar(cell(col), row, &headers[col])).collect::<Result<Vec<T>>>()?;
    let l = lay
        .l
        .iter()
        .map(|cols| -> Result<Option<Vec<T>>> {
            if cols.is_empty() {
                return Ok(None);
            }
            let na = cols.iter().filter(|&&col| cell(col) == NA).count();
            if na == cols.len() {
                return Ok(None);
            }
            if na > 0 {
                let col = cols.iter().find(|&&col| cell(col) == NA).copied().unwrap_or(cols[0]);
                return Err(parse_err(row, &headers[col], "partly missing L vector"));
            }
            cols.iter().map(|&col| parse_scalar(cell(col), row, &headers[col])).collect::<Result<Vec<T>>>().map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Common { id, w, a, c, l })
}

fn timeline(k: usize, opts: &CsvOptions) -> Result<Timeline> {
    if let Some(expected) = opts.k {
        if expected != k {
            return Err(parse_err(0, "A0", format!("header has K = {k}, configuration says {expected}")));
        }
    }
    match &opts.unit {
        Some(u) => Timeline::with_unit(k, u.clone()),
        None => Timeline::new(k),
    }
}

/// Parse a wide CSV as is: no conventions, no validation.
pub fn read_dataset<T: Scalar, R: Read>(input: R, opts: &CsvOptions) -> Result<TrialDataset<T>> {
    let mut rdr = reader(input);
    let headers = headers(&mut rdr)?;
    let lay = wide_layout(&headers, &["Y"])?;
    let mut subjects = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let common = parse_common::<T>(&lay, &headers, &rec, row, opts.censor_coding)?;
        let y = lay
            .y
            .iter()
            .map(|&col| parse_outcome(rec.get(col).unwrap_or(""), row, &headers[col]))
            .collect::<Result<Vec<_>>>()?;
        subjects.push(SubjectRecord { id: common.id, w: common.w, a: common.a, c: common.c, y, l: common.l });
    }
    TrialDataset::new(timeline(lay.k, opts)?, lay.w_names, lay.tv_names, subjects)
}

/// Read, apply the outcome and censoring conventions, and validate.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<TrialDataset<T>> {
    let raw = read_dataset(File::open(path)?, opts)?;
    let ds = apply_conventions(&raw)?;
    let violations = validate_dataset(&ds);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(ds)
}

fn wide_header(k: usize, y_prefixes: &[&str], w: &[String], tv: &[String]) -> Vec<String> {
    let mut h = vec!["id".to_string()];
    h.extend((0..k).map(|j| format!("A{j}")));
    h.extend((0..k).map(|j| format!("C{j}")));
    for p in y_prefixes {
        h.extend((1..=k).map(|t| format!("{p}{t}")));
    }
    h.extend(w.iter().map(|n| format!("W_{n}")));
    for t in 1..k {
        h.extend(tv.iter().map(|n| format!("L{t}_{n}")));
    }
    h
}

fn outcome_cell(y: Outcome) -> &'static str {
    match y {
        Outcome::Free => "0",
        Outcome::Event => "1",
        Outcome::Na => NA,
    }
}

fn common_cells(
    a: &[Treatment],
    c: &[Censoring],
    coding: CensorCoding,
) -> (Vec<String>, Vec<String>) {
    let a = a
        .iter()
        .map(|x| match x {
            Treatment::Code(v) => v.to_string(),
            Treatment::Absent => NA.to_string(),
        })
        .collect();
    let c = c.iter().map(|&x| coding.encode(x).to_string()).collect();
    (a, c)
}

fn tail_cells<T: Scalar>(w: &[T], l: &[Option<Vec<T>>], width: usize) -> Vec<String> {
    let mut out: Vec<String> = w.iter().map(|x| x.to_string()).collect();
    for cell in l {
        match cell {
            Some(v) => out.extend(v.iter().map(|x| x.to_string())),
            None => out.extend(std::iter::repeat(NA.to_string()).take(width)),
        }
    }
    out
}

/// Write the wide layout. Numbers use the shortest representation that
/// parses back to the same value, so a write/read round trip is exact.
pub fn write_dataset<T: Scalar, W: Write>(ds: &TrialDataset<T>, out: W, opts: &CsvOptions) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let width = ds.tv_covariate_names().len();
    wtr.write_record(wide_header(ds.k(), &["Y"], ds.covariate_names(), ds.tv_covariate_names()))?;
    for s in ds.subjects() {
        let (a, c) = common_cells(&s.a, &s.c, opts.censor_coding);
        let mut rec = vec![s.id.clone()];
        rec.extend(a);
        rec.extend(c);
        rec.extend(s.y.iter().map(|&y| outcome_cell(y).to_string()));
        rec.extend(tail_cells(&s.w, &s.l, width));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Competing-risk layout: the Y block becomes `YPE1..YPEK, YCE1..YCEK`.
pub fn write_competing<T: Scalar, W: Write>(ds: &CompetingDataset<T>, out: W, opts: &CsvOptions) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let width = ds.tv_covariate_names().len();
    wtr.write_record(wide_header(ds.k(), &["YPE", "YCE"], ds.covariate_names(), ds.tv_covariate_names()))?;
    for s in ds.subjects() {
        let (a, c) = common_cells(&s.a, &s.c, opts.censor_coding);
        let mut rec = vec![s.id.clone()];
        rec.extend(a);
        rec.extend(c);
        rec.extend(s.y_pe.iter().chain(&s.y_ce).map(|&y| outcome_cell(y).to_string()));
        rec.extend(tail_cells(&s.w, &s.l, width));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// ICE records: `id, kind, month, terminal` (terminal as 0/1 or true/false).
pub fn read_ices<R: Read>(input: R) -> Result<Vec<IceRecord>> {
    let mut rdr = reader(input);
    let headers = headers(&mut rdr)?;
    let id = column_of(&headers, "id")?;
    let kind = column_of(&headers, "kind")?;
    let month = column_of(&headers, "month")?;
    let terminal = column_of(&headers, "terminal")?;
    if let Some(extra) = headers.iter().find(|h| !["id", "kind", "month", "terminal"].contains(&h.as_str())) {
        return Err(Error::UnknownColumn(extra.clone()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let m = parse_usize(cell(month), row, "month")?;
        if m == 0 {
            return Err(parse_err(row, "month", "ICE month must be at least 1"));
        }
        out.push(IceRecord::new(cell(id), cell(kind), m, parse_bool(cell(terminal), row, "terminal")?));
    }
    Ok(out)
}

pub fn write_ices<W: Write>(ices: &[IceRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["id", "kind", "month", "terminal"])?;
    for r in ices {
        wtr.write_record([r.id.as_str(), r.kind.as_str(), &r.month.to_string(), if r.terminal { "1" } else { "0" }])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row of a continuous-times file.
#[derive(Debug, Clone, PartialEq)]
pub struct TimesRow<T> {
    pub id: String,
    /// Assigned arm; 0 when the file has no `arm` column.
    pub arm: u32,
    pub w: Vec<T>,
    pub times: EventTimes<T>,
}

/// Continuous times: `id, tY, tC[, tI][, arm][, W_<name>...]`. An empty or
/// `NA` tI means no ICE. Returns the rows and the covariate names.
pub fn read_times<T: Scalar, R: Read>(input: R) -> Result<(Vec<TimesRow<T>>, Vec<String>)> {
    let mut rdr = reader(input);
    let headers = headers(&mut rdr)?;
    let id = column_of(&headers, "id")?;
    let ty = column_of(&headers, "tY")?;
    let tc = column_of(&headers, "tC")?;
    let ti = headers.iter().position(|h| h == "tI");
    let arm = headers.iter().position(|h| h == "arm");
    let mut w_names = Vec::new();
    let mut w_cols = Vec::new();
    for (col, h) in headers.iter().enumerate() {
        if [Some(id), Some(ty), Some(tc), ti, arm].contains(&Some(col)) {
            continue;
        }
        match h.strip_prefix("W_").filter(|n| !n.is_empty()) {
            Some(n) => {
                w_names.push(n.to_string());
                w_cols.push(col);
            }
            None => return Err(Error::UnknownColumn(h.clone())),
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let t_ice = match ti.map(cell) {
            None | Some("") | Some(NA) => None,
            Some(v) => Some(parse_scalar(v, row, "tI")?),
        };
        let arm_code = match arm {
            Some(c) => cell(c).parse().map_err(|_| parse_err(row, "arm", format!("`{}` is not an arm code", cell(c))))?,
            None => 0,
        };
        let w = w_cols.iter().map(|&c| parse_scalar(cell(c), row, &headers[c])).collect::<Result<Vec<T>>>()?;
        out.push(TimesRow {
            id: cell(id).to_string(),
            arm: arm_code,
            w,
            times: EventTimes::new(parse_scalar(cell(ty), row, "tY")?, parse_scalar(cell(tc), row, "tC")?, t_ice),
        });
    }
    Ok((out, w_names))
}

/// Oracle file: covariates, potential event and ICE times under each arm and
/// the principal stratum at `k` (`NA` without ICEs).
pub fn write_oracle<T: Scalar, W: Write>(records: &[PotentialRecord<T>], k: usize, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["id", "W_W1", "W_W2", "tY0", "tY1", "tI0", "tI1", "stratum"])?;
    let opt = |x: Option<T>| x.map_or_else(|| NA.to_string(), |v| v.to_string());
    for r in records {
        let stratum = match (r.ice_by(1, k), r.ice_by(0, k)) {
            (Some(d1), Some(d0)) => match (d1, d0) {
                (false, false) => "AA",
                (false, true) => "AD",
                (true, false) => "DA",
                (true, true) => "DD",
            },
            _ => NA,
        };
        wtr.write_record([
            r.id.clone(),
            r.w[0].to_string(),
            r.w[1].to_string(),
            r.t_event[0].to_string(),
            r.t_event[1].to_string(),
            opt(r.t_ice[0]),
            opt(r.t_ice[1]),
            stratum.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
