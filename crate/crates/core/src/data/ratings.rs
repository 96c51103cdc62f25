//! Text ratings files: one `user<sep>item<sep>rating[<sep>timestamp]` per line.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::data::{DuplicatePolicy, SparseObservations};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Separator {
    DoubleColon,
    Tab,
    Comma,
    Whitespace,
}

impl Separator {
    /// Picks the separator of a content line, trying `::`, tab and comma
    /// before falling back to runs of whitespace.
    pub fn detect(line: &str) -> Self {
        if line.contains("::") {
            Separator::DoubleColon
        } else if line.contains('\t') {
            Separator::Tab
        } else if line.contains(',') {
            Separator::Comma
        } else {
            Separator::Whitespace
        }
    }

    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Separator::DoubleColon => line.split("::").map(str::trim).collect(),
            Separator::Tab => line.split('\t').map(str::trim).collect(),
            Separator::Comma => line.split(',').map(str::trim).collect(),
            Separator::Whitespace => line.split_whitespace().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RatingsOptions {
    /// `None` detects the separator from the first content line.
    pub separator: Option<Separator>,
    pub duplicates: DuplicatePolicy,
}

/// One parsed line, with external IDs.
#[derive(Clone, Debug, PartialEq)]
pub struct Rating<T> {
    /// 1-based line number in the source.
    pub line: usize,
    pub row: String,
    pub col: String,
    pub value: T,
}

/// Parses every rating line. Blank lines and `#` comments are skipped.
pub fn parse_ratings<T: Scalar, R: BufRead>(reader: R, separator: Option<Separator>) -> Result<Vec<Rating<T>>> {
    let mut sep = separator;
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let content = line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let s = *sep.get_or_insert_with(|| Separator::detect(content));
        let fields = s.split(content);
        if fields.len() != 3 && fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 or 4 fields (user, item, rating[, timestamp]), found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse { line: line_no, message: "empty user or item id".into() });
        }
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Parse { line: line_no, message: format!("rating '{}' is not a number", fields[2]) })?;
        if !value.is_finite() {
            return Err(Error::Parse { line: line_no, message: format!("rating '{}' is not finite", fields[2]) });
        }
        out.push(Rating { line: line_no, row: fields[0].to_string(), col: fields[1].to_string(), value: T::lit(value) });
    }
    Ok(out)
}

/// Bijection between external string IDs and dense zero-based indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    rows: Vec<String>,
    cols: Vec<String>,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map from ID lists in index order. Duplicates are rejected.
    pub fn from_ids(rows: Vec<String>, cols: Vec<String>) -> Result<Self> {
        let mut map = Self::new();
        for r in rows {
            if map.row_index.contains_key(&r) {
                return Err(Error::Data(format!("duplicate row id '{r}'")));
            }
            map.intern_row(&r);
        }
        for c in cols {
            if map.col_index.contains_key(&c) {
                return Err(Error::Data(format!("duplicate column id '{c}'")));
            }
            map.intern_col(&c);
        }
        Ok(map)
    }

    /// Integer IDs `1..=m` and `1..=n`.
    pub fn sequential(m: usize, n: usize) -> Self {
        let ids = |k: usize| (1..=k).map(|i| i.to_string()).collect();
        Self::from_ids(ids(m), ids(n)).expect("sequential ids are distinct")
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.rows
    }

    pub fn col_ids(&self) -> &[String] {
        &self.cols
    }

    pub fn row_id(&self, i: usize) -> Option<&str> {
        self.rows.get(i).map(String::as_str)
    }

    pub fn col_id(&self, j: usize) -> Option<&str> {
        self.cols.get(j).map(String::as_str)
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_index.get(id).copied()
    }

    pub fn col_index(&self, id: &str) -> Option<usize> {
        self.col_index.get(id).copied()
    }

    pub fn intern_row(&mut self, id: &str) -> usize {
        intern(&mut self.rows, &mut self.row_index, id)
    }

    pub fn intern_col(&mut self, id: &str) -> usize {
        intern(&mut self.cols, &mut self.col_index, id)
    }

    /// Adds every ID in `ratings` not yet present, in order of appearance.
    pub fn extend_with<T>(&mut self, ratings: &[Rating<T>]) {
        for r in ratings {
            self.intern_row(&r.row);
            self.intern_col(&r.col);
        }
    }

    /// Indexes `ratings` into an `nrows × ncols` matrix. Every ID must be known.
    pub fn observations<T: Scalar>(&self, ratings: &[Rating<T>], duplicates: DuplicatePolicy) -> Result<SparseObservations<T>> {
        if ratings.is_empty() {
            return Err(Error::Data("no ratings found".into()));
        }
        let mut trip = Vec::with_capacity(ratings.len());
        for r in ratings {
            let (Some(i), Some(j)) = (self.row_index(&r.row), self.col_index(&r.col)) else {
                return Err(Error::Data(format!("line {}: id pair ({}, {}) is not in the id map", r.line, r.row, r.col)));
            };
            trip.push((i, j, r.value));
        }
        SparseObservations::from_triplets(self.nrows(), self.ncols(), trip, duplicates).map_err(|e| match (e, duplicates) {
            (Error::Data(msg), DuplicatePolicy::Reject) => {
                Error::Data(format!("{msg} (pass lenient duplicate handling to keep the last occurrence)"))
            }
            (e, _) => e,
        })
    }
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, id: &str) -> usize {
    if let Some(&i) = index.get(id) {
        return i;
    }
    let i = ids.len();
    ids.push(id.to_string());
    index.insert(id.to_string(), i);
    i
}

/// Reads a ratings stream, assigning indices in order of first appearance.
pub fn load_ratings<T: Scalar, R: BufRead>(reader: R, opts: RatingsOptions) -> Result<(SparseObservations<T>, IdMap)> {
    let ratings = parse_ratings(reader, opts.separator)?;
    let mut map = IdMap::new();
    map.extend_with(&ratings);
    let obs = map.observations(&ratings, opts.duplicates)?;
    Ok((obs, map))
}

/// Orders IDs numerically when both parse as integers, otherwise bytewise.
fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i128>(), b.parse::<i128>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Canonical serialization: tab separated, sorted by external row then column
/// ID, values in shortest round-trip form. Independent of the index order, so
/// reading and re-writing it reproduces the same bytes.
pub fn write_ratings<T: Scalar, W: Write>(mut w: W, obs: &SparseObservations<T>, ids: &IdMap) -> Result<()> {
    if (obs.nrows(), obs.ncols()) != (ids.nrows(), ids.ncols()) {
        return Err(Error::invalid("id map does not match the observation dimensions"));
    }
    let mut entries: Vec<(usize, usize, T)> = obs.iter().collect();
    entries.sort_by(|a, b| compare_ids(&ids.rows[a.0], &ids.rows[b.0]).then_with(|| compare_ids(&ids.cols[a.1], &ids.cols[b.1])));
    for (i, j, v) in entries {
        writeln!(w, "{}\t{}\t{}", ids.rows[i], ids.cols[j], v)?;
    }
    w.flush()?;
    Ok(())
}
