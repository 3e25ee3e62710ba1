//! Typed tabular data: columns, datasets and CSV ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Factor,
    Ordered,
    Logical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Factor => "factor",
            ColumnKind::Ordered => "ordered",
            ColumnKind::Logical => "logical",
        })
    }
}

/// Column storage. Numeric cells use NaN as the missing marker, the other
/// kinds use `None`.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Factor { codes: Vec<Option<u32>>, levels: Vec<String>, ordered: bool },
    Logical(Vec<Option<bool>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    name: String,
    data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::data("column names must be nonempty"));
        }
        match &data {
            ColumnData::Numeric(v) => {
                if v.iter().any(|x| x.is_infinite()) {
                    return Err(Error::data(format!("column '{name}' contains infinite values")));
                }
            }
            ColumnData::Factor { codes, levels, .. } => {
                let distinct: BTreeSet<&String> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    return Err(Error::data(format!("column '{name}' has duplicate levels")));
                }
                if codes.iter().flatten().any(|&c| c as usize >= levels.len()) {
                    return Err(Error::data(format!("column '{name}' has codes outside its levels")));
                }
            }
            ColumnData::Logical(_) => {}
        }
        Ok(Column { name, data })
    }

    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Column::new(name, ColumnData::Numeric(values)).expect("valid numeric column")
    }

    /// Factor column from string labels; `None` marks missing. Levels are
    /// sorted unless given explicitly.
    pub fn factor<S: AsRef<str>>(
        name: impl Into<String>,
        values: &[Option<S>],
        levels: Option<Vec<String>>,
    ) -> Result<Self> {
        let levels = levels.unwrap_or_else(|| {
            let set: BTreeSet<String> =
                values.iter().flatten().map(|s| s.as_ref().to_string()).collect();
            set.into_iter().collect()
        });
        let index: BTreeMap<&str, u32> =
            levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let name = name.into();
        let mut codes = Vec::with_capacity(values.len());
        for v in values {
            match v {
                None => codes.push(None),
                Some(s) => match index.get(s.as_ref()) {
                    Some(&c) => codes.push(Some(c)),
                    None => {
                        return Err(Error::data(format!(
                            "value '{}' of column '{name}' is not a declared level",
                            s.as_ref()
                        )))
                    }
                },
            }
        }
        Column::new(name, ColumnData::Factor { codes, levels, ordered: false })
    }

    /// Convenience for factor columns without missing cells.
    pub fn factor_from_strs(name: impl Into<String>, values: &[&str]) -> Self {
        let opts: Vec<Option<&str>> = values.iter().map(|s| Some(*s)).collect();
        Column::factor(name, &opts, None).expect("valid factor column")
    }

    pub fn factor_codes(name: impl Into<String>, codes: Vec<Option<u32>>, levels: Vec<String>) -> Result<Self> {
        Column::new(name, ColumnData::Factor { codes, levels, ordered: false })
    }

    pub fn logical(name: impl Into<String>, values: Vec<Option<bool>>) -> Self {
        Column::new(name, ColumnData::Logical(values)).expect("valid logical column")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn into_data(self) -> ColumnData {
        self.data
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn kind(&self) -> ColumnKind {
        match &self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Factor { ordered: true, .. } => ColumnKind::Ordered,
            ColumnData::Factor { .. } => ColumnKind::Factor,
            ColumnData::Logical(_) => ColumnKind::Logical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Factor { codes, .. } => codes.len(),
            ColumnData::Logical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, i: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[i].is_nan(),
            ColumnData::Factor { codes, .. } => codes[i].is_none(),
            ColumnData::Logical(v) => v[i].is_none(),
        }
    }

    pub fn n_missing(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing(i)).count()
    }

    pub fn has_missing(&self) -> bool {
        (0..self.len()).any(|i| self.is_missing(i))
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_logical(&self) -> Option<&[Option<bool>]> {
        match &self.data {
            ColumnData::Logical(v) => Some(v),
            _ => None,
        }
    }

    pub fn codes(&self) -> Option<&[Option<u32>]> {
        match &self.data {
            ColumnData::Factor { codes, .. } => Some(codes),
            _ => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Factor { levels, .. } => Some(levels),
            _ => None,
        }
    }

    /// Category codes for factor and logical columns (logical: FALSE=0, TRUE=1).
    pub fn category_codes(&self) -> Option<Vec<Option<u32>>> {
        match &self.data {
            ColumnData::Factor { codes, .. } => Some(codes.clone()),
            ColumnData::Logical(v) => Some(v.iter().map(|b| b.map(|b| b as u32)).collect()),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn category_levels(&self) -> Option<Vec<String>> {
        match &self.data {
            ColumnData::Factor { levels, .. } => Some(levels.clone()),
            ColumnData::Logical(_) => Some(vec!["FALSE".into(), "TRUE".into()]),
            ColumnData::Numeric(_) => None,
        }
    }

    /// Numeric view of any column: factor/ordered cells become level indices,
    /// logical cells 0/1, missing cells NaN.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            ColumnData::Numeric(v) => v.clone(),
            ColumnData::Factor { codes, .. } => {
                codes.iter().map(|c| c.map_or(f64::NAN, |c| c as f64)).collect()
            }
            ColumnData::Logical(v) => {
                v.iter().map(|b| b.map_or(f64::NAN, |b| if b { 1.0 } else { 0.0 })).collect()
            }
        }
    }

    /// Cell rendered as text; missing cells render as "NA".
    pub fn cell_string(&self, i: usize) -> String {
        match &self.data {
            ColumnData::Numeric(v) => fmt_num(v[i]),
            ColumnData::Factor { codes, levels, .. } => {
                codes[i].map_or_else(|| "NA".to_string(), |c| levels[c as usize].clone())
            }
            ColumnData::Logical(v) => match v[i] {
                None => "NA".into(),
                Some(true) => "TRUE".into(),
                Some(false) => "FALSE".into(),
            },
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnData::Factor { codes, levels, ordered } => ColumnData::Factor {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
                ordered: *ordered,
            },
            ColumnData::Logical(v) => ColumnData::Logical(rows.iter().map(|&i| v[i]).collect()),
        };
        Column { name: self.name.clone(), data }
    }

    /// Number of distinct non-missing values.
    pub fn n_distinct(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => {
                let mut xs: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
                xs.sort_by(|a, b| a.total_cmp(b));
                xs.dedup();
                xs.len()
            }
            ColumnData::Factor { codes, .. } => codes.iter().flatten().collect::<BTreeSet<_>>().len(),
            ColumnData::Logical(v) => v.iter().flatten().collect::<BTreeSet<_>>().len(),
        }
    }

    /// Re-expresses a factor column over `levels` (matched by label). Values
    /// whose label is not in `levels` become missing; the count of such
    /// cells is returned alongside.
    pub fn recode_levels(&self, levels: &[String]) -> Result<(Column, usize)> {
        match &self.data {
            ColumnData::Factor { codes, levels: own, ordered } => {
                let index: BTreeMap<&str, u32> =
                    levels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
                let mut unseen = 0;
                let codes = codes
                    .iter()
                    .map(|c| {
                        c.and_then(|c| {
                            let r = index.get(own[c as usize].as_str()).copied();
                            if r.is_none() {
                                unseen += 1;
                            }
                            r
                        })
                    })
                    .collect();
                Ok((
                    Column {
                        name: self.name.clone(),
                        data: ColumnData::Factor { codes, levels: levels.to_vec(), ordered: *ordered },
                    },
                    unseen,
                ))
            }
            ColumnData::Logical(_) => Ok((self.clone(), 0)),
            ColumnData::Numeric(_) => {
                Err(Error::data(format!("column '{}' is numeric, expected a factor", self.name)))
            }
        }
    }
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else if x != 0.0 && !(1e-5..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Schema override for one CSV column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnSpec {
    Kind(ColumnKind),
    WithLevels { kind: ColumnKind, levels: Vec<String> },
}

impl ColumnSpec {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnSpec::Kind(k) => *k,
            ColumnSpec::WithLevels { kind, .. } => *kind,
        }
    }

    fn levels(&self) -> Option<&[String]> {
        match self {
            ColumnSpec::Kind(_) => None,
            ColumnSpec::WithLevels { levels, .. } => Some(levels),
        }
    }
}

pub type Schema = BTreeMap<String, ColumnSpec>;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.len());
        Self::with_rows(columns, n_rows)
    }

    /// Like [`Dataset::new`] but keeps an explicit row count, so a dataset
    /// without columns can still have rows.
    pub fn with_rows(columns: Vec<Column>, n_rows: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(Error::data(format!(
                    "column '{}' has {} rows, expected {n_rows}",
                    c.name,
                    c.len()
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::data(format!("duplicate column name '{}'", c.name)));
            }
        }
        Ok(Dataset { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::unknown("column", name))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.has_missing())
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_rows) {
            return Err(Error::arg(format!("row index {bad} out of range 0..{}", self.n_rows)));
        }
        Ok(Dataset {
            columns: self.columns.iter().map(|c| c.subset(rows)).collect(),
            n_rows: rows.len(),
        })
    }

    /// Keeps the named columns in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        let cols = names
            .iter()
            .map(|n| self.column(n.as_ref()).cloned())
            .collect::<Result<Vec<_>>>()?;
        Dataset::with_rows(cols, self.n_rows)
    }

    pub fn drop<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        for n in names {
            self.column(n.as_ref())?;
        }
        let cols = self
            .columns
            .iter()
            .filter(|c| !names.iter().any(|n| n.as_ref() == c.name))
            .cloned()
            .collect();
        Dataset::with_rows(cols, self.n_rows)
    }

    /// Replaces a same-named column or appends a new one.
    pub fn with_column(&self, col: Column) -> Result<Dataset> {
        if col.len() != self.n_rows {
            return Err(Error::data(format!(
                "column '{}' has {} rows, expected {}",
                col.name,
                col.len(),
                self.n_rows
            )));
        }
        let mut cols = self.columns.clone();
        match cols.iter().position(|c| c.name == col.name) {
            Some(i) => cols[i] = col,
            None => cols.push(col),
        }
        Ok(Dataset { columns: cols, n_rows: self.n_rows })
    }

    pub fn push_column(&mut self, col: Column) -> Result<()> {
        *self = self.with_column(col)?;
        Ok(())
    }

    /// Stacks rows of datasets with identical column names and kinds.
    /// Factor columns are merged over the union of levels (first-seen order).
    pub fn rbind(&self, other: &Dataset) -> Result<Dataset> {
        if self.names() != other.names() {
            return Err(Error::data("rbind requires identical column names"));
        }
        let mut cols = Vec::with_capacity(self.columns.len());
        for (a, b) in self.columns.iter().zip(&other.columns) {
            let data = match (&a.data, &b.data) {
                (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                    ColumnData::Numeric(x.iter().chain(y).copied().collect())
                }
                (ColumnData::Logical(x), ColumnData::Logical(y)) => {
                    ColumnData::Logical(x.iter().chain(y).copied().collect())
                }
                (
                    ColumnData::Factor { codes: ca, levels: la, ordered },
                    ColumnData::Factor { codes: cb, levels: lb, .. },
                ) => {
                    let mut levels = la.clone();
                    for l in lb {
                        if !levels.contains(l) {
                            levels.push(l.clone());
                        }
                    }
                    let map: Vec<u32> =
                        lb.iter().map(|l| levels.iter().position(|x| x == l).unwrap() as u32).collect();
                    let codes = ca
                        .iter()
                        .copied()
                        .chain(cb.iter().map(|c| c.map(|c| map[c as usize])))
                        .collect();
                    ColumnData::Factor { codes, levels, ordered: *ordered }
                }
                _ => return Err(Error::data(format!("rbind: column '{}' kinds differ", a.name))),
            };
            cols.push(Column { name: a.name.clone(), data });
        }
        Dataset::with_rows(cols, self.n_rows + other.n_rows)
    }

    /// Row-major numeric matrix of the given columns (factor codes / logical
    /// 0-1 for non-numeric kinds).
    pub fn numeric_rows<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<Vec<f64>> = names
            .iter()
            .map(|n| self.column(n.as_ref()).map(|c| c.to_f64()))
            .collect::<Result<_>>()?;
        Ok((0..self.n_rows).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.columns.iter().map(|c| csv_quote(&c.name)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n_rows {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| if c.is_missing(i) { String::new() } else { csv_quote(&c.cell_string(i)) })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv_reader<R: Read>(mut reader: R, schema: Option<&Schema>) -> Result<Dataset> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let text = blank_lines_as_empty_cells(text)?;
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.to_string()).collect();
        if let Some(schema) = schema {
            for name in schema.keys() {
                if !header.contains(name) {
                    return Err(Error::data(format!("schema names nonexistent column '{name}'")));
                }
            }
        }
        let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(format!("row {}: {e}", line + 2)))?;
            for (j, field) in rec.iter().enumerate() {
                let v = if field.is_empty() || field == "NA" { None } else { Some(field.to_string()) };
                cells[j].push(v);
            }
        }
        let n_rows = cells.first().map_or(0, |c| c.len());
        let mut cols = Vec::with_capacity(header.len());
        for (name, values) in header.into_iter().zip(cells) {
            let spec = schema.and_then(|s| s.get(&name));
            cols.push(parse_column(name, &values, spec)?);
        }
        Dataset::with_rows(cols, n_rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::data(format!("cannot read '{}': {e}", path.display())))?;
        Dataset::from_csv_reader(file, schema)
    }

    pub fn from_csv_str(text: &str, schema: Option<&Schema>) -> Result<Dataset> {
        Dataset::from_csv_reader(text.as_bytes(), schema)
    }
}

/// Loads a CSV file with a header row. Column kinds come from `schema` when
/// given, otherwise logical ("TRUE"/"FALSE" only), then numeric, then factor.
pub fn load_dataset(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<Dataset> {
    Dataset::from_csv_path(path, schema)
}

/// The csv reader skips blank lines; in a single-column file a blank line is
/// an empty (missing) cell, so it is made explicit here.
fn blank_lines_as_empty_cells(text: String) -> Result<String> {
    let first = text.lines().next().unwrap_or("");
    let n_fields = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(first.as_bytes())
        .records()
        .next()
        .transpose()?
        .map_or(0, |r| r.len());
    if n_fields != 1 {
        return Ok(text);
    }
    let body = text.trim_end_matches(['\n', '\r']);
    let mut out = String::with_capacity(body.len() + 16);
    for (i, line) in body.lines().enumerate() {
        if i > 0 && line.trim().is_empty() {
            out.push_str("\"\"");
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    Ok(out)
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn parse_column(name: String, values: &[Option<String>], spec: Option<&ColumnSpec>) -> Result<Column> {
    let kind = match spec {
        Some(s) => s.kind(),
        None => infer_kind(values),
    };
    match kind {
        ColumnKind::Logical => {
            let v = values
                .iter()
                .map(|c| match c.as_deref() {
                    None => Ok(None),
                    Some("TRUE") | Some("true") => Ok(Some(true)),
                    Some("FALSE") | Some("false") => Ok(Some(false)),
                    Some(other) => Err(Error::data(format!("'{other}' in logical column '{name}'"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Column::logical(name, v))
        }
        ColumnKind::Numeric => {
            let v = values
                .iter()
                .map(|c| match c.as_deref() {
                    None => Ok(f64::NAN),
                    Some(s) => s
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::data(format!("'{s}' in numeric column '{name}'"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Column::new(name, ColumnData::Numeric(v))
        }
        ColumnKind::Factor | ColumnKind::Ordered => {
            let levels = spec.and_then(|s| s.levels()).map(|l| l.to_vec());
            let col = Column::factor(name, values, levels)?;
            if kind == ColumnKind::Ordered {
                let ColumnData::Factor { codes, levels, .. } = col.data else { unreachable!() };
                Column::new(col.name, ColumnData::Factor { codes, levels, ordered: true })
            } else {
                Ok(col)
            }
        }
    }
}

fn infer_kind(values: &[Option<String>]) -> ColumnKind {
    let present: Vec<&str> = values.iter().flatten().map(|s| s.as_str()).collect();
    if !present.is_empty() && present.iter().all(|s| *s == "TRUE" || *s == "FALSE") {
        ColumnKind::Logical
    } else if present.iter().all(|s| s.trim().parse::<f64>().map_or(false, |x| x.is_finite())) {
        ColumnKind::Numeric
    } else {
        ColumnKind::Factor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infers_numeric_and_factor() {
        let d = Dataset::from_csv_str("x,y\n1,a\n2,b\n", None).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.column("x").unwrap().as_numeric().unwrap(), &[1.0, 2.0]);
        let y = d.column("y").unwrap();
        assert_eq!(y.kind(), ColumnKind::Factor);
        assert_eq!(y.levels().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = Dataset::from_csv_str("x\n1\n\n3", None).unwrap();
        let x = d.column("x").unwrap().as_numeric().unwrap();
        assert_eq!(x.len(), 3);
        assert_eq!(x[0], 1.0);
        assert!(x[1].is_nan());
        assert_eq!(x[2], 3.0);
        let d2 = Dataset::from_csv_str("x,z\n1,a\n,b\n3,c\n", None).unwrap();
        assert!(d2.column("x").unwrap().is_missing(1));
    }

    #[test]
    fn single_column_blank_cell_is_missing() {
        let d = Dataset::from_csv_str("x\n1\n\"\"\n3\n", None).unwrap();
        let x = d.column("x").unwrap().as_numeric().unwrap();
        assert_eq!(x.len(), 3);
        assert!(x[1].is_nan());
    }

    #[test]
    fn na_literal_and_logical_inference() {
        let d = Dataset::from_csv_str("f,g\nTRUE,NA\nFALSE,2\n", None).unwrap();
        assert_eq!(d.column("f").unwrap().kind(), ColumnKind::Logical);
        assert!(d.column("g").unwrap().is_missing(0));
    }

    #[test]
    fn ragged_rows_error() {
        assert!(Dataset::from_csv_str("a,b\n1,2\n3\n", None).is_err());
    }

    #[test]
    fn schema_overrides_and_rejects_unknown() {
        let mut schema = Schema::new();
        schema.insert("x".into(), ColumnSpec::Kind(ColumnKind::Factor));
        let d = Dataset::from_csv_str("x,y\n1,2\n2,3\n", Some(&schema)).unwrap();
        assert_eq!(d.column("x").unwrap().kind(), ColumnKind::Factor);
        schema.insert("nope".into(), ColumnSpec::Kind(ColumnKind::Numeric));
        assert!(Dataset::from_csv_str("x,y\n1,2\n", Some(&schema)).is_err());
    }

    #[test]
    fn ordered_levels_from_schema() {
        let mut schema = Schema::new();
        schema.insert(
            "s".into(),
            ColumnSpec::WithLevels { kind: ColumnKind::Ordered, levels: vec!["lo".into(), "mid".into(), "hi".into()] },
        );
        let d = Dataset::from_csv_str("s\nhi\nlo\nmid\n", Some(&schema)).unwrap();
        let s = d.column("s").unwrap();
        assert_eq!(s.kind(), ColumnKind::Ordered);
        assert_eq!(s.to_f64(), vec![2.0, 0.0, 1.0]);
    }

    #[test]
    fn quoted_fields() {
        let d = Dataset::from_csv_str("a,b\n\"x,y\",1\n", None).unwrap();
        assert_eq!(d.column("a").unwrap().cell_string(0), "x,y");
        assert!(d.to_csv_string().contains("\"x,y\""));
    }

    #[test]
    fn duplicate_names_rejected() {
        let c = Column::numeric("a", vec![1.0]);
        assert!(Dataset::new(vec![c.clone(), c]).is_err());
    }

    #[test]
    fn recode_unseen_levels() {
        let c = Column::factor_from_strs("f", &["a", "b", "c"]);
        let (r, unseen) = c.recode_levels(&["a".into(), "b".into()]).unwrap();
        assert_eq!(unseen, 1);
        assert_eq!(r.codes().unwrap(), &[Some(0), Some(1), None]);
    }
}
