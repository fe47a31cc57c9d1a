use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, SpatialDataset, SpatialGraph};
use crate::numkernel::Matrix;

/// Maps dataset fields to CSV column names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default = "default_x")]
    pub x: String,
    #[serde(default = "default_y")]
    pub y: String,
    #[serde(default = "default_exposure")]
    pub exposure: String,
    #[serde(default)]
    pub outcome: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub region: Option<String>,
}

fn default_x() -> String {
    "x".into()
}
fn default_y() -> String {
    "y".into()
}
fn default_exposure() -> String {
    "a".into()
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: None,
            x: default_x(),
            y: default_y(),
            exposure: default_exposure(),
            outcome: None,
            covariates: Vec::new(),
            region: None,
        }
    }
}

impl CsvSchema {
    /// The schema `write_csv` produces for `d`.
    pub fn for_dataset(d: &SpatialDataset) -> Self {
        Self {
            id: Some("id".into()),
            outcome: d.outcome().map(|_| "outcome".into()),
            covariates: d.covariate_names().to_vec(),
            region: d.region().map(|_| "region".into()),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: SpatialDataset,
    /// Rows dropped because a mapped field was missing or non-finite.
    pub dropped: usize,
    /// File line numbers of the dropped rows.
    pub dropped_lines: Vec<u64>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty()
        || s.eq_ignore_ascii_case("na")
        || s.eq_ignore_ascii_case("n/a")
        || s.eq_ignore_ascii_case("nan")
        || s.eq_ignore_ascii_case("null")
}

/// Parses a numeric cell; `Ok(None)` means missing.
fn parse_cell(s: &str, column: &str, line: u64) -> Result<Option<f64>, DataError> {
    if is_missing(s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(DataError::NonNumericValue {
            column: column.to_string(),
            line,
            value: s.to_string(),
        }),
    }
}

/// Reads a comma-separated file with a header row. Lines starting with `#`
/// are ignored. Rows with any missing mapped field are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LoadedDataset, DataError> {
    let file = std::fs::File::open(path)?;
    load_csv_reader(file, schema)
}

pub fn load_csv_reader<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<LoadedDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let ix = find(&schema.x)?;
    let iy = find(&schema.y)?;
    let ia = find(&schema.exposure)?;
    let iout = schema.outcome.as_deref().map(find).transpose()?;
    let icov = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>, _>>()?;
    let iregion = schema.region.as_deref().map(find).transpose()?;
    let iid = schema.id.as_deref().map(find).transpose()?;

    let p = icov.len();
    let mut coords = Vec::new();
    let mut exposure = Vec::new();
    let mut outcome = Vec::new();
    let mut cov = Vec::new();
    let mut region = Vec::new();
    let mut ids = Vec::new();
    let mut dropped_lines = Vec::new();

    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |pos| pos.line());
        let num = |i: usize, col: &str| parse_cell(rec.get(i).unwrap_or(""), col, line);

        let x = num(ix, &schema.x)?;
        let y = num(iy, &schema.y)?;
        let a = num(ia, &schema.exposure)?;
        let o = match (iout, &schema.outcome) {
            (Some(i), Some(name)) => Some(num(i, name)?),
            _ => None,
        };
        let mut row_cov = Vec::with_capacity(p);
        for (&i, name) in icov.iter().zip(&schema.covariates) {
            row_cov.push(num(i, name)?);
        }
        let reg = iregion.map(|i| rec.get(i).unwrap_or("").to_string());
        let id = iid.map(|i| rec.get(i).unwrap_or("").to_string());

        let complete = x.is_some()
            && y.is_some()
            && a.is_some()
            && o.is_none_or(|v| v.is_some())
            && row_cov.iter().all(Option::is_some)
            && reg.as_deref().is_none_or(|r| !is_missing(r))
            && id.as_deref().is_none_or(|r| !r.is_empty());
        if !complete {
            dropped_lines.push(line);
            continue;
        }
        coords.push([x.unwrap(), y.unwrap()]);
        exposure.push(a.unwrap());
        if let Some(Some(v)) = o {
            outcome.push(v);
        }
        cov.extend(row_cov.into_iter().map(Option::unwrap));
        if let Some(r) = reg {
            region.push(r);
        }
        if let Some(id) = id {
            ids.push(id);
        }
    }

    let dropped = dropped_lines.len();
    let n = coords.len();
    if n == 0 {
        return Err(DataError::EmptyAfterFiltering { dropped });
    }
    let mut d = SpatialDataset::new(coords, exposure)?;
    if schema.outcome.is_some() {
        d = d.with_outcome(outcome)?;
    }
    if p > 0 {
        d = d.with_covariates(Matrix::from_row_major(n, p, cov)?, schema.covariates.clone())?;
    }
    if schema.region.is_some() {
        d = d.with_region(region)?;
    }
    if schema.id.is_some() {
        d = d.with_ids(ids)?;
    }
    Ok(LoadedDataset {
        dataset: d,
        dropped,
        dropped_lines,
    })
}

/// Writes `d` with header `id,x,y,a[,outcome][,covariates...][,region]`,
/// preceded by `# key: value` metadata lines.
pub fn write_csv<W: Write>(d: &SpatialDataset, metadata: &[(String, String)], mut out: W) -> Result<(), DataError> {
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let schema = CsvSchema::for_dataset(d);
    let mut header = vec!["id".to_string(), schema.x, schema.y, schema.exposure];
    header.extend(schema.outcome);
    header.extend(schema.covariates);
    header.extend(schema.region);
    w.write_record(&header)?;

    let mut row = Vec::with_capacity(header.len());
    for i in 0..d.n() {
        row.clear();
        row.push(d.ids()[i].clone());
        row.push(d.coords()[i][0].to_string());
        row.push(d.coords()[i][1].to_string());
        row.push(d.exposure()[i].to_string());
        if let Some(o) = d.outcome() {
            row.push(o[i].to_string());
        }
        for j in 0..d.p() {
            row.push(d.covariates()[(i, j)].to_string());
        }
        if let Some(r) = d.region() {
            row.push(r[i].clone());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an undirected edge list: two integer ids per row, matched against
/// the dataset's record ids. An optional non-numeric header row and `#`
/// comment lines are skipped; repeated edges collapse to one.
pub fn load_edge_list(path: impl AsRef<Path>, d: &SpatialDataset) -> Result<SpatialGraph, DataError> {
    let file = std::fs::File::open(path)?;
    load_edge_list_reader(file, d)
}

pub fn load_edge_list_reader<R: std::io::Read>(reader: R, d: &SpatialDataset) -> Result<SpatialGraph, DataError> {
    let index: HashMap<i64, usize> = d
        .ids()
        .iter()
        .enumerate()
        .filter_map(|(i, id)| id.trim().parse::<i64>().ok().map(|v| (v, i)))
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut edges = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 2 {
            return Err(DataError::InvalidEdge {
                line,
                reason: "expected two id columns".into(),
            });
        }
        let parsed = (rec[0].parse::<i64>(), rec[1].parse::<i64>());
        let (a, b) = match parsed {
            (Ok(a), Ok(b)) => (a, b),
            _ if first => {
                first = false;
                continue;
            }
            _ => {
                return Err(DataError::InvalidEdge {
                    line,
                    reason: format!("non-integer id in `{},{}`", &rec[0], &rec[1]),
                })
            }
        };
        first = false;
        let lookup = |v: i64| {
            index.get(&v).copied().ok_or_else(|| DataError::InvalidEdge {
                line,
                reason: format!("unknown id {v}"),
            })
        };
        let (i, j) = (lookup(a)?, lookup(b)?);
        if i == j {
            return Err(DataError::InvalidEdge {
                line,
                reason: format!("self-loop on id {a}"),
            });
        }
        edges.push((i, j));
    }
    Ok(SpatialGraph::new(d.n(), edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, schema: &CsvSchema) -> Result<LoadedDataset, DataError> {
        load_csv_reader(text.as_bytes(), schema)
    }

    #[test]
    fn minimal_schema() {
        let l = load("x,y,a\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n2,2,5\n", &CsvSchema::default()).unwrap();
        assert_eq!(l.dataset.n(), 5);
        assert_eq!(l.dataset.p(), 0);
        assert!(l.dataset.outcome().is_none());
        assert_eq!(l.dropped, 0);
    }

    #[test]
    fn nan_row_is_dropped_and_counted() {
        let l = load("x,y,a\n0,0,1\n1,0,NaN\n0,1,3\n1,1,4\n", &CsvSchema::default()).unwrap();
        assert_eq!(l.dataset.n(), 3);
        assert_eq!(l.dropped, 1);
        assert_eq!(l.dropped_lines, vec![3]);
    }

    #[test]
    fn comments_are_skipped() {
        let l = load("# unit: 1e6 m\nx,y,a\n0,0,1\n# mid\n1,0,2\n0,1,3\n", &CsvSchema::default()).unwrap();
        assert_eq!(l.dataset.n(), 3);
    }

    #[test]
    fn errors_name_the_problem() {
        assert!(matches!(
            load("x,y,b\n0,0,1\n", &CsvSchema::default()),
            Err(DataError::MissingColumn(c)) if c == "a"
        ));
        assert!(matches!(
            load("x,y,a\n0,0,1\n1,0,abc\n", &CsvSchema::default()),
            Err(DataError::NonNumericValue { line: 3, .. })
        ));
        assert!(matches!(
            load("x,y,a\n0,0,\n", &CsvSchema::default()),
            Err(DataError::EmptyAfterFiltering { dropped: 1 })
        ));
    }

    #[test]
    fn schema_rejects_unknown_keys() {
        let bad: Result<CsvSchema, _> = serde_json::from_str(r#"{"x": "lon", "exposur": "pm"}"#);
        assert!(bad.is_err());
        let ok: CsvSchema = serde_json::from_str(r#"{"x": "lon", "exposure": "pm"}"#).unwrap();
        assert_eq!(ok.y, "y");
    }

    #[test]
    fn edge_list_with_header_and_duplicates() {
        let d = SpatialDataset::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![0.0; 3]).unwrap();
        let g = load_edge_list_reader("from,to\n0,1\n1,0\n1,2\n".as_bytes(), &d).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.degree(), [1, 2, 1]);
        assert!(matches!(
            load_edge_list_reader("0,0\n".as_bytes(), &d),
            Err(DataError::InvalidEdge { .. })
        ));
        assert!(matches!(
            load_edge_list_reader("0,7\n".as_bytes(), &d),
            Err(DataError::InvalidEdge { .. })
        ));
    }
}
