//! Dataset model, CSV ingestion, distances and adjacency graphs.

mod csvio;
mod graph;

pub use csvio::{
    load_csv, load_csv_reader, load_edge_list, load_edge_list_reader, write_csv, CsvSchema, LoadedDataset,
};
pub use graph::{graph_laplacian, knn_graph, SpatialGraph, DEFAULT_KNN};

use std::collections::HashSet;

use thiserror::Error;

use crate::numkernel::{Matrix, NumError, SymMatrix};

pub const DEFAULT_DISTANCE_UNIT: &str = "1e6 m";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset needs at least 3 rows, got {0}")]
    TooFewRows(usize),

    #[error("column `{field}` has length {found}, expected {expected}")]
    LengthMismatch {
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in `{field}` at row {row}")]
    NonFinite { field: String, row: usize },

    #[error("duplicate record id `{0}`")]
    DuplicateId(String),

    #[error("empty region label at row {0}")]
    EmptyRegionLabel(usize),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("no rows left after dropping {dropped} incomplete rows")]
    EmptyAfterFiltering { dropped: usize },

    #[error("non-numeric value `{value}` in column `{column}` at line {line}")]
    NonNumericValue {
        column: String,
        line: u64,
        value: String,
    },

    #[error("k = {k} must be below the number of points ({n})")]
    KTooLarge { k: usize, n: usize },

    #[error("invalid edge at line {line}: {reason}")]
    InvalidEdge { line: u64, reason: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Universal input record: coordinates, exposure, optional outcome,
/// covariates and region labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialDataset {
    coords: Vec<[f64; 2]>,
    exposure: Vec<f64>,
    outcome: Option<Vec<f64>>,
    covariates: Matrix,
    covariate_names: Vec<String>,
    region: Option<Vec<String>>,
    ids: Vec<String>,
    distance_unit: String,
}

impl SpatialDataset {
    /// Coordinates and exposure only. Ids default to `0..n`.
    pub fn new(coords: Vec<[f64; 2]>, exposure: Vec<f64>) -> Result<Self, DataError> {
        let n = coords.len();
        if n < 3 {
            return Err(DataError::TooFewRows(n));
        }
        check_len("exposure", n, exposure.len())?;
        for (i, c) in coords.iter().enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(DataError::NonFinite {
                    field: "coords".into(),
                    row: i,
                });
            }
        }
        check_finite("exposure", &exposure)?;
        Ok(Self {
            coords,
            exposure,
            outcome: None,
            covariates: Matrix::zeros(n, 0),
            covariate_names: Vec::new(),
            region: None,
            ids: (0..n).map(|i| i.to_string()).collect(),
            distance_unit: DEFAULT_DISTANCE_UNIT.to_string(),
        })
    }

    pub fn with_outcome(mut self, outcome: Vec<f64>) -> Result<Self, DataError> {
        check_len("outcome", self.n(), outcome.len())?;
        check_finite("outcome", &outcome)?;
        self.outcome = Some(outcome);
        Ok(self)
    }

    /// `covariates` is n × p; `names` labels the columns.
    pub fn with_covariates(mut self, covariates: Matrix, names: Vec<String>) -> Result<Self, DataError> {
        check_len("covariates", self.n(), covariates.rows())?;
        check_len("covariate names", covariates.cols(), names.len())?;
        for j in 0..covariates.cols() {
            check_finite(&names[j], &covariates.column(j))?;
        }
        self.covariates = covariates;
        self.covariate_names = names;
        Ok(self)
    }

    pub fn with_region(mut self, region: Vec<String>) -> Result<Self, DataError> {
        check_len("region", self.n(), region.len())?;
        if let Some(i) = region.iter().position(|r| r.is_empty()) {
            return Err(DataError::EmptyRegionLabel(i));
        }
        self.region = Some(region);
        Ok(self)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self, DataError> {
        check_len("id", self.n(), ids.len())?;
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(DataError::DuplicateId(id.clone()));
            }
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn with_distance_unit(mut self, unit: impl Into<String>) -> Self {
        self.distance_unit = unit.into();
        self
    }

    /// Same record with a different exposure vector.
    pub fn with_exposure(mut self, exposure: Vec<f64>) -> Result<Self, DataError> {
        check_len("exposure", self.n(), exposure.len())?;
        check_finite("exposure", &exposure)?;
        self.exposure = exposure;
        Ok(self)
    }

    /// Rows selected by `keep`, in order. Fails if fewer than 3 remain.
    pub fn subset(&self, keep: &[usize]) -> Result<Self, DataError> {
        if keep.len() < 3 {
            return Err(DataError::TooFewRows(keep.len()));
        }
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(Self {
            coords: keep.iter().map(|&i| self.coords[i]).collect(),
            exposure: pick(&self.exposure),
            outcome: self.outcome.as_deref().map(pick),
            covariates: Matrix::from_fn(keep.len(), self.p(), |i, j| self.covariates[(keep[i], j)]),
            covariate_names: self.covariate_names.clone(),
            region: self
                .region
                .as_ref()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect()),
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            distance_unit: self.distance_unit.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.cols()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn exposure(&self) -> &[f64] {
        &self.exposure
    }

    pub fn outcome(&self) -> Option<&[f64]> {
        self.outcome.as_deref()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn region(&self) -> Option<&[String]> {
        self.region.as_deref()
    }

    /// Sorted distinct region labels.
    pub fn region_levels(&self) -> Option<Vec<String>> {
        self.region.as_ref().map(|r| {
            let mut levels: Vec<String> = r.clone();
            levels.sort();
            levels.dedup();
            levels
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn distance_unit(&self) -> &str {
        &self.distance_unit
    }
}

fn check_len(field: &str, expected: usize, found: usize) -> Result<(), DataError> {
    if expected != found {
        return Err(DataError::LengthMismatch {
            field: field.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

fn check_finite(field: &str, v: &[f64]) -> Result<(), DataError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(row) => Err(DataError::NonFinite {
            field: field.to_string(),
            row,
        }),
        None => Ok(()),
    }
}

#[inline]
pub fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pairwise Euclidean distances between the dataset's coordinates.
pub fn distance_matrix(d: &SpatialDataset) -> SymMatrix {
    let c = d.coords();
    SymMatrix::from_upper_fn(d.n(), |i, j| if i == j { 0.0 } else { euclidean(c[i], c[j]) })
        .expect("dataset has at least 3 rows")
}
