//! JSON and CSV forms of matrices, joint tables, work distributions and row records.
//!
//! CSV output always has a header row, LF line endings and `.` decimals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::ComplexMatrix;
use crate::scalar::Real;
use crate::workstats::{JointWorkTable, Scheme, WorkDistribution, WorkPoint};
use num_complex::Complex;

/// `{dim, entries: [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix<T: Real>(m: &ComplexMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let dim = m.nrows();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = m[(i, j)];
                entries.push([z.re.to_f64_lossy(), z.im.to_f64_lossy()]);
            }
        }
        Ok(MatrixJson { dim, entries })
    }

    pub fn to_matrix<T: Real>(&self) -> Result<ComplexMatrix<T>> {
        if self.entries.len() != self.dim * self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim * self.dim, found: self.entries.len() });
        }
        if self.entries.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ComplexMatrix::from_row_iterator(
            self.dim,
            self.dim,
            self.entries.iter().map(|[re, im]| Complex::new(T::lit(*re), T::lit(*im))),
        ))
    }
}

pub fn matrix_to_json<T: Real>(m: &ComplexMatrix<T>) -> Result<String> {
    to_json(&MatrixJson::from_matrix(m)?)
}

pub fn matrix_from_json<T: Real>(text: &str) -> Result<ComplexMatrix<T>> {
    let parsed: MatrixJson = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
    parsed.to_matrix()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEnergies {
    pub initial: Vec<f64>,
    #[serde(rename = "final")]
    pub final_: Vec<f64>,
}

/// `{scheme, energies, P}` with `P[m][n]`, m indexing final and n initial levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTableJson {
    pub scheme: Scheme,
    pub energies: TableEnergies,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
}

impl JointTableJson {
    pub fn from_table<T: Real>(table: &JointWorkTable<T>) -> Self {
        let lossy = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        let p = table.probabilities.row_iter().map(|row| row.iter().map(|x| x.to_f64_lossy()).collect()).collect();
        JointTableJson {
            scheme: table.scheme,
            energies: TableEnergies { initial: lossy(&table.initial_energies), final_: lossy(&table.final_energies) },
            p,
        }
    }
}

/// `{scheme, points: [{w, p}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionJson {
    pub scheme: Scheme,
    pub points: Vec<WorkPoint<f64>>,
}

impl DistributionJson {
    pub fn from_distribution<T: Real>(dist: &WorkDistribution<T>) -> Self {
        DistributionJson {
            scheme: dist.scheme,
            points: dist.points.iter().map(|q| WorkPoint { w: q.w.to_f64_lossy(), p: q.p.to_f64_lossy() }).collect(),
        }
    }
}

#[derive(Serialize)]
struct TableRow {
    m: usize,
    n: usize,
    #[serde(rename = "P")]
    p: f64,
}

pub fn to_json<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))
}

/// Serializes `rows` as CSV. An empty slice yields an empty string, since the
/// header is taken from the first record.
pub fn to_csv<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Serialization(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

/// CSV with columns `m,n,P`.
pub fn table_to_csv<T: Real>(table: &JointWorkTable<T>) -> Result<String> {
    let p = &table.probabilities;
    let rows: Vec<TableRow> = (0..p.nrows())
        .flat_map(|m| (0..p.ncols()).map(move |n| TableRow { m, n, p: p[(m, n)].to_f64_lossy() }))
        .collect();
    to_csv(&rows)
}

/// CSV with columns `w,p`.
pub fn distribution_to_csv<T: Real>(dist: &WorkDistribution<T>) -> Result<String> {
    to_csv(&DistributionJson::from_distribution(dist).points)
}
