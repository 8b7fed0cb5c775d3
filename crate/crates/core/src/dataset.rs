use crate::error::{Error, Result};

/// The private integer samples, an `n × d` row-major matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<i64>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, values: Vec<i64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Config(format!(
                "dataset must be non-empty, got {n}x{d}"
            )));
        }
        if values.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n}x{d} dataset",
                values.len()
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} features, expected {d}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values)
    }

    /// One-dimensional dataset from scalar samples.
    pub fn from_scalars(values: &[i64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.values.chunks(self.d)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn column_totals(&self) -> Vec<i128> {
        let mut totals = vec![0i128; self.d];
        for r in self.rows() {
            for (t, &v) in totals.iter_mut().zip(r) {
                *t += i128::from(v);
            }
        }
        totals
    }

    /// The samples as an `n × d` integer matrix.
    pub fn to_int_matrix(&self) -> crate::matrix::IntMatrix {
        let rows: Vec<Vec<i128>> = self
            .rows()
            .map(|r| r.iter().map(|&v| i128::from(v)).collect())
            .collect();
        crate::matrix::IntMatrix::from_rows(&rows).expect("rows are rectangular")
    }
}
