//! Dense matrix containers shared by the simulator, the attack and the oracle.
//!
//! [`BinaryMatrix`] is stored column-major because trajectories are columns and
//! nearly every operation on them (stacking, appending, deduplication) is
//! column-wise. [`IntMatrix`] and [`RationalMatrix`] are row-major.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// A dense {0,1} matrix, column-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// An empty matrix with `rows` rows and no columns.
    pub fn empty(rows: usize) -> Self {
        Self::zeros(rows, 0)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from row slices. Any nonzero entry is treated as 1.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v != 0);
            }
        }
        Ok(m)
    }

    /// Builds a matrix from columns, each of length `rows`.
    pub fn from_columns<C: AsRef<[u8]>>(rows: usize, columns: &[C]) -> Result<Self> {
        let mut m = Self::empty(rows);
        for c in columns {
            m.push_column(c.as_ref())?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[col * self.rows + row] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[col * self.rows + row] = u8::from(value);
    }

    pub fn column(&self, col: usize) -> &[u8] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.cols).map(move |j| self.column(j))
    }

    pub fn row(&self, row: usize) -> Vec<u8> {
        (0..self.cols)
            .map(|j| self.data[j * self.rows + row])
            .collect()
    }

    pub fn push_column(&mut self, column: &[u8]) -> Result<()> {
        if column.len() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "column of length {} pushed onto matrix with {} rows",
                column.len(),
                self.rows
            )));
        }
        self.data.extend(column.iter().map(|&v| u8::from(v != 0)));
        self.cols += 1;
        Ok(())
    }

    /// Copy of rows `start..end`.
    pub fn row_range(&self, start: usize, end: usize) -> BinaryMatrix {
        assert!(start <= end && end <= self.rows, "row range out of bounds");
        let mut out = BinaryMatrix::empty(end - start);
        for c in self.columns() {
            out.data.extend_from_slice(&c[start..end]);
            out.cols += 1;
        }
        out
    }

    /// `[self; other]`.
    pub fn vstack(&self, other: &BinaryMatrix) -> Result<BinaryMatrix> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "vstack of {}x{} over {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let rows = self.rows + other.rows;
        let mut data = Vec::with_capacity(rows * self.cols);
        for (a, b) in self.columns().zip(other.columns()) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(BinaryMatrix {
            rows,
            cols: self.cols,
            data,
        })
    }

    /// `[self | other]`.
    pub fn hstack(&self, other: &BinaryMatrix) -> Result<BinaryMatrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "hstack of {}x{} beside {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(BinaryMatrix {
            rows: self.rows,
            cols: self.cols + other.cols,
            data,
        })
    }

    /// Keeps the first occurrence of every distinct column, in first-seen order.
    pub fn dedup_columns(&self) -> BinaryMatrix {
        let mut seen: HashSet<&[u8]> = HashSet::with_capacity(self.cols);
        let mut out = BinaryMatrix::empty(self.rows);
        for c in self.columns() {
            if seen.insert(c) {
                out.data.extend_from_slice(c);
                out.cols += 1;
            }
        }
        out
    }

    /// True when every column has exactly one 1 inside each consecutive
    /// `block`-row band.
    pub fn is_one_hot_per_block(&self, block: usize) -> bool {
        if block == 0 || !self.rows.is_multiple_of(block) {
            return false;
        }
        self.columns().all(|c| {
            c.chunks(block)
                .all(|b| b.iter().filter(|&&v| v != 0).count() == 1)
        })
    }

    pub fn columns_distinct(&self) -> bool {
        let set: HashSet<&[u8]> = self.columns().collect();
        set.len() == self.cols
    }

    pub fn to_rational(&self) -> RationalMatrix {
        let mut m = RationalMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                if self.get(i, j) {
                    *m.get_mut(i, j) = BigRational::one();
                }
            }
        }
        m
    }

    /// Exact product `self · rhs`.
    pub fn mul_int(&self, rhs: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != rhs.rows() {
            return Err(Error::ShapeMismatch(format!(
                "product of {}x{} and {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = IntMatrix::zeros(self.rows, rhs.cols());
        for j in 0..self.cols {
            let src = rhs.row(j);
            for (i, &bit) in self.column(j).iter().enumerate() {
                if bit != 0 {
                    for (o, &v) in out.row_mut(i).iter_mut().zip(src) {
                        *o += v;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: String = self
                .row(i)
                .iter()
                .map(|&v| if v != 0 { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        write!(f, "]")
    }
}

/// A dense row-major integer matrix. Entries are `i128` so that sums of
/// `i64` samples never overflow.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i128>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[i128]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != ncols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    /// Column vector from a slice.
    pub fn column_vector(values: &[i128]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> i128 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[i128] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [i128] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn vstack_all<'a>(parts: impl IntoIterator<Item = &'a IntMatrix>) -> Result<IntMatrix> {
        let mut out: Option<IntMatrix> = None;
        for p in parts {
            match &mut out {
                None => out = Some(p.clone()),
                Some(acc) => {
                    if acc.cols != p.cols {
                        return Err(Error::ShapeMismatch(format!(
                            "vstack of {} columns over {} columns",
                            acc.cols, p.cols
                        )));
                    }
                    acc.data.extend_from_slice(&p.data);
                    acc.rows += p.rows;
                }
            }
        }
        Ok(out.unwrap_or_else(|| IntMatrix::zeros(0, 0)))
    }

    pub fn checked_sub(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "difference of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Column-wise totals over all rows.
    pub fn column_totals(&self) -> Vec<i128> {
        let mut totals = vec![0i128; self.cols];
        for i in 0..self.rows {
            for (t, v) in totals.iter_mut().zip(self.row(i)) {
                *t += v;
            }
        }
        totals
    }

    pub fn to_rational(&self) -> RationalMatrix {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect(),
        }
    }
}

/// A dense row-major matrix of exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BigRational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            *m.get_mut(i, i) = BigRational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {ncols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn from_i64_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| {
                    r.as_ref()
                        .iter()
                        .map(|&v| BigRational::from_integer(BigInt::from(v)))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> &BigRational {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        &self.data[row * self.cols + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut BigRational {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        &mut self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[BigRational] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn into_rows(self) -> Vec<Vec<BigRational>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.data.chunks(self.cols).map(<[_]>::to_vec).collect()
    }

    pub fn mul(&self, rhs: &RationalMatrix) -> Result<RationalMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = RationalMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(l, j);
                    if !b.is_zero() {
                        *out.get_mut(i, j) += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &RationalMatrix) -> Result<RationalMatrix> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "hstack of {} rows beside {} rows",
                self.rows, other.rows
            )));
        }
        let rows = (0..self.rows)
            .map(|i| self.row(i).iter().chain(other.row(i)).cloned().collect())
            .collect();
        Self::from_rows(rows).map(|mut m| {
            m.cols = self.cols + other.cols;
            m
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_range(&self, start: usize, end: usize) -> RationalMatrix {
        assert!(
            start <= end && end <= self.cols,
            "column range out of bounds"
        );
        let mut data = Vec::with_capacity(self.rows * (end - start));
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        RationalMatrix {
            rows: self.rows,
            cols: end - start,
            data,
        }
    }
}
