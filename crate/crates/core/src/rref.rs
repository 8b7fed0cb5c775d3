//! Exact Gauss-Jordan elimination over the rationals and the single-nonzero
//! row leakage test.
//!
//! The attack system `W* Y = C` is reduced as the augmented matrix `[W* | C]`
//! with pivots taken only from the `W*` block, so every row operation lands on
//! both sides. A reduced row whose `W*` part has a single nonzero pins that
//! variable to the value sitting in the same row of the reduced `C`.

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, IntMatrix, RationalMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrefResult {
    pub w_rref: RationalMatrix,
    pub c_rref: RationalMatrix,
    pub pivot_cols: Vec<usize>,
}

/// Reduces `rows` in place, choosing pivots among the first `pivot_limit`
/// columns. Returns the pivot columns in order.
fn reduce_in_place(rows: &mut [Vec<BigRational>], pivot_limit: usize) -> Vec<usize> {
    let nrows = rows.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..pivot_limit {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);

        let lead = rows[r][col].clone();
        if !lead.is_one() {
            let inv = lead.recip();
            for v in rows[r][col..].iter_mut().filter(|v| !v.is_zero()) {
                *v *= &inv;
            }
        }

        let (head, rest) = rows.split_at_mut(r);
        let (pivot_row, tail) = rest.split_first_mut().expect("pivot row exists");
        let nz: Vec<usize> = (col..pivot_row.len())
            .filter(|&j| !pivot_row[j].is_zero())
            .collect();
        for row in head.iter_mut().chain(tail.iter_mut()) {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for &j in &nz {
                let delta = &factor * &pivot_row[j];
                row[j] -= delta;
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

/// Canonical reduced row echelon form of `m`, with its pivot columns.
pub fn rref(m: &RationalMatrix) -> (RationalMatrix, Vec<usize>) {
    let cols = m.cols();
    let mut rows = m.clone().into_rows();
    let pivots = reduce_in_place(&mut rows, cols);
    let out = if rows.is_empty() {
        RationalMatrix::zeros(0, cols)
    } else {
        RationalMatrix::from_rows(rows).expect("row reduction preserves shape")
    };
    (out, pivots)
}

/// Reduces `[w | c]` using pivots from `w` only.
pub fn rref_augmented_rational(w: &RationalMatrix, c: &RationalMatrix) -> Result<RrefResult> {
    if w.rows() != c.rows() {
        return Err(Error::ShapeMismatch(format!(
            "system matrix has {} rows but right-hand side has {}",
            w.rows(),
            c.rows()
        )));
    }
    let n = w.cols();
    let aug = w.hstack(c)?;
    let mut rows = aug.into_rows();
    let pivot_cols = reduce_in_place(&mut rows, n);
    let total = n + c.cols();
    let reduced = if rows.is_empty() {
        RationalMatrix::zeros(0, total)
    } else {
        RationalMatrix::from_rows(rows)?
    };
    Ok(RrefResult {
        w_rref: reduced.column_range(0, n),
        c_rref: reduced.column_range(n, total),
        pivot_cols,
    })
}

pub fn rref_augmented(w: &BinaryMatrix, c: &IntMatrix) -> Result<RrefResult> {
    rref_augmented_rational(&w.to_rational(), &c.to_rational())
}

/// Variables pinned to a unique value by the reduced system.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeakageCertificate {
    pub determined: Vec<(usize, Vec<BigRational>)>,
}

impl LeakageCertificate {
    /// At least one variable is uniquely determined.
    pub fn is_leak(&self) -> bool {
        !self.determined.is_empty()
    }
}

pub fn leakage_rows(result: &RrefResult) -> LeakageCertificate {
    let w = &result.w_rref;
    let determined = (0..w.rows())
        .filter_map(|i| {
            let mut nz = w.row(i).iter().enumerate().filter(|(_, v)| !v.is_zero());
            match (nz.next(), nz.next()) {
                (Some((j, _)), None) => Some((j, result.c_rref.row(i).to_vec())),
                _ => None,
            }
        })
        .collect();
    LeakageCertificate { determined }
}

/// Solves `w · y = c` for square nonsingular `w` by forward elimination and
/// back substitution. Independent of [`rref`]; used as a cross-check.
pub fn solve_exact_square(w: &RationalMatrix, c: &RationalMatrix) -> Result<RationalMatrix> {
    let n = w.rows();
    if w.cols() != n || c.rows() != n {
        return Err(Error::ShapeMismatch(format!(
            "expected square system, got {}x{} with {} right-hand rows",
            w.rows(),
            w.cols(),
            c.rows()
        )));
    }
    let m = c.cols();
    let mut a = w.clone().into_rows();
    let mut b = c.clone().into_rows();

    for col in 0..n {
        let p = (col..n)
            .find(|&i| !a[i][col].is_zero())
            .ok_or(Error::Singular)?;
        a.swap(col, p);
        b.swap(col, p);
        for i in col + 1..n {
            if a[i][col].is_zero() {
                continue;
            }
            let f = &a[i][col] / &a[col][col];
            let (top, rest) = a.split_at_mut(i);
            for (x, p) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= &f * p;
            }
            let (top, rest) = b.split_at_mut(i);
            for (x, p) in rest[0].iter_mut().zip(&top[col]) {
                *x -= &f * p;
            }
        }
    }

    let mut y = vec![vec![BigRational::zero(); m]; n];
    for i in (0..n).rev() {
        for j in 0..m {
            let mut acc = b[i][j].clone();
            for l in i + 1..n {
                acc -= &a[i][l] * &y[l][j];
            }
            y[i][j] = acc / &a[i][i];
        }
    }
    if n == 0 {
        return Ok(RationalMatrix::zeros(0, m));
    }
    RationalMatrix::from_rows(y)
}
