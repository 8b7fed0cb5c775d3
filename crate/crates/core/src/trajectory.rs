//! Candidate trajectory reconstruction from a disclosure trace.
//!
//! Between two consecutive disclosures the clusters whose sum went down lost
//! points and those whose sum went up gained them. Pairing losers with gainers
//! yields switch templates; chaining them over time gives candidate
//! trajectories, one binary column of length `kT` each. Stationary
//! trajectories (stacked identities) are appended and duplicates merged.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kmeans::DisclosureTrace;
use crate::matrix::{BinaryMatrix, IntMatrix};

/// `deltas[t] = sums[t+1] - sums[t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaSequence {
    pub deltas: Vec<IntMatrix>,
}

pub fn compute_deltas(trace: &DisclosureTrace) -> Result<DeltaSequence> {
    if trace.len() < 2 {
        return Err(Error::InsufficientTrace(trace.len()));
    }
    let deltas = trace
        .sums()
        .windows(2)
        .map(|w| w[1].checked_sub(&w[0]))
        .collect::<Result<_>>()?;
    Ok(DeltaSequence { deltas })
}

/// Clusters that gained or lost mass in one step, plus the column budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSets {
    pub gains: Vec<usize>,
    pub losses: Vec<usize>,
    pub budget: usize,
}

/// Classifies clusters by the sign of `delta[.][coord]`.
pub fn index_sets(delta: &IntMatrix, coord: usize) -> Result<IndexSets> {
    if coord >= delta.cols() {
        return Err(Error::Config(format!(
            "sign coordinate {coord} out of range for dimension {}",
            delta.cols()
        )));
    }
    let mut gains = Vec::new();
    let mut losses = Vec::new();
    for j in 0..delta.rows() {
        match delta.get(j, coord).signum() {
            1 => gains.push(j),
            -1 => losses.push(j),
            _ => {}
        }
    }
    let budget = gains.len().max(losses.len());
    Ok(IndexSets {
        gains,
        losses,
        budget,
    })
}

/// A `k × r` block with one 1 per column (or all zero for an empty set).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateBlock(pub BinaryMatrix);

impl TemplateBlock {
    pub fn matrix(&self) -> &BinaryMatrix {
        &self.0
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }
}

/// Fill-one rule: every index of `set` gets its own column (ascending), the
/// remaining `r - |set|` columns repeat indices drawn uniformly from `set`.
pub fn fill_one<R: Rng + ?Sized>(
    set: &[usize],
    r: usize,
    k: usize,
    rng: &mut R,
) -> Result<TemplateBlock> {
    if r < set.len() {
        return Err(Error::ContractViolation(format!(
            "budget {r} smaller than index set of size {}",
            set.len()
        )));
    }
    if let Some(&bad) = set.iter().find(|&&j| j >= k) {
        return Err(Error::ContractViolation(format!(
            "cluster index {bad} >= k={k}"
        )));
    }
    let mut block = BinaryMatrix::zeros(k, r);
    if set.is_empty() {
        return Ok(TemplateBlock(block));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for (col, &j) in sorted.iter().enumerate() {
        block.set(j, col, true);
    }
    for col in sorted.len()..r {
        let j = sorted[rng.gen_range(0..sorted.len())];
        block.set(j, col, true);
    }
    Ok(TemplateBlock(block))
}

fn check_pair(b: &TemplateBlock, d: &TemplateBlock) -> Result<()> {
    if b.0.rows() != d.0.rows() || b.0.cols() != d.0.cols() {
        return Err(Error::ShapeMismatch(format!(
            "template blocks {}x{} and {}x{} differ",
            b.0.rows(),
            b.0.cols(),
            d.0.rows(),
            d.0.cols()
        )));
    }
    Ok(())
}

/// `[B1; D1]`: where the switchers were at iteration 1 and where they went.
pub fn build_initial(b1: &TemplateBlock, d1: &TemplateBlock) -> Result<BinaryMatrix> {
    check_pair(b1, d1)?;
    b1.0.vstack(&d1.0)
}

/// Extends `w_prev` (covering `t` iterations) by one iteration:
///
/// ```text
/// [ w_prev      Rep_t(B) ]
/// [ w_prev_end  D        ]
/// ```
///
/// Existing trajectories stay where they were last seen; the `r_t` new ones
/// sat in their losing cluster for all `t` prior iterations.
pub fn recursive_step(
    w_prev: &BinaryMatrix,
    b: &TemplateBlock,
    d: &TemplateBlock,
    t: usize,
) -> Result<BinaryMatrix> {
    check_pair(b, d)?;
    let k = b.0.rows();
    if w_prev.rows() != t * k {
        return Err(Error::ShapeMismatch(format!(
            "previous record has {} rows, expected t*k = {}",
            w_prev.rows(),
            t * k
        )));
    }
    let prev_end = w_prev.row_range(w_prev.rows() - k, w_prev.rows());
    let left = w_prev.vstack(&prev_end)?;
    let mut rep = b.0.clone();
    for _ in 1..t {
        rep = rep.vstack(&b.0)?;
    }
    let right = rep.vstack(&d.0)?;
    left.hstack(&right)
}

/// `T` stacked `k × k` identities.
pub fn stationary_blocks(k: usize, t: usize) -> BinaryMatrix {
    let id = BinaryMatrix::identity(k);
    let mut out = id.clone();
    for _ in 1..t {
        out = out.vstack(&id).expect("identity blocks share width");
    }
    out
}

pub fn dedup_columns(m: &BinaryMatrix) -> BinaryMatrix {
    m.dedup_columns()
}

/// The attack's candidate trajectory matrix `W*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationRecordMatrix {
    pub w_star: BinaryMatrix,
    pub k: usize,
    pub iterations: usize,
}

impl IterationRecordMatrix {
    pub fn n_star(&self) -> usize {
        self.w_star.cols()
    }
}

/// Builds `W*` reading gain/loss signs from coordinate 0.
pub fn build_record<R: Rng + ?Sized>(
    trace: &DisclosureTrace,
    rng: &mut R,
) -> Result<IterationRecordMatrix> {
    build_record_with_coord(trace, 0, rng)
}

pub fn build_record_with_coord<R: Rng + ?Sized>(
    trace: &DisclosureTrace,
    coord: usize,
    rng: &mut R,
) -> Result<IterationRecordMatrix> {
    let k = trace.k();
    let deltas = compute_deltas(trace)?;
    let sets = deltas
        .deltas
        .iter()
        .map(|d| index_sets(d, coord))
        .collect::<Result<Vec<_>>>()?;

    let mut w: Option<BinaryMatrix> = None;
    for (step, s) in sets.iter().enumerate() {
        let b = fill_one(&s.losses, s.budget, k, rng)?;
        let d = fill_one(&s.gains, s.budget, k, rng)?;
        w = Some(match w {
            None => build_initial(&b, &d)?,
            Some(prev) => recursive_step(&prev, &b, &d, step + 1)?,
        });
    }
    let switched = w.expect("at least one delta");
    let full = switched.hstack(&stationary_blocks(k, trace.len()))?;
    Ok(IterationRecordMatrix {
        w_star: full.dedup_columns(),
        k,
        iterations: trace.len(),
    })
}

/// Keeps the last `min(l, T)` disclosures.
pub fn truncate_trace(trace: &DisclosureTrace, l: usize) -> Result<DisclosureTrace> {
    if l < 2 {
        return Err(Error::Config(format!(
            "truncation length must be at least 2, got {l}"
        )));
    }
    Ok(trace.suffix(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn col(bits: &[u8]) -> BinaryMatrix {
        BinaryMatrix::from_columns(bits.len(), &[bits]).unwrap()
    }

    fn scalar_trace(k: usize, steps: &[&[i128]]) -> DisclosureTrace {
        let sums = steps.iter().map(|s| IntMatrix::column_vector(s)).collect();
        DisclosureTrace::new(k, 1, sums).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn deltas() {
        let tr = scalar_trace(2, &[&[1, 21], &[1, 21]]);
        let ds = compute_deltas(&tr).unwrap();
        assert_eq!(ds.deltas, vec![IntMatrix::column_vector(&[0, 0])]);

        let tr = scalar_trace(2, &[&[3, 9], &[5, 7]]);
        assert_eq!(
            compute_deltas(&tr).unwrap().deltas,
            vec![IntMatrix::column_vector(&[2, -2])]
        );

        let tr = scalar_trace(2, &[&[3, 9]]);
        assert!(matches!(
            compute_deltas(&tr),
            Err(Error::InsufficientTrace(1))
        ));
    }

    #[test]
    fn sign_classification() {
        let s = index_sets(&IntMatrix::column_vector(&[2, -2]), 0).unwrap();
        assert_eq!((s.gains, s.losses, s.budget), (vec![0], vec![1], 1));

        let s = index_sets(&IntMatrix::column_vector(&[0, 0, 0]), 0).unwrap();
        assert!(s.gains.is_empty() && s.losses.is_empty());
        assert_eq!(s.budget, 0);

        let s = index_sets(&IntMatrix::column_vector(&[3, -1, -2]), 0).unwrap();
        assert_eq!((s.gains, s.losses, s.budget), (vec![0], vec![1, 2], 2));

        let two_d = IntMatrix::from_rows(&[[1i128, -4], [-1, 4]]).unwrap();
        let s = index_sets(&two_d, 1).unwrap();
        assert_eq!((s.gains, s.losses), (vec![1], vec![0]));
        assert!(index_sets(&two_d, 2).is_err());
    }

    #[test]
    fn fill_one_deterministic_prefix() {
        let b = fill_one(&[4, 2], 2, 5, &mut rng()).unwrap();
        let expected =
            BinaryMatrix::from_columns(5, &[[0u8, 0, 1, 0, 0], [0, 0, 0, 0, 1]]).unwrap();
        assert_eq!(b.0, expected);
    }

    #[test]
    fn fill_one_empty_set_is_zero() {
        assert_eq!(
            fill_one(&[], 0, 3, &mut rng()).unwrap().0,
            BinaryMatrix::zeros(3, 0)
        );
        assert_eq!(
            fill_one(&[], 2, 3, &mut rng()).unwrap().0,
            BinaryMatrix::zeros(3, 2)
        );
    }

    #[test]
    fn fill_one_single_index_repeats() {
        let b = fill_one(&[1], 3, 3, &mut rng()).unwrap();
        for c in b.0.columns() {
            assert_eq!(c, &[0, 1, 0]);
        }
    }

    #[test]
    fn fill_one_completion_covers_set() {
        let b = fill_one(&[0, 3], 6, 4, &mut rng()).unwrap();
        assert!(b.0.is_one_hot_per_block(4));
        assert!(b.0.get(0, 0) && b.0.get(3, 1));
        for c in b.0.columns() {
            assert!(c[1] == 0 && c[2] == 0);
        }
        assert!(matches!(
            fill_one(&[0, 1], 1, 2, &mut rng()),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn initial_stack() {
        let b = TemplateBlock(col(&[0, 1]));
        let d = TemplateBlock(col(&[1, 0]));
        assert_eq!(build_initial(&b, &d).unwrap(), col(&[0, 1, 1, 0]));

        let z = TemplateBlock(BinaryMatrix::zeros(2, 0));
        let w = build_initial(&z, &z).unwrap();
        assert_eq!((w.rows(), w.cols()), (4, 0));

        let two = TemplateBlock(BinaryMatrix::from_columns(2, &[[1u8, 0], [0, 1]]).unwrap());
        assert_eq!(build_initial(&two, &two).unwrap().cols(), 2);
        assert!(build_initial(&two, &b).is_err());
    }

    #[test]
    fn recursive_block_formula() {
        let w1 = col(&[0, 1, 1, 0]);
        let b = TemplateBlock(col(&[1, 0]));
        let d = TemplateBlock(col(&[0, 1]));
        let w2 = recursive_step(&w1, &b, &d, 2).unwrap();
        let expected =
            BinaryMatrix::from_columns(6, &[[0u8, 1, 1, 0, 1, 0], [1, 0, 1, 0, 0, 1]]).unwrap();
        assert_eq!(w2, expected);
        assert_eq!(w2.rows(), 6);
    }

    #[test]
    fn recursive_step_without_switches_extends_existing() {
        let w1 = col(&[0, 1, 1, 0]);
        let z = TemplateBlock(BinaryMatrix::zeros(2, 0));
        let w2 = recursive_step(&w1, &z, &z, 2).unwrap();
        assert_eq!(w2, col(&[0, 1, 1, 0, 1, 0]));
        assert!(recursive_step(&w1, &z, &z, 3).is_err());
    }

    #[test]
    fn identity_stack() {
        let e = stationary_blocks(2, 3);
        let expected =
            BinaryMatrix::from_rows(&[[1u8, 0], [0, 1], [1, 0], [0, 1], [1, 0], [0, 1]]).unwrap();
        assert_eq!(e, expected);
        assert_eq!(stationary_blocks(3, 1), BinaryMatrix::identity(3));
        for (j, c) in stationary_blocks(3, 4).columns().enumerate() {
            assert_eq!(c.iter().filter(|&&v| v == 1).count(), 4);
            assert!(c.chunks(3).all(|b| b[j] == 1));
        }
    }

    #[test]
    fn dedup() {
        let a = [1u8, 0];
        let b = [0u8, 1];
        let m = BinaryMatrix::from_columns(2, &[a, b, a]).unwrap();
        assert_eq!(
            dedup_columns(&m),
            BinaryMatrix::from_columns(2, &[a, b]).unwrap()
        );
        let distinct = BinaryMatrix::from_columns(2, &[b, a]).unwrap();
        assert_eq!(dedup_columns(&distinct), distinct);
        let e = stationary_blocks(2, 2);
        assert_eq!(dedup_columns(&e.hstack(&e).unwrap()), e);
    }

    #[test]
    fn converged_trace_collapses_to_identity_stack() {
        let tr = scalar_trace(3, &[&[4, 5, 6], &[4, 5, 6], &[4, 5, 6]]);
        let rec = build_record(&tr, &mut rng()).unwrap();
        assert_eq!(rec.w_star, stationary_blocks(3, 3));
    }

    #[test]
    fn single_switch_hand_run() {
        // Points 1 | 3, 2 | 7 | 9 across k=4 clusters; the point worth 2 moves
        // from cluster 1 to cluster 2 after iteration 1.
        let tr = scalar_trace(4, &[&[1, 5, 7, 9], &[1, 3, 9, 9], &[1, 3, 9, 9]]);
        let rec = build_record(&tr, &mut rng()).unwrap();
        assert_eq!(rec.w_star.rows(), 12);
        assert_eq!(rec.n_star(), 5);
        let switch = [0u8, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0];
        assert_eq!(rec.w_star.column(0), &switch);
        let stationary = stationary_blocks(4, 3);
        for c in stationary.columns() {
            assert!(rec.w_star.columns().any(|w| w == c));
        }
    }

    #[test]
    fn truncation() {
        let steps: Vec<Vec<i128>> = (0..10).map(|t| vec![t, 100 - t]).collect();
        let refs: Vec<&[i128]> = steps.iter().map(Vec::as_slice).collect();
        let tr = scalar_trace(2, &refs);
        let t6 = truncate_trace(&tr, 6).unwrap();
        assert_eq!(t6.len(), 6);
        assert_eq!(t6.sums()[0], IntMatrix::column_vector(&[4, 96]));
        assert_eq!(truncate_trace(&tr, 12).unwrap(), tr);
        assert!(truncate_trace(&tr, 1).is_err());
    }
}
