//! Ground-truth judge for attack outcomes.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kmeans::GroundTruthAssignments;
use crate::matrix::{BinaryMatrix, IntMatrix};
use crate::rref::LeakageCertificate;
use crate::trajectory::IterationRecordMatrix;

/// The deduplicated true system `C = W*_true · Y_true`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrueSystem {
    pub w_star_true: BinaryMatrix,
    /// Row `j` is the sum of all samples following trajectory `j`.
    pub y_true: IntMatrix,
    pub multiplicity: Vec<usize>,
    /// Sample indices per trajectory, ascending.
    pub members: Vec<Vec<usize>>,
}

impl TrueSystem {
    pub fn m(&self) -> usize {
        self.w_star_true.cols()
    }
}

pub fn true_system(ground: &GroundTruthAssignments, dataset: &Dataset) -> Result<TrueSystem> {
    let w = &ground.w_true;
    if w.cols() != dataset.n() {
        return Err(Error::ShapeMismatch(format!(
            "ground truth covers {} samples, dataset has {}",
            w.cols(),
            dataset.n()
        )));
    }
    let mut index: HashMap<&[u8], usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut w_star_true = BinaryMatrix::empty(w.rows());
    for (i, c) in w.columns().enumerate() {
        let slot = *index.entry(c).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        if slot == w_star_true.cols() {
            w_star_true.push_column(c)?;
        }
        members[slot].push(i);
    }

    let d = dataset.d();
    let mut y_true = IntMatrix::zeros(members.len(), d);
    for (j, group) in members.iter().enumerate() {
        let row = y_true.row_mut(j);
        for &i in group {
            for (acc, &v) in row.iter_mut().zip(dataset.row(i)) {
                *acc += i128::from(v);
            }
        }
    }
    Ok(TrueSystem {
        w_star_true,
        y_true,
        multiplicity: members.iter().map(Vec::len).collect(),
        members,
    })
}

/// Which exact matches count towards a successful trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Any exact match, single sample or aggregate.
    #[default]
    AnyExact,
    /// Only matches that pin down one individual sample.
    StrictSingleton,
    /// At least one individual sample recovered and no certified value wrong.
    CleanSingleton,
}

impl MatchMode {
    pub const ALL: [MatchMode; 3] = [
        MatchMode::AnyExact,
        MatchMode::StrictSingleton,
        MatchMode::CleanSingleton,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MatchMode::AnyExact => "any_exact",
            MatchMode::StrictSingleton => "strict_singleton",
            MatchMode::CleanSingleton => "clean_singleton",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryKind {
    Input,
    Aggregate,
}

/// A certified value that matched a true trajectory exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovery {
    /// Column of the attack's `W*`.
    pub variable: usize,
    /// Column of the true `W*`.
    pub trajectory: usize,
    pub samples: Vec<usize>,
    pub value: Vec<BigRational>,
    pub kind: RecoveryKind,
    /// The trajectory never changes cluster.
    pub stationary: bool,
}

/// Outcome for one certified variable, in certificate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Input,
    Aggregate,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialReport {
    pub success: bool,
    pub certified: usize,
    pub verdicts: Vec<Verdict>,
    pub exact_input_recoveries: usize,
    pub aggregate_recoveries: usize,
    pub mismatches: usize,
    pub iterations: usize,
    /// One flag per matched recovery: `true` when the L2 error is exactly 0.
    pub l2_zero: Vec<bool>,
    pub recoveries: Vec<Recovery>,
}

impl TrialReport {
    /// Whether this trial counts as a success under `mode`.
    pub fn passes(&self, mode: MatchMode) -> bool {
        let any = self.exact_input_recoveries + self.aggregate_recoveries > 0;
        match mode {
            MatchMode::AnyExact => any,
            MatchMode::StrictSingleton => self.exact_input_recoveries > 0,
            MatchMode::CleanSingleton => self.exact_input_recoveries > 0 && self.mismatches == 0,
        }
    }
}

/// Squared L2 distance between a recovered value and the sum of `samples`
/// taken straight from the dataset.
pub fn l2_error_sq(value: &[BigRational], samples: &[usize], dataset: &Dataset) -> BigRational {
    let mut target = vec![0i128; dataset.d()];
    for &i in samples {
        for (t, &x) in target.iter_mut().zip(dataset.row(i)) {
            *t += i128::from(x);
        }
    }
    value
        .iter()
        .zip(target)
        .map(|(v, t)| {
            let e = v - BigRational::from_integer(t.into());
            &e * &e
        })
        .fold(BigRational::zero(), |acc, e| acc + e)
}

/// Recomputes [`TrialReport::l2_zero`] against the raw dataset.
pub fn check_l2(report: &mut TrialReport, dataset: &Dataset) {
    report.l2_zero = report
        .recoveries
        .iter()
        .map(|r| {
            r.value.len() == dataset.d() && l2_error_sq(&r.value, &r.samples, dataset).is_zero()
        })
        .collect();
}

pub fn classify(
    cert: &LeakageCertificate,
    attack: &IterationRecordMatrix,
    truth: &TrueSystem,
    mode: MatchMode,
) -> Result<TrialReport> {
    if attack.w_star.rows() != truth.w_star_true.rows() {
        return Err(Error::ShapeMismatch(format!(
            "attack system has {} rows, true system {}",
            attack.w_star.rows(),
            truth.w_star_true.rows()
        )));
    }
    let index: HashMap<&[u8], usize> = truth
        .w_star_true
        .columns()
        .enumerate()
        .map(|(j, c)| (c, j))
        .collect();

    let mut recoveries = Vec::new();
    let mut verdicts = Vec::with_capacity(cert.determined.len());
    let mut mismatches = 0;
    for (var, value) in &cert.determined {
        if *var >= attack.w_star.cols() {
            return Err(Error::ContractViolation(format!(
                "certified variable {var} outside attack matrix with {} columns",
                attack.w_star.cols()
            )));
        }
        let matched = index
            .get(attack.w_star.column(*var))
            .copied()
            .filter(|&j| rational_row_eq(value, truth.y_true.row(j)));
        match matched {
            Some(j) => {
                verdicts.push(if truth.multiplicity[j] == 1 {
                    Verdict::Input
                } else {
                    Verdict::Aggregate
                });
                recoveries.push(Recovery {
                    variable: *var,
                    trajectory: j,
                    samples: truth.members[j].clone(),
                    value: value.clone(),
                    kind: if truth.multiplicity[j] == 1 {
                        RecoveryKind::Input
                    } else {
                        RecoveryKind::Aggregate
                    },
                    stationary: is_stationary(attack.w_star.column(*var), attack.k),
                })
            }
            None => {
                verdicts.push(Verdict::Mismatch);
                mismatches += 1;
            }
        }
    }

    let exact_input_recoveries = recoveries
        .iter()
        .filter(|r| r.kind == RecoveryKind::Input)
        .count();
    let aggregate_recoveries = recoveries.len() - exact_input_recoveries;
    let mut report = TrialReport {
        success: false,
        certified: cert.determined.len(),
        verdicts,
        exact_input_recoveries,
        aggregate_recoveries,
        mismatches,
        iterations: attack.iterations,
        l2_zero: vec![true; recoveries.len()],
        recoveries,
    };
    report.success = report.passes(mode);
    Ok(report)
}

fn is_stationary(column: &[u8], k: usize) -> bool {
    let first = &column[..k.min(column.len())];
    column.chunks(k).all(|b| b == first)
}

fn rational_row_eq(value: &[BigRational], expected: &[i128]) -> bool {
    value.len() == expected.len()
        && value
            .iter()
            .zip(expected)
            .all(|(v, &e)| *v == BigRational::from_integer(BigInt::from(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::{run_from, Centroid, Centroids, ClusterConfig};
    use crate::rref::{leakage_rows, rref_augmented};
    use crate::trajectory::{build_record, stationary_blocks};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    fn record(w: BinaryMatrix, k: usize) -> IterationRecordMatrix {
        let iterations = w.rows() / k;
        IterationRecordMatrix {
            w_star: w,
            k,
            iterations,
        }
    }

    #[test]
    fn stationary_singletons() {
        let ds = Dataset::from_scalars(&[5, 9, 40]).unwrap();
        let gt =
            GroundTruthAssignments::from_history(3, 3, &[vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        assert_eq!(ts.m(), 3);
        assert_eq!(ts.multiplicity, vec![1, 1, 1]);
        assert_eq!(ts.y_true, IntMatrix::column_vector(&[5, 9, 40]));
    }

    #[test]
    fn co_assigned_duplicates_merge() {
        let ds = Dataset::from_scalars(&[7, 7, 30]).unwrap();
        let gt =
            GroundTruthAssignments::from_history(2, 3, &[vec![0, 0, 1], vec![0, 0, 1]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        assert_eq!(ts.multiplicity, vec![2, 1]);
        assert_eq!(ts.y_true.row(0), &[14]);
        assert_eq!(ts.members[0], vec![0, 1]);
    }

    #[test]
    fn true_system_reproduces_trace() {
        let ds = Dataset::from_rows(&[[0i64, 1], [2, 5], [9, 9], [11, 3], [20, 20]]).unwrap();
        let gt =
            GroundTruthAssignments::from_history(2, 5, &[vec![0, 0, 1, 1, 1], vec![0, 0, 0, 1, 1]])
                .unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        let lhs = ts.w_star_true.mul_int(&ts.y_true).unwrap();
        assert_eq!(lhs, gt.w_true.mul_int(&ds.to_int_matrix()).unwrap());
        assert_eq!(ts.multiplicity.iter().sum::<usize>(), 5);
    }

    #[test]
    fn five_point_toy_matches_hand_derivation() {
        // Points 1 | 3, 2 | 7 | 9; the 2 drifts from cluster 1 to cluster 2.
        let ds = Dataset::from_scalars(&[1, 3, 2, 7, 9]).unwrap();
        let gt = GroundTruthAssignments::from_history(
            4,
            5,
            &[
                vec![0, 1, 1, 2, 3],
                vec![0, 1, 2, 2, 3],
                vec![0, 1, 2, 2, 3],
            ],
        )
        .unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        assert_eq!(ts.m(), 5);
        let trace = crate::kmeans::DisclosureTrace::new(
            4,
            1,
            (0..3)
                .map(|t| {
                    gt.w_true
                        .row_range(4 * t, 4 * t + 4)
                        .mul_int(&ds.to_int_matrix())
                        .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let rec = build_record(&trace, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut attack: Vec<&[u8]> = rec.w_star.columns().collect();
        let mut truth: Vec<&[u8]> = ts.w_star_true.columns().collect();
        attack.sort();
        truth.sort();
        assert_eq!(attack, truth);
    }

    #[test]
    fn empty_certificate_fails() {
        let ds = Dataset::from_scalars(&[1, 2]).unwrap();
        let gt = GroundTruthAssignments::from_history(2, 2, &[vec![0, 1], vec![0, 1]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        let rep = classify(
            &LeakageCertificate::default(),
            &record(stationary_blocks(2, 2), 2),
            &ts,
            MatchMode::AnyExact,
        )
        .unwrap();
        assert!(!rep.success);
        assert_eq!(
            (
                rep.exact_input_recoveries,
                rep.aggregate_recoveries,
                rep.mismatches
            ),
            (0, 0, 0)
        );
    }

    #[test]
    fn singleton_clusters_recover_inputs() {
        let ds = Dataset::from_scalars(&[3, 20, 41]).unwrap();
        let init = Centroids::new(
            [3, 20, 41]
                .iter()
                .map(|&v| Centroid::from_sample(&[v]))
                .collect(),
        )
        .unwrap();
        let run = run_from(&ds, &ClusterConfig::new(3, 10, 0), init).unwrap();
        let ts = true_system(&run.truth, &ds).unwrap();
        let rec = build_record(&run.trace, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let cert = leakage_rows(&rref_augmented(&rec.w_star, &run.trace.stacked()).unwrap());
        let rep = classify(&cert, &rec, &ts, MatchMode::StrictSingleton).unwrap();
        assert!(rep.success);
        assert_eq!(rep.exact_input_recoveries, 3);
        assert!(rep.l2_zero.iter().all(|&z| z));
        let values: Vec<i128> = rep
            .recoveries
            .iter()
            .map(|r| ds.row(r.samples[0])[0].into())
            .collect();
        assert_eq!(values, vec![3, 20, 41]);
    }

    #[test]
    fn wrong_value_is_mismatch() {
        let ds = Dataset::from_scalars(&[1, 2]).unwrap();
        let gt = GroundTruthAssignments::from_history(2, 2, &[vec![0, 1], vec![0, 1]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        let cert = LeakageCertificate {
            determined: vec![(0, vec![q(99)])],
        };
        let rep = classify(
            &cert,
            &record(stationary_blocks(2, 2), 2),
            &ts,
            MatchMode::AnyExact,
        )
        .unwrap();
        assert_eq!(rep.mismatches, 1);
        assert!(!rep.success);
    }

    #[test]
    fn aggregates_count_only_in_default_mode() {
        let ds = Dataset::from_scalars(&[4, 6, 50]).unwrap();
        let gt =
            GroundTruthAssignments::from_history(2, 3, &[vec![0, 0, 1], vec![0, 0, 1]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        let cert = LeakageCertificate {
            determined: vec![(0, vec![q(10)])],
        };
        let attack = record(stationary_blocks(2, 2), 2);
        let loose = classify(&cert, &attack, &ts, MatchMode::AnyExact).unwrap();
        assert!(loose.success);
        assert_eq!(loose.aggregate_recoveries, 1);
        let strict = classify(&cert, &attack, &ts, MatchMode::StrictSingleton).unwrap();
        assert!(!strict.success);
    }

    #[test]
    fn clean_mode_rejects_any_wrong_certificate() {
        let ds = Dataset::from_scalars(&[4, 50]).unwrap();
        let gt = GroundTruthAssignments::from_history(2, 2, &[vec![0, 1], vec![0, 1]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        let attack = record(stationary_blocks(2, 2), 2);
        let one_right = LeakageCertificate {
            determined: vec![(0, vec![q(4)])],
        };
        assert!(
            classify(&one_right, &attack, &ts, MatchMode::CleanSingleton)
                .unwrap()
                .success
        );
        let one_wrong = LeakageCertificate {
            determined: vec![(0, vec![q(4)]), (1, vec![q(51)])],
        };
        let rep = classify(&one_wrong, &attack, &ts, MatchMode::CleanSingleton).unwrap();
        assert!(!rep.success);
        assert!(rep.passes(MatchMode::StrictSingleton));
        assert_eq!(rep.verdicts, vec![Verdict::Input, Verdict::Mismatch]);
    }

    #[test]
    fn column_order_does_not_matter() {
        let ds = Dataset::from_scalars(&[4, 50]).unwrap();
        let gt = GroundTruthAssignments::from_history(2, 2, &[vec![0, 1], vec![0, 1]]).unwrap();
        let ts = true_system(&gt, &ds).unwrap();
        let e = stationary_blocks(2, 2);
        let swapped = BinaryMatrix::from_columns(4, &[e.column(1), e.column(0)]).unwrap();
        let a = classify(
            &LeakageCertificate {
                determined: vec![(0, vec![q(4)])],
            },
            &record(e, 2),
            &ts,
            MatchMode::AnyExact,
        )
        .unwrap();
        let b = classify(
            &LeakageCertificate {
                determined: vec![(1, vec![q(4)])],
            },
            &record(swapped, 2),
            &ts,
            MatchMode::AnyExact,
        )
        .unwrap();
        assert_eq!(
            (a.success, a.exact_input_recoveries, a.mismatches),
            (b.success, b.exact_input_recoveries, b.mismatches)
        );
    }
}
