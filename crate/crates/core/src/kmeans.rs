//! Lloyd's k-means over integer samples with exact rational centroids.
//!
//! A centroid is held as an integer coordinate sum over a positive count, so
//! the mean is exact without ever materialising a fraction. Squared distances
//! are compared by cross-multiplying denominators.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, IntMatrix, RationalMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// `k` distinct sample rows drawn uniformly without replacement.
    #[default]
    Forgy,
    /// D²-weighted seeding over sample rows (k-means++).
    KmeansPlusPlus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyClusterPolicy {
    #[default]
    RetainPreviousCentroid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub init: InitMethod,
    pub empty_cluster_policy: EmptyClusterPolicy,
}

impl ClusterConfig {
    pub fn new(k: usize, max_iter: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter,
            seed,
            init: InitMethod::default(),
            empty_cluster_policy: EmptyClusterPolicy::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(Error::Config(format!(
                "k must satisfy 1 <= k <= n={n}, got {}",
                self.k
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// An exact centroid `sum / count` with `count >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Centroid {
    sum: Vec<i128>,
    count: u64,
}

impl Centroid {
    pub fn new(sum: Vec<i128>, count: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::ContractViolation(
                "centroid count must be positive".into(),
            ));
        }
        Ok(Self { sum, count })
    }

    pub fn from_sample(row: &[i64]) -> Self {
        Self {
            sum: row.iter().map(|&v| i128::from(v)).collect(),
            count: 1,
        }
    }

    pub fn value(&self) -> Vec<BigRational> {
        let den = BigInt::from(self.count);
        self.sum
            .iter()
            .map(|&s| BigRational::new(BigInt::from(s), den.clone()))
            .collect()
    }

    /// `count² · ‖x − sum/count‖² = ‖count·x − sum‖²`, if it fits in `i128`.
    fn scaled_sq_dist(&self, x: &[i64]) -> Option<i128> {
        let m = i128::from(self.count);
        let mut acc: i128 = 0;
        for (&xi, &si) in x.iter().zip(&self.sum) {
            let diff = m.checked_mul(i128::from(xi))?.checked_sub(si)?;
            acc = acc.checked_add(diff.checked_mul(diff)?)?;
        }
        Some(acc)
    }

    fn sq_dist_exact(&self, x: &[i64]) -> BigRational {
        let m = BigInt::from(self.count);
        let mut acc = BigInt::zero();
        for (&xi, &si) in x.iter().zip(&self.sum) {
            let diff = &m * BigInt::from(xi) - BigInt::from(si);
            acc += &diff * &diff;
        }
        BigRational::new(acc, &m * &m)
    }
}

/// Compares the exact squared distances from `x` to `a` and to `b`.
fn cmp_dist(x: &[i64], a: &Centroid, b: &Centroid) -> Ordering {
    let fast = (|| {
        let na = a.scaled_sq_dist(x)?;
        let nb = b.scaled_sq_dist(x)?;
        let ma = i128::from(a.count);
        let mb = i128::from(b.count);
        let lhs = na.checked_mul(mb.checked_mul(mb)?)?;
        let rhs = nb.checked_mul(ma.checked_mul(ma)?)?;
        Some(lhs.cmp(&rhs))
    })();
    fast.unwrap_or_else(|| a.sq_dist_exact(x).cmp(&b.sq_dist_exact(x)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Centroids(Vec<Centroid>);

impl Centroids {
    pub fn new(centroids: Vec<Centroid>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::Config("at least one centroid is required".into()));
        }
        Ok(Self(centroids))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Centroid] {
        &self.0
    }

    pub fn to_rational_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_rows(self.0.iter().map(Centroid::value).collect())
            .expect("centroids share one dimension")
    }
}

pub fn init_centroids<R: Rng + ?Sized>(
    dataset: &Dataset,
    config: &ClusterConfig,
    rng: &mut R,
) -> Result<Centroids> {
    config.validate(dataset.n())?;
    match config.init {
        InitMethod::Forgy => {
            let picks = rand::seq::index::sample(rng, dataset.n(), config.k);
            Centroids::new(
                picks
                    .iter()
                    .map(|i| Centroid::from_sample(dataset.row(i)))
                    .collect(),
            )
        }
        InitMethod::KmeansPlusPlus => {
            let n = dataset.n();
            let mut picks = vec![rng.gen_range(0..n)];
            // Squared distance from each sample to its nearest pick; exact integers.
            let sq = |a: &[i64], b: &[i64]| -> u128 {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let diff = i128::from(x) - i128::from(y);
                        diff.unsigned_abs().pow(2)
                    })
                    .sum()
            };
            let mut nearest: Vec<u128> = dataset
                .rows()
                .map(|x| sq(x, dataset.row(picks[0])))
                .collect();
            while picks.len() < config.k {
                let total: u128 = nearest.iter().sum();
                let next = if total == 0 {
                    // Every remaining sample coincides with a pick; fall back to an unused row.
                    let unused: Vec<usize> = (0..n).filter(|i| !picks.contains(i)).collect();
                    unused[rng.gen_range(0..unused.len())]
                } else {
                    let mut target = rng.gen_range(0..total);
                    let mut chosen = n - 1;
                    for (i, &w) in nearest.iter().enumerate() {
                        if target < w {
                            chosen = i;
                            break;
                        }
                        target -= w;
                    }
                    chosen
                };
                picks.push(next);
                for (i, x) in dataset.rows().enumerate() {
                    nearest[i] = nearest[i].min(sq(x, dataset.row(next)));
                }
            }
            Centroids::new(
                picks
                    .into_iter()
                    .map(|i| Centroid::from_sample(dataset.row(i)))
                    .collect(),
            )
        }
    }
}

/// Nearest-centroid assignment; ties go to the lowest cluster index.
pub fn assign(dataset: &Dataset, centroids: &Centroids) -> Vec<usize> {
    dataset
        .rows()
        .map(|x| {
            let cs = centroids.as_slice();
            let mut best = 0;
            for j in 1..cs.len() {
                if cmp_dist(x, &cs[j], &cs[best]) == Ordering::Less {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn cluster_sums(dataset: &Dataset, assignments: &[usize], k: usize) -> IntMatrix {
    let mut sums = IntMatrix::zeros(k, dataset.d());
    for (x, &a) in dataset.rows().zip(assignments) {
        for (s, &v) in sums.row_mut(a).iter_mut().zip(x) {
            *s += i128::from(v);
        }
    }
    sums
}

fn cluster_counts(assignments: &[usize], k: usize) -> Vec<u64> {
    let mut counts = vec![0u64; k];
    for &a in assignments {
        counts[a] += 1;
    }
    counts
}

/// Per-iteration cluster sums as seen by the aggregator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisclosureTrace {
    sums: Vec<IntMatrix>,
    k: usize,
    d: usize,
}

impl DisclosureTrace {
    pub fn new(k: usize, d: usize, sums: Vec<IntMatrix>) -> Result<Self> {
        for (t, s) in sums.iter().enumerate() {
            if s.rows() != k || s.cols() != d {
                return Err(Error::ShapeMismatch(format!(
                    "iteration {t} sums are {}x{}, expected {k}x{d}",
                    s.rows(),
                    s.cols()
                )));
            }
        }
        Ok(Self { sums, k, d })
    }

    /// Builds a trace from disclosed centroids and cluster cardinalities.
    /// Each sum is `centroid × count` and must come out integral.
    pub fn from_centroids(
        k: usize,
        d: usize,
        iterations: &[(RationalMatrix, Vec<u64>)],
    ) -> Result<Self> {
        let mut sums = Vec::with_capacity(iterations.len());
        for (t, (centroids, counts)) in iterations.iter().enumerate() {
            if centroids.rows() != k || centroids.cols() != d || counts.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "iteration {t}: centroids {}x{} with {} counts, expected {k}x{d}",
                    centroids.rows(),
                    centroids.cols(),
                    counts.len()
                )));
            }
            let mut s = IntMatrix::zeros(k, d);
            for (j, &count) in counts.iter().enumerate() {
                for c in 0..d {
                    let v = centroids.get(j, c) * BigRational::from_integer(BigInt::from(count));
                    if !v.is_integer() {
                        return Err(Error::Consistency(format!(
                            "iteration {t}, cluster {j}: centroid times count is not an integer"
                        )));
                    }
                    s.row_mut(j)[c] = i128::try_from(v.to_integer()).map_err(|_| {
                        Error::Consistency(format!("iteration {t}, cluster {j}: sum out of range"))
                    })?;
                }
            }
            sums.push(s);
        }
        Self::new(k, d, sums)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of disclosed iterations.
    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn sums(&self) -> &[IntMatrix] {
        &self.sums
    }

    /// All iterations stacked into a `kT × d` matrix.
    pub fn stacked(&self) -> IntMatrix {
        if self.sums.is_empty() {
            return IntMatrix::zeros(0, self.d);
        }
        IntMatrix::vstack_all(&self.sums).expect("trace blocks share shape")
    }

    /// The last `len` iterations.
    pub fn suffix(&self, len: usize) -> DisclosureTrace {
        let start = self.sums.len().saturating_sub(len);
        DisclosureTrace {
            sums: self.sums[start..].to_vec(),
            k: self.k,
            d: self.d,
        }
    }
}

/// The simulator's private record of who was where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthAssignments {
    /// `kT × n`, one-hot in each `k`-row block.
    pub w_true: BinaryMatrix,
    pub per_iter_counts: Vec<Vec<u64>>,
    k: usize,
}

impl GroundTruthAssignments {
    pub fn from_history(k: usize, n: usize, history: &[Vec<usize>]) -> Result<Self> {
        let t = history.len();
        let mut w_true = BinaryMatrix::zeros(k * t, n);
        let mut per_iter_counts = Vec::with_capacity(t);
        for (it, assignment) in history.iter().enumerate() {
            if assignment.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "iteration {it} assigns {} points, expected {n}",
                    assignment.len()
                )));
            }
            for (i, &a) in assignment.iter().enumerate() {
                if a >= k {
                    return Err(Error::ContractViolation(format!(
                        "cluster index {a} >= k={k}"
                    )));
                }
                w_true.set(it * k + a, i, true);
            }
            per_iter_counts.push(cluster_counts(assignment, k));
        }
        Ok(Self {
            w_true,
            per_iter_counts,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn iterations(&self) -> usize {
        self.per_iter_counts.len()
    }

    /// Ground truth restricted to the last `len` iterations.
    pub fn suffix(&self, len: usize) -> GroundTruthAssignments {
        let t = self.iterations();
        let start = t.saturating_sub(len);
        GroundTruthAssignments {
            w_true: self.w_true.row_range(start * self.k, t * self.k),
            per_iter_counts: self.per_iter_counts[start..].to_vec(),
            k: self.k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub trace: DisclosureTrace,
    pub truth: GroundTruthAssignments,
    pub converged: bool,
    /// Assignment steps actually executed.
    pub iterations: usize,
    pub final_centroids: Centroids,
}

/// Runs Lloyd iterations seeded from `config.seed`.
pub fn run(dataset: &Dataset, config: &ClusterConfig) -> Result<ClusterRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centroids = init_centroids(dataset, config, &mut rng)?;
    run_from(dataset, config, centroids)
}

/// Runs Lloyd iterations from explicit initial centroids.
pub fn run_from(
    dataset: &Dataset,
    config: &ClusterConfig,
    mut centroids: Centroids,
) -> Result<ClusterRun> {
    config.validate(dataset.n())?;
    if centroids.k() != config.k {
        return Err(Error::Config(format!(
            "{} initial centroids for k={}",
            centroids.k(),
            config.k
        )));
    }
    let k = config.k;
    let mut sums = Vec::new();
    let mut history: Vec<Vec<usize>> = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_iter {
        let a = assign(dataset, &centroids);
        let s = cluster_sums(dataset, &a, k);
        let counts = cluster_counts(&a, k);
        let repeated = history.last() == Some(&a);
        sums.push(s.clone());
        history.push(a);
        if repeated {
            converged = true;
            break;
        }
        let next = centroids
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, prev)| match (counts[j], config.empty_cluster_policy) {
                (0, EmptyClusterPolicy::RetainPreviousCentroid) => prev.clone(),
                (c, _) => Centroid {
                    sum: s.row(j).to_vec(),
                    count: c,
                },
            })
            .collect();
        centroids = Centroids(next);
    }

    let iterations = history.len();
    Ok(ClusterRun {
        trace: DisclosureTrace::new(k, dataset.d(), sums)?,
        truth: GroundTruthAssignments::from_history(k, dataset.n(), &history)?,
        converged,
        iterations,
        final_centroids: centroids,
    })
}
