//! Trial orchestration: dataset sourcing, seeded per-trial pipelines and
//! aggregation into success-rate tables.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io::{self, GrayImage, ImageSet};
use crate::kmeans::{self, ClusterConfig, InitMethod};
use crate::oracle::{self, MatchMode, RecoveryKind, TrialReport};
use crate::report::{AggregateReport, Bucket, CriterionTotals, Regime, Totals, TrialRecord};
use crate::rref::{leakage_rows, rref_augmented};
use crate::trajectory::{build_record_with_coord, truncate_trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    /// A fresh uniform integer dataset per trial.
    Synthetic {
        n: usize,
        d: usize,
        lo: i64,
        hi: i64,
    },
    Csv {
        path: PathBuf,
        scale: u64,
        skip_header: bool,
    },
    PgmDir {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub k: usize,
    pub max_iter: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub truncate_l: Option<usize>,
    /// Which recoveries make a trial count as passed.
    pub criterion: MatchMode,
    /// Coordinate whose delta signs drive the trajectory construction.
    pub sign_coord: usize,
    /// Attach per-trial records to the report.
    pub keep_trials: bool,
    #[serde(default)]
    pub init: InitMethod,
}

impl ExperimentConfig {
    pub fn synthetic(
        n: usize,
        d: usize,
        k: usize,
        max_iter: usize,
        trials: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            source: DatasetSource::Synthetic {
                n,
                d,
                lo: 0,
                hi: 50,
            },
            k,
            max_iter,
            trials,
            master_seed,
            truncate_l: None,
            criterion: MatchMode::default(),
            sign_coord: 0,
            keep_trials: false,
            init: InitMethod::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if let Some(l) = self.truncate_l {
            if l < 2 {
                return Err(Error::Config(format!(
                    "truncate_l must be at least 2, got {l}"
                )));
            }
        }
        if let DatasetSource::Synthetic { n, d, lo, hi } = self.source {
            if lo > hi {
                return Err(Error::Config(format!("empty value range [{lo}, {hi}]")));
            }
            if n == 0 || d == 0 {
                return Err(Error::Config("synthetic n and d must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.truncate_l.is_some() {
            Regime::Truncated
        } else {
            Regime::Full
        }
    }
}

pub fn gen_synthetic<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    lo: i64,
    hi: i64,
    rng: &mut R,
) -> Result<Dataset> {
    if lo > hi {
        return Err(Error::Config(format!("empty value range [{lo}, {hi}]")));
    }
    let values = (0..n * d).map(|_| rng.gen_range(lo..=hi)).collect();
    Dataset::new(n, d, values)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master_seed`.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(index as u64))
}

/// Independent sub-streams of one trial.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Data = 0,
    Cluster = 1,
    Attack = 2,
}

fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    splitmix64(trial_seed.wrapping_add(stream as u64))
}

/// Everything a single trial produced.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    /// Assignment steps the clustering actually ran.
    pub iterations: usize,
    pub converged: bool,
    pub report: Option<TrialReport>,
    /// Set when the pipeline could not produce a verdict (e.g. a one-step trace).
    pub error: Option<String>,
}

impl TrialOutcome {
    pub fn success(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.success)
    }

    pub fn passes(&self, mode: MatchMode) -> bool {
        self.report.as_ref().is_some_and(|r| r.passes(mode))
    }
}

/// Dataset used by trial `index`: fresh for synthetic sources, shared otherwise.
pub fn trial_dataset(
    config: &ExperimentConfig,
    shared: Option<&Dataset>,
    index: usize,
) -> Result<Dataset> {
    match (&config.source, shared) {
        (DatasetSource::Synthetic { n, d, lo, hi }, _) => {
            let seed = stream_seed(trial_seed(config.master_seed, index), Stream::Data);
            gen_synthetic(*n, *d, *lo, *hi, &mut ChaCha8Rng::seed_from_u64(seed))
        }
        (_, Some(ds)) => Ok(ds.clone()),
        (_, None) => Err(Error::Config(
            "file-backed source requires a loaded dataset".into(),
        )),
    }
}

/// Runs the full simulate → attack → judge pipeline for one trial.
pub fn run_trial(dataset: &Dataset, config: &ExperimentConfig, index: usize) -> TrialOutcome {
    let seed = trial_seed(config.master_seed, index);
    let cluster = ClusterConfig {
        init: config.init,
        ..ClusterConfig::new(
            config.k,
            config.max_iter,
            stream_seed(seed, Stream::Cluster),
        )
    };
    let mut outcome = TrialOutcome {
        index,
        seed,
        iterations: 0,
        converged: false,
        report: None,
        error: None,
    };
    let run = match kmeans::run(dataset, &cluster) {
        Ok(r) => r,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    outcome.iterations = run.iterations;
    outcome.converged = run.converged;

    let attack = || -> Result<TrialReport> {
        let (trace, truth) = match config.truncate_l {
            Some(l) => (truncate_trace(&run.trace, l)?, run.truth.suffix(l)),
            None => (run.trace.clone(), run.truth.clone()),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Attack));
        let record = build_record_with_coord(&trace, config.sign_coord, &mut rng)?;
        let reduced = rref_augmented(&record.w_star, &trace.stacked())?;
        let cert = leakage_rows(&reduced);
        let truth = oracle::true_system(&truth, dataset)?;
        let mut report = oracle::classify(&cert, &record, &truth, config.criterion)?;
        oracle::check_l2(&mut report, dataset);
        Ok(report)
    };
    match attack() {
        Ok(r) => outcome.report = Some(r),
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

/// A finished experiment: the aggregate plus per-trial detail.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: AggregateReport,
    pub outcomes: Vec<TrialOutcome>,
    pub images: Option<ImageSet>,
}

fn load_shared(config: &ExperimentConfig) -> Result<(Option<Dataset>, Option<ImageSet>)> {
    match &config.source {
        DatasetSource::Synthetic { .. } => Ok((None, None)),
        DatasetSource::Csv {
            path,
            scale,
            skip_header,
        } => Ok((Some(io::load_csv(path, *scale, *skip_header)?), None)),
        DatasetSource::PgmDir { path } => {
            let set = io::load_pgm_dir(path)?;
            Ok((Some(set.dataset.clone()), Some(set)))
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let (shared, images) = load_shared(config)?;
    if let Some(ds) = &shared {
        ClusterConfig::new(config.k, config.max_iter, 0).validate(ds.n())?;
    }
    let outcomes = (0..config.trials)
        .into_par_iter()
        .map(|i| -> Result<TrialOutcome> {
            let ds = trial_dataset(config, shared.as_ref(), i)?;
            Ok(run_trial(&ds, config, i))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate(config, &outcomes);
    Ok(Experiment {
        report,
        outcomes,
        images,
    })
}

pub fn run_trials(config: &ExperimentConfig) -> Result<AggregateReport> {
    run_experiment(config).map(|e| e.report)
}

/// Folds outcomes, in trial order, into per-iteration buckets.
pub fn aggregate(config: &ExperimentConfig, outcomes: &[TrialOutcome]) -> AggregateReport {
    let mut buckets: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let b = buckets.entry(o.iterations).or_default();
        b.0 += 1;
        b.1 += usize::from(o.success());
    }
    let all = outcomes.len();
    let passed = outcomes.iter().filter(|o| o.success()).count();
    let trials = config.keep_trials.then(|| {
        outcomes
            .iter()
            .map(|o| {
                let r = o.report.as_ref();
                TrialRecord {
                    seed: o.seed,
                    iter: o.iterations,
                    converged: o.converged,
                    success: o.success(),
                    certified: r.map_or(0, |r| r.certified),
                    exact_inputs: r.map_or(0, |r| r.exact_input_recoveries),
                    aggregates: r.map_or(0, |r| r.aggregate_recoveries),
                    mismatches: r.map_or(0, |r| r.mismatches),
                }
            })
            .collect()
    });
    AggregateReport {
        config: config.clone(),
        regime: config.regime(),
        buckets: buckets
            .into_iter()
            .map(|(iter, (all, passed))| Bucket::new(iter, all, passed))
            .collect(),
        total: Totals::new(all, passed),
        criteria: MatchMode::ALL
            .iter()
            .map(|&mode| CriterionTotals {
                criterion: mode,
                totals: Totals::new(all, outcomes.iter().filter(|o| o.passes(mode)).count()),
            })
            .collect(),
        trials,
    }
}

/// Writes every exactly recovered image next to its original as P5 PGMs.
/// Returns the number of pairs written.
pub fn emit_reconstructions(
    outcomes: &[TrialOutcome],
    images: &ImageSet,
    out_dir: impl AsRef<Path>,
) -> Result<usize> {
    let out_dir = out_dir.as_ref();
    let mut written: HashSet<usize> = HashSet::new();
    for o in outcomes {
        let Some(report) = &o.report else { continue };
        for rec in report
            .recoveries
            .iter()
            .filter(|r| r.kind == RecoveryKind::Input)
        {
            let sample = rec.samples[0];
            if written.contains(&sample) {
                continue;
            }
            let pixels = rec
                .value
                .iter()
                .map(|v| {
                    v.is_integer()
                        .then(|| v.to_integer().to_u8())
                        .flatten()
                        .ok_or_else(|| {
                            Error::Consistency(format!(
                                "recovered pixel {v} of sample {sample} is not in 0..=255"
                            ))
                        })
                })
                .collect::<Result<Vec<u8>>>()?;
            let original: Vec<u8> = images
                .dataset
                .row(sample)
                .iter()
                .map(|&p| {
                    u8::try_from(p)
                        .map_err(|_| Error::Consistency(format!("pixel {p} out of range")))
                })
                .collect::<Result<_>>()?;
            if written.is_empty() {
                fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
            }
            let img = |pixels| GrayImage {
                width: images.width,
                height: images.height,
                pixels,
            };
            io::write_pgm(
                out_dir.join(format!("sample{sample:04}_original.pgm")),
                &img(original),
            )?;
            io::write_pgm(
                out_dir.join(format!("sample{sample:04}_reconstructed.pgm")),
                &img(pixels),
            )?;
            written.insert(sample);
        }
    }
    Ok(written.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_range() {
        let ds = gen_synthetic(6, 2, 5, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(ds.values().iter().all(|&v| v == 5));
    }

    #[test]
    fn synthetic_bounds_and_determinism() {
        let a = gen_synthetic(20, 1, 0, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_synthetic(20, 1, 0, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|&v| (0..=50).contains(&v)));
    }

    #[test]
    fn synthetic_mean_is_centred() {
        let ds = gen_synthetic(100_000, 1, 0, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mean = ds.values().iter().sum::<i64>() as f64 / 100_000.0;
        assert!((mean - 25.0).abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::synthetic(20, 1, 4, 10, 1, 0);
        assert!(c.validate().is_ok());
        c.trials = 0;
        assert!(c.validate().is_err());
        c.trials = 1;
        c.truncate_l = Some(1);
        assert!(c.validate().is_err());
        c.truncate_l = None;
        c.source = DatasetSource::Synthetic {
            n: 5,
            d: 1,
            lo: 3,
            hi: 2,
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_cluster_trial_runs_whole_pipeline() {
        let cfg = ExperimentConfig::synthetic(5, 1, 1, 10, 1, 3);
        let rep = run_trials(&cfg).unwrap();
        assert_eq!(rep.buckets.len(), 1);
        assert_eq!(rep.buckets[0].iter, 2);
        assert_eq!(rep.total.all, 1);
        // The lone stationary trajectory is the whole dataset: an aggregate match.
        assert_eq!(rep.total.passed, 1);

        let strict = ExperimentConfig {
            criterion: MatchMode::StrictSingleton,
            ..cfg
        };
        assert_eq!(run_trials(&strict).unwrap().total.passed, 0);
    }

    #[test]
    fn one_step_cap_yields_failed_trial_not_error() {
        let cfg = ExperimentConfig::synthetic(10, 1, 3, 1, 4, 3);
        let exp = run_experiment(&cfg).unwrap();
        assert_eq!(exp.outcomes.len(), 4);
        assert!(exp
            .outcomes
            .iter()
            .all(|o| !o.success() && o.error.is_some()));
        assert_eq!(exp.report.buckets[0].iter, 1);
    }

    #[test]
    fn truncation_shares_the_clustering_run() {
        let full = ExperimentConfig::synthetic(20, 1, 4, 10, 30, 8);
        let trunc = ExperimentConfig {
            truncate_l: Some(3),
            ..full.clone()
        };
        let a = run_experiment(&full).unwrap();
        let b = run_experiment(&trunc).unwrap();
        for (x, y) in a.outcomes.iter().zip(&b.outcomes) {
            assert_eq!(
                (x.seed, x.iterations, x.converged),
                (y.seed, y.iterations, y.converged)
            );
        }
        assert_eq!(b.report.regime, Regime::Truncated);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: HashSet<u64> = (0..1000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }
}
