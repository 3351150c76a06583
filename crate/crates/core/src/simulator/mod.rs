//! Synthetic crowds and the experimental protocol built on them.
//!
//! A run draws `|N| = |M|·R/L` worker accuracies from the crowd prior, sends
//! the workers in one at a time for `L` consecutive labels each, lets the
//! policy pick every task, and scores the aggregator's final predictions
//! against an all-positive ground truth.

mod curve;
mod online;
mod timing;

pub use curve::{agresti_coull, estimate_error_curve, estimate_error_point, write_curve_csv, CurvePoint, StopRule};
pub use online::{aggregate, stream_aggregator, AggregatorParams, Algorithm, StreamAggregator};
pub use timing::{timing_harness, write_timing_csv, TimingRow, TimingStats};

use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroundTruth, Label, LabelRecord, Prior};
use crate::policies::{next_task, AssignmentContext, Policy};

/// How worker labels are spread over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrival {
    /// Each worker gives all `L` labels back to back; worker order is random.
    #[default]
    Sessions,
    /// All `|N|·L` worker slots are shuffled together.
    Interleaved,
}

impl std::str::FromStr for Arrival {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sessions" => Ok(Arrival::Sessions),
            "interleaved" => Ok(Arrival::Interleaved),
            other => {
                Err(Error::InvalidConfig(format!("unknown arrival mode `{other}` (expected sessions or interleaved)")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_tasks: usize,
    pub labels_per_task: usize,
    pub labels_per_worker: usize,
    /// Prior the worker accuracies are drawn from.
    pub crowd: Prior,
    /// Prior the aggregator assumes.
    pub prior: Prior,
    pub policy: Policy,
    pub algorithm: Algorithm,
    pub arrival: Arrival,
    pub seed: u64,
    pub params: AggregatorParams,
}

impl SyntheticConfig {
    /// Config whose crowd is drawn from the prior the aggregator assumes.
    pub fn new(
        num_tasks: usize,
        labels_per_task: usize,
        labels_per_worker: usize,
        prior: Prior,
        policy: Policy,
        algorithm: Algorithm,
        seed: u64,
    ) -> Self {
        Self {
            num_tasks,
            labels_per_task,
            labels_per_worker,
            crowd: prior,
            prior,
            policy,
            algorithm,
            arrival: Arrival::Sessions,
            seed,
            params: AggregatorParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (m, r, l) = (self.num_tasks, self.labels_per_task, self.labels_per_worker);
        if m == 0 {
            return Err(Error::InvalidConfig("at least one task is required".into()));
        }
        if r == 0 {
            return Err(Error::InvalidConfig("labels per task must be at least 1".into()));
        }
        if l == 0 || l > m {
            return Err(Error::InvalidConfig(format!("labels per worker must lie in 1..={m}, got {l}")));
        }
        if (m * r) % l != 0 {
            return Err(Error::InvalidConfig(format!("|M|·R = {} is not divisible by L = {l}", m * r)));
        }
        Ok(())
    }

    pub fn num_workers(&self) -> usize {
        self.num_tasks * self.labels_per_task / self.labels_per_worker
    }

    pub fn num_labels(&self) -> usize {
        self.num_tasks * self.labels_per_task
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRun {
    pub records: Vec<LabelRecord>,
    pub truth: GroundTruth,
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunResult {
    pub errors: usize,
    pub total: usize,
    pub wall_time: Duration,
}

const CROWD_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;
const AGGREGATOR_STREAM: u64 = 3;
const TIE_STREAM: u64 = 4;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent child seed number `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Draws the crowd and feeds the label stream to `aggregator`, asking it for
/// confidence scores before every assignment under uncertainty sampling.
///
/// Crowd, arrival order and label draws come from one stream and policy tie
/// breaks from another, so under UNI every aggregator sees the same labels
/// for a given seed.
pub fn generate_run(cfg: &SyntheticConfig, aggregator: &mut dyn StreamAggregator) -> Result<GeneratedRun> {
    cfg.validate()?;
    let (m, l) = (cfg.num_tasks, cfg.labels_per_worker);
    let n = cfg.num_workers();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, CROWD_STREAM));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, POLICY_STREAM));
    let beta =
        Beta::new(cfg.crowd.alpha, cfg.crowd.beta).map_err(|e| Error::InvalidConfig(format!("crowd prior: {e}")))?;
    let accuracies: Vec<f64> = (0..n).map(|_| beta.sample(&mut rng)).collect();

    let schedule: Vec<usize> = match cfg.arrival {
        Arrival::Sessions => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order.into_iter().flat_map(|w| std::iter::repeat_n(w, l)).collect()
        }
        Arrival::Interleaved => {
            let mut slots: Vec<usize> = (0..n).flat_map(|w| std::iter::repeat_n(w, l)).collect();
            slots.shuffle(&mut rng);
            slots
        }
    };

    let truth = GroundTruth::all(Label::Pos, m);
    let mut counts = vec![0usize; m];
    let mut done: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut records = Vec::with_capacity(schedule.len());
    for (t, &worker) in schedule.iter().enumerate() {
        let scores = match cfg.policy {
            Policy::Uni => None,
            Policy::Us => Some(aggregator.confidence()?),
        };
        let ctx =
            AssignmentContext { worker, labeled_by_worker: &done[worker], label_counts: &counts, uncertainty: scores };
        let task = next_task(cfg.policy, &ctx, &mut policy_rng)?;
        let y = truth.classes[task];
        let label = if rng.random::<f64>() < accuracies[worker] { y } else { y.flipped() };
        let record = LabelRecord::new(task, worker, label, t as u64 + 1);
        aggregator.observe(&record)?;
        counts[task] += 1;
        done[worker].push(task);
        records.push(record);
    }
    Ok(GeneratedRun { records, truth, accuracies })
}

/// One complete run: collection, inference and scoring.
pub fn run_once(cfg: &SyntheticConfig) -> Result<RunResult> {
    let clock = Stopwatch::start();
    let mut aggregator = stream_aggregator(
        cfg.algorithm,
        cfg.prior,
        cfg.num_tasks,
        cfg.policy,
        &cfg.params,
        derive_seed(cfg.seed, AGGREGATOR_STREAM),
    )?;
    let run = generate_run(cfg, aggregator.as_mut())?;
    let prediction = aggregator.finish(derive_seed(cfg.seed, TIE_STREAM))?;
    let errors = prediction.errors(&run.truth);
    Ok(RunResult { errors, total: run.truth.len(), wall_time: clock.elapsed() })
}

/// Monotonic wall clock; reads zero where the platform has none.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed()
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LabelMatrix;

    fn cfg(m: usize, r: usize, l: usize, policy: Policy, algorithm: Algorithm) -> SyntheticConfig {
        SyntheticConfig::new(m, r, l, Prior::synthetic(), policy, algorithm, 11)
    }

    fn stream(cfg: &SyntheticConfig) -> GeneratedRun {
        let mut agg = stream_aggregator(cfg.algorithm, cfg.prior, cfg.num_tasks, cfg.policy, &cfg.params, 0).unwrap();
        generate_run(cfg, agg.as_mut()).unwrap()
    }

    #[test]
    fn config_invariants() {
        assert!(cfg(10, 3, 4, Policy::Uni, Algorithm::Maj).validate().is_err());
        assert!(cfg(3, 4, 4, Policy::Uni, Algorithm::Maj).validate().is_err());
        assert!(cfg(10, 0, 5, Policy::Uni, Algorithm::Maj).validate().is_err());
        assert!(cfg(0, 1, 1, Policy::Uni, Algorithm::Maj).validate().is_err());
        let c = cfg(1000, 10, 10, Policy::Uni, Algorithm::Maj);
        c.validate().unwrap();
        assert_eq!((c.num_workers(), c.num_labels()), (1000, 10_000));
    }

    #[test]
    fn streams_respect_the_protocol() {
        for policy in [Policy::Uni, Policy::Us] {
            for arrival in [Arrival::Sessions, Arrival::Interleaved] {
                let c = SyntheticConfig { arrival, ..cfg(30, 4, 6, policy, Algorithm::FastSbic) };
                let run = stream(&c);
                assert_eq!(run.records.len(), 120);
                let m = LabelMatrix::from_records(run.records.clone()).unwrap();
                assert_eq!(m.num_workers(), 20);
                assert!((0..20).all(|w| m.worker_labels(w).len() == 6));
                if policy == Policy::Uni && arrival == Arrival::Sessions {
                    assert!((0..30).all(|t| m.task_labels(t).len() == 4));
                }
                if arrival == Arrival::Sessions {
                    for chunk in run.records.chunks(6) {
                        assert!(chunk.iter().all(|r| r.worker == chunk[0].worker));
                    }
                }
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        for a in [Algorithm::SortedSbic, Algorithm::Pf, Algorithm::Kos] {
            let c = cfg(20, 3, 5, Policy::Us, a);
            assert_eq!(stream(&c), stream(&c));
            let (x, y) = (run_once(&c).unwrap(), run_once(&c).unwrap());
            assert_eq!((x.errors, x.total), (y.errors, y.total));
        }
        assert_ne!(
            stream(&cfg(20, 3, 5, Policy::Uni, Algorithm::Maj)),
            stream(&cfg(20, 3, 5, Policy::Uni, Algorithm::Maj).with_seed(12))
        );
    }

    #[test]
    fn uni_streams_do_not_depend_on_the_aggregator() {
        let a = stream(&cfg(40, 5, 10, Policy::Uni, Algorithm::Maj));
        let b = stream(&cfg(40, 5, 10, Policy::Uni, Algorithm::SortedSbic));
        assert_eq!(a, b);
    }

    #[test]
    fn single_label_matches_the_prior_mean() {
        let c = cfg(1, 1, 1, Policy::Uni, Algorithm::Maj);
        let n = 20_000;
        let pos = (0..n).filter(|&s| stream(&c.with_seed(s)).records[0].label == Label::Pos).count();
        let p = pos as f64 / n as f64;
        let mean = Prior::synthetic().mean_accuracy();
        assert!((p - mean).abs() < 4.0 * (mean * (1.0 - mean) / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn perfect_crowd_gives_no_errors() {
        let perfect = Prior::new(1e6, 1.0, 0.5).unwrap();
        for a in [Algorithm::Maj, Algorithm::FastSbic, Algorithm::SortedSbic, Algorithm::Kos, Algorithm::Amf] {
            let c = SyntheticConfig { crowd: perfect, ..cfg(30, 3, 5, Policy::Uni, a) };
            assert_eq!(run_once(&c).unwrap().errors, 0, "{a}");
        }
    }

    #[test]
    fn us_stream_spreads_labels() {
        let run = stream(&cfg(50, 4, 10, Policy::Us, Algorithm::FastSbic));
        let m = LabelMatrix::from_records(run.records).unwrap();
        let labelled = (0..50).filter(|&t| !m.task_labels(t).is_empty()).count();
        assert_eq!(m.len(), 200);
        assert!(labelled > 25, "{labelled}");
    }

    #[test]
    fn seeds_are_spread() {
        let a: Vec<u64> = (0..5).map(|k| derive_seed(0, k)).collect();
        let mut sorted = a.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
        assert_ne!(derive_seed(1, 1), derive_seed(0, 1));
    }
}
