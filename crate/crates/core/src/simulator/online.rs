//! Adapters that let every aggregator consume a label stream and, for
//! uncertainty sampling, report a confidence score per task after each label.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, amf, AmfMode, AmfState, ParticleFilter};
use crate::error::{Error, Result};
use crate::model::{expit, LabelMatrix, LabelRecord, Prediction, Prior};
use crate::policies::Policy;
use crate::sbic::{FastSbic, SortedSbic, DEFAULT_TASK_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Maj,
    Em,
    Amf,
    Kos,
    Gibbs,
    Pf,
    FastSbic,
    SortedSbic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Maj,
        Algorithm::Em,
        Algorithm::Amf,
        Algorithm::Kos,
        Algorithm::Gibbs,
        Algorithm::Pf,
        Algorithm::FastSbic,
        Algorithm::SortedSbic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Maj => "maj",
            Algorithm::Em => "em",
            Algorithm::Amf => "amf",
            Algorithm::Kos => "kos",
            Algorithm::Gibbs => "gibbs",
            Algorithm::Pf => "pf",
            Algorithm::FastSbic => "fast-sbic",
            Algorithm::SortedSbic => "sorted-sbic",
        }
    }

    /// The Monte Carlo baseline for a policy: Gibbs sampling offline, the
    /// particle filter when scores are needed after every label.
    pub fn monte_carlo_for(policy: Policy) -> Algorithm {
        match policy {
            Policy::Uni => Algorithm::Gibbs,
            Policy::Us => Algorithm::Pf,
        }
    }

    /// The comparison set for one policy, with one Monte Carlo method.
    pub fn suite(policy: Policy) -> Vec<Algorithm> {
        vec![
            Algorithm::Maj,
            Algorithm::Em,
            Algorithm::Amf,
            Algorithm::Kos,
            Algorithm::monte_carlo_for(policy),
            Algorithm::FastSbic,
            Algorithm::SortedSbic,
        ]
    }

    /// Whether the result depends on label order or on a random seed.
    pub fn is_order_or_seed_dependent(self) -> bool {
        matches!(self, Algorithm::FastSbic | Algorithm::SortedSbic | Algorithm::Gibbs | Algorithm::Pf)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == lower)
            .or(match lower.as_str() {
                "fast" => Some(Algorithm::FastSbic),
                "sorted" => Some(Algorithm::SortedSbic),
                "mc" => Some(Algorithm::Gibbs),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Iteration counts and sizes for the iterative and sampling aggregators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregatorParams {
    pub amf_iterations: usize,
    pub amf_online_iterations: usize,
    pub kos_iterations: usize,
    pub gibbs_steps: usize,
    pub particles: usize,
    pub particle_move_every: usize,
    pub sorted_task_cap: usize,
}

impl Default for AggregatorParams {
    fn default() -> Self {
        Self {
            amf_iterations: amf::OFFLINE_ITERATIONS,
            amf_online_iterations: amf::ONLINE_ITERATIONS,
            kos_iterations: baselines::kos::SYNTHETIC_ITERATIONS,
            gibbs_steps: baselines::gibbs::DEFAULT_STEPS,
            particles: baselines::particle::DEFAULT_PARTICLES,
            particle_move_every: baselines::particle::DEFAULT_MOVE_EVERY,
            sorted_task_cap: DEFAULT_TASK_CAP,
        }
    }
}

pub trait StreamAggregator {
    fn observe(&mut self, record: &LabelRecord) -> Result<()>;

    /// Max-posterior confidence per task; the least confident eligible task
    /// is sampled next under uncertainty sampling.
    fn confidence(&mut self) -> Result<&[f64]>;

    fn finish(&mut self, tie_seed: u64) -> Result<Prediction>;
}

/// Builds the streaming form of `algorithm`. `online` asks for live
/// confidence scores (uncertainty sampling); offline adapters only buffer.
pub fn stream_aggregator(
    algorithm: Algorithm,
    prior: Prior,
    num_tasks: usize,
    policy: Policy,
    params: &AggregatorParams,
    seed: u64,
) -> Result<Box<dyn StreamAggregator>> {
    if num_tasks == 0 {
        return Err(Error::InvalidConfig("at least one task is required".into()));
    }
    let online = policy == Policy::Us;
    Ok(match algorithm {
        Algorithm::Maj => Box::new(MajorityStream::new(num_tasks)),
        Algorithm::FastSbic => Box::new(FastStream::new(prior, num_tasks)?),
        Algorithm::SortedSbic => {
            let mut state = SortedSbic::with_task_cap(prior, num_tasks, params.sorted_task_cap)?;
            if online {
                state = state.with_live_log_odds();
            }
            Box::new(SortedStream { state, confidence: vec![0.5; num_tasks] })
        }
        Algorithm::Amf | Algorithm::Em => {
            let mode = if algorithm == Algorithm::Em { AmfMode::Em } else { AmfMode::Amf };
            Box::new(AmfStream {
                state: AmfState::new(prior, mode, num_tasks)?,
                online,
                inner: params.amf_online_iterations,
                final_iterations: params.amf_iterations,
                confidence: vec![0.5; num_tasks],
            })
        }
        Algorithm::Kos => Box::new(KosStream {
            matrix: LabelMatrix::with_dims(num_tasks, 0),
            iterations: params.kos_iterations,
            confidence: vec![0.0; num_tasks],
        }),
        Algorithm::Gibbs => {
            if online {
                return Err(Error::InvalidConfig(
                    "Gibbs sampling is offline only; use pf under uncertainty sampling".into(),
                ));
            }
            Box::new(GibbsStream {
                prior,
                matrix: LabelMatrix::with_dims(num_tasks, 0),
                steps: params.gibbs_steps,
                seed,
            })
        }
        Algorithm::Pf => Box::new(PfStream {
            pf: ParticleFilter::with_particles(prior, num_tasks, params.particles, params.particle_move_every, seed)?,
            confidence: vec![0.5; num_tasks],
        }),
    })
}

struct MajorityStream {
    matrix: LabelMatrix,
    sums: Vec<f64>,
    confidence: Vec<f64>,
}

impl MajorityStream {
    fn new(num_tasks: usize) -> Self {
        Self {
            matrix: LabelMatrix::with_dims(num_tasks, 0),
            sums: vec![0.0; num_tasks],
            confidence: vec![0.0; num_tasks],
        }
    }
}

impl StreamAggregator for MajorityStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        check_task(record, self.sums.len())?;
        self.matrix.insert(*record)?;
        let s = &mut self.sums[record.task];
        *s += record.label.sign();
        self.confidence[record.task] = s.abs();
        Ok(())
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        Ok(&self.confidence)
    }

    fn finish(&mut self, tie_seed: u64) -> Result<Prediction> {
        Ok(Prediction::from_scores(self.sums.clone(), tie_seed))
    }
}

struct FastStream {
    state: FastSbic,
    confidence: Vec<f64>,
}

impl FastStream {
    fn new(prior: Prior, num_tasks: usize) -> Result<Self> {
        let state = FastSbic::new(prior, num_tasks)?;
        let confidence = state.uncertainty();
        Ok(Self { state, confidence })
    }
}

impl StreamAggregator for FastStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        self.state.update(record)?;
        self.confidence[record.task] = expit(self.state.log_odds()[record.task].abs());
        Ok(())
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        Ok(&self.confidence)
    }

    fn finish(&mut self, tie_seed: u64) -> Result<Prediction> {
        Ok(self.state.predict(tie_seed))
    }
}

struct SortedStream {
    state: SortedSbic,
    confidence: Vec<f64>,
}

impl StreamAggregator for SortedStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        self.state.update(record)
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        match self.state.live_log_odds() {
            Some(z) => {
                for (c, z) in self.confidence.iter_mut().zip(z) {
                    *c = expit(z.abs());
                }
            }
            None => self.confidence = self.state.uncertainty(),
        }
        Ok(&self.confidence)
    }

    fn finish(&mut self, tie_seed: u64) -> Result<Prediction> {
        Ok(self.state.finalize(tie_seed))
    }
}

struct AmfStream {
    state: AmfState,
    online: bool,
    inner: usize,
    final_iterations: usize,
    confidence: Vec<f64>,
}

impl StreamAggregator for AmfStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        let rounds = if self.online { self.inner } else { 0 };
        self.state.online_step(record, rounds)
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        for (c, z) in self.confidence.iter_mut().zip(self.state.log_odds()) {
            *c = expit(z.abs());
        }
        Ok(&self.confidence)
    }

    // Final estimates are always refitted from the prior.
    fn finish(&mut self, tie_seed: u64) -> Result<Prediction> {
        baselines::amf_run(self.state.matrix(), *self.state.prior(), self.final_iterations, self.state.mode(), tie_seed)
    }
}

struct KosStream {
    matrix: LabelMatrix,
    iterations: usize,
    confidence: Vec<f64>,
}

impl StreamAggregator for KosStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        check_task(record, self.confidence.len())?;
        self.matrix.insert(*record)
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        let z = baselines::kos_scores(&self.matrix, self.iterations);
        for (c, z) in self.confidence.iter_mut().zip(z) {
            *c = z.abs();
        }
        Ok(&self.confidence)
    }

    fn finish(&mut self, tie_seed: u64) -> Result<Prediction> {
        Ok(baselines::kos_run(&self.matrix, self.iterations, tie_seed))
    }
}

struct GibbsStream {
    prior: Prior,
    matrix: LabelMatrix,
    steps: usize,
    seed: u64,
}

impl StreamAggregator for GibbsStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        check_task(record, self.matrix.num_tasks())?;
        self.matrix.insert(*record)
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        Err(Error::Contract("Gibbs sampling does not provide online scores".into()))
    }

    fn finish(&mut self, _tie_seed: u64) -> Result<Prediction> {
        baselines::gibbs_run(&self.matrix, &self.prior, self.steps, self.seed)
    }
}

struct PfStream {
    pf: ParticleFilter,
    confidence: Vec<f64>,
}

impl StreamAggregator for PfStream {
    fn observe(&mut self, record: &LabelRecord) -> Result<()> {
        self.pf.observe(record)
    }

    fn confidence(&mut self) -> Result<&[f64]> {
        for (c, m) in self.confidence.iter_mut().zip(self.pf.marginals()) {
            *c = m.max(1.0 - m);
        }
        Ok(&self.confidence)
    }

    fn finish(&mut self, tie_seed: u64) -> Result<Prediction> {
        Ok(self.pf.predict(tie_seed))
    }
}

fn check_task(record: &LabelRecord, num_tasks: usize) -> Result<()> {
    if record.task >= num_tasks {
        return Err(Error::Contract(format!("task {} out of range for {num_tasks} tasks", record.task)));
    }
    Ok(())
}

/// Runs `algorithm` offline over a complete matrix.
pub fn aggregate(
    algorithm: Algorithm,
    matrix: &LabelMatrix,
    prior: Prior,
    params: &AggregatorParams,
    seed: u64,
) -> Result<Prediction> {
    let n = matrix.num_tasks();
    if n == 0 {
        return Ok(Prediction { classes: Vec::new(), log_odds: Some(Vec::new()) });
    }
    match algorithm {
        Algorithm::Maj => Ok(baselines::majority_vote(matrix, seed)),
        Algorithm::Amf => baselines::amf_run(matrix, prior, params.amf_iterations, AmfMode::Amf, seed),
        Algorithm::Em => baselines::amf_run(matrix, prior, params.amf_iterations, AmfMode::Em, seed),
        Algorithm::Kos => Ok(baselines::kos_run(matrix, params.kos_iterations, seed)),
        Algorithm::Gibbs => baselines::gibbs_run(matrix, &prior, params.gibbs_steps, seed),
        Algorithm::Pf | Algorithm::FastSbic | Algorithm::SortedSbic => {
            let mut agg = stream_aggregator(algorithm, prior, n, Policy::Uni, params, seed)?;
            for r in matrix.records() {
                agg.observe(r)?;
            }
            agg.finish(seed)
        }
    }
}
