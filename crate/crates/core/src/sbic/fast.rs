//! Fast SBIC: a single streaming pass in arrival order.

use crate::error::{Error, Result};
use crate::model::{expit, prior_log_odds, LabelMatrix, LabelRecord, Prediction, Prior};
use crate::sbic::{worker_estimate, WorkerEstimate, WorkerHistory};

/// Streaming state: per-task log-odds plus every worker's answers so far.
#[derive(Debug, Clone)]
pub struct FastSbic {
    prior: Prior,
    z: Vec<f64>,
    history: WorkerHistory,
}

impl FastSbic {
    pub fn new(prior: Prior, num_tasks: usize) -> Result<Self> {
        if num_tasks == 0 {
            return Err(Error::InvalidConfig("Fast SBIC needs at least one task".into()));
        }
        Ok(Self { prior, z: vec![prior_log_odds(&prior); num_tasks], history: WorkerHistory::default() })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn log_odds(&self) -> &[f64] {
        &self.z
    }

    pub fn num_tasks(&self) -> usize {
        self.z.len()
    }

    /// Posterior-mean accuracy of `worker` from its answers so far, scored
    /// against the current log-odds.
    pub fn worker_estimate(&self, worker: usize, exclude_task: Option<usize>) -> WorkerEstimate {
        worker_estimate(&self.prior, self.history.get(worker), exclude_task, |h| self.z[h])
    }

    /// Folds one label into the log-odds of its task.
    ///
    /// The worker estimate is taken from the history before this label is
    /// appended.
    pub fn update(&mut self, record: &LabelRecord) -> Result<()> {
        if record.task >= self.z.len() {
            return Err(Error::Contract(format!("task {} out of range for {} tasks", record.task, self.z.len())));
        }
        if self.history.contains(record.worker, record.task) {
            return Err(Error::DuplicatePair { task: record.task, worker: record.worker });
        }
        let estimate = self.worker_estimate(record.worker, None);
        self.z[record.task] += record.label.sign() * estimate.log_weight();
        self.history.push(record.worker, record.task, record.label);
        Ok(())
    }

    pub fn predict(&self, tie_seed: u64) -> Prediction {
        Prediction::from_scores(self.z.clone(), tie_seed)
    }

    /// Max-posterior probability per task, `expit(|z_i|)`.
    pub fn uncertainty(&self) -> Vec<f64> {
        self.z.iter().map(|z| expit(z.abs())).collect()
    }

    /// Runs the whole matrix through in record order.
    pub fn offline(matrix: &LabelMatrix, prior: Prior, tie_seed: u64) -> Result<Prediction> {
        let mut state = Self::new(prior, matrix.num_tasks().max(1))?;
        for r in matrix.records() {
            state.update(r)?;
        }
        let mut prediction = state.predict(tie_seed);
        prediction.classes.truncate(matrix.num_tasks());
        if let Some(z) = prediction.log_odds.as_mut() {
            z.truncate(matrix.num_tasks());
        }
        Ok(prediction)
    }
}
