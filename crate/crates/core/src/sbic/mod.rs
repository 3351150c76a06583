//! Streaming Bayesian inference for crowdsourcing (SBIC).
//!
//! Both variants carry every task factor as a log-odds value and fold in one
//! label at a time. A worker's accuracy factor is never materialised; only its
//! Beta posterior mean is recomputed from the worker's answers on demand:
//!
//! ```text
//! p̄_j = (Σ_{h ∈ M_j} expit(x_hj · z_h) + α) / (|M_j| + α + β)
//! z_i += x_ij · log(p̄_j / (1 − p̄_j))
//! ```
//!
//! [`FastSbic`] processes labels in arrival order. [`SortedSbic`] keeps one
//! view of all log-odds per task so that each task's own labels can be
//! scored last, after every other label has informed the worker estimates.

mod fast;
mod sorted;

pub use fast::FastSbic;
pub use sorted::{ArrivalTerm, SortedSbic, DEFAULT_TASK_CAP};

use crate::model::{expit, Label, Prior};

/// Posterior-mean accuracy of one worker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerEstimate {
    pub p_bar: f64,
    /// Number of answers that entered the estimate.
    pub support: usize,
}

impl WorkerEstimate {
    /// `log(p̄ / (1 − p̄))`, the weight of one label from this worker.
    #[inline]
    pub fn log_weight(&self) -> f64 {
        (self.p_bar / (1.0 - self.p_bar)).ln()
    }
}

/// Per-worker answer lists, indexed by dense worker id.
#[derive(Debug, Clone, Default)]
pub(crate) struct WorkerHistory {
    lists: Vec<Vec<(usize, Label)>>,
}

impl WorkerHistory {
    pub(crate) fn get(&self, worker: usize) -> &[(usize, Label)] {
        self.lists.get(worker).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn contains(&self, worker: usize, task: usize) -> bool {
        self.get(worker).iter().any(|&(t, _)| t == task)
    }

    pub(crate) fn push(&mut self, worker: usize, task: usize, label: Label) {
        if worker >= self.lists.len() {
            self.lists.resize_with(worker + 1, Vec::new);
        }
        self.lists[worker].push((task, label));
    }
}

/// Beta posterior mean from soft agreements `expit(x · z)`, optionally
/// skipping one task. Sums run in history order.
#[inline]
pub(crate) fn worker_estimate(
    prior: &Prior,
    history: &[(usize, Label)],
    exclude_task: Option<usize>,
    log_odds: impl Fn(usize) -> f64,
) -> WorkerEstimate {
    let mut sum = 0.0;
    let mut support = 0usize;
    for &(task, label) in history {
        if Some(task) == exclude_task {
            continue;
        }
        sum += expit(label.sign() * log_odds(task));
        support += 1;
    }
    WorkerEstimate { p_bar: (sum + prior.alpha) / (support as f64 + prior.alpha + prior.beta), support }
}
