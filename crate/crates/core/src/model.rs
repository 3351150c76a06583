//! One-coin Dawid-Skene domain types and the sparse label store.
//!
//! Tasks and workers are dense 0-based indices. A missing (task, worker)
//! pair is simply absent from the store; there is no zero label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary class or crowd answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn from_sign(value: i64) -> Result<Self> {
        match value {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::Contract(format!("label must be +1 or -1, got {other}"))),
        }
    }

    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

/// One observed answer: worker `worker` labelled task `task` at time `seq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub task: usize,
    pub worker: usize,
    pub label: Label,
    /// 1-based arrival time.
    pub seq: u64,
}

impl LabelRecord {
    pub fn new(task: usize, worker: usize, label: Label, seq: u64) -> Self {
        Self { task, worker, label, seq }
    }
}

/// Beta(alpha, beta) prior on worker accuracy plus the class prior
/// `q = P(y = +1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

impl Prior {
    pub fn new(alpha: f64, beta: f64, q: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidConfig(format!("q must lie in (0, 1), got {q}")));
        }
        Ok(Self { alpha, beta, q })
    }

    /// Matching prior used for synthetic crowds.
    pub fn synthetic() -> Self {
        Self { alpha: 4.0, beta: 3.0, q: 0.5 }
    }

    /// Generic prior used for real-world datasets.
    pub fn generic() -> Self {
        Self { alpha: 2.0, beta: 1.0, q: 0.5 }
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub classes: Vec<Label>,
}

impl GroundTruth {
    pub fn all(label: Label, num_tasks: usize) -> Self {
        Self { classes: vec![label; num_tasks] }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Per-task class predictions with optional per-task scores (log-odds for
/// the Bayesian aggregators, vote sums for majority voting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub classes: Vec<Label>,
    pub log_odds: Option<Vec<f64>>,
}

impl Prediction {
    /// Signs of `scores`, with exact zeros resolved by a seeded fair coin.
    ///
    /// The coin is only drawn for tied tasks, in task order, so two scorers
    /// that tie on the same tasks produce the same classes for one seed.
    pub fn from_scores(scores: Vec<f64>, tie_seed: u64) -> Self {
        let classes = resolve_signs(&scores, tie_seed);
        Self { classes, log_odds: Some(scores) }
    }

    /// Number of tasks whose class differs from the truth.
    pub fn errors(&self, truth: &GroundTruth) -> usize {
        self.classes.iter().zip(&truth.classes).filter(|(a, b)| a != b).count()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

pub fn resolve_signs(scores: &[f64], tie_seed: u64) -> Vec<Label> {
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    scores
        .iter()
        .map(|&s| {
            if s > 0.0 {
                Label::Pos
            } else if s < 0.0 {
                Label::Neg
            } else if rng.random_bool(0.5) {
                Label::Pos
            } else {
                Label::Neg
            }
        })
        .collect()
}

/// Logistic function `1 / (1 + exp(-z))`.
#[inline]
pub fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log-odds of the class prior, `log(q / (1 - q))`.
pub fn prior_log_odds(prior: &Prior) -> f64 {
    logit(prior.q)
}

/// Sparse task x worker store with both adjacency views.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelMatrix {
    records: Vec<LabelRecord>,
    by_task: Vec<Vec<(usize, Label)>>,
    by_worker: Vec<Vec<(usize, Label)>>,
}

impl LabelMatrix {
    /// Empty store sized for `num_tasks` x `num_workers`; both grow on insert.
    pub fn with_dims(num_tasks: usize, num_workers: usize) -> Self {
        Self { records: Vec::new(), by_task: vec![Vec::new(); num_tasks], by_worker: vec![Vec::new(); num_workers] }
    }

    /// Builds the store from records, preserving their order.
    pub fn from_records(records: impl IntoIterator<Item = LabelRecord>) -> Result<Self> {
        let mut matrix = Self::default();
        for record in records {
            matrix.insert(record)?;
        }
        Ok(matrix)
    }

    pub fn insert(&mut self, record: LabelRecord) -> Result<()> {
        if self.contains(record.task, record.worker) {
            return Err(Error::DuplicatePair { task: record.task, worker: record.worker });
        }
        if record.task >= self.by_task.len() {
            self.by_task.resize_with(record.task + 1, Vec::new);
        }
        if record.worker >= self.by_worker.len() {
            self.by_worker.resize_with(record.worker + 1, Vec::new);
        }
        self.by_task[record.task].push((record.worker, record.label));
        self.by_worker[record.worker].push((record.task, record.label));
        self.records.push(record);
        Ok(())
    }

    pub fn contains(&self, task: usize, worker: usize) -> bool {
        self.by_worker.get(worker).is_some_and(|tasks| tasks.iter().any(|&(t, _)| t == task))
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    /// Workers and labels on `task` (N_i), in arrival order.
    pub fn task_labels(&self, task: usize) -> &[(usize, Label)] {
        self.by_task.get(task).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Tasks and labels of `worker` (M_j), in arrival order.
    pub fn worker_labels(&self, worker: usize) -> &[(usize, Label)] {
        self.by_worker.get(worker).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_tasks(&self) -> usize {
        self.by_task.len()
    }

    pub fn num_workers(&self) -> usize {
        self.by_worker.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Copy with every label negated.
    pub fn negated(&self) -> Self {
        let mut out = Self::with_dims(self.num_tasks(), self.num_workers());
        for r in &self.records {
            out.insert(LabelRecord { label: r.label.flipped(), ..*r }).expect("negation preserves uniqueness");
        }
        out
    }

    /// Copy padded so that it spans at least `num_tasks` tasks.
    pub fn with_min_tasks(mut self, num_tasks: usize) -> Self {
        if self.by_task.len() < num_tasks {
            self.by_task.resize_with(num_tasks, Vec::new);
        }
        self
    }
}
