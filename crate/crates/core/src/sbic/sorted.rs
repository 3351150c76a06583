//! Sorted SBIC: one log-odds view per task, each task's own labels deferred
//! to a final pass.
//!
//! `views[k * n + i]` is the log-odds of task `i` as seen from task `k`.
//! The streaming pass never writes task `k`'s own labels into view `k`.

use crate::error::{Error, Result};
use crate::model::{expit, prior_log_odds, Label, LabelMatrix, LabelRecord, Prediction, Prior};
use crate::sbic::{worker_estimate, WorkerEstimate, WorkerHistory};

/// Task count above which callers should refuse the dense `|M|²` layout.
pub const DEFAULT_TASK_CAP: usize = 5000;

/// Whether the arriving label's own soft agreement enters the worker
/// estimate used to update the other views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrivalTerm {
    /// The arriving label is already part of the worker's history.
    #[default]
    Include,
    /// The worker's history is read before the arriving label is appended.
    Exclude,
}

#[derive(Debug, Clone)]
pub struct SortedSbic {
    prior: Prior,
    num_tasks: usize,
    views: Vec<f64>,
    history: WorkerHistory,
    log: Vec<LabelRecord>,
    arrival: ArrivalTerm,
    live: Option<LiveLogOdds>,
}

/// Finalised log-odds kept current after every update, for online use.
#[derive(Debug, Clone)]
struct LiveLogOdds {
    by_task: Vec<Vec<(usize, Label)>>,
    terms: Vec<Vec<f64>>,
    z: Vec<f64>,
    dirty: Vec<bool>,
    dirty_list: Vec<usize>,
}

impl SortedSbic {
    pub fn new(prior: Prior, num_tasks: usize) -> Result<Self> {
        if num_tasks == 0 {
            return Err(Error::InvalidConfig("Sorted SBIC needs at least one task".into()));
        }
        let z0 = prior_log_odds(&prior);
        let views = num_tasks
            .checked_mul(num_tasks)
            .ok_or_else(|| Error::InvalidConfig(format!("{num_tasks} tasks overflow the view matrix")))?;
        Ok(Self {
            prior,
            num_tasks,
            views: vec![z0; views],
            history: WorkerHistory::default(),
            log: Vec::new(),
            arrival: ArrivalTerm::Include,
            live: None,
        })
    }

    /// Like [`SortedSbic::new`] but refuses more than `cap` tasks.
    pub fn with_task_cap(prior: Prior, num_tasks: usize, cap: usize) -> Result<Self> {
        if num_tasks > cap {
            return Err(Error::InvalidConfig(format!(
                "Sorted SBIC keeps {num_tasks}² log-odds views; {num_tasks} tasks exceeds the cap of {cap}"
            )));
        }
        Self::new(prior, num_tasks)
    }

    pub fn with_arrival_term(mut self, arrival: ArrivalTerm) -> Self {
        assert!(self.log.is_empty(), "arrival term must be chosen before any update");
        self.arrival = arrival;
        self
    }

    /// Keeps the finalised log-odds up to date after each update, so that
    /// [`SortedSbic::live_log_odds`] is O(1).
    pub fn with_live_log_odds(mut self) -> Self {
        assert!(self.log.is_empty(), "live tracking must be enabled before any update");
        let z0 = prior_log_odds(&self.prior);
        self.live = Some(LiveLogOdds {
            by_task: vec![Vec::new(); self.num_tasks],
            terms: vec![Vec::new(); self.num_tasks],
            z: vec![z0; self.num_tasks],
            dirty: vec![false; self.num_tasks],
            dirty_list: Vec::new(),
        });
        self
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn log(&self) -> &[LabelRecord] {
        &self.log
    }

    /// Log-odds of `task` in the view of `view_of`.
    pub fn view(&self, view_of: usize, task: usize) -> f64 {
        self.views[view_of * self.num_tasks + task]
    }

    pub fn view_row(&self, view_of: usize) -> &[f64] {
        let n = self.num_tasks;
        &self.views[view_of * n..(view_of + 1) * n]
    }

    /// Estimate of `worker` in the view of `view_of`, skipping that task.
    pub fn worker_estimate(&self, worker: usize, view_of: usize) -> WorkerEstimate {
        let row = self.view_row(view_of);
        worker_estimate(&self.prior, self.history.get(worker), Some(view_of), |h| row[h])
    }

    pub fn update(&mut self, record: &LabelRecord) -> Result<()> {
        let (i, j) = (record.task, record.worker);
        if i >= self.num_tasks {
            return Err(Error::Contract(format!("task {i} out of range for {} tasks", self.num_tasks)));
        }
        if self.history.contains(j, i) {
            return Err(Error::DuplicatePair { task: i, worker: j });
        }
        let x = record.label.sign();
        if self.arrival == ArrivalTerm::Include {
            self.history.push(j, i, record.label);
        }
        let n = self.num_tasks;
        let history = self.history.get(j);
        for k in (0..n).filter(|&k| k != i) {
            let row = &mut self.views[k * n..(k + 1) * n];
            let estimate = worker_estimate(&self.prior, history, Some(k), |h| row[h]);
            row[i] += x * estimate.log_weight();
        }
        if self.arrival == ArrivalTerm::Exclude {
            self.history.push(j, i, record.label);
        }
        self.log.push(*record);
        if self.live.is_some() {
            self.refresh_live(i, j, record.label);
        }
        Ok(())
    }

    /// Recomputes every task's log-odds from its own view and returns the
    /// predictions. The state is left untouched, so this can run at any time.
    pub fn finalize(&self, tie_seed: u64) -> Prediction {
        Prediction::from_scores(self.final_log_odds(), tie_seed)
    }

    pub fn final_log_odds(&self) -> Vec<f64> {
        let mut z = vec![prior_log_odds(&self.prior); self.num_tasks];
        for r in &self.log {
            let estimate = self.worker_estimate(r.worker, r.task);
            z[r.task] += r.label.sign() * estimate.log_weight();
        }
        z
    }

    /// Finalised log-odds maintained incrementally. Requires
    /// [`SortedSbic::with_live_log_odds`].
    pub fn live_log_odds(&self) -> Option<&[f64]> {
        self.live.as_ref().map(|l| l.z.as_slice())
    }

    /// Max-posterior probability per task, `expit(|z_i|)`.
    pub fn uncertainty(&self) -> Vec<f64> {
        match self.live_log_odds() {
            Some(z) => z.iter().map(|z| expit(z.abs())).collect(),
            None => self.final_log_odds().iter().map(|z| expit(z.abs())).collect(),
        }
    }

    pub fn offline(matrix: &LabelMatrix, prior: Prior, tie_seed: u64) -> Result<Prediction> {
        let mut state = Self::new(prior, matrix.num_tasks().max(1))?;
        for r in matrix.records() {
            state.update(r)?;
        }
        let mut prediction = state.finalize(tie_seed);
        prediction.classes.truncate(matrix.num_tasks());
        if let Some(z) = prediction.log_odds.as_mut() {
            z.truncate(matrix.num_tasks());
        }
        Ok(prediction)
    }

    fn live_term(&self, task: usize, worker: usize, label: Label) -> f64 {
        label.sign() * self.worker_estimate(worker, task).log_weight()
    }

    // A label on task i moves column i of every other view, which changes the
    // estimate of each worker who answered i as seen from every other task
    // that worker answered. Nothing else in the finalised sums depends on it.
    fn refresh_live(&mut self, i: usize, j: usize, label: Label) {
        let new_term = self.live_term(i, j, label);
        let mut live = self.live.take().expect("live tracking enabled");
        live.by_task[i].push((j, label));
        live.terms[i].push(new_term);
        live.mark(i);
        let workers: Vec<usize> = live.by_task[i].iter().map(|&(w, _)| w).collect();
        for worker in workers {
            for &(k, xk) in self.history.get(worker) {
                if k == i {
                    continue;
                }
                let pos = live.by_task[k]
                    .iter()
                    .position(|&(w, _)| w == worker)
                    .expect("worker history and task lists agree");
                live.terms[k][pos] = self.live_term(k, worker, xk);
                live.mark(k);
            }
        }
        let z0 = prior_log_odds(&self.prior);
        for &k in &live.dirty_list {
            let mut z = z0;
            for t in &live.terms[k] {
                z += t;
            }
            live.z[k] = z;
            live.dirty[k] = false;
        }
        live.dirty_list.clear();
        self.live = Some(live);
    }
}

impl LiveLogOdds {
    fn mark(&mut self, task: usize) {
        if !self.dirty[task] {
            self.dirty[task] = true;
            self.dirty_list.push(task);
        }
    }
}
