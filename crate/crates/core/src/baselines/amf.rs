//! Approximate mean-field (AMF) and its EM twin.
//!
//! One iteration is a task sweep followed by a worker sweep; a final task
//! sweep always produces the returned posteriors. EM is the same code run
//! with the worker prior shifted to `(α − 1, β − 1)`, which yields the
//! posterior mode instead of the mean.

use crate::error::{Error, Result};
use crate::model::{expit, logit, prior_log_odds, LabelMatrix, LabelRecord, Prediction, Prior};

pub const OFFLINE_ITERATIONS: usize = 50;
pub const ONLINE_ITERATIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmfMode {
    #[default]
    Amf,
    Em,
}

#[derive(Debug, Clone)]
pub struct AmfState {
    prior: Prior,
    mode: AmfMode,
    worker_alpha: f64,
    worker_beta: f64,
    /// Task log-odds; `μ_i(+1) = expit(z_i)`.
    z: Vec<f64>,
    p_bar: Vec<f64>,
    matrix: LabelMatrix,
}

impl AmfState {
    pub fn new(prior: Prior, mode: AmfMode, num_tasks: usize) -> Result<Self> {
        let (worker_alpha, worker_beta) = match mode {
            AmfMode::Amf => (prior.alpha, prior.beta),
            AmfMode::Em => {
                if prior.alpha <= 1.0 || prior.beta <= 1.0 {
                    return Err(Error::InvalidConfig(format!(
                        "EM needs alpha > 1 and beta > 1 (got {}, {})",
                        prior.alpha, prior.beta
                    )));
                }
                (prior.alpha - 1.0, prior.beta - 1.0)
            }
        };
        Ok(Self {
            prior,
            mode,
            worker_alpha,
            worker_beta,
            z: vec![prior_log_odds(&prior); num_tasks],
            p_bar: Vec::new(),
            matrix: LabelMatrix::with_dims(num_tasks, 0),
        })
    }

    fn from_matrix(matrix: &LabelMatrix, prior: Prior, mode: AmfMode) -> Result<Self> {
        let mut state = Self::new(prior, mode, matrix.num_tasks())?;
        state.matrix = matrix.clone();
        state.p_bar = vec![state.initial_p_bar(); matrix.num_workers()];
        Ok(state)
    }

    pub fn mode(&self) -> AmfMode {
        self.mode
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn matrix(&self) -> &LabelMatrix {
        &self.matrix
    }

    pub fn log_odds(&self) -> &[f64] {
        &self.z
    }

    /// `μ_i(+1)` per task.
    pub fn posteriors(&self) -> Vec<f64> {
        self.z.iter().map(|&z| expit(z)).collect()
    }

    pub fn worker_accuracies(&self) -> &[f64] {
        &self.p_bar
    }

    fn initial_p_bar(&self) -> f64 {
        self.worker_alpha / (self.worker_alpha + self.worker_beta)
    }

    fn task_sweep(&mut self) {
        let z0 = prior_log_odds(&self.prior);
        for (i, z) in self.z.iter_mut().enumerate() {
            *z = self.matrix.task_labels(i).iter().fold(z0, |acc, &(j, x)| acc + x.sign() * logit(self.p_bar[j]));
        }
    }

    fn worker_sweep(&mut self) {
        let (a, b) = (self.worker_alpha, self.worker_beta);
        for (j, p) in self.p_bar.iter_mut().enumerate() {
            let labels = self.matrix.worker_labels(j);
            let agree: f64 = labels.iter().map(|&(i, x)| expit(x.sign() * self.z[i])).sum();
            *p = (agree + a) / (labels.len() as f64 + a + b);
        }
    }

    /// `iterations` rounds of (task sweep, worker sweep) followed by a task
    /// sweep, starting from the current worker estimates.
    pub fn iterate(&mut self, iterations: usize) {
        for _ in 0..iterations {
            self.task_sweep();
            self.worker_sweep();
        }
        self.task_sweep();
    }

    /// Logs one label and warm-starts `inner_iterations` rounds over all data
    /// seen so far. With zero rounds only the label is logged.
    pub fn online_step(&mut self, record: &LabelRecord, inner_iterations: usize) -> Result<()> {
        if record.task >= self.z.len() {
            return Err(Error::Contract(format!("task {} out of range for {} tasks", record.task, self.z.len())));
        }
        self.matrix.insert(*record)?;
        if self.p_bar.len() < self.matrix.num_workers() {
            let init = self.initial_p_bar();
            self.p_bar.resize(self.matrix.num_workers(), init);
        }
        if inner_iterations > 0 {
            self.iterate(inner_iterations);
        }
        Ok(())
    }

    pub fn predict(&self, tie_seed: u64) -> Prediction {
        Prediction::from_scores(self.z.clone(), tie_seed)
    }
}

/// Runs AMF (or EM) from the prior-mean worker estimates.
pub fn amf_run(
    matrix: &LabelMatrix,
    prior: Prior,
    iterations: usize,
    mode: AmfMode,
    tie_seed: u64,
) -> Result<Prediction> {
    let mut state = AmfState::from_matrix(matrix, prior, mode)?;
    state.iterate(iterations);
    Ok(state.predict(tie_seed))
}

/// Same as [`amf_run`] but returns the fitted state.
pub fn amf_fit(matrix: &LabelMatrix, prior: Prior, iterations: usize, mode: AmfMode) -> Result<AmfState> {
    let mut state = AmfState::from_matrix(matrix, prior, mode)?;
    state.iterate(iterations);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::majority_vote;
    use crate::model::Label;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn prior() -> Prior {
        Prior::new(4.0, 3.0, 0.5).unwrap()
    }

    fn matrix(recs: &[(usize, usize, i64)], tasks: usize) -> LabelMatrix {
        LabelMatrix::from_records(
            recs.iter()
                .enumerate()
                .map(|(k, &(t, w, x))| LabelRecord::new(t, w, Label::from_sign(x).unwrap(), k as u64 + 1)),
        )
        .unwrap()
        .with_min_tasks(tasks)
    }

    #[test]
    fn zero_iterations_is_majority() {
        let m = matrix(&[(0, 0, 1), (0, 1, 1), (0, 2, -1), (1, 0, -1), (1, 3, -1), (2, 1, 1), (2, 2, -1)], 3);
        for seed in 0..5 {
            let a = amf_run(&m, prior(), 0, AmfMode::Amf, seed).unwrap();
            assert_eq!(a.classes, majority_vote(&m, seed).classes);
        }
    }

    #[test]
    fn single_label_fixed_point() {
        let m = matrix(&[(0, 0, 1)], 1);
        for iters in [0, 1, 5, 50] {
            let s = amf_fit(&m, prior(), iters, AmfMode::Amf).unwrap();
            assert_abs_diff_eq!(s.posteriors()[0], 4.0 / 7.0, epsilon = 1e-12);
            assert_eq!(s.predict(0).classes, vec![Label::Pos]);
        }
    }

    #[test]
    fn disagreement_stays_balanced() {
        let m = matrix(&[(0, 0, 1), (0, 1, -1)], 1);
        let mut s = AmfState::from_matrix(&m, prior(), AmfMode::Amf).unwrap();
        for _ in 0..10 {
            s.iterate(1);
            assert_abs_diff_eq!(s.posteriors()[0], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn em_requires_shiftable_prior() {
        let m = matrix(&[(0, 0, 1)], 1);
        let generic = Prior::new(2.0, 1.0, 0.5).unwrap();
        assert!(matches!(amf_run(&m, generic, 5, AmfMode::Em, 0), Err(Error::InvalidConfig(_))));
        assert!(amf_run(&m, prior(), 5, AmfMode::Em, 0).is_ok());
    }

    #[test]
    fn online_matches_offline_on_first_label() {
        let r = LabelRecord::new(1, 2, Label::Neg, 1);
        let mut online = AmfState::new(prior(), AmfMode::Amf, 3).unwrap();
        online.online_step(&r, ONLINE_ITERATIONS).unwrap();
        let offline = amf_fit(&matrix(&[(1, 2, -1)], 3), prior(), ONLINE_ITERATIONS, AmfMode::Amf).unwrap();
        assert_eq!(online.log_odds(), offline.log_odds());
        assert_eq!(online.worker_accuracies(), offline.worker_accuracies());
    }

    #[test]
    fn online_zero_rounds_only_logs() {
        let mut s = AmfState::new(prior(), AmfMode::Amf, 2).unwrap();
        s.online_step(&LabelRecord::new(0, 0, Label::Pos, 1), 0).unwrap();
        assert_eq!(s.log_odds(), &[0.0, 0.0]);
        assert_eq!(s.matrix().len(), 1);
        let dup = s.online_step(&LabelRecord::new(0, 0, Label::Pos, 2), 0);
        assert!(matches!(dup, Err(Error::DuplicatePair { .. })));
    }

    proptest! {
        #[test]
        fn label_flip_mirrors_posteriors(pairs in proptest::collection::btree_set((0usize..4, 0usize..4), 1..12),
                                         signs in proptest::collection::vec(any::<bool>(), 12)) {
            let recs: Vec<_> = pairs.iter().zip(&signs).map(|(&(t, w), &s)| (t, w, if s { 1 } else { -1 })).collect();
            let m = matrix(&recs, 4);
            let a = amf_fit(&m, prior(), 10, AmfMode::Amf).unwrap();
            let b = amf_fit(&m.negated(), prior(), 10, AmfMode::Amf).unwrap();
            for (x, y) in a.posteriors().iter().zip(b.posteriors()) {
                prop_assert!((x - (1.0 - y)).abs() < 1e-12);
            }
        }
    }
}
