use crate::model::{prior_log_odds, LabelMatrix, Prediction, Prior};
use crate::sbic::WorkerEstimate;

/// Per-task sums of ±1 votes.
pub fn vote_sums(matrix: &LabelMatrix) -> Vec<f64> {
    (0..matrix.num_tasks()).map(|i| matrix.task_labels(i).iter().map(|(_, x)| x.sign()).sum()).collect()
}

/// Sign of the vote sum; ties broken by a seeded coin. The vote sums are
/// kept as the per-task score.
pub fn majority_vote(matrix: &LabelMatrix, tie_seed: u64) -> Prediction {
    Prediction::from_scores(vote_sums(matrix), tie_seed)
}

/// Every label weighted by the log-odds of the prior mean accuracy,
/// `log(α / β)`, on top of the class-prior log-odds.
///
/// Labels are summed per task in arrival order so the result matches the
/// streaming aggregators bit for bit when no worker has more than one label.
pub fn prior_weighted_vote(matrix: &LabelMatrix, prior: &Prior, tie_seed: u64) -> Prediction {
    let weight = WorkerEstimate { p_bar: prior.alpha / (prior.alpha + prior.beta), support: 0 }.log_weight();
    let z0 = prior_log_odds(prior);
    let scores = (0..matrix.num_tasks())
        .map(|i| matrix.task_labels(i).iter().fold(z0, |z, (_, x)| z + x.sign() * weight))
        .collect();
    Prediction::from_scores(scores, tie_seed)
}
