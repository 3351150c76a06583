//! Comparison aggregators: majority voting, AMF/EM, KOS power iteration,
//! Gibbs sampling and a particle filter.

pub mod amf;
pub mod gibbs;
pub mod kos;
pub mod majority;
pub mod particle;

pub use amf::{amf_fit, amf_run, AmfMode, AmfState};
pub use gibbs::{gibbs_marginals, gibbs_run, GibbsChain};
pub use kos::{kos_run, kos_scores};
pub use majority::{majority_vote, prior_weighted_vote, vote_sums};
pub use particle::{particle_filter_run, ParticleFilter};
