//! Smoothed parameter estimation, log-likelihood and BIC.
//!
//! BIC is minimized everywhere in this crate.

use serde::{Deserialize, Serialize};

use crate::data::{pool_counts, CountTable};
use crate::error::{Error, Result};
use crate::tree::{EventTree, FittedStagedTree, ScoreBlock, Staging};

/// Additive smoothing constant: 0 is maximum likelihood, 1 Laplace, 0.5 Jeffreys.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Smoothing(f64);

impl Smoothing {
    pub const MLE: Smoothing = Smoothing(0.0);
    pub const LAPLACE: Smoothing = Smoothing(1.0);
    pub const JEFFREYS: Smoothing = Smoothing(0.5);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha >= 0.0 {
            Ok(Smoothing(alpha))
        } else {
            Err(Error::Invalid(format!("smoothing alpha must be >= 0, got {alpha}")))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::LAPLACE
    }
}

/// Log-likelihood, parameter count and BIC of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub loglik: f64,
    pub n_params: u64,
    pub n: u64,
    pub bic: f64,
}

impl ModelScore {
    pub fn new(loglik: f64, n_params: u64, n: u64) -> Self {
        let bic = -2.0 * loglik + n_params as f64 * (n as f64).ln();
        Self {
            loglik,
            n_params,
            n,
            bic,
        }
    }

    pub fn block(&self) -> ScoreBlock {
        ScoreBlock {
            loglik: self.loglik,
            n_params: self.n_params,
            bic: self.bic,
        }
    }
}

/// `(n_x + alpha) / (sum n + alpha * |X|)` for each value `x`.
///
/// `None` when the row is empty and `alpha` is zero.
pub fn smoothed_vector(counts: &[u64], alpha: Smoothing) -> Option<Vec<f64>> {
    let a = alpha.alpha();
    let total = counts.iter().sum::<u64>() as f64 + a * counts.len() as f64;
    if total <= 0.0 {
        return None;
    }
    Some(counts.iter().map(|&c| (c as f64 + a) / total).collect())
}

/// Saturated fit: every situation is its own stage.
pub fn fit_saturated(counts: &CountTable, tree: &EventTree, alpha: Smoothing) -> Result<FittedStagedTree> {
    refit_pooled(counts, tree, &Staging::saturated(tree), alpha)
}

/// Fits one parameter vector per stage from the pooled counts of its members.
pub fn refit_pooled(
    counts: &CountTable,
    tree: &EventTree,
    staging: &Staging,
    alpha: Smoothing,
) -> Result<FittedStagedTree> {
    if !staging.fits(tree) || counts.n_depths() != tree.p() {
        return Err(Error::Invalid("counts, staging and tree disagree in shape".into()));
    }
    let pooled = pool_counts(counts, staging);
    let theta = pooled
        .iter()
        .enumerate()
        .map(|(d, stages)| {
            stages
                .iter()
                .enumerate()
                .map(|(stage, c)| {
                    smoothed_vector(c, alpha).ok_or_else(|| Error::UndefinedConditional {
                        depth: d,
                        situation: staging.labels(d).iter().position(|&l| l == stage).unwrap_or(0),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    FittedStagedTree::new(tree.clone(), staging.clone(), theta, counts.n(), alpha.alpha())
}

/// `sum count * ln(theta)` over one stage; zero counts contribute nothing.
pub(crate) fn stage_loglik(counts: &[u64], theta: &[f64]) -> Option<f64> {
    let mut ll = 0.0;
    for (&c, &t) in counts.iter().zip(theta) {
        if c > 0 {
            if t <= 0.0 {
                return None;
            }
            ll += c as f64 * t.ln();
        }
    }
    Some(ll)
}

/// Log-likelihood of the raw counts under the model's (possibly smoothed)
/// parameters.
pub fn log_likelihood(model: &FittedStagedTree, counts: &CountTable) -> Result<f64> {
    let tree = model.tree();
    if counts.n_depths() != tree.p() || (0..tree.p()).any(|d| counts.depth(d).len() != tree.n_situations(d)) {
        return Err(Error::Invalid("counts were not computed on the model's tree".into()));
    }
    let pooled = pool_counts(counts, model.staging());
    let mut ll = 0.0;
    for (d, stages) in pooled.iter().enumerate() {
        for (c, t) in stages.iter().zip(&model.theta()[d]) {
            ll += stage_loglik(c, t).ok_or(Error::ZeroProbability { depth: d })?;
        }
    }
    Ok(ll)
}

/// `sum over depths of (#stages) * (|X| - 1)`.
pub fn n_free_params(staging: &Staging, tree: &EventTree) -> u64 {
    (0..tree.p())
        .map(|d| (staging.n_stages(d) * (tree.cardinality(d) - 1)) as u64)
        .sum()
}

pub fn score_bic(model: &FittedStagedTree, counts: &CountTable) -> Result<ModelScore> {
    if counts.n() == 0 {
        return Err(Error::Invalid("BIC needs at least one observation".into()));
    }
    let ll = log_likelihood(model, counts)?;
    Ok(ModelScore::new(
        ll,
        n_free_params(model.staging(), model.tree()),
        counts.n(),
    ))
}
