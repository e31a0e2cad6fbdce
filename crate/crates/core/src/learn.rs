//! Stage structure learning: hierarchical clustering of conditional vectors,
//! backward hill climbing, and the saturated baseline.
//!
//! Depths contribute independent additive terms to the BIC, so every learner
//! here works one depth at a time and scores only that depth's term.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::CountTable;
use crate::error::{Error, Result};
use crate::estimate::{fit_saturated, refit_pooled, smoothed_vector, stage_loglik, Smoothing};
use crate::hcluster::{agglomerate, Dendrogram, Linkage};
use crate::metrics::{pairwise_matrix, Metric};
use crate::tree::{EventTree, FittedStagedTree, Staging};

/// Number of stages requested at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KChoice {
    Fixed(usize),
    /// Choose by BIC over every cut of the dendrogram.
    Auto,
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Fixed(k) => write!(f, "{k}"),
            KChoice::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for KChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") || s.eq_ignore_ascii_case("na") {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
            _ => Err(Error::Invalid(format!(
                "number of stages must be >= 1 or 'auto', got {s:?}"
            ))),
        }
    }
}

/// Stage counts for variables `2..=p`.
///
/// A uniform fixed `k` is capped at each depth's number of situations; an
/// explicit per-depth list must respect it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KSpec {
    Uniform(KChoice),
    PerDepth(Vec<KChoice>),
}

impl KSpec {
    pub fn auto() -> Self {
        KSpec::Uniform(KChoice::Auto)
    }

    pub fn fixed(k: usize) -> Self {
        KSpec::Uniform(KChoice::Fixed(k))
    }

    /// Choice for situations at `depth` (>= 1).
    pub fn at(&self, tree: &EventTree, depth: usize) -> Result<KChoice> {
        let m = tree.n_situations(depth);
        match self {
            KSpec::Uniform(KChoice::Fixed(k)) => Ok(KChoice::Fixed((*k).min(m))),
            KSpec::Uniform(KChoice::Auto) => Ok(KChoice::Auto),
            KSpec::PerDepth(list) => {
                if list.len() != tree.p() - 1 {
                    return Err(Error::Invalid(format!(
                        "expected {} stage counts (one per variable after the first), got {}",
                        tree.p() - 1,
                        list.len()
                    )));
                }
                match list[depth - 1] {
                    KChoice::Fixed(k) if k > m => Err(Error::Invalid(format!(
                        "k = {k} exceeds the {m} situations of variable {}",
                        depth + 1
                    ))),
                    c => Ok(c),
                }
            }
        }
    }
}

impl fmt::Display for KSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSpec::Uniform(c) => write!(f, "{c}"),
            KSpec::PerDepth(list) => {
                let parts: Vec<String> = list.iter().map(ToString::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for KSpec {
    type Err = Error;
    /// `auto`, a single integer, or a comma-separated per-depth list.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() == 1 {
            Ok(KSpec::Uniform(parts[0].parse()?))
        } else {
            Ok(KSpec::PerDepth(parts.iter().map(|p| p.parse()).collect::<Result<_>>()?))
        }
    }
}

impl TryFrom<String> for KSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KSpec> for String {
    fn from(k: KSpec) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub metric: Metric,
    pub linkage: Linkage,
    pub kspec: KSpec,
    pub alpha: Smoothing,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            metric: Metric::TotalVariation,
            linkage: Linkage::WardD2,
            kspec: KSpec::auto(),
            alpha: Smoothing::LAPLACE,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.metric.requires_positive() && self.alpha.alpha() <= 0.0 {
            return Err(Error::Invalid(format!(
                "metric {} needs alpha > 0 so that conditional vectors are strictly positive",
                self.metric
            )));
        }
        Ok(())
    }
}

fn check_counts(counts: &CountTable, tree: &EventTree) -> Result<()> {
    if counts.n_depths() != tree.p()
        || (0..tree.p()).any(|d| {
            counts.depth(d).len() != tree.n_situations(d)
                || counts.depth(d).iter().any(|r| r.len() != tree.cardinality(d))
        })
    {
        return Err(Error::Invalid("counts were not computed on this tree".into()));
    }
    Ok(())
}

/// Smoothed conditional vector of every situation at `depth`.
pub fn conditional_vectors(counts: &CountTable, depth: usize, alpha: Smoothing) -> Result<Vec<Vec<f64>>> {
    counts
        .depth(depth)
        .iter()
        .enumerate()
        .map(|(s, row)| smoothed_vector(row, alpha).ok_or(Error::UndefinedConditional { depth, situation: s }))
        .collect()
}

/// BIC contribution of one depth under the given stage labels.
fn depth_bic(counts: &CountTable, depth: usize, labels: &[usize], n_stages: usize, alpha: Smoothing) -> Result<f64> {
    let rows = counts.depth(depth);
    let width = rows[0].len();
    let mut pooled = vec![vec![0u64; width]; n_stages];
    for (row, &l) in rows.iter().zip(labels) {
        for (t, &c) in pooled[l].iter_mut().zip(row) {
            *t += c;
        }
    }
    let mut ll = 0.0;
    for (stage, c) in pooled.iter().enumerate() {
        let theta = smoothed_vector(c, alpha).ok_or_else(|| Error::UndefinedConditional {
            depth,
            situation: labels.iter().position(|&l| l == stage).unwrap_or(0),
        })?;
        ll += stage_loglik(c, &theta).ok_or(Error::ZeroProbability { depth })?;
    }
    let penalty = (n_stages * (width - 1)) as f64 * (counts.n() as f64).ln();
    Ok(-2.0 * ll + penalty)
}

/// Number of clusters minimizing BIC among all cuts of `dendrogram`, which
/// clusters the situations at `depth`. Ties go to the smallest `k`.
pub fn select_k(dendrogram: &Dendrogram, counts: &CountTable, depth: usize, alpha: Smoothing) -> Result<usize> {
    let m = dendrogram.n_items();
    if m != counts.depth(depth).len() {
        return Err(Error::Invalid(
            "dendrogram does not cover this depth's situations".into(),
        ));
    }
    let mut best = (f64::INFINITY, 1);
    for k in 1..=m {
        let labels = dendrogram.cut(k)?;
        let bic = depth_bic(counts, depth, &labels, k, alpha)?;
        if bic < best.0 {
            best = (bic, k);
        }
    }
    Ok(best.1)
}

/// Stage labels for the situations at one depth, by clustering their
/// conditional vectors.
pub fn learn_depth(counts: &CountTable, tree: &EventTree, depth: usize, cfg: &LearnConfig) -> Result<Vec<usize>> {
    let m = tree.n_situations(depth);
    if depth == 0 || m == 1 {
        return Ok(vec![0; m]);
    }
    let vectors = conditional_vectors(counts, depth, cfg.alpha)?;
    let matrix = pairwise_matrix(&vectors, cfg.metric)?;
    let dendrogram = agglomerate(&matrix, cfg.linkage)?;
    let k = match cfg.kspec.at(tree, depth)? {
        KChoice::Fixed(k) => k,
        KChoice::Auto => select_k(&dendrogram, counts, depth, cfg.alpha)?,
    };
    dendrogram.cut(k)
}

/// Learns a staging by hierarchical clustering and refits pooled parameters.
pub fn learn_hclust(counts: &CountTable, tree: &EventTree, cfg: &LearnConfig) -> Result<FittedStagedTree> {
    cfg.validate()?;
    check_counts(counts, tree)?;
    let per_depth = for_each_depth(tree, |d| learn_depth(counts, tree, d, cfg))?;
    let staging = Staging::new(tree, per_depth)?;
    refit_pooled(counts, tree, &staging, cfg.alpha)
}

#[cfg(feature = "parallel")]
fn for_each_depth<F>(tree: &EventTree, f: F) -> Result<Vec<Vec<usize>>>
where
    F: Fn(usize) -> Result<Vec<usize>> + Sync + Send,
{
    use rayon::prelude::*;
    (0..tree.p()).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn for_each_depth<F>(tree: &EventTree, f: F) -> Result<Vec<Vec<usize>>>
where
    F: Fn(usize) -> Result<Vec<usize>>,
{
    (0..tree.p()).map(f).collect()
}

/// The saturated model.
pub fn baseline_full(counts: &CountTable, tree: &EventTree, alpha: Smoothing) -> Result<FittedStagedTree> {
    check_counts(counts, tree)?;
    fit_saturated(counts, tree, alpha)
}

struct BhcStage {
    counts: Vec<u64>,
    loglik: f64,
}

fn bhc_stage(counts: Vec<u64>, depth: usize, situation: usize, alpha: Smoothing) -> Result<BhcStage> {
    let theta = smoothed_vector(&counts, alpha).ok_or(Error::UndefinedConditional { depth, situation })?;
    let loglik = stage_loglik(&counts, &theta).ok_or(Error::ZeroProbability { depth })?;
    Ok(BhcStage { counts, loglik })
}

/// Greedy merging at one depth. Returns stage labels and the BIC change of
/// each accepted merge, in order.
fn bhc_depth(counts: &CountTable, depth: usize, alpha: Smoothing) -> Result<(Vec<usize>, Vec<f64>)> {
    let rows = counts.depth(depth);
    let m = rows.len();
    let width = rows[0].len();
    let penalty = (width - 1) as f64 * (counts.n() as f64).ln();

    // Slot i holds the stage whose smallest member is situation i.
    let mut stages: Vec<Option<BhcStage>> = rows
        .iter()
        .enumerate()
        .map(|(s, r)| bhc_stage(r.clone(), depth, s, alpha).map(Some))
        .collect::<Result<_>>()?;
    let mut owner: Vec<usize> = (0..m).collect();
    let mut deltas = Vec::new();
    let mut merged = vec![0u64; width];

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..m {
            let Some(sa) = &stages[a] else { continue };
            for (b, sb) in stages.iter().enumerate().skip(a + 1) {
                let Some(sb) = sb else { continue };
                for ((t, x), y) in merged.iter_mut().zip(&sa.counts).zip(&sb.counts) {
                    *t = x + y;
                }
                let theta =
                    smoothed_vector(&merged, alpha).ok_or(Error::UndefinedConditional { depth, situation: a })?;
                let ll = stage_loglik(&merged, &theta).ok_or(Error::ZeroProbability { depth })?;
                let delta = -2.0 * (ll - sa.loglik - sb.loglik) - penalty;
                if best.is_none_or(|(d, _, _)| delta < d) {
                    best = Some((delta, a, b));
                }
            }
        }
        match best {
            Some((delta, a, b)) if delta < 0.0 => {
                let sb = stages[b].take().expect("active stage");
                let sa = stages[a].take().expect("active stage");
                let pooled: Vec<u64> = sa.counts.iter().zip(&sb.counts).map(|(x, y)| x + y).collect();
                stages[a] = Some(bhc_stage(pooled, depth, a, alpha)?);
                for o in owner.iter_mut() {
                    if *o == b {
                        *o = a;
                    }
                }
                deltas.push(delta);
            }
            _ => break,
        }
    }
    Ok((owner, deltas))
}

/// Result of backward hill climbing with its score trace.
#[derive(Debug, Clone)]
pub struct BhcRun {
    pub model: FittedStagedTree,
    /// BIC of the saturated start followed by the BIC after each accepted
    /// merge (depths processed in ascending order).
    pub bic_trace: Vec<f64>,
}

/// Backward hill climbing from the saturated staging, merging per depth the
/// stage pair with the largest BIC decrease until none decreases it.
pub fn learn_bhc(counts: &CountTable, tree: &EventTree, alpha: Smoothing) -> Result<FittedStagedTree> {
    Ok(learn_bhc_traced(counts, tree, alpha)?.model)
}

pub fn learn_bhc_traced(counts: &CountTable, tree: &EventTree, alpha: Smoothing) -> Result<BhcRun> {
    check_counts(counts, tree)?;
    let saturated = fit_saturated(counts, tree, alpha)?;
    let start = crate::estimate::score_bic(&saturated, counts)?.bic;
    let results = for_each_depth_traced(tree, |d| {
        if tree.n_situations(d) == 1 {
            Ok((vec![0], Vec::new()))
        } else {
            bhc_depth(counts, d, alpha)
        }
    })?;
    let mut trace = vec![start];
    let mut labels = Vec::with_capacity(tree.p());
    for (l, deltas) in results {
        for delta in deltas {
            let last = *trace.last().expect("nonempty");
            trace.push(last + delta);
        }
        labels.push(l);
    }
    let staging = Staging::new(tree, labels)?;
    Ok(BhcRun {
        model: refit_pooled(counts, tree, &staging, alpha)?,
        bic_trace: trace,
    })
}

type DepthOutcome = (Vec<usize>, Vec<f64>);

#[cfg(feature = "parallel")]
fn for_each_depth_traced<F>(tree: &EventTree, f: F) -> Result<Vec<DepthOutcome>>
where
    F: Fn(usize) -> Result<DepthOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    (0..tree.p()).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn for_each_depth_traced<F>(tree: &EventTree, f: F) -> Result<Vec<DepthOutcome>>
where
    F: Fn(usize) -> Result<DepthOutcome>,
{
    (0..tree.p()).map(f).collect()
}
