//! Event trees, stagings and fitted staged tree models.
//!
//! Situations (internal vertices) are addressed by `(depth, index)`, where the
//! index enumerates the contexts `(x_1, .., x_depth)` lexicographically in the
//! level order of each variable. The situation at depth `d` governs variable
//! `d` (zero-based), so a tree over `p` variables has depths `0..p` of
//! situations and `prod |X_j|` leaves.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A categorical variable and its ordered levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub levels: Vec<String>,
}

impl VariableSpec {
    pub fn new<S: Into<String>, L: Into<String>>(name: S, levels: impl IntoIterator<Item = L>) -> Self {
        Self {
            name: name.into(),
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, value: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == value)
    }
}

/// An X-compatible event tree over an ordered list of variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTree {
    variables: Vec<VariableSpec>,
    widths: Vec<usize>,
}

impl EventTree {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Schema("at least one variable is required".into()));
        }
        let mut names = HashSet::new();
        for v in &variables {
            if v.levels.len() < 2 {
                return Err(Error::Schema(format!(
                    "variable {:?} has {} level(s); at least 2 are required",
                    v.name,
                    v.levels.len()
                )));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::Schema(format!("duplicate variable name {:?}", v.name)));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = v.levels.iter().find(|l| !seen.insert(l.as_str())) {
                return Err(Error::Schema(format!(
                    "variable {:?} lists level {:?} twice",
                    v.name, dup
                )));
            }
        }
        let mut widths = Vec::with_capacity(variables.len());
        let mut w = 1usize;
        for v in &variables {
            widths.push(w);
            w = w
                .checked_mul(v.cardinality())
                .ok_or_else(|| Error::Schema("event tree is too large to enumerate".into()))?;
        }
        Ok(Self { variables, widths })
    }

    /// Convenience constructor for `p` variables named `X1..Xp` with levels `0..k`.
    pub fn uniform(p: usize, levels: usize) -> Result<Self> {
        let vars = (1..=p)
            .map(|i| VariableSpec::new(format!("X{i}"), (0..levels).map(|l| l.to_string())))
            .collect();
        Self::new(vars)
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    /// Number of variables, which is also the number of situation depths.
    pub fn p(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, depth: usize) -> usize {
        self.variables[depth].cardinality()
    }

    /// Number of situations at `depth`.
    pub fn n_situations(&self, depth: usize) -> usize {
        self.widths[depth]
    }

    pub fn n_leaves(&self) -> usize {
        self.widths[self.p() - 1] * self.cardinality(self.p() - 1)
    }

    /// Total number of situations over all depths.
    pub fn n_internal(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Level indices `(x_1, .., x_depth)` of the situation at `(depth, index)`.
    pub fn situation_context(&self, depth: usize, index: usize) -> Result<Vec<usize>> {
        if depth >= self.p() {
            return Err(Error::OutOfRange(format!(
                "depth {depth} (tree has depths 0..{})",
                self.p()
            )));
        }
        if index >= self.widths[depth] {
            return Err(Error::OutOfRange(format!(
                "situation {index} at depth {depth} (only {} situations)",
                self.widths[depth]
            )));
        }
        let mut ctx = vec![0; depth];
        let mut rest = index;
        for j in (0..depth).rev() {
            let c = self.cardinality(j);
            ctx[j] = rest % c;
            rest /= c;
        }
        Ok(ctx)
    }

    /// Inverse of [`situation_context`](Self::situation_context).
    pub fn situation_index(&self, context: &[usize]) -> Result<usize> {
        if context.len() >= self.p() {
            return Err(Error::OutOfRange(format!(
                "context of length {} exceeds the last situation depth {}",
                context.len(),
                self.p() - 1
            )));
        }
        let mut idx = 0;
        for (j, &x) in context.iter().enumerate() {
            if x >= self.cardinality(j) {
                return Err(Error::OutOfRange(format!(
                    "level {x} of variable {:?}",
                    self.variables[j].name
                )));
            }
            idx = idx * self.cardinality(j) + x;
        }
        Ok(idx)
    }

    /// Index at depth `depth + 1` of the child reached by taking `value`.
    #[inline]
    pub fn child(&self, depth: usize, index: usize, value: usize) -> usize {
        index * self.cardinality(depth) + value
    }

    pub(crate) fn check_outcome(&self, outcome: &[usize]) -> Result<()> {
        if outcome.len() != self.p() {
            return Err(Error::OutOfRange(format!(
                "outcome has {} values, tree has {} variables",
                outcome.len(),
                self.p()
            )));
        }
        for (j, &x) in outcome.iter().enumerate() {
            if x >= self.cardinality(j) {
                return Err(Error::OutOfRange(format!(
                    "level {x} of variable {:?}",
                    self.variables[j].name
                )));
            }
        }
        Ok(())
    }
}

/// Per-depth assignment of situations to stages.
///
/// Labels are canonical: at each depth they are `0, 1, ..` in order of first
/// occurrence, so structurally equal stagings compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Staging {
    labels: Vec<Vec<usize>>,
}

fn canonicalize(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

impl Staging {
    /// Builds a staging from arbitrary per-depth labels; labels are relabelled
    /// canonically.
    pub fn new(tree: &EventTree, labels: Vec<Vec<usize>>) -> Result<Self> {
        if labels.len() != tree.p() {
            return Err(Error::Invalid(format!(
                "staging has {} depths, tree has {}",
                labels.len(),
                tree.p()
            )));
        }
        for (d, l) in labels.iter().enumerate() {
            if l.len() != tree.n_situations(d) {
                return Err(Error::Invalid(format!(
                    "staging depth {d} has {} labels for {} situations",
                    l.len(),
                    tree.n_situations(d)
                )));
            }
        }
        Ok(Self {
            labels: labels.iter().map(|l| canonicalize(l)).collect(),
        })
    }

    /// The finest staging: every situation in its own stage.
    pub fn saturated(tree: &EventTree) -> Self {
        Self {
            labels: (0..tree.p()).map(|d| (0..tree.n_situations(d)).collect()).collect(),
        }
    }

    /// The coarsest staging: one stage per depth.
    pub fn coarsest(tree: &EventTree) -> Self {
        Self {
            labels: (0..tree.p()).map(|d| vec![0; tree.n_situations(d)]).collect(),
        }
    }

    pub fn n_depths(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self, depth: usize) -> &[usize] {
        &self.labels[depth]
    }

    pub fn all_labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn stage_of(&self, depth: usize, situation: usize) -> usize {
        self.labels[depth][situation]
    }

    pub fn n_stages(&self, depth: usize) -> usize {
        self.labels[depth].iter().max().map_or(0, |m| m + 1)
    }

    pub fn total_stages(&self) -> usize {
        (0..self.n_depths()).map(|d| self.n_stages(d)).sum()
    }

    /// Replaces the labels of one depth, relabelling them canonically.
    pub fn set_depth(&mut self, depth: usize, labels: &[usize]) -> Result<()> {
        if labels.len() != self.labels[depth].len() {
            return Err(Error::Invalid(format!(
                "depth {depth} expects {} labels, got {}",
                self.labels[depth].len(),
                labels.len()
            )));
        }
        self.labels[depth] = canonicalize(labels);
        Ok(())
    }

    /// Blocks of situation indices at `depth`, ordered by first member.
    pub fn stage_partition(&self, depth: usize) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_stages(depth)];
        for (s, &l) in self.labels[depth].iter().enumerate() {
            blocks[l].push(s);
        }
        blocks
    }

    /// Whether the staging has the same shape as `tree`.
    pub fn fits(&self, tree: &EventTree) -> bool {
        self.labels.len() == tree.p()
            && self
                .labels
                .iter()
                .enumerate()
                .all(|(d, l)| l.len() == tree.n_situations(d))
    }
}

/// Staging plus one conditional probability vector per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedStagedTree {
    tree: EventTree,
    staging: Staging,
    theta: Vec<Vec<Vec<f64>>>,
    n: u64,
    alpha: f64,
}

const SUM_TOL: f64 = 1e-12;

impl FittedStagedTree {
    /// `theta[depth][stage]` is the distribution of variable `depth` in that
    /// stage. Zero entries are accepted so that degenerate synthetic models can
    /// be expressed.
    pub fn new(tree: EventTree, staging: Staging, theta: Vec<Vec<Vec<f64>>>, n: u64, alpha: f64) -> Result<Self> {
        if !staging.fits(&tree) {
            return Err(Error::Invalid("staging does not match the tree".into()));
        }
        if theta.len() != tree.p() {
            return Err(Error::Invalid("theta must have one entry per depth".into()));
        }
        for (d, stages) in theta.iter().enumerate() {
            if stages.len() != staging.n_stages(d) {
                return Err(Error::Invalid(format!(
                    "depth {d} has {} stages but {} parameter vectors",
                    staging.n_stages(d),
                    stages.len()
                )));
            }
            for v in stages {
                if v.len() != tree.cardinality(d) {
                    return Err(Error::Invalid(format!(
                        "depth {d} vectors must have length {}",
                        tree.cardinality(d)
                    )));
                }
                if v.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return Err(Error::Invalid(format!("depth {d}: probability outside [0, 1]")));
                }
                let s: f64 = v.iter().sum();
                if (s - 1.0).abs() > SUM_TOL {
                    return Err(Error::Invalid(format!("depth {d}: probabilities sum to {s}, not 1")));
                }
            }
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!(
                "alpha must be a nonnegative number, got {alpha}"
            )));
        }
        Ok(Self {
            tree,
            staging,
            theta,
            n,
            alpha,
        })
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn staging(&self) -> &Staging {
        &self.staging
    }

    pub fn theta(&self) -> &[Vec<Vec<f64>>] {
        &self.theta
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Conditional distribution of the next variable at a situation.
    pub fn situation_vector(&self, depth: usize, situation: usize) -> &[f64] {
        &self.theta[depth][self.staging.stage_of(depth, situation)]
    }

    /// Probability of a full assignment: the product of edge parameters along
    /// its root-to-leaf path.
    pub fn path_probability(&self, outcome: &[usize]) -> Result<f64> {
        self.tree.check_outcome(outcome)?;
        let mut prob = 1.0;
        let mut idx = 0;
        for (d, &x) in outcome.iter().enumerate() {
            prob *= self.situation_vector(d, idx)[x];
            idx = self.tree.child(d, idx, x);
        }
        Ok(prob)
    }

    /// Natural log of [`path_probability`](Self::path_probability), summed in
    /// the log domain.
    pub fn log_path_probability(&self, outcome: &[usize]) -> Result<f64> {
        self.tree.check_outcome(outcome)?;
        let mut lp = 0.0;
        let mut idx = 0;
        for (d, &x) in outcome.iter().enumerate() {
            lp += self.situation_vector(d, idx)[x].ln();
            idx = self.tree.child(d, idx, x);
        }
        Ok(lp)
    }

    /// All leaf probabilities in lexicographic outcome order.
    pub fn joint(&self) -> Vec<f64> {
        let mut probs = vec![1.0];
        for d in 0..self.tree.p() {
            let mut next = Vec::with_capacity(probs.len() * self.tree.cardinality(d));
            for (s, &p) in probs.iter().enumerate() {
                next.extend(self.situation_vector(d, s).iter().map(|&t| p * t));
            }
            probs = next;
        }
        probs
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            variables: self.tree.variables().to_vec(),
            staging: self.staging.all_labels().to_vec(),
            theta: self
                .theta
                .iter()
                .map(|stages| stages.iter().cloned().enumerate().collect())
                .collect(),
            n: self.n,
            alpha: self.alpha,
            score: None,
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        let tree = EventTree::new(doc.variables)?;
        let staging = Staging::new(&tree, doc.staging.clone())?;
        if doc.theta.len() != tree.p() {
            return Err(Error::Invalid("theta must have one entry per depth".into()));
        }
        // Labels in the file may be non-canonical; map each canonical stage back
        // to the label that introduced it.
        let mut theta = Vec::with_capacity(tree.p());
        for (d, by_label) in doc.theta.into_iter().enumerate() {
            let mut order = Vec::new();
            let mut seen = HashSet::new();
            for &l in &doc.staging[d] {
                if seen.insert(l) {
                    order.push(l);
                }
            }
            let mut stages = Vec::with_capacity(order.len());
            for l in order {
                let v = by_label
                    .get(&l)
                    .ok_or_else(|| Error::Invalid(format!("depth {d}: no parameters for stage label {l}")))?;
                stages.push(v.clone());
            }
            theta.push(stages);
        }
        Self::new(tree, staging, theta, doc.n, doc.alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

/// On-disk form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub variables: Vec<VariableSpec>,
    pub staging: Vec<Vec<usize>>,
    pub theta: Vec<BTreeMap<usize, Vec<f64>>>,
    pub n: u64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreBlock>,
}

/// Optional score block attached to a serialized model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBlock {
    pub loglik: f64,
    pub n_params: u64,
    pub bic: f64,
}
