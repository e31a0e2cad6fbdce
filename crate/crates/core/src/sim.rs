//! Random staged trees and forward sampling.
//!
//! All randomness flows through [`SimRng`] (ChaCha8 from `rand_chacha` 0.3),
//! seeded explicitly so runs are reproducible across platforms.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Open01, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tree::{EventTree, FittedStagedTree, Staging};

pub type SimRng = ChaCha8Rng;

/// Generator for stream `index` under `seed`. Distinct indices give
/// independent streams.
pub fn rng_stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// How random stagings are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GenMethod {
    /// Each situation joins an existing stage with probability `q`.
    Join { q: f64 },
    /// Situations are split into `k0` nonempty stages.
    Split { k0: usize },
}

impl GenMethod {
    pub fn name(&self) -> &'static str {
        match self {
            GenMethod::Join { .. } => "join",
            GenMethod::Split { .. } => "split",
        }
    }

    pub fn q(&self) -> Option<f64> {
        match self {
            GenMethod::Join { q } => Some(*q),
            GenMethod::Split { .. } => None,
        }
    }

    pub fn k0(&self) -> Option<usize> {
        match self {
            GenMethod::Split { k0 } => Some(*k0),
            GenMethod::Join { .. } => None,
        }
    }

    pub fn staging(&self, tree: &EventTree, rng: &mut SimRng) -> Result<Staging> {
        match *self {
            GenMethod::Join { q } => random_staging_join(tree, q, rng),
            GenMethod::Split { k0 } => random_staging_split(tree, k0, rng),
        }
    }
}

impl fmt::Display for GenMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenMethod::Join { q } => write!(f, "join:{q}"),
            GenMethod::Split { k0 } => write!(f, "split:{k0}"),
        }
    }
}

impl FromStr for GenMethod {
    type Err = Error;
    /// `join:<q>` or `split:<k0>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::Invalid(format!("expected join:<q> or split:<k0>, got {s:?}")))?;
        match name.trim().to_ascii_lowercase().as_str() {
            "join" => {
                let q = arg
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad q {arg:?}")))?;
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::Invalid(format!("q must lie in [0, 1], got {q}")));
                }
                Ok(GenMethod::Join { q })
            }
            "split" => {
                let k0 = arg
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Invalid(format!("bad k0 {arg:?}")))?;
                if k0 == 0 {
                    return Err(Error::Invalid("k0 must be >= 1".into()));
                }
                Ok(GenMethod::Split { k0 })
            }
            _ => Err(Error::Invalid(format!("unknown generation method {name:?}"))),
        }
    }
}

impl TryFrom<String> for GenMethod {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GenMethod> for String {
    fn from(g: GenMethod) -> String {
        g.to_string()
    }
}

/// Parameters of one synthetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub p: usize,
    pub levels: usize,
    pub method: GenMethod,
    pub seed: u64,
}

impl GenConfig {
    /// Draws the staging and its parameters from stream 0 of `seed`.
    pub fn model(&self) -> Result<FittedStagedTree> {
        let tree = EventTree::uniform(self.p, self.levels)?;
        let mut rng = rng_stream(self.seed, 0);
        let staging = self.method.staging(&tree, &mut rng)?;
        random_parameters(&tree, &staging, &mut rng)
    }
}

/// Visits the situations of each depth in order: the first opens a stage and
/// every later one joins a uniformly chosen existing stage with probability
/// `q`, otherwise opens a new one.
pub fn random_staging_join(tree: &EventTree, q: f64, rng: &mut SimRng) -> Result<Staging> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Invalid(format!("q must lie in [0, 1], got {q}")));
    }
    let labels = (0..tree.p())
        .map(|d| {
            let m = tree.n_situations(d);
            let mut labels = Vec::with_capacity(m);
            let mut n_stages = 0;
            for _ in 0..m {
                if n_stages > 0 && rng.gen::<f64>() < q {
                    labels.push(rng.gen_range(0..n_stages));
                } else {
                    labels.push(n_stages);
                    n_stages += 1;
                }
            }
            labels
        })
        .collect();
    Staging::new(tree, labels)
}

/// Assigns each situation a uniform label in `0..k0`, redrawing a depth until
/// all `k0` labels occur. Depths with at most `k0` situations stay saturated.
pub fn random_staging_split(tree: &EventTree, k0: usize, rng: &mut SimRng) -> Result<Staging> {
    if k0 == 0 {
        return Err(Error::Invalid("k0 must be >= 1".into()));
    }
    let labels = (0..tree.p())
        .map(|d| {
            let m = tree.n_situations(d);
            if m <= k0 {
                return (0..m).collect();
            }
            loop {
                let labels: Vec<usize> = (0..m).map(|_| rng.gen_range(0..k0)).collect();
                let mut used = vec![false; k0];
                for &l in &labels {
                    used[l] = true;
                }
                if used.iter().all(|&u| u) {
                    break labels;
                }
            }
        })
        .collect();
    Staging::new(tree, labels)
}

/// A draw from the flat Dirichlet on the open simplex of dimension `k - 1`.
pub fn flat_dirichlet(k: usize, rng: &mut SimRng) -> Vec<f64> {
    let draws: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = Open01.sample(rng);
            -u.ln()
        })
        .collect();
    let total: f64 = draws.iter().sum();
    let mut v: Vec<f64> = draws.iter().map(|x| x / total).collect();
    // Renormalize once more so the sum is within rounding of 1.
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Independent flat-Dirichlet parameter vectors for every stage.
pub fn random_parameters(tree: &EventTree, staging: &Staging, rng: &mut SimRng) -> Result<FittedStagedTree> {
    let theta = (0..tree.p())
        .map(|d| {
            (0..staging.n_stages(d))
                .map(|_| flat_dirichlet(tree.cardinality(d), rng))
                .collect()
        })
        .collect();
    FittedStagedTree::new(tree.clone(), staging.clone(), theta, 0, 0.0)
}

/// Forward-samples `n` independent rows from the root to the leaves.
pub fn sample(model: &FittedStagedTree, n: usize, rng: &mut SimRng) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Invalid("sample size must be >= 1".into()));
    }
    let tree = model.tree();
    let samplers: Vec<Vec<WeightedIndex<f64>>> = model
        .theta()
        .iter()
        .map(|stages| {
            stages
                .iter()
                .map(|v| WeightedIndex::new(v).map_err(|e| Error::Numeric(e.to_string())))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let rows = (0..n)
        .map(|_| {
            let mut row = Vec::with_capacity(tree.p());
            let mut idx = 0;
            for (d, by_stage) in samplers.iter().enumerate() {
                let x = by_stage[model.staging().stage_of(d, idx)].sample(rng);
                row.push(x);
                idx = tree.child(d, idx, x);
            }
            row
        })
        .collect();
    Dataset::new(tree.variables().to_vec(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::fixtures::example_model;

    #[test]
    fn join_extremes() {
        let tree = EventTree::uniform(5, 2).unwrap();
        let mut rng = rng_stream(7, 0);
        assert_eq!(
            random_staging_join(&tree, 1.0, &mut rng).unwrap(),
            Staging::coarsest(&tree)
        );
        assert_eq!(
            random_staging_join(&tree, 0.0, &mut rng).unwrap(),
            Staging::saturated(&tree)
        );
        assert_eq!(
            random_staging_join(&tree, 1e-9, &mut rng).unwrap(),
            Staging::saturated(&tree)
        );
        assert!(random_staging_join(&tree, 1.5, &mut rng).is_err());
    }

    #[test]
    fn join_golden_partition() {
        // depth 2 of a binary tree has 4 situations
        let tree = EventTree::uniform(3, 2).unwrap();
        let mut rng = rng_stream(2024, 0);
        let s = random_staging_join(&tree, 0.9, &mut rng).unwrap();
        assert_eq!(s.labels(2), GOLDEN_JOIN_DEPTH2);
    }

    const GOLDEN_JOIN_DEPTH2: &[usize] = &[0, 0, 0, 0];

    #[test]
    fn split_cases() {
        let tree = EventTree::uniform(4, 2).unwrap();
        let mut rng = rng_stream(1, 0);
        assert_eq!(
            random_staging_split(&tree, 1, &mut rng).unwrap(),
            Staging::coarsest(&tree)
        );
        let s = random_staging_split(&tree, 2, &mut rng).unwrap();
        assert_eq!(s.labels(1), &[0, 1]);
        for seed in 0..1000 {
            let mut rng = rng_stream(seed, 3);
            let s = random_staging_split(&tree, 2, &mut rng).unwrap();
            assert_eq!(s.n_stages(3), 2, "seed {seed}");
            assert_eq!(s.n_stages(2), 2, "seed {seed}");
        }
    }

    #[test]
    fn parameters_on_open_simplex() {
        let tree = EventTree::uniform(4, 3).unwrap();
        let mut rng = rng_stream(3, 0);
        let staging = random_staging_split(&tree, 2, &mut rng).unwrap();
        let m = random_parameters(&tree, &staging, &mut rng).unwrap();
        for stages in m.theta() {
            for v in stages {
                assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            if stages.len() == 2 {
                assert_ne!(stages[0], stages[1]);
            }
        }
    }

    #[test]
    fn flat_dirichlet_mean() {
        let mut rng = rng_stream(11, 0);
        let n = 10_000;
        let mean = (0..n).map(|_| flat_dirichlet(2, &mut rng)[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn deterministic_model_gives_identical_rows() {
        let tree = EventTree::uniform(3, 2).unwrap();
        let theta = vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let m = FittedStagedTree::new(tree.clone(), Staging::coarsest(&tree), theta, 0, 0.0).unwrap();
        let d = sample(&m, 50, &mut rng_stream(0, 0)).unwrap();
        assert!(d.rows().iter().all(|r| r == &vec![1, 0, 1]));
        let one = sample(&m, 1, &mut rng_stream(0, 0)).unwrap();
        assert_eq!(one.n_rows(), 1);
        assert!(sample(&m, 0, &mut rng_stream(0, 0)).is_err());
    }

    #[test]
    fn sampling_matches_joint() {
        let m = example_model();
        let n = 100_000;
        let d = sample(&m, n, &mut rng_stream(99, 0)).unwrap();
        let joint = m.joint();
        let mut freq = vec![0usize; joint.len()];
        for r in d.rows() {
            freq[(r[0] * 2 + r[1]) * 3 + r[2]] += 1;
        }
        for (f, p) in freq.iter().zip(&joint) {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let hat = *f as f64 / n as f64;
            assert!((hat - p).abs() <= 3.0 * sigma + 1e-12, "{hat} vs {p}");
        }
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = GenConfig {
            p: 5,
            levels: 2,
            method: GenMethod::Join { q: 0.5 },
            seed: 42,
        };
        assert_eq!(cfg.model().unwrap(), cfg.model().unwrap());
        let a = sample(&cfg.model().unwrap(), 100, &mut rng_stream(42, 1)).unwrap();
        let b = sample(&cfg.model().unwrap(), 100, &mut rng_stream(42, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn method_strings() {
        assert_eq!("join:0.9".parse::<GenMethod>().unwrap(), GenMethod::Join { q: 0.9 });
        assert_eq!("split:2".parse::<GenMethod>().unwrap(), GenMethod::Split { k0: 2 });
        assert!("split:0".parse::<GenMethod>().is_err());
        assert!("join".parse::<GenMethod>().is_err());
        assert_eq!(GenMethod::Join { q: 0.5 }.to_string(), "join:0.5");
    }
}
