//! Browser bindings. Each export takes plain strings and numbers and returns
//! a JSON document; the `*_json` functions hold the logic so they can be
//! exercised without a JavaScript host.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sevt::{
    agglomerate, baseline_full, count_transitions, hamming_distance, learn_hclust, pairwise_matrix, rng_stream, sample,
    score_bic, GenConfig, GenMethod, KSpec, LearnConfig, Linkage, Merge, Metric, Smoothing, Staging,
};

type Res<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Parses whitespace- or comma-separated nonnegative weights and scales them
/// to sum to one.
fn parse_vector(text: &str) -> Res<Vec<f64>> {
    let raw = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Res<Vec<f64>>>()?;
    if raw.len() < 2 {
        return Err("a vector needs at least two entries".into());
    }
    if raw.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err("entries must be finite and nonnegative".into());
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err("entries must not all be zero".into());
    }
    Ok(raw.into_iter().map(|x| x / total).collect())
}

#[derive(Serialize)]
struct MetricValue {
    name: String,
    value: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct Comparison {
    p: Vec<f64>,
    q: Vec<f64>,
    metrics: Vec<MetricValue>,
}

pub fn compare_json(p: &str, q: &str) -> Res<String> {
    let (p, q) = (parse_vector(p)?, parse_vector(q)?);
    if p.len() != q.len() {
        return Err(format!("vectors have {} and {} entries", p.len(), q.len()));
    }
    let metrics = Metric::ALL
        .iter()
        .map(|m| match m.eval(&p, &q) {
            Ok(v) => MetricValue {
                name: m.to_string(),
                value: Some(v),
                note: None,
            },
            Err(e) => MetricValue {
                name: m.to_string(),
                value: None,
                note: Some(e.to_string()),
            },
        })
        .collect();
    serde_json::to_string(&Comparison { p, q, metrics }).map_err(err)
}

#[derive(Serialize)]
struct Clustering {
    n: usize,
    merges: Vec<Merge>,
}

/// One vector per line.
pub fn cluster_json(vectors: &str, metric: &str, linkage: &str) -> Res<String> {
    let rows = vectors
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_vector)
        .collect::<Res<Vec<_>>>()?;
    if rows.is_empty() {
        return Err("no vectors given".into());
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err("all vectors must have the same length".into());
    }
    let metric: Metric = metric.parse().map_err(err)?;
    let linkage: Linkage = linkage.parse().map_err(err)?;
    let matrix = pairwise_matrix(&rows, metric).map_err(err)?;
    let dendrogram = agglomerate(&matrix, linkage).map_err(err)?;
    serde_json::to_string(&Clustering {
        n: rows.len(),
        merges: dendrogram.merges().to_vec(),
    })
    .map_err(err)
}

#[derive(Serialize)]
struct Recovery {
    truth: Vec<Vec<usize>>,
    learned: Vec<Vec<usize>>,
    hd: usize,
    hd_saturated: usize,
    bic_learned: f64,
    bic_saturated: f64,
}

/// Draws a binary staged tree, samples `n` rows and learns a staging back.
#[allow(clippy::too_many_arguments)]
pub fn recover_json(p: usize, gen: &str, n: usize, seed: u64, metric: &str, linkage: &str, k: &str) -> Res<String> {
    if !(2..=10).contains(&p) {
        return Err("p must lie between 2 and 10 in the demo".into());
    }
    if n == 0 || n > 200_000 {
        return Err("n must lie between 1 and 200000 in the demo".into());
    }
    let method: GenMethod = gen.parse().map_err(err)?;
    let config = GenConfig {
        p,
        levels: 2,
        method,
        seed,
    };
    let truth = config.model().map_err(err)?;
    let data = sample(&truth, n, &mut rng_stream(seed, 1)).map_err(err)?;
    let tree = truth.tree();
    let counts = count_transitions(&data, tree).map_err(err)?;
    let cfg = LearnConfig {
        metric: metric.parse().map_err(err)?,
        linkage: linkage.parse().map_err(err)?,
        kspec: k.parse::<KSpec>().map_err(err)?,
        alpha: Smoothing::LAPLACE,
    };
    let learned = learn_hclust(&counts, tree, &cfg).map_err(err)?;
    let full = baseline_full(&counts, tree, cfg.alpha).map_err(err)?;
    let out = Recovery {
        truth: truth.staging().all_labels().to_vec(),
        learned: learned.staging().all_labels().to_vec(),
        hd: hamming_distance(learned.staging(), truth.staging()).map_err(err)?,
        hd_saturated: hamming_distance(&Staging::saturated(tree), truth.staging()).map_err(err)?,
        bic_learned: score_bic(&learned, &counts).map_err(err)?.bic,
        bic_saturated: score_bic(&full, &counts).map_err(err)?.bic,
    };
    serde_json::to_string(&out).map_err(err)
}

/// All six dissimilarities between two weight vectors.
#[wasm_bindgen]
pub fn compare(p: &str, q: &str) -> Result<String, JsError> {
    compare_json(p, q).map_err(|e| JsError::new(&e))
}

/// Merge history of the given vectors.
#[wasm_bindgen]
pub fn cluster(vectors: &str, metric: &str, linkage: &str) -> Result<String, JsError> {
    cluster_json(vectors, metric, linkage).map_err(|e| JsError::new(&e))
}

/// True and recovered stagings of a simulated binary tree.
#[wasm_bindgen]
pub fn recover(
    p: usize,
    gen: &str,
    n: usize,
    seed: u32,
    metric: &str,
    linkage: &str,
    k: &str,
) -> Result<String, JsError> {
    recover_json(p, gen, n, u64::from(seed), metric, linkage, k).map_err(|e| JsError::new(&e))
}
