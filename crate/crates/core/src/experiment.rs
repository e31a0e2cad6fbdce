//! Simulation grid and classification protocol runners.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classify::{evaluate, train};
use crate::data::{count_transitions, CountTable, Dataset};
use crate::error::{Error, Result};
use crate::estimate::{score_bic, ModelScore, Smoothing};
use crate::eval::{hamming_distance, median, relative_bic, relative_hd};
use crate::hcluster::Linkage;
use crate::learn::{baseline_full, learn_bhc, learn_hclust, KSpec, LearnConfig};
use crate::metrics::Metric;
use crate::sim::{rng_stream, sample, GenConfig, GenMethod};
use crate::tree::{FittedStagedTree, Staging};

fn default_methods() -> Vec<GenMethod> {
    vec![
        GenMethod::Join { q: 0.5 },
        GenMethod::Join { q: 0.9 },
        GenMethod::Split { k0: 2 },
    ]
}

fn default_n() -> Vec<usize> {
    vec![128, 512, 2048, 8192]
}

fn default_replications() -> usize {
    20
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_linkages() -> Vec<Linkage> {
    Linkage::ALL.to_vec()
}

fn default_kspecs() -> Vec<KSpec> {
    vec![KSpec::fixed(2), KSpec::auto()]
}

fn default_bhc_max_p() -> usize {
    7
}

fn default_levels() -> usize {
    2
}

fn default_alpha() -> Smoothing {
    Smoothing::LAPLACE
}

/// Simulation grid. Every field except `p` has a default in the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<GenMethod>,
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_linkages")]
    pub linkages: Vec<Linkage>,
    #[serde(default = "default_kspecs")]
    pub kspecs: Vec<KSpec>,
    #[serde(default = "default_bhc_max_p")]
    pub bhc_max_p: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_alpha")]
    pub alpha: Smoothing,
    /// Emit the row skeleton without generating data or fitting.
    #[serde(default)]
    pub dry_run: bool,
}

impl GridSpec {
    /// p in {5, 7, 9, 11}, both join probabilities and the two-stage split,
    /// four sample sizes, 48 learner configurations.
    pub fn full_scale(replications: usize) -> Self {
        Self {
            p: vec![5, 7, 9, 11],
            methods: default_methods(),
            n: default_n(),
            replications,
            metrics: default_metrics(),
            linkages: default_linkages(),
            kspecs: default_kspecs(),
            bhc_max_p: default_bhc_max_p(),
            seed: 0,
            levels: default_levels(),
            alpha: default_alpha(),
            dry_run: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("p", self.p.is_empty()),
            ("methods", self.methods.is_empty()),
            ("n", self.n.is_empty()),
            ("metrics", self.metrics.is_empty()),
            ("linkages", self.linkages.is_empty()),
            ("kspecs", self.kspecs.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Invalid(format!("grid field {name} is empty")));
        }
        if self.replications == 0 {
            return Err(Error::Invalid("replications must be >= 1".into()));
        }
        if self.p.iter().any(|&p| p < 2) {
            return Err(Error::Invalid("every p must be >= 2".into()));
        }
        if self.n.contains(&0) {
            return Err(Error::Invalid("sample sizes must be >= 1".into()));
        }
        if self.levels < 2 {
            return Err(Error::Invalid("levels must be >= 2".into()));
        }
        for m in &self.methods {
            if let GenMethod::Join { q } = m {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(Error::Invalid(format!("join probability must lie in (0, 1], got {q}")));
                }
            }
        }
        for &metric in &self.metrics {
            LearnConfig {
                metric,
                linkage: Linkage::WardD2,
                kspec: KSpec::auto(),
                alpha: self.alpha,
            }
            .validate()?;
        }
        Ok(())
    }

    /// Learner configurations in metric, linkage, kspec order.
    pub fn learner_configs(&self) -> Vec<LearnConfig> {
        let mut out = Vec::new();
        for &metric in &self.metrics {
            for &linkage in &self.linkages {
                for kspec in &self.kspecs {
                    out.push(LearnConfig {
                        metric,
                        linkage,
                        kspec: kspec.clone(),
                        alpha: self.alpha,
                    });
                }
            }
        }
        out
    }
}

/// One CSV row: a learner configuration or a baseline fitted on one dataset.
/// Baselines use `full` or `bhc` as metric and leave linkage and kspec empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub p: usize,
    pub gen_method: String,
    pub q: Option<f64>,
    pub k0: Option<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub rep: usize,
    pub metric: String,
    pub linkage: String,
    pub kspec: String,
    pub bic: Option<f64>,
    pub hd_truth: Option<usize>,
    pub delta_bic_vs_full: Option<f64>,
    pub delta_hd_vs_full: Option<f64>,
    pub delta_bic_vs_bhc: Option<f64>,
    pub delta_hd_vs_bhc: Option<f64>,
    pub time_s: Option<f64>,
    pub seed: u64,
    pub timestamp: u64,
    pub error: String,
}

impl ResultRow {
    pub fn is_baseline(&self) -> bool {
        self.linkage.is_empty()
    }
}

/// Median of each index per (p, method, N; metric, linkage, kspec) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub p: usize,
    pub gen_method: String,
    pub q: Option<f64>,
    pub k0: Option<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub linkage: String,
    pub kspec: String,
    pub reps: usize,
    pub bic: Option<f64>,
    pub hd_truth: Option<f64>,
    pub delta_bic_vs_full: Option<f64>,
    pub delta_hd_vs_full: Option<f64>,
    pub delta_bic_vs_bhc: Option<f64>,
    pub delta_hd_vs_bhc: Option<f64>,
    pub time_s: Option<f64>,
    pub undefined_hd_vs_full: usize,
    pub undefined_hd_vs_bhc: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// Seed of one dataset, a fixed mix of the master seed and its cell
/// coordinates. `simulate --seed` with this value regenerates the dataset.
pub fn dataset_seed(master: u64, p: usize, method: &GenMethod, n: usize, rep: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let method_code = match method {
        GenMethod::Join { q } => q.to_bits(),
        GenMethod::Split { k0 } => (1u64 << 63) | *k0 as u64,
    };
    [p as u64, method_code, n as u64, rep as u64]
        .iter()
        .fold(mix(master), |h, &v| mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ v))
}

/// A synthetic model and a sample of size `n` from it: the model comes from
/// stream 0 of `seed` and the data from stream 1.
pub fn simulate(config: &GenConfig, n: usize) -> Result<(FittedStagedTree, Dataset)> {
    let model = config.model()?;
    let data = sample(&model, n, &mut rng_stream(config.seed, 1))?;
    Ok((model, data))
}

struct Cell {
    p: usize,
    method: GenMethod,
    n: usize,
    rep: usize,
    seed: u64,
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

struct Fitted {
    staging: Staging,
    score: ModelScore,
    time_s: f64,
}

fn fit_row<F>(counts: &CountTable, fit: F) -> Result<Fitted>
where
    F: FnOnce() -> Result<FittedStagedTree>,
{
    let (model, time_s) = timed(fit);
    let model = model?;
    let score = score_bic(&model, counts)?;
    Ok(Fitted {
        staging: model.staging().clone(),
        score,
        time_s,
    })
}

fn run_cell(spec: &GridSpec, cell: &Cell, configs: &[LearnConfig]) -> Vec<ResultRow> {
    let with_bhc = cell.p <= spec.bhc_max_p;
    let blank = |metric: &str, linkage: &str, kspec: &str| ResultRow {
        p: cell.p,
        gen_method: cell.method.name().to_string(),
        q: cell.method.q(),
        k0: cell.method.k0(),
        n: cell.n,
        rep: cell.rep,
        metric: metric.to_string(),
        linkage: linkage.to_string(),
        kspec: kspec.to_string(),
        bic: None,
        hd_truth: None,
        delta_bic_vs_full: None,
        delta_hd_vs_full: None,
        delta_bic_vs_bhc: None,
        delta_hd_vs_bhc: None,
        time_s: None,
        seed: cell.seed,
        timestamp: 0,
        error: String::new(),
    };
    let mut skeleton: Vec<ResultRow> = configs
        .iter()
        .map(|c| blank(c.metric.name(), c.linkage.name(), &c.kspec.to_string()))
        .collect();
    skeleton.push(blank("full", "", ""));
    if with_bhc {
        skeleton.push(blank("bhc", "", ""));
    }
    if spec.dry_run {
        return skeleton;
    }

    let prepared = (|| -> Result<_> {
        let config = GenConfig {
            p: cell.p,
            levels: spec.levels,
            method: cell.method,
            seed: cell.seed,
        };
        let (truth, data) = simulate(&config, cell.n)?;
        let tree = truth.tree().clone();
        let counts = count_transitions(&data, &tree)?;
        Ok((truth.staging().clone(), tree, counts))
    })();
    let (truth, tree, counts) = match prepared {
        Ok(x) => x,
        Err(e) => {
            let stamp = unix_time();
            for row in &mut skeleton {
                row.error = e.to_string();
                row.timestamp = stamp;
            }
            return skeleton;
        }
    };

    let full = fit_row(&counts, || baseline_full(&counts, &tree, spec.alpha));
    let bhc = with_bhc.then(|| fit_row(&counts, || learn_bhc(&counts, &tree, spec.alpha)));

    let fill = |row: &mut ResultRow, fitted: &Result<Fitted>| {
        row.timestamp = unix_time();
        let f = match fitted {
            Ok(f) => f,
            Err(e) => {
                row.error = e.to_string();
                return;
            }
        };
        let result = (|| -> Result<()> {
            row.bic = Some(f.score.bic);
            row.time_s = Some(f.time_s);
            row.hd_truth = Some(hamming_distance(&f.staging, &truth)?);
            if let Ok(b) = &full {
                row.delta_bic_vs_full = Some(relative_bic(&f.score, &b.score)?);
                row.delta_hd_vs_full = relative_hd(&f.staging, &b.staging, &truth)?;
            }
            if let Some(Ok(b)) = &bhc {
                row.delta_bic_vs_bhc = Some(relative_bic(&f.score, &b.score)?);
                row.delta_hd_vs_bhc = relative_hd(&f.staging, &b.staging, &truth)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            row.error = e.to_string();
        }
    };

    let n_cfg = configs.len();
    for (row, cfg) in skeleton.iter_mut().zip(configs) {
        let fitted = fit_row(&counts, || learn_hclust(&counts, &tree, cfg));
        fill(row, &fitted);
    }
    fill(&mut skeleton[n_cfg], &full);
    if let Some(b) = &bhc {
        fill(&mut skeleton[n_cfg + 1], b);
    }
    skeleton
}

/// Runs every replication of every cell. Rows come out in grid order: p,
/// method, N, replication, then the learner configurations followed by the
/// baselines. Failed fits become rows with a nonempty `error`.
pub fn run_grid(spec: &GridSpec) -> Result<GridOutput> {
    spec.validate()?;
    let configs = spec.learner_configs();
    let mut cells = Vec::new();
    for &p in &spec.p {
        for method in &spec.methods {
            for &n in &spec.n {
                for rep in 0..spec.replications {
                    cells.push(Cell {
                        p,
                        method: *method,
                        n,
                        rep,
                        seed: dataset_seed(spec.seed, p, method, n, rep),
                    });
                }
            }
        }
    }
    #[cfg(feature = "parallel")]
    let per_cell: Vec<Vec<ResultRow>> = {
        use rayon::prelude::*;
        cells.par_iter().map(|c| run_cell(spec, c, &configs)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_cell: Vec<Vec<ResultRow>> = cells.iter().map(|c| run_cell(spec, c, &configs)).collect();
    let rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    let summary = summarize(&rows)?;
    Ok(GridOutput { rows, summary })
}

fn median_of(values: impl Iterator<Item = Option<f64>>) -> Result<Option<f64>> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        Ok(None)
    } else {
        median(&v).map(Some)
    }
}

/// Medians across replications. Missing values (undefined relative Hamming
/// distances, failed fits) are left out and counted.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<(usize, String, String, usize, String, String, String)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.p,
            r.gen_method.clone(),
            format!("{:?}|{:?}", r.q, r.k0),
            r.n,
            r.metric.clone(),
            r.linkage.clone(),
            r.kspec.clone(),
        );
        let idx = match order.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        groups.entry(idx).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let first = g[0];
            let ok: Vec<&&ResultRow> = g.iter().filter(|r| r.error.is_empty()).collect();
            Ok(SummaryRow {
                p: first.p,
                gen_method: first.gen_method.clone(),
                q: first.q,
                k0: first.k0,
                n: first.n,
                metric: first.metric.clone(),
                linkage: first.linkage.clone(),
                kspec: first.kspec.clone(),
                reps: g.len(),
                bic: median_of(ok.iter().map(|r| r.bic))?,
                hd_truth: median_of(ok.iter().map(|r| r.hd_truth.map(|h| h as f64)))?,
                delta_bic_vs_full: median_of(ok.iter().map(|r| r.delta_bic_vs_full))?,
                delta_hd_vs_full: median_of(ok.iter().map(|r| r.delta_hd_vs_full))?,
                delta_bic_vs_bhc: median_of(ok.iter().map(|r| r.delta_bic_vs_bhc))?,
                delta_hd_vs_bhc: median_of(ok.iter().map(|r| r.delta_hd_vs_bhc))?,
                time_s: median_of(ok.iter().map(|r| r.time_s))?,
                undefined_hd_vs_full: ok
                    .iter()
                    .filter(|r| r.delta_bic_vs_full.is_some() && r.delta_hd_vs_full.is_none())
                    .count(),
                undefined_hd_vs_bhc: ok
                    .iter()
                    .filter(|r| r.delta_bic_vs_bhc.is_some() && r.delta_hd_vs_bhc.is_none())
                    .count(),
                errors: g.len() - ok.len(),
            })
        })
        .collect()
}

pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// One line of the classification scores table. `split` is the split index,
/// or `median` for the aggregate line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub dataset: String,
    pub split: String,
    pub metric: String,
    pub linkage: String,
    pub k: String,
    pub accuracy: f64,
    pub f1: f64,
}

/// Indices of a shuffled train/test split; the train part holds
/// `round(ratio * n)` rows.
pub fn split_indices(n: usize, ratio: f64, seed: u64, split: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Invalid(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    let n_train = (ratio * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Invalid(format!(
            "a {ratio} split of {n} rows leaves the train or test part empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_stream(seed, split as u64));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

/// Repeated train/test evaluation of the classifier for every dataset and
/// configuration. Each split uses the same row partition for all
/// configurations. Per-split lines are followed by a median line.
pub fn run_classification(
    datasets: &[(String, Dataset)],
    class_name: &str,
    splits: usize,
    ratio: f64,
    configs: &[LearnConfig],
    seed: u64,
) -> Result<Vec<ScoreRow>> {
    if splits == 0 {
        return Err(Error::Invalid("splits must be >= 1".into()));
    }
    let mut out = Vec::new();
    for (name, data) in datasets {
        if data.column_index(class_name).is_none() {
            return Err(Error::Schema(format!(
                "class column {class_name:?} not found in {name}"
            )));
        }
        let parts = (0..splits)
            .map(|s| {
                let (train_idx, test_idx) = split_indices(data.n_rows(), ratio, seed, s)?;
                Ok((data.select_rows(&train_idx)?, data.select_rows(&test_idx)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for cfg in configs {
            let row = |split: String, accuracy, f1| ScoreRow {
                dataset: name.clone(),
                split,
                metric: cfg.metric.name().to_string(),
                linkage: cfg.linkage.name().to_string(),
                k: cfg.kspec.to_string(),
                accuracy,
                f1,
            };
            let mut acc = Vec::with_capacity(splits);
            let mut f1 = Vec::with_capacity(splits);
            for (s, (train_set, test_set)) in parts.iter().enumerate() {
                let model = train(train_set, class_name, cfg)?;
                let scores = evaluate(&model, test_set)?;
                out.push(row(s.to_string(), scores.accuracy, scores.f1));
                acc.push(scores.accuracy);
                f1.push(scores.f1);
            }
            out.push(row("median".into(), median(&acc)?, median(&f1)?));
        }
    }
    Ok(out)
}
