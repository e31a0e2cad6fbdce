//! Naive staged event tree classifier.
//!
//! The class variable sits at the root and the features follow in dataset
//! column order. Prediction normalizes the root-to-leaf path probabilities
//! over the class levels.

use serde::{Deserialize, Serialize};

use crate::data::{count_transitions, Dataset};
use crate::error::{Error, Result};
use crate::learn::{learn_hclust, LearnConfig};
use crate::tree::{EventTree, FittedStagedTree, VariableSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    class: VariableSpec,
    features: Vec<VariableSpec>,
    fitted: FittedStagedTree,
}

impl ClassifierModel {
    /// Wraps a fitted tree whose first variable is the class.
    pub fn from_fitted(fitted: FittedStagedTree) -> Result<Self> {
        let vars = fitted.tree().variables();
        if vars.len() < 2 {
            return Err(Error::Invalid("a classifier needs at least one feature".into()));
        }
        Ok(Self {
            class: vars[0].clone(),
            features: vars[1..].to_vec(),
            fitted,
        })
    }

    pub fn class(&self) -> &VariableSpec {
        &self.class
    }

    pub fn features(&self) -> &[VariableSpec] {
        &self.features
    }

    pub fn fitted(&self) -> &FittedStagedTree {
        &self.fitted
    }

    /// Feature level indices from their string values, in feature order.
    pub fn encode(&self, values: &[&str]) -> Result<Vec<usize>> {
        if values.len() != self.features.len() {
            return Err(Error::LengthMismatch(self.features.len(), values.len()));
        }
        self.features
            .iter()
            .zip(values)
            .map(|(spec, v)| {
                spec.level_index(v).ok_or_else(|| Error::UnknownLevel {
                    variable: spec.name.clone(),
                    value: v.to_string(),
                })
            })
            .collect()
    }
}

/// Fits a classifier for `class_name`, learning the feature stagings with
/// hierarchical clustering.
pub fn train(data: &Dataset, class_name: &str, cfg: &LearnConfig) -> Result<ClassifierModel> {
    let c = data
        .column_index(class_name)
        .ok_or_else(|| Error::Schema(format!("class column {class_name:?} not found")))?;
    if cfg.alpha.alpha() <= 0.0 {
        return Err(Error::Invalid("classifier training needs alpha > 0".into()));
    }
    let order: Vec<usize> = std::iter::once(c)
        .chain((0..data.n_vars()).filter(|&j| j != c))
        .collect();
    let reordered = data.reorder_columns(&order)?;
    let tree = EventTree::new(reordered.schema().to_vec())?;
    let counts = count_transitions(&reordered, &tree)?;
    ClassifierModel::from_fitted(learn_hclust(&counts, &tree, cfg)?)
}

/// Most probable class and the posterior over class levels. Ties go to the
/// lowest class index.
pub fn predict(model: &ClassifierModel, features: &[usize]) -> Result<(usize, Vec<f64>)> {
    if features.len() != model.features.len() {
        return Err(Error::LengthMismatch(model.features.len(), features.len()));
    }
    for (spec, &x) in model.features.iter().zip(features) {
        if x >= spec.cardinality() {
            return Err(Error::OutOfRange(format!(
                "level {x} of feature {} (has {} levels)",
                spec.name,
                spec.cardinality()
            )));
        }
    }
    let mut path = Vec::with_capacity(features.len() + 1);
    path.push(0);
    path.extend_from_slice(features);
    let logs: Vec<f64> = (0..model.class.cardinality())
        .map(|c| {
            path[0] = c;
            model.fitted.log_path_probability(&path)
        })
        .collect::<Result<_>>()?;
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numeric(
            "all classes have zero probability for this input".into(),
        ));
    }
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let posterior: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut best = 0;
    for (c, l) in logs.iter().enumerate() {
        if *l > logs[best] {
            best = c;
        }
    }
    Ok((best, posterior))
}

/// Accuracy, macro-averaged F1 and the confusion matrix (rows = truth,
/// columns = prediction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalScores {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl EvalScores {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::Invalid("confusion matrix must be square and nonempty".into()));
        }
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Invalid("empty confusion matrix".into()));
        }
        let hits: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let f1_sum: f64 = (0..k)
            .map(|c| {
                let tp = confusion[c][c];
                let fp: u64 = (0..k).filter(|&r| r != c).map(|r| confusion[r][c]).sum();
                let fn_: u64 = (0..k).filter(|&j| j != c).map(|j| confusion[c][j]).sum();
                let denom = 2 * tp + fp + fn_;
                if denom == 0 {
                    0.0
                } else {
                    (2 * tp) as f64 / denom as f64
                }
            })
            .sum();
        Ok(Self {
            accuracy: hits as f64 / total as f64,
            f1: f1_sum / k as f64,
            confusion,
        })
    }
}

fn locate(spec: &VariableSpec, data: &Dataset) -> Result<usize> {
    let j = data
        .column_index(&spec.name)
        .ok_or_else(|| Error::Schema(format!("column {:?} missing from data", spec.name)))?;
    if data.schema()[j].levels != spec.levels {
        return Err(Error::Schema(format!("levels of {:?} differ from training", spec.name)));
    }
    Ok(j)
}

/// Predicted class for every row of `data`, which must contain the model's
/// feature columns (in any order).
pub fn predict_dataset(model: &ClassifierModel, data: &Dataset) -> Result<Vec<usize>> {
    let cols: Vec<usize> = model.features.iter().map(|f| locate(f, data)).collect::<Result<_>>()?;
    let one = |row: &Vec<usize>| -> Result<usize> {
        let x: Vec<usize> = cols.iter().map(|&j| row[j]).collect();
        Ok(predict(model, &x)?.0)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.rows().par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.rows().iter().map(one).collect()
    }
}

pub fn evaluate(model: &ClassifierModel, test: &Dataset) -> Result<EvalScores> {
    if test.n_rows() == 0 {
        return Err(Error::Invalid("empty test set".into()));
    }
    let class_col = locate(&model.class, test)?;
    let predicted = predict_dataset(model, test)?;
    let k = model.class.cardinality();
    let mut confusion = vec![vec![0u64; k]; k];
    for (row, &p) in test.rows().iter().zip(&predicted) {
        confusion[row[class_col]][p] += 1;
    }
    EvalScores::from_confusion(confusion)
}

/// Accuracy of the Bayes-optimal rule for a tree whose first variable is the
/// class, by enumerating every feature configuration.
pub fn bayes_rate(model: &FittedStagedTree) -> f64 {
    let joint = model.joint();
    let n_classes = model.tree().cardinality(0);
    let per_class = joint.len() / n_classes;
    (0..per_class)
        .map(|j| (0..n_classes).map(|c| joint[c * per_class + j]).fold(0.0, f64::max))
        .sum()
}
