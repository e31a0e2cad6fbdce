//! Structural and score-based comparison of staged trees.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::ModelScore;
use crate::tree::Staging;

/// Minimum number of disagreeing situations at one depth over all bijections
/// between the two label sets.
pub fn depth_hamming(a: &[usize], b: &[usize]) -> usize {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let k = ka.max(kb);
    if k == 0 {
        return 0;
    }
    // Square co-occurrence table; padding rows/columns are empty dummy labels.
    let mut table = Matrix::new(k, k, 0i64);
    for (&x, &y) in a.iter().zip(b) {
        table[(x, y)] += 1;
    }
    let (agreement, _) = kuhn_munkres(&table);
    a.len() - agreement as usize
}

/// Hamming distance between stagings, minimized over per-depth relabellings.
pub fn hamming_distance(a: &Staging, b: &Staging) -> Result<usize> {
    if a.n_depths() != b.n_depths() || (0..a.n_depths()).any(|d| a.labels(d).len() != b.labels(d).len()) {
        return Err(Error::Invalid("stagings are defined on different trees".into()));
    }
    Ok((0..a.n_depths()).map(|d| depth_hamming(a.labels(d), b.labels(d))).sum())
}

/// `(BIC(model) - BIC(baseline)) / |BIC(baseline)|`.
pub fn relative_bic(model: &ModelScore, baseline: &ModelScore) -> Result<f64> {
    if baseline.bic == 0.0 {
        return Err(Error::Invalid("baseline BIC is zero".into()));
    }
    Ok((model.bic - baseline.bic) / baseline.bic.abs())
}

/// `(HD(model, truth) - HD(baseline, truth)) / HD(baseline, truth)`, or
/// `None` when the baseline equals the truth.
pub fn relative_hd(model: &Staging, baseline: &Staging, truth: &Staging) -> Result<Option<f64>> {
    let hm = hamming_distance(model, truth)?;
    let hb = hamming_distance(baseline, truth)?;
    if hb == 0 {
        return Ok(None);
    }
    Ok(Some((hm as f64 - hb as f64) / hb as f64))
}

/// Median; the mean of the two central values for an even count.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Invalid("median of an empty list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Invalid("median of a list containing NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Result of comparing a fitted model against a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub hd: usize,
    pub delta_bic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_hd: Option<f64>,
    pub bic: f64,
    pub baseline_bic: f64,
    /// Fit times, when the models were fitted as part of the comparison.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wall_time_s: Vec<f64>,
}

impl ComparisonReport {
    pub fn new(
        model: (&Staging, &ModelScore),
        baseline: (&Staging, &ModelScore),
        truth: Option<&Staging>,
    ) -> Result<Self> {
        Ok(Self {
            hd: hamming_distance(model.0, baseline.0)?,
            delta_bic: relative_bic(model.1, baseline.1)?,
            delta_hd: match truth {
                Some(t) => relative_hd(model.0, baseline.0, t)?,
                None => None,
            },
            bic: model.1.bic,
            baseline_bic: baseline.1.bic,
            wall_time_s: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::EventTree;

    #[test]
    fn hamming_examples() {
        let t = EventTree::uniform(3, 2).unwrap();
        let a = Staging::new(&t, vec![vec![0], vec![0, 1], vec![0, 0, 1, 2]]).unwrap();
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
        let renamed = Staging::new(&t, vec![vec![5], vec![9, 3], vec![7, 7, 1, 4]]).unwrap();
        assert_eq!(hamming_distance(&a, &renamed).unwrap(), 0);

        assert_eq!(depth_hamming(&[0, 0, 1], &[0, 1, 1]), 1);
        assert_eq!(depth_hamming(&[0, 1, 2, 3], &[0, 0, 0, 0]), 3);
        assert_eq!(depth_hamming(&[0, 0, 0, 0], &[0, 1, 2, 3]), 3);

        let other = EventTree::uniform(2, 2).unwrap();
        assert!(hamming_distance(&a, &Staging::saturated(&other)).is_err());
    }

    #[test]
    fn relative_bic_examples() {
        let s = |bic| ModelScore {
            loglik: 0.0,
            n_params: 0,
            n: 1,
            bic,
        };
        assert_eq!(relative_bic(&s(100.0), &s(100.0)).unwrap(), 0.0);
        assert!((relative_bic(&s(110.0), &s(100.0)).unwrap() - 0.10).abs() < 1e-15);
        assert!((relative_bic(&s(95.0), &s(100.0)).unwrap() + 0.05).abs() < 1e-15);
        assert!(relative_bic(&s(1.0), &s(0.0)).is_err());
    }

    #[test]
    fn relative_hd_examples() {
        let t = EventTree::uniform(4, 2).unwrap();
        let truth = Staging::coarsest(&t);
        let sat = Staging::saturated(&t);
        // HD(saturated, coarsest) = 0 + 1 + 3 + 7 = 11
        assert_eq!(hamming_distance(&sat, &truth).unwrap(), 11);
        assert_eq!(relative_hd(&sat, &sat, &truth).unwrap(), Some(0.0));
        assert_eq!(relative_hd(&truth, &sat, &truth).unwrap(), Some(-1.0));
        assert_eq!(relative_hd(&sat, &truth, &truth).unwrap(), None);

        let model = Staging::new(
            &t,
            vec![vec![0], vec![0, 0], vec![0, 0, 0, 0], vec![0, 0, 0, 0, 1, 2, 3, 4]],
        )
        .unwrap();
        let baseline = Staging::new(
            &t,
            vec![vec![0], vec![0, 1], vec![0, 1, 2, 3], vec![0, 0, 0, 0, 1, 2, 3, 4]],
        )
        .unwrap();
        assert_eq!(hamming_distance(&model, &truth).unwrap(), 4);
        assert_eq!(hamming_distance(&baseline, &truth).unwrap(), 8);
        assert_eq!(relative_hd(&model, &baseline, &truth).unwrap(), Some(-0.5));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(
            median(&[1.0, 2.0, 3.0, 4.0, 1e9]).unwrap(),
            median(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap()
        );
        assert!(median(&[]).is_err());
    }
}
