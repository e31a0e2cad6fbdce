//! Agglomerative hierarchical clustering on a precomputed dissimilarity matrix.
//!
//! Inter-cluster dissimilarities are maintained with Lance-Williams updates.
//! Among pairs at the minimal dissimilarity the lexicographically smallest
//! pair of cluster ids is merged, where a cluster's id while active is its
//! smallest member index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DissimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Linkage {
    Average,
    Complete,
    /// WPGMA.
    McQuitty,
    WardD2,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Average, Linkage::Complete, Linkage::McQuitty, Linkage::WardD2];

    pub fn name(&self) -> &'static str {
        match self {
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::McQuitty => "mcquitty",
            Linkage::WardD2 => "ward.D2",
        }
    }

    /// Updated dissimilarity between cluster `k` and the union of `i` and `j`.
    /// For Ward the inputs and output are squared dissimilarities.
    #[inline]
    fn update(self, d_ki: f64, d_kj: f64, d_ij: f64, n_i: usize, n_j: usize, n_k: usize) -> f64 {
        match self {
            Linkage::Average => {
                let (ni, nj) = (n_i as f64, n_j as f64);
                (ni * d_ki + nj * d_kj) / (ni + nj)
            }
            Linkage::Complete => 0.5 * (d_ki + d_kj) + 0.5 * (d_ki - d_kj).abs(),
            Linkage::McQuitty => 0.5 * (d_ki + d_kj),
            Linkage::WardD2 => {
                let (ni, nj, nk) = (n_i as f64, n_j as f64, n_k as f64);
                ((ni + nk) * d_ki + (nj + nk) * d_kj - nk * d_ij) / (ni + nj + nk)
            }
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            "mcquitty" => Ok(Linkage::McQuitty),
            "ward.d2" | "ward" | "wardd2" => Ok(Linkage::WardD2),
            _ => Err(Error::Invalid(format!("unknown linkage {s:?}"))),
        }
    }
}

impl TryFrom<String> for Linkage {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Linkage> for String {
    fn from(l: Linkage) -> String {
        l.name().to_string()
    }
}

/// One agglomeration step. Items are ids `0..n`; the cluster formed at step
/// `t` gets id `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n_items: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Cluster labels for `k` clusters: the first `n - k` merges applied,
    /// labels numbered by first member.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n_items {
            return Err(Error::OutOfRange(format!(
                "cannot cut {} items into {k} clusters",
                self.n_items
            )));
        }
        let n = self.n_items;
        let mut parent: Vec<usize> = (0..n).collect();
        let mut rep: Vec<usize> = (0..n).collect();
        rep.reserve(n);
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..n - k] {
            let a = find(&mut parent, rep[m.left]);
            let b = find(&mut parent, rep[m.right]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
            rep.push(lo);
        }
        let mut labels = vec![usize::MAX; n];
        let mut root_label = vec![usize::MAX; n];
        let mut next = 0;
        for (i, label) in labels.iter_mut().enumerate() {
            let r = find(&mut parent, i);
            if root_label[r] == usize::MAX {
                root_label[r] = next;
                next += 1;
            }
            *label = root_label[r];
        }
        Ok(labels)
    }
}

/// Nearest active neighbour with a larger index.
#[derive(Clone, Copy)]
struct Neighbour {
    dist: f64,
    index: usize,
}

fn row_nearest(d: &[f64], n: usize, active: &[bool], i: usize) -> Option<Neighbour> {
    let row = &d[i * n..(i + 1) * n];
    let mut best: Option<Neighbour> = None;
    for j in i + 1..n {
        if active[j] && best.is_none_or(|b| row[j] < b.dist) {
            best = Some(Neighbour { dist: row[j], index: j });
        }
    }
    best
}

/// Builds the full merge history of `matrix` under `linkage`.
pub fn agglomerate(matrix: &DissimilarityMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Invalid("cannot cluster an empty matrix".into()));
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = matrix.get(i, j);
            if !v.is_finite() {
                return Err(Error::Invalid(format!("non-finite dissimilarity at ({i}, {j})")));
            }
            if (v - matrix.get(j, i)).abs() > 1e-12 {
                return Err(Error::Invalid(format!(
                    "dissimilarity matrix is asymmetric at ({i}, {j})"
                )));
            }
            d[i * n + j] = if linkage == Linkage::WardD2 { v * v } else { v };
        }
    }

    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut nn: Vec<Option<Neighbour>> = (0..n).map(|i| row_nearest(&d, n, &active, i)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut pick: Option<(usize, Neighbour)> = None;
        for (i, cand) in nn.iter().enumerate() {
            if !active[i] {
                continue;
            }
            if let Some(c) = cand {
                if pick.is_none_or(|(_, b)| c.dist < b.dist) {
                    pick = Some((i, *c));
                }
            }
        }
        let (i, Neighbour { dist, index: j }) = pick.ok_or_else(|| Error::Numeric("no mergeable pair left".into()))?;

        let height = if linkage == Linkage::WardD2 {
            dist.max(0.0).sqrt()
        } else {
            dist
        };
        merges.push(Merge {
            left: id[i],
            right: id[j],
            height,
            size: size[i] + size[j],
        });

        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let v = linkage.update(d[k * n + i], d[k * n + j], dist, size[i], size[j], size[k]);
            d[k * n + i] = v;
            d[i * n + k] = v;
        }
        active[j] = false;
        size[i] += size[j];
        id[i] = n + step;
        nn[j] = None;

        for k in 0..i {
            if !active[k] {
                continue;
            }
            match nn[k] {
                Some(c) if c.index == i || c.index == j => nn[k] = row_nearest(&d, n, &active, k),
                Some(c) => {
                    let v = d[k * n + i];
                    if v < c.dist || (v == c.dist && i < c.index) {
                        nn[k] = Some(Neighbour { dist: v, index: i });
                    }
                }
                None => nn[k] = row_nearest(&d, n, &active, k),
            }
        }
        nn[i] = row_nearest(&d, n, &active, i);
        for k in i + 1..n {
            if active[k] && nn[k].is_some_and(|c| c.index == j) {
                nn[k] = row_nearest(&d, n, &active, k);
            }
        }
    }

    Ok(Dendrogram { n_items: n, merges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_points() -> DissimilarityMatrix {
        DissimilarityMatrix::from_rows(vec![vec![0.0, 0.1, 0.9], vec![0.1, 0.0, 0.8], vec![0.9, 0.8, 0.0]]).unwrap()
    }

    #[test]
    fn single_item() {
        let d = agglomerate(&DissimilarityMatrix::zeros(1), Linkage::Average).unwrap();
        assert!(d.merges().is_empty());
        assert_eq!(d.cut(1).unwrap(), vec![0]);
    }

    #[test]
    fn complete_trace() {
        let d = agglomerate(&three_points(), Linkage::Complete).unwrap();
        let m = d.merges();
        assert_eq!((m[0].left, m[0].right, m[0].size), (0, 1, 2));
        assert!((m[0].height - 0.1).abs() < 1e-15);
        assert_eq!((m[1].left, m[1].right, m[1].size), (3, 2, 3));
        assert!((m[1].height - 0.9).abs() < 1e-15);
        assert_eq!(d.cut(2).unwrap(), vec![0, 0, 1]);
        assert_eq!(d.cut(3).unwrap(), vec![0, 1, 2]);
        assert_eq!(d.cut(1).unwrap(), vec![0, 0, 0]);
        assert!(d.cut(0).is_err());
        assert!(d.cut(4).is_err());
    }

    #[test]
    fn average_and_mcquitty_trace() {
        let d = agglomerate(&three_points(), Linkage::Average).unwrap();
        assert!((d.merges()[1].height - 0.85).abs() < 1e-15);
        let d = agglomerate(&three_points(), Linkage::McQuitty).unwrap();
        assert!((d.merges()[1].height - 0.85).abs() < 1e-15);
    }

    #[test]
    fn ward_on_line_points() {
        // Points 0, 1, 5 on a line: Ward.D2 merge heights follow from the
        // between-cluster sum of squares, sqrt(2 * n_a n_b / (n_a + n_b)) * |centroid gap|.
        let xs = [0.0f64, 1.0, 5.0];
        let m = DissimilarityMatrix::from_fn(3, |i, j| (xs[i] - xs[j]).abs());
        let d = agglomerate(&m, Linkage::WardD2).unwrap();
        assert!((d.merges()[0].height - 1.0).abs() < 1e-12);
        let expect = (2.0 * (2.0 * 1.0 / 3.0) * 4.5f64.powi(2)).sqrt();
        assert!((d.merges()[1].height - expect).abs() < 1e-12);
    }

    #[test]
    fn ties_merge_smallest_pair() {
        let m = DissimilarityMatrix::from_fn(4, |_, _| 1.0);
        let d = agglomerate(&m, Linkage::Average).unwrap();
        let pairs: Vec<_> = d.merges().iter().map(|m| (m.left, m.right)).collect();
        assert_eq!(pairs, vec![(0, 1), (4, 2), (5, 3)]);
    }

    #[test]
    fn rejects_bad_matrices() {
        let mut rows = three_points().to_rows();
        rows[0][1] = f64::NAN;
        rows[1][0] = f64::NAN;
        assert!(agglomerate(&DissimilarityMatrix::from_rows(rows).unwrap(), Linkage::Average).is_err());
        let mut rows = three_points().to_rows();
        rows[0][2] = 0.5;
        assert!(agglomerate(&DissimilarityMatrix::from_rows(rows).unwrap(), Linkage::Average).is_err());
    }

    #[test]
    fn linkage_names() {
        for l in Linkage::ALL {
            assert_eq!(l.name().parse::<Linkage>().unwrap(), l);
        }
        assert_eq!("Ward.D2".parse::<Linkage>().unwrap(), Linkage::WardD2);
        assert!("single".parse::<Linkage>().is_err());
    }
}
