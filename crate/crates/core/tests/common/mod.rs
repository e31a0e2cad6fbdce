//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use sevt::{EventTree, FittedStagedTree, Linkage, Staging, VariableSpec};

/// The three-variable running example: X1 in {a,b,c}, X2 in {0,1},
/// X3 in {1,2,3}, with (a,0) and (a,1) sharing one stage at the last depth
/// and the remaining four situations sharing another.
pub fn example_model() -> FittedStagedTree {
    let tree = EventTree::new(vec![
        VariableSpec::new("X1", ["a", "b", "c"]),
        VariableSpec::new("X2", ["0", "1"]),
        VariableSpec::new("X3", ["1", "2", "3"]),
    ])
    .unwrap();
    let staging = Staging::new(&tree, vec![vec![0], vec![0, 0, 0], vec![0, 0, 1, 1, 1, 1]]).unwrap();
    let theta = vec![
        vec![vec![0.3, 0.5, 0.2]],
        vec![vec![0.6, 0.4]],
        vec![vec![0.7, 0.2, 0.1], vec![0.4, 0.4, 0.2]],
    ];
    FittedStagedTree::new(tree, staging, theta, 0, 0.0).unwrap()
}

/// All permutations of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Disagreements at one depth minimized by trying every relabelling.
pub fn brute_depth_hamming(a: &[usize], b: &[usize]) -> usize {
    let k = a.iter().chain(b).max().map_or(0, |m| m + 1);
    permutations(k)
        .iter()
        .map(|perm| a.iter().zip(b).filter(|(x, y)| perm[**x] != **y).count())
        .min()
        .unwrap_or(0)
}

pub fn brute_hamming(a: &Staging, b: &Staging) -> usize {
    (0..a.n_depths())
        .map(|d| brute_depth_hamming(a.labels(d), b.labels(d)))
        .sum()
}

/// Agglomeration recomputing every cluster dissimilarity from the item
/// matrix at each step. Returns the labels after each number of merges,
/// i.e. `result[n - k]` is the k-cluster partition.
pub fn naive_partitions(d: &[Vec<f64>], linkage: Linkage) -> Vec<Vec<usize>> {
    let n = d.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let between = |a: &[usize], b: &[usize]| -> f64 {
        match linkage {
            Linkage::Complete => a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| (i, j)))
                .map(|(i, j)| d[i][j])
                .fold(f64::NEG_INFINITY, f64::max),
            Linkage::Average => {
                let s: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| d[i][j])).sum();
                s / (a.len() * b.len()) as f64
            }
            _ => unimplemented!("oracle covers complete and average linkage"),
        }
    };
    let labels = |clusters: &[Vec<usize>]| {
        let mut out = vec![0; n];
        let mut sorted: Vec<&Vec<usize>> = clusters.iter().collect();
        sorted.sort_by_key(|c| c[0]);
        for (l, c) in sorted.iter().enumerate() {
            for &i in c.iter() {
                out[i] = l;
            }
        }
        out
    };
    let mut result = vec![labels(&clusters)];
    while clusters.len() > 1 {
        // clusters are kept sorted by smallest member
        clusters.sort_by_key(|c| c[0]);
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let v = between(&clusters[a], &clusters[b]);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let (_, a, b) = best;
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort();
        result.push(labels(&clusters));
    }
    result
}
