//! Distances and divergences between probability vectors on the simplex.
//!
//! Every dissimilarity here is symmetric bit for bit: each is written as a sum
//! of terms that are invariant under swapping `p` and `q`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Invalid("probability vectors need at least 2 entries".into()));
        }
        if entries.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::Invalid("probability entries must be finite and >= 0".into()));
        }
        let s: f64 = entries.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self(entries))
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&x| x > 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub const DEFAULT_KAPPA: f64 = 0.5;

/// The six dissimilarities available to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    TotalVariation,
    Hellinger,
    Fisher,
    JensenShannon,
    Kaniadakis { kappa: f64 },
    TotalKl,
}

impl Metric {
    /// The six metrics with default settings.
    pub const ALL: [Metric; 6] = [
        Metric::TotalVariation,
        Metric::Hellinger,
        Metric::Fisher,
        Metric::JensenShannon,
        Metric::Kaniadakis { kappa: DEFAULT_KAPPA },
        Metric::TotalKl,
    ];

    pub fn kaniadakis(kappa: f64) -> Result<Self> {
        if kappa > 0.0 && kappa < 1.0 {
            Ok(Metric::Kaniadakis { kappa })
        } else {
            Err(Error::Invalid(format!("kappa must lie in (0, 1), got {kappa}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::TotalVariation => "totalvariation",
            Metric::Hellinger => "hellinger",
            Metric::Fisher => "fisher",
            Metric::JensenShannon => "jensenshannon",
            Metric::Kaniadakis { .. } => "kaniadakis",
            Metric::TotalKl => "totalkl",
        }
    }

    /// KL-type metrics are undefined on vectors with zero entries.
    pub fn requires_positive(&self) -> bool {
        matches!(self, Metric::Kaniadakis { .. } | Metric::TotalKl)
    }

    pub fn eval(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        match *self {
            Metric::TotalVariation => total_variation(p, q),
            Metric::Hellinger => hellinger(p, q),
            Metric::Fisher => fisher(p, q),
            Metric::JensenShannon => jensen_shannon(p, q),
            Metric::Kaniadakis { kappa } => kaniadakis(p, q, kappa),
            Metric::TotalKl => total_kl(p, q),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Kaniadakis { kappa } if *kappa != DEFAULT_KAPPA => {
                write!(f, "kaniadakis:{kappa}")
            }
            m => f.write_str(m.name()),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Case-insensitive; `kaniadakis:<kappa>` overrides the default kappa.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let metric = match name {
            "totalvariation" => Metric::TotalVariation,
            "hellinger" => Metric::Hellinger,
            "fisher" => Metric::Fisher,
            "jensenshannon" => Metric::JensenShannon,
            "totalkl" => Metric::TotalKl,
            "kaniadakis" => {
                let kappa = match arg {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("bad kappa {a:?}")))?,
                    None => DEFAULT_KAPPA,
                };
                return Metric::kaniadakis(kappa);
            }
            _ => return Err(Error::Invalid(format!("unknown metric {s:?}"))),
        };
        if arg.is_some() {
            return Err(Error::Invalid(format!("metric {name} takes no argument")));
        }
        Ok(metric)
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.to_string()
    }
}

fn check_len(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        Err(Error::LengthMismatch(p.len(), q.len()))
    } else {
        Ok(())
    }
}

fn check_positive(name: &'static str, p: &[f64], q: &[f64]) -> Result<()> {
    if p.iter().chain(q).all(|&x| x > 0.0) {
        Ok(())
    } else {
        Err(Error::NonPositive(name))
    }
}

/// Bhattacharyya coefficient, clamped to `[0, 1]`.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p, q)?;
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(bc.clamp(0.0, 1.0))
}

/// Half the L1 distance.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p, q)?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p, q)?;
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok((0.5 * s).sqrt())
}

/// Squared Fisher-Rao form `4 arccos^2(BC)`; equals `pi^2` on disjoint supports.
///
/// The angle is taken as `2 asin(H / sqrt 2)` with `H` the Hellinger
/// distance, which is the same quantity but exactly zero for equal inputs.
pub fn fisher(p: &[f64], q: &[f64]) -> Result<f64> {
    let h = hellinger(p, q)?.min(1.0);
    let angle = 2.0 * (h / std::f64::consts::SQRT_2).asin();
    Ok(4.0 * angle * angle)
}

/// Jensen-Shannon divergence in nats; `0 log 0 = 0`, so zero entries are fine.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p, q)?;
    let term = |x: f64, m: f64| if x > 0.0 { x * (2.0 * x / m).ln() } else { 0.0 };
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = a + b;
            term(a, m) + term(b, m)
        })
        .sum();
    Ok((0.5 * s).max(0.0))
}

/// Jeffreys divergence `KL(p||q) + KL(q||p) = sum (p - q)(ln p - ln q)`.
pub fn total_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    check_len(p, q)?;
    check_positive("totalkl", p, q)?;
    Ok(p.iter().zip(q).map(|(&a, &b)| (a - b) * (a.ln() - b.ln())).sum())
}

/// Kaniadakis kappa-logarithm `(x^k - x^-k) / (2k)`.
pub fn kappa_log(x: f64, kappa: f64) -> f64 {
    (x.powf(kappa) - x.powf(-kappa)) / (2.0 * kappa)
}

/// Symmetrized Kaniadakis divergence with the distribution itself as escort
/// weight: `sum (ln_k p - ln_k q)(p - q)`. Tends to [`total_kl`] as `kappa -> 0`.
pub fn kaniadakis(p: &[f64], q: &[f64], kappa: f64) -> Result<f64> {
    check_len(p, q)?;
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Invalid(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    check_positive("kaniadakis", p, q)?;
    Ok(p.iter()
        .zip(q)
        .map(|(&a, &b)| (a - b) * (kappa_log(a, kappa) - kappa_log(b, kappa)))
        .sum())
}

/// Dense symmetric matrix of pairwise dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("dissimilarity matrix must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds a matrix from a closure evaluated on the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// `M[v][w] = metric(v, w)` over all pairs, zero on the diagonal.
pub fn pairwise_matrix<V: AsRef<[f64]> + Sync>(vectors: &[V], metric: Metric) -> Result<DissimilarityMatrix> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::Invalid("pairwise matrix needs at least one vector".into()));
    }
    let len = vectors[0].as_ref().len();
    if let Some(bad) = vectors.iter().find(|v| v.as_ref().len() != len) {
        return Err(Error::LengthMismatch(len, bad.as_ref().len()));
    }
    let rows = upper_rows(vectors, metric)?;
    let mut m = DissimilarityMatrix::zeros(n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            m.set(i, i + 1 + off, v);
        }
    }
    Ok(m)
}

fn upper_row<V: AsRef<[f64]>>(vectors: &[V], metric: Metric, i: usize) -> Result<Vec<f64>> {
    let p = vectors[i].as_ref();
    vectors[i + 1..].iter().map(|q| metric.eval(p, q.as_ref())).collect()
}

#[cfg(feature = "parallel")]
fn upper_rows<V: AsRef<[f64]> + Sync>(vectors: &[V], metric: Metric) -> Result<Vec<Vec<f64>>> {
    use rayon::prelude::*;
    if vectors.len() < 64 {
        return (0..vectors.len()).map(|i| upper_row(vectors, metric, i)).collect();
    }
    (0..vectors.len())
        .into_par_iter()
        .map(|i| upper_row(vectors, metric, i))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn upper_rows<V: AsRef<[f64]> + Sync>(vectors: &[V], metric: Metric) -> Result<Vec<Vec<f64>>> {
    (0..vectors.len()).map(|i| upper_row(vectors, metric, i)).collect()
}
