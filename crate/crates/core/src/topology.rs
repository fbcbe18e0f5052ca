//! Node centralities and the fused per-subject topology matrix.
//!
//! Three centralities are computed per subject on the weighted graph:
//! strength (weighted degree), eigenvector centrality and closeness. Each is
//! max-normalized to `(0, 1]`, and their mean is the diagonal of the
//! subject's average topology matrix.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::connectome::Connectome;
use crate::error::{Error, Result};

pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_MAX_ITER: usize = 10_000;

/// Diagonal entries at or below this make the normalization kernel singular.
pub const MIN_TOPOLOGY: f64 = 1e-12;

/// Which centrality measure to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centrality {
    Degree,
    Eigenvector,
    Closeness,
}

/// Weighted degree: `out(n) = Σ_{k≠n} w(n, k)`.
pub fn strength(c: &Connectome) -> Vec<f64> {
    c.weights()
        .rows()
        .into_iter()
        .enumerate()
        .map(|(n, row)| row.iter().enumerate().filter(|&(k, _)| k != n).map(|(_, &w)| w).sum())
        .collect()
}

/// Dominant eigenvector of the weight matrix by power iteration, unit norm
/// and entrywise nonnegative.
///
/// Iterates on `A + sI` with `s` half the largest strength, which has the
/// same eigenvectors as `A` but no competing eigenvalue of equal modulus on
/// bipartite graphs. Stops once `‖Ax − λx‖₂ ≤ tol·λ`.
pub fn eigenvector_centrality(c: &Connectome, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !c.has_edges() {
        return Err(Error::DegenerateGraph);
    }
    let a = c.weights();
    let r = c.r();
    let shift = strength(c).into_iter().fold(0.0, f64::max) / 2.0;
    let mut x = vec![1.0 / (r as f64).sqrt(); r];
    let mut y = vec![0.0; r];
    for _ in 0..max_iter {
        for (yi, row) in y.iter_mut().zip(a.rows()) {
            *yi = row.iter().zip(&x).map(|(w, v)| w * v).sum();
        }
        let lambda: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
        let resid = x.iter().zip(&y).map(|(u, v)| (v - lambda * u).powi(2)).sum::<f64>().sqrt();
        if resid <= tol * lambda {
            return Ok(x);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi + shift * *xi;
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Err(Error::ConvergenceFailure(max_iter))
}

/// All-pairs shortest path lengths with edge length `1/w` on positive
/// weights. Unreachable pairs are `f64::INFINITY`.
pub fn shortest_path_lengths(c: &Connectome) -> Array2<f64> {
    let r = c.r();
    let a = c.weights();
    let mut out = Array2::from_elem((r, r), f64::INFINITY);
    let mut dist = vec![f64::INFINITY; r];
    let mut done = vec![false; r];
    // Dense Dijkstra, O(r²) per source; connectomes are dense.
    for src in 0..r {
        dist.fill(f64::INFINITY);
        done.fill(false);
        dist[src] = 0.0;
        for _ in 0..r {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..r {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for v in 0..r {
                let w = a[[u, v]];
                if w > 0.0 && !done[v] {
                    let cand = best + 1.0 / w;
                    if cand < dist[v] {
                        dist[v] = cand;
                    }
                }
            }
        }
        out.row_mut(src).assign(&ndarray::ArrayView1::from(&dist));
    }
    out
}

/// `out(n) = (r − 1) / Σ_{k≠n} l(n, k)`, or 0 when some node is unreachable
/// from `n`.
pub fn closeness_centrality(c: &Connectome) -> Vec<f64> {
    let r = c.r();
    let lengths = shortest_path_lengths(c);
    lengths
        .rows()
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total.is_finite() && total > 0.0 {
                (r - 1) as f64 / total
            } else {
                0.0
            }
        })
        .collect()
}

/// The three raw centrality vectors of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityProfile {
    pub degree: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub closeness: Vec<f64>,
}

impl CentralityProfile {
    pub fn compute(c: &Connectome) -> Result<Self> {
        Ok(Self {
            degree: strength(c),
            eigenvector: eigenvector_centrality(c, EIGEN_TOL, EIGEN_MAX_ITER)?,
            closeness: closeness_centrality(c),
        })
    }

    pub fn get(&self, which: Centrality) -> &[f64] {
        match which {
            Centrality::Degree => &self.degree,
            Centrality::Eigenvector => &self.eigenvector,
            Centrality::Closeness => &self.closeness,
        }
    }
}

/// Max-normalized centrality vectors stacked as three diagonal views.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoTensor {
    pub degree: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub closeness: Vec<f64>,
}

impl TopoTensor {
    pub fn from_profile(p: &CentralityProfile) -> Result<Self> {
        Ok(Self {
            degree: max_normalized(&p.degree)?,
            eigenvector: max_normalized(&p.eigenvector)?,
            closeness: max_normalized(&p.closeness)?,
        })
    }

    pub fn view(&self, which: Centrality) -> &[f64] {
        match which {
            Centrality::Degree => &self.degree,
            Centrality::Eigenvector => &self.eigenvector,
            Centrality::Closeness => &self.closeness,
        }
    }

    /// The named view as an `r×r` diagonal matrix.
    pub fn view_matrix(&self, which: Centrality) -> Array2<f64> {
        Array2::from_diag(&ndarray::ArrayView1::from(self.view(which)))
    }
}

fn max_normalized(v: &[f64]) -> Result<Vec<f64>> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateNode(0));
    }
    Ok(v.iter().map(|x| x / max).collect())
}

/// Diagonal of a subject's average topology matrix; every entry lies in
/// `(MIN_TOPOLOGY, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgTopologyMatrix {
    diag: Vec<f64>,
}

impl AvgTopologyMatrix {
    /// Wraps a diagonal after checking every entry is usable as a kernel.
    pub fn from_diag(diag: Vec<f64>) -> Result<Self> {
        if let Some(k) = diag.iter().position(|&d| !(d > MIN_TOPOLOGY && d.is_finite())) {
            return Err(Error::DegenerateNode(k));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn r(&self) -> usize {
        self.diag.len()
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        Array2::from_diag(&ndarray::ArrayView1::from(&self.diag[..]))
    }
}

/// Arithmetic mean of the three tensor views.
pub fn fuse_views(t: &TopoTensor) -> Result<AvgTopologyMatrix> {
    let diag = t.degree.iter().zip(&t.eigenvector).zip(&t.closeness).map(|((d, e), c)| (d + e + c) / 3.0).collect();
    AvgTopologyMatrix::from_diag(diag)
}

/// Topology tensor of a subject.
pub fn topo_tensor(c: &Connectome) -> Result<TopoTensor> {
    TopoTensor::from_profile(&CentralityProfile::compute(c)?)
}

/// Mean of the three max-normalized centralities.
pub fn avg_topology(c: &Connectome) -> Result<AvgTopologyMatrix> {
    fuse_views(&topo_tensor(c)?)
}

/// A single max-normalized centrality, used by the single-measure ablations.
pub fn single_topology(c: &Connectome, which: Centrality) -> Result<AvgTopologyMatrix> {
    let raw = match which {
        Centrality::Degree => strength(c),
        Centrality::Eigenvector => eigenvector_centrality(c, EIGEN_TOL, EIGEN_MAX_ITER)?,
        Centrality::Closeness => closeness_centrality(c),
    };
    AvgTopologyMatrix::from_diag(max_normalized(&raw)?)
}
