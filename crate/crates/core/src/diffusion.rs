//! Cross-diffusion of a class's networks and fusion into an atlas.
//!
//! Each subject starts from a status matrix `P_i` (its network scaled by the
//! inverse of its normalization kernel, with `1/2` on the diagonal) and a
//! KNN local kernel `Q_i`. Every round replaces all `P_i` simultaneously by
//! `sym(Q_i · mean_{j≠i} P_j · Q_iᵀ)`, reading only the previous round. The
//! atlas is the entrywise mean of the final status matrices.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, DEFAULT_CLUSTERS};
use crate::connectome::{matrix_to_csv, stack_features, Connectome, Population};
use crate::error::{Error, Result};
use crate::mkl::{
    learn_subject_weights, normalization_kernel, Bandwidth, NormalizationKernel, SubjectWeights, DEFAULT_LAMBDA,
};
use crate::topology::{avg_topology, single_topology, AvgTopologyMatrix, Centrality};

pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_KNN: usize = 25;

/// Which topology drives the status-matrix normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelMode {
    /// Learned weights times the mean of three centralities.
    #[serde(rename = "multi")]
    MultiTopology,
    #[serde(rename = "degree")]
    DegreeOnly,
    #[serde(rename = "closeness")]
    ClosenessOnly,
    #[serde(rename = "eigenvector")]
    EigenvectorOnly,
}

impl KernelMode {
    pub const ALL: [KernelMode; 4] =
        [KernelMode::MultiTopology, KernelMode::DegreeOnly, KernelMode::ClosenessOnly, KernelMode::EigenvectorOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelMode::MultiTopology => "multi",
            KernelMode::DegreeOnly => "degree",
            KernelMode::ClosenessOnly => "closeness",
            KernelMode::EigenvectorOnly => "eigenvector",
        }
    }

    /// The single centrality of an ablation mode.
    pub fn centrality(self) -> Option<Centrality> {
        match self {
            KernelMode::MultiTopology => None,
            KernelMode::DegreeOnly => Some(Centrality::Degree),
            KernelMode::ClosenessOnly => Some(Centrality::Closeness),
            KernelMode::EigenvectorOnly => Some(Centrality::Eigenvector),
        }
    }
}

impl fmt::Display for KernelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        KernelMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode {s:?}; expected multi, degree, closeness or eigenvector"))
    }
}

/// Tunables of atlas estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasParams {
    pub n_star: usize,
    pub knn: usize,
    pub n_clusters: usize,
    pub lambda: f64,
    pub sigma: Bandwidth,
    pub seed: u64,
}

impl Default for AtlasParams {
    fn default() -> Self {
        Self {
            n_star: DEFAULT_ITERATIONS,
            knn: DEFAULT_KNN,
            n_clusters: DEFAULT_CLUSTERS,
            lambda: DEFAULT_LAMBDA,
            sigma: Bandwidth::Auto,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatusMatrix {
    pub p: Array2<f64>,
}

/// `p(k,l) = x(k,l) / (2·K(k))` off the diagonal, `1/2` on it.
pub fn status_matrix(x: &Connectome, k: &NormalizationKernel) -> Result<StatusMatrix> {
    let r = x.r();
    if k.diag.len() != r {
        return Err(Error::DimensionMismatch { expected: r, found: k.diag.len() });
    }
    if let Some(bad) = k.diag.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::SingularKernel(bad));
    }
    let w = x.weights();
    let p = Array2::from_shape_fn((r, r), |(a, b)| if a == b { 0.5 } else { w[[a, b]] / (2.0 * k.diag[a]) });
    Ok(StatusMatrix { p })
}

/// Row-normalized KNN sparsification of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalKernel {
    pub q: Array2<f64>,
    /// Selected neighbors of each row, strongest first.
    pub neighbors: Vec<Vec<usize>>,
}

pub fn local_kernel(x: &Connectome, q_nn: usize) -> Result<LocalKernel> {
    let r = x.r();
    if q_nn == 0 || q_nn > r - 1 {
        return Err(Error::InvalidNeighborCount { q: q_nn, max: r - 1 });
    }
    let w = x.weights();
    let mut q = Array2::zeros((r, r));
    let mut neighbors = Vec::with_capacity(r);
    for k in 0..r {
        let mut cand: Vec<usize> = (0..r).filter(|&l| l != k).collect();
        // strongest first, smaller index on ties
        cand.sort_by(|&a, &b| w[[k, b]].total_cmp(&w[[k, a]]).then(a.cmp(&b)));
        cand.truncate(q_nn);
        let total: f64 = cand.iter().map(|&l| w[[k, l]]).sum();
        if total > 0.0 {
            for &l in &cand {
                q[[k, l]] = w[[k, l]] / total;
            }
        }
        neighbors.push(cand);
    }
    Ok(LocalKernel { q, neighbors })
}

/// `sym(Q · avg · Qᵀ)` using the sparsity of `Q`.
fn diffuse_one(local: &LocalKernel, avg: &Array2<f64>) -> Array2<f64> {
    let r = avg.nrows();
    let q = &local.q;
    let mut qa = Array2::<f64>::zeros((r, r));
    for (k, nb) in local.neighbors.iter().enumerate() {
        let mut row = qa.row_mut(k);
        for &m in nb {
            let c = q[[k, m]];
            if c != 0.0 {
                row.scaled_add(c, &avg.row(m));
            }
        }
    }
    let mut out = Array2::<f64>::zeros((r, r));
    for k in 0..r {
        let src = qa.row(k);
        for (l, nb) in local.neighbors.iter().enumerate() {
            let mut acc = 0.0;
            for &n in nb {
                acc += src[n] * q[[l, n]];
            }
            out[[k, l]] = acc;
        }
    }
    for k in 0..r {
        for l in k + 1..r {
            let s = (out[[k, l]] + out[[l, k]]) / 2.0;
            out[[k, l]] = s;
            out[[l, k]] = s;
        }
    }
    out
}

fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Output of [`cross_diffuse_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionRun {
    pub status: Vec<StatusMatrix>,
    /// Mean Frobenius norm of the status matrices after each round.
    pub frobenius_trace: Vec<f64>,
}

/// Synchronous cross-diffusion; also records the per-round mean norm.
pub fn cross_diffuse_traced(status: &[StatusMatrix], local: &[LocalKernel], n_star: usize) -> Result<DiffusionRun> {
    let n = status.len();
    if n < 2 {
        return Err(Error::PopulationTooSmall(n));
    }
    if local.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: local.len() });
    }
    let r = status[0].p.nrows();
    for m in status.iter().map(|s| &s.p).chain(local.iter().map(|l| &l.q)) {
        if m.dim() != (r, r) {
            return Err(Error::DimensionMismatch { expected: r, found: m.nrows() });
        }
    }
    let mut current: Vec<Array2<f64>> = status.iter().map(|s| s.p.clone()).collect();
    let mut trace = Vec::with_capacity(n_star);
    let inv = 1.0 / (n - 1) as f64;
    for _ in 0..n_star {
        let mut total = Array2::<f64>::zeros((r, r));
        for p in &current {
            total += p;
        }
        current = current
            .par_iter()
            .zip(local.par_iter())
            .map(|(p, q)| {
                let avg = (&total - p) * inv;
                diffuse_one(q, &avg)
            })
            .collect();
        trace.push(current.iter().map(frobenius_norm).sum::<f64>() / n as f64);
    }
    Ok(DiffusionRun { status: current.into_iter().map(|p| StatusMatrix { p }).collect(), frobenius_trace: trace })
}

pub fn cross_diffuse(status: &[StatusMatrix], local: &[LocalKernel], n_star: usize) -> Result<Vec<StatusMatrix>> {
    Ok(cross_diffuse_traced(status, local, n_star)?.status)
}

/// Entrywise mean of the status matrices.
pub fn fuse(status: &[StatusMatrix]) -> Result<Array2<f64>> {
    let first = status.first().ok_or(Error::EmptyPopulation)?;
    let mut acc = Array2::<f64>::zeros(first.p.dim());
    for s in status {
        if s.p.dim() != acc.dim() {
            return Err(Error::DimensionMismatch { expected: acc.nrows(), found: s.p.nrows() });
        }
        acc += &s.p;
    }
    Ok(acc / status.len() as f64)
}

/// A fused population network.
#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub a: Array2<f64>,
    pub class_label: String,
    pub kernel_mode: KernelMode,
    pub iterations: usize,
    pub params: AtlasParams,
    pub subject_weights: SubjectWeights,
    /// Cluster label per subject (multi-topology mode only).
    pub cluster_labels: Option<Vec<usize>>,
    pub frobenius_trace: Vec<f64>,
}

impl Atlas {
    pub fn r(&self) -> usize {
        self.a.nrows()
    }

    /// Writes `<dir>/<stem>.csv` and the `<dir>/<stem>.json` sidecar.
    pub fn write(&self, dir: &Path, stem: &str, input_digest: Option<&str>) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, matrix_to_csv(&self.a)).map_err(|e| Error::io(&csv_path, e))?;
        let sidecar = AtlasSidecar {
            class_label: self.class_label.clone(),
            kernel_mode: self.kernel_mode,
            r: self.r(),
            n_subjects: self.subject_weights.w.len(),
            iterations: self.iterations,
            params: self.params,
            input_digest: input_digest.map(str::to_string),
            subject_weights: self.subject_weights.w.clone(),
            cluster_labels: self.cluster_labels.clone(),
            frobenius_trace: self.frobenius_trace.clone(),
        };
        let json_path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }
}

/// JSON metadata written next to an atlas matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasSidecar {
    pub class_label: String,
    pub kernel_mode: KernelMode,
    pub r: usize,
    pub n_subjects: usize,
    pub iterations: usize,
    pub params: AtlasParams,
    pub input_digest: Option<String>,
    pub subject_weights: Vec<f64>,
    pub cluster_labels: Option<Vec<usize>>,
    pub frobenius_trace: Vec<f64>,
}

/// Per-subject topology used as the kernel base for a mode.
pub fn subject_topologies(p: &Population, mode: KernelMode) -> Result<Vec<AvgTopologyMatrix>> {
    p.subjects()
        .par_iter()
        .map(|c| match mode.centrality() {
            None => avg_topology(c),
            Some(which) => single_topology(c, which),
        })
        .collect()
}

/// End-to-end atlas estimation for one class.
pub fn estimate_atlas(p: &Population, mode: KernelMode, params: &AtlasParams) -> Result<Atlas> {
    let n = p.len();
    if n < 2 {
        return Err(Error::PopulationTooSmall(n));
    }
    if params.n_star == 0 {
        return Err(Error::InvalidParameter("at least one diffusion round is required".into()));
    }
    let r = p.r();
    if params.knn == 0 || params.knn > r - 1 {
        return Err(Error::InvalidNeighborCount { q: params.knn, max: r - 1 });
    }

    let topologies = subject_topologies(p, mode)?;
    let (weights, cluster_labels) = match mode {
        KernelMode::MultiTopology => {
            let features = stack_features(p)?;
            let clusters = cluster(&features, params.n_clusters, params.seed)?;
            let w = learn_subject_weights(&topologies, &clusters, params.lambda, params.sigma)?;
            (w, Some(clusters.labels))
        }
        _ => (SubjectWeights::uniform(n), None),
    };

    let (status, local): (Vec<StatusMatrix>, Vec<LocalKernel>) = p
        .subjects()
        .par_iter()
        .zip(topologies.par_iter())
        .zip(weights.w.par_iter())
        .map(|((x, t), &w)| {
            let k = normalization_kernel(w, t)?;
            Ok((status_matrix(x, &k)?, local_kernel(x, params.knn)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();

    let run = cross_diffuse_traced(&status, &local, params.n_star)?;
    let a = fuse(&run.status)?;
    Ok(Atlas {
        a,
        class_label: p.class_label().to_string(),
        kernel_mode: mode,
        iterations: params.n_star,
        params: *params,
        subject_weights: weights,
        cluster_labels,
        frobenius_trace: run.frobenius_trace,
    })
}
