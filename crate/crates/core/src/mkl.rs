//! Supervised subject weighting by margin-based multiple kernel learning.
//!
//! Every training subject contributes one rank-one base kernel `s sᵀ`, where
//! `s(a) = exp(−‖t_a − t_i‖² / 2σ²)` compares the subject's topology diagonal
//! `t_i` to every other subject's. The margin problem
//!
//! ```text
//! min_γ  γᵀ Y K̂ Y γ + λ‖γ‖²,   K̂ = (1/n) Σ_i gram_i / tr(gram_i)
//! ```
//!
//! is solved over the product of one probability simplex per label group,
//! and subject `i` receives the closed-form weight `γᵀ Y (gram_i/tr) Y γ`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::error::{Error, Result};
use crate::topology::AvgTopologyMatrix;

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const QP_TOL: f64 = 1e-10;
pub const QP_MAX_ITER: usize = 50_000;
pub const MIN_WEIGHT: f64 = 1e-12;

/// RBF bandwidth for the base kernels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median of the nonzero pairwise topology distances.
    #[default]
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("expected `auto` or a number, got {s:?}"))?;
        if v > 0.0 && v.is_finite() {
            Ok(Bandwidth::Fixed(v))
        } else {
            Err(format!("bandwidth must be positive, got {v}"))
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::Auto => f.write_str("auto"),
            Bandwidth::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Rank-one Gram matrix `s sᵀ` of one training subject.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseKernel {
    similarity: Vec<f64>,
    trace: f64,
}

impl BaseKernel {
    pub fn from_similarity(similarity: Vec<f64>) -> Self {
        let trace = similarity.iter().map(|v| v * v).sum();
        Self { similarity, trace }
    }

    /// The vector `s` with `gram = s sᵀ`.
    pub fn similarity(&self) -> &[f64] {
        &self.similarity
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn len(&self) -> usize {
        self.similarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.similarity.is_empty()
    }

    pub fn gram(&self) -> Array2<f64> {
        let s = &self.similarity;
        Array2::from_shape_fn((s.len(), s.len()), |(a, b)| s[a] * s[b])
    }
}

fn pairwise_sq_dists(topologies: &[AvgTopologyMatrix]) -> Array2<f64> {
    let n = topologies.len();
    let mut d = Array2::zeros((n, n));
    for a in 0..n {
        for b in a + 1..n {
            let v: f64 = topologies[a].diag().iter().zip(topologies[b].diag()).map(|(x, y)| (x - y) * (x - y)).sum();
            d[[a, b]] = v;
            d[[b, a]] = v;
        }
    }
    d
}

/// Median of the nonzero pairwise distances, or 1 if all coincide.
pub fn median_bandwidth(topologies: &[AvgTopologyMatrix]) -> f64 {
    let d2 = pairwise_sq_dists(topologies);
    let n = topologies.len();
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .map(|(a, b)| d2[[a, b]].sqrt())
        .filter(|&d| d > 0.0)
        .collect();
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    if m % 2 == 1 {
        dists[m / 2]
    } else {
        (dists[m / 2 - 1] + dists[m / 2]) / 2.0
    }
}

pub fn build_base_kernels(topologies: &[AvgTopologyMatrix], sigma: Bandwidth) -> Result<Vec<BaseKernel>> {
    let n = topologies.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 training subjects, got {n}")));
    }
    let r = topologies[0].r();
    if let Some(t) = topologies.iter().find(|t| t.r() != r) {
        return Err(Error::DimensionMismatch { expected: r, found: t.r() });
    }
    let sigma = match sigma {
        Bandwidth::Auto => median_bandwidth(topologies),
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => return Err(Error::InvalidBandwidth(s)),
    };
    let d2 = pairwise_sq_dists(topologies);
    let denom = 2.0 * sigma * sigma;
    Ok((0..n).map(|i| BaseKernel::from_similarity((0..n).map(|a| (-d2[[a, i]] / denom).exp()).collect())).collect())
}

/// Averaged trace-normalized kernel `K̂`.
pub fn combined_kernel(kernels: &[BaseKernel]) -> Array2<f64> {
    let n = kernels.len();
    let mut k = Array2::zeros((n, n));
    for kern in kernels {
        let s = kern.similarity();
        let scale = 1.0 / (kern.trace() * n as f64);
        for a in 0..n {
            let sa = s[a] * scale;
            for b in 0..n {
                k[[a, b]] += sa * s[b];
            }
        }
    }
    k
}

/// Solution of the simplex-constrained margin problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSolution {
    pub gamma: Vec<f64>,
    /// 0 for the `+1` group, 1 for the `−1` group.
    pub group_of: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn check_labels(labels: &[f64], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::DegenerateLabels("labels must be +1 or -1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::DegenerateLabels("both label groups must be non-empty".into()));
    }
    Ok(())
}

/// `(Y K̂ Y + λI) γ`
fn quad_apply(m: &Array2<f64>, labels: &[f64], lambda: f64, gamma: &[f64]) -> Vec<f64> {
    let yg: Array1<f64> = gamma.iter().zip(labels).map(|(g, y)| g * y).collect();
    let kyg = m.dot(&yg);
    kyg.iter().zip(labels).zip(gamma).map(|((v, y), g)| y * v + lambda * g).collect()
}

/// Objective value `γᵀ Y K̂ Y γ + λ‖γ‖²` for a given `K̂`.
pub fn gamma_objective(k_hat: &Array2<f64>, labels: &[f64], lambda: f64, gamma: &[f64]) -> f64 {
    quad_apply(k_hat, labels, lambda, gamma).iter().zip(gamma).map(|(a, g)| a * g).sum()
}

fn largest_eigenvalue_psd(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut x = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let y = m.dot(&x);
        let norm = y.dot(&y).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = x.dot(&y);
        x = y / norm;
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

fn project_groups(v: &[f64], labels: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for sign in [1.0, -1.0] {
        let idx: Vec<usize> = (0..v.len()).filter(|&i| labels[i] == sign).collect();
        let proj = project_simplex(&idx.iter().map(|&i| v[i]).collect::<Vec<_>>());
        for (&i, p) in idx.iter().zip(proj) {
            out[i] = p;
        }
    }
    out
}

/// Projected gradient on the product of the two label-group simplices with
/// step `1/L`.
pub fn solve_gamma(kernels: &[BaseKernel], labels: &[f64], lambda: f64) -> Result<GammaSolution> {
    let n = kernels.len();
    check_labels(labels, n)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda {lambda}")));
    }
    if let Some(k) = kernels.iter().find(|k| k.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: k.len() });
    }
    let k_hat = combined_kernel(kernels);
    // Y K̂ Y shares its spectrum with K̂.
    let lipschitz = 2.0 * (largest_eigenvalue_psd(&k_hat) + lambda);
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let group_of: Vec<usize> = labels.iter().map(|&y| usize::from(y < 0.0)).collect();
    let n_pos = group_of.iter().filter(|&&g| g == 0).count() as f64;
    let n_neg = n as f64 - n_pos;
    let mut gamma: Vec<f64> = group_of.iter().map(|&g| if g == 0 { 1.0 / n_pos } else { 1.0 / n_neg }).collect();

    let mut iterations = 0;
    while iterations < QP_MAX_ITER {
        iterations += 1;
        let grad = quad_apply(&k_hat, labels, lambda, &gamma);
        let trial: Vec<f64> = gamma.iter().zip(&grad).map(|(g, d)| g - step * 2.0 * d).collect();
        let next = project_groups(&trial, labels);
        let delta = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma = next;
        if delta <= QP_TOL {
            break;
        }
    }
    let objective = gamma_objective(&k_hat, labels, lambda, &gamma);
    Ok(GammaSolution { gamma, group_of, objective, iterations })
}

/// Norm of the projected-gradient mapping at `gamma`, a first-order
/// optimality measure (zero exactly at the optimum).
pub fn projected_gradient_norm(kernels: &[BaseKernel], labels: &[f64], lambda: f64, gamma: &[f64]) -> f64 {
    let k_hat = combined_kernel(kernels);
    let grad = quad_apply(&k_hat, labels, lambda, gamma);
    let trial: Vec<f64> = gamma.iter().zip(&grad).map(|(g, d)| g - 2.0 * d).collect();
    project_groups(&trial, labels).iter().zip(gamma).map(|(p, g)| (p - g).powi(2)).sum::<f64>().sqrt()
}

/// Closed-form weights `w_i = γᵀ Y (gram_i / tr_i) Y γ = (γᵀ Y s_i)² / ‖s_i‖²`.
pub fn compute_weights(gamma: &GammaSolution, kernels: &[BaseKernel], labels: &[f64]) -> Vec<f64> {
    kernels
        .iter()
        .map(|k| {
            let m: f64 = gamma.gamma.iter().zip(labels).zip(k.similarity()).map(|((g, y), s)| g * y * s).sum();
            m * m / k.trace()
        })
        .collect()
}

/// Per-subject weights, rescaled to mean one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectWeights {
    pub w: Vec<f64>,
}

impl SubjectWeights {
    pub fn uniform(n: usize) -> Self {
        Self { w: vec![1.0; n] }
    }

    fn mean_one(raw: Vec<f64>) -> Self {
        let n = raw.len() as f64;
        let total: f64 = raw.iter().sum();
        if total.is_nan() || total <= f64::MIN_POSITIVE || total.is_infinite() {
            // every subject sits exactly between the groups: no preference
            return Self::uniform(raw.len());
        }
        Self { w: raw.into_iter().map(|v| v * n / total).collect() }
    }
}

/// Learns one weight per training subject from its cluster label.
///
/// A single populated cluster gives uniform weights; two clusters are one
/// solve; more clusters run one-vs-rest and average the weights.
pub fn learn_subject_weights(
    topologies: &[AvgTopologyMatrix],
    clusters: &ClusterAssignment,
    lambda: f64,
    sigma: Bandwidth,
) -> Result<SubjectWeights> {
    let n = topologies.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 training subjects, got {n}")));
    }
    if clusters.labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: clusters.labels.len() });
    }
    let present = clusters.non_empty();
    if present.len() <= 1 {
        return Ok(SubjectWeights::uniform(n));
    }
    let kernels = build_base_kernels(topologies, sigma)?;
    let rounds: &[usize] = if present.len() == 2 { &present[..1] } else { &present };
    let mut acc = vec![0.0; n];
    for &positive in rounds {
        let labels: Vec<f64> = clusters.labels.iter().map(|&c| if c == positive { 1.0 } else { -1.0 }).collect();
        let gamma = solve_gamma(&kernels, &labels, lambda)?;
        for (a, w) in acc.iter_mut().zip(compute_weights(&gamma, &kernels, &labels)) {
            *a += w;
        }
    }
    let rounds = rounds.len() as f64;
    Ok(SubjectWeights::mean_one(acc.into_iter().map(|a| a / rounds).collect()))
}

/// Diagonal of a subject's normalization kernel `w_i · T̄_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationKernel {
    pub diag: Vec<f64>,
}

pub fn normalization_kernel(w_i: f64, t: &AvgTopologyMatrix) -> Result<NormalizationKernel> {
    if w_i.is_nan() || w_i <= MIN_WEIGHT || w_i.is_infinite() {
        return Err(Error::VanishingWeight(w_i));
    }
    Ok(NormalizationKernel { diag: t.diag().iter().map(|d| w_i * d).collect() })
}
