//! Atlas differencing, discriminative edge selection and classification.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connectome::{upper_pairs, Connectome, Population};
use crate::diffusion::{estimate_atlas, Atlas, AtlasParams, KernelMode};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

pub const DEFAULT_NF: usize = 5;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPOCHS: usize = 1000;
pub const SVM_TOL: f64 = 1e-8;

/// Entrywise absolute difference of two atlases, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    pub r_mat: Array2<f64>,
}

pub fn residual(a1: &Atlas, a2: &Atlas) -> Result<ResidualMatrix> {
    if a1.kernel_mode != a2.kernel_mode {
        return Err(Error::ModeMismatch(a1.kernel_mode.to_string(), a2.kernel_mode.to_string()));
    }
    residual_of(&a1.a, &a2.a)
}

/// [`residual`] on bare matrices.
pub fn residual_of(a1: &Array2<f64>, a2: &Array2<f64>) -> Result<ResidualMatrix> {
    if a1.dim() != a2.dim() {
        return Err(Error::DimensionMismatch { expected: a1.nrows(), found: a2.nrows() });
    }
    let mut r_mat = (a1 - a2).mapv(f64::abs);
    r_mat.diag_mut().fill(0.0);
    Ok(ResidualMatrix { r_mat })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedEdge {
    pub k: usize,
    pub l: usize,
    pub score: f64,
}

/// Strongest residual edges, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSelection {
    pub edges: Vec<SelectedEdge>,
    pub n_f: usize,
}

impl EdgeSelection {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.k, e.l))
    }
}

/// Top `n_f` strictly positive upper-triangular residuals; ties go to the
/// lexicographically smaller `(k, l)`.
pub fn select_top(r_mat: &ResidualMatrix, n_f: usize) -> Result<EdgeSelection> {
    if n_f == 0 {
        return Err(Error::InvalidParameter("n_f must be at least 1".into()));
    }
    let r = r_mat.r_mat.nrows();
    let mut edges: Vec<SelectedEdge> = upper_pairs(r)
        .map(|(k, l)| SelectedEdge { k, l, score: r_mat.r_mat[[k, l]] })
        .filter(|e| e.score > 0.0)
        .collect();
    edges.sort_by(|a, b| b.score.total_cmp(&a.score).then((a.k, a.l).cmp(&(b.k, b.l))));
    edges.truncate(n_f);
    Ok(EdgeSelection { edges, n_f })
}

pub fn extract_features(c: &Connectome, sel: &EdgeSelection) -> Result<Vec<f64>> {
    let r = c.r();
    sel.pairs()
        .map(|(k, l)| if k >= r || l >= r { Err(Error::IndexOutOfRange { k, l, r }) } else { Ok(c.weight(k, l)) })
        .collect()
}

/// `sign(w·x + b)` classifier; a zero margin predicts `+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_reg: f64,
}

impl LinearClassifier {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `(1/2)‖w‖² + C Σ max(0, 1 − y(w·x + b))`
    pub fn objective(&self, features: &Array2<f64>, labels: &[f64]) -> f64 {
        svm_primal(&self.weights, self.bias, self.c_reg, features, labels)
    }
}

pub fn svm_primal(w: &[f64], b: f64, c_reg: f64, features: &Array2<f64>, labels: &[f64]) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = features
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(x, y)| {
            let m = x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
            (1.0 - y * m).max(0.0)
        })
        .sum();
    reg + c_reg * hinge
}

fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Soft-margin linear SVM with an unregularized bias, trained in the dual.
///
/// The dual keeps `Σ y_t α_t = 0`, so coordinates move in pairs: each epoch
/// visits every index in a seeded random order and pairs it with its most
/// violating partner. Training stops after `epochs` sweeps or once the
/// maximal KKT violation drops to [`SVM_TOL`].
pub fn train_svm(
    features: &Array2<f64>,
    labels: &[f64],
    c_reg: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearClassifier> {
    let (n, d) = features.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::DegenerateLabels("labels must be +1 or -1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::DegenerateLabels("training set holds a single class".into()));
    }
    if !(c_reg > 0.0 && c_reg.is_finite()) {
        return Err(Error::InvalidParameter(format!("c_reg {c_reg}")));
    }

    let gram = Array2::from_shape_fn((n, n), |(s, t)| dot(features.row(s), features.row(t)));
    let y = labels;
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − Σα, Q_st = y_s y_t x_s·x_t
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c_reg) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y < 0.0 && a < c_reg) || (y > 0.0 && a > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let score = |t: usize, g: &[f64]| -y[t] * g[t];
            let mut best: Option<(usize, usize, f64)> = None;
            if in_up(alpha[i], y[i]) {
                if let Some(j) = (0..n)
                    .filter(|&t| in_low(alpha[t], y[t]))
                    .min_by(|&a, &b| score(a, &grad).total_cmp(&score(b, &grad)))
                {
                    best = Some((i, j, score(i, &grad) - score(j, &grad)));
                }
            }
            if in_low(alpha[i], y[i]) {
                if let Some(j) = (0..n)
                    .filter(|&t| in_up(alpha[t], y[t]))
                    .max_by(|&a, &b| score(a, &grad).total_cmp(&score(b, &grad)).then(b.cmp(&a)))
                {
                    let v = score(j, &grad) - score(i, &grad);
                    if best.is_none_or(|(_, _, bv)| v > bv) {
                        best = Some((j, i, v));
                    }
                }
            }
            let Some((u, v, violation)) = best else { continue };
            if violation <= SVM_TOL || u == v {
                continue;
            }
            let curvature = (gram[[u, u]] + gram[[v, v]] - 2.0 * gram[[u, v]]).max(1e-12);
            let cap_u = if y[u] > 0.0 { c_reg - alpha[u] } else { alpha[u] };
            let cap_v = if y[v] > 0.0 { alpha[v] } else { c_reg - alpha[v] };
            let step = violation / curvature;
            let t = step.min(cap_u).min(cap_v);
            let old_u = alpha[u];
            let old_v = alpha[v];
            alpha[u] = if t == cap_u {
                if y[u] > 0.0 {
                    c_reg
                } else {
                    0.0
                }
            } else {
                old_u + y[u] * t
            };
            alpha[v] = if t == cap_v {
                if y[v] > 0.0 {
                    0.0
                } else {
                    c_reg
                }
            } else {
                old_v - y[v] * t
            };
            let du = alpha[u] - old_u;
            let dv = alpha[v] - old_v;
            for s in 0..n {
                grad[s] += y[s] * (y[u] * gram[[s, u]] * du + y[v] * gram[[s, v]] * dv);
            }
        }
        if max_violation(&alpha, &grad, y, c_reg) <= SVM_TOL {
            break;
        }
    }

    let mut weights = vec![0.0; d];
    for (t, row) in features.rows().into_iter().enumerate() {
        let coef = alpha[t] * y[t];
        if coef != 0.0 {
            for (w, x) in weights.iter_mut().zip(row) {
                *w += coef * x;
            }
        }
    }
    let free: Vec<f64> = (0..n).filter(|&t| alpha[t] > 0.0 && alpha[t] < c_reg).map(|t| -y[t] * grad[t]).collect();
    let bias = if free.is_empty() {
        let (m_up, m_low) = violation_bounds(&alpha, &grad, y, c_reg);
        (m_up + m_low) / 2.0
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    Ok(LinearClassifier { weights, bias, c_reg })
}

fn violation_bounds(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> (f64, f64) {
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    for t in 0..alpha.len() {
        let s = -y[t] * grad[t];
        if (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0) {
            m_up = m_up.max(s);
        }
        if (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0) {
            m_low = m_low.min(s);
        }
    }
    (m_up, m_low)
}

fn max_violation(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (m_up, m_low) = violation_bounds(alpha, grad, y, c);
    m_up - m_low
}

/// Cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    pub mode: KernelMode,
    pub atlas: AtlasParams,
    pub n_folds: usize,
    pub n_f: usize,
    pub c_reg: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            mode: KernelMode::MultiTopology,
            atlas: AtlasParams::default(),
            n_folds: DEFAULT_FOLDS,
            n_f: DEFAULT_NF,
            c_reg: DEFAULT_C,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_ids: Vec<String>,
    pub metrics: Metrics,
    pub edges: Vec<SelectedEdge>,
    pub classifier: LinearClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Class predicted as `+1`; sensitivity is measured on it.
    pub positive_label: String,
    pub negative_label: String,
    pub params: CvParams,
    pub input_digest: Option<String>,
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
    pub std: Metrics,
}

impl CvReport {
    /// `fold,rank,k,l,score` rows for every fold's selected edges.
    pub fn edges_csv(&self) -> String {
        let mut out = String::from("fold,rank,k,l,score\n");
        for f in &self.folds {
            for (rank, e) in f.edges.iter().enumerate() {
                out.push_str(&format!("{},{},{},{},{}\n", f.fold, rank, e.k, e.l, e.score));
            }
        }
        out
    }
}

/// Stratified fold index for every subject of a class.
fn stratify(n: usize, n_folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold = vec![0; n];
    for (m, &i) in order.iter().enumerate() {
        fold[i] = m % n_folds;
    }
    fold
}

fn summarize(folds: &[FoldReport]) -> (Metrics, Metrics) {
    let n = folds.len() as f64;
    let stat = |get: fn(&Metrics) -> f64| {
        let mean = folds.iter().map(|f| get(&f.metrics)).sum::<f64>() / n;
        let var = if folds.len() > 1 {
            folds.iter().map(|f| (get(&f.metrics) - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    let (am, asd) = stat(|m| m.accuracy);
    let (sm, ssd) = stat(|m| m.sensitivity);
    let (pm, psd) = stat(|m| m.specificity);
    (
        Metrics { accuracy: am, sensitivity: sm, specificity: pm },
        Metrics { accuracy: asd, sensitivity: ssd, specificity: psd },
    )
}

/// Stratified k-fold evaluation: per fold, both class atlases are rebuilt
/// from training subjects only, the top residual edges are selected and a
/// linear SVM is trained on them.
pub fn run_cv_populations(positive: &Population, negative: &Population, params: &CvParams) -> Result<CvReport> {
    if params.n_folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {}", params.n_folds)));
    }
    if positive.r() != negative.r() {
        return Err(Error::DimensionMismatch { expected: positive.r(), found: negative.r() });
    }
    for p in [positive, negative] {
        if p.len() < params.n_folds {
            return Err(Error::ClassTooSmall {
                label: p.class_label().to_string(),
                count: p.len(),
                folds: params.n_folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pos_fold = stratify(positive.len(), params.n_folds, &mut rng);
    let neg_fold = stratify(negative.len(), params.n_folds, &mut rng);

    let folds = (0..params.n_folds)
        .into_par_iter()
        .map(|f| run_fold(f, positive, negative, &pos_fold, &neg_fold, params))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = summarize(&folds);
    Ok(CvReport {
        positive_label: positive.class_label().to_string(),
        negative_label: negative.class_label().to_string(),
        params: params.clone(),
        input_digest: None,
        folds,
        mean,
        std,
    })
}

fn split(assign: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assign.len()).partition(|&i| assign[i] != fold)
}

fn run_fold(
    fold: usize,
    positive: &Population,
    negative: &Population,
    pos_fold: &[usize],
    neg_fold: &[usize],
    params: &CvParams,
) -> Result<FoldReport> {
    let (pos_train, pos_test) = split(pos_fold, fold);
    let (neg_train, neg_test) = split(neg_fold, fold);
    let atlas_pos = estimate_atlas(&positive.subset(&pos_train)?, params.mode, &params.atlas)?;
    let atlas_neg = estimate_atlas(&negative.subset(&neg_train)?, params.mode, &params.atlas)?;
    let sel = select_top(&residual(&atlas_pos, &atlas_neg)?, params.n_f)?;
    if sel.is_empty() {
        return Err(Error::NoDiscriminativeEdges);
    }

    let rows = |pop: &Population, idx: &[usize]| -> Result<Vec<Vec<f64>>> {
        idx.iter().map(|&i| extract_features(&pop.subjects()[i], &sel)).collect()
    };
    let mut train_rows = rows(positive, &pos_train)?;
    train_rows.extend(rows(negative, &neg_train)?);
    let mut train_labels = vec![1.0; pos_train.len()];
    train_labels.extend(vec![-1.0; neg_train.len()]);
    let x = Array2::from_shape_vec((train_rows.len(), sel.len()), train_rows.into_iter().flatten().collect())
        .expect("rows have one value per selected edge");
    let clf = train_svm(&x, &train_labels, params.c_reg, params.epochs, params.seed)?;

    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for row in rows(positive, &pos_test)? {
        if clf.predict(&row) > 0.0 {
            tp += 1
        } else {
            fn_ += 1
        }
    }
    for row in rows(negative, &neg_test)? {
        if clf.predict(&row) < 0.0 {
            tn += 1
        } else {
            fp += 1
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    let test_ids = pos_test
        .iter()
        .map(|&i| positive.subject_ids()[i].clone())
        .chain(neg_test.iter().map(|&i| negative.subject_ids()[i].clone()))
        .collect();
    Ok(FoldReport {
        fold,
        n_train: pos_train.len() + neg_train.len(),
        n_test: pos_test.len() + neg_test.len(),
        test_ids,
        metrics: Metrics {
            accuracy: ratio(tp + tn, fp + fn_),
            sensitivity: ratio(tp, fn_),
            specificity: ratio(tn, fp),
        },
        edges: sel.edges,
        classifier: clf,
    })
}

/// Cross-validation over a two-class manifest. The positive class is
/// `positive_label` if given, otherwise the lexicographically first label.
pub fn run_cv(manifest: &DatasetManifest, params: &CvParams, positive_label: Option<&str>) -> Result<CvReport> {
    let (first, second) = manifest.load_two_classes()?;
    let (pos, neg) = match positive_label {
        None => (first, second),
        Some(l) if l == first.class_label() => (first, second),
        Some(l) if l == second.class_label() => (second, first),
        Some(l) => return Err(Error::Manifest(format!("class {l:?} not in manifest"))),
    };
    let mut report = run_cv_populations(&pos, &neg, params)?;
    report.input_digest = Some(manifest.digest()?);
    Ok(report)
}
