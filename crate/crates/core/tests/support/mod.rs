//! Brute-force and straight-line reference implementations used as test
//! oracles. Nothing here calls into the algorithms under test; inputs and
//! outputs are plain matrices and vectors.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric nonnegative weights with zero diagonal; each off-diagonal
/// entry is zero with probability `p_zero`, otherwise uniform in `[lo, 1)`.
pub fn random_weights(r: usize, p_zero: f64, lo: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut w = Array2::zeros((r, r));
    for k in 0..r {
        for l in k + 1..r {
            let v = if rng.random::<f64>() < p_zero { 0.0 } else { rng.random_range(lo..1.0) };
            w[[k, l]] = v;
            w[[l, k]] = v;
        }
    }
    w
}

/// Like [`random_weights`] but with a guaranteed Hamiltonian path, so the
/// graph is connected.
pub fn connected_weights(r: usize, p_zero: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut w = random_weights(r, p_zero, 0.05, rng);
    for k in 0..r - 1 {
        if w[[k, k + 1]] == 0.0 {
            let v = rng.random_range(0.05..1.0);
            w[[k, k + 1]] = v;
            w[[k + 1, k]] = v;
        }
    }
    w
}

pub fn row_sums(w: &Array2<f64>) -> Vec<f64> {
    (0..w.nrows()).map(|k| (0..w.ncols()).map(|l| w[[k, l]]).sum()).collect()
}

/// Unit-norm nonnegative eigenvector of the largest eigenvalue, via a full
/// symmetric eigendecomposition.
pub fn dense_eigenvector(w: &Array2<f64>) -> Vec<f64> {
    let r = w.nrows();
    let m = DMatrix::from_fn(r, r, |i, j| w[[i, j]]);
    let eig = SymmetricEigen::new(m);
    let top = (0..r).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| sign * x / norm).collect()
}

fn closeness_from(lengths: &[Vec<f64>]) -> Vec<f64> {
    let r = lengths.len();
    (0..r)
        .map(|n| {
            let mut total = 0.0;
            for k in 0..r {
                if k == n {
                    continue;
                }
                if !lengths[n][k].is_finite() {
                    return 0.0;
                }
                total += lengths[n][k];
            }
            (r - 1) as f64 / total
        })
        .collect()
}

/// All-pairs shortest path lengths by enumerating every simple path.
pub fn path_lengths_exhaustive(w: &Array2<f64>) -> Vec<Vec<f64>> {
    let r = w.nrows();
    let mut best = vec![vec![f64::INFINITY; r]; r];
    fn walk(w: &Array2<f64>, start: usize, at: usize, len: f64, seen: &mut Vec<bool>, best: &mut [Vec<f64>]) {
        if len < best[start][at] {
            best[start][at] = len;
        }
        for next in 0..w.nrows() {
            if !seen[next] && w[[at, next]] > 0.0 {
                seen[next] = true;
                walk(w, start, next, len + 1.0 / w[[at, next]], seen, best);
                seen[next] = false;
            }
        }
    }
    for s in 0..r {
        let mut seen = vec![false; r];
        seen[s] = true;
        walk(w, s, s, 0.0, &mut seen, &mut best);
    }
    best
}

pub fn closeness_exhaustive(w: &Array2<f64>) -> Vec<f64> {
    closeness_from(&path_lengths_exhaustive(w))
}

/// All-pairs shortest path lengths through petgraph's Dijkstra.
pub fn path_lengths_petgraph(w: &Array2<f64>) -> Vec<Vec<f64>> {
    let r = w.nrows();
    let mut g = UnGraph::<(), f64>::new_undirected();
    let nodes: Vec<NodeIndex> = (0..r).map(|_| g.add_node(())).collect();
    for k in 0..r {
        for l in k + 1..r {
            if w[[k, l]] > 0.0 {
                g.add_edge(nodes[k], nodes[l], 1.0 / w[[k, l]]);
            }
        }
    }
    (0..r)
        .map(|s| {
            let found = dijkstra(&g, nodes[s], None, |e| *e.weight());
            (0..r).map(|t| found.get(&nodes[t]).copied().unwrap_or(f64::INFINITY)).collect()
        })
        .collect()
}

pub fn closeness_petgraph(w: &Array2<f64>) -> Vec<f64> {
    closeness_from(&path_lengths_petgraph(w))
}

/// `s_i(a) = exp(-‖t_a - t_i‖² / 2σ²)`, one vector per subject.
pub fn rbf_similarities(t: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    let n = t.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|a| {
                    let d2: f64 = t[a].iter().zip(&t[i]).map(|(x, y)| (x - y).powi(2)).sum();
                    (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect()
}

/// `(1/n) Σ_i s_i s_iᵀ / tr(s_i s_iᵀ)` built entry by entry.
pub fn khat(sims: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = sims.len();
    let mut k = vec![vec![0.0; n]; n];
    for s in sims {
        let tr: f64 = (0..n).map(|a| s[a] * s[a]).sum();
        for a in 0..n {
            for b in 0..n {
                k[a][b] += s[a] * s[b] / tr / n as f64;
            }
        }
    }
    k
}

/// `γᵀ Y K̂ Y γ + λ‖γ‖²`.
pub fn qp_objective(k: &[Vec<f64>], y: &[f64], lambda: f64, gamma: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for a in 0..n {
        for b in 0..n {
            quad += gamma[a] * y[a] * k[a][b] * y[b] * gamma[b];
        }
    }
    quad + lambda * gamma.iter().map(|g| g * g).sum::<f64>()
}

/// Every point of the simplex over `dim` coordinates whose entries are
/// multiples of `1/steps`.
pub fn simplex_grid(dim: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(dim, left - c, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, steps, steps, &mut Vec::new(), &mut out);
    out
}

/// Minimum of the objective over the product of the two label simplices,
/// evaluated on a grid with `steps` subdivisions per simplex.
pub fn grid_search_gamma(k: &[Vec<f64>], y: &[f64], lambda: f64, steps: usize) -> (f64, Vec<f64>) {
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| y[i] < 0.0).collect();
    let gp = simplex_grid(pos.len(), steps);
    let gn = simplex_grid(neg.len(), steps);
    let mut best = (f64::INFINITY, Vec::new());
    let mut gamma = vec![0.0; y.len()];
    for a in &gp {
        for (slot, &i) in pos.iter().enumerate() {
            gamma[i] = a[slot];
        }
        for b in &gn {
            for (slot, &i) in neg.iter().enumerate() {
                gamma[i] = b[slot];
            }
            let v = qp_objective(k, y, lambda, &gamma);
            if v < best.0 {
                best = (v, gamma.clone());
            }
        }
    }
    best
}

/// `w_i = γᵀ Y (s_i s_iᵀ / tr) Y γ`, evaluated as a dense quadratic form.
pub fn closed_form_weights(sims: &[Vec<f64>], y: &[f64], gamma: &[f64]) -> Vec<f64> {
    let n = y.len();
    sims.iter()
        .map(|s| {
            let tr: f64 = s.iter().map(|v| v * v).sum();
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += gamma[a] * y[a] * s[a] * s[b] / tr * y[b] * gamma[b];
                }
            }
            acc
        })
        .collect()
}

/// Minimal-inertia split of the rows of `x` into two non-empty groups, by
/// trying every assignment. Returns labels normalized so row 0 is in group 0.
pub fn best_bipartition(x: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = x.len();
    let d = x[0].len();
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 0u32..(1 << n) {
        if mask & 1 != 0 || mask == 0 {
            continue;
        }
        let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
        let mut inertia = 0.0;
        for g in 0..2 {
            let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == g).map(|i| &x[i]).collect();
            let centroid: Vec<f64> =
                (0..d).map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64).collect();
            for m in &members {
                inertia += m.iter().zip(&centroid).map(|(a, c)| (a - c).powi(2)).sum::<f64>();
            }
        }
        if inertia < best.1 {
            best = (labels, inertia);
        }
    }
    best
}

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            for m in 0..n {
                out[i][j] += a[i][m] * b[m][j];
            }
        }
    }
    out
}

fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect()
}

/// Status matrix `x / 2K` with a one-half diagonal.
pub fn reference_status(x: &Array2<f64>, kdiag: &[f64]) -> Vec<Vec<f64>> {
    let r = x.nrows();
    (0..r).map(|k| (0..r).map(|l| if k == l { 0.5 } else { x[[k, l]] / (2.0 * kdiag[k]) }).collect()).collect()
}

/// KNN kernel: keep the `knn` largest off-diagonal weights per row (lower
/// index first on ties) and normalize them to sum to one.
pub fn reference_local(x: &Array2<f64>, knn: usize) -> Vec<Vec<f64>> {
    let r = x.nrows();
    let mut q = vec![vec![0.0; r]; r];
    for k in 0..r {
        let mut idx: Vec<usize> = (0..r).filter(|&l| l != k).collect();
        idx.sort_by(|&a, &b| x[[k, b]].partial_cmp(&x[[k, a]]).unwrap().then(a.cmp(&b)));
        let keep = &idx[..knn];
        let total: f64 = keep.iter().map(|&l| x[[k, l]]).sum();
        if total > 0.0 {
            for &l in keep {
                q[k][l] = x[[k, l]] / total;
            }
        }
    }
    q
}

/// Plain dense cross-diffusion followed by averaging.
pub fn reference_diffusion(status: Vec<Vec<Vec<f64>>>, local: &[Vec<Vec<f64>>], n_star: usize) -> Array2<f64> {
    let n = status.len();
    let r = status[0].len();
    let mut p = status;
    for _ in 0..n_star {
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut avg = vec![vec![0.0; r]; r];
            for (j, pj) in p.iter().enumerate() {
                if j == i {
                    continue;
                }
                for a in 0..r {
                    for b in 0..r {
                        avg[a][b] += pj[a][b] / (n - 1) as f64;
                    }
                }
            }
            let full = dense_mul(&dense_mul(&local[i], &avg), &transpose(&local[i]));
            let sym: Vec<Vec<f64>> =
                (0..r).map(|a| (0..r).map(|b| (full[a][b] + full[b][a]) / 2.0).collect()).collect();
            next.push(sym);
        }
        p = next;
    }
    Array2::from_shape_fn((r, r), |(a, b)| p.iter().map(|m| m[a][b]).sum::<f64>() / n as f64)
}

/// Classic SNF where each subject is normalized by its max-normalized
/// strength vector.
pub fn reference_degree_snf(subjects: &[Array2<f64>], knn: usize, n_star: usize) -> Array2<f64> {
    let status = subjects
        .iter()
        .map(|x| {
            let s = row_sums(x);
            let max = s.iter().copied().fold(0.0, f64::max);
            let k: Vec<f64> = s.iter().map(|v| v / max).collect();
            reference_status(x, &k)
        })
        .collect();
    let local: Vec<_> = subjects.iter().map(|x| reference_local(x, knn)).collect();
    reference_diffusion(status, &local, n_star)
}

pub fn svm_objective(w: &[f64], b: f64, c: f64, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let f: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            (1.0 - yi * f).max(0.0)
        })
        .sum();
    reg + c * hinge
}

/// Minimizes the 2-D soft-margin objective over `(w1, w2, b)` by repeated
/// grid refinement around the incumbent.
pub fn svm_grid_search(x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let mut center = [0.0, 0.0, 0.0];
    let mut half = 8.0;
    let mut best = f64::INFINITY;
    let steps = 40;
    for _ in 0..16 {
        let mut round_best = (best, center);
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let p = [
                        center[0] - half + 2.0 * half * i as f64 / steps as f64,
                        center[1] - half + 2.0 * half * j as f64 / steps as f64,
                        center[2] - half + 2.0 * half * k as f64 / steps as f64,
                    ];
                    let v = svm_objective(&p[..2], p[2], c, x, y);
                    if v < round_best.0 {
                        round_best = (v, p);
                    }
                }
            }
        }
        best = round_best.0;
        center = round_best.1;
        half /= 3.0;
    }
    best
}

pub fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.nrows() {
        for l in 0..a.ncols() {
            acc += (a[[k, l]] - b[[k, l]]).powi(2);
        }
    }
    acc.sqrt()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
