//! Connectomes, populations and the upper-triangle feature layout.
//!
//! A [`Connectome`] is a symmetric, nonnegative, zero-diagonal weight matrix
//! over `r` regions. Files on disk are plain CSV: `r` lines of `r` decimals.
//! Ingestion repairs small defects instead of rejecting them: the matrix is
//! symmetrized as `(M + Mᵀ)/2`, negative entries are replaced by their
//! absolute value and the diagonal is zeroed.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Asymmetry below this is treated as rounding noise and repaired silently.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Smallest supported number of regions.
pub const MIN_ROIS: usize = 3;

/// Symmetric nonnegative weighted adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectome {
    weights: Array2<f64>,
}

impl Connectome {
    /// Validates an already clean matrix without modifying it.
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        check_shape(&weights)?;
        let r = weights.nrows();
        for k in 0..r {
            if weights[[k, k]] != 0.0 {
                return Err(Error::InvalidConnectome(format!("diagonal entry ({k}, {k}) is {}", weights[[k, k]])));
            }
            for l in 0..r {
                let w = weights[[k, l]];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidConnectome(format!("entry ({k}, {l}) is {w}")));
                }
                if (w - weights[[l, k]]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::InvalidConnectome(format!("entries ({k}, {l}) and ({l}, {k}) differ")));
                }
            }
        }
        Ok(Self { weights })
    }

    /// Applies the ingestion repairs: symmetrize, absolute value, zero diagonal.
    pub fn repaired(raw: Array2<f64>) -> Result<Self> {
        check_shape(&raw)?;
        let r = raw.nrows();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConnectome("non-finite entry".into()));
        }
        let mut max_asym = 0.0_f64;
        let mut weights = Array2::zeros((r, r));
        for k in 0..r {
            for l in 0..r {
                if k == l {
                    continue;
                }
                let (a, b) = (raw[[k, l]], raw[[l, k]]);
                max_asym = max_asym.max((a - b).abs());
                weights[[k, l]] = ((a + b) / 2.0).abs();
            }
        }
        if max_asym > SYMMETRY_TOLERANCE {
            log::warn!("symmetrized input with max asymmetry {max_asym:e}");
        }
        Ok(Self { weights })
    }

    /// Number of regions.
    pub fn r(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.weights[[k, l]]
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }

    /// Connectome scaled by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale factor {factor}")));
        }
        Ok(Self { weights: &self.weights * factor })
    }

    /// Relabels regions: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let r = self.r();
        if perm.len() != r {
            return Err(Error::DimensionMismatch { expected: r, found: perm.len() });
        }
        let mut seen = vec![false; r];
        for &p in perm {
            if p >= r || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
        }
        let weights = Array2::from_shape_fn((r, r), |(i, j)| self.weights[[perm[i], perm[j]]]);
        Ok(Self { weights })
    }

    /// Whether at least one edge has positive weight.
    pub fn has_edges(&self) -> bool {
        self.weights.iter().any(|&w| w > 0.0)
    }
}

fn check_shape(m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::NonSquare { rows, row: 0, cols });
    }
    if rows < MIN_ROIS {
        return Err(Error::TooFewRois(rows));
    }
    Ok(())
}

/// Parses a connectome from CSV text.
pub fn parse_connectome(text: &str, path: &Path) -> Result<Connectome> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("non-numeric token {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let r = rows.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != r {
            return Err(Error::NonSquare { rows: r, row: i, cols: row.len() });
        }
    }
    if r < MIN_ROIS {
        return Err(Error::TooFewRois(r));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let raw = Array2::from_shape_vec((r, r), flat).expect("shape checked above");
    Connectome::repaired(raw)
}

/// Reads a connectome CSV file, applying the ingestion repairs.
pub fn load_connectome(path: impl AsRef<Path>) -> Result<Connectome> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_connectome(&text, path)
}

/// Formats a matrix as CSV with shortest round-trip decimals.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 12);
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Writes a connectome so that [`load_connectome`] reproduces it bit-exactly.
pub fn write_connectome(c: &Connectome, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_to_csv(&c.weights)).map_err(|e| Error::io(path, e))
}

/// Upper off-diagonal entries of a connectome, row-major over `k < l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Number of upper off-diagonal pairs for `r` regions.
pub fn n_edges(r: usize) -> usize {
    r * r.saturating_sub(1) / 2
}

/// Iterates over `(k, l)` with `k < l` in row-major order.
pub fn upper_pairs(r: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..r).flat_map(move |k| (k + 1..r).map(move |l| (k, l)))
}

pub fn vectorize(c: &Connectome) -> FeatureVector {
    FeatureVector(upper_pairs(c.r()).map(|(k, l)| c.weights[[k, l]]).collect())
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &FeatureVector) -> Result<Connectome> {
    let n = v.len();
    // solve r(r-1)/2 = n
    let r = ((1.0 + (1.0 + 8.0 * n as f64).sqrt()) / 2.0).round() as usize;
    if n_edges(r) != n {
        return Err(Error::InvalidParameter(format!("{n} is not a triangular edge count")));
    }
    let mut w = Array2::zeros((r, r));
    for ((k, l), &x) in upper_pairs(r).zip(v.values()) {
        w[[k, l]] = x;
        w[[l, k]] = x;
    }
    Connectome::new(w)
}

/// A set of connectomes sharing one class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    class_label: String,
    subject_ids: Vec<String>,
    subjects: Vec<Connectome>,
}

impl Population {
    pub fn new(class_label: impl Into<String>, subject_ids: Vec<String>, subjects: Vec<Connectome>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        if subject_ids.len() != subjects.len() {
            return Err(Error::InvalidPopulation(format!("{} ids for {} subjects", subject_ids.len(), subjects.len())));
        }
        let r = subjects[0].r();
        if let Some(bad) = subjects.iter().find(|s| s.r() != r) {
            return Err(Error::DimensionMismatch { expected: r, found: bad.r() });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = subject_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidPopulation(format!("duplicate subject id {dup:?}")));
        }
        Ok(Self { class_label: class_label.into(), subject_ids, subjects })
    }

    /// Builds a population with ids `<label>-0`, `<label>-1`, ...
    pub fn with_generated_ids(class_label: impl Into<String>, subjects: Vec<Connectome>) -> Result<Self> {
        let label = class_label.into();
        let ids = (0..subjects.len()).map(|i| format!("{label}-{i}")).collect();
        Self::new(label, ids, subjects)
    }

    pub fn class_label(&self) -> &str {
        &self.class_label
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn subjects(&self) -> &[Connectome] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn r(&self) -> usize {
        self.subjects[0].r()
    }

    /// Sub-population keeping the given indices in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.subject_ids[i].clone()).collect();
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        Self::new(self.class_label.clone(), ids, subjects)
    }
}

/// Data feature matrix: row `i` is the vectorized subject `i`.
pub fn stack_features(p: &Population) -> Result<Array2<f64>> {
    if p.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let d = n_edges(p.r());
    let mut out = Array2::zeros((p.len(), d));
    for (mut row, s) in out.rows_mut().into_iter().zip(p.subjects()) {
        for (dst, (k, l)) in row.iter_mut().zip(upper_pairs(s.r())) {
            *dst = s.weights[[k, l]];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Connectome> {
        parse_connectome(text, Path::new("test.csv"))
    }

    #[test]
    fn zero_file_loads_as_zero_matrix() {
        let c = parse("0,0,0\n0,0,0\n0,0,0\n").unwrap();
        assert_eq!(c.r(), 3);
        assert!(c.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn symmetric_file_comes_back_unchanged() {
        let c = parse("0,1,0\n1,0,0\n0,0,0\n").unwrap();
        assert_eq!(c.weights(), &array![[0., 1., 0.], [1., 0., 0.], [0., 0., 0.]]);
    }

    #[test]
    fn negative_weights_become_absolute() {
        let c = parse("0,-0.4,0\n-0.4,0,0\n0,0,0\n").unwrap();
        assert_eq!(c.weight(0, 1), 0.4);
        assert_eq!(c.weight(1, 0), 0.4);
    }

    #[test]
    fn asymmetry_and_diagonal_are_repaired() {
        let c = parse("5,1,0\n0.5,2,0\n0,0,3\n").unwrap();
        assert_eq!(c.weight(0, 1), 0.75);
        assert_eq!(c.weight(1, 0), 0.75);
        assert_eq!(c.weight(0, 0), 0.0);
        assert_eq!(c.weight(2, 2), 0.0);
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(matches!(parse("0,1\n1,0\n"), Err(Error::TooFewRois(2))));
        assert!(matches!(parse("0,1,2\n1,0\n2,0,0\n"), Err(Error::NonSquare { .. })));
        assert!(matches!(parse("0,1,x\n1,0,0\n0,0,0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("0,1,2,3\n1,0,0,0\n2,0,0,0\n"), Err(Error::NonSquare { .. })));
    }

    #[test]
    fn strict_constructor_rejects_invalid_matrices() {
        assert!(Connectome::new(array![[0., 1., 0.], [2., 0., 0.], [0., 0., 0.]]).is_err());
        assert!(Connectome::new(array![[1., 0., 0.], [0., 0., 0.], [0., 0., 0.]]).is_err());
        assert!(Connectome::new(array![[0., -1., 0.], [-1., 0., 0.], [0., 0., 0.]]).is_err());
    }

    #[test]
    fn vectorize_unrolls_upper_triangle() {
        let c = Connectome::new(array![[0., 1., 2.], [1., 0., 3.], [2., 3., 0.]]).unwrap();
        assert_eq!(vectorize(&c).values(), &[1., 2., 3.]);
        let z = Connectome::new(Array2::zeros((4, 4))).unwrap();
        assert_eq!(vectorize(&z).values(), &[0.0; 6]);
    }

    #[test]
    fn stack_features_keeps_order() {
        let a = Connectome::new(array![[0., 1., 2.], [1., 0., 3.], [2., 3., 0.]]).unwrap();
        let b = Connectome::new(Array2::zeros((3, 3))).unwrap();
        let single = Population::with_generated_ids("x", vec![a.clone()]).unwrap();
        assert_eq!(stack_features(&single).unwrap(), array![[1., 2., 3.]]);
        let twin = Population::with_generated_ids("x", vec![a.clone(), a.clone()]).unwrap();
        let m = stack_features(&twin).unwrap();
        assert_eq!(m.row(0), m.row(1));
        let p = Population::with_generated_ids("x", vec![b, a.clone(), a]).unwrap();
        let m = stack_features(&p).unwrap();
        for (i, s) in p.subjects().iter().enumerate() {
            assert_eq!(m.row(i).to_vec(), vectorize(s).into_inner());
        }
    }

    #[test]
    fn population_validation() {
        let a = Connectome::new(Array2::zeros((3, 3))).unwrap();
        let b = Connectome::new(Array2::zeros((4, 4))).unwrap();
        assert!(matches!(Population::new("c", vec![], vec![]), Err(Error::EmptyPopulation)));
        assert!(Population::new("c", vec!["a".into(), "a".into()], vec![a.clone(), a.clone()]).is_err());
        assert!(Population::new("c", vec!["a".into(), "b".into()], vec![a, b]).is_err());
    }

    fn connectome_strategy() -> impl Strategy<Value = Connectome> {
        (3usize..8).prop_flat_map(|r| {
            proptest::collection::vec(0.0f64..10.0, n_edges(r)).prop_map(|v| devectorize(&FeatureVector(v)).unwrap())
        })
    }

    proptest! {
        #[test]
        fn devectorize_inverts_vectorize(c in connectome_strategy()) {
            prop_assert_eq!(devectorize(&vectorize(&c)).unwrap(), c);
        }

        #[test]
        fn write_then_load_is_bit_exact(c in connectome_strategy()) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_connectome(&c, &path).unwrap();
            prop_assert_eq!(load_connectome(&path).unwrap(), c);
        }
    }
}
