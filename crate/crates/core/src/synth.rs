//! Seeded two-class synthetic populations with planted structure.
//!
//! Random draws come from one ChaCha stream in a fixed order: cluster base
//! matrices, subject-to-cluster assignments, per-subject noise, then the
//! choice of discriminative edges. Class `B` equals class `A`'s generative
//! model plus `delta` on the chosen edges.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::connectome::{n_edges, upper_pairs, Connectome, Population};
use crate::error::{Error, Result};
use crate::manifest::{write_dataset, DatasetManifest};

pub const CLASS_A: &str = "A";
pub const CLASS_B: &str = "B";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub r: usize,
    pub n_per_class: usize,
    pub n_c: usize,
    pub n_disc: usize,
    pub delta: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { r: 30, n_per_class: 40, n_c: 3, n_disc: 20, delta: 0.3, noise: 0.05, seed: 0 }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.r < 3 {
            return bad(format!("r = {} < 3", self.r));
        }
        if self.n_per_class == 0 || self.n_c == 0 {
            return bad("n_per_class and n_c must be positive".into());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta = {}", self.delta));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise = {}", self.noise));
        }
        if self.n_disc > n_edges(self.r) {
            return bad(format!("n_disc = {} exceeds {} edges", self.n_disc, n_edges(self.r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub class_a: Population,
    pub class_b: Population,
    /// Planted discriminative edges `(k, l)` with `k < l`, sorted.
    pub ground_truth: Vec<(usize, usize)>,
    pub clusters_a: Vec<usize>,
    pub clusters_b: Vec<usize>,
}

/// Ground-truth file written next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    pub edges: Vec<(usize, usize)>,
    pub clusters_a: Vec<usize>,
    pub clusters_b: Vec<usize>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let r = spec.r;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let bases: Vec<Array2<f64>> = (0..spec.n_c)
        .map(|_| {
            let mut m = Array2::zeros((r, r));
            for (k, l) in upper_pairs(r) {
                let v = rng.random_range(0.1..=1.0);
                m[[k, l]] = v;
                m[[l, k]] = v;
            }
            m
        })
        .collect();
    let n = spec.n_per_class;
    let clusters_a: Vec<usize> = (0..n).map(|_| rng.random_range(0..spec.n_c)).collect();
    let clusters_b: Vec<usize> = (0..n).map(|_| rng.random_range(0..spec.n_c)).collect();

    let mut noisy = |assign: &[usize]| -> Vec<Array2<f64>> {
        assign
            .iter()
            .map(|&c| {
                let mut m = bases[c].clone();
                for (k, l) in upper_pairs(r) {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = m[[k, l]] + spec.noise * z;
                    m[[k, l]] = v;
                    m[[l, k]] = v;
                }
                m
            })
            .collect()
    };
    let raw_a = noisy(&clusters_a);
    let mut raw_b = noisy(&clusters_b);

    let pairs: Vec<(usize, usize)> = upper_pairs(r).collect();
    let mut ground_truth: Vec<(usize, usize)> =
        rand::seq::index::sample(&mut rng, pairs.len(), spec.n_disc).into_iter().map(|i| pairs[i]).collect();
    ground_truth.sort_unstable();
    for m in &mut raw_b {
        for &(k, l) in &ground_truth {
            m[[k, l]] += spec.delta;
            m[[l, k]] += spec.delta;
        }
    }

    let finish = |label: &str, raws: Vec<Array2<f64>>| -> Result<Population> {
        let subjects = raws
            .into_iter()
            .map(|mut m| {
                m.mapv_inplace(|v| v.clamp(0.0, 1.0));
                m.diag_mut().fill(0.0);
                Connectome::new(m)
            })
            .collect::<Result<Vec<_>>>()?;
        let ids = (0..subjects.len()).map(|i| format!("{label}-{i:04}")).collect();
        Population::new(label, ids, subjects)
    };
    Ok(SynthData {
        class_a: finish(CLASS_A, raw_a)?,
        class_b: finish(CLASS_B, raw_b)?,
        ground_truth,
        clusters_a,
        clusters_b,
    })
}

/// Writes matrices, `manifest.csv` and `ground_truth.json` under `dir`.
pub fn write_synth(dir: impl AsRef<Path>, spec: &SynthSpec, data: &SynthData) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let manifest = write_dataset(dir, &[&data.class_a, &data.class_b])?;
    let truth = GroundTruth {
        spec: *spec,
        edges: data.ground_truth.clone(),
        clusters_a: data.clusters_a.clone(),
        clusters_b: data.clusters_b.clone(),
    };
    let path = dir.join("ground_truth.json");
    let mut text = serde_json::to_string_pretty(&truth)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
