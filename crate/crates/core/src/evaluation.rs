//! Atlas centeredness and cross-variant comparison.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connectome::Population;
use crate::diffusion::{estimate_atlas, Atlas, AtlasParams, KernelMode};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

/// Atlases live in the diffused status space while subjects are raw weights,
/// so absolute values are not comparable across unrelated scales.
pub const SCALE_CAVEAT: &str = "centeredness compares each atlas (diffused status space) with raw subject \
     matrices without rescaling; differences between modes partly reflect the scale of each mode's \
     normalization kernel";

pub fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Mean Frobenius distance between `a` and each subject.
pub fn centeredness_of(a: &Array2<f64>, p: &Population) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut total = 0.0;
    for s in p.subjects() {
        total += frobenius_distance(a, s.weights())?;
    }
    Ok(total / p.len() as f64)
}

pub fn centeredness(atlas: &Atlas, p: &Population) -> Result<f64> {
    centeredness_of(&atlas.a, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub mode: KernelMode,
    pub seed: u64,
    pub class_label: String,
    pub centeredness: f64,
}

/// Fraction of `(seed, class)` cells where MultiTopology is at least as
/// centered as `ablation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub ablation: KernelMode,
    pub wins: usize,
    pub cells: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub modes: Vec<KernelMode>,
    pub seeds: Vec<u64>,
    pub classes: Vec<String>,
    pub rows: Vec<VariantRow>,
    pub win_rates: Vec<WinRate>,
    pub input_digest: Option<String>,
    pub note: String,
}

impl VariantReport {
    pub fn get(&self, mode: KernelMode, seed: u64, class_label: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.mode == mode && r.seed == seed && r.class_label == class_label)
            .map(|r| r.centeredness)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,seed,class,centeredness\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.mode, r.seed, r.class_label, r.centeredness));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Each seed replaces `params.seed` for every class and mode.
pub fn compare_populations(
    classes: &[&Population],
    params: &AtlasParams,
    modes: &[KernelMode],
    seeds: &[u64],
) -> Result<VariantReport> {
    if modes.len() < 2 {
        return Err(Error::InvalidParameter(format!("comparison needs at least 2 modes, got {}", modes.len())));
    }
    if seeds.is_empty() || classes.is_empty() {
        return Err(Error::InvalidParameter("no seeds or classes to compare".into()));
    }
    let mut cells = Vec::new();
    for &mode in modes {
        for &seed in seeds {
            for (c, _) in classes.iter().enumerate() {
                cells.push((mode, seed, c));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(mode, seed, c)| {
            let p = classes[c];
            let run = AtlasParams { seed, ..*params };
            let atlas = estimate_atlas(p, mode, &run)?;
            Ok(VariantRow {
                mode,
                seed,
                class_label: p.class_label().to_string(),
                centeredness: centeredness(&atlas, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = VariantReport {
        modes: modes.to_vec(),
        seeds: seeds.to_vec(),
        classes: classes.iter().map(|p| p.class_label().to_string()).collect(),
        rows,
        win_rates: Vec::new(),
        input_digest: None,
        note: SCALE_CAVEAT.to_string(),
    };
    if modes.contains(&KernelMode::MultiTopology) {
        let mut seen = Vec::new();
        for &ablation in modes.iter().filter(|&&m| m != KernelMode::MultiTopology) {
            if seen.contains(&ablation) {
                continue;
            }
            seen.push(ablation);
            let mut wins = 0;
            let mut total = 0;
            for &seed in seeds {
                for label in &report.classes {
                    let multi = report.get(KernelMode::MultiTopology, seed, label);
                    let other = report.get(ablation, seed, label);
                    if let (Some(m), Some(o)) = (multi, other) {
                        total += 1;
                        if m <= o {
                            wins += 1;
                        }
                    }
                }
            }
            report.win_rates.push(WinRate { ablation, wins, cells: total, rate: wins as f64 / total as f64 });
        }
    }
    Ok(report)
}

pub fn compare_variants(
    manifest: &DatasetManifest,
    params: &AtlasParams,
    modes: &[KernelMode],
    seeds: &[u64],
) -> Result<VariantReport> {
    let populations = manifest.load_populations()?;
    let classes: Vec<&Population> = populations.values().collect();
    let mut report = compare_populations(&classes, params, modes, seeds)?;
    report.input_digest = Some(manifest.digest()?);
    Ok(report)
}
