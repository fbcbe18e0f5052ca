//! Fixtures shared by the criterion benchmarks in `benches/`.

use netfusion_core::synth::{generate, SynthData, SynthSpec};

/// Two synthetic classes of `n` subjects over `r` regions.
pub fn fixture(r: usize, n: usize, seed: u64) -> SynthData {
    let spec = SynthSpec { r, n_per_class: n, n_c: 3, n_disc: 20.min(r * (r - 1) / 2), delta: 0.3, noise: 0.05, seed };
    generate(&spec).expect("benchmark fixture spec is valid")
}
