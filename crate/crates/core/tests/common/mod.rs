#![allow(dead_code)]

use overlapix::atoms::OrderKey;
use overlapix::model::CharacteristicDecl;
use overlapix::oracle::{generate, GenerationConfig, LatentDomain, SyntheticSynthesis};

/// A generator config with tunable density: fewer atoms and higher
/// intensity give more overlap.
pub fn config(n: usize, seed: u64, regions: usize, years: usize, intensity: f64, padding: f64) -> GenerationConfig {
    let mut c = GenerationConfig::standard(n, seed);
    c.collective_size = 60;
    c.min_study_size = 2;
    c.max_study_size = 15;
    c.overlap_intensity = intensity;
    c.padding = padding;
    c.domains = vec![
        LatentDomain {
            decl: CharacteristicDecl::categorical("region"),
            atoms: (1..=regions).map(|r| format!("r{r}")).collect(),
        },
        LatentDomain {
            decl: CharacteristicDecl::ordered("year", OrderKey::DateYear),
            atoms: (0..years).map(|y| (2000 + y).to_string()).collect(),
        },
    ];
    c
}

pub fn instance(n: usize, seed: u64, regions: usize, years: usize, intensity: f64, padding: f64) -> SyntheticSynthesis {
    generate(&config(n, seed, regions, years, intensity, padding)).expect("valid config")
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}
