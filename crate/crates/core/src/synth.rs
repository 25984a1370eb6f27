//! Seeded synthetic cohorts with planted causal SNPs.
//!
//! Genotypes are drawn under Hardy-Weinberg equilibrium: each of the two
//! alleles is independently mutant with the SNP's mutant allele frequency.
//! Controls and panel members use `base_maf` everywhere. Cases use
//! `min(1, base_maf + effect)` at causal SNPs and `base_maf` elsewhere.
//!
//! The random stream is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! with uniforms taken as the top 53 bits of each 64-bit output scaled to
//! `[0, 1)`. Draws happen in a fixed order: causal SNP selection, then cases,
//! controls and panel members, each sample visiting SNPs in order with two
//! allele draws per SNP.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{build_panel, Cohort, Genotype, ReferencePanel, SampleRecord, SnpId};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_snps: usize,
    pub n_causal: usize,
    pub n_cases: usize,
    pub n_controls: usize,
    pub n_panel: usize,
    /// Mutant allele frequency shift for cases at causal SNPs.
    pub effect: f64,
    /// Mutant allele frequency outside the case/causal cells.
    pub base_maf: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_snps: 10,
            n_causal: 2,
            n_cases: 200,
            n_controls: 200,
            n_panel: 500,
            effect: 0.6,
            base_maf: 0.05,
            seed: 20_030_101,
        }
    }
}

impl SynthConfig {
    /// Checks ranges, naming the offending field as its CLI flag.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("--n-snps", self.n_snps),
            ("--n-cases", self.n_cases),
            ("--n-controls", self.n_controls),
            ("--n-panel", self.n_panel),
        ];
        for (flag, v) in positive {
            if v == 0 {
                return Err(Error::usage(format!("{flag} must be positive")));
            }
        }
        if self.n_causal > self.n_snps {
            return Err(Error::usage(format!(
                "--n-causal ({}) exceeds --n-snps ({})",
                self.n_causal, self.n_snps
            )));
        }
        if !(0.0..=1.0).contains(&self.effect) {
            return Err(Error::usage(format!("--effect must lie in [0, 1], got {}", self.effect)));
        }
        if !(self.base_maf > 0.0 && self.base_maf <= 0.5) {
            return Err(Error::usage(format!(
                "--base-maf must lie in (0, 0.5], got {}",
                self.base_maf
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    /// Cases first, then controls.
    pub cohort: Cohort,
    pub panel: ReferencePanel,
    /// Causal SNPs in cohort order.
    pub causal: Vec<SnpId>,
}

fn draw_genotype(rng: &mut ChaCha8Rng, maf: f64) -> Genotype {
    let a = rng.gen::<f64>() < maf;
    let b = rng.gen::<f64>() < maf;
    match (a, b) {
        (false, false) => Genotype::WW,
        (true, true) => Genotype::MM,
        _ => Genotype::WM,
    }
}

pub fn generate_cohort(config: &SynthConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let snps: Vec<SnpId> = (1..=config.n_snps)
        .map(|i| SnpId::new(format!("snp{i}")))
        .collect::<Result<_>>()?;
    let mut is_causal = vec![false; config.n_snps];
    for i in index::sample(&mut rng, config.n_snps, config.n_causal).into_vec() {
        is_causal[i] = true;
    }
    let case_maf = (config.base_maf + config.effect).min(1.0);

    let mut records = Vec::with_capacity(config.n_cases + config.n_controls);
    for k in 1..=config.n_cases {
        let genotypes = is_causal
            .iter()
            .map(|&c| draw_genotype(&mut rng, if c { case_maf } else { config.base_maf }))
            .collect();
        records.push(SampleRecord {
            sample_id: format!("case{k}"),
            label: Some(Label::Case),
            genotypes,
        });
    }
    for k in 1..=config.n_controls {
        let genotypes = (0..config.n_snps)
            .map(|_| draw_genotype(&mut rng, config.base_maf))
            .collect();
        records.push(SampleRecord {
            sample_id: format!("control{k}"),
            label: Some(Label::Control),
            genotypes,
        });
    }
    let panel_records: Vec<SampleRecord> = (1..=config.n_panel)
        .map(|k| SampleRecord {
            sample_id: format!("ref{k}"),
            label: Some(Label::Control),
            genotypes: (0..config.n_snps)
                .map(|_| draw_genotype(&mut rng, config.base_maf))
                .collect(),
        })
        .collect();
    let panel = build_panel(&snps, &panel_records)?;
    let causal = snps
        .iter()
        .zip(&is_causal)
        .filter(|(_, c)| **c)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(SyntheticCohort {
        cohort: Cohort::new(snps, records)?,
        panel,
        causal,
    })
}
