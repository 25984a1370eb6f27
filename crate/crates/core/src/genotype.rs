//! Genotype states, difference scoring and reference-panel encoding.
//!
//! A sample's feature at one SNP is the mean difference score between its
//! genotype and every member of a healthy reference panel at that SNP. The
//! panel is stored as per-SNP genotype counts, so the mean is a weighted sum
//! of three table entries.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Diploid genotype at one SNP. The heterozygote is unordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Genotype {
    /// wild/wild
    WW,
    /// wild/mutant
    WM,
    /// mutant/mutant
    MM,
}

impl Genotype {
    pub const ALL: [Genotype; 3] = [Genotype::WW, Genotype::WM, Genotype::MM];

    pub fn index(self) -> usize {
        match self {
            Genotype::WW => 0,
            Genotype::WM => 1,
            Genotype::MM => 2,
        }
    }

    /// Number of mutant alleles carried.
    pub fn mutant_alleles(self) -> u32 {
        self.index() as u32
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Genotype::WW => "WW",
            Genotype::WM => "WM",
            Genotype::MM => "MM",
        }
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Genotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "WW" => Ok(Genotype::WW),
            "WM" | "MW" => Ok(Genotype::WM),
            "MM" => Ok(Genotype::MM),
            other => Err(Error::usage(format!("unknown genotype token {other:?}"))),
        }
    }
}

/// Symmetric difference scores between genotypes, zero on the diagonal.
///
/// Only the three off-diagonal entries are free. The defaults are
/// 0.25 (WW/WM), 0.75 (WM/MM) and 1 (WW/MM).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffTable {
    ww_wm: f64,
    wm_mm: f64,
    ww_mm: f64,
}

impl Default for DiffTable {
    fn default() -> Self {
        DiffTable {
            ww_wm: 0.25,
            wm_mm: 0.75,
            ww_mm: 1.0,
        }
    }
}

impl DiffTable {
    pub fn new(ww_wm: f64, wm_mm: f64, ww_mm: f64) -> Result<Self> {
        for (name, v) in [("WW/WM", ww_wm), ("WM/MM", wm_mm), ("WW/MM", ww_mm)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::usage(format!(
                    "difference score {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(DiffTable { ww_wm, wm_mm, ww_mm })
    }

    pub fn ww_wm(&self) -> f64 {
        self.ww_wm
    }

    pub fn wm_mm(&self) -> f64 {
        self.wm_mm
    }

    pub fn ww_mm(&self) -> f64 {
        self.ww_mm
    }

    pub fn score(&self, a: Genotype, b: Genotype) -> f64 {
        use Genotype::*;
        match (a, b) {
            (WW, WW) | (WM, WM) | (MM, MM) => 0.0,
            (WW, WM) | (WM, WW) => self.ww_wm,
            (WM, MM) | (MM, WM) => self.wm_mm,
            (WW, MM) | (MM, WW) => self.ww_mm,
        }
    }

    /// Scores of `g` against WW, WM, MM in that order.
    pub fn row(&self, g: Genotype) -> [f64; 3] {
        Genotype::ALL.map(|other| self.score(g, other))
    }
}

/// Tabulated difference score between two genotypes.
pub fn diff(a: Genotype, b: Genotype, table: &DiffTable) -> f64 {
    table.score(a, b)
}

/// Name of one SNP location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SnpId(String);

impl SnpId {
    /// Ids must be non-empty and free of whitespace, commas and quotes so they
    /// survive both CSV headers and the tab-separated model format.
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::schema("empty SNP id"));
        }
        if id
            .chars()
            .any(|c| c.is_whitespace() || c == ',' || c == '"' || c.is_control())
        {
            return Err(Error::schema(format!("invalid SNP id {id:?}")));
        }
        Ok(SnpId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SnpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SnpId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        SnpId::new(value)
    }
}

impl From<SnpId> for String {
    fn from(value: SnpId) -> Self {
        value.0
    }
}

pub(crate) fn validate_sample_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::schema("empty sample id"));
    }
    if id.chars().any(|c| c == '\t' || c == ',' || c == '"' || c.is_control()) {
        return Err(Error::schema(format!("invalid sample id {id:?}")));
    }
    Ok(())
}

pub(crate) fn check_unique_snps(snps: &[SnpId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(snps.len());
    for snp in snps {
        if !seen.insert(snp) {
            return Err(Error::schema(format!("duplicate SNP id {snp}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub label: Option<Label>,
    /// One genotype per SNP, in cohort order.
    pub genotypes: Vec<Genotype>,
}

/// A set of genotyped samples sharing one ordered SNP list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cohort {
    snps: Vec<SnpId>,
    records: Vec<SampleRecord>,
}

impl Cohort {
    pub fn new(snps: Vec<SnpId>, records: Vec<SampleRecord>) -> Result<Self> {
        check_unique_snps(&snps)?;
        let mut ids = HashSet::with_capacity(records.len());
        for r in &records {
            validate_sample_id(&r.sample_id)?;
            if !ids.insert(r.sample_id.as_str()) {
                return Err(Error::schema(format!("duplicate sample id {}", r.sample_id)));
            }
            if r.genotypes.len() != snps.len() {
                return Err(Error::schema(format!(
                    "sample {} has {} genotypes but the cohort has {} SNPs",
                    r.sample_id,
                    r.genotypes.len(),
                    snps.len()
                )));
            }
        }
        Ok(Cohort { snps, records })
    }

    pub fn snps(&self) -> &[SnpId] {
        &self.snps
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SampleRecord> {
        self.records
    }

    /// Reorders genotype columns to follow `order`. The two SNP sets must be
    /// identical; otherwise the first SNP of `order` missing from the cohort
    /// (or the first extra cohort SNP) is named in the error.
    pub fn align_to(&self, order: &[SnpId]) -> Result<Cohort> {
        let positions = alignment(&self.snps, order)?;
        let records = self
            .records
            .iter()
            .map(|r| SampleRecord {
                sample_id: r.sample_id.clone(),
                label: r.label,
                genotypes: positions.iter().map(|&p| r.genotypes[p]).collect(),
            })
            .collect();
        Ok(Cohort {
            snps: order.to_vec(),
            records,
        })
    }
}

/// For each id in `order`, its position in `have`.
pub(crate) fn alignment(have: &[SnpId], order: &[SnpId]) -> Result<Vec<usize>> {
    let index: std::collections::HashMap<&SnpId, usize> =
        have.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut positions = Vec::with_capacity(order.len());
    for snp in order {
        match index.get(snp) {
            Some(&p) => positions.push(p),
            None => return Err(Error::schema(format!("SNP {snp} is missing from the input"))),
        }
    }
    if have.len() != order.len() {
        let wanted: HashSet<&SnpId> = order.iter().collect();
        if let Some(extra) = have.iter().find(|s| !wanted.contains(s)) {
            return Err(Error::schema(format!("SNP {extra} is not in the reference")));
        }
    }
    Ok(positions)
}

/// Genotype tallies for one SNP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenotypeCounts {
    pub ww: u64,
    pub wm: u64,
    pub mm: u64,
}

impl GenotypeCounts {
    pub fn new(ww: u64, wm: u64, mm: u64) -> Self {
        GenotypeCounts { ww, wm, mm }
    }

    pub fn total(&self) -> u64 {
        self.ww + self.wm + self.mm
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.ww, self.wm, self.mm]
    }

    fn add(&mut self, g: Genotype) {
        match g {
            Genotype::WW => self.ww += 1,
            Genotype::WM => self.wm += 1,
            Genotype::MM => self.mm += 1,
        }
    }
}

/// Per-SNP genotype counts over a healthy baseline population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferencePanel {
    snps: Vec<SnpId>,
    counts: Vec<GenotypeCounts>,
    total: u64,
}

impl ReferencePanel {
    pub fn new(snps: Vec<SnpId>, counts: Vec<GenotypeCounts>) -> Result<Self> {
        check_unique_snps(&snps)?;
        if snps.len() != counts.len() {
            return Err(Error::schema(format!(
                "{} SNP ids but {} count rows",
                snps.len(),
                counts.len()
            )));
        }
        if snps.is_empty() {
            return Err(Error::schema("reference panel has no SNPs"));
        }
        let total = counts[0].total();
        if total == 0 {
            return Err(Error::schema(format!("SNP {} has zero panel members", snps[0])));
        }
        for (snp, c) in snps.iter().zip(&counts) {
            if c.total() != total {
                return Err(Error::schema(format!(
                    "SNP {snp} counts sum to {} but the panel size is {total}",
                    c.total()
                )));
            }
        }
        Ok(ReferencePanel { snps, counts, total })
    }

    pub fn snps(&self) -> &[SnpId] {
        &self.snps
    }

    pub fn counts(&self) -> &[GenotypeCounts] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.snps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snps.is_empty()
    }
}

/// Encoded sample: one mean difference score per panel SNP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
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

/// Mean difference score of `g` against every panel member at one SNP.
pub fn encode_feature(
    g: Genotype,
    snp_index: usize,
    panel: &ReferencePanel,
    table: &DiffTable,
) -> Result<f64> {
    let counts = panel.counts.get(snp_index).ok_or_else(|| {
        Error::usage(format!(
            "SNP index {snp_index} out of range for a panel of {} SNPs",
            panel.len()
        ))
    })?;
    let row = table.row(g);
    let weighted = counts.ww as f64 * row[0] + counts.wm as f64 * row[1] + counts.mm as f64 * row[2];
    let value = weighted / panel.total as f64;
    // The mean is a convex combination of the row; pin rounding inside its hull.
    let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(value.clamp(lo, hi))
}

/// Encodes one sample whose genotypes follow `snps`, which must equal the
/// panel's SNP list in content and order.
pub fn encode_sample(
    sample: &SampleRecord,
    snps: &[SnpId],
    panel: &ReferencePanel,
    table: &DiffTable,
) -> Result<FeatureVector> {
    if sample.genotypes.len() != snps.len() {
        return Err(Error::schema(format!(
            "sample {} has {} genotypes for {} SNPs",
            sample.sample_id,
            sample.genotypes.len(),
            snps.len()
        )));
    }
    for (i, panel_snp) in panel.snps.iter().enumerate() {
        match snps.get(i) {
            Some(s) if s == panel_snp => {}
            Some(s) => {
                return Err(Error::schema(format!(
                    "SNP mismatch at position {}: sample has {s}, panel has {panel_snp}",
                    i + 1
                )))
            }
            None => {
                return Err(Error::schema(format!(
                    "SNP {panel_snp} is missing from sample {}",
                    sample.sample_id
                )))
            }
        }
    }
    if let Some(extra) = snps.get(panel.len()) {
        return Err(Error::schema(format!("SNP {extra} is not in the reference panel")));
    }
    sample
        .genotypes
        .iter()
        .enumerate()
        .map(|(j, &g)| encode_feature(g, j, panel, table))
        .collect::<Result<Vec<_>>>()
        .map(FeatureVector)
}

/// Encodes every record of a cohort, first aligning its SNP columns to the
/// panel's order.
pub fn encode_cohort(
    cohort: &Cohort,
    panel: &ReferencePanel,
    table: &DiffTable,
) -> Result<Vec<FeatureVector>> {
    let aligned = cohort.align_to(panel.snps())?;
    aligned
        .records
        .iter()
        .map(|r| encode_sample(r, &aligned.snps, panel, table))
        .collect()
}

/// Tallies genotypes of `records` into a panel over `snps`.
pub fn build_panel(snps: &[SnpId], records: &[SampleRecord]) -> Result<ReferencePanel> {
    if records.is_empty() {
        return Err(Error::usage("cannot build a reference panel from zero records"));
    }
    check_unique_snps(snps)?;
    let mut ids = HashSet::with_capacity(records.len());
    let mut counts = vec![GenotypeCounts::default(); snps.len()];
    for r in records {
        if !ids.insert(r.sample_id.as_str()) {
            return Err(Error::schema(format!("duplicate sample id {}", r.sample_id)));
        }
        if r.genotypes.len() != snps.len() {
            return Err(Error::schema(format!(
                "sample {} has {} genotypes but the panel has {} SNPs",
                r.sample_id,
                r.genotypes.len(),
                snps.len()
            )));
        }
        for (c, &g) in counts.iter_mut().zip(&r.genotypes) {
            c.add(g);
        }
    }
    ReferencePanel::new(snps.to_vec(), counts)
}
