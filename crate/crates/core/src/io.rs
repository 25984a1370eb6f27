//! Text file formats: cohort, panel and feature CSVs, the versioned model
//! file, the JSON tree file and prediction CSVs.
//!
//! Floating-point values are written with 17 significant digits so every
//! `f64` reads back bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{
    check_unique_snps, validate_sample_id, Cohort, DiffTable, Genotype, GenotypeCounts,
    ReferencePanel, SampleRecord, SnpId,
};
use crate::label::{optional_label_token, parse_optional_label, Label};
use crate::splitter::{Leaf, LeafStatus, SplitTree, SubgroupSummary};
use crate::svm::{SvmConfig, SvmModel};

pub const MODEL_HEADER: &str = "snpsvm-model v1";
pub const TREE_FORMAT: &str = "snpsvm-tree v1";

/// 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(token: &str, source: &str, line: u64) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(source, line, format!("invalid number {token:?}")))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_error(source: &str, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::parse(source, line, err.to_string())
}

fn write_error(err: impl std::fmt::Display) -> Error {
    Error::Io {
        path: "<output>".into(),
        source: std::io::Error::other(err.to_string()),
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

/// Header columns after the fixed leading ones, as SNP ids.
fn header_snps(
    headers: &csv::StringRecord,
    leading: &[&str],
    source: &str,
) -> Result<Vec<SnpId>> {
    for (k, expected) in leading.iter().enumerate() {
        if headers.get(k) != Some(expected) {
            return Err(Error::parse(
                source,
                1,
                format!("column {} must be {expected:?}", k + 1),
            ));
        }
    }
    let snps = headers
        .iter()
        .skip(leading.len())
        .map(SnpId::new)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?;
    check_unique_snps(&snps).map_err(|e| Error::parse(source, 1, e.to_string()))?;
    Ok(snps)
}

pub fn read_cohort<R: Read>(reader: R, source: &str) -> Result<Cohort> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let snps = header_snps(&headers, &["sample_id", "label"], source)?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let sample_id = row[0].to_string();
        validate_sample_id(&sample_id).map_err(|e| Error::parse(source, line, e.to_string()))?;
        let label =
            parse_optional_label(&row[1]).map_err(|e| Error::parse(source, line, e.to_string()))?;
        let genotypes = row
            .iter()
            .skip(2)
            .map(|t| t.parse::<Genotype>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::parse(source, line, e.to_string()))?;
        records.push(SampleRecord {
            sample_id,
            label,
            genotypes,
        });
    }
    Cohort::new(snps, records)
}

pub fn write_cohort<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend(cohort.snps().iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(write_error)?;
    for r in cohort.records() {
        let mut row = vec![r.sample_id.clone(), optional_label_token(r.label).to_string()];
        row.extend(r.genotypes.iter().map(|g| g.as_str().to_string()));
        w.write_record(&row).map_err(write_error)?;
    }
    w.flush().map_err(write_error)
}

pub fn read_panel<R: Read>(reader: R, source: &str) -> Result<ReferencePanel> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let expected = ["snp_id", "n_ww", "n_wm", "n_mm"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            source,
            1,
            "header must be snp_id,n_ww,n_wm,n_mm",
        ));
    }
    let mut snps = Vec::new();
    let mut counts = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        snps.push(SnpId::new(&row[0]).map_err(|e| Error::parse(source, line, e.to_string()))?);
        let mut c = [0u64; 3];
        for (k, slot) in c.iter_mut().enumerate() {
            *slot = row[k + 1].parse().map_err(|_| {
                Error::parse(source, line, format!("invalid count {:?}", &row[k + 1]))
            })?;
        }
        counts.push(GenotypeCounts::new(c[0], c[1], c[2]));
    }
    ReferencePanel::new(snps, counts)
}

pub fn write_panel<W: Write>(panel: &ReferencePanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["snp_id", "n_ww", "n_wm", "n_mm"])
        .map_err(write_error)?;
    for (snp, c) in panel.snps().iter().zip(panel.counts()) {
        w.write_record([
            snp.to_string(),
            c.ww.to_string(),
            c.wm.to_string(),
            c.mm.to_string(),
        ])
        .map_err(write_error)?;
    }
    w.flush().map_err(write_error)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub label: Option<Label>,
    pub values: Vec<f64>,
}

/// Encoded samples; columns are named by SNP id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub snps: Vec<SnpId>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    /// Labeled rows as training vectors, in file order. Unlabeled rows are
    /// skipped; their positions are returned alongside.
    pub fn labeled(&self) -> (Vec<crate::svm::LabeledVector>, Vec<usize>) {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                r.label
                    .map(|y| (crate::svm::LabeledVector::new(r.values.clone(), y), i))
            })
            .unzip()
    }
}

pub fn read_features<R: Read>(reader: R, source: &str) -> Result<FeatureTable> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let snps = header_snps(&headers, &["sample_id", "label"], source)?;
    if snps.is_empty() {
        return Err(Error::parse(source, 1, "no feature columns"));
    }
    let mut rows = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let sample_id = row[0].to_string();
        validate_sample_id(&sample_id).map_err(|e| Error::parse(source, line, e.to_string()))?;
        if !ids.insert(sample_id.clone()) {
            return Err(Error::parse(source, line, format!("duplicate sample id {sample_id}")));
        }
        let label =
            parse_optional_label(&row[1]).map_err(|e| Error::parse(source, line, e.to_string()))?;
        let values = row
            .iter()
            .skip(2)
            .map(|t| parse_f64(t, source, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::parse(source, line, format!("non-finite feature {v}")));
        }
        rows.push(FeatureRow {
            sample_id,
            label,
            values,
        });
    }
    Ok(FeatureTable { snps, rows })
}

pub fn write_features<W: Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend(table.snps.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(write_error)?;
    for r in &table.rows {
        let mut row = vec![r.sample_id.clone(), optional_label_token(r.label).to_string()];
        row.extend(r.values.iter().map(|v| format_f64(*v)));
        w.write_record(&row).map_err(write_error)?;
    }
    w.flush().map_err(write_error)
}

/// A trained model with the context needed to apply it to new cohorts.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub snps: Vec<SnpId>,
    pub diff: DiffTable,
    pub model: SvmModel,
    /// Training sample ids and labels, aligned with the model's multipliers.
    pub samples: Vec<(String, Label)>,
}

pub fn write_model<W: Write>(file: &ModelFile, mut w: W) -> Result<()> {
    let m = &file.model;
    let cfg = m.config();
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    out.push_str(&format!("n\t{}\n", file.snps.len()));
    for s in &file.snps {
        out.push_str(&format!("snp\t{s}\n"));
    }
    for v in m.w() {
        out.push_str(&format!("w\t{}\n", format_f64(*v)));
    }
    out.push_str(&format!("b\t{}\n", format_f64(m.b())));
    out.push_str(&format!("c\t{}\n", format_f64(cfg.c)));
    out.push_str(&format!("tol\t{}\n", format_f64(cfg.kkt_tolerance)));
    match cfg.max_passes {
        Some(p) => out.push_str(&format!("max_passes\t{p}\n")),
        None => out.push_str("max_passes\tdefault\n"),
    }
    out.push_str(&format!("seed\t{}\n", cfg.seed));
    out.push_str(&format!(
        "diff\t{}\t{}\t{}\n",
        format_f64(file.diff.ww_wm()),
        format_f64(file.diff.wm_mm()),
        format_f64(file.diff.ww_mm())
    ));
    out.push_str(&format!("l\t{}\n", file.samples.len()));
    for ((id, label), a) in file.samples.iter().zip(m.alphas()) {
        out.push_str(&format!("alpha\t{id}\t{label}\t{}\n", format_f64(*a)));
    }
    w.write_all(out.as_bytes()).map_err(write_error)?;
    w.flush().map_err(write_error)
}

struct Lines<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
    line: u64,
}

impl<'a> Lines<'a> {
    fn expect(&mut self, key: &str, arity: usize) -> Result<Vec<&'a str>> {
        let Some((i, text)) = self.lines.next() else {
            return Err(Error::parse(self.source, self.line + 1, format!("missing {key:?} line")));
        };
        self.line = i as u64 + 1;
        let mut fields = text.split('\t');
        if fields.next() != Some(key) {
            return Err(Error::parse(self.source, self.line, format!("expected {key:?}")));
        }
        let rest: Vec<&str> = fields.collect();
        if rest.len() != arity {
            return Err(Error::parse(
                self.source,
                self.line,
                format!("{key:?} takes {arity} fields, found {}", rest.len()),
            ));
        }
        Ok(rest)
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let f = self.expect(key, 1)?;
        f[0].parse()
            .map_err(|_| Error::parse(self.source, self.line, format!("invalid count {:?}", f[0])))
    }

    fn number(&mut self, key: &str) -> Result<f64> {
        let f = self.expect(key, 1)?;
        parse_f64(f[0], self.source, self.line)
    }
}

pub fn read_model<R: Read>(mut reader: R, source: &str) -> Result<ModelFile> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::parse(source, 0, e.to_string()))?;
    let mut it = text.lines().enumerate();
    match it.next() {
        Some((_, MODEL_HEADER)) => {}
        _ => return Err(Error::parse(source, 1, format!("expected header {MODEL_HEADER:?}"))),
    }
    let mut lines = Lines {
        lines: it,
        source,
        line: 1,
    };
    let n = lines.count("n")?;
    let mut snps = Vec::with_capacity(n);
    for _ in 0..n {
        let f = lines.expect("snp", 1)?;
        snps.push(SnpId::new(f[0]).map_err(|e| Error::parse(source, lines.line, e.to_string()))?);
    }
    check_unique_snps(&snps).map_err(|e| Error::parse(source, lines.line, e.to_string()))?;
    let mut w = Vec::with_capacity(n);
    for _ in 0..n {
        w.push(lines.number("w")?);
    }
    let b = lines.number("b")?;
    let c = lines.number("c")?;
    let kkt_tolerance = lines.number("tol")?;
    let passes = lines.expect("max_passes", 1)?;
    let max_passes = match passes[0] {
        "default" => None,
        p => Some(p.parse().map_err(|_| {
            Error::parse(source, lines.line, format!("invalid pass budget {p:?}"))
        })?),
    };
    let seed_field = lines.expect("seed", 1)?;
    let seed = seed_field[0]
        .parse()
        .map_err(|_| Error::parse(source, lines.line, "invalid seed"))?;
    let d = lines.expect("diff", 3)?;
    let diff = DiffTable::new(
        parse_f64(d[0], source, lines.line)?,
        parse_f64(d[1], source, lines.line)?,
        parse_f64(d[2], source, lines.line)?,
    )
    .map_err(|e| Error::parse(source, lines.line, e.to_string()))?;
    let l = lines.count("l")?;
    let mut samples = Vec::with_capacity(l);
    let mut alphas = Vec::with_capacity(l);
    for _ in 0..l {
        let f = lines.expect("alpha", 3)?;
        let label: Label = f[1]
            .parse()
            .map_err(|e: Error| Error::parse(source, lines.line, e.to_string()))?;
        samples.push((f[0].to_string(), label));
        alphas.push(parse_f64(f[2], source, lines.line)?);
    }
    if let Some((i, extra)) = lines.lines.find(|(_, t)| !t.trim().is_empty()) {
        return Err(Error::parse(source, i as u64 + 1, format!("unexpected line {extra:?}")));
    }
    let config = SvmConfig {
        c,
        kkt_tolerance,
        max_passes,
        seed,
    };
    let model = SvmModel::from_parts(w, b, alphas, config)
        .map_err(|e| Error::parse(source, lines.line, e.to_string()))?;
    Ok(ModelFile {
        snps,
        diff,
        model,
        samples,
    })
}

/// Finite numbers as JSON numbers, infinity as the string `"inf"`.
mod c_value {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(format!("{v}")).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub w: Vec<f64>,
    pub b: f64,
    #[serde(with = "c_value")]
    pub c: f64,
    pub kkt_tolerance: f64,
    pub max_passes: Option<usize>,
    pub seed: u64,
    pub alphas: Vec<f64>,
}

impl ModelJson {
    fn from_model(m: &SvmModel) -> Self {
        let cfg = m.config();
        ModelJson {
            w: m.w().to_vec(),
            b: m.b(),
            c: cfg.c,
            kkt_tolerance: cfg.kkt_tolerance,
            max_passes: cfg.max_passes,
            seed: cfg.seed,
            alphas: m.alphas().to_vec(),
        }
    }

    fn to_model(&self) -> Result<SvmModel> {
        SvmModel::from_parts(
            self.w.clone(),
            self.b,
            self.alphas.clone(),
            SvmConfig {
                c: self.c,
                kkt_tolerance: self.kkt_tolerance,
                max_passes: self.max_passes,
                seed: self.seed,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNodeJson {
    Split {
        /// Sample ids of the group the model was trained on, aligned with
        /// its multipliers.
        members: Vec<String>,
        model: ModelJson,
        left: Box<TreeNodeJson>,
        right: Box<TreeNodeJson>,
    },
    Leaf {
        status: LeafStatus,
        majority_label: Label,
        purity: f64,
        center: Vec<f64>,
        stdevs: Vec<f64>,
        radius: f64,
        max_member_distance: f64,
        members: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub format: String,
    pub snps: Vec<SnpId>,
    pub diff: DiffTable,
    /// All input sample ids; leaf members refer to these.
    pub samples: Vec<String>,
    pub root: TreeNodeJson,
}

impl TreeFile {
    pub fn from_tree(tree: &SplitTree, snps: Vec<SnpId>, diff: DiffTable, samples: Vec<String>) -> Result<Self> {
        let root = node_to_json(tree, &samples)?;
        Ok(TreeFile {
            format: TREE_FORMAT.to_string(),
            snps,
            diff,
            samples,
            root,
        })
    }

    pub fn to_tree(&self) -> Result<SplitTree> {
        let index: std::collections::HashMap<&str, usize> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        node_from_json(&self.root, &index)
    }
}

fn ids_of(indices: &[usize], samples: &[String]) -> Result<Vec<String>> {
    indices
        .iter()
        .map(|&i| {
            samples
                .get(i)
                .cloned()
                .ok_or_else(|| Error::schema(format!("tree refers to sample index {i}")))
        })
        .collect()
}

fn node_members(tree: &SplitTree) -> Vec<usize> {
    let mut idx: Vec<usize> = tree.leaves().iter().flat_map(|l| l.indices.iter().copied()).collect();
    idx.sort_unstable();
    idx
}

fn node_to_json(tree: &SplitTree, samples: &[String]) -> Result<TreeNodeJson> {
    Ok(match tree {
        SplitTree::Leaf(leaf) => TreeNodeJson::Leaf {
            status: leaf.status,
            majority_label: leaf.majority_label,
            purity: leaf.purity,
            center: leaf.summary.center.clone(),
            stdevs: leaf.summary.stdevs.clone(),
            radius: leaf.summary.radius,
            max_member_distance: leaf.summary.max_member_distance,
            members: ids_of(&leaf.indices, samples)?,
        },
        SplitTree::Node { model, left, right } => TreeNodeJson::Split {
            members: ids_of(&node_members(tree), samples)?,
            model: ModelJson::from_model(model),
            left: Box::new(node_to_json(left, samples)?),
            right: Box::new(node_to_json(right, samples)?),
        },
    })
}

fn node_from_json(node: &TreeNodeJson, index: &std::collections::HashMap<&str, usize>) -> Result<SplitTree> {
    Ok(match node {
        TreeNodeJson::Leaf {
            status,
            majority_label,
            purity,
            center,
            stdevs,
            radius,
            max_member_distance,
            members,
        } => {
            let indices = members
                .iter()
                .map(|m| {
                    index
                        .get(m.as_str())
                        .copied()
                        .ok_or_else(|| Error::schema(format!("leaf member {m} is not a listed sample")))
                })
                .collect::<Result<Vec<_>>>()?;
            if center.len() != stdevs.len() {
                return Err(Error::schema("leaf center and stdevs differ in length"));
            }
            SplitTree::Leaf(Leaf {
                indices,
                majority_label: *majority_label,
                purity: *purity,
                summary: SubgroupSummary {
                    center: center.clone(),
                    stdevs: stdevs.clone(),
                    radius: *radius,
                    max_member_distance: *max_member_distance,
                },
                status: *status,
            })
        }
        TreeNodeJson::Split {
            model, left, right, ..
        } => SplitTree::Node {
            model: model.to_model()?,
            left: Box::new(node_from_json(left, index)?),
            right: Box::new(node_from_json(right, index)?),
        },
    })
}

pub fn write_tree<W: Write>(file: &TreeFile, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, file).map_err(write_error)?;
    w.write_all(b"\n").map_err(write_error)?;
    w.flush().map_err(write_error)
}

pub fn read_tree<R: Read>(reader: R, source: &str) -> Result<TreeFile> {
    let file: TreeFile = serde_json::from_reader(reader)
        .map_err(|e| Error::parse(source, e.line() as u64, e.to_string()))?;
    if file.format != TREE_FORMAT {
        return Err(Error::parse(source, 1, format!("unsupported tree format {:?}", file.format)));
    }
    Ok(file)
}

/// Whether a file starts with the model header; anything else is treated
/// as a tree.
pub fn is_model_file(path: &Path) -> Result<bool> {
    let mut first = String::new();
    open(path)?
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    Ok(first.trim_end() == MODEL_HEADER)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionRow {
    Model {
        sample_id: String,
        predicted: Label,
        score: f64,
    },
    Tree {
        sample_id: String,
        predicted: Label,
        purity: f64,
        distance: f64,
    },
}

pub fn write_predictions<W: Write>(rows: &[PredictionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    match rows.first() {
        Some(PredictionRow::Tree { .. }) => {
            w.write_record(["sample_id", "predicted", "purity", "distance"])
        }
        _ => w.write_record(["sample_id", "predicted", "score"]),
    }
    .map_err(write_error)?;
    for r in rows {
        match r {
            PredictionRow::Model {
                sample_id,
                predicted,
                score,
            } => w.write_record([sample_id.as_str(), predicted.as_str(), &format_f64(*score)]),
            PredictionRow::Tree {
                sample_id,
                predicted,
                purity,
                distance,
            } => w.write_record([
                sample_id.as_str(),
                predicted.as_str(),
                &format_f64(*purity),
                &format_f64(*distance),
            ]),
        }
        .map_err(write_error)?;
    }
    w.flush().map_err(write_error)
}

pub fn read_predictions<R: Read>(reader: R, source: &str) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(source, e))?.clone();
    let tree = match headers.len() {
        3 => false,
        4 => true,
        _ => return Err(Error::parse(source, 1, "unrecognized predictions header")),
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(source, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let sample_id = row[0].to_string();
        let predicted: Label = row[1]
            .parse()
            .map_err(|e: Error| Error::parse(source, line, e.to_string()))?;
        out.push(if tree {
            PredictionRow::Tree {
                sample_id,
                predicted,
                purity: parse_f64(&row[2], source, line)?,
                distance: parse_f64(&row[3], source, line)?,
            }
        } else {
            PredictionRow::Model {
                sample_id,
                predicted,
                score: parse_f64(&row[2], source, line)?,
            }
        });
    }
    Ok(out)
}
