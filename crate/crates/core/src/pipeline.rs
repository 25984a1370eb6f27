//! In-memory versions of the CLI commands. The command-line tool is a thin
//! file layer over these functions, so file-based and in-memory runs produce
//! identical results.

use crate::error::{Error, Result};
use crate::genotype::{alignment, encode_cohort, Cohort, DiffTable, ReferencePanel, SnpId};
use crate::io::{FeatureRow, FeatureTable, ModelFile, PredictionRow, TreeFile};
use crate::splitter::{self, SplitConfig, SplitTree};
use crate::svm::{self, LabeledVector, SolveDiagnostics, SvmConfig};

/// Encodes a cohort against a panel; columns follow the panel's SNP order.
pub fn encode_table(cohort: &Cohort, panel: &ReferencePanel, diff: &DiffTable) -> Result<FeatureTable> {
    let aligned = cohort.align_to(panel.snps())?;
    let features = encode_cohort(&aligned, panel, diff)?;
    let rows = aligned
        .records()
        .iter()
        .zip(features)
        .map(|(r, f)| FeatureRow {
            sample_id: r.sample_id.clone(),
            label: r.label,
            values: f.into_inner(),
        })
        .collect();
    Ok(FeatureTable {
        snps: panel.snps().to_vec(),
        rows,
    })
}

/// Reorders feature columns to `order`, naming the first mismatched SNP.
pub fn align_features(table: &FeatureTable, order: &[SnpId]) -> Result<FeatureTable> {
    if table.snps == order {
        return Ok(table.clone());
    }
    let positions = alignment(&table.snps, order)?;
    Ok(FeatureTable {
        snps: order.to_vec(),
        rows: table
            .rows
            .iter()
            .map(|r| FeatureRow {
                sample_id: r.sample_id.clone(),
                label: r.label,
                values: positions.iter().map(|&p| r.values[p]).collect(),
            })
            .collect(),
    })
}

fn training_set(table: &FeatureTable) -> Result<(Vec<LabeledVector>, Vec<usize>)> {
    let (data, rows) = table.labeled();
    if data.is_empty() {
        return Err(Error::usage("no labeled samples"));
    }
    Ok((data, rows))
}

/// Trains on the labeled rows of `table`.
pub fn train_table(
    table: &FeatureTable,
    config: &SvmConfig,
    diff: DiffTable,
) -> Result<(ModelFile, SolveDiagnostics)> {
    let (data, rows) = training_set(table)?;
    let (model, diagnostics) = svm::train(&data, config)?;
    let samples = rows
        .iter()
        .zip(&data)
        .map(|(&i, v)| (table.rows[i].sample_id.clone(), v.y))
        .collect();
    Ok((
        ModelFile {
            snps: table.snps.clone(),
            diff,
            model,
            samples,
        },
        diagnostics,
    ))
}

pub fn predict_with_model(model: &ModelFile, table: &FeatureTable) -> Result<Vec<PredictionRow>> {
    let table = align_features(table, &model.snps)?;
    table
        .rows
        .iter()
        .map(|r| {
            let p = svm::classify(&model.model, &r.values)?;
            Ok(PredictionRow::Model {
                sample_id: r.sample_id.clone(),
                predicted: p.label,
                score: p.decision_value,
            })
        })
        .collect()
}

/// Splits the labeled rows of `table`.
pub fn split_table(table: &FeatureTable, config: &SplitConfig, diff: DiffTable) -> Result<(TreeFile, SplitTree)> {
    let (data, rows) = training_set(table)?;
    let tree = splitter::split_recursive(&data, config)?;
    let ids = rows.iter().map(|&i| table.rows[i].sample_id.clone()).collect();
    let file = TreeFile::from_tree(&tree, table.snps.clone(), diff, ids)?;
    Ok((file, tree))
}

pub fn predict_with_tree(tree: &TreeFile, table: &FeatureTable) -> Result<Vec<PredictionRow>> {
    let table = align_features(table, &tree.snps)?;
    let split = tree.to_tree()?;
    table
        .rows
        .iter()
        .map(|r| {
            let route = splitter::classify_by_tree(&split, &r.values)?;
            Ok(PredictionRow::Tree {
                sample_id: r.sample_id.clone(),
                predicted: route.label,
                purity: route.purity,
                distance: route.distance_to_center,
            })
        })
        .collect()
}
