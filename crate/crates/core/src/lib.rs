//! SNP case-control association by difference-score encoding and linear
//! support vector machines.
//!
//! The pipeline has three stages:
//!
//! 1. [`genotype`]: each sample's genotypes are scored against a healthy
//!    reference panel, giving one feature in `[0, 1]` per SNP.
//! 2. [`svm`]: a linear soft-margin SVM is trained on the labeled features
//!    by pairwise ascent on its dual program.
//! 3. [`splitter`]: when the classes do not separate cleanly, SVM splits are
//!    applied recursively until every subgroup is dominated by one label.
//!
//! [`synth`] generates seeded synthetic cohorts and [`io`] holds the file
//! formats used by the `snpsvm` command-line tool.

pub mod cli;
pub mod error;
pub mod genotype;
pub mod io;
pub mod label;
pub mod pipeline;
pub mod splitter;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
pub use genotype::{
    build_panel, diff, encode_cohort, encode_feature, encode_sample, Cohort, DiffTable,
    FeatureVector, Genotype, GenotypeCounts, ReferencePanel, SampleRecord, SnpId,
};
pub use label::Label;
pub use splitter::{
    classify_by_tree, purity, split_recursive, summarize, LeafStatus, SplitConfig, SplitTree,
    SubgroupSummary,
};
pub use svm::{
    classify, decision_value, dual_objective, geometric_margin, kkt_violation, train,
    LabeledVector, Prediction, SolveDiagnostics, SvmConfig, SvmModel,
};
pub use synth::{generate_cohort, SynthConfig, SyntheticCohort};
