//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::genotype::DiffTable;
use crate::io::{self, FeatureTable};
use crate::pipeline;
use crate::splitter::{SplitConfig, SplitTree};
use crate::svm::{self, SvmConfig};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "snpsvm", version, about = "SNP case-control association with linear SVMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a genotype cohort against a reference panel.
    Encode(EncodeArgs),
    /// Train a linear SVM and write a model file.
    Train(TrainArgs),
    /// Recursively split a cohort until each subgroup is label-dominated.
    Split(SplitArgs),
    /// Apply a model or tree file to a cohort.
    Predict(PredictArgs),
    /// Generate a synthetic cohort, panel and causal-SNP list.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct DiffArgs {
    /// Difference score between WW and WM.
    #[arg(long = "diff-wwwm", default_value_t = 0.25)]
    pub ww_wm: f64,
    /// Difference score between WM and MM.
    #[arg(long = "diff-wmmm", default_value_t = 0.75)]
    pub wm_mm: f64,
    /// Difference score between WW and MM.
    #[arg(long = "diff-wwmm", default_value_t = 1.0)]
    pub ww_mm: f64,
}

impl DiffArgs {
    fn table(&self) -> Result<DiffTable> {
        DiffTable::new(self.ww_wm, self.wm_mm, self.ww_mm)
    }
}

/// Where samples come from: a feature CSV, or a cohort plus a panel.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long, conflicts_with_all = ["cohort", "panel"])]
    pub features: Option<PathBuf>,
    #[arg(long, requires = "panel")]
    pub cohort: Option<PathBuf>,
    #[arg(long, requires = "cohort")]
    pub panel: Option<PathBuf>,
}

impl InputArgs {
    fn load(&self, diff: &DiffTable) -> Result<FeatureTable> {
        match (&self.features, &self.cohort, &self.panel) {
            (Some(f), _, _) => io::read_features(io::open(f)?, &f.display().to_string()),
            (None, Some(c), Some(p)) => {
                let cohort = io::read_cohort(io::open(c)?, &c.display().to_string())?;
                let panel = io::read_panel(io::open(p)?, &p.display().to_string())?;
                pipeline::encode_table(&cohort, &panel, diff)
            }
            _ => Err(Error::usage("supply --features, or --cohort together with --panel")),
        }
    }
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub panel: PathBuf,
    #[command(flatten)]
    pub diff: DiffArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SvmArgs {
    /// Box bound C; `inf` trains a hard-margin machine.
    #[arg(long = "c", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub max_passes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SvmArgs {
    fn config(&self) -> SvmConfig {
        SvmConfig {
            c: self.c,
            kkt_tolerance: self.tol,
            max_passes: self.max_passes,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[command(flatten)]
    pub diff: DiffArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.8)]
    pub tau: f64,
    #[arg(long = "min-size", default_value_t = 3)]
    pub min_size: usize,
    #[arg(long = "max-depth", default_value_t = 16)]
    pub max_depth: usize,
    #[command(flatten)]
    pub svm: SvmArgs,
    #[command(flatten)]
    pub diff: DiffArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file or tree file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "n-snps", default_value_t = SynthConfig::default().n_snps)]
    pub n_snps: usize,
    #[arg(long = "n-causal", default_value_t = SynthConfig::default().n_causal)]
    pub n_causal: usize,
    #[arg(long = "n-cases", default_value_t = SynthConfig::default().n_cases)]
    pub n_cases: usize,
    #[arg(long = "n-controls", default_value_t = SynthConfig::default().n_controls)]
    pub n_controls: usize,
    #[arg(long = "n-panel", default_value_t = SynthConfig::default().n_panel)]
    pub n_panel: usize,
    #[arg(long, default_value_t = SynthConfig::default().effect)]
    pub effect: f64,
    #[arg(long = "base-maf", default_value_t = SynthConfig::default().base_maf)]
    pub base_maf: f64,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    pub seed: u64,
    /// Output directory; receives cohort.csv, panel.csv and truth.txt.
    #[arg(long)]
    pub out: PathBuf,
}

fn source(path: &Path) -> String {
    path.display().to_string()
}

/// Runs one command, writing its report to `report`. Returns the process
/// exit code for runs that complete with a warning (non-convergence).
pub fn run<W: Write>(cli: Cli, report: &mut W) -> Result<i32> {
    match cli.command {
        Command::Encode(a) => encode(a, report),
        Command::Train(a) => train(a, report),
        Command::Split(a) => split(a, report),
        Command::Predict(a) => predict(a, report),
        Command::Simulate(a) => simulate(a, report),
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<report>", e)
}

fn encode<W: Write>(a: EncodeArgs, report: &mut W) -> Result<i32> {
    let diff = a.diff.table()?;
    let cohort = io::read_cohort(io::open(&a.cohort)?, &source(&a.cohort))?;
    let panel = io::read_panel(io::open(&a.panel)?, &source(&a.panel))?;
    let table = pipeline::encode_table(&cohort, &panel, &diff)?;
    io::write_features(&table, io::create(&a.out)?)?;
    writeln!(
        report,
        "encoded {} samples over {} SNPs against a panel of {}",
        table.rows.len(),
        table.snps.len(),
        panel.total()
    )
    .map_err(out_err)?;
    Ok(0)
}

fn train<W: Write>(a: TrainArgs, report: &mut W) -> Result<i32> {
    let diff = a.diff.table()?;
    let config = a.svm.config();
    config.validate()?;
    let table = a.input.load(&diff)?;
    let (file, diag) = pipeline::train_table(&table, &config, diff)?;
    io::write_model(&file, io::create(&a.out)?)?;
    let model = &file.model;
    let mut text = String::new();
    text.push_str(&format!("dual objective      {:.12}\n", diag.dual_objective));
    text.push_str(&format!("primal objective    {:.12}\n", diag.primal_objective));
    text.push_str(&format!("slack sum           {:.12}\n", diag.slack_sum));
    text.push_str(&format!("max KKT violation   {:.3e}\n", diag.max_kkt_violation));
    text.push_str(&format!("iterations          {}\n", diag.iterations));
    text.push_str(&format!("support vectors     {}\n", model.support_indices().len()));
    match svm::geometric_margin(model) {
        Ok(m) => text.push_str(&format!("geometric margin    {m:.12}\n")),
        Err(_) => text.push_str("geometric margin    undefined (w = 0)\n"),
    }
    if let Ok((w, b)) = model.canonical_form() {
        let terms: Vec<String> = w
            .iter()
            .zip(&file.snps)
            .map(|(v, s)| format!("{v:+.9}*{s}"))
            .collect();
        text.push_str(&format!("canonical plane     {} {:+.9} = 0\n", terms.join(" "), b));
    }
    for note in &diag.notes {
        text.push_str(&format!("note: {note}\n"));
    }
    text.push_str(&format!("converged           {}\n", diag.converged));
    report.write_all(text.as_bytes()).map_err(out_err)?;
    Ok(if diag.converged { 0 } else { 4 })
}

fn split<W: Write>(a: SplitArgs, report: &mut W) -> Result<i32> {
    let diff = a.diff.table()?;
    let config = SplitConfig {
        purity_threshold: a.tau,
        min_group_size: a.min_size,
        max_depth: a.max_depth,
        svm: a.svm.config(),
    };
    config.validate()?;
    let table = a.input.load(&diff)?;
    let (file, tree) = pipeline::split_table(&table, &config, diff)?;
    io::write_tree(&file, io::create(&a.out)?)?;
    write_leaf_report(&tree, report).map_err(out_err)?;
    Ok(0)
}

fn write_leaf_report<W: Write>(tree: &SplitTree, report: &mut W) -> std::io::Result<()> {
    let leaves = tree.leaves();
    writeln!(report, "{} leaves, depth {}", leaves.len(), tree.depth())?;
    writeln!(report, "leaf\tstatus\tlabel\tpurity\tsize\tradius\tcenter")?;
    for (k, leaf) in leaves.iter().enumerate() {
        let center: Vec<String> = leaf.summary.center.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(
            report,
            "{}\t{}\t{}\t{:.4}\t{}\t{:.6}\t[{}]",
            k + 1,
            leaf.status.as_str(),
            leaf.majority_label,
            leaf.purity,
            leaf.indices.len(),
            leaf.summary.radius,
            center.join(", ")
        )?;
    }
    Ok(())
}

fn predict<W: Write>(a: PredictArgs, report: &mut W) -> Result<i32> {
    let rows = if io::is_model_file(&a.model)? {
        let model = io::read_model(io::open(&a.model)?, &source(&a.model))?;
        let table = a.input.load(&model.diff)?;
        pipeline::predict_with_model(&model, &table)?
    } else {
        let tree = io::read_tree(io::open(&a.model)?, &source(&a.model))?;
        let table = a.input.load(&tree.diff)?;
        pipeline::predict_with_tree(&tree, &table)?
    };
    io::write_predictions(&rows, io::create(&a.out)?)?;
    writeln!(report, "wrote {} predictions", rows.len()).map_err(out_err)?;
    Ok(0)
}

fn simulate<W: Write>(a: SimulateArgs, report: &mut W) -> Result<i32> {
    let config = SynthConfig {
        n_snps: a.n_snps,
        n_causal: a.n_causal,
        n_cases: a.n_cases,
        n_controls: a.n_controls,
        n_panel: a.n_panel,
        effect: a.effect,
        base_maf: a.base_maf,
        seed: a.seed,
    };
    let data = synth::generate_cohort(&config)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    io::write_cohort(&data.cohort, io::create(&a.out.join("cohort.csv"))?)?;
    io::write_panel(&data.panel, io::create(&a.out.join("panel.csv"))?)?;
    let truth: String = data.causal.iter().map(|s| format!("{s}\n")).collect();
    let truth_path = a.out.join("truth.txt");
    fs::write(&truth_path, truth).map_err(|e| Error::io(&truth_path, e))?;
    writeln!(
        report,
        "simulated {} cases, {} controls, panel of {} over {} SNPs ({} causal)",
        config.n_cases, config.n_controls, config.n_panel, config.n_snps, config.n_causal
    )
    .map_err(out_err)?;
    Ok(0)
}
