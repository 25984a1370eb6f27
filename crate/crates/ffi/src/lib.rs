//! C ABI for `snpsvm`.
//!
//! Models and split trees are handed out as opaque pointers and released
//! with their `_free` function. Every entry point returns an
//! [`SnpsvmStatus`]; on failure, [`snpsvm_last_error`] describes the problem
//! for the calling thread. Panics never cross the boundary.
//!
//! Matrices are row-major `l x n` arrays of `double`; labels are `+1` (case)
//! or `-1` (control). Genotypes are coded by mutant allele count:
//! 0 = WW, 1 = WM, 2 = MM.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use snpsvm::io::{read_model, write_model, ModelFile};
use snpsvm::{
    classify, classify_by_tree, decision_value, encode_feature, geometric_margin, split_recursive,
    svm, DiffTable, Error, Genotype, GenotypeCounts, Label, LabeledVector, ReferencePanel, SnpId,
    SplitConfig, SplitTree, SvmConfig,
};

/// Result of every call. The non-zero codes up to 4 match the exit codes
/// of the `snpsvm` command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnpsvmStatus {
    Ok = 0,
    /// Invalid arguments or degenerate input (for example a single class).
    Usage = 2,
    /// Unreadable, malformed or mismatched input.
    Input = 3,
    /// The solver stopped before certifying optimality. Outputs are still
    /// written.
    NotConverged = 4,
    /// A required pointer was null.
    NullPointer = 5,
    /// An internal panic was caught.
    Panic = 6,
}

/// Difference scores between the three genotype pairs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnpsvmDiffTable {
    pub ww_wm: f64,
    pub wm_mm: f64,
    pub ww_mm: f64,
}

/// A trained linear machine.
pub struct SnpsvmModel {
    file: ModelFile,
}

/// A recursive split tree.
pub struct SnpsvmTree {
    tree: SplitTree,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> SnpsvmStatus {
    match e.exit_code() {
        2 => SnpsvmStatus::Usage,
        4 => SnpsvmStatus::NotConverged,
        _ => SnpsvmStatus::Input,
    }
}

fn guard(body: impl FnOnce() -> Result<SnpsvmStatus, Failure>) -> SnpsvmStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("{name} must not be null"));
            SnpsvmStatus::NullPointer
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {message}"));
            SnpsvmStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &'static str) -> Result<*const T, Failure> {
    if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(p)
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure::Lib(Error::Usage(message.into()))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(p, name)?, len))
}

unsafe fn labeled_rows(x: *const f64, y: *const i8, l: usize, n: usize) -> Result<Vec<LabeledVector>, Failure> {
    if l == 0 || n == 0 {
        return Err(usage("need at least one row and one column"));
    }
    let total = l.checked_mul(n).ok_or_else(|| usage("matrix size overflows"))?;
    let xs = slice(x, total, "x")?;
    let ys = slice(y, l, "y")?;
    xs.chunks_exact(n)
        .zip(ys)
        .enumerate()
        .map(|(i, (row, &label))| {
            let y = match label {
                1 => Label::Case,
                -1 => Label::Control,
                other => return Err(usage(format!("label {i} is {other}; expected +1 or -1"))),
            };
            Ok(LabeledVector::new(row.to_vec(), y))
        })
        .collect()
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    let text = CStr::from_ptr(non_null(path, "path")?)
        .to_str()
        .map_err(|_| usage("path is not valid UTF-8"))?;
    Ok(PathBuf::from(text))
}

unsafe fn model_ref<'a>(model: *const SnpsvmModel) -> Result<&'a SnpsvmModel, Failure> {
    Ok(&*non_null(model, "model")?)
}

unsafe fn tree_ref<'a>(tree: *const SnpsvmTree) -> Result<&'a SnpsvmTree, Failure> {
    Ok(&*non_null(tree, "tree")?)
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

fn svm_config(c: f64, tolerance: f64, seed: u64) -> SvmConfig {
    SvmConfig {
        c,
        kkt_tolerance: tolerance,
        max_passes: None,
        seed,
    }
}

fn generated_ids(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Trains a linear machine on `l` rows of dimension `n`. Pass `INFINITY`
/// for `c` to train a hard-margin machine. On `SNPSVM_STATUS_OK` or
/// `SNPSVM_STATUS_NOT_CONVERGED`, `*out` receives a model to release with
/// [`snpsvm_model_free`]; otherwise it is set to null.
///
/// # Safety
/// `x` must point to `l * n` doubles, `y` to `l` bytes, and `out` to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_train(
    x: *const f64,
    y: *const i8,
    l: usize,
    n: usize,
    c: f64,
    tolerance: f64,
    seed: u64,
    out: *mut *mut SnpsvmModel,
) -> SnpsvmStatus {
    guard(|| {
        write_out(out, ptr::null_mut(), "out")?;
        let data = labeled_rows(x, y, l, n)?;
        let (model, diagnostics) = svm::train(&data, &svm_config(c, tolerance, seed))?;
        let file = ModelFile {
            snps: generated_ids("x", n)
                .into_iter()
                .map(SnpId::new)
                .collect::<snpsvm::Result<_>>()?,
            diff: DiffTable::default(),
            samples: generated_ids("s", l).into_iter().zip(data.iter().map(|v| v.y)).collect(),
            model,
        };
        out.write(Box::into_raw(Box::new(SnpsvmModel { file })));
        if diagnostics.converged {
            Ok(SnpsvmStatus::Ok)
        } else {
            set_last_error(format!("solver did not converge: {}", diagnostics.notes.join("; ")));
            Ok(SnpsvmStatus::NotConverged)
        }
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a pointer obtained from this library that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_free(model: *mut SnpsvmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the model's dimension to `*out`.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_dim(model: *const SnpsvmModel, out: *mut usize) -> SnpsvmStatus {
    guard(|| {
        write_out(out, model_ref(model)?.file.model.dim(), "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Copies the normal vector `w` into `buffer`, which must hold at least
/// the model's dimension.
///
/// # Safety
/// `model` must be a live model and `buffer` must have room for `len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_weights(
    model: *const SnpsvmModel,
    buffer: *mut f64,
    len: usize,
) -> SnpsvmStatus {
    guard(|| {
        let w = model_ref(model)?.file.model.w();
        if len < w.len() {
            return Err(usage(format!("buffer holds {len} values, model has {}", w.len())));
        }
        let buffer = non_null(buffer, "buffer")? as *mut f64;
        ptr::copy_nonoverlapping(w.as_ptr(), buffer, w.len());
        Ok(SnpsvmStatus::Ok)
    })
}

/// Writes the offset `b` to `*out`.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_bias(model: *const SnpsvmModel, out: *mut f64) -> SnpsvmStatus {
    guard(|| {
        write_out(out, model_ref(model)?.file.model.b(), "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Writes `w . x + b` to `*out`.
///
/// # Safety
/// `model` must be a live model, `x` must point to `n` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_decision_value(
    model: *const SnpsvmModel,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> SnpsvmStatus {
    guard(|| {
        let value = decision_value(&model_ref(model)?.file.model, slice(x, n, "x")?)?;
        write_out(out, value, "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Writes `+1` (case) or `-1` (control) to `*label`. A decision value of
/// exactly zero counts as a case.
///
/// # Safety
/// As for [`snpsvm_model_decision_value`].
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_classify(
    model: *const SnpsvmModel,
    x: *const f64,
    n: usize,
    label: *mut i8,
) -> SnpsvmStatus {
    guard(|| {
        let p = classify(&model_ref(model)?.file.model, slice(x, n, "x")?)?;
        write_out(label, p.label.sign() as i8, "label")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Writes the geometric margin `1 / ||w||` to `*out`.
///
/// # Safety
/// `model` must be a live model and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_margin(model: *const SnpsvmModel, out: *mut f64) -> SnpsvmStatus {
    guard(|| {
        write_out(out, geometric_margin(&model_ref(model)?.file.model)?, "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Saves the model in the text format read by the command-line tool.
///
/// # Safety
/// `model` must be a live model and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_save(model: *const SnpsvmModel, path: *const c_char) -> SnpsvmStatus {
    guard(|| {
        let model = model_ref(model)?;
        let path = path_arg(path)?;
        let file = File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        write_model(&model.file, BufWriter::new(file))?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Loads a model file written by [`snpsvm_model_save`] or `snpsvm train`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_model_load(path: *const c_char, out: *mut *mut SnpsvmModel) -> SnpsvmStatus {
    guard(|| {
        write_out(out, ptr::null_mut(), "out")?;
        let path = path_arg(path)?;
        let file = File::open(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        let file = read_model(BufReader::new(file), &path.display().to_string())?;
        out.write(Box::into_raw(Box::new(SnpsvmModel { file })));
        Ok(SnpsvmStatus::Ok)
    })
}

/// Recursively splits `l` labeled rows until every subgroup reaches purity
/// `tau`, has fewer than `min_size` members, cannot be split, or sits at
/// `max_depth`. Each split trains a machine with box bound `c`.
///
/// # Safety
/// As for [`snpsvm_train`].
#[no_mangle]
pub unsafe extern "C" fn snpsvm_split(
    x: *const f64,
    y: *const i8,
    l: usize,
    n: usize,
    tau: f64,
    min_size: usize,
    max_depth: usize,
    c: f64,
    seed: u64,
    out: *mut *mut SnpsvmTree,
) -> SnpsvmStatus {
    guard(|| {
        write_out(out, ptr::null_mut(), "out")?;
        let data = labeled_rows(x, y, l, n)?;
        let config = SplitConfig {
            purity_threshold: tau,
            min_group_size: min_size,
            max_depth,
            svm: svm_config(c, SvmConfig::default().kkt_tolerance, seed),
        };
        let tree = split_recursive(&data, &config)?;
        out.write(Box::into_raw(Box::new(SnpsvmTree { tree })));
        Ok(SnpsvmStatus::Ok)
    })
}

/// Releases a tree. Null is ignored.
///
/// # Safety
/// `tree` must be null or a pointer obtained from this library that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_tree_free(tree: *mut SnpsvmTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Writes the number of leaves to `*out`.
///
/// # Safety
/// `tree` must be a live tree and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_tree_leaf_count(tree: *const SnpsvmTree, out: *mut usize) -> SnpsvmStatus {
    guard(|| {
        write_out(out, tree_ref(tree)?.tree.leaves().len(), "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Writes the tree depth (0 for a single leaf) to `*out`.
///
/// # Safety
/// `tree` must be a live tree and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_tree_depth(tree: *const SnpsvmTree, out: *mut usize) -> SnpsvmStatus {
    guard(|| {
        write_out(out, tree_ref(tree)?.tree.depth(), "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Routes `x` to a leaf and reports its majority label, purity and the
/// distance from `x` to the leaf center. `purity` and `distance` may be
/// null.
///
/// # Safety
/// `tree` must be a live tree, `x` must point to `n` doubles and `label`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_tree_classify(
    tree: *const SnpsvmTree,
    x: *const f64,
    n: usize,
    label: *mut i8,
    purity: *mut f64,
    distance: *mut f64,
) -> SnpsvmStatus {
    guard(|| {
        let route = classify_by_tree(&tree_ref(tree)?.tree, slice(x, n, "x")?)?;
        write_out(label, route.label.sign() as i8, "label")?;
        if !purity.is_null() {
            purity.write(route.purity);
        }
        if !distance.is_null() {
            distance.write(route.distance_to_center);
        }
        Ok(SnpsvmStatus::Ok)
    })
}

/// The default table: 0.25, 0.75 and 1.
#[no_mangle]
pub extern "C" fn snpsvm_diff_table_default() -> SnpsvmDiffTable {
    let t = DiffTable::default();
    SnpsvmDiffTable {
        ww_wm: t.ww_wm(),
        wm_mm: t.wm_mm(),
        ww_mm: t.ww_mm(),
    }
}

fn genotype(code: u8) -> Result<Genotype, Failure> {
    match code {
        0 => Ok(Genotype::WW),
        1 => Ok(Genotype::WM),
        2 => Ok(Genotype::MM),
        other => Err(usage(format!("genotype code {other}; expected 0, 1 or 2"))),
    }
}

fn diff_table(t: &SnpsvmDiffTable) -> Result<DiffTable, Failure> {
    Ok(DiffTable::new(t.ww_wm, t.wm_mm, t.ww_mm)?)
}

/// Writes the difference score between genotypes `a` and `b` to `*out`.
///
/// # Safety
/// `table` must point to a table and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_diff(a: u8, b: u8, table: *const SnpsvmDiffTable, out: *mut f64) -> SnpsvmStatus {
    guard(|| {
        let table = diff_table(&*non_null(table, "table")?)?;
        write_out(out, snpsvm::diff(genotype(a)?, genotype(b)?, &table), "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Encodes one genotype against a reference panel that holds `n_ww`,
/// `n_wm` and `n_mm` members at this SNP: the mean difference score.
///
/// # Safety
/// `table` must point to a table and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snpsvm_encode_feature(
    genotype_code: u8,
    n_ww: u64,
    n_wm: u64,
    n_mm: u64,
    table: *const SnpsvmDiffTable,
    out: *mut f64,
) -> SnpsvmStatus {
    guard(|| {
        let table = diff_table(&*non_null(table, "table")?)?;
        let panel = ReferencePanel::new(vec![SnpId::new("snp")?], vec![GenotypeCounts::new(n_ww, n_wm, n_mm)])?;
        let value = encode_feature(genotype(genotype_code)?, 0, &panel, &table)?;
        write_out(out, value, "out")?;
        Ok(SnpsvmStatus::Ok)
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn snpsvm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snpsvm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
