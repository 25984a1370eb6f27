#ifndef SNPSVM_H
#define SNPSVM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call. The non-zero codes up to 4 match the exit codes
// of the `snpsvm` command-line tool.
typedef enum SnpsvmStatus {
  SNPSVM_STATUS_OK = 0,
  // Invalid arguments or degenerate input (for example a single class).
  SNPSVM_STATUS_USAGE = 2,
  // Unreadable, malformed or mismatched input.
  SNPSVM_STATUS_INPUT = 3,
  // The solver stopped before certifying optimality. Outputs are still
  // written.
  SNPSVM_STATUS_NOT_CONVERGED = 4,
  // A required pointer was null.
  SNPSVM_STATUS_NULL_POINTER = 5,
  // An internal panic was caught.
  SNPSVM_STATUS_PANIC = 6,
} SnpsvmStatus;

// A trained linear machine.
typedef struct SnpsvmModel SnpsvmModel;

// A recursive split tree.
typedef struct SnpsvmTree SnpsvmTree;

// Difference scores between the three genotype pairs.
typedef struct SnpsvmDiffTable {
  double ww_wm;
  double wm_mm;
  double ww_mm;
} SnpsvmDiffTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Trains a linear machine on `l` rows of dimension `n`. Pass `INFINITY`
// for `c` to train a hard-margin machine. On `SNPSVM_STATUS_OK` or
// `SNPSVM_STATUS_NOT_CONVERGED`, `*out` receives a model to release with
// [`snpsvm_model_free`]; otherwise it is set to null.
//
// # Safety
// `x` must point to `l * n` doubles, `y` to `l` bytes, and `out` to
// writable storage for one pointer.
enum SnpsvmStatus snpsvm_train(const double *x,
                               const int8_t *y,
                               size_t l,
                               size_t n,
                               double c,
                               double tolerance,
                               uint64_t seed,
                               struct SnpsvmModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must be null or a pointer obtained from this library that has
// not been freed.
void snpsvm_model_free(struct SnpsvmModel *model);

// Writes the model's dimension to `*out`.
//
// # Safety
// `model` must be a live model and `out` writable.
enum SnpsvmStatus snpsvm_model_dim(const struct SnpsvmModel *model, size_t *out);

// Copies the normal vector `w` into `buffer`, which must hold at least
// the model's dimension.
//
// # Safety
// `model` must be a live model and `buffer` must have room for `len`
// doubles.
enum SnpsvmStatus snpsvm_model_weights(const struct SnpsvmModel *model, double *buffer, size_t len);

// Writes the offset `b` to `*out`.
//
// # Safety
// `model` must be a live model and `out` writable.
enum SnpsvmStatus snpsvm_model_bias(const struct SnpsvmModel *model, double *out);

// Writes `w . x + b` to `*out`.
//
// # Safety
// `model` must be a live model, `x` must point to `n` doubles and `out`
// must be writable.
enum SnpsvmStatus snpsvm_model_decision_value(const struct SnpsvmModel *model,
                                              const double *x,
                                              size_t n,
                                              double *out);

// Writes `+1` (case) or `-1` (control) to `*label`. A decision value of
// exactly zero counts as a case.
//
// # Safety
// As for [`snpsvm_model_decision_value`].
enum SnpsvmStatus snpsvm_model_classify(const struct SnpsvmModel *model,
                                        const double *x,
                                        size_t n,
                                        int8_t *label);

// Writes the geometric margin `1 / ||w||` to `*out`.
//
// # Safety
// `model` must be a live model and `out` writable.
enum SnpsvmStatus snpsvm_model_margin(const struct SnpsvmModel *model, double *out);

// Saves the model in the text format read by the command-line tool.
//
// # Safety
// `model` must be a live model and `path` a NUL-terminated UTF-8 string.
enum SnpsvmStatus snpsvm_model_save(const struct SnpsvmModel *model, const char *path);

// Loads a model file written by [`snpsvm_model_save`] or `snpsvm train`.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` writable.
enum SnpsvmStatus snpsvm_model_load(const char *path, struct SnpsvmModel **out);

// Recursively splits `l` labeled rows until every subgroup reaches purity
// `tau`, has fewer than `min_size` members, cannot be split, or sits at
// `max_depth`. Each split trains a machine with box bound `c`.
//
// # Safety
// As for [`snpsvm_train`].
enum SnpsvmStatus snpsvm_split(const double *x,
                               const int8_t *y,
                               size_t l,
                               size_t n,
                               double tau,
                               size_t min_size,
                               size_t max_depth,
                               double c,
                               uint64_t seed,
                               struct SnpsvmTree **out);

// Releases a tree. Null is ignored.
//
// # Safety
// `tree` must be null or a pointer obtained from this library that has
// not been freed.
void snpsvm_tree_free(struct SnpsvmTree *tree);

// Writes the number of leaves to `*out`.
//
// # Safety
// `tree` must be a live tree and `out` writable.
enum SnpsvmStatus snpsvm_tree_leaf_count(const struct SnpsvmTree *tree, size_t *out);

// Writes the tree depth (0 for a single leaf) to `*out`.
//
// # Safety
// `tree` must be a live tree and `out` writable.
enum SnpsvmStatus snpsvm_tree_depth(const struct SnpsvmTree *tree, size_t *out);

// Routes `x` to a leaf and reports its majority label, purity and the
// distance from `x` to the leaf center. `purity` and `distance` may be
// null.
//
// # Safety
// `tree` must be a live tree, `x` must point to `n` doubles and `label`
// must be writable.
enum SnpsvmStatus snpsvm_tree_classify(const struct SnpsvmTree *tree,
                                       const double *x,
                                       size_t n,
                                       int8_t *label,
                                       double *purity,
                                       double *distance);

// The default table: 0.25, 0.75 and 1.
struct SnpsvmDiffTable snpsvm_diff_table_default(void);

// Writes the difference score between genotypes `a` and `b` to `*out`.
//
// # Safety
// `table` must point to a table and `out` must be writable.
enum SnpsvmStatus snpsvm_diff(uint8_t a,
                              uint8_t b,
                              const struct SnpsvmDiffTable *table,
                              double *out);

// Encodes one genotype against a reference panel that holds `n_ww`,
// `n_wm` and `n_mm` members at this SNP: the mean difference score.
//
// # Safety
// `table` must point to a table and `out` must be writable.
enum SnpsvmStatus snpsvm_encode_feature(uint8_t genotype_code,
                                        uint64_t n_ww,
                                        uint64_t n_wm,
                                        uint64_t n_mm,
                                        const struct SnpsvmDiffTable *table,
                                        double *out);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library from the same thread.
const char *snpsvm_last_error(void);

// Library version as a static NUL-terminated string.
const char *snpsvm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNPSVM_H */
