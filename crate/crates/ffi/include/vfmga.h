#ifndef VFMGA_H
#define VFMGA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VfmgaStatus {
  VFMGA_STATUS_OK = 0,
  VFMGA_STATUS_NULL_POINTER = 1,
  VFMGA_STATUS_INVALID_UTF8 = 2,
  VFMGA_STATUS_INVALID_ARGUMENT = 3,
  VFMGA_STATUS_IO = 4,
  VFMGA_STATUS_PARSE = 5,
  VFMGA_STATUS_MODEL = 6,
  VFMGA_STATUS_INFEASIBLE = 7,
  VFMGA_STATUS_UNBOUNDED = 8,
  VFMGA_STATUS_SOLVER = 9,
  VFMGA_STATUS_PREFERENCES = 10,
  VFMGA_STATUS_NOT_RUN = 11,
  VFMGA_STATUS_PANIC = 255,
} VfmgaStatus;

// Last pipeline stage to run, in execution order.
typedef enum VfmgaStage {
  VFMGA_STAGE_OPTIMIZE = 0,
  VFMGA_STAGE_GROUPS = 1,
  VFMGA_STAGE_GENERATE = 2,
  VFMGA_STAGE_EVALUATE = 3,
  VFMGA_STAGE_RANK = 4,
  VFMGA_STAGE_ANALYSE = 5,
} VfmgaStage;

// Relation of a constraint row.
typedef enum VfmgaRelation {
  VFMGA_RELATION_LE = 0,
  VFMGA_RELATION_GE = 1,
  VFMGA_RELATION_EQ = 2,
} VfmgaRelation;

// A linear program under construction, and its last solution.
typedef struct VfmgaLp VfmgaLp;

// Loaded run inputs plus the manifest of the last execution.
typedef struct VfmgaRun VfmgaRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Free with
// [`vfmga_string_free`].
char *vfmga_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void vfmga_string_free(char *s);

// Library version, static; do not free.
const char *vfmga_version(void);

// Loads a run configuration and the files it references.
//
// # Safety
// `config_path` must be a NUL-terminated string; `run` must be writable.
enum VfmgaStatus vfmga_run_load(const char *config_path, struct VfmgaRun **run);

// Runs the pipeline up to and including `last`, a [`VfmgaStage`] value,
// writing artifacts to `out_dir`.
//
// # Safety
// `run` must come from [`vfmga_run_load`]; `out_dir` must be a NUL-terminated string.
enum VfmgaStatus vfmga_run_execute(struct VfmgaRun *run, const char *out_dir, uint32_t last);

// Optimal system cost of the last execution.
//
// # Safety
// `run` must come from [`vfmga_run_load`]; `f_star` must be writable.
enum VfmgaStatus vfmga_run_optimal_cost(const struct VfmgaRun *run, double *f_star);

// Number of distinct alternatives, cost optimum included, of the last execution.
//
// # Safety
// `run` must come from [`vfmga_run_load`]; `count` must be writable.
enum VfmgaStatus vfmga_run_alternative_count(const struct VfmgaRun *run, size_t *count);

// Manifest of the last execution as JSON. Free with [`vfmga_string_free`].
//
// # Safety
// `run` must come from [`vfmga_run_load`]; `json` must be writable.
enum VfmgaStatus vfmga_run_manifest_json(const struct VfmgaRun *run, char **json);

// 1-based rank of `alternative` for `stakeholder` in the last execution.
//
// # Safety
// `run` must come from [`vfmga_run_load`]; both strings NUL-terminated; `rank` writable.
enum VfmgaStatus vfmga_run_rank_of(const struct VfmgaRun *run,
                                   const char *stakeholder,
                                   const char *alternative,
                                   size_t *rank);

// # Safety
// `run` must be NULL or come from [`vfmga_run_load`], not yet freed.
void vfmga_run_free(struct VfmgaRun *run);

// Empty program with objective zero. Never NULL.
struct VfmgaLp *vfmga_lp_new(void);

// Adds a variable with bounds `[lower, upper]`; infinities are allowed.
//
// # Safety
// `lp` must come from [`vfmga_lp_new`]; `index` must be writable.
enum VfmgaStatus vfmga_lp_add_variable(struct VfmgaLp *lp,
                                       double lower,
                                       double upper,
                                       size_t *index);

// Adds the row `Σ coefs[k] x[vars[k]] (relation) rhs`; `relation` is a
// [`VfmgaRelation`] value.
//
// # Safety
// `lp` must come from [`vfmga_lp_new`]; `vars` and `coefs` must hold `n` entries.
enum VfmgaStatus vfmga_lp_add_constraint(struct VfmgaLp *lp,
                                         size_t n,
                                         const size_t *vars,
                                         const double *coefs,
                                         uint32_t relation,
                                         double rhs);

// Sets the objective `offset + Σ coefs[k] x[vars[k]]`, minimised.
//
// # Safety
// `lp` must come from [`vfmga_lp_new`]; `vars` and `coefs` must hold `n` entries.
enum VfmgaStatus vfmga_lp_set_objective(struct VfmgaLp *lp,
                                        size_t n,
                                        const size_t *vars,
                                        const double *coefs,
                                        double offset);

// Solves the program. Returns `Infeasible` or `Unbounded` when no optimum exists.
//
// # Safety
// `lp` must come from [`vfmga_lp_new`]; `objective` must be writable.
enum VfmgaStatus vfmga_lp_solve(struct VfmgaLp *lp, double *objective);

// Value of variable `index` in the last optimal solution.
//
// # Safety
// `lp` must come from [`vfmga_lp_new`]; `value` must be writable.
enum VfmgaStatus vfmga_lp_value(const struct VfmgaLp *lp, size_t index, double *value);

// # Safety
// `lp` must be NULL or come from [`vfmga_lp_new`], not yet freed.
void vfmga_lp_free(struct VfmgaLp *lp);

// Weighted power mean of `values` with exponent `gamma >= 0`. Weights are
// normalised by their sum, which must be positive.
//
// # Safety
// `weights` and `values` must hold `n` entries; `result` must be writable.
enum VfmgaStatus vfmga_aggregate(size_t n,
                                 const double *weights,
                                 const double *values,
                                 double gamma,
                                 double *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VFMGA_H */
