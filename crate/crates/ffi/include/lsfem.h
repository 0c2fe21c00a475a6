#ifndef LSFEM_H
#define LSFEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsfemStatus {
  LSFEM_STATUS_OK = 0,
  /*
   A solution was produced but an iteration or refinement limit hit first.
   */
  LSFEM_STATUS_UNCONVERGED = 1,
  LSFEM_STATUS_NULL_POINTER = 2,
  LSFEM_STATUS_INVALID_ARGUMENT = 3,
  LSFEM_STATUS_UNKNOWN_PROBLEM = 4,
  LSFEM_STATUS_SINGULAR_SYSTEM = 5,
  LSFEM_STATUS_DIVERGENCE = 6,
  LSFEM_STATUS_NO_REFERENCE = 7,
  LSFEM_STATUS_PANIC = 8,
} LsfemStatus;

/*
 Opaque ODE problem.
 */
typedef struct LsfemProblem LsfemProblem;

/*
 Opaque solution of a solve or adaptive run.
 */
typedef struct LsfemSolution LsfemSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty if none.
 The pointer stays valid until the next failing call on the thread.
 */
const char *lsfem_last_error(void);

/*
 Static description of a status code.
 */
const char *lsfem_status_str(enum LsfemStatus status);

/*
 Creates a built-in problem by name. `km` is used by
 `michaelis_menten` only; pass a non-positive value for the default.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LsfemStatus lsfem_problem_builtin(const char *name, double km, struct LsfemProblem **out);

/*
 Creates `y' = A y + b`, `y(t0) = g` on `[t0, t_end]` with constant
 `A` (`dim × dim`, row-major) and constant `b`.

 # Safety
 `a` must point to `dim * dim` values, `b` and `g` to `dim` values each.
 */
enum LsfemStatus lsfem_problem_linear(size_t dim,
                                      const double *a,
                                      const double *b,
                                      const double *g,
                                      double t0,
                                      double t_end,
                                      struct LsfemProblem **out);

/*
 State dimension of a problem, 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t lsfem_problem_dim(const struct LsfemProblem *problem);

/*
 # Safety
 `problem` must be null or a handle not yet freed.
 */
void lsfem_problem_free(struct LsfemProblem *problem);

/*
 Solves on `elements` uniform elements with splines of `degree`.
 `quad_points = 0` selects `degree + 1` Gauss points per element.
 On `LSFEM_STATUS_UNCONVERGED` a solution is still stored in `out`.

 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum LsfemStatus lsfem_solve(const struct LsfemProblem *problem,
                             size_t degree,
                             size_t elements,
                             size_t quad_points,
                             struct LsfemSolution **out);

/*
 Adaptive run with default settings and element tolerance `tol`.

 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum LsfemStatus lsfem_solve_adaptive(const struct LsfemProblem *problem,
                                      double tol,
                                      struct LsfemSolution **out);

/*
 Writes `y^h(t)` into `y[0..len]`; `len` must equal the state dimension.

 # Safety
 `solution` must be a live handle and `y` point to `len` writable values.
 */
enum LsfemStatus lsfem_solution_eval(const struct LsfemSolution *solution,
                                     double t,
                                     double *y,
                                     size_t len);

/*
 Final objective value, NaN for a null handle.

 # Safety
 `solution` must be null or a live handle.
 */
double lsfem_solution_objective(const struct LsfemSolution *solution);

/*
 # Safety
 `solution` must be null or a live handle.
 */
size_t lsfem_solution_iterations(const struct LsfemSolution *solution);

/*
 # Safety
 `solution` must be null or a live handle.
 */
bool lsfem_solution_converged(const struct LsfemSolution *solution);

/*
 Largest element residual norm.

 # Safety
 `solution` must be null or a live handle.
 */
double lsfem_solution_worst_residual(const struct LsfemSolution *solution);

/*
 Number of breakpoints of the solution's mesh.

 # Safety
 `solution` must be null or a live handle.
 */
size_t lsfem_solution_n_control_points(const struct LsfemSolution *solution);

/*
 Copies the breakpoints into `buf[0..len]`; `len` must be at least
 [`lsfem_solution_n_control_points`].

 # Safety
 `solution` must be a live handle and `buf` point to `len` writable values.
 */
enum LsfemStatus lsfem_solution_control_points(const struct LsfemSolution *solution,
                                               double *buf,
                                               size_t len);

/*
 L² error against the problem's exact solution.

 # Safety
 Both handles must be live and `out` a valid pointer.
 */
enum LsfemStatus lsfem_solution_l2_error(const struct LsfemSolution *solution,
                                         const struct LsfemProblem *problem,
                                         double *out);

/*
 # Safety
 `solution` must be null or a handle not yet freed.
 */
void lsfem_solution_free(struct LsfemSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSFEM_H */
