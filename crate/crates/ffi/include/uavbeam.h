#ifndef UAVBEAM_H
#define UAVBEAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible entry point.
 */
typedef enum UavbeamStatus {
  /**
   * Success.
   */
  UavbeamOk = 0,
  /**
   * A required pointer argument was null.
   */
  UavbeamNullArgument = 1,
  /**
   * An argument was out of range or inconsistent.
   */
  UavbeamInvalidArgument = 2,
  /**
   * The constraint set admits no solution.
   */
  UavbeamInfeasible = 3,
  /**
   * The solver stopped without a certified optimum.
   */
  UavbeamSolverFailure = 4,
  /**
   * An internal panic was caught at the ABI boundary.
   */
  UavbeamInternalError = 5,
} UavbeamStatus;

/**
 * Problem description handle. Opaque to C.
 */
typedef struct UavbeamProblem UavbeamProblem;

/**
 * Solved design handle. Opaque to C.
 */
typedef struct UavbeamSolution UavbeamSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Create a problem with `n_antennas` transmit antennas and `n_users` ground
 * users at default system parameters (users at the origin, no uncertainty,
 * 10 dB required SINR). Returns null on invalid sizes.
 */
struct UavbeamProblem *uavbeam_problem_new(uintptr_t n_antennas, uintptr_t n_users);

/**
 * Release a problem handle. Null is ignored.
 */
void uavbeam_problem_free(struct UavbeamProblem *problem);

/**
 * Set user `index`: estimated planar position in meters, location
 * uncertainty disk radius in meters, and normalized AoD error bound `rho`
 * (the jitter half-width is `rho` times the nominal AoD magnitude).
 */
enum UavbeamStatus uavbeam_problem_set_user(struct UavbeamProblem *problem,
                                            uintptr_t index,
                                            double x_m,
                                            double y_m,
                                            double radius_m,
                                            double rho);

/**
 * Set the per-user minimum required SINR values in dB; `len` must equal the
 * user count.
 */
enum UavbeamStatus uavbeam_problem_set_sinr_req_db(struct UavbeamProblem *problem,
                                                   const double *sinr_db,
                                                   uintptr_t len);

/**
 * Set the design margin in dB added to every required SINR to compensate
 * the first-order uncertainty model.
 */
enum UavbeamStatus uavbeam_problem_set_margin_db(struct UavbeamProblem *problem, double margin_db);

/**
 * Enable or disable the per-antenna power caps (enabled by default).
 */
enum UavbeamStatus uavbeam_problem_set_antenna_caps(struct UavbeamProblem *problem, bool enabled);

/**
 * Set the interior-point convergence tolerance (default 1e-8).
 */
enum UavbeamStatus uavbeam_problem_set_tolerance(struct UavbeamProblem *problem, double tolerance);

/**
 * Solve the problem. On success writes a new solution handle to `out`,
 * owned by the caller and released with `uavbeam_solution_free`.
 */
enum UavbeamStatus uavbeam_solve(const struct UavbeamProblem *problem,
                                 struct UavbeamSolution **out);

/**
 * Release a solution handle. Null is ignored.
 */
void uavbeam_solution_free(struct UavbeamSolution *solution);

/**
 * Total transmit power in watts, or NaN on a null handle.
 */
double uavbeam_solution_total_power_watts(const struct UavbeamSolution *solution);

/**
 * Total transmit power in dBm, or NaN on a null handle.
 */
double uavbeam_solution_total_power_dbm(const struct UavbeamSolution *solution);

/**
 * Optimized hover position in meters.
 */
enum UavbeamStatus uavbeam_solution_position(const struct UavbeamSolution *solution,
                                             double *x_m,
                                             double *y_m);

/**
 * Number of users in the solved design; 0 on a null handle.
 */
uintptr_t uavbeam_solution_n_users(const struct UavbeamSolution *solution);

/**
 * Number of antennas in the solved design; 0 on a null handle.
 */
uintptr_t uavbeam_solution_n_antennas(const struct UavbeamSolution *solution);

/**
 * Copy user `index`'s beamformer into `re`/`im`, each holding `len` values
 * with `len` equal to the antenna count. Entries are in units of sqrt(watt).
 */
enum UavbeamStatus uavbeam_solution_beamformer(const struct UavbeamSolution *solution,
                                               uintptr_t index,
                                               double *re,
                                               double *im,
                                               uintptr_t len);

/**
 * Second-to-first eigenvalue ratio of user `index`'s transmit covariance;
 * near zero certifies a rank-one optimum. NaN on bad arguments.
 */
double uavbeam_solution_rank_ratio(const struct UavbeamSolution *solution, uintptr_t index);

/**
 * Relative duality gap achieved by the conic solve; NaN on a null handle.
 */
double uavbeam_solution_duality_gap(const struct UavbeamSolution *solution);

/**
 * Message describing the most recent failure on this thread. Valid until
 * the next failing call on the same thread.
 */
const char *uavbeam_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *uavbeam_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* UAVBEAM_H */
