/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef DATAMARKET_H
#define DATAMARKET_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_VALIDATION = 2,
  DM_STATUS_NUMERIC = 3,
  DM_STATUS_PARAMETER = 4,
  DM_STATUS_UNSUPPORTED = 5,
  DM_STATUS_PARSE = 6,
  DM_STATUS_CONFIG = 7,
  DM_STATUS_CORPUS = 8,
  DM_STATUS_IO = 9,
  DM_STATUS_OUT_OF_RANGE = 10,
  DM_STATUS_PANIC = 11,
} DmStatus;

typedef enum DmParticipantKind {
  DM_PARTICIPANT_KIND_SELLER = 0,
  DM_PARTICIPANT_KIND_BUYER = 1,
} DmParticipantKind;

/*
 Opaque market simulation handle.
 */
typedef struct DmSimulation DmSimulation;

typedef struct DmConsistency {
  double lambda_max;
  double ci;
  double cr;
  double ri;
  bool passed;
} DmConsistency;

typedef struct DmReserve {
  double v1;
  double v2;
  double r0;
  double rs;
} DmReserve;

typedef struct DmBargainParams {
  double r_s;
  double r_b;
  double delta_s;
  double delta_eta_b;
  double p1;
  double p2;
  double alpha;
  double tau;
} DmBargainParams;

typedef struct DmEquilibrium {
  double price;
  double seller_extra;
  double buyer_extra;
  bool feasible;
} DmEquilibrium;

typedef struct DmStagePayoffs {
  uint8_t stage;
  double price;
  double is_profit;
  double ib_profit;
} DmStagePayoffs;

/*
 Coalition value callback: bit `i` of `mask` set means player `i` is in.
 */
typedef double (*DmCoalitionValue)(uint64_t mask, void *user_data);

typedef struct DmRunRecord {
  uint64_t seed;
  enum DmParticipantKind kind;
  /*
   NUL-terminated participant id such as "S1" or "B3".
   */
  char id[16];
  double reserve_or_budget;
  double price_or_payment;
  double extra_profit;
  bool feasible;
} DmRunRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into this library on the same thread.
 */
const char *dm_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *dm_version(void);

/*
 Principal-eigenvector weights of a row-major `n`×`n` ratio matrix.
 `weights_out` holds `n` doubles; `report_out` may be null.

 # Safety
 `matrix` must point to `n*n` doubles and `weights_out` to `n` doubles.
 */
enum DmStatus dm_ahp_weights_from_ratios(const double *matrix,
                                         size_t n,
                                         double *weights_out,
                                         struct DmConsistency *report_out);

/*
 Weights from a row-major `n`×`n` judgment matrix with entries 0, 1, 2.

 # Safety
 `judgments` must point to `n*n` bytes and `weights_out` to `n` doubles.
 */
enum DmStatus dm_ahp_derive_weights(const uint8_t *judgments,
                                    size_t n,
                                    double base,
                                    double *weights_out,
                                    struct DmConsistency *report_out);

/*
 Quality-adjusted reserve. `grades` holds four admitted scores
 (1.2, 1.0, 0.6, 0.4, 0.2); `weights` four weights or null for the defaults.

 # Safety
 `grades` must point to 4 doubles, `weights` to 4 doubles or be null.
 */
enum DmStatus dm_seller_reserve(double v1,
                                double v2,
                                const double *grades,
                                const double *weights,
                                struct DmReserve *out_reserve);

/*
 Satisfaction of a buyer with utility `xi` for a dataset graded `grades`.
 `weights` holds five weights (utility last) or is null for the defaults.

 # Safety
 `grades` must point to 4 doubles, `weights` to 5 doubles or be null.
 */
enum DmStatus dm_buyer_satisfaction(double xi,
                                    const double *grades,
                                    const double *weights,
                                    double *out_value);

/*
 Logistic discount of one buyer.

 # Safety
 `out_value` must be a valid pointer.
 */
enum DmStatus dm_logistic_discount(double satisfaction,
                                   double k,
                                   double midpoint,
                                   double *out_value);

/*
 Budget-weighted alliance discount over `n` members.

 # Safety
 `deltas` and `budgets` must each point to `n` doubles.
 */
enum DmStatus dm_alliance_discount(const double *deltas,
                                   const double *budgets,
                                   size_t n,
                                   double *out_value);

/*
 `(1 + eta)·delta_b`; fails with `DM_STATUS_PARAMETER` when the result is not below 1.

 # Safety
 `out_value` must be a valid pointer.
 */
enum DmStatus dm_platform_adjust(double delta_b, double eta, double *out_value);

/*
 Closed-form equilibrium price.

 # Safety
 Pointers must be valid.
 */
enum DmStatus dm_equilibrium_price(const struct DmBargainParams *p,
                                   struct DmEquilibrium *out_result);

/*
 Equilibrium price by fixed-point iteration.
 `out_iterations` may be null.

 # Safety
 `p` and `out_price` must be valid; `out_iterations` valid or null.
 */
enum DmStatus dm_fixed_point_oracle(const struct DmBargainParams *p,
                                    double tol,
                                    size_t max_iter,
                                    double *out_price,
                                    size_t *out_iterations);

/*
 Payoffs if `offer` is accepted at `stage` (1, 2 or 3).

 # Safety
 Pointers must be valid.
 */
enum DmStatus dm_stage_payoffs(const struct DmBargainParams *p,
                               uint8_t stage,
                               double offer,
                               struct DmStagePayoffs *out_payoffs);

/*
 The alliance's stage-2 counteroffer against a stage-3 price.

 # Safety
 Pointers must be valid.
 */
enum DmStatus dm_buyer_counteroffer(const struct DmBargainParams *p,
                                    double p3_price,
                                    double *out_price);

/*
 Exact Shapley values of an `n`-player game given by `value`, which is
 called exactly `2^n` times, sequentially, on the calling thread.

 # Safety
 `out_values` must point to `n` doubles; `value` must be safe to call with `user_data`.
 */
enum DmStatus dm_shapley_exact(size_t n,
                               DmCoalitionValue value,
                               void *user_data,
                               double *out_values);

/*
 Creates a simulation from TOML text (null for defaults). Free it with
 [`dm_simulation_free`].

 # Safety
 `config_toml` must be null or NUL-terminated; `out_sim` must be valid.
 */
enum DmStatus dm_simulation_new(const char *config_toml, struct DmSimulation **out_sim);

/*
 Runs seeds `first_seed .. first_seed + seeds`, replacing earlier records.

 # Safety
 `sim` must come from [`dm_simulation_new`].
 */
enum DmStatus dm_simulation_run(struct DmSimulation *sim, uint64_t first_seed, size_t seeds);

/*
 Number of records from the last run; 0 for a null handle.

 # Safety
 `sim` must be null or come from [`dm_simulation_new`].
 */
size_t dm_simulation_record_count(const struct DmSimulation *sim);

/*
 Copies record `index` into `out_record`.

 # Safety
 `sim` must come from [`dm_simulation_new`]; `out_record` must be valid.
 */
enum DmStatus dm_simulation_get_record(const struct DmSimulation *sim,
                                       size_t index,
                                       struct DmRunRecord *out_record);

/*
 Writes the records of the last run as CSV to `path`.

 # Safety
 `sim` must come from [`dm_simulation_new`]; `path` must be NUL-terminated.
 */
enum DmStatus dm_simulation_write_csv(const struct DmSimulation *sim, const char *path);

/*
 Releases a simulation. Null is ignored.

 # Safety
 `sim` must be null or come from [`dm_simulation_new`], and not be used afterwards.
 */
void dm_simulation_free(struct DmSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DATAMARKET_H */
