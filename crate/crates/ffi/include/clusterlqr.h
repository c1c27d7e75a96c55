#ifndef CLUSTERLQR_H
#define CLUSTERLQR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes; the nonzero values match the CLI exit codes where they overlap.
typedef enum ClqrStatus {
  CLQR_STATUS_OK = 0,
  CLQR_STATUS_NULL_POINTER = 1,
  CLQR_STATUS_INVALID_ARGUMENT = 2,
  CLQR_STATUS_NUMERICAL = 3,
  CLQR_STATUS_INSTABILITY = 4,
  CLQR_STATUS_PANIC = 5,
} ClqrStatus;

// A reduced-order controller lifted to full order.
typedef struct ClqrController ClqrController;

// A plant together with its full-order LQR solution.
typedef struct ClqrSystem ClqrSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Builds a system from A (n×n), B (n×m), B_d (n×nb), Q (n×n), R (m×m) and
// solves its full-order LQR problem.
//
// # Safety
// Each pointer must reference an array of the stated size; `out` must be writable.
enum ClqrStatus clqr_system_new(size_t n,
                                size_t m,
                                size_t nb,
                                const double *a,
                                const double *b,
                                const double *bd,
                                const double *q,
                                const double *r,
                                struct ClqrSystem **out);

// Random clustered consensus network with B = I, B_d = e₁, Q = q_scale·I, R = I.
//
// # Safety
// `out` must be writable.
enum ClqrStatus clqr_consensus_new(size_t n,
                                   size_t groups,
                                   double p_intra,
                                   double ratio,
                                   double q_scale,
                                   uint64_t seed,
                                   struct ClqrSystem **out);

// # Safety
// `sys` must come from a `clqr_*_new` call and not have been freed; null is ignored.
void clqr_system_free(struct ClqrSystem *sys);

// State dimension n, or 0 for a null handle.
//
// # Safety
// `sys` must be a live handle or null.
size_t clqr_system_states(const struct ClqrSystem *sys);

// Input dimension m, or 0 for a null handle.
//
// # Safety
// `sys` must be a live handle or null.
size_t clqr_system_inputs(const struct ClqrSystem *sys);

// Full-order gain K (m×n, row-major) into `buf` of length `len` = m·n.
//
// # Safety
// `sys` must be a live handle and `buf` must hold `len` doubles.
enum ClqrStatus clqr_system_full_gain(const struct ClqrSystem *sys, double *buf, size_t len);

// Designs a clustered controller with `r` clusters from Φ_κ.
//
// `design` is one of "cluster", "weight", "alternating", "baseline:coherency",
// "baseline:openloop_h2". Coherency and weight designs need a consensus system.
//
// # Safety
// `sys` must be a live handle, `design` a NUL-terminated string and `out` writable.
enum ClqrStatus clqr_design(const struct ClqrSystem *sys,
                            const char *design,
                            size_t r,
                            size_t kappa,
                            uint64_t seed,
                            struct ClqrController **out);

// # Safety
// `ctrl` must come from `clqr_design` and not have been freed; null is ignored.
void clqr_controller_free(struct ClqrController *ctrl);

// Lifted gain K̂ (m×n, row-major) into `buf` of length m·n.
//
// # Safety
// `ctrl` must be a live handle and `buf` must hold `len` doubles.
enum ClqrStatus clqr_controller_gain(const struct ClqrController *ctrl, double *buf, size_t len);

// Zero-based cluster label of each state into `buf` of length n.
//
// # Safety
// `ctrl` must be a live handle and `buf` must hold `len` entries.
enum ClqrStatus clqr_controller_labels(const struct ClqrController *ctrl, size_t *buf, size_t len);

// 1 when A − BK̂ is Hurwitz, 0 otherwise (including a null handle).
//
// # Safety
// `ctrl` must be a live handle or null.
int32_t clqr_controller_stable(const struct ClqrController *ctrl);

// Relative H₂ model-matching error; `CLQR_STATUS_INSTABILITY` for an unstable loop.
//
// # Safety
// `ctrl` must be a live handle and `out` writable.
enum ClqrStatus clqr_controller_rel_error(const struct ClqrController *ctrl, double *out);

// Low-rank clustering objective ξ_κ of the design, NaN for a null handle.
//
// # Safety
// `ctrl` must be a live handle or null.
double clqr_controller_xi(const struct ClqrController *ctrl);

// Communication links of the two-layer controller and of full LQR.
//
// # Safety
// Both output pointers must be writable.
enum ClqrStatus clqr_link_count(uint64_t n, uint64_t r, uint64_t *two_layer, uint64_t *full_lqr);

// Message of the last failure on this thread; empty when none. The pointer
// stays valid until the next failing call on the same thread.
const char *clqr_last_error(void);

// Library version as a static NUL-terminated string.
const char *clqr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLUSTERLQR_H */
