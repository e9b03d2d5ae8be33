#ifndef QFC_H
#define QFC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define QFC_OK 0

#define QFC_ERR_INVALID_ARGUMENT 1

#define QFC_ERR_EMPTY_CELL 2

#define QFC_ERR_CONVERGENCE 3

#define QFC_ERR_INFEASIBLE 4

#define QFC_ERR_NULL_POINTER 5

#define QFC_ERR_ENCODING 6

/**
 * Opaque density handle.
 */
typedef struct QfcDensity QfcDensity;

/**
 * Opaque multi-resolution quantizer handle.
 */
typedef struct QfcMrsq QfcMrsq;

/**
 * Opaque scalar-quantizer handle.
 */
typedef struct QfcQuantizer QfcQuantizer;

/**
 * Opaque silent-quantizer handle.
 */
typedef struct QfcSilentQuantizer QfcSilentQuantizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message for the calling thread into `buf` (NUL
 * terminated, truncating) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
size_t qfc_last_error_message(char *buf, size_t len);

/**
 * Builds a density from a textual spec such as `gaussian:0,1`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be a valid pointer.
 */
int qfc_density_parse(const char *spec, double tail_mass, size_t grid_points, QfcDensity **out);

/**
 * Gaussian density clipped at the given two-sided tail mass.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int qfc_density_gaussian(double mean,
                         double variance,
                         double tail_mass,
                         size_t grid_points,
                         QfcDensity **out);

/**
 * # Safety
 * `d` must come from a qfc constructor and not have been freed.
 */
void qfc_density_free(QfcDensity *d);

/**
 * # Safety
 * `d` must be a live density handle.
 */
double qfc_density_mean(const QfcDensity *d);

/**
 * # Safety
 * `d` must be a live density handle.
 */
double qfc_density_variance(const QfcDensity *d);

/**
 * # Safety
 * `d` must be a live density handle.
 */
double qfc_density_mass_on(const QfcDensity *d, double lo, double hi);

/**
 * Returns 1 if the density passes the discrete log-concavity check at `tol`,
 * 0 if it fails, -1 on a null handle.
 *
 * # Safety
 * `d` must be a live density handle or null.
 */
int qfc_density_check_log_concavity(const QfcDensity *d, double tol);

/**
 * Lloyd-Max design at `rate` bits.
 *
 * # Safety
 * `d` must be a live density handle; `out` must be valid.
 */
int qfc_lloyd_max(const QfcDensity *d,
                  uint32_t rate,
                  double tol,
                  size_t max_iter,
                  QfcQuantizer **out);

/**
 * # Safety
 * `q` must come from a qfc constructor and not have been freed.
 */
void qfc_quantizer_free(QfcQuantizer *q);

/**
 * # Safety
 * `q` must be a live quantizer handle.
 */
size_t qfc_quantizer_num_cells(const QfcQuantizer *q);

/**
 * Copies levels into `buf` if it holds at least `len` entries; returns the
 * number of levels.
 *
 * # Safety
 * `q` must be live; `buf` must point to `len` doubles or be null.
 */
size_t qfc_quantizer_levels(const QfcQuantizer *q, double *buf, size_t len);

/**
 * Copies reproduction points; same contract as [`qfc_quantizer_levels`].
 *
 * # Safety
 * `q` must be live; `buf` must point to `len` doubles or be null.
 */
size_t qfc_quantizer_points(const QfcQuantizer *q, double *buf, size_t len);

/**
 * # Safety
 * `q` must be a live quantizer handle.
 */
size_t qfc_quantizer_encode(const QfcQuantizer *q, double x);

/**
 * # Safety
 * `q` must be live; `out` must be valid.
 */
int qfc_quantizer_decode(const QfcQuantizer *q, size_t index, double *out);

/**
 * Mean squared error of the quantizer against a density.
 *
 * # Safety
 * Both handles must be live.
 */
double qfc_quantizer_distortion(const QfcQuantizer *q, const QfcDensity *d);

/**
 * Minimum cell-probability constrained three-level design.
 *
 * # Safety
 * `d` must be live; `out` must be valid.
 */
int qfc_silent_design(const QfcDensity *d,
                      double delta,
                      double tol,
                      size_t max_iter,
                      QfcSilentQuantizer **out);

/**
 * # Safety
 * `s` must come from `qfc_silent_design` and not have been freed.
 */
void qfc_silent_free(QfcSilentQuantizer *s);

/**
 * # Safety
 * `s` must be a live silent-quantizer handle.
 */
size_t qfc_silent_index(const QfcSilentQuantizer *s);

/**
 * Clones the inner three-cell quantizer into a fresh handle.
 *
 * # Safety
 * `s` must be live; `out` must be valid.
 */
int qfc_silent_quantizer(const QfcSilentQuantizer *s, QfcQuantizer **out);

/**
 * Generalized Lloyd-Max design over `n_stages` stages.
 *
 * # Safety
 * `d` must be live; `rates` and `weights` must point to `n_stages` entries;
 * `out` must be valid.
 */
int qfc_mrsq_design(const QfcDensity *d,
                    const uint32_t *rates,
                    const double *weights,
                    size_t n_stages,
                    double tol,
                    size_t max_iter,
                    QfcMrsq **out);

/**
 * # Safety
 * `m` must come from `qfc_mrsq_design` and not have been freed.
 */
void qfc_mrsq_free(QfcMrsq *m);

/**
 * # Safety
 * `m` must be a live MRSQ handle.
 */
size_t qfc_mrsq_stages(const QfcMrsq *m);

/**
 * Writes the per-stage sub-indices of `w`; `buf` must hold one entry per stage.
 *
 * # Safety
 * `m` must be live; `buf` must point to `len` entries.
 */
int qfc_mrsq_encode(const QfcMrsq *m, double w, uint32_t *buf, size_t len);

/**
 * Reproduction point after the first `len` stages of indices.
 *
 * # Safety
 * `m` must be live; `prefix` must point to `len` entries; `out` must be valid.
 */
int qfc_mrsq_decode_prefix(const QfcMrsq *m, const uint32_t *prefix, size_t len, double *out);

/**
 * Distortion of the stage-`stage` description against a density.
 *
 * # Safety
 * Both handles must be live; `out` must be valid.
 */
int qfc_mrsq_stage_distortion(const QfcMrsq *m, const QfcDensity *d, size_t stage, double *out);

/**
 * Backward Riccati recursion. `state_weights` holds `horizon` entries,
 * `control_weights` holds `horizon - 1`; output buffers take `horizon + 1`
 * (`s`), `horizon` (`k`) and `horizon` (`g`) entries.
 *
 * # Safety
 * All pointers must reference buffers of the documented lengths.
 */
int qfc_riccati(double a,
                const double *state_weights,
                const double *control_weights,
                size_t horizon,
                double *s_out,
                double *k_out,
                double *g_out);

/**
 * Instantaneous-cost bounds of the variable-rate relaxation; both output
 * buffers take `horizon` entries.
 *
 * # Safety
 * `lb_out` and `ub_out` must point to `horizon` doubles.
 */
int qfc_prop4_bounds(double a,
                     double rate,
                     double sigma2,
                     size_t horizon,
                     double *lb_out,
                     double *ub_out);

/**
 * Bennett high-rate distortion approximation for a density handle.
 *
 * # Safety
 * `d` must be a live density handle.
 */
double qfc_bennett_distortion(const QfcDensity *d, double rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFC_H */
