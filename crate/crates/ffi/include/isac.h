#ifndef ISAC_H
#define ISAC_H

/* Generated by cbindgen from the isac-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IsacStatus {
  ISAC_STATUS_OK = 0,
  ISAC_STATUS_NULL_POINTER = 1,
  ISAC_STATUS_INVALID_ARGUMENT = 2,
  ISAC_STATUS_DIMENSION_MISMATCH = 3,
  ISAC_STATUS_SINGULAR = 4,
  ISAC_STATUS_INFEASIBLE = 5,
  ISAC_STATUS_NOT_CONVERGED = 6,
  ISAC_STATUS_BUFFER_TOO_SMALL = 7,
  ISAC_STATUS_PANIC = 8,
  ISAC_STATUS_INTERNAL = 9,
} IsacStatus;

typedef enum IsacBasisKind {
  ISAC_BASIS_KIND_SC = 0,
  ISAC_BASIS_KIND_OFDM = 1,
  ISAC_BASIS_KIND_OTFS = 2,
  ISAC_BASIS_KIND_AFDM = 3,
} IsacBasisKind;

typedef enum IsacAcfMode {
  ISAC_ACF_MODE_PERIODIC = 0,
  ISAC_ACF_MODE_APERIODIC = 1,
} IsacAcfMode;

typedef struct IsacBasis IsacBasis;

typedef struct IsacConstellation IsacConstellation;

typedef struct IsacPulse IsacPulse;

typedef struct IsacComplex {
  double re;
  double im;
} IsacComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *isac_version(void);

/**
 * Message for the most recent failure on the calling thread, or an empty
 * string. Do not free.
 */
const char *isac_last_error_message(void);

/**
 * Standard alphabet by label (`BPSK`, `QPSK`, `8PSK`, `16QAM`, `64QAM`, ...)
 * with uniform probabilities.
 *
 * # Safety
 * `label` must be a NUL-terminated string; `out` a valid pointer.
 */
enum IsacStatus isac_constellation_standard(const char *label, struct IsacConstellation **out);

/**
 * Custom alphabet. `probs` may be NULL for uniform probabilities.
 *
 * # Safety
 * `points` (and `probs` if non-null) must hold `len` elements; `out` must
 * be a valid pointer.
 */
enum IsacStatus isac_constellation_new(const struct IsacComplex *points,
                                       const double *probs,
                                       size_t len,
                                       struct IsacConstellation **out);

/**
 * # Safety
 * `c` must be a live handle; `out` a valid pointer.
 */
enum IsacStatus isac_constellation_len(const struct IsacConstellation *c, size_t *out);

/**
 * `E|x|⁴ / (E|x|²)²` under the point probabilities.
 *
 * # Safety
 * `c` must be a live handle; `out` a valid pointer.
 */
enum IsacStatus isac_constellation_kurtosis(const struct IsacConstellation *c, double *out);

/**
 * Copies the point probabilities into `out`, which holds `cap` doubles.
 *
 * # Safety
 * `c` must be a live handle; `out` must hold `cap` doubles.
 */
enum IsacStatus isac_constellation_probs(const struct IsacConstellation *c,
                                         double *out,
                                         size_t cap);

/**
 * Copies the points into `out`, which holds `cap` elements.
 *
 * # Safety
 * `c` must be a live handle; `out` must hold `cap` elements.
 */
enum IsacStatus isac_constellation_points(const struct IsacConstellation *c,
                                          struct IsacComplex *out,
                                          size_t cap);

/**
 * # Safety
 * `c` must be NULL or a live handle, which is invalid afterwards.
 */
void isac_constellation_free(struct IsacConstellation *c);

/**
 * Modulation basis of dimension `n` with default parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IsacStatus isac_basis_new(enum IsacBasisKind kind, size_t n, struct IsacBasis **out);

/**
 * Time samples `x = U·s` for `n` symbols.
 *
 * # Safety
 * `b` must be a live handle; `symbols` and `out` must hold `n` elements.
 */
enum IsacStatus isac_basis_modulate(const struct IsacBasis *b,
                                    const struct IsacComplex *symbols,
                                    size_t n,
                                    struct IsacComplex *out);

/**
 * # Safety
 * `b` must be NULL or a live handle, which is invalid afterwards.
 */
void isac_basis_free(struct IsacBasis *b);

/**
 * `|DFT(x)|²` of `n` samples into `out` (`n` doubles).
 *
 * # Safety
 * `signal` and `out` must hold `n` elements.
 */
enum IsacStatus isac_psd(const struct IsacComplex *signal, size_t n, double *out);

/**
 * Integrated sidelobe level of one block; lags with `|k| ≤ exclude` are
 * left out.
 *
 * # Safety
 * `signal` must hold `n` elements; `out` must be a valid pointer.
 */
enum IsacStatus isac_isl(const struct IsacComplex *signal,
                         size_t n,
                         enum IsacAcfMode mode,
                         size_t exclude,
                         double *out);

/**
 * Monte-Carlo expected ISL over `trials` random blocks. A NULL
 * `constellation` means Gaussian symbols.
 *
 * # Safety
 * `b` must be a live handle, `c` NULL or a live handle, and the outputs
 * valid pointers.
 */
enum IsacStatus isac_eisl(const struct IsacBasis *b,
                          const struct IsacConstellation *c,
                          enum IsacAcfMode mode,
                          size_t trials,
                          uint64_t seed,
                          double *mean,
                          double *variance);

/**
 * Root-raised-cosine pulse with period `t`, roll-off `beta`, oversampling
 * `k` and span `span` symbols.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum IsacStatus isac_pulse_rrc(double t,
                               double beta,
                               size_t k,
                               size_t span,
                               struct IsacPulse **out);

/**
 * Nyquist pulse minimizing the ACF energy over delays
 * `[region_start, region_end]` seconds. The region ISLR of the RRC start
 * point and of the result (dB) are written to the last two arguments.
 *
 * # Safety
 * All out-pointers must be valid.
 */
enum IsacStatus isac_pulse_design(double t,
                                  double beta,
                                  size_t k,
                                  size_t span,
                                  double region_start,
                                  double region_end,
                                  struct IsacPulse **out,
                                  double *islr_before_db,
                                  double *islr_after_db);

/**
 * Region ISLR in dB over `[start, end]` seconds.
 *
 * # Safety
 * `p` must be a live handle; `out` a valid pointer.
 */
enum IsacStatus isac_pulse_region_islr_db(const struct IsacPulse *p,
                                          double start,
                                          double end,
                                          double *out);

/**
 * Largest `|g(kT)|` over nonzero integers `k`; zero for a Nyquist pulse.
 *
 * # Safety
 * `p` must be a live handle; `out` a valid pointer.
 */
enum IsacStatus isac_pulse_nyquist_defect(const struct IsacPulse *p, double *out);

/**
 * Writes the `span·k` dimensionless taps into `out` (capacity `cap`) and
 * their count into `len`.
 *
 * # Safety
 * `p` must be a live handle; `out` must hold `cap` doubles; `len` valid.
 */
enum IsacStatus isac_pulse_taps(const struct IsacPulse *p, double *out, size_t cap, size_t *len);

/**
 * # Safety
 * `p` must be NULL or a live handle, which is invalid afterwards.
 */
void isac_pulse_free(struct IsacPulse *p);

/**
 * AWGN mutual information in bits at `snr_db` (unit signal power).
 *
 * # Safety
 * `c` must be a live handle; `out` a valid pointer.
 */
enum IsacStatus isac_mutual_information(const struct IsacConstellation *c,
                                        double snr_db,
                                        double *out);

/**
 * Rate-maximizing probabilities on the points of `c` subject to unit power
 * and kurtosis at most `kappa`. The shaped alphabet is a new handle.
 *
 * # Safety
 * `c` must be a live handle; `out` and `mi_bits` valid pointers.
 */
enum IsacStatus isac_pcs_shape(const struct IsacConstellation *c,
                               double kappa,
                               double snr_db,
                               struct IsacConstellation **out,
                               double *mi_bits);

/**
 * Least-squares estimation error `σ² n_rx tr((X Xᴴ)⁻¹)` for the
 * `n_tx × l` block `x`.
 *
 * # Safety
 * `x` must hold `n_tx·l` elements; `out` must be a valid pointer.
 */
enum IsacStatus isac_lse_error(const struct IsacComplex *x,
                               size_t n_tx,
                               size_t l,
                               size_t n_rx,
                               double noise_var,
                               double *out);

/**
 * Whitening precoder `W = √(P l / n_tx) (S Sᴴ)^{−1/2}` for the `n_tx × l`
 * block `s`; `w` receives `n_tx·n_tx` elements.
 *
 * # Safety
 * `s` must hold `n_tx·l` elements and `w` `n_tx·n_tx`.
 */
enum IsacStatus isac_ddp_precoder(const struct IsacComplex *s,
                                  size_t n_tx,
                                  size_t l,
                                  double power,
                                  struct IsacComplex *w);

/**
 * `log₂ det(I + H W Wᴴ Hᴴ / σ²)` for an `n_tx × n_tx` precoder and an
 * `n_cu × n_tx` channel.
 *
 * # Safety
 * `w` must hold `n_tx·n_tx` elements, `h` `n_cu·n_tx`; `out` valid.
 */
enum IsacStatus isac_comm_rate(const struct IsacComplex *w,
                               size_t n_tx,
                               const struct IsacComplex *h,
                               size_t n_cu,
                               double noise_var,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISAC_H */
