#ifndef FDBBD_H
#define FDBBD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum FdbbdStatus {
  FDBBD_STATUS_OK = 0,
  FDBBD_STATUS_NULL_POINTER = 1,
  FDBBD_STATUS_INVALID_PARAMETER = 2,
  FDBBD_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Solver divergence, failed factorization or a degenerate secret.
   */
  FDBBD_STATUS_NUMERICAL = 4,
  /**
   * Output buffer is shorter than required.
   */
  FDBBD_STATUS_BUFFER_TOO_SMALL = 5,
  FDBBD_STATUS_INTERNAL = 6,
  FDBBD_STATUS_PANIC = 7,
} FdbbdStatus;

/**
 * Opaque measurement operator (random codebook plus its FFT plan).
 */
typedef struct FdbbdOperator FdbbdOperator;

/**
 * Opaque result of a full protocol run.
 */
typedef struct FdbbdProtocol FdbbdProtocol;

/**
 * A complex number, layout-compatible with `double _Complex`.
 */
typedef struct FdbbdComplex {
  double re;
  double im;
} FdbbdComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length excluding the NUL,
 * or 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t fdbbd_last_error(char *buf, size_t cap);

/**
 * Creates an operator with a random complex Gaussian `mu x n` codebook
 * drawn from `seed`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FdbbdStatus fdbbd_operator_new(size_t mu, size_t n, uint64_t seed, struct FdbbdOperator **out);

/**
 * Creates an operator from an explicit column-major `mu x n` codebook.
 *
 * # Safety
 * `entries` must be valid for `mu * n` reads; `out` for writes.
 */
enum FdbbdStatus fdbbd_operator_from_codebook(size_t mu,
                                              size_t n,
                                              const struct FdbbdComplex *entries,
                                              struct FdbbdOperator **out);

/**
 * # Safety
 * `op` must be null or a handle from `fdbbd_operator_new*` not yet freed.
 */
void fdbbd_operator_free(struct FdbbdOperator *op);

/**
 * # Safety
 * `op` must be a live handle; `mu`/`n` null or valid for writes.
 */
enum FdbbdStatus fdbbd_operator_dims(const struct FdbbdOperator *op, size_t *mu, size_t *n);

/**
 * `y = C(W)` for a column-major `mu x n` tensor `w`; `y` holds `mu` entries.
 *
 * # Safety
 * Buffers must be valid for their stated lengths.
 */
enum FdbbdStatus fdbbd_operator_apply(const struct FdbbdOperator *op,
                                      const struct FdbbdComplex *w,
                                      size_t w_len,
                                      struct FdbbdComplex *y,
                                      size_t y_len);

/**
 * `W = C*(y)`, the adjoint; `w` holds `mu * n` entries.
 *
 * # Safety
 * Buffers must be valid for their stated lengths.
 */
enum FdbbdStatus fdbbd_operator_adjoint(const struct FdbbdOperator *op,
                                        const struct FdbbdComplex *y,
                                        size_t y_len,
                                        struct FdbbdComplex *w,
                                        size_t w_len);

/**
 * Blind recovery of an `(s, k)`-sparse tensor from `y` with default solver
 * settings. Writes the `mu * n` estimate to `w`; `iterations` and
 * `residual` may be null.
 *
 * # Safety
 * Buffers must be valid for their stated lengths.
 */
enum FdbbdStatus fdbbd_hihtp_solve(const struct FdbbdOperator *op,
                                   const struct FdbbdComplex *y,
                                   size_t y_len,
                                   size_t s,
                                   size_t k,
                                   struct FdbbdComplex *w,
                                   size_t w_len,
                                   size_t *iterations,
                                   double *residual);

/**
 * Combines a recovered `mu x n` tensor with the caller's own dense length-`n`
 * signal into the length-`mu * n` secret.
 *
 * # Safety
 * Buffers must be valid for their stated lengths.
 */
enum FdbbdStatus fdbbd_compute_secret(size_t mu,
                                      size_t n,
                                      const struct FdbbdComplex *recovered,
                                      const struct FdbbdComplex *own_beta,
                                      struct FdbbdComplex *secret,
                                      size_t secret_len);

/**
 * Lower bound (nats) on the eavesdropper's uncertainty about one party's
 * signal, for `0 < gamma <= 1`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FdbbdStatus fdbbd_h_gamma(size_t k, double gamma, double *out);

/**
 * Achievable secret-key rate (nats per round) with a slack `beta_slack` in
 * `(0, 1)`. `achievable` is set to 1 when the rate is positive.
 *
 * # Safety
 * `rate` must be valid for writes; `achievable` null or valid.
 */
enum FdbbdStatus fdbbd_key_rate(size_t k,
                                size_t s,
                                double gamma,
                                double varsigma,
                                double sigma,
                                double beta_slack,
                                double *rate,
                                uint8_t *achievable);

/**
 * Runs the full protocol (`rounds` rounds, receiver SNR `snr_db`; pass
 * `INFINITY` for noiseless) with default quantizer and hash settings.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum FdbbdStatus fdbbd_protocol_run(size_t n,
                                    size_t mu,
                                    size_t k,
                                    size_t s,
                                    size_t rounds,
                                    double snr_db,
                                    uint64_t seed,
                                    struct FdbbdProtocol **out);

/**
 * # Safety
 * `p` must be null or a handle from `fdbbd_protocol_run` not yet freed.
 */
void fdbbd_protocol_free(struct FdbbdProtocol *p);

/**
 * Writes 1 to `agree` when both parties derived the same key.
 *
 * # Safety
 * `p` must be a live handle; `agree` valid for writes.
 */
enum FdbbdStatus fdbbd_protocol_keys_agree(const struct FdbbdProtocol *p, uint8_t *agree);

/**
 * Copies one party's key bits (one byte per bit, 0 or 1) into `bits`.
 * `party` is 0 for Alice, 1 for Bob. `len_out` receives the key length and
 * may be queried alone by passing `bits = NULL, cap = 0`.
 *
 * # Safety
 * `p` must be a live handle; `bits` valid for `cap` bytes; `len_out` null or valid.
 */
enum FdbbdStatus fdbbd_protocol_key(const struct FdbbdProtocol *p,
                                    uint32_t party,
                                    uint8_t *bits,
                                    size_t cap,
                                    size_t *len_out);

/**
 * Mean per-round RMSE between the two parties' secrets.
 *
 * # Safety
 * `p` must be a live handle; `out` valid for writes.
 */
enum FdbbdStatus fdbbd_protocol_mean_rmse(const struct FdbbdProtocol *p, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FDBBD_H */
