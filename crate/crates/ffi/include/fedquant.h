#ifndef FEDQUANT_H
#define FEDQUANT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FqCode {
  FQ_CODE_GAMMA = 0,
  FQ_CODE_DELTA = 1,
} FqCode;

typedef enum FqQuantizer {
  FQ_QUANTIZER_ROUND = 0,
  FQ_QUANTIZER_STOCHASTIC = 1,
  FQ_QUANTIZER_DITHERED = 2,
} FqQuantizer;

typedef enum FqStatus {
  FQ_STATUS_OK = 0,
  FQ_STATUS_NULL_POINTER = 1,
  FQ_STATUS_INVALID_ARGUMENT = 2,
  FQ_STATUS_CORRUPT = 3,
  FQ_STATUS_INFEASIBLE_BUDGET = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  FQ_STATUS_INTERNAL = 5,
} FqStatus;

/**
 * Owned bytes of one encoded container.
 */
typedef struct FqBuffer FqBuffer;

/**
 * Quantizer settings plus the rounding stream, advanced by each encode.
 */
typedef struct FqEncoder FqEncoder;

/**
 * Owned decoded values.
 */
typedef struct FqVector FqVector;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a
 * success. Valid until the next call on the same thread.
 */
const char *fq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fq_version(void);

/**
 * Creates an encoder. `quantizer` is an [`FqQuantizer`] and `code` an
 * [`FqCode`] value. `seed` keys the stochastic rounding stream and the
 * dither seeds.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum FqStatus fq_encoder_new(double step,
                             uint32_t quantizer,
                             uint32_t code,
                             uint64_t seed,
                             struct FqEncoder **out);

/**
 * # Safety
 * `enc` must be null or come from [`fq_encoder_new`], freed once.
 */
void fq_encoder_free(struct FqEncoder *enc);

/**
 * Quantizes and encodes `len` values into a new container buffer.
 *
 * # Safety
 * `enc` must be a live encoder, `values` must point to `len` doubles and
 * `out` to writable storage.
 */
enum FqStatus fq_encode(struct FqEncoder *enc,
                        const double *values,
                        size_t len,
                        struct FqBuffer **out);

/**
 * # Safety
 * `buf` must be a live buffer.
 */
const uint8_t *fq_buffer_data(const struct FqBuffer *buf);

/**
 * # Safety
 * `buf` must be null or a live buffer.
 */
size_t fq_buffer_len(const struct FqBuffer *buf);

/**
 * Payload bits, excluding the fixed header.
 *
 * # Safety
 * `buf` must be null or a live buffer.
 */
uint64_t fq_buffer_payload_bits(const struct FqBuffer *buf);

/**
 * # Safety
 * `buf` must be null or come from [`fq_encode`], freed once.
 */
void fq_buffer_free(struct FqBuffer *buf);

/**
 * Decodes any container (main codec or baseline) into a new vector.
 *
 * # Safety
 * `data` must point to `len` bytes and `out` to writable storage.
 */
enum FqStatus fq_decode(const uint8_t *data, size_t len, struct FqVector **out);

/**
 * # Safety
 * `v` must be a live vector.
 */
const double *fq_vector_data(const struct FqVector *v);

/**
 * # Safety
 * `v` must be null or a live vector.
 */
size_t fq_vector_len(const struct FqVector *v);

/**
 * # Safety
 * `v` must be null or come from [`fq_decode`], freed once.
 */
void fq_vector_free(struct FqVector *v);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDQUANT_H */
