#ifndef HOPRES_H
#define HOPRES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of every fallible call.
 */
typedef enum HopresStatus {
  HOPRES_STATUS_OK = 0,
  HOPRES_STATUS_NULL_POINTER = 1,
  HOPRES_STATUS_INVALID_ARGUMENT = 2,
  HOPRES_STATUS_PARSE_ERROR = 3,
  /**
   * Integrator or contour accuracy could not be certified.
   */
  HOPRES_STATUS_NUMERICAL_ERROR = 4,
  /**
   * `count` holds the required capacity.
   */
  HOPRES_STATUS_BUFFER_TOO_SMALL = 5,
  HOPRES_STATUS_UNSUPPORTED = 6,
  HOPRES_STATUS_PANIC = 7,
} HopresStatus;

/**
 * Opaque handle for one realization of q₀(x) + Σ u_j q(Nx − j).
 */
typedef struct HopresPotential HopresPotential;

/**
 * Opaque profile handle.
 */
typedef struct HopresProfile HopresProfile;

typedef struct HopresComplex {
  double re;
  double im;
} HopresComplex;

typedef struct HopresResonance {
  struct HopresComplex lambda;
  size_t multiplicity;
  /**
   * |F(λ)| after polishing.
   */
  double residual;
} HopresResonance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t hopres_last_error(char *buf, size_t len);

/**
 * Parses a profile expression such as `d1(psi)` or `box(-2, 1, 0.2)`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum HopresStatus hopres_profile_parse(const char *text, struct HopresProfile **out);

/**
 * # Safety
 * `p` must be NULL or a handle from `hopres_profile_parse` not yet freed.
 */
void hopres_profile_free(struct HopresProfile *p);

/**
 * # Safety
 * `p` must be a live profile handle and `out` writable.
 */
enum HopresStatus hopres_profile_eval(const struct HopresProfile *p,
                                      double x,
                                      struct HopresComplex *out);

/**
 * q̂(ξ) = ∫ e^{-ixξ} q(x) dx.
 *
 * # Safety
 * `p` must be a live profile handle and `out` writable.
 */
enum HopresStatus hopres_profile_fourier(const struct HopresProfile *p,
                                         double xi,
                                         struct HopresComplex *out);

/**
 * Number of vanishing moments of q in one dimension.
 *
 * # Safety
 * `p` must be a live profile handle and `out` writable.
 */
enum HopresStatus hopres_profile_vanishing_order(const struct HopresProfile *p, size_t *out);

/**
 * Samples coefficients u_j, |j| ≤ n, from `law` (`rademacher` or
 * `uniform_scaled`) with `seed` and builds V = q₀ + Σ u_j q(n x − j).
 * Pass n = 0 for the bare q₀. The profiles are copied.
 *
 * # Safety
 * `q0`, `q` must be live profile handles, `law` a NUL-terminated string
 * (or NULL when n = 0) and `out` writable.
 */
enum HopresStatus hopres_potential_new(const struct HopresProfile *q0,
                                       const struct HopresProfile *q,
                                       const char *law,
                                       size_t n,
                                       uint64_t seed,
                                       struct HopresPotential **out);

/**
 * # Safety
 * `v` must be NULL or a handle from `hopres_potential_new` not yet freed.
 */
void hopres_potential_free(struct HopresPotential *v);

/**
 * # Safety
 * `v` must be a live potential handle and `out` writable.
 */
enum HopresStatus hopres_potential_eval(const struct HopresPotential *v,
                                        double x,
                                        struct HopresComplex *out);

/**
 * The outgoing-matching function F(λ); zero exactly at resonances.
 *
 * # Safety
 * `v` must be a live potential handle and `out` writable.
 */
enum HopresStatus hopres_outgoing_defect(const struct HopresPotential *v,
                                         struct HopresComplex lambda,
                                         struct HopresComplex *out);

/**
 * All resonances in [re0, re1] × [im0, im1], certified by winding numbers.
 * `*count` receives the number found; when it exceeds `capacity` nothing
 * is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `v` must be a live potential handle, `buf` must point to `capacity`
 * writable records (or be NULL when `capacity` is 0), `count` writable.
 */
enum HopresStatus hopres_find_resonances(const struct HopresPotential *v,
                                         double re0,
                                         double re1,
                                         double im0,
                                         double im1,
                                         double tol,
                                         struct HopresResonance *buf,
                                         size_t capacity,
                                         size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOPRES_H */
