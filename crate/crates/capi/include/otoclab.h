/* C interface to the otoclab scrambling toolkit.
 *
 * All functions returning otoclab_status set a thread-local message on
 * failure, readable via otoclab_last_error_message(). Handles are created
 * and freed by this library only; passing foreign pointers is undefined
 * behaviour. */

#ifndef OTOCLAB_H
#define OTOCLAB_H

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum otoclab_status {
  OTOCLAB_STATUS_OK = 0,
  // A required pointer argument was null (or a length was zero).
  OTOCLAB_STATUS_NULL_ARGUMENT = 1,
  // Arguments were rejected by validation; see the error message.
  OTOCLAB_STATUS_BAD_ARGUMENT = 2,
  // Inputs were well-formed but the computation failed.
  OTOCLAB_STATUS_COMPUTE_FAILED = 3,
  // An internal invariant broke; the handle is still safe to free.
  OTOCLAB_STATUS_PANICKED = 4,
} otoclab_status;

// One diagonalized disorder realization plus the couplings that built
// it, shared by all correlator and protocol calls.
typedef struct otoclab_system otoclab_system;

// Shot-sampled readout: empirical mean of a ±1 observable and its
// binomial standard error. (`std_err`, not `stderr`: the latter is a
// macro once `<stdio.h>` is included.)
typedef struct otoclab_shot_readout {
  double mean;
  double std_err;
  uint64_t shots;
} otoclab_shot_readout;

// Message for the most recent failure on this thread. Never null; empty
// before the first failure. The pointer is invalidated by the next
// failing call on the same thread.
const char *otoclab_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *otoclab_version(void);

// Create a transverse-field spin-glass realization: `n` spins, Gaussian
// couplings of scale `j_scale` drawn from `seed`, transverse field
// `gamma`. Diagonalization happens here, so construction is the
// expensive call. Free with `otoclab_system_free`.
//
// # Safety
// `out` must point to writable storage for one pointer.
enum otoclab_status otoclab_tfsk_new(size_t n,
                                     double j_scale,
                                     double gamma,
                                     uint64_t seed,
                                     struct otoclab_system **out);

// Release a handle from `otoclab_tfsk_new`. Null is a no-op.
//
// # Safety
// `system` must be a pointer returned by this library and not yet freed.
void otoclab_system_free(struct otoclab_system *system);

// Number of spins in the system; 0 for a null handle.
//
// # Safety
// `system` must be null or a live handle from this library.
size_t otoclab_system_sites(const struct otoclab_system *system);

// Thermal autocorrelation `R(t)` of the site-`site` σᶻ probe on the
// given time grid. Sites are 1-based.
//
// # Safety
// `times` must point to `n_times` readable doubles and `out` to
// `n_times` writable doubles.
enum otoclab_status otoclab_autocorrelation(const struct otoclab_system *system,
                                            double beta,
                                            size_t site,
                                            const double *times,
                                            size_t n_times,
                                            double *out);

// Squared-commutator scrambling correlator `C(t)` for σᶻ probes at
// `w_site` and `v_site` (1-based, distinct).
//
// # Safety
// `times` must point to `n_times` readable doubles and `out` to
// `n_times` writable doubles.
enum otoclab_status otoclab_scrambling(const struct otoclab_system *system,
                                       double beta,
                                       size_t w_site,
                                       size_t v_site,
                                       const double *times,
                                       size_t n_times,
                                       double *out);

// Thermal out-of-time-order function `F(t)` for σᶻ probes, split into
// real and imaginary buffers.
//
// # Safety
// `times` must point to `n_times` readable doubles; `out_re` and
// `out_im` to `n_times` writable doubles each.
enum otoclab_status otoclab_otoc(const struct otoclab_system *system,
                                 double beta,
                                 size_t w_site,
                                 size_t v_site,
                                 const double *times,
                                 size_t n_times,
                                 double *out_re,
                                 double *out_im);

// Regulated out-of-time-order function `F₂(t)` (thermal factors split
// symmetrically around the probes), split into real and imaginary
// buffers.
//
// # Safety
// `times` must point to `n_times` readable doubles; `out_re` and
// `out_im` to `n_times` writable doubles each.
enum otoclab_status otoclab_regulated_otoc(const struct otoclab_system *system,
                                           double beta,
                                           size_t w_site,
                                           size_t v_site,
                                           const double *times,
                                           size_t n_times,
                                           double *out_re,
                                           double *out_im);

// Regulated squared commutator: raw `C₂(t)` and its purity-normalized
// companion in two real buffers.
//
// # Safety
// `times` must point to `n_times` readable doubles; `out_raw` and
// `out_normalized` to `n_times` writable doubles each.
enum otoclab_status otoclab_regulated_scrambling(const struct otoclab_system *system,
                                                 double beta,
                                                 size_t w_site,
                                                 size_t v_site,
                                                 const double *times,
                                                 size_t n_times,
                                                 double *out_raw,
                                                 double *out_normalized);

// Exact two-copy interferometric readout at one time: writes
// `(Re F₂, Im F₂)` as measured on the ancilla. Register is
// `2n + 1` qubits, so `n ≤ 5`.
//
// # Safety
// `out_re` and `out_im` must each point to one writable double.
enum otoclab_status otoclab_protocol_readout(const struct otoclab_system *system,
                                             double beta,
                                             size_t w_site,
                                             size_t v_site,
                                             double t,
                                             double *out_re,
                                             double *out_im);

// Shot-sampled interferometric readout: both ancilla observables
// estimated from `shots` two-outcome measurements each, deterministic in
// `seed`.
//
// # Safety
// `out_re` and `out_im` must each point to one writable
// `otoclab_shot_readout`.
enum otoclab_status otoclab_protocol_readout_sampled(const struct otoclab_system *system,
                                                     double beta,
                                                     size_t w_site,
                                                     size_t v_site,
                                                     double t,
                                                     uint64_t shots,
                                                     uint64_t seed,
                                                     struct otoclab_shot_readout *out_re,
                                                     struct otoclab_shot_readout *out_im);

#endif  /* OTOCLAB_H */
