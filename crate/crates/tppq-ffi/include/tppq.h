/* C interface to the tppq transmon/PPQ pulse-level simulator. */

#ifndef TPPQ_H
#define TPPQ_H

/* This file is generated by cbindgen from crates/tppq-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every API call.
typedef enum TppqStatus {
  TPPQ_STATUS_OK = 0,
  TPPQ_STATUS_NULL_POINTER = 1,
  TPPQ_STATUS_CONFIG_ERROR = 2,
  TPPQ_STATUS_NUMERICAL_ERROR = 3,
  TPPQ_STATUS_INVALID_ARGUMENT = 4,
  // An internal panic was caught at the FFI boundary.
  TPPQ_STATUS_PANIC = 5,
} TppqStatus;

// Subsystem selector for spectrum queries.
typedef enum TppqSubsystem {
  TPPQ_SUBSYSTEM_TRANSMON = 0,
  TPPQ_SUBSYSTEM_PPQ = 1,
} TppqSubsystem;

// Gate selector.
typedef enum TppqGate {
  TPPQ_GATE_CNOT_TP = 0,
  TPPQ_GATE_RX_T = 1,
  TPPQ_GATE_RX_P = 2,
} TppqGate;

// Opaque simulator handle: parsed config plus the assembled 64-dim model.
typedef struct TppqSystem TppqSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of the calling thread into `buf`
// (NUL-terminated, truncated to `len`). Returns the full message length.
//
// # Safety
// `buf` must point to at least `len` writable bytes, or be NULL (then only
// the length is returned).
uintptr_t tppq_last_error_message(char *buf, uintptr_t len);

// Library version string (static storage, do not free).
const char *tppq_version(void);

// Create a system from the built-in reference parameters. Returns NULL on
// failure. Free with [`tppq_system_free`].
struct TppqSystem *tppq_system_new(void);

// Create a system from a TOML run config. Returns NULL on failure (check
// [`tppq_last_error_message`]).
//
// # Safety
// `path` must be a valid NUL-terminated string.
struct TppqSystem *tppq_system_from_config(const char *path);

// Destroy a system handle. NULL is accepted and ignored.
//
// # Safety
// `sys` must be a pointer previously returned by a constructor of this
// library and not yet freed.
void tppq_system_free(struct TppqSystem *sys);

// Bare and dressed qubit transition frequencies, GHz.
//
// # Safety
// All out-pointers must be valid or NULL (NULL outputs are skipped).
enum TppqStatus tppq_spectrum(const struct TppqSystem *sys,
                              double *f01_t_bare_ghz,
                              double *f12_p_bare_ghz,
                              double *f01_t_dressed_ghz,
                              double *f12_p_dressed_ghz);

// Idle eigenenergies (GHz, ground-referenced) and parity labels of one
// qubit's retained levels. Parity codes: 0 even, 1 odd, 2 mixed.
//
// # Safety
// `energies_ghz` and `parities` must each point to at least `len` elements
// (or be NULL to skip). Returns the number of retained levels.
uintptr_t tppq_qubit_levels(const struct TppqSystem *sys,
                            enum TppqSubsystem subsystem,
                            double *energies_ghz,
                            int32_t *parities,
                            uintptr_t len);

// Average gate fidelity of a configured schedule against its ideal target.
// `tau_ns` and `samples` of 0 fall back to the config's run options.
//
// # Safety
// `fidelity_out` must be a valid pointer.
enum TppqStatus tppq_gate_fidelity(const struct TppqSystem *sys,
                                   enum TppqGate gate,
                                   double tau_ns,
                                   uintptr_t samples,
                                   uint64_t seed,
                                   double *fidelity_out);

// Frame-adjusted 4×4 computational block of a configured gate, row-major.
//
// # Safety
// `re_out` and `im_out` must each point to at least 16 doubles.
enum TppqStatus tppq_gate_comp_block(const struct TppqSystem *sys,
                                     enum TppqGate gate,
                                     double tau_ns,
                                     double *re_out,
                                     double *im_out);

// Suzuki-Trotter vs exact-diagonalization state error for a free evolution
// of `duration_ns` from |++⟩ at step `tau_ns`.
//
// # Safety
// `error_out` must be a valid pointer.
enum TppqStatus tppq_trotter_state_error(const struct TppqSystem *sys,
                                         double tau_ns,
                                         double duration_ns,
                                         double *error_out);

// Flux bias (radians) that calibrates the transmon f01 to `target_f01_ghz`.
//
// # Safety
// `phi_e_out` must be a valid pointer.
enum TppqStatus tppq_calibrate_flux(const struct TppqSystem *sys,
                                    double target_f01_ghz,
                                    double *phi_e_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TPPQ_H */
