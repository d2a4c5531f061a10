#ifndef LTVKIT_H
#define LTVKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LTV_OK 0

#define LTV_ERR_NULL 1

#define LTV_ERR_UTF8 2

#define LTV_ERR_PARSE 3

#define LTV_ERR_DIMENSION 4

#define LTV_ERR_DOMAIN 5

#define LTV_ERR_NUMERIC 6

#define LTV_ERR_INVALID 7

#define LTV_ERR_BUFFER 8

#define LTV_ERR_PANIC 9

#define LTV_CERTIFIED 0

#define LTV_FALSIFIED 1

#define LTV_INCONCLUSIVE 2

#define LTV_PASS 0

#define LTV_FAIL 1

#define LTV_HYPOTHESIS_VIOLATED 2

#define LTV_GRAMIAN_W 0

#define LTV_GRAMIAN_K 1

#define LTV_GRAMIAN_M 2

#define LTV_GRAMIAN_N 3

// Opaque system handle.
typedef struct LtvSystem LtvSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string.
const char *ltv_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL, or
// 0 when there is no error.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t ltv_last_error(char *buf, size_t len);

// Parses a system definition document.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid for writes.
int32_t ltv_system_from_json(const char *json, struct LtvSystem **out);

// Opens a built-in catalog system by id (`"S0"` … `"S9"`).
//
// # Safety
// `id` must be a NUL-terminated string; `out` must be valid for writes.
int32_t ltv_catalog_system(const char *id, struct LtvSystem **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `sys` must come from this library and not be used afterwards.
void ltv_system_free(struct LtvSystem *sys);

// State, input and output dimensions. Any output pointer may be null.
//
// # Safety
// `sys` must be a live handle; non-null outputs must be valid for writes.
int32_t ltv_system_dims(const struct LtvSystem *sys, size_t *n, size_t *p, size_t *m);

// `Φ(t, s)` into `out` (n×n row-major, `len ≥ n²`).
//
// # Safety
// `sys` must be a live handle; `out` must be valid for `len` doubles.
int32_t ltv_transition(const struct LtvSystem *sys, double t, double s, double *out, size_t len);

// Gramian `kind` (an `LTV_GRAMIAN_*` value) on `[a, b]` into `out` (n×n row-major).
//
// # Safety
// `sys` must be a live handle; `out` must be valid for `len` doubles.
int32_t ltv_gramian(const struct LtvSystem *sys,
                    int32_t kind,
                    double a,
                    double b,
                    double *out,
                    size_t len);

// Classifies `property` (`"CO"`, `"UCO"`, `"NUCO"`, `"CC"`, `"UCC"`,
// `"NUCC"`) on the system's default window. `status` receives an
// `LTV_CERTIFIED`/`LTV_FALSIFIED`/`LTV_INCONCLUSIVE` value; if `json_out` is
// non-null it receives the full verdict, to be freed with `ltv_string_free`.
//
// # Safety
// `sys` must be a live handle; `property` NUL-terminated; `status` valid for writes.
int32_t ltv_classify(const struct LtvSystem *sys,
                     const char *property,
                     int32_t *status,
                     char **json_out);

// Checks theorem `id` (for example `"GRAMIAN-DUALITY"`) with the system's
// gains and grids. `status` receives `LTV_PASS`, `LTV_FAIL` or
// `LTV_HYPOTHESIS_VIOLATED`; `json_out` as in `ltv_classify`.
//
// # Safety
// `sys` must be a live handle; `id` NUL-terminated; `status` valid for writes.
int32_t ltv_verify(const struct LtvSystem *sys, const char *id, int32_t *status, char **json_out);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void ltv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LTVKIT_H */
