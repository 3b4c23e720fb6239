#ifndef DIHEDRAL_CLOSURE_H
#define DIHEDRAL_CLOSURE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes.
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_UTF8 = 2,
  DC_STATUS_PARSE_ERROR = 3,
  DC_STATUS_INVALID_SPEC = 4,
  DC_STATUS_ANALYSIS_ERROR = 5,
  DC_STATUS_NOT_AVAILABLE = 6,
  DC_STATUS_INVALID_ARGUMENT = 7,
  DC_STATUS_PANIC = 8,
} DcStatus;

typedef enum DcVerdictKind {
  DC_VERDICT_KIND_RETRACT = 0,
  DC_VERDICT_KIND_NOT_VERBALLY_CLOSED = 1,
} DcVerdictKind;

// The result of analyzing a spec.
typedef struct DcAnalysis DcAnalysis;

// A parsed group spec.
typedef struct DcSpec DcSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses spec text (the TOML spec format) into a new handle.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum DcStatus dc_spec_parse(const char *text, struct DcSpec **out);

// # Safety
// `spec` must come from [`dc_spec_parse`] and not be used afterwards.
void dc_spec_free(struct DcSpec *spec);

// Analyzes a spec. `filler` is the exponent for vanishing components
// (not ±1); `squares` is the number of squares per character, 0 for the
// default.
//
// # Safety
// `spec` must be a live handle and `out` a valid pointer.
enum DcStatus dc_analyze(const struct DcSpec *spec,
                         int64_t filler,
                         uint32_t squares,
                         struct DcAnalysis **out);

// # Safety
// `analysis` must be a live handle and `out` a valid pointer.
enum DcStatus dc_analysis_verdict(const struct DcAnalysis *analysis, enum DcVerdictKind *out);

// The structured (JSON) report. With `verify` set the retraction or
// the solution and certificate are checked over `samples` random samples
// drawn from `seed`.
//
// # Safety
// `analysis` must be a live handle and `out` a valid pointer.
enum DcStatus dc_analysis_report(const struct DcAnalysis *analysis,
                                 bool verify,
                                 uint64_t seed,
                                 uint32_t samples,
                                 char **out);

// The witness equation in its S-expression form; `NotAvailable` for a
// retract.
//
// # Safety
// `analysis` must be a live handle and `out` a valid pointer.
enum DcStatus dc_analysis_equation(const struct DcAnalysis *analysis, char **out);

// Applies the retraction to an element given as a word in the factor
// generators; writes the image as a word. `NotAvailable` when the
// subgroup is not a retract.
//
// # Safety
// `analysis` must be a live handle, `word` a NUL-terminated string and
// `out` a valid pointer.
enum DcStatus dc_analysis_retract(const struct DcAnalysis *analysis, const char *word, char **out);

// # Safety
// `analysis` must come from [`dc_analyze`] and not be used afterwards.
void dc_analysis_free(struct DcAnalysis *analysis);

// # Safety
// `s` must be a string returned by this library, not yet freed.
void dc_string_free(char *s);

// Message for the last failure on this thread, empty after a success.
// Valid until the next call on the same thread.
const char *dc_last_error_message(void);

// Library version, a static string.
const char *dc_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DIHEDRAL_CLOSURE_H */
