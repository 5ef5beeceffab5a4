#ifndef ATTREC_H
#define ATTREC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AttrecStatus {
  ATTREC_STATUS_OK = 0,
  ATTREC_STATUS_NULL_POINTER = 1,
  ATTREC_STATUS_INVALID_UTF8 = 2,
  ATTREC_STATUS_IO = 3,
  ATTREC_STATUS_PARSE = 4,
  ATTREC_STATUS_INVALID_ARGUMENT = 5,
  ATTREC_STATUS_OUT_OF_RANGE = 6,
  ATTREC_STATUS_BUFFER_TOO_SMALL = 7,
  ATTREC_STATUS_MISMATCH = 8,
  ATTREC_STATUS_PANIC = 9,
} AttrecStatus;

typedef enum AttrecOutcome {
  ATTREC_OUTCOME_NEGATIVE = 0,
  ATTREC_OUTCOME_POSITIVE = 1,
  ATTREC_OUTCOME_UNCERTAIN = 2,
} AttrecOutcome;

/**
 * Object catalog.
 */
typedef struct AttrecCatalog AttrecCatalog;

/**
 * Catalog plus calibrated classifiers.
 */
typedef struct AttrecEngine AttrecEngine;

/**
 * Posterior over the objects of one engine.
 */
typedef struct AttrecPosterior AttrecPosterior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *attrec_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *attrec_version(void);

/**
 * Loads a catalog file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_catalog` writable.
 */
enum AttrecStatus attrec_catalog_load(const char *path, struct AttrecCatalog **out_catalog);

/**
 * Bundled catalog by name (`table1`, `fine5`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out_catalog` writable.
 */
enum AttrecStatus attrec_catalog_builtin(const char *name, struct AttrecCatalog **out_catalog);

/**
 * # Safety
 * `catalog` must come from this library and not be used afterwards.
 */
void attrec_catalog_free(struct AttrecCatalog *catalog);

/**
 * # Safety
 * `catalog` must be a live handle and `out_count` writable.
 */
enum AttrecStatus attrec_catalog_num_objects(const struct AttrecCatalog *catalog,
                                             size_t *out_count);

/**
 * # Safety
 * `catalog` must be a live handle and `out_count` writable.
 */
enum AttrecStatus attrec_catalog_num_attributes(const struct AttrecCatalog *catalog,
                                                size_t *out_count);

/**
 * Minimum PPV and NPV that guarantee recognition through `attribute`.
 *
 * # Safety
 * `catalog` must be a live handle; output pointers writable.
 */
enum AttrecStatus attrec_guarantee_bounds(const struct AttrecCatalog *catalog,
                                          size_t attribute,
                                          double *out_ppv_bound,
                                          double *out_npv_bound);

/**
 * Builds an engine from a catalog and a calibrated model file. The
 * catalog is copied; the caller keeps ownership of it.
 *
 * # Safety
 * `catalog` must be a live handle, `model_path` NUL-terminated, `out_engine`
 * writable.
 */
enum AttrecStatus attrec_engine_new(const struct AttrecCatalog *catalog,
                                    const char *model_path,
                                    struct AttrecEngine **out_engine);

/**
 * # Safety
 * `engine` must come from this library and not be used afterwards.
 */
void attrec_engine_free(struct AttrecEngine *engine);

/**
 * Fresh posterior equal to the catalog priors.
 *
 * # Safety
 * `engine` must be a live handle and `out_posterior` writable.
 */
enum AttrecStatus attrec_posterior_new(const struct AttrecEngine *engine,
                                       struct AttrecPosterior **out_posterior);

/**
 * # Safety
 * `posterior` must come from this library and not be used afterwards.
 */
void attrec_posterior_free(struct AttrecPosterior *posterior);

/**
 * Classifies a raw score and folds it into the posterior. `out_outcome`
 * may be null.
 *
 * # Safety
 * Handles must be live; `out_outcome` null or writable.
 */
enum AttrecStatus attrec_observe_score(const struct AttrecEngine *engine,
                                       struct AttrecPosterior *posterior,
                                       size_t attribute,
                                       size_t bin,
                                       double score,
                                       enum AttrecOutcome *out_outcome);

/**
 * Folds in an already classified outcome. `out_adopted` may be null.
 *
 * # Safety
 * Handles must be live; `out_adopted` null or writable.
 */
enum AttrecStatus attrec_observe(const struct AttrecEngine *engine,
                                 struct AttrecPosterior *posterior,
                                 size_t attribute,
                                 size_t bin,
                                 enum AttrecOutcome outcome,
                                 bool in_reliable_region,
                                 bool *out_adopted);

/**
 * Writes the normalized posterior into `buf`, which must hold at least
 * one value per object.
 *
 * # Safety
 * `posterior` must be live and `buf` valid for `len` writes.
 */
enum AttrecStatus attrec_posterior_normalized(const struct AttrecPosterior *posterior,
                                              double *buf,
                                              size_t len);

/**
 * MAP decision. `out_winner` receives the unique winner or, when weights
 * and priors tie, a uniform pick among the tied objects drawn from
 * `seed`. `out_tied_count` receives the number of tied objects (1 when
 * unique).
 *
 * # Safety
 * Handles must be live and output pointers writable.
 */
enum AttrecStatus attrec_decide(const struct AttrecEngine *engine,
                                const struct AttrecPosterior *posterior,
                                uint64_t seed,
                                size_t *out_winner,
                                size_t *out_tied_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATTREC_H */
