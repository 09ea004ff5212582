#ifndef XIMP_H
#define XIMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XimpStatus {
  XIMP_STATUS_OK = 0,
  XIMP_STATUS_NULL_POINTER = 1,
  XIMP_STATUS_INVALID_UTF8 = 2,
  XIMP_STATUS_PARSE_ERROR = 3,
  XIMP_STATUS_INVALID_CHECKPOINT = 4,
  XIMP_STATUS_MODEL_ERROR = 5,
  XIMP_STATUS_INVALID_ARGUMENT = 6,
  XIMP_STATUS_PANIC = 7,
} XimpStatus;

/**
 * Graph view compared by [`ximp_wl_distinguishable`].
 */
typedef enum XimpView {
  XIMP_VIEW_MOLECULE = 0,
  XIMP_VIEW_JUNCTION_TREE = 1,
  XIMP_VIEW_ERG = 2,
  XIMP_VIEW_COMPOUND = 3,
} XimpView;

/**
 * A parsed molecule.
 */
typedef struct XimpMolecule XimpMolecule;

/**
 * A trained model restored from a checkpoint.
 */
typedef struct XimpPredictor XimpPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ximp_version(void);

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *ximp_last_error(void);

/**
 * Parses a SMILES string into a new molecule handle.
 *
 * # Safety
 * `smiles` must be a valid NUL-terminated string and `out` writable.
 */
enum XimpStatus ximp_molecule_parse(const char *smiles, struct XimpMolecule **out);

/**
 * # Safety
 * `mol` must come from [`ximp_molecule_parse`] and not be used afterwards.
 */
void ximp_molecule_free(struct XimpMolecule *mol);

/**
 * Writes the atom, bond and SSSR ring counts. Any output may be null.
 *
 * # Safety
 * `mol` must be a live handle; non-null outputs must be writable.
 */
enum XimpStatus ximp_molecule_counts(const struct XimpMolecule *mol,
                                     size_t *atoms,
                                     size_t *bonds,
                                     size_t *rings);

/**
 * Whether unlabeled 1-WL tells the two molecules apart in `view`, one of
 * the [`XimpView`] values.
 *
 * # Safety
 * `a` and `b` must be live handles and `out` writable.
 */
enum XimpStatus ximp_wl_distinguishable(const struct XimpMolecule *a,
                                        const struct XimpMolecule *b,
                                        int32_t view,
                                        bool *out);

/**
 * Restores a predictor from checkpoint JSON.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` writable.
 */
enum XimpStatus ximp_predictor_load(const char *json, struct XimpPredictor **out);

/**
 * # Safety
 * `predictor` must come from [`ximp_predictor_load`] and not be used afterwards.
 */
void ximp_predictor_free(struct XimpPredictor *predictor);

/**
 * Predicted property value in the original target units.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
enum XimpStatus ximp_predictor_predict(const struct XimpPredictor *predictor,
                                       const struct XimpMolecule *mol,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XIMP_H */
