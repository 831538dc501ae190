#ifndef NOHARM_H
#define NOHARM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum NhStatus {
  NH_STATUS_OK = 0,
  NH_STATUS_NULL_ARGUMENT = 1,
  NH_STATUS_INVALID_UTF8 = 2,
  NH_STATUS_INVALID_INPUT = 3,
  NH_STATUS_FORMAT = 4,
  NH_STATUS_NOT_STRICT = 5,
  NH_STATUS_POLICY = 6,
  NH_STATUS_RESOURCE = 7,
  NH_STATUS_INTERNAL = 8,
  NH_STATUS_PANIC = 9,
} NhStatus;

/**
 * A normal-form game.
 */
typedef struct NhGame NhGame;

/**
 * The result of one solve.
 */
typedef struct NhReport NhReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *nh_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *nh_last_error(void);

/**
 * Parses a game from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NhStatus nh_game_from_json(const char *json, struct NhGame **out);

/**
 * # Safety
 * `game` must come from [`nh_game_from_json`] and not be freed yet, or be null.
 */
void nh_game_free(struct NhGame *game);

/**
 * Number of players, or 0 for a null handle.
 *
 * # Safety
 * `game` must be a live handle or null.
 */
size_t nh_game_num_players(const struct NhGame *game);

/**
 * Number of action profiles, or 0 for a null handle.
 *
 * # Safety
 * `game` must be a live handle or null.
 */
size_t nh_game_num_profiles(const struct NhGame *game);

/**
 * Pareto-optimal profiles as a JSON array of keys, e.g. `["C,C","C,D"]`.
 * Free the result with [`nh_string_free`].
 *
 * # Safety
 * `game` must be a live handle and `out` a writable pointer.
 */
enum NhStatus nh_pareto_json(const struct NhGame *game, char **out);

/**
 * Solves from the configuration given as JSON, for example
 * `{"ref": "D,D", "k": 1, "order": ["Row", "Column"]}`.
 *
 * # Safety
 * `game` must be a live handle, `config_json` a NUL-terminated string and
 * `out` a writable pointer.
 */
enum NhStatus nh_solve(const struct NhGame *game, const char *config_json, struct NhReport **out);

/**
 * Outcome profile key such as `C,C`; null for a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
const char *nh_report_outcome(const struct NhReport *report);

/**
 * Full report as JSON; null for a null handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
const char *nh_report_json(const struct NhReport *report);

/**
 * # Safety
 * `report` must come from [`nh_solve`] and not be freed yet, or be null.
 */
void nh_report_free(struct NhReport *report);

/**
 * # Safety
 * `s` must be a string returned as owned by this library, or null.
 */
void nh_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOHARM_H */
