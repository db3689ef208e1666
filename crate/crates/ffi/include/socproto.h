#ifndef SOCPROTO_H
#define SOCPROTO_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SocprotoStatus {
  SOCPROTO_STATUS_OK = 0,
  SOCPROTO_STATUS_NULL_POINTER = 1,
  SOCPROTO_STATUS_INVALID_UTF8 = 2,
  SOCPROTO_STATUS_INVALID_JSON = 3,
  /**
   * The engine refused the request; see `socproto_last_error_code`.
   */
  SOCPROTO_STATUS_REJECTED = 4,
  SOCPROTO_STATUS_PANIC = 5,
} SocprotoStatus;

/**
 * A community of groups, processes, and protocol versions, backed by an
 * event log.
 */
typedef struct SocprotoCommunity SocprotoCommunity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library, not yet freed.
 */
void socproto_string_free(char *s);

/**
 * Error code of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *socproto_last_error_code(void);

/**
 * Message of the last failed call on this thread, or null. Same lifetime
 * as [`socproto_last_error_code`].
 */
const char *socproto_last_error_message(void);

/**
 * Validates a protocol document and writes the report as JSON.
 *
 * # Safety
 * `protocol_json` must be a NUL-terminated string; `out_report` must be a
 * valid pointer.
 */
enum SocprotoStatus socproto_validate(const char *protocol_json, char **out_report);

/**
 * Creates an empty in-memory community.
 */
struct SocprotoCommunity *socproto_community_new(void);

/**
 * Opens (or creates) a community backed by the event log at `log_path`,
 * replaying any events already in it.
 *
 * # Safety
 * `log_path` must be a NUL-terminated string; `out` must be a valid
 * pointer.
 */
enum SocprotoStatus socproto_community_open(const char *log_path, struct SocprotoCommunity **out);

/**
 * Releases a community. Null is ignored.
 *
 * # Safety
 * `handle` must be null or a live handle from this library.
 */
void socproto_community_free(struct SocprotoCommunity *handle);

/**
 * Sets the acceptance rule (`unanimity` or `quorum:<fraction>`) used when
 * a close request names none.
 *
 * # Safety
 * `handle` must be a live handle; `rule` a NUL-terminated string.
 */
enum SocprotoStatus socproto_set_acceptance_rule(struct SocprotoCommunity *handle,
                                                 const char *rule);

/**
 * Registers an environment given as JSON.
 *
 * # Safety
 * `handle` must be a live handle; `environment_json` a NUL-terminated
 * string.
 */
enum SocprotoStatus socproto_register_environment(struct SocprotoCommunity *handle,
                                                  const char *environment_json);

/**
 * Registers a group given as JSON.
 *
 * # Safety
 * `handle` must be a live handle; `group_json` a NUL-terminated string.
 */
enum SocprotoStatus socproto_register_group(struct SocprotoCommunity *handle,
                                            const char *group_json);

/**
 * Registers a protocol. `private_group` null means catalog scope. Writes
 * the version id.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated or null where
 * allowed; `out_version` a valid pointer.
 */
enum SocprotoStatus socproto_register_protocol(struct SocprotoCommunity *handle,
                                               const char *protocol_json,
                                               const char *private_group,
                                               char **out_version);

/**
 * Starts a process. `process_id` null picks the next free id. Writes the
 * process view as JSON.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated or null where
 * allowed; `out_process` a valid pointer.
 */
enum SocprotoStatus socproto_instantiate(struct SocprotoCommunity *handle,
                                         const char *process_id,
                                         const char *version,
                                         const char *group,
                                         char **out_process);

/**
 * Transitions `collaborator` may trigger now, as a JSON array.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated; `out_json` a
 * valid pointer.
 */
enum SocprotoStatus socproto_available_transitions(struct SocprotoCommunity *handle,
                                                   const char *process_id,
                                                   const char *collaborator,
                                                   char **out_json);

/**
 * Triggers a transition and writes the recorded transition event.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated; `out_event` a
 * valid pointer.
 */
enum SocprotoStatus socproto_trigger(struct SocprotoCommunity *handle,
                                     const char *process_id,
                                     const char *actor,
                                     const char *transition,
                                     char **out_event);

/**
 * Opens a negotiation with an initial patch; writes the session id.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated or null where
 * allowed; `out_session` a valid pointer.
 */
enum SocprotoStatus socproto_open_negotiation(struct SocprotoCommunity *handle,
                                              const char *process_id,
                                              const char *initiator,
                                              const char *patch_json,
                                              const char *rationale,
                                              char **out_session);

/**
 * Counter-proposes, superseding `supersedes`; writes the new proposal id.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated or null where
 * allowed; `out_proposal` a valid pointer.
 */
enum SocprotoStatus socproto_propose(struct SocprotoCommunity *handle,
                                     const char *session,
                                     const char *proposer,
                                     const char *patch_json,
                                     const char *rationale,
                                     const char *supersedes,
                                     char **out_proposal);

/**
 * Casts a vote; `accept` nonzero means accept. Writes the tally as JSON.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated; `out_tally` a
 * valid pointer.
 */
enum SocprotoStatus socproto_vote(struct SocprotoCommunity *handle,
                                  const char *session,
                                  const char *voter,
                                  const char *proposal,
                                  int32_t accept,
                                  char **out_tally);

/**
 * Closes a negotiation under the configured rule; writes the outcome.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated; `out_outcome` a
 * valid pointer.
 */
enum SocprotoStatus socproto_close_negotiation(struct SocprotoCommunity *handle,
                                               const char *session,
                                               const char *closer,
                                               char **out_outcome);

/**
 * Propagates an adapted version (`local`, `global`, or `instant`);
 * writes the report.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated; `out_report` a
 * valid pointer.
 */
enum SocprotoStatus socproto_propagate(struct SocprotoCommunity *handle,
                                       const char *actor,
                                       const char *version,
                                       const char *strategy,
                                       char **out_report);

/**
 * Catalog for a group, as a JSON array.
 *
 * # Safety
 * `handle` must be a live handle; `group` NUL-terminated; `out_json` a
 * valid pointer.
 */
enum SocprotoStatus socproto_catalog(struct SocprotoCommunity *handle,
                                     const char *group,
                                     char **out_json);

/**
 * Lineage edges as `parent -> child [ref]` lines; `version` null exports
 * the whole repository.
 *
 * # Safety
 * `handle` must be a live handle; `version` NUL-terminated or null;
 * `out_text` a valid pointer.
 */
enum SocprotoStatus socproto_export_lineage(struct SocprotoCommunity *handle,
                                            const char *version,
                                            char **out_text);

/**
 * Negotiation history along a version's lineage as seen by `group`.
 *
 * # Safety
 * `handle` must be a live handle; strings NUL-terminated; `out_json` a
 * valid pointer.
 */
enum SocprotoStatus socproto_history(struct SocprotoCommunity *handle,
                                     const char *version,
                                     const char *group,
                                     char **out_json);

/**
 * Canonical JSON of the whole community state.
 *
 * # Safety
 * `handle` must be a live handle; `out_json` a valid pointer.
 */
enum SocprotoStatus socproto_state_json(struct SocprotoCommunity *handle, char **out_json);

/**
 * Replays JSON-lines log text and writes the canonical state.
 *
 * # Safety
 * `log_text` must be NUL-terminated; `out_json` a valid pointer.
 */
enum SocprotoStatus socproto_replay(const char *log_text, char **out_json);

/**
 * Runs a scenario script. Writes the report as JSON; a script whose
 * assertions fail still returns `SOCPROTO_STATUS_OK` with `failure` set.
 *
 * # Safety
 * `script` must be NUL-terminated; `out_report` a valid pointer.
 */
enum SocprotoStatus socproto_run_scenario(const char *script, char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOCPROTO_H */
