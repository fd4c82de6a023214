/*
 * Copyright 2026 The TurnPilot Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TURNPILOT_TURNPILOT_H_
#define TURNPILOT_TURNPILOT_H_

#include <stddef.h>

#if defined(_WIN32)
#define TP_API __declspec(dllexport)
#else
#define TP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every call returns one; the message of the last failure on
 * the calling thread is available from tp_last_error(). */
typedef enum tp_status {
  TP_OK = 0,
  TP_E_INVALID_ARGUMENT = 1,
  TP_E_IO = 2,
  TP_E_MALFORMED_RECORD = 3,
  TP_E_ZERO_USABLE_EXAMPLES = 4,
  TP_E_EMPTY_QUESTION = 5,
  TP_E_TOO_SHORT = 6,
  TP_E_EMPTY_INPUT = 7,
  TP_E_TIMEOUT = 8,
  TP_E_AUTH_FAILURE = 9,
  TP_E_PROVIDER_REJECTION = 10,
  TP_E_CACHE_CORRUPT = 11,
  TP_E_DIMENSION_MISMATCH = 12,
  TP_E_ZERO_VECTOR = 13,
  TP_E_MISSING_PAIRING = 14,
  TP_E_FAILURE_CEILING = 15,
  TP_E_SINGLE_CLASS_DATA = 16,
  TP_E_NON_FINITE_LOSS = 17,
  TP_E_MISSING_TRUNCATION = 18,
  TP_E_MISSING_MODEL = 19,
  TP_E_CONFIG = 20,
  TP_E_MISSING_STAGE_OUTPUT = 21,
  TP_E_MISSING_CREDENTIALS = 22,
  TP_E_INTERNAL = 99
} tp_status;

typedef struct tp_chat tp_chat;
typedef struct tp_embedder tp_embedder;
typedef struct tp_model tp_model;
typedef struct tp_profile tp_profile;

/* Strings returned through `char** out` are owned by the caller. */
TP_API void tp_free(void* p);
TP_API const char* tp_last_error(void);
TP_API const char* tp_status_name(tp_status status);
TP_API const char* tp_version(void);

/* 0 debug, 1 info, 2 warn, 3 error. */
TP_API void tp_set_log_level(int level);

/* Option arguments are JSON objects (NULL or "" for defaults). Results are
 * JSON documents. Option keys are listed next to each call. */

/* ---- corpus ---- */
/* {limit, filter_before_limit} */
TP_API tp_status tp_ingest(const char* run_dir, const char* nq_path, const char* options, char** out);
/* {levels: [0,1,2,3]} */
TP_API tp_status tp_truncate(const char* run_dir, const char* options, char** out);

/* ---- providers ---- */
TP_API tp_status tp_chat_mock(const char* recording_path, int echo_unknown, tp_chat** out);
/* {endpoint, model, key_env, timeout_ms}; fails with TP_E_MISSING_CREDENTIALS
 * naming key_env when it is unset. */
TP_API tp_status tp_chat_remote(const char* options, tp_chat** out);
TP_API size_t tp_chat_invocations(const tp_chat* chat);
TP_API void tp_chat_destroy(tp_chat* chat);

TP_API tp_status tp_embedder_deterministic(tp_embedder** out);
/* {endpoint, model, key_env, timeout_ms} */
TP_API tp_status tp_embedder_remote(const char* options, tp_embedder** out);
TP_API void tp_embedder_destroy(tp_embedder* embedder);

/* ---- experiment ---- */
/* {model, temperature, max_tokens, parallelism, failure_ceiling, cache_dir,
 *  rate_limit, burst, attempts, retry_base_ms, seed} */
TP_API tp_status tp_generate(const char* run_dir, tp_chat* chat, const char* options, char** out);
/* {gold_percentile, inclusive, score_all, cache_dir, rate_limit, burst,
 *  parallelism, attempts, retry_base_ms} */
TP_API tp_status tp_score(const char* run_dir, tp_embedder* embedder, const char* options, char** out);
/* {gold_percentile, inclusive, score_all, theta, bins}; out = stats.json */
TP_API tp_status tp_analyze(const char* run_dir, const char* options, char** out);
/* 32 hex digits over every stage output except the manifest. */
TP_API tp_status tp_run_digest(const char* run_dir, char** out);
/* format: "csv", "json" or "svg"; out = list of written paths */
TP_API tp_status tp_report(const char* run_dir, const char* format, int bins, char** out);

/* ---- completeness ---- */
/* {learning_rate, l2, epochs, batch_size, seed, split, include_full, model,
 *  instances} */
TP_API tp_status tp_train(const char* run_dir, const char* options, char** out);
TP_API tp_status tp_model_load(const char* path, tp_model** out);
TP_API void tp_model_destroy(tp_model* model);
TP_API tp_status tp_model_predict(const tp_model* model, const char* prefix, double* score);
/* words: JSON array of strings; out = {scores: [...], fired_at: n | null} */
TP_API tp_status tp_model_classify_incremental(const tp_model* model, const char* words, double cutoff,
                                               char** out);

/* ---- turnsim ---- */
TP_API tp_status tp_profile_builtin(const char* name, tp_profile** out);
TP_API tp_status tp_profile_load(const char* path, tp_profile** out);
TP_API tp_status tp_profile_parse(const char* text, const char* origin, tp_profile** out);
/* {enabled, sigma, seed} */
TP_API tp_status tp_profile_set_jitter(tp_profile* profile, const char* options);
TP_API tp_status tp_profile_format(const tp_profile* profile, char** out);
TP_API void tp_profile_destroy(tp_profile* profile);
/* Newline-separated built-in profile names. */
TP_API tp_status tp_profile_names(char** out);

/* {policy: "serial"|"eager"|"filler", k, cutoff, filler_latency_ms, seed,
 *  templates, n_turns, tokens_from_responses, include_turns}.
 * model may be NULL except for the filler policy.
 * out = {report: {...}, csv: "..."} */
TP_API tp_status tp_simulate(const char* run_dir, const tp_profile* profile, const tp_model* model,
                             const char* options, char** out);

#ifdef __cplusplus
}
#endif

#endif /* TURNPILOT_TURNPILOT_H_ */
