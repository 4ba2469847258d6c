/*
 * Copyright 2026 SLLEN Contributors
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

/* C interface to the enhancement library. All functions are synchronous and
 * report failure through the returned status plus sllen_last_error(), which
 * holds a thread-local message for the most recent failing call. Strings
 * returned through char** are malloc'd; release them with sllen_free().
 */

#ifndef SLLEN_H_
#define SLLEN_H_

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sllen_status {
  SLLEN_OK = 0,
  SLLEN_ERR_CONFIG = 1,        /* bad key, value, or command arguments */
  SLLEN_ERR_EMPTY_DATASET = 2, /* no usable input images */
  SLLEN_ERR_NUMERIC = 3,       /* non-finite loss during training */
  SLLEN_ERR_IO = 4,            /* missing/corrupt files, write failures */
  SLLEN_ERR_SHAPE = 5,         /* incompatible tensor or image shapes */
  SLLEN_ERR_INTERNAL = 6       /* invariant violation; please report */
} sllen_status;

/* Message for the most recent failure on this thread ("" if none). The
 * pointer stays valid until the next failing call on the same thread. */
const char* sllen_last_error(void);

const char* sllen_version(void);

void sllen_free(char* text);

/* ---- configuration ----------------------------------------------------- */

/* JSON document with strict key checking; see README for the schema. */
typedef struct sllen_config sllen_config;

sllen_config* sllen_config_new(void); /* built-in defaults */
void sllen_config_free(sllen_config* cfg);

/* Replaces the document with the parsed contents of a JSON file. */
sllen_status sllen_config_load_file(sllen_config* cfg, const char* path);

/* Sets one value by dotted path, e.g. ("train.steps", "500") or
 * ("evaluate.mode", "paired"). Values parse as JSON when possible and fall
 * back to plain strings. Unknown keys fail with SLLEN_ERR_CONFIG. */
sllen_status sllen_config_set(sllen_config* cfg, const char* key, const char* value);

/* Current document as pretty-printed JSON (caller frees). */
sllen_status sllen_config_dump(const sllen_config* cfg, char** out_text);

/* ---- commands ------------------------------------------------------------
 * Each command reads its inputs from the config and writes artifacts under
 * the configured `out` directory. `out_summary` (optional: pass NULL) gets
 * a short human-readable result; evaluate/ablate/decompose return CSV. */

sllen_status sllen_train(const sllen_config* cfg, char** out_summary);
sllen_status sllen_enhance(const sllen_config* cfg, char** out_summary);
sllen_status sllen_evaluate(const sllen_config* cfg, char** out_summary);
sllen_status sllen_ablate(const sllen_config* cfg, char** out_summary);
sllen_status sllen_gradstat(const sllen_config* cfg, char** out_summary);
sllen_status sllen_decompose(const sllen_config* cfg, char** out_summary);

/* ---- repeated enhancement ----------------------------------------------- */

/* Loaded network kept resident for enhancing many files one at a time.
 * Reads enhance.checkpoint (plus ssn.* for the frozen semantic branch). */
typedef struct sllen_enhancer sllen_enhancer;

sllen_enhancer* sllen_enhancer_open(const sllen_config* cfg); /* NULL on error */
sllen_status sllen_enhancer_run_file(sllen_enhancer* e, const char* in_path,
                                     const char* out_path);
void sllen_enhancer_close(sllen_enhancer* e);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SLLEN_H_ */
