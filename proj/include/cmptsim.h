/* Copyright 2026 The cmptsim Authors
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

/* C interface of the compartmentalization simulator. All functionality is
 * reachable through an opaque session handle; commands return a status that
 * doubles as the process exit code, and leave their rendered output and any
 * diagnostic on the session. */

#ifndef CMPTSIM_H_
#define CMPTSIM_H_

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum csim_status {
  CSIM_OK = 0,        /* success / every verdict passed */
  CSIM_FAIL = 1,      /* policy violation or failed verdict */
  CSIM_BAD_INPUT = 2  /* missing or malformed input */
} csim_status;

typedef struct csim_session csim_session;

const char* csim_version(void);

csim_session* csim_session_new(void);
void csim_session_free(csim_session* session);

/* Rendered output of the last command (report, trace, diagnostics). Owned
 * by the session; valid until the next command or csim_session_free. */
const char* csim_output(const csim_session* session);

/* Diagnostic of the last command; empty string when it succeeded. */
const char* csim_error(const csim_session* session);

/* Parses and resolves a policy against a symbol map and reports page-layout
 * diagnostics. */
csim_status csim_check(csim_session* session, const char* policy_path,
                       const char* symbols_path);

typedef struct csim_run_options {
  int hlat_enabled;            /* default 1 */
  int emit_trace;              /* default 1 */
  uint64_t fuel;               /* 0: scenario default */
} csim_run_options;

void csim_run_options_init(csim_run_options* options);

/* Full simulation of a scenario file under the given policy. */
csim_status csim_run(csim_session* session, const char* policy_path,
                     const char* symbols_path, const char* scenario_path,
                     const csim_run_options* options);

typedef struct csim_igc_options {
  int refined;                 /* default 0 */
  int tx_cleanup_batch;        /* default 128 */
  int rx_budget;               /* default 64 */
  int interrupts_in_driver;    /* default 0 */
  int driver_compartments;     /* default 1 */
  const char* direction;       /* "tx" (default) or "rx" */
  int packets;                 /* default 128; must divide across polls */
  int payload_bytes;           /* default 1472 */
  int polls;                   /* default 1 */
  int sweep;                   /* default 0: run one workload; 1: payload and
                                  compartment sweep plus ordering verdicts */
  const char* cost_table_path; /* NULL: built-in defaults */
} csim_igc_options;

void csim_igc_options_init(csim_igc_options* options);

/* Driver data-path crossing and cycle model. */
csim_status csim_igc(csim_session* session, const csim_igc_options* options);

/* Named attack demonstration: remap-hlat-on, remap-hlat-off, vmfunc-insert,
 * invalid-call, int-stack-corrupt. CSIM_OK means the outcome matched the
 * scenario's expectation. */
csim_status csim_attack(csim_session* session, const char* name);

#ifdef __cplusplus
}
#endif

#endif /* CMPTSIM_H_ */
