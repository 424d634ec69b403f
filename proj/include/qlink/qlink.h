/* C interface to the qlink simulation and analysis library. */
#ifndef QLINK_QLINK_H
#define QLINK_QLINK_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define QLINK_API __declspec(dllexport)
#else
#define QLINK_API __attribute__((visibility("default")))
#endif

typedef enum qlink_status {
  QLINK_OK = 0,
  QLINK_ERR_VALIDATION = 2,
  QLINK_ERR_IO = 3,
  QLINK_ERR_ANALYSIS = 4
} qlink_status;

typedef struct qlink_config qlink_config;
typedef struct qlink_stream qlink_stream;

typedef struct qlink_tag {
  int64_t time_ps;
  int channel; /* 0 marker, 1 detector */
} qlink_tag;

typedef struct qlink_scenario {
  double gain_db;
  double eta_rx;   /* <= 0 keeps the report value */
  double mu_sat;   /* NaN keeps the report value */
  int background;  /* 0 dark-dominated, 1 scales with eta_rx */
} qlink_scenario;

/* Message and short reason ("EmptyInput", ...) of the last failure on this thread. */
QLINK_API const char* qlink_last_error(void);
QLINK_API const char* qlink_last_error_reason(void);
QLINK_API const char* qlink_version(void);

QLINK_API qlink_status qlink_config_load(const char* path, qlink_config** out);
QLINK_API qlink_status qlink_config_parse(const char* json_text, const char* base_dir, qlink_config** out);
QLINK_API void qlink_config_free(qlink_config* cfg);
QLINK_API qlink_status qlink_config_set_seed(qlink_config* cfg, uint64_t seed);
QLINK_API const char* qlink_config_digest(const qlink_config* cfg);

QLINK_API qlink_status qlink_simulate(const qlink_config* cfg, qlink_stream** out);
QLINK_API qlink_status qlink_stream_read(const char* path, qlink_stream** out);
QLINK_API qlink_status qlink_stream_write(const qlink_stream* stream, const char* path);
QLINK_API size_t qlink_stream_size(const qlink_stream* stream);
QLINK_API qlink_status qlink_stream_get(const qlink_stream* stream, size_t index, qlink_tag* out);
QLINK_API void qlink_stream_free(qlink_stream* stream);

/* Results come back as JSON strings owned by the caller; release with qlink_string_free. */
QLINK_API qlink_status qlink_analyze(const qlink_config* cfg, const qlink_stream* stream, const char* hist_dir,
                                     char** report_json);
QLINK_API qlink_status qlink_budget(const qlink_config* cfg, double range_m, char** out_json);
QLINK_API qlink_status qlink_scenario_project(const char* report_json, const qlink_scenario* changes,
                                              char** out_json);
QLINK_API qlink_status qlink_fit_histogram(const char* csv_path, char** out_json);
QLINK_API void qlink_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
