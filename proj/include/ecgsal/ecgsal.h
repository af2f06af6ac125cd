#ifndef ECGSAL_ECGSAL_H
#define ECGSAL_ECGSAL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ECGSAL_BUILDING)
#    define ECGSAL_API __declspec(dllexport)
#  else
#    define ECGSAL_API __declspec(dllimport)
#  endif
#else
#  define ECGSAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ecgsal_status {
  ECGSAL_OK = 0,
  ECGSAL_INVALID_ARGUMENT = 1,
  ECGSAL_MALFORMED_HEADER = 10,
  ECGSAL_UNSUPPORTED_FORMAT = 11,
  ECGSAL_LEAD_COUNT_MISMATCH = 12,
  ECGSAL_TRUNCATED_SIGNAL = 13,
  ECGSAL_ZERO_GAIN = 14,
  ECGSAL_MALFORMED_ANNOTATION_STREAM = 15,
  ECGSAL_NON_BEAT_SYMBOL = 16,
  ECGSAL_NO_BEAT_ANNOTATIONS = 20,
  ECGSAL_EMPTY_SEGMENT = 21,
  ECGSAL_BEAT_TOO_LONG = 22,
  ECGSAL_TOO_FEW_BEATS = 23,
  ECGSAL_UNKNOWN_RECORD_ID = 24,
  ECGSAL_EMPTY_CLASS = 25,
  ECGSAL_INVALID_CONFIG = 30,
  ECGSAL_DIVERGED_TRAINING = 31,
  ECGSAL_SHAPE_MISMATCH = 32,
  ECGSAL_CORRUPT_CHECKPOINT = 33,
  ECGSAL_LENGTH_MISMATCH = 40,
  ECGSAL_EMPTY_MATRIX = 41,
  ECGSAL_UNTRAINED_MODEL = 50,
  ECGSAL_NO_INCORRECT_BEATS = 51,
  ECGSAL_MISSING_RECORDS = 60,
  ECGSAL_MISSING_ARTIFACT = 61,
  ECGSAL_CONFIG_CONFLICT = 62,
  ECGSAL_IO = 70,
  ECGSAL_INTERNAL = 99
} ecgsal_status;

#define ECGSAL_NUM_CLASSES 8
#define ECGSAL_VECTOR_LENGTH 860

/* Saliency target selection. */
#define ECGSAL_TARGET_PREDICTED 0
#define ECGSAL_TARGET_TRUE 1

typedef struct ecgsal_record ecgsal_record;
typedef struct ecgsal_model ecgsal_model;
typedef struct ecgsal_config ecgsal_config;

typedef void (*ecgsal_log_fn)(const char* line, void* user);

ECGSAL_API const char* ecgsal_version(void);

/* Message for the most recent failure on the calling thread. */
ECGSAL_API const char* ecgsal_last_error(void);
ECGSAL_API const char* ecgsal_status_name(ecgsal_status status);

/* 0 ok, 2 configuration, 3 data, 4 training divergence, 1 anything else. */
ECGSAL_API int ecgsal_exit_code(ecgsal_status status);

/* 0 uses every hardware thread. */
ECGSAL_API void ecgsal_set_threads(unsigned n);

ECGSAL_API void ecgsal_string_free(char* s);

/* Class keys in index order: APB, Vesc, Jesc, LBBB, Normal, Paced, RBBB, VT. */
ECGSAL_API const char* ecgsal_class_key(int class_index);

/* Records ---------------------------------------------------------------- */

ECGSAL_API ecgsal_status ecgsal_record_load(const char* dir, const char* record_id, ecgsal_record** out);
ECGSAL_API void ecgsal_record_free(ecgsal_record* record);
ECGSAL_API size_t ecgsal_record_num_samples(const ecgsal_record* record);
ECGSAL_API double ecgsal_record_sampling_frequency(const ecgsal_record* record);
ECGSAL_API size_t ecgsal_record_num_annotations(const ecgsal_record* record);
/* Physical-unit samples of lead 0 or 1; valid until the record is freed. */
ECGSAL_API ecgsal_status ecgsal_record_signal(const ecgsal_record* record, int lead, const double** data, size_t* length);
ECGSAL_API ecgsal_status ecgsal_record_to_json(const ecgsal_record* record, char** json);

/* Beat vectors for every kept beat. Call with vectors == NULL to query the
 * count; otherwise capacity is in beats, vectors holds capacity*860 floats
 * and labels (may be NULL) capacity class indices. */
ECGSAL_API ecgsal_status ecgsal_record_beats(const ecgsal_record* record, float* vectors, int* labels, size_t capacity,
                                             size_t* count);

/* Models ----------------------------------------------------------------- */

/* arch is "cnn" or "lstm"; default configuration, seeded initialization. */
ECGSAL_API ecgsal_status ecgsal_model_create(const char* arch, uint64_t seed, ecgsal_model** out);
ECGSAL_API ecgsal_status ecgsal_model_load(const char* path, ecgsal_model** out);
ECGSAL_API ecgsal_status ecgsal_model_save(const ecgsal_model* model, const char* path);
ECGSAL_API void ecgsal_model_free(ecgsal_model* model);
ECGSAL_API const char* ecgsal_model_arch(const ecgsal_model* model);
ECGSAL_API int ecgsal_model_is_trained(const ecgsal_model* model);

/* inputs: n*860 floats; probs: n*8 doubles, row per beat. */
ECGSAL_API ecgsal_status ecgsal_model_predict(const ecgsal_model* model, const float* inputs, size_t n, double* probs);

/* Normalized saliency of one 860-sample beat into out[860]. true_class is
 * used with ECGSAL_TARGET_TRUE; the differentiated class is written to
 * target_class (may be NULL). Untrained models are rejected. */
ECGSAL_API ecgsal_status ecgsal_model_saliency(const ecgsal_model* model, const float* input, int target, int true_class,
                                               double* out, int* target_class);

/* Pipeline --------------------------------------------------------------- */

ECGSAL_API ecgsal_status ecgsal_config_create(ecgsal_config** out);
ECGSAL_API void ecgsal_config_free(ecgsal_config* config);
/* Reads key=value lines; later ecgsal_config_set calls override them. */
ECGSAL_API ecgsal_status ecgsal_config_load_file(ecgsal_config* config, const char* path);
ECGSAL_API ecgsal_status ecgsal_config_set(ecgsal_config* config, const char* key, const char* value);
/* Resolved configuration as JSON. */
ECGSAL_API ecgsal_status ecgsal_config_to_json(const ecgsal_config* config, char** json);

/* command: ingest, split, train, eval, explain or report. summary (may be
 * NULL) receives a human-readable result to free with ecgsal_string_free. */
ECGSAL_API ecgsal_status ecgsal_run(const char* command, const ecgsal_config* config, ecgsal_log_fn log, void* user,
                                    char** summary);

#ifdef __cplusplus
}
#endif

#endif
