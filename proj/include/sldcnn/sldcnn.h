/*
 * sldcnn C API.
 *
 * Every object is an opaque handle created and destroyed through this
 * interface. Functions return an sldcnn_status; on failure a message for the
 * calling thread is available from sldcnn_last_error(). Strings returned
 * through `char**` out-parameters are heap-allocated and must be released
 * with sldcnn_string_free().
 *
 * Handles are not internally synchronized: use one handle per thread, or
 * share read-only (const) handles only.
 */
#ifndef SLDCNN_SLDCNN_H
#define SLDCNN_SLDCNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SLDCNN_BUILDING)
#    define SLDCNN_API __declspec(dllexport)
#  else
#    define SLDCNN_API __declspec(dllimport)
#  endif
#else
#  define SLDCNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sldcnn_status {
  SLDCNN_OK = 0,
  SLDCNN_ERR_SHAPE = 1,
  SLDCNN_ERR_RANGE = 2,
  SLDCNN_ERR_DOMAIN = 3,
  SLDCNN_ERR_NUMERIC = 4,
  SLDCNN_ERR_PARSE = 5,
  SLDCNN_ERR_CONFIG = 6,
  SLDCNN_ERR_STATE = 7,
  SLDCNN_ERR_FORMAT = 8,
  SLDCNN_ERR_IO = 9,
  SLDCNN_ERR_LABEL = 10,
  SLDCNN_ERR_DATA = 11,
  SLDCNN_ERR_USAGE = 12,
  SLDCNN_ERR_INTERNAL = 13,
  SLDCNN_ERR_NULL = 14
} sldcnn_status;

typedef struct sldcnn_config sldcnn_config;
typedef struct sldcnn_data sldcnn_data;
typedef struct sldcnn_model sldcnn_model;
typedef struct sldcnn_run sldcnn_run;
typedef struct sldcnn_eval sldcnn_eval;

typedef enum sldcnn_split { SLDCNN_SPLIT_TRAIN = 0, SLDCNN_SPLIT_TEST = 1 } sldcnn_split;

typedef struct sldcnn_epoch_record {
  const char* phase; /* valid until the owning run is destroyed (or the callback returns) */
  uint32_t epoch;
  double train_loss;
  double train_error;
  double test_error;
  double lr;
  double wall_ms;
} sldcnn_epoch_record;

typedef void (*sldcnn_epoch_fn)(const sldcnn_epoch_record* record, void* user);

SLDCNN_API const char* sldcnn_version(void);
SLDCNN_API const char* sldcnn_status_name(sldcnn_status status);
/* Message of the last failure on this thread; empty string if none. */
SLDCNN_API const char* sldcnn_last_error(void);
SLDCNN_API void sldcnn_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

SLDCNN_API sldcnn_status sldcnn_config_create(sldcnn_config** out);
SLDCNN_API void sldcnn_config_destroy(sldcnn_config* config);
SLDCNN_API sldcnn_status sldcnn_config_clone(const sldcnn_config* config, sldcnn_config** out);
/* Unknown keys are rejected with SLDCNN_ERR_USAGE. */
SLDCNN_API sldcnn_status sldcnn_config_set(sldcnn_config* config, const char* key, const char* value);
/* SLDCNN_ERR_STATE when the key has no value. */
SLDCNN_API sldcnn_status sldcnn_config_get(const sldcnn_config* config, const char* key, char** value);
/* Reads `key = value` lines; keeps existing keys unless override_existing. */
SLDCNN_API sldcnn_status sldcnn_config_load_file(sldcnn_config* config, const char* path,
                                                 int override_existing);
/* Fills defaults, expands setup presets and validates, in place. */
SLDCNN_API sldcnn_status sldcnn_config_resolve(sldcnn_config* config);
/* As sldcnn_config_resolve, but validates only corpus and preprocessing keys. */
SLDCNN_API sldcnn_status sldcnn_config_resolve_data(sldcnn_config* config);
SLDCNN_API sldcnn_status sldcnn_config_render(const sldcnn_config* config, char** text);

/* ---- architecture ----------------------------------------------------- */

/* Per-layer output shapes of `arch` on a height x width x channels input. */
SLDCNN_API sldcnn_status sldcnn_arch_describe(const char* arch, uint32_t height, uint32_t width,
                                              uint32_t channels, char** report);

/* ---- data --------------------------------------------------------------- */

/* Loads the train/test split named by a resolved configuration. */
SLDCNN_API sldcnn_status sldcnn_data_load(const sldcnn_config* config, sldcnn_data** out);
SLDCNN_API void sldcnn_data_destroy(sldcnn_data* data);
SLDCNN_API sldcnn_status sldcnn_data_info(const sldcnn_data* data, size_t* train_size,
                                          size_t* test_size, size_t* classes, size_t* extent);
SLDCNN_API sldcnn_status sldcnn_data_labels(const sldcnn_data* data, sldcnn_split split,
                                            int32_t* labels, size_t capacity);
/* Writes the synthetic corpus of a resolved configuration as PGM files
   under dir/train/<class>/ and dir/test/<class>/. */
SLDCNN_API sldcnn_status sldcnn_synth_write(const sldcnn_config* config, const char* dir);

/* ---- training --------------------------------------------------------- */

/* Trains per the configuration's mode. Either output may be NULL. */
SLDCNN_API sldcnn_status sldcnn_train(const sldcnn_config* config, const sldcnn_data* data,
                                      sldcnn_epoch_fn on_epoch, void* user,
                                      sldcnn_model** model, sldcnn_run** run);
SLDCNN_API void sldcnn_run_destroy(sldcnn_run* run);
SLDCNN_API size_t sldcnn_run_size(const sldcnn_run* run);
SLDCNN_API sldcnn_status sldcnn_run_record(const sldcnn_run* run, size_t index,
                                           sldcnn_epoch_record* out);
SLDCNN_API sldcnn_status sldcnn_run_write_metrics(const sldcnn_run* run, const char* path);
SLDCNN_API sldcnn_status sldcnn_run_read_metrics(const char* path, sldcnn_run** out);

/* ---- models ------------------------------------------------------------- */

SLDCNN_API sldcnn_status sldcnn_model_save(const sldcnn_model* model, const char* path);
SLDCNN_API sldcnn_status sldcnn_model_load(const char* path, sldcnn_model** out);
SLDCNN_API void sldcnn_model_destroy(sldcnn_model* model);
SLDCNN_API sldcnn_status sldcnn_model_input(const sldcnn_model* model, uint32_t* height,
                                            uint32_t* width, uint32_t* channels);
SLDCNN_API sldcnn_status sldcnn_model_arch(const sldcnn_model* model, char** arch);
SLDCNN_API sldcnn_status sldcnn_model_phase_log(const sldcnn_model* model, char** text);
SLDCNN_API sldcnn_status sldcnn_model_predict(const sldcnn_model* model, const sldcnn_data* data,
                                              sldcnn_split split, int32_t* predictions,
                                              size_t capacity);

/* ---- evaluation --------------------------------------------------------- */

/* SLDCNN_ERR_CONFIG when the model does not fit the data. */
SLDCNN_API sldcnn_status sldcnn_evaluate(const sldcnn_model* model, const sldcnn_data* data,
                                         sldcnn_split split, sldcnn_eval** out);
SLDCNN_API void sldcnn_eval_destroy(sldcnn_eval* eval);
SLDCNN_API sldcnn_status sldcnn_eval_error_rate(const sldcnn_eval* eval, double* error_rate);
SLDCNN_API sldcnn_status sldcnn_eval_write_confusion(const sldcnn_eval* eval, const char* path);
/* Loads a confusion CSV written by sldcnn_eval_write_confusion. */
SLDCNN_API sldcnn_status sldcnn_eval_read_confusion(const char* path, sldcnn_eval** out);
/* Top-n confusion pairs followed by the per-class accuracy table. */
SLDCNN_API sldcnn_status sldcnn_eval_report(const sldcnn_eval* eval, size_t top_n, char** text);

/* ---- gradient check ----------------------------------------------------- */

/* fault_layer: NULL, or "conv" / "pool" / "fc" / "softmax" to corrupt that
   layer type's analytic gradients (negative control). */
SLDCNN_API sldcnn_status sldcnn_gradcheck(const char* arch, uint32_t height, uint32_t width,
                                          uint64_t seed, const char* fault_layer, int* passed,
                                          char** report);

#ifdef __cplusplus
}
#endif

#endif /* SLDCNN_SLDCNN_H */
