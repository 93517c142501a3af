/* C interface to the astnet library. Handles are opaque; every call that can
 * fail returns an astnet_status, and astnet_last_error() describes the most
 * recent failure on the calling thread. */
#ifndef ASTNET_H
#define ASTNET_H

#include <stddef.h>

#if defined(_WIN32)
#  if defined(ASTNET_BUILDING_LIBRARY)
#    define ASTNET_API __declspec(dllexport)
#  else
#    define ASTNET_API __declspec(dllimport)
#  endif
#else
#  define ASTNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum astnet_status {
    ASTNET_OK = 0,
    ASTNET_ERR_USAGE = 1,
    ASTNET_ERR_DIMENSION = 2,
    ASTNET_ERR_LABEL = 3,
    ASTNET_ERR_CONTRACT = 4,
    ASTNET_ERR_NUMERIC = 5,
    ASTNET_ERR_FORMAT = 6,
    ASTNET_ERR_DETERMINISM = 7,
    ASTNET_ERR_IO = 8,
    ASTNET_ERR_INTERNAL = 9
} astnet_status;

ASTNET_API const char* astnet_version(void);
ASTNET_API const char* astnet_status_name(astnet_status status);
/* Message for the last failed call on this thread; "" if none. */
ASTNET_API const char* astnet_last_error(void);

/* Receives report lines from commands. */
typedef void (*astnet_line_fn)(const char* line, void* user);

/* Run options: a config-file layer and a flag layer of key=value settings.
 * Flags win over the file, which wins over the built-in defaults. */
typedef struct astnet_options astnet_options;

ASTNET_API astnet_status astnet_options_create(astnet_options** out);
ASTNET_API void astnet_options_destroy(astnet_options* options);
ASTNET_API astnet_status astnet_options_load_file(astnet_options* options, const char* path);
ASTNET_API astnet_status astnet_options_set(astnet_options* options, const char* key, const char* value);

ASTNET_API astnet_status astnet_gen_data(const astnet_options* options, astnet_line_fn sink, void* user);
ASTNET_API astnet_status astnet_train(const astnet_options* options, astnet_line_fn sink, void* user);
ASTNET_API astnet_status astnet_eval(const astnet_options* options, astnet_line_fn sink, void* user);
/* *passed is set to 1 when every parameter passes, 0 otherwise. */
ASTNET_API astnet_status astnet_gradcheck(const astnet_options* options, astnet_line_fn sink, void* user,
                                          int* passed);
ASTNET_API astnet_status astnet_visualize(const astnet_options* options, astnet_line_fn sink, void* user);

/* Trained models. */
typedef struct astnet_model astnet_model;

typedef struct astnet_model_info {
    size_t feature_dim;
    size_t num_frames;
    size_t class_count;
    size_t parameter_count;
    size_t element_count;
    int attention_enabled;
    int reverse_enabled;
    int image_input;
} astnet_model_info;

ASTNET_API astnet_status astnet_model_load(const char* checkpoint_path, astnet_model** out);
ASTNET_API void astnet_model_destroy(astnet_model* model);
ASTNET_API astnet_status astnet_model_get_info(const astnet_model* model, astnet_model_info* out);
/* Name of parameter `index`; the pointer stays valid while the model lives. */
ASTNET_API astnet_status astnet_model_parameter_name(const astnet_model* model, size_t index, const char** name);
/* features: frames x dim values, row-major. Writes class_count logits. */
ASTNET_API astnet_status astnet_model_predict(const astnet_model* model, const double* features, size_t frames,
                                              size_t dim, double* logits, size_t logits_len, size_t* predicted);

/* Synthetic datasets on disk. */
typedef struct astnet_dataset astnet_dataset;

ASTNET_API astnet_status astnet_dataset_load(const char* manifest_path, astnet_dataset** out);
ASTNET_API void astnet_dataset_destroy(astnet_dataset* dataset);
/* split is "train" or "test". */
ASTNET_API astnet_status astnet_dataset_size(const astnet_dataset* dataset, const char* split, size_t* out);
ASTNET_API astnet_status astnet_evaluate(const astnet_model* model, const astnet_dataset* dataset, const char* split,
                                         double* accuracy);

#ifdef __cplusplus
}
#endif

#endif /* ASTNET_H */
