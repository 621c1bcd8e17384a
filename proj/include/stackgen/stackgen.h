#ifndef STACKGEN_STACKGEN_H
#define STACKGEN_STACKGEN_H

/*
 * C interface to the stackgen library.
 *
 * Every function returning sg_status reports failures through its return
 * value; the message of the most recent failure on the calling thread is
 * available from sg_last_error(). Strings and arrays handed out by the
 * library are released with sg_string_free() and sg_doubles_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SG_API __declspec(dllexport)
#else
#define SG_API __attribute__((visibility("default")))
#endif

typedef enum sg_status {
    SG_OK = 0,
    SG_ERR_INVALID_ARGUMENT = 1,
    SG_ERR_IO = 2,
    SG_ERR_PARSE = 3,
    SG_ERR_DATA = 4,
    SG_ERR_NUMERIC = 5,
    SG_ERR_MODEL_FORMAT = 6,
    SG_ERR_VERSION = 7,
    SG_ERR_INTERNAL = 8
} sg_status;

typedef struct sg_frame sg_frame;
typedef struct sg_spec sg_spec;
typedef struct sg_model sg_model;

SG_API const char* sg_version(void);
SG_API const char* sg_model_format_version(void);
SG_API const char* sg_last_error(void);
SG_API void sg_string_free(char* text);
SG_API void sg_doubles_free(double* values);

/* Process-wide generator consumed by seed policy -1. */
SG_API void sg_set_global_seed(uint64_t seed);
SG_API uint64_t sg_global_draw_count(void);

/* Warnings go to stderr unless a callback is installed (NULL restores). */
typedef void (*sg_warning_fn)(const char* message, void* user);
SG_API void sg_set_warning_callback(sg_warning_fn fn, void* user);

/* ---- data ------------------------------------------------------------ */

SG_API sg_status sg_frame_read_csv(const char* path, sg_frame** out);
SG_API sg_status sg_frame_parse_csv(const char* text, sg_frame** out);
SG_API void sg_frame_free(sg_frame* frame);
SG_API size_t sg_frame_rows(const sg_frame* frame);
SG_API size_t sg_frame_cols(const sg_frame* frame);
/* Column name by position, or NULL when out of range. */
SG_API const char* sg_frame_column_name(const sg_frame* frame, size_t index);
/* Copies a column into `out`, which must hold sg_frame_rows() values. */
SG_API sg_status sg_frame_column(const sg_frame* frame, const char* name, double* out);

/* ---- specification --------------------------------------------------- */

/* task: "regress" or "classify". */
SG_API sg_status sg_spec_new(const char* task, sg_spec** out);
SG_API void sg_spec_free(sg_spec* spec);
/* options: "key(value) ..."; pipeline: "step step ..."; xvars: space
 * separated column names. Each may be NULL or empty. */
SG_API sg_status sg_spec_add_learner(sg_spec* spec, const char* method, const char* options, const char* pipeline,
                                     const char* xvars);
/* Keys: finalest, folds, bfolds, seed, njobs, voting (0/1), voteweights
 * (space separated), foldvar (column name resolved at fit time). */
SG_API sg_status sg_spec_set(sg_spec* spec, const char* key, const char* value);
SG_API size_t sg_spec_num_learners(const sg_spec* spec);

/* Effective option string of learner `index` (defaults overlaid). */
SG_API sg_status sg_spec_learner_options(const sg_spec* spec, size_t index, char** out);

/* "Default options: ..." listing for a method and task, wrapped. */
SG_API sg_status sg_printopt(const char* method, const char* task, char** out);

/* ---- estimation ------------------------------------------------------ */

/* Fits on the rows of `frame` with train_mask[i] != 0 (all rows when the
 * mask is NULL). predictors: space separated, NULL or empty for every
 * column other than the outcome, foldvar and mask columns. */
SG_API sg_status sg_fit(const sg_spec* spec, const sg_frame* frame, const char* outcome, const char* predictors,
                        const unsigned char* train_mask, sg_model** out);
SG_API void sg_model_free(sg_model* model);

SG_API sg_status sg_model_save(const sg_model* model, const char* path);
SG_API sg_status sg_model_load(const char* path, sg_model** out);
SG_API sg_status sg_model_serialize(const sg_model* model, char** out);
SG_API sg_status sg_model_deserialize(const char* text, sg_model** out);

SG_API size_t sg_model_num_learners(const sg_model* model);
SG_API size_t sg_model_train_rows(const sg_model* model);
/* Copies the J weights into `out`. */
SG_API sg_status sg_model_weights(const sg_model* model, double* out);
SG_API double sg_model_intercept(const sg_model* model);
/* Weights table as printed after fitting. */
SG_API sg_status sg_model_weights_text(const sg_model* model, char** out);
/* Options each learner was run with, one line per learner. */
SG_API sg_status sg_model_options_text(const sg_model* model, char** out);
SG_API const char* sg_model_outcome(const sg_model* model);

/* ---- prediction ------------------------------------------------------ */

/* kind: "xb", "pr", "basexb" or "cvalid". Writes a row-major rows x cols
 * array to *out (cols = 1 for xb/pr, J otherwise). "cvalid" requires the
 * file the model was estimated on; rows outside the estimation sample are
 * NaN. */
SG_API sg_status sg_predict(const sg_model* model, const sg_frame* frame, const char* kind, double** out,
                            size_t* rows, size_t* cols);

/* ---- reports --------------------------------------------------------- */

/* holdout: NULL for no holdout, "" for every row outside the estimation
 * sample, otherwise the name of a 0/1 column marking holdout rows.
 * The frame must be the file the model was estimated on. */
SG_API sg_status sg_table(const sg_model* model, const sg_frame* frame, const char* holdout, double threshold,
                          char** out);

typedef struct sg_plot_options {
    const char* title;
    const char* subtitle;
    const char* xlabel;
    const char* ylabel;
    int histogram;
} sg_plot_options;

/* Writes plot files into out_dir; *out lists the paths, one per line. */
SG_API sg_status sg_graph(const sg_model* model, const sg_frame* frame, const char* holdout, const char* out_dir,
                          const sg_plot_options* options, char** out);

#ifdef __cplusplus
}
#endif

#endif
