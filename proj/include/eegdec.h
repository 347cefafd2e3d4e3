/*
 * eegdec — EEG-to-image decoding pipeline, C API.
 *
 * The shared library wraps the C++ core behind an opaque session handle and
 * integer status codes. Pipeline functions are configured with JSON strings
 * (documented per function) and exchange data through files; a handful of
 * numeric entry points operate directly on caller buffers.
 *
 * Status codes mirror the CLI exit codes:
 *   EEGDEC_OK           success
 *   EEGDEC_E_VALIDATION caller input violates a documented invariant
 *   EEGDEC_E_RUNTIME    I/O failure, missing backend, diverged run, ...
 *
 * On any non-zero status, eegdec_last_error(session) returns a message that
 * stays valid until the next call on the same session. Sessions are not
 * thread-safe; use one per thread.
 */

#ifndef EEGDEC_H
#define EEGDEC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define EEGDEC_OK 0
#define EEGDEC_E_VALIDATION 1
#define EEGDEC_E_RUNTIME 2

typedef struct eegdec_session eegdec_session;

eegdec_session* eegdec_session_new(void);
void eegdec_session_free(eegdec_session* s);

/* Message for the most recent failing call on this session; never NULL. */
const char* eegdec_last_error(const eegdec_session* s);

/* Library version string, e.g. "0.1.0". */
const char* eegdec_version(void);

/* ----------------------------------------------------------------
 * Pipeline operations. All paths are filesystem paths; every operation
 * writes a run manifest (<out>/run_manifest.json or alongside the named
 * output) recording the frozen config, seed and file hashes.
 */

/* config_json: {"n_classes","n_subjects","n_channels","n_timesteps",
 *               "samples_per_class","noise_sigma","image_size","seed"} */
int eegdec_synth(eegdec_session* s, const char* config_json, const char* out_dir);

/* config_json: {"normalize":"per_channel_zscore"|"none","crop":[t0,t1]?} */
int eegdec_ingest(eegdec_session* s, const char* root_dir, const char* config_json,
                  const char* out_dir);

int eegdec_split(eegdec_session* s, const char* manifest_path, double train_frac, double val_frac,
                 double test_frac, uint64_t seed, const char* out_manifest_path);

/* Writes validation violations (one per line) to *violations_out (caller
 * frees with eegdec_string_free); empty string means the manifest is valid.
 * Returns EEGDEC_OK even when violations exist; the status reports I/O or
 * parse failures only. */
int eegdec_validate_manifest(eegdec_session* s, const char* manifest_path, char** violations_out);

/* config_json: {"space":"image"|"text",
 *               "extractor":{"kind":"standin","seed":0,"d_img":32,"d_text":16,"n_tokens":8},
 *               "caption":{"mode":"label_template","template":"an image of {label}"}
 *                        |{"mode":"external_file","path":"captions.csv"}} */
int eegdec_cache_targets(eegdec_session* s, const char* manifest_path, const char* config_json,
                         const char* out_cache_path);

/* config_json: {"space":"image"|"text","epochs","batch_size","lr","weight_decay",
 *               "lr_lambda","seed","encoder":{"rnn_layers","hidden_dim",
 *               "head_hidden_dim","leaky_slope"}}
 * history_csv_path may be NULL to skip the history file. */
int eegdec_train(eegdec_session* s, const char* manifest_path, const char* cache_path,
                 const char* config_json, const char* out_checkpoint_path,
                 const char* history_csv_path);

/* config_json: {"steps","batch_size","lr","seed","lambda","drop_prob_text",
 *               "drop_prob_image","arch":{"image_size","d_model","n_blocks",
 *               "n_img_tokens","train_timesteps"}}
 * image_cache/text_cache supply the conditioning targets for training. */
int eegdec_train_toy_backend(eegdec_session* s, const char* manifest_path,
                             const char* image_cache_path, const char* text_cache_path,
                             const char* config_json, const char* out_checkpoint_path);

/* config_json: {"split":"test","seed",lambda","drop_text","drop_image",
 *               "inference_steps","image_size","limit","repeats","threads",
 *               "backend":"toy"|"real_adapter","backend_checkpoint":path} */
int eegdec_generate(eegdec_session* s, const char* manifest_path, const char* image_checkpoint,
                    const char* text_checkpoint, const char* config_json, const char* out_dir);

/* Evaluates paired PNG directories (matched by filename). config_json:
 * {"labels":path?,"n_classes"?,"extractor":{...},"metric":{"acc_n","acc_k",
 *  "acc_trials","is_splits","ssim_window",...},"seed","condition":name?}
 * The optional labels CSV (name,class_id) enables ACC and IS. Writes
 * report.json and a one-row results CSV under out_dir. */
int eegdec_evaluate(eegdec_session* s, const char* generated_dir, const char* reference_dir,
                    const char* config_json, const char* out_dir);

/* Runs an ablation plan (JSON file, see README) and writes results.csv plus
 * per-condition image directories under out_dir. */
int eegdec_ablate(eegdec_session* s, const char* plan_path, const char* out_dir);

/* Renders a results CSV as an aligned text table (returned via *table_out,
 * caller frees) and per-metric bar-chart PNGs under out_dir. */
int eegdec_report(eegdec_session* s, const char* results_csv_path, const char* out_dir,
                  char** table_out);

void eegdec_string_free(char* s);

/* ----------------------------------------------------------------
 * Direct numeric surface (row-major buffers).
 */

/* Distribution distance between Gaussian fits of two feature sets. */
int eegdec_frechet_distance(eegdec_session* s, const float* features_a, size_t n_a,
                            const float* features_b, size_t n_b, size_t dim, double* out);

/* Gaussian-windowed structural similarity of two RGB images in [0,1]. */
int eegdec_ssim(eegdec_session* s, const float* rgb_a, const float* rgb_b, int height, int width,
                int window, double sigma, double* out);

/* exp(mean KL(row || marginal)) over n_splits chunks; probs is [n x c]. */
int eegdec_inception_score(eegdec_session* s, const double* probs, size_t n, size_t c, int n_splits,
                           double* mean_out, double* std_out);

/* N-way top-K accuracy over [n x c] probability rows with true class ids. */
int eegdec_nway_topk_acc(eegdec_session* s, const double* probs, const int* true_classes, size_t n,
                         size_t c, int acc_n, int acc_k, int trials, uint64_t seed, double* out);

/* out must hold m*d floats:
 *   out = softmax(Q Kt^T / sqrt(d)) Vt + lambda * softmax(Q Ki^T / sqrt(d)) Vi */
int eegdec_decoupled_cross_attention(eegdec_session* s, const float* q, size_t m, const float* k_text,
                                     const float* v_text, size_t n_text, const float* k_image,
                                     const float* v_image, size_t n_image, size_t d, float lambda,
                                     float* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* EEGDEC_H */
