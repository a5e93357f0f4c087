/*
 * rppcert C API.
 *
 * Every function returns an rppcert_status. On failure the calling thread's
 * last error message is available from rppcert_last_error() until the next
 * failing call on that thread. Handles are opaque, created by the functions
 * below and released with the matching *_free function (NULL is accepted).
 * Output pointers are written only on success.
 */
#ifndef RPPCERT_H
#define RPPCERT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RPPCERT_API __declspec(dllexport)
#else
#define RPPCERT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rppcert_status {
  RPPCERT_OK = 0,
  RPPCERT_E_INVALID_ARGUMENT = 1,
  RPPCERT_E_DOMAIN = 2,
  RPPCERT_E_PARSE = 3,
  RPPCERT_E_IO = 4,
  RPPCERT_E_PRECONDITION = 5,
  RPPCERT_E_PROVENANCE = 6,
  RPPCERT_E_TRAINING = 7,
  RPPCERT_E_INTERNAL = 8
} rppcert_status;

typedef struct rppcert_dataset rppcert_dataset;
typedef struct rppcert_model rppcert_model;
typedef struct rppcert_oracle rppcert_oracle;
typedef struct rppcert_scores rppcert_scores;
typedef struct rppcert_profile rppcert_profile;
typedef struct rppcert_verdicts rppcert_verdicts;
typedef struct rppcert_certificates rppcert_certificates;
typedef struct rppcert_report rppcert_report;

/* ---- errors and metadata ---------------------------------------------- */

RPPCERT_API const char* rppcert_last_error(void);
RPPCERT_API const char* rppcert_status_name(rppcert_status status);
RPPCERT_API const char* rppcert_version(void);

/* ---- datasets ---------------------------------------------------------- */

typedef struct rppcert_blob_options {
  size_t num_classes;
  size_t dim;
  size_t per_class;
  double separation;
  double noise_std;
  uint64_t seed;
} rppcert_blob_options;

#define RPPCERT_IMBALANCE_LONGTAIL 0
#define RPPCERT_IMBALANCE_STEP 1

typedef struct rppcert_imbalance_options {
  int kind;
  double rho;
  double mu;
  size_t n_max; /* 0: size of the largest class */
  uint64_t seed;
} rppcert_imbalance_options;

#define RPPCERT_TRIGGER_CHESSBOARD 0
#define RPPCERT_TRIGGER_BLEND 1

typedef struct rppcert_trigger_options {
  int kind;
  double target_l2;
  /* Image layout; all zero infers a square single-channel image. */
  size_t height, width, channels;
  size_t patch_side;
  double blend_rate;
  uint64_t pattern_seed;
  size_t target_class;
} rppcert_trigger_options;

#define RPPCERT_POISON_COUNT 0
#define RPPCERT_POISON_RATE 1
#define RPPCERT_SOURCES_MINORITY 0
#define RPPCERT_SOURCES_ANY 1

typedef struct rppcert_poison_options {
  rppcert_trigger_options trigger;
  int mode;
  size_t count;
  double rate;
  int policy;
  uint64_t seed;
  int clip;
  double clip_lo, clip_hi;
} rppcert_poison_options;

#define RPPCERT_CALIB_BALANCED 0
#define RPPCERT_CALIB_IMBALANCED 1

typedef struct rppcert_split_options {
  size_t calib_n;
  double test_fraction;
  int calib_mode;
  uint64_t seed;
} rppcert_split_options;

#define RPPCERT_SUBSET_ALL 0
#define RPPCERT_SUBSET_POISONED 1
#define RPPCERT_SUBSET_CLEAN 2

RPPCERT_API void rppcert_blob_options_init(rppcert_blob_options* opts);
RPPCERT_API void rppcert_imbalance_options_init(rppcert_imbalance_options* opts);
RPPCERT_API void rppcert_trigger_options_init(rppcert_trigger_options* opts);
RPPCERT_API void rppcert_poison_options_init(rppcert_poison_options* opts);
RPPCERT_API void rppcert_split_options_init(rppcert_split_options* opts);

RPPCERT_API rppcert_status rppcert_dataset_make_blobs(const rppcert_blob_options* opts,
                                                      rppcert_dataset** out);
RPPCERT_API rppcert_status rppcert_dataset_subsample(const rppcert_dataset* data,
                                                     const rppcert_imbalance_options* opts,
                                                     rppcert_dataset** out);
RPPCERT_API rppcert_status rppcert_dataset_poison(const rppcert_dataset* data,
                                                  const rppcert_poison_options* opts,
                                                  rppcert_dataset** out);
RPPCERT_API rppcert_status rppcert_dataset_split(const rppcert_dataset* data,
                                                 const rppcert_split_options* opts,
                                                 rppcert_dataset** train, rppcert_dataset** calib,
                                                 rppcert_dataset** test);
RPPCERT_API rppcert_status rppcert_dataset_subset(const rppcert_dataset* data, int which,
                                                  rppcert_dataset** out);
/* First `count` samples (all when count exceeds the size). */
RPPCERT_API rppcert_status rppcert_dataset_head(const rppcert_dataset* data, size_t count,
                                                rppcert_dataset** out);
/* Also records the written checksum on the handle. */
RPPCERT_API rppcert_status rppcert_dataset_save(rppcert_dataset* data, const char* csv_path);
RPPCERT_API rppcert_status rppcert_dataset_load(const char* csv_path, rppcert_dataset** out);
RPPCERT_API void rppcert_dataset_free(rppcert_dataset* data);

RPPCERT_API size_t rppcert_dataset_size(const rppcert_dataset* data);
RPPCERT_API size_t rppcert_dataset_num_classes(const rppcert_dataset* data);
RPPCERT_API size_t rppcert_dataset_dim(const rppcert_dataset* data);
RPPCERT_API size_t rppcert_dataset_poisoned_count(const rppcert_dataset* data);
/* Checksum of the CSV the dataset was last saved to or loaded from ("" if none). */
RPPCERT_API const char* rppcert_dataset_checksum(const rppcert_dataset* data);
RPPCERT_API size_t rppcert_dataset_warning_count(const rppcert_dataset* data);
RPPCERT_API const char* rppcert_dataset_warning(const rppcert_dataset* data, size_t index);
/* Per-class sizes; `counts` must hold num_classes entries. */
RPPCERT_API rppcert_status rppcert_dataset_class_counts(const rppcert_dataset* data, size_t* counts,
                                                        size_t len);
RPPCERT_API rppcert_status rppcert_dataset_sample(const rppcert_dataset* data, size_t index,
                                                  double* features, size_t len, size_t* label,
                                                  int* poisoned, uint64_t* id);
/* Trigger recorded by the poisoning step (also after save/load). */
RPPCERT_API rppcert_status rppcert_dataset_trigger(const rppcert_dataset* data,
                                                   rppcert_trigger_options* out);

RPPCERT_API rppcert_status rppcert_trigger_render(const rppcert_trigger_options* opts, size_t dim,
                                                  double* out, size_t len);

/* ---- models and oracles ------------------------------------------------ */

#define RPPCERT_ARCH_SOFTMAX_LINEAR 0
#define RPPCERT_ARCH_ONE_HIDDEN_LAYER 1

typedef struct rppcert_train_options {
  int architecture;
  size_t hidden;
  size_t epochs;
  double learning_rate;
  size_t batch_size;
  double weight_decay;
  uint64_t seed;
} rppcert_train_options;

RPPCERT_API void rppcert_train_options_init(rppcert_train_options* opts);
RPPCERT_API rppcert_status rppcert_model_train(const rppcert_dataset* data,
                                               const rppcert_train_options* opts,
                                               rppcert_model** out);
RPPCERT_API rppcert_status rppcert_model_save(const rppcert_model* model, const char* path);
RPPCERT_API rppcert_status rppcert_model_load(const char* path, rppcert_model** out);
RPPCERT_API void rppcert_model_free(rppcert_model* model);
RPPCERT_API rppcert_status rppcert_model_accuracy(const rppcert_model* model,
                                                  const rppcert_dataset* data, double* out);
RPPCERT_API double rppcert_model_train_accuracy(const rppcert_model* model);
RPPCERT_API const char* rppcert_model_checksum(const rppcert_model* model);

#define RPPCERT_SPV_SOFT 0
#define RPPCERT_SPV_HARD 1

RPPCERT_API rppcert_status rppcert_oracle_from_model(const rppcert_model* model, int spv_mode,
                                                     rppcert_oracle** out);
/* p1(x) = Phi((w.x + b) / (sigma0 |w|)). */
RPPCERT_API rppcert_status rppcert_oracle_analytic(const double* w, size_t dim, double b,
                                                   double sigma0, rppcert_oracle** out);
RPPCERT_API rppcert_status rppcert_oracle_analytic_load(const char* path, rppcert_oracle** out);
RPPCERT_API rppcert_status rppcert_oracle_analytic_save(const rppcert_oracle* oracle,
                                                        const char* path);
RPPCERT_API void rppcert_oracle_free(rppcert_oracle* oracle);
RPPCERT_API size_t rppcert_oracle_num_classes(const rppcert_oracle* oracle);
RPPCERT_API size_t rppcert_oracle_dim(const rppcert_oracle* oracle);
RPPCERT_API rppcert_status rppcert_oracle_spv(const rppcert_oracle* oracle, const double* x,
                                              size_t dim, double* probs, size_t num_classes);

/* ---- scoring ----------------------------------------------------------- */

typedef struct rppcert_noise_options {
  double sigma;
  size_t draws;
  uint64_t seed;
  int clip;
  double clip_lo, clip_hi;
  unsigned workers;
} rppcert_noise_options;

RPPCERT_API void rppcert_noise_options_init(rppcert_noise_options* opts);
RPPCERT_API rppcert_status rppcert_erpp(const rppcert_oracle* oracle, const double* x, size_t dim,
                                        const rppcert_noise_options* opts, uint64_t sample_id,
                                        double* out);
/* Exact value for an analytic oracle; RPPCERT_E_INVALID_ARGUMENT otherwise. */
RPPCERT_API rppcert_status rppcert_rpp_exact(const rppcert_oracle* oracle, const double* x,
                                             size_t dim, double sigma, double* out);
RPPCERT_API rppcert_status rppcert_score_dataset(const rppcert_oracle* oracle,
                                                 const rppcert_dataset* data,
                                                 const rppcert_noise_options* opts,
                                                 rppcert_scores** out);
/* Scores from a probability table CSV (clean row first, then noisy rows). */
RPPCERT_API rppcert_status rppcert_score_table(const char* path, size_t num_classes,
                                               const rppcert_noise_options* opts,
                                               rppcert_scores** out);
RPPCERT_API rppcert_status rppcert_scores_save(const rppcert_scores* scores, const char* path);
RPPCERT_API rppcert_status rppcert_scores_load(const char* path, rppcert_scores** out);
RPPCERT_API void rppcert_scores_free(rppcert_scores* scores);
RPPCERT_API size_t rppcert_scores_size(const rppcert_scores* scores);
RPPCERT_API rppcert_status rppcert_scores_get(const rppcert_scores* scores, size_t index,
                                              uint64_t* sample_id, double* value);
/* Copy of the first `count` scores (all when count exceeds the size). */
RPPCERT_API rppcert_status rppcert_scores_head(const rppcert_scores* scores, size_t count,
                                               rppcert_scores** out);

/* ---- calibration and detection ----------------------------------------- */

typedef struct rppcert_profile_info {
  size_t n;
  size_t k;
  double alpha;
  double q_hat;
  double sigma;
  size_t draws;
  double clean_pass_lower;
  double fpr_upper;
} rppcert_profile_info;

RPPCERT_API rppcert_status rppcert_calibrate(const rppcert_scores* scores, double alpha,
                                             rppcert_profile** out);
RPPCERT_API rppcert_status rppcert_profile_set_provenance(rppcert_profile* profile,
                                                         const char* dataset_checksum,
                                                         const char* model_checksum);
RPPCERT_API rppcert_status rppcert_profile_info_get(const rppcert_profile* profile,
                                                    rppcert_profile_info* out);
RPPCERT_API rppcert_status rppcert_profile_save(const rppcert_profile* profile, const char* path);
RPPCERT_API rppcert_status rppcert_profile_load(const char* path, rppcert_profile** out);
RPPCERT_API void rppcert_profile_free(rppcert_profile* profile);

/* flagged <=> score <= q_hat. Mismatched sigma or J is a provenance error
 * unless `force` is nonzero. */
RPPCERT_API rppcert_status rppcert_detect(const rppcert_scores* scores,
                                          const rppcert_profile* profile, int force,
                                          rppcert_verdicts** out);
RPPCERT_API rppcert_status rppcert_verdicts_save(const rppcert_verdicts* verdicts,
                                                 const char* path);
RPPCERT_API rppcert_status rppcert_verdicts_load(const char* path, rppcert_verdicts** out);
RPPCERT_API void rppcert_verdicts_free(rppcert_verdicts* verdicts);
RPPCERT_API size_t rppcert_verdicts_size(const rppcert_verdicts* verdicts);
RPPCERT_API size_t rppcert_verdicts_flagged(const rppcert_verdicts* verdicts);
RPPCERT_API rppcert_status rppcert_verdicts_get(const rppcert_verdicts* verdicts, size_t index,
                                                uint64_t* sample_id, double* score,
                                                int* flagged);

/* ---- certification ----------------------------------------------------- */

typedef struct rppcert_certify_options {
  double confidence;
  int spv_mode;
  int force;
} rppcert_certify_options;

#define RPPCERT_VERDICT_GUARANTEED 0
#define RPPCERT_VERDICT_UNGUARANTEED 1
#define RPPCERT_VERDICT_UNDEFINED 2

RPPCERT_API void rppcert_certify_options_init(rppcert_certify_options* opts);
/* RPPCERT_E_DOMAIN when the bound is undefined; the reason is the error text. */
RPPCERT_API rppcert_status rppcert_certified_lower_bound(double p_x, double zeta, double pt_bar,
                                                         double sigma, double* out);
RPPCERT_API rppcert_status rppcert_radius_upper_bound(double p_x, double pt_bar, double sigma,
                                                      double* out);
/* Certifies every sample of `data`; delta_l2 <= 0 means no trigger norm. */
RPPCERT_API rppcert_status rppcert_certify_dataset(const rppcert_oracle* oracle,
                                                   const rppcert_dataset* data,
                                                   const rppcert_profile* profile,
                                                   const rppcert_noise_options* noise,
                                                   const rppcert_certify_options* opts,
                                                   double delta_l2, rppcert_certificates** out);
RPPCERT_API size_t rppcert_certificates_size(const rppcert_certificates* certs);
RPPCERT_API size_t rppcert_certificates_count(const rppcert_certificates* certs, int verdict);
RPPCERT_API rppcert_status rppcert_certificates_save(const rppcert_certificates* certs,
                                                     const char* path);
RPPCERT_API void rppcert_certificates_free(rppcert_certificates* certs);

/* ---- evaluation -------------------------------------------------------- */

typedef struct rppcert_detection_report {
  size_t tp, fp, tn, fn;
  double tpr, fpr;
  int tpr_defined, fpr_defined;
} rppcert_detection_report;

typedef struct rppcert_attack_report {
  double asr, acc;
  size_t asr_samples, acc_samples;
} rppcert_attack_report;

/* Ground truth is looked up in `data` by sample id. */
RPPCERT_API rppcert_status rppcert_eval_detection(const rppcert_verdicts* verdicts,
                                                  const rppcert_dataset* data,
                                                  rppcert_detection_report* out);
RPPCERT_API rppcert_status rppcert_eval_attack(const rppcert_model* model,
                                               const rppcert_dataset* clean_test,
                                               const rppcert_trigger_options* trigger,
                                               rppcert_attack_report* out);

/* ---- validators -------------------------------------------------------- */

#define RPPCERT_FORMAT_JSON 0
#define RPPCERT_FORMAT_CSV 1

typedef struct rppcert_trend_options {
  size_t num_classes;
  size_t dim;
  double separation;
  double noise_std;
  int imbalance_kind;
  double mu;
  size_t n_max;
  const double* rhos;
  size_t rho_count;
  size_t poison_count;
  rppcert_trigger_options trigger;
  int policy;
  const uint64_t* seeds;
  size_t seed_count;
  rppcert_train_options training;
  size_t test_per_class;
} rppcert_trend_options;

RPPCERT_API void rppcert_trend_options_init(rppcert_trend_options* opts);

/* Fills `out` with `count` draws of a named sampler (uniform, normal,
 * exponential, discrete). */
RPPCERT_API rppcert_status rppcert_sample_scores(const char* sampler, size_t count, uint64_t seed,
                                                 double* out);
RPPCERT_API rppcert_status rppcert_validate_fpr(const double* pool, size_t pool_len, size_t n,
                                               double alpha, size_t trials, uint64_t seed,
                                               double slack, rppcert_report** out);
RPPCERT_API rppcert_status rppcert_validate_coverage(const char* sampler, size_t n, double alpha,
                                                    size_t trials, uint64_t seed,
                                                    rppcert_report** out);
RPPCERT_API rppcert_status rppcert_validate_erpp(const rppcert_oracle* analytic, size_t points,
                                                size_t j_mc, uint64_t seed, rppcert_report** out);
RPPCERT_API rppcert_status rppcert_validate_a1(const rppcert_oracle* oracle,
                                              const rppcert_dataset* triggered, size_t target_class,
                                              const rppcert_noise_options* noise, double min_rate,
                                              int spv_mode, rppcert_report** out);
RPPCERT_API rppcert_status rppcert_validate_trend(const rppcert_trend_options* opts,
                                                 rppcert_report** out);

RPPCERT_API int rppcert_report_passed(const rppcert_report* report);
RPPCERT_API double rppcert_report_observed(const rppcert_report* report);
RPPCERT_API double rppcert_report_bound(const rppcert_report* report);
RPPCERT_API rppcert_status rppcert_report_metric(const rppcert_report* report, const char* key,
                                                double* out);
/* The returned string is owned by the report and valid until it is freed. */
RPPCERT_API const char* rppcert_report_render(rppcert_report* report, int format);
RPPCERT_API rppcert_status rppcert_report_save(const rppcert_report* report, const char* path,
                                              int format);
RPPCERT_API void rppcert_report_free(rppcert_report* report);

#ifdef __cplusplus
}
#endif

#endif /* RPPCERT_H */
