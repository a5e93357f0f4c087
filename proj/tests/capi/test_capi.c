/* Exercises the shared library through its C header only. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "rppcert.h"

static int failures = 0;
static int checks = 0;

#define CHECK(cond)                                                   \
  do {                                                                \
    ++checks;                                                         \
    if (!(cond)) {                                                    \
      ++failures;                                                     \
      fprintf(stderr, "%s:%d: CHECK(%s) failed; last error: %s\n", __FILE__, __LINE__, #cond, \
              rppcert_last_error());                                  \
    }                                                                 \
  } while (0)

#define CHECK_OK(expr) CHECK((expr) == RPPCERT_OK)

static char scratch[512];

static const char* path_in(const char* name) {
  const char* dir = getenv("TMPDIR");
  snprintf(scratch, sizeof scratch, "%s/rppcert_capi_%s", dir && *dir ? dir : "/tmp", name);
  return scratch;
}

static void test_errors(void) {
  rppcert_dataset* d = NULL;
  CHECK(rppcert_dataset_make_blobs(NULL, &d) == RPPCERT_E_INVALID_ARGUMENT);
  CHECK(d == NULL);
  CHECK(strlen(rppcert_last_error()) > 0);
  CHECK(rppcert_dataset_load("/nonexistent/x.csv", &d) == RPPCERT_E_IO);
  CHECK(strcmp(rppcert_status_name(RPPCERT_E_PROVENANCE), "provenance") == 0 ||
        strlen(rppcert_status_name(RPPCERT_E_PROVENANCE)) > 0);
  CHECK(strlen(rppcert_version()) > 0);

  double v = 0.0;
  CHECK(rppcert_certified_lower_bound(0.9, 0.05, 1.0, 1.0, &v) == RPPCERT_E_DOMAIN);
  CHECK(strstr(rppcert_last_error(), "saturated") != NULL);
  CHECK_OK(rppcert_radius_upper_bound(0.9, 0.1, 1.0, &v));
  CHECK(fabs(v - 2.5631) < 1e-4);
  CHECK_OK(rppcert_certified_lower_bound(0.99, 0.05, 0.1, 1.0, &v));
  CHECK(fabs(v - 2.8364) < 1e-4);
}

static void test_analytic(void) {
  const double w[2] = {1.0, 0.0};
  const double x[2] = {0.0, 3.0};
  rppcert_oracle* o = NULL;
  double exact = 0.0, mc = 0.0, probs[2];
  rppcert_noise_options noise;

  CHECK_OK(rppcert_oracle_analytic(w, 2, 0.0, 1.0, &o));
  CHECK(rppcert_oracle_num_classes(o) == 2);
  CHECK_OK(rppcert_oracle_spv(o, x, 2, probs, 2));
  CHECK(fabs(probs[0] - 0.5) < 1e-15);
  CHECK_OK(rppcert_rpp_exact(o, x, 2, 1.0, &exact));
  CHECK(fabs(exact - 0.25) < 1e-8);

  rppcert_noise_options_init(&noise);
  noise.draws = 100000;
  CHECK_OK(rppcert_erpp(o, x, 2, &noise, 0, &mc));
  CHECK(fabs(mc - 0.25) < 0.005);
  CHECK(rppcert_erpp(o, x, 1, &noise, 0, &mc) == RPPCERT_E_INVALID_ARGUMENT);

  CHECK_OK(rppcert_oracle_analytic_save(o, path_in("oracle.json")));
  rppcert_oracle* back = NULL;
  CHECK_OK(rppcert_oracle_analytic_load(path_in("oracle.json"), &back));
  CHECK_OK(rppcert_rpp_exact(back, x, 2, 1.0, &mc));
  CHECK(mc == exact);
  rppcert_oracle_free(back);
  rppcert_oracle_free(o);
}

static void test_pipeline(void) {
  rppcert_blob_options b;
  rppcert_poison_options p;
  rppcert_split_options s;
  rppcert_train_options t;
  rppcert_noise_options n;
  rppcert_certify_options c;
  rppcert_dataset *full = NULL, *poisoned = NULL, *train = NULL, *calib = NULL, *test = NULL;
  rppcert_dataset *reloaded = NULL, *bad = NULL;
  rppcert_model* model = NULL;
  rppcert_oracle* oracle = NULL;
  rppcert_scores *cal_scores = NULL, *train_scores = NULL;
  rppcert_profile* profile = NULL;
  rppcert_verdicts* verdicts = NULL;
  rppcert_certificates* certs = NULL;
  rppcert_profile_info info;
  rppcert_detection_report det;
  rppcert_attack_report atk;
  rppcert_trigger_options trig;
  size_t counts[4];

  rppcert_blob_options_init(&b);
  b.num_classes = 4;
  b.dim = 16;
  b.per_class = 150;
  b.separation = 3.0;
  CHECK_OK(rppcert_dataset_make_blobs(&b, &full));
  CHECK(rppcert_dataset_size(full) == 600);

  rppcert_poison_options_init(&p);
  p.count = 20;
  p.policy = RPPCERT_SOURCES_ANY;
  p.trigger.target_l2 = 30.0;
  CHECK_OK(rppcert_dataset_poison(full, &p, &poisoned));
  CHECK(rppcert_dataset_poisoned_count(poisoned) == 20);

  rppcert_split_options_init(&s);
  s.calib_n = 40;
  CHECK_OK(rppcert_dataset_split(poisoned, &s, &train, &calib, &test));
  CHECK_OK(rppcert_dataset_class_counts(calib, counts, 4));
  CHECK(counts[0] == 10 && counts[3] == 10);
  CHECK(rppcert_dataset_poisoned_count(train) == 20);

  CHECK_OK(rppcert_dataset_save(train, path_in("train.csv")));
  CHECK_OK(rppcert_dataset_load(path_in("train.csv"), &reloaded));
  CHECK(rppcert_dataset_poisoned_count(reloaded) == 20);
  CHECK(strcmp(rppcert_dataset_checksum(reloaded), rppcert_dataset_checksum(train)) == 0);
  CHECK_OK(rppcert_dataset_trigger(reloaded, &trig));
  CHECK(trig.target_l2 == 30.0);

  rppcert_train_options_init(&t);
  t.epochs = 40;
  CHECK_OK(rppcert_model_train(reloaded, &t, &model));
  CHECK(rppcert_model_train_accuracy(model) > 0.5);
  CHECK_OK(rppcert_eval_attack(model, test, &trig, &atk));
  CHECK(atk.asr > 0.9);

  rppcert_noise_options_init(&n);
  CHECK_OK(rppcert_oracle_from_model(model, RPPCERT_SPV_SOFT, &oracle));
  CHECK_OK(rppcert_score_dataset(oracle, calib, &n, &cal_scores));
  CHECK_OK(rppcert_score_dataset(oracle, reloaded, &n, &train_scores));
  CHECK(rppcert_scores_size(train_scores) == rppcert_dataset_size(reloaded));

  CHECK(rppcert_calibrate(cal_scores, 0.999, &profile) == RPPCERT_E_PRECONDITION);
  CHECK(strstr(rppcert_last_error(), "alpha >= n/(n+1)") != NULL);
  CHECK_OK(rppcert_calibrate(cal_scores, 0.05, &profile));
  CHECK_OK(rppcert_profile_info_get(profile, &info));
  CHECK(info.n == 40);
  CHECK(info.k == 3);
  CHECK(fabs(info.fpr_upper - (0.05 + 1.0 / 41.0)) < 1e-12);

  CHECK_OK(rppcert_detect(train_scores, profile, 0, &verdicts));
  CHECK_OK(rppcert_eval_detection(verdicts, reloaded, &det));
  CHECK(det.tp + det.fn == 20);
  CHECK(det.fp + det.tn == rppcert_dataset_size(reloaded) - 20);
  CHECK(det.tpr_defined && det.tpr == det.tp / 20.0);
  CHECK(det.tp + det.fp == rppcert_verdicts_flagged(verdicts));
  CHECK_OK(rppcert_verdicts_save(verdicts, path_in("verdicts.csv")));

  {
    rppcert_noise_options other = n;
    rppcert_scores* mismatched = NULL;
    rppcert_verdicts* v2 = NULL;
    other.sigma = 0.5;
    CHECK_OK(rppcert_score_dataset(oracle, calib, &other, &mismatched));
    CHECK(rppcert_detect(mismatched, profile, 0, &v2) == RPPCERT_E_PROVENANCE);
    CHECK_OK(rppcert_detect(mismatched, profile, 1, &v2));
    rppcert_verdicts_free(v2);
    rppcert_scores_free(mismatched);
  }

  CHECK_OK(rppcert_dataset_subset(reloaded, RPPCERT_SUBSET_POISONED, &bad));
  rppcert_certify_options_init(&c);
  CHECK_OK(rppcert_certify_dataset(oracle, bad, profile, &n, &c, trig.target_l2, &certs));
  CHECK(rppcert_certificates_size(certs) == 20);
  CHECK(rppcert_certificates_count(certs, RPPCERT_VERDICT_GUARANTEED) +
            rppcert_certificates_count(certs, RPPCERT_VERDICT_UNGUARANTEED) ==
        20);
  CHECK_OK(rppcert_certificates_save(certs, path_in("certs.jsonl")));

  rppcert_certificates_free(certs);
  rppcert_dataset_free(bad);
  rppcert_verdicts_free(verdicts);
  rppcert_profile_free(profile);
  rppcert_scores_free(train_scores);
  rppcert_scores_free(cal_scores);
  rppcert_oracle_free(oracle);
  rppcert_model_free(model);
  rppcert_dataset_free(reloaded);
  rppcert_dataset_free(test);
  rppcert_dataset_free(calib);
  rppcert_dataset_free(train);
  rppcert_dataset_free(poisoned);
  rppcert_dataset_free(full);
}

static void test_validators(void) {
  rppcert_report* r = NULL;
  double ks = 0.0;
  const char* text;
  CHECK_OK(rppcert_validate_coverage("uniform", 100, 0.05, 1000, 3, &r));
  CHECK(rppcert_report_passed(r));
  CHECK_OK(rppcert_report_metric(r, "ks_statistic", &ks));
  CHECK(ks == rppcert_report_observed(r));
  CHECK(rppcert_report_metric(r, "nope", &ks) == RPPCERT_E_INVALID_ARGUMENT);
  text = rppcert_report_render(r, RPPCERT_FORMAT_JSON);
  CHECK(text != NULL && strstr(text, "schema_version") != NULL);
  text = rppcert_report_render(r, RPPCERT_FORMAT_CSV);
  CHECK(text != NULL && strncmp(text, "# rppcert", 9) == 0);
  rppcert_report_free(r);

  CHECK(rppcert_validate_coverage("discrete", 100, 0.05, 10, 3, &r) == RPPCERT_E_PRECONDITION);
  /* Freeing NULL handles is a no-op. */
  rppcert_report_free(NULL);
  rppcert_dataset_free(NULL);
}

int main(void) {
  test_errors();
  test_analytic();
  test_pipeline();
  test_validators();
  printf("%d checks, %d failures\n", checks, failures);
  return failures == 0 ? 0 : 1;
}
