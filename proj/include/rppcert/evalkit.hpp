#pragma once

// Detection and attack metrics, and statistical validators for the
// conformal bounds, the coverage law, the eRPP estimator, the noise
// monotonicity premise and the imbalance trend.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rppcert/classifier.hpp"
#include "rppcert/conformal.hpp"
#include "rppcert/datagen.hpp"
#include "rppcert/rng.hpp"
#include "rppcert/rpp.hpp"

namespace rppcert {

struct GroundTruth {
  std::uint64_t sample_id = 0;
  bool poisoned = false;
};

struct DetectionReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  /// Undefined (nullopt) when the denominator is zero.
  std::optional<double> tpr;
  std::optional<double> fpr;
};

/// Verdicts and truth must list the same ids in the same order.
DetectionReport tpr_fpr(const std::vector<DetectionVerdict>& verdicts,
                        const std::vector<GroundTruth>& truth);

struct AttackReport {
  double asr = 0.0;
  double acc = 0.0;
  std::size_t asr_samples = 0;
  std::size_t acc_samples = 0;
};

/// ASR over test samples whose label is not the target, each stamped with
/// the rendered trigger; ACC over the unmodified test set.
AttackReport attack_metrics(const ModelParams& model, const Dataset& clean_test,
                            const TriggerSpec& trigger);

struct ValidationReport {
  std::string name;
  std::size_t trials = 0;
  double observed = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  /// "<=" when observed must not exceed bound + slack, ">=" for the reverse.
  std::string comparison = "<=";
  bool passed = false;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> notes;

  double metric(const std::string& key) const;
};

std::string report_to_json(const ValidationReport& r);
/// `key,value` rows: the headline fields, then metrics, then config.
std::string report_to_csv(const ValidationReport& r);

/// T trials: draw n calibration scores without replacement from the pool,
/// compute q_hat, and measure the flagged fraction of the remaining pool.
/// observed = 0.95-quantile of the trial FPRs; bound = alpha + 1/(n+1).
ValidationReport validate_fpr_bound(const std::vector<double>& pool, std::size_t n, double alpha,
                                    std::size_t trials, std::uint64_t seed, double slack = 0.01);

/// Score distribution with a known CDF.
struct ScoreSampler {
  std::string name;
  std::function<double(rng::Stream&)> draw;
  std::function<double(double)> cdf;
  bool continuous = true;
};

/// uniform, normal, exponential (continuous) and discrete (three mass
/// points, rejected by the coverage validator).
ScoreSampler make_sampler(const std::string& name);

/// Each trial draws n scores, computes q_hat and records Z = F(q_hat). The T
/// values are KS-tested against Beta(k, n+1-k) at the 1% level.
ValidationReport validate_coverage_beta(const ScoreSampler& sampler, std::size_t n, double alpha,
                                        std::size_t trials, std::uint64_t seed);

struct OracleGridPoint {
  std::vector<double> x;
  double sigma = 1.0;
};

/// At every point, |eRPP(J_mc) - exact| <= 3 * sd / sqrt(J_mc) (with an
/// absolute floor of 1e-12 for degenerate draws).
ValidationReport validate_erpp_oracle(const AnalyticLinearOracle& oracle,
                                      const std::vector<OracleGridPoint>& grid, std::size_t j_mc,
                                      std::uint64_t seed);

/// Random grid of `points` inputs with margins in [-3, 3] and sigma in
/// [0.1, 3]; the first point is the decision boundary with sigma = 1.
std::vector<OracleGridPoint> random_oracle_grid(const AnalyticLinearOracle& oracle, std::size_t points,
                                                std::uint64_t seed);

/// A sample satisfies the premise when every noisy copy lowers its target
/// probability. observed = share of satisfying samples, passed iff
/// observed >= min_rate.
ValidationReport validate_a1(const Oracle& oracle, const std::vector<std::vector<double>>& triggered,
                             std::size_t y_t, const NoiseConfig& cfg, double min_rate = 0.95,
                             SpvMode mode = SpvMode::Soft);

struct TrendConfig {
  /// Class layout of the source population; per_class and seed are set
  /// per run from imbalance.n_max, test_per_class and the seed list.
  BlobSpec base;
  ImbalanceSpec imbalance;
  std::vector<double> rhos = {1.0, 100.0};
  std::size_t poison_count = 18;
  TriggerSpec trigger;
  SourcePolicy policy = SourcePolicy::MinorityOnly;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  TrainingConfig training;
  /// Clean balanced test samples per class.
  std::size_t test_per_class = 200;
  /// Also train an unpoisoned model per (rho, seed) and report its ASR as
  /// the null-attack baseline (informational; does not affect the verdict).
  bool measure_null = true;
};

/// Trains one model per (rho, seed) and measures ASR at the fixed poison
/// count. Passes iff the seed-averaged ASR is nondecreasing in rho.
ValidationReport imbalance_trend(const TrendConfig& cfg);

}  // namespace rppcert
