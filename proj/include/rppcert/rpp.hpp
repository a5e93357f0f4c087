#pragma once

// Randomized probability perturbation: the expected L-infinity change of a
// classifier's probability vector under isotropic Gaussian input noise,
// its J-sample Monte Carlo estimate, and an exact quadrature evaluation for
// the analytic linear oracle.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rppcert/classifier.hpp"

namespace rppcert {

struct NoiseConfig {
  double sigma = 1.0;
  std::size_t draws = 3;
  std::uint64_t master_seed = 0;
  /// Clip noisy inputs to [lo, hi] before evaluating the oracle.
  std::optional<std::pair<double, double>> clip;

  void validate() const;
};

struct RppScore {
  std::uint64_t sample_id = 0;
  double value = 0.0;
  std::size_t draws = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// max_y |a_y - b_y|.
double spv_distance(const ProbVector& a, const ProbVector& b);

/// The j-th noise vector of sample `sample_id`, N(0, sigma^2 I) in `dim`
/// dimensions, keyed by (master_seed, sample_id, j) within `domain`.
std::vector<double> noise_draw(const NoiseConfig& cfg, std::uint64_t domain, std::uint64_t sample_id,
                               std::size_t j, std::size_t dim);

/// x + eps, clipped when cfg.clip is set.
std::vector<double> perturb(std::span<const double> x, std::span<const double> eps,
                            const NoiseConfig& cfg);

/// (1/J) sum_j ||p(x) - p(x + eps_j)||_inf.
RppScore erpp(const Oracle& oracle, std::span<const double> x, const NoiseConfig& cfg,
              std::uint64_t sample_id);

struct ScoringItem {
  std::uint64_t sample_id = 0;
  std::span<const double> features;
};

/// Scores every item; output order matches input order and values do not
/// depend on `workers`. Errors are rethrown with the sample id attached.
std::vector<RppScore> erpp_batch(const Oracle& oracle, std::span<const ScoringItem> items,
                                 const NoiseConfig& cfg, unsigned workers = 1);

std::vector<RppScore> erpp_dataset(const Oracle& oracle, const Dataset& data, const NoiseConfig& cfg,
                                   unsigned workers = 1);

/// Scores from a probability table: each id's first row against each later
/// row. sigma and seed are recorded from cfg; J is the number of noisy rows.
std::vector<RppScore> erpp_from_table(const ProbabilityTable& table, const NoiseConfig& cfg);

/// Exact RPP of the analytic oracle at x. Only the projection of the noise
/// on the oracle direction matters, so this is a 1-D Gaussian expectation
/// evaluated by adaptive Gauss-Kronrod on [-8, 8] (abs. error <= 1e-10).
double rpp_exact_analytic(const AnalyticLinearOracle& oracle, std::span<const double> x, double sigma);

/// The same expectation parametrised by the standardized margin
/// t = margin / |w| and the two scales.
double rpp_exact_from_margin(double margin_over_norm, double sigma0, double sigma);

/// Sample standard deviation of the per-draw distances (for MC error bars).
struct ErppDetail {
  RppScore score;
  double draw_stddev = 0.0;
};
ErppDetail erpp_with_spread(const Oracle& oracle, std::span<const double> x, const NoiseConfig& cfg,
                            std::uint64_t sample_id);

void save_scores(const std::vector<RppScore>& scores, const std::filesystem::path& path);
std::vector<RppScore> load_scores(const std::filesystem::path& path);
std::string scores_to_csv(const std::vector<RppScore>& scores);

}  // namespace rppcert
