#pragma once

// Certified detection interval for a triggered input:
//   R = sigma * (Phi^-1(p_x - zeta) - Phi^-1(pt_bar))
//   U = sigma * (Phi^-1(p_x)        - Phi^-1(pt_bar))
// Detection is reported as guaranteed when R <= ||delta||_2 <= U.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rppcert/classifier.hpp"
#include "rppcert/conformal.hpp"
#include "rppcert/rpp.hpp"

namespace rppcert {

struct CertificationInput {
  double p_x = 0.0;
  double zeta = 0.0;
  double pt_bar = 0.0;
  double sigma = 1.0;
  std::size_t y_t = 0;
  std::size_t n_t = 0;
  std::size_t draws = 0;
};

/// A bound that is either a number or undefined with a reason.
struct Bound {
  std::optional<double> value;
  std::string reason;
  bool defined() const { return value.has_value(); }
};

Bound certified_lower_bound(const CertificationInput& in);
Bound radius_upper_bound(const CertificationInput& in);

enum class Verdict { Guaranteed, Unguaranteed, Undefined };
const char* verdict_name(Verdict v);

struct Certificate {
  std::uint64_t sample_id = 0;
  CertificationInput input;
  Bound lower_R;
  Bound upper_U;
  std::optional<double> delta_l2;
  Verdict verdict = Verdict::Undefined;
  std::string reason;
  /// The majority vote among the noisy copies was tied.
  bool tie = false;
  SpvMode mode = SpvMode::Soft;
};

/// p_{y_t} at the triggered input (soft), or 1{argmax == y_t} (hard).
double estimate_p_x(const Oracle& oracle, std::span<const double> x_triggered, std::size_t y_t,
                    SpvMode mode = SpvMode::Soft);

struct MajorityEstimate {
  std::size_t y_t = 0;
  std::size_t n_t = 0;
  std::size_t draws = 0;
  double pt_bar = 0.0;
  bool tie = false;
  std::vector<std::size_t> counts;
};

/// Classifies J noisy copies of x (argmax label), takes the most frequent
/// class (ties to the smallest index) and its Clopper-Pearson upper bound.
MajorityEstimate estimate_pt_bar(const Oracle& oracle, std::span<const double> x,
                                 const NoiseConfig& cfg, double confidence,
                                 std::uint64_t sample_id = 0);

/// Fraction of J noisy copies whose y_t probability is strictly below the
/// y_t probability at x_triggered.
double check_assumption_a1(const Oracle& oracle, std::span<const double> x_triggered, std::size_t y_t,
                           const NoiseConfig& cfg, std::uint64_t sample_id = 0,
                           SpvMode mode = SpvMode::Soft);

struct CertifyOptions {
  double confidence = 0.95;
  SpvMode mode = SpvMode::Soft;
  /// Skip the sigma/J agreement check between profile and noise config.
  bool force = false;
};

/// zeta is the profile's q_hat. Without delta_l2 the interval is reported
/// and the verdict is Undefined.
Certificate certify_sample(const Oracle& oracle, std::span<const double> x_triggered,
                           std::optional<double> delta_l2, const CalibrationProfile& profile,
                           const NoiseConfig& cfg, const CertifyOptions& opts = {},
                           std::uint64_t sample_id = 0);

/// Verdict from an already assembled input.
Certificate assemble_certificate(const CertificationInput& in, std::optional<double> delta_l2);

/// One JSON object per line, after a schema header line.
std::string certificate_to_json(const Certificate& c);
std::string certificates_to_jsonl(const std::vector<Certificate>& certs);

}  // namespace rppcert
