#pragma once

// Split-conformal threshold and the detection rule: a sample is flagged as
// poisoned when its score is at or below q_hat, the k-th smallest of n
// clean calibration scores with k = ceil(alpha * (n + 1)).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rppcert/rpp.hpp"

namespace rppcert {

struct CalibrationProfile {
  std::vector<double> scores;  // ascending
  std::size_t n = 0;
  double alpha = 0.05;
  std::size_t k = 0;
  double q_hat = 0.0;
  double sigma = 0.0;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  std::string dataset_checksum;
  std::string model_checksum;

  void validate() const;
};

struct DetectionVerdict {
  std::uint64_t sample_id = 0;
  double score = 0.0;
  double q_hat = 0.0;
  bool flagged = false;
};

struct ConformalBounds {
  double clean_pass_lower = 0.0;
  double fpr_upper = 0.0;
};

/// Throws InvalidArgument for empty scores, alpha outside (0,1), or
/// non-finite scores, and PreconditionError when k > n.
CalibrationProfile calibrate(std::vector<double> scores, double alpha);

/// Calibrates from RppScore records; every record must share sigma and J,
/// which are copied into the profile.
CalibrationProfile calibrate(const std::vector<RppScore>& scores, double alpha);

/// flagged <=> score <= q_hat. A score whose sigma or J differs from the
/// profile's is a ProvenanceError unless `force` is set.
DetectionVerdict detect(const RppScore& score, const CalibrationProfile& profile, bool force = false);
std::vector<DetectionVerdict> detect_all(const std::vector<RppScore>& scores,
                                         const CalibrationProfile& profile, bool force = false);

/// clean_pass_lower = min(1, 1 + 1/(n+1) - alpha), fpr_upper = alpha + 1/(n+1).
ConformalBounds theoretical_bounds(const CalibrationProfile& profile);

std::string profile_to_json(const CalibrationProfile& p);
CalibrationProfile profile_from_json(const std::string& text);
void save_profile(const CalibrationProfile& p, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

std::string verdicts_to_csv(const std::vector<DetectionVerdict>& verdicts);
void save_verdicts(const std::vector<DetectionVerdict>& verdicts, const std::filesystem::path& path);
std::vector<DetectionVerdict> load_verdicts(const std::filesystem::path& path);

}  // namespace rppcert
