#include "rppcert/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_support.hpp"
#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/mathkit.hpp"

namespace rppcert {

using detail::json;

void CalibrationProfile::validate() const {
  if (n == 0 || scores.size() != n) throw InvalidArgument("profile: score count does not match n");
  if (!std::is_sorted(scores.begin(), scores.end())) {
    throw InvalidArgument("profile: calibration scores are not sorted");
  }
  if (k < 1 || k > n) throw InvalidArgument("profile: rank k outside [1, n]");
  if (k != std::max<std::size_t>(1, conformal_rank(alpha, n))) {
    throw InvalidArgument("profile: rank k does not match alpha and n");
  }
  if (q_hat != scores[k - 1]) throw InvalidArgument("profile: q_hat is not the k-th smallest score");
}

CalibrationProfile calibrate(std::vector<double> scores, double alpha) {
  if (scores.empty()) throw InvalidArgument("calibrate: no calibration scores");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("calibrate: alpha must lie in (0, 1)");
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidArgument("calibrate: non-finite calibration score");
  }
  const std::size_t n = scores.size();
  const std::size_t k = std::max<std::size_t>(1, conformal_rank(alpha, n));
  if (k > n) {
    throw PreconditionError("calibrate: alpha >= n/(n+1): threshold undefined (alpha=" +
                            io::format_double(alpha) + ", n=" + std::to_string(n) +
                            ", rank " + std::to_string(k) + " > n)");
  }
  std::sort(scores.begin(), scores.end());
  CalibrationProfile p;
  p.n = n;
  p.alpha = alpha;
  p.k = k;
  p.q_hat = scores[k - 1];
  p.scores = std::move(scores);
  return p;
}

CalibrationProfile calibrate(const std::vector<RppScore>& scores, double alpha) {
  if (scores.empty()) throw InvalidArgument("calibrate: no calibration scores");
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) {
    if (s.sigma != scores.front().sigma || s.draws != scores.front().draws) {
      throw ProvenanceError("calibrate: calibration scores mix noise settings (sample " +
                            std::to_string(s.sample_id) + ")");
    }
    values.push_back(s.value);
  }
  CalibrationProfile p = calibrate(std::move(values), alpha);
  p.sigma = scores.front().sigma;
  p.draws = scores.front().draws;
  p.seed = scores.front().seed;
  return p;
}

DetectionVerdict detect(const RppScore& score, const CalibrationProfile& profile, bool force) {
  if (!force && (score.sigma != profile.sigma || score.draws != profile.draws)) {
    throw ProvenanceError("detect: sample " + std::to_string(score.sample_id) + " was scored with sigma=" +
                          io::format_double(score.sigma) + ", J=" + std::to_string(score.draws) +
                          " but the profile uses sigma=" + io::format_double(profile.sigma) +
                          ", J=" + std::to_string(profile.draws));
  }
  return {score.sample_id, score.value, profile.q_hat, score.value <= profile.q_hat};
}

std::vector<DetectionVerdict> detect_all(const std::vector<RppScore>& scores,
                                         const CalibrationProfile& profile, bool force) {
  std::vector<DetectionVerdict> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(detect(s, profile, force));
  return out;
}

ConformalBounds theoretical_bounds(const CalibrationProfile& profile) {
  const double inv = 1.0 / static_cast<double>(profile.n + 1);
  return {std::min(1.0, 1.0 + inv - profile.alpha), profile.alpha + inv};
}

std::string profile_to_json(const CalibrationProfile& p) {
  json j = detail::schema_header("rppcert-calibration-profile");
  j["n"] = p.n;
  j["alpha"] = p.alpha;
  j["k"] = p.k;
  j["q_hat"] = p.q_hat;
  j["noise"] = {{"sigma", p.sigma}, {"J", p.draws}, {"seed", p.seed}};
  j["provenance"] = {{"dataset_checksum", p.dataset_checksum}, {"model_checksum", p.model_checksum}};
  const auto b = theoretical_bounds(p);
  j["bounds"] = {{"clean_pass_lower", b.clean_pass_lower}, {"fpr_upper", b.fpr_upper}};
  j["scores"] = p.scores;
  return j.dump(2) + "\n";
}

CalibrationProfile profile_from_json(const std::string& text) {
  const std::string what = "calibration profile";
  const json j = detail::parse_json(text, what);
  detail::check_schema(j, "rppcert-calibration-profile");
  CalibrationProfile p;
  p.n = detail::require<std::size_t>(j, "n", what);
  p.alpha = detail::require<double>(j, "alpha", what);
  p.k = detail::require<std::size_t>(j, "k", what);
  p.q_hat = detail::require<double>(j, "q_hat", what);
  p.scores = detail::require<std::vector<double>>(j, "scores", what);
  const auto noise = detail::require<json>(j, "noise", what);
  p.sigma = detail::require<double>(noise, "sigma", what + " noise");
  p.draws = detail::require<std::size_t>(noise, "J", what + " noise");
  p.seed = detail::require<std::uint64_t>(noise, "seed", what + " noise");
  if (j.contains("provenance")) {
    const auto& prov = j.at("provenance");
    p.dataset_checksum = prov.value("dataset_checksum", std::string{});
    p.model_checksum = prov.value("model_checksum", std::string{});
  }
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string(e.what()));
  }
  return p;
}

void save_profile(const CalibrationProfile& p, const std::filesystem::path& path) {
  io::write_atomic(path, profile_to_json(p));
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  return profile_from_json(io::read_file(path));
}

std::string verdicts_to_csv(const std::vector<DetectionVerdict>& verdicts) {
  std::string out = io::csv_schema_line("verdicts") + "\n";
  out += "sample_id,score,q_hat,flagged\n";
  for (const auto& v : verdicts) {
    out += std::to_string(v.sample_id) + "," + io::format_double(v.score) + "," +
           io::format_double(v.q_hat) + "," + (v.flagged ? "1" : "0") + "\n";
  }
  return out;
}

void save_verdicts(const std::vector<DetectionVerdict>& verdicts, const std::filesystem::path& path) {
  io::write_atomic(path, verdicts_to_csv(verdicts));
}

std::vector<DetectionVerdict> load_verdicts(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::vector<DetectionVerdict> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (io::trim(line).empty() || io::check_csv_schema_line(line, "verdicts")) continue;
    const auto cells = io::split_csv_line(line);
    if (!cells.empty() && io::trim(cells[0]) == "sample_id") continue;
    const std::string where = path.string() + " row " + std::to_string(row);
    if (cells.size() != 4) throw ParseError(where + ": expected 4 cells");
    DetectionVerdict v;
    v.sample_id = io::parse_u64(cells[0], where + " sample_id");
    v.score = io::parse_double(cells[1], where + " score");
    v.q_hat = io::parse_double(cells[2], where + " q_hat");
    const auto flag = io::trim(cells[3]);
    if (flag != "0" && flag != "1") throw ParseError(where + ": flagged must be 0 or 1");
    v.flagged = flag == "1";
    out.push_back(v);
  }
  return out;
}

}  // namespace rppcert
