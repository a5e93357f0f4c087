#include "rppcert/certify.hpp"

#include <algorithm>
#include <cmath>

#include "json_support.hpp"
#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/mathkit.hpp"
#include "rppcert/rng.hpp"

namespace rppcert {

using detail::json;

namespace {

bool in_open_unit(double p) { return p > 0.0 && p < 1.0; }

// The shared Phi^-1(pt_bar) term; a saturated bound cannot be inverted.
std::optional<std::string> pt_bar_problem(double pt_bar) {
  if (pt_bar >= 1.0) return std::string("p̄_t saturated");
  if (!(pt_bar > 0.0)) return std::string("p̄_t out of Φ⁻¹ domain");
  return std::nullopt;
}

}  // namespace

Bound certified_lower_bound(const CertificationInput& in) {
  const double arg = in.p_x - in.zeta;
  if (!in_open_unit(arg)) return {std::nullopt, "p(x) − ζ out of Φ⁻¹ domain"};
  if (auto why = pt_bar_problem(in.pt_bar)) return {std::nullopt, *why};
  return {in.sigma * (inv_norm_cdf(arg) - inv_norm_cdf(in.pt_bar)), ""};
}

Bound radius_upper_bound(const CertificationInput& in) {
  if (!in_open_unit(in.p_x)) {
    return {std::nullopt, in.p_x >= 1.0 ? "p(x) = 1: upper bound is +∞" : "p(x) out of Φ⁻¹ domain"};
  }
  if (auto why = pt_bar_problem(in.pt_bar)) return {std::nullopt, *why};
  return {in.sigma * (inv_norm_cdf(in.p_x) - inv_norm_cdf(in.pt_bar)), ""};
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Guaranteed:
      return "guaranteed";
    case Verdict::Unguaranteed:
      return "unguaranteed";
    case Verdict::Undefined:
      break;
  }
  return "undefined";
}

double estimate_p_x(const Oracle& oracle, std::span<const double> x_triggered, std::size_t y_t,
                    SpvMode mode) {
  if (y_t >= oracle.num_classes()) {
    throw InvalidArgument("estimate_p_x: target class " + std::to_string(y_t) + " out of range");
  }
  if (x_triggered.size() != oracle.dim()) throw InvalidArgument("estimate_p_x: dimension mismatch");
  const ProbVector p = oracle.spv(x_triggered);
  if (mode == SpvMode::Hard) return p.argmax() == y_t ? 1.0 : 0.0;
  return p[y_t];
}

MajorityEstimate estimate_pt_bar(const Oracle& oracle, std::span<const double> x,
                                 const NoiseConfig& cfg, double confidence, std::uint64_t sample_id) {
  cfg.validate();
  if (x.size() != oracle.dim()) throw InvalidArgument("estimate_pt_bar: dimension mismatch");
  MajorityEstimate est;
  est.draws = cfg.draws;
  est.counts.assign(oracle.num_classes(), 0);
  for (std::size_t j = 0; j < cfg.draws; ++j) {
    const auto eps = noise_draw(cfg, rng::kCertifyCopies, sample_id, j, x.size());
    ++est.counts[oracle.spv(perturb(x, eps, cfg)).argmax()];
  }
  const auto top = std::max_element(est.counts.begin(), est.counts.end());
  est.y_t = static_cast<std::size_t>(top - est.counts.begin());
  est.n_t = *top;
  est.tie = std::count(est.counts.begin(), est.counts.end(), est.n_t) > 1;
  est.pt_bar = binom_upper_conf(est.n_t, est.draws, confidence);
  return est;
}

double check_assumption_a1(const Oracle& oracle, std::span<const double> x_triggered, std::size_t y_t,
                           const NoiseConfig& cfg, std::uint64_t sample_id, SpvMode mode) {
  cfg.validate();
  const double base = estimate_p_x(oracle, x_triggered, y_t, mode);
  std::size_t below = 0;
  for (std::size_t j = 0; j < cfg.draws; ++j) {
    const auto eps = noise_draw(cfg, rng::kAssumption, sample_id, j, x_triggered.size());
    if (estimate_p_x(oracle, perturb(x_triggered, eps, cfg), y_t, mode) < base) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(cfg.draws);
}

Certificate assemble_certificate(const CertificationInput& in, std::optional<double> delta_l2) {
  Certificate c;
  c.input = in;
  c.lower_R = certified_lower_bound(in);
  c.upper_U = radius_upper_bound(in);
  c.delta_l2 = delta_l2;
  if (!delta_l2) {
    c.verdict = Verdict::Undefined;
    c.reason = "no trigger norm supplied; interval only";
    return c;
  }
  if (!(*delta_l2 > 0.0)) throw InvalidArgument("certify: delta_l2 must be positive");
  c.verdict = Verdict::Unguaranteed;
  if (!c.lower_R.defined()) {
    c.reason = c.lower_R.reason;
  } else if (!c.upper_U.defined()) {
    c.reason = c.upper_U.reason;
  } else if (*delta_l2 < *c.lower_R.value) {
    c.reason = "below certified radius";
  } else if (*delta_l2 > *c.upper_U.value) {
    c.reason = "above radius upper bound";
  } else {
    c.verdict = Verdict::Guaranteed;
  }
  return c;
}

Certificate certify_sample(const Oracle& oracle, std::span<const double> x_triggered,
                           std::optional<double> delta_l2, const CalibrationProfile& profile,
                           const NoiseConfig& cfg, const CertifyOptions& opts,
                           std::uint64_t sample_id) {
  if (!opts.force && (cfg.sigma != profile.sigma || cfg.draws != profile.draws)) {
    throw ProvenanceError("certify: noise config (sigma=" + io::format_double(cfg.sigma) +
                          ", J=" + std::to_string(cfg.draws) +
                          ") does not match the calibration profile (sigma=" +
                          io::format_double(profile.sigma) + ", J=" + std::to_string(profile.draws) +
                          ")");
  }
  const MajorityEstimate est = estimate_pt_bar(oracle, x_triggered, cfg, opts.confidence, sample_id);
  CertificationInput in;
  in.y_t = est.y_t;
  in.n_t = est.n_t;
  in.draws = est.draws;
  in.pt_bar = est.pt_bar;
  in.sigma = cfg.sigma;
  in.zeta = profile.q_hat;
  in.p_x = estimate_p_x(oracle, x_triggered, est.y_t, opts.mode);
  Certificate c = assemble_certificate(in, delta_l2);
  c.sample_id = sample_id;
  c.tie = est.tie;
  c.mode = opts.mode;
  return c;
}

std::string certificate_to_json(const Certificate& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["sample_id"] = c.sample_id;
  j["p_x"] = c.input.p_x;
  j["zeta"] = c.input.zeta;
  j["y_t"] = c.input.y_t;
  j["n_t"] = c.input.n_t;
  j["J"] = c.input.draws;
  j["pt_bar"] = c.input.pt_bar;
  j["sigma"] = c.input.sigma;
  j["lower_R"] = opt(c.lower_R.value);
  j["upper_U"] = opt(c.upper_U.value);
  j["delta_l2"] = opt(c.delta_l2);
  j["verdict"] = verdict_name(c.verdict);
  j["reason"] = c.reason;
  j["tie"] = c.tie;
  j["spv_mode"] = c.mode == SpvMode::Soft ? "soft" : "hard";
  return j.dump();
}

std::string certificates_to_jsonl(const std::vector<Certificate>& certs) {
  json head = detail::schema_header("rppcert-certificates");
  std::string out = head.dump() + "\n";
  for (const auto& c : certs) out += certificate_to_json(c) + "\n";
  return out;
}

}  // namespace rppcert
