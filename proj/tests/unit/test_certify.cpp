#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rppcert/certify.hpp"
#include "rppcert/error.hpp"
#include "rppcert/mathkit.hpp"
#include "rppcert/rng.hpp"

using namespace rppcert;

namespace {

CertificationInput input(double p_x, double zeta, double pt_bar, double sigma = 1.0) {
  CertificationInput in;
  in.p_x = p_x;
  in.zeta = zeta;
  in.pt_bar = pt_bar;
  in.sigma = sigma;
  return in;
}

// Returns `clean` at the triggered point and a fixed label for each of the
// noisy copies the certifier will generate, identified by exact match.
class ScriptedOracle final : public Oracle {
 public:
  ScriptedOracle(std::vector<double> x, ProbVector clean, const NoiseConfig& cfg, std::uint64_t id,
                 std::vector<std::size_t> copy_labels)
      : x_(std::move(x)), clean_(std::move(clean)), labels_(std::move(copy_labels)) {
    for (std::size_t j = 0; j < labels_.size(); ++j) {
      copies_.push_back(perturb(x_, noise_draw(cfg, rng::kCertifyCopies, id, j, x_.size()), cfg));
    }
  }
  std::size_t num_classes() const override { return clean_.size(); }
  std::size_t dim() const override { return x_.size(); }
  ProbVector spv(std::span<const double> x) const override {
    const std::vector<double> v(x.begin(), x.end());
    if (v == x_) return clean_;
    for (std::size_t j = 0; j < copies_.size(); ++j) {
      if (v == copies_[j]) {
        ProbVector p{std::vector<double>(clean_.size(), 0.0)};
        p.probs[labels_[j]] = 1.0;
        return p;
      }
    }
    throw InvalidArgument("scripted oracle: unexpected input");
  }

 private:
  std::vector<double> x_;
  ProbVector clean_;
  std::vector<std::size_t> labels_;
  std::vector<std::vector<double>> copies_;
};

CalibrationProfile profile_with(double q_hat, double sigma, std::size_t draws) {
  auto p = calibrate(std::vector<double>{q_hat}, 0.05);
  p.sigma = sigma;
  p.draws = draws;
  return p;
}

}  // namespace

TEST_CASE("certified lower bound reference values") {
  const auto r = certified_lower_bound(input(0.99, 0.05, 0.1));
  REQUIRE(r.defined());
  CHECK(std::fabs(*r.value - 2.8364) < 1e-4);
  CHECK(std::fabs(*r.value - (oracle::phi_inv(0.94) - oracle::phi_inv(0.1))) < 1e-8);

  const auto zero = certified_lower_bound(input(0.75, 0.25, 0.5));
  REQUIRE(zero.defined());
  CHECK(std::fabs(*zero.value) < 1e-12);

  const auto sat = certified_lower_bound(input(0.9, 0.05, 1.0));
  CHECK_FALSE(sat.defined());
  CHECK(sat.reason == "p̄_t saturated");

  const auto dom = certified_lower_bound(input(0.04, 0.05, 0.5));
  CHECK_FALSE(dom.defined());
  CHECK(dom.reason.find("out of") != std::string::npos);
}

TEST_CASE("radius upper bound reference values") {
  const auto u = radius_upper_bound(input(0.9, 0.0, 0.1));
  REQUIRE(u.defined());
  CHECK(std::fabs(*u.value - 2.5631) < 1e-4);
  CHECK(std::fabs(*u.value - 2.0 * oracle::phi_inv(0.9)) < 1e-8);

  const auto same = radius_upper_bound(input(0.3, 0.0, 0.3));
  REQUIRE(same.defined());
  CHECK(*same.value == 0.0);

  const auto inf = radius_upper_bound(input(1.0, 0.0, 0.3));
  CHECK_FALSE(inf.defined());
  CHECK(inf.reason.find("+") != std::string::npos);
}

TEST_CASE("both bounds scale linearly with sigma") {
  rng::Stream s(rng::derive(2, {2}));
  for (int i = 0; i < 200; ++i) {
    const double p_x = s.uniform(0.3, 0.999), zeta = s.uniform(0.0, 0.2), pt = s.uniform(0.01, 0.99);
    if (p_x - zeta <= 0.0) continue;
    const double sigma = s.uniform(0.01, 10.0);
    const auto r1 = certified_lower_bound(input(p_x, zeta, pt));
    const auto rs = certified_lower_bound(input(p_x, zeta, pt, sigma));
    const auto u1 = radius_upper_bound(input(p_x, zeta, pt));
    const auto us = radius_upper_bound(input(p_x, zeta, pt, sigma));
    CHECK(std::fabs(*rs.value - sigma * *r1.value) <= 1e-12 * std::max(1.0, std::fabs(*rs.value)));
    CHECK(std::fabs(*us.value - sigma * *u1.value) <= 1e-12 * std::max(1.0, std::fabs(*us.value)));
    CHECK(*r1.value <= *u1.value);
  }
}

TEST_CASE("interval verdicts") {
  auto in = input(0.99, 0.05, 0.1);
  CHECK(assemble_certificate(in, 2.7).verdict == Verdict::Unguaranteed);
  CHECK(assemble_certificate(in, 2.7).reason == "below certified radius");
  in.p_x = 0.999;
  const auto c = assemble_certificate(in, 3.0);
  CHECK(c.verdict == Verdict::Guaranteed);
  CHECK(assemble_certificate(in, 10.0).reason == "above radius upper bound");
  CHECK(assemble_certificate(in, std::nullopt).verdict == Verdict::Undefined);
  CHECK_THROWS_AS(assemble_certificate(in, 0.0), InvalidArgument);
  in.pt_bar = 1.0;
  const auto sat = assemble_certificate(in, 3.0);
  CHECK(sat.verdict == Verdict::Unguaranteed);
  CHECK(sat.reason == "p̄_t saturated");
}

TEST_CASE("p(x) estimate") {
  const AnalyticLinearOracle o({1.0, 1.0}, 0.0, 1.0);
  const std::vector<double> on_plane = {0.5, -0.5};
  CHECK(estimate_p_x(o, on_plane, 1) == 0.5);
  const std::vector<double> pos = {2.0, 0.0};
  CHECK(estimate_p_x(o, pos, 1, SpvMode::Hard) == 1.0);
  CHECK(estimate_p_x(o, pos, 0, SpvMode::Hard) == 0.0);

  NoiseConfig cfg{1.0, 2, 0, std::nullopt};
  const ScriptedOracle soft({0.0}, ProbVector{{0.9, 0.1}}, cfg, 0, {1, 1});
  CHECK(std::fabs(estimate_p_x(soft, std::vector<double>{0.0}, 0) - 0.9) < 1e-15);
}

TEST_CASE("majority vote over noisy copies") {
  NoiseConfig cfg{1.0, 3, 4, std::nullopt};
  const std::vector<double> x = {0.1, 0.2};
  const ScriptedOracle all2(x, ProbVector{{0.1, 0.1, 0.8}}, cfg, 7, {2, 2, 2});
  auto e = estimate_pt_bar(all2, x, cfg, 0.95, 7);
  CHECK(e.y_t == 2);
  CHECK(e.n_t == 3);
  CHECK(e.pt_bar == 1.0);

  const ScriptedOracle two_one(x, ProbVector{{0.5, 0.5, 0.0}}, cfg, 7, {0, 1, 0});
  e = estimate_pt_bar(two_one, x, cfg, 0.95, 7);
  CHECK(e.y_t == 0);
  CHECK(e.n_t == 2);
  CHECK(std::fabs(e.pt_bar - 0.9830) < 1e-4);
  CHECK(std::fabs(e.pt_bar - oracle::clopper_pearson_grid(2, 3, 0.95)) < 2e-6);
  CHECK_FALSE(e.tie);

  NoiseConfig two{1.0, 2, 4, std::nullopt};
  const ScriptedOracle tied(x, ProbVector{{0.5, 0.5, 0.0}}, two, 7, {2, 1});
  e = estimate_pt_bar(tied, x, two, 0.95, 7);
  CHECK(e.y_t == 1);
  CHECK(e.tie);
}

TEST_CASE("scripted fixture with R = 1 and U = 3") {
  NoiseConfig cfg{1.0, 3, 11, std::nullopt};
  const double pt_bar = binom_upper_conf(2, 3, 0.95);
  const double a = oracle::phi_inv(pt_bar);
  const double p_x = oracle::phi(3.0 + a);
  const double zeta = p_x - oracle::phi(1.0 + a);
  const std::vector<double> x = {0.0, 1.0, 2.0};
  const ScriptedOracle o(x, ProbVector{{p_x, 1.0 - p_x}}, cfg, 5, {0, 1, 0});
  const auto profile = profile_with(zeta, 1.0, 3);

  auto c = certify_sample(o, x, 2.0, profile, cfg, {}, 5);
  REQUIRE(c.lower_R.defined());
  REQUIRE(c.upper_U.defined());
  CHECK(std::fabs(*c.lower_R.value - 1.0) < 1e-6);
  CHECK(std::fabs(*c.upper_U.value - 3.0) < 1e-6);
  CHECK(c.verdict == Verdict::Guaranteed);
  CHECK(c.input.y_t == 0);
  CHECK(c.input.n_t == 2);

  c = certify_sample(o, x, 0.5, profile, cfg, {}, 5);
  CHECK(c.verdict == Verdict::Unguaranteed);
  CHECK(c.reason == "below certified radius");

  const ScriptedOracle saturated(x, ProbVector{{p_x, 1.0 - p_x}}, cfg, 5, {0, 0, 0});
  c = certify_sample(saturated, x, 2.0, profile, cfg, {}, 5);
  CHECK(c.verdict == Verdict::Unguaranteed);
  CHECK(c.reason == "p̄_t saturated");

  NoiseConfig other = cfg;
  other.sigma = 0.5;
  CHECK_THROWS_AS(certify_sample(o, x, 2.0, profile, other, {}, 5), ProvenanceError);
}

TEST_CASE("noise-monotonicity check") {
  class Flat final : public Oracle {
   public:
    std::size_t num_classes() const override { return 2; }
    std::size_t dim() const override { return 2; }
    ProbVector spv(std::span<const double>) const override { return {{0.3, 0.7}}; }
  } flat;
  NoiseConfig cfg{1.0, 50, 0, std::nullopt};
  const std::vector<double> x = {0.0, 0.0};
  CHECK(check_assumption_a1(flat, x, 1, cfg) == 0.0);

  // For the analytic oracle only the projected noise matters, and it lowers
  // p_1 exactly when it points towards the hyperplane: probability 1/2.
  const AnalyticLinearOracle o({1.0, 0.0}, 0.0, 1.0);
  const std::vector<double> far = {3.0, 0.0};
  NoiseConfig many{1.0, 20000, 3, std::nullopt};
  const double frac = check_assumption_a1(o, far, 1, many);
  CHECK(std::fabs(frac - 0.5) <= 3 * std::sqrt(0.25 / 20000));

  // With hard labels a copy only counts when it crosses the hyperplane.
  const double hard = check_assumption_a1(o, far, 1, many, 0, SpvMode::Hard);
  CHECK(std::fabs(hard - oracle::phi(-3.0)) <= 3 * std::sqrt(oracle::phi(-3.0) / 20000) + 1e-4);
}

TEST_CASE("certificate JSON") {
  auto c = assemble_certificate(input(0.9, 0.05, 1.0), 1.5);
  c.sample_id = 12;
  const auto line = certificate_to_json(c);
  CHECK(line.find("\"lower_R\":null") != std::string::npos);
  CHECK(line.find("\"verdict\":\"unguaranteed\"") != std::string::npos);
  CHECK(line.find("\"sample_id\":12") != std::string::npos);
  const auto doc = certificates_to_jsonl({c, c});
  CHECK(doc.find("schema_version") < doc.find('\n'));
  CHECK(std::count(doc.begin(), doc.end(), '\n') == 3);
}
