#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "rppcert/conformal.hpp"
#include "rppcert/error.hpp"
#include "rppcert/mathkit.hpp"
#include "rppcert/rng.hpp"

using namespace rppcert;
namespace fs = std::filesystem;

namespace {

std::vector<double> uniform_scores(std::size_t n, std::uint64_t seed) {
  rng::Stream s(rng::derive(seed, {42}));
  std::vector<double> v(n);
  for (auto& x : v) x = s.uniform();
  return v;
}

}  // namespace

TEST_CASE("threshold rank and value") {
  auto scores = uniform_scores(100, 1);
  const auto p = calibrate(scores, 0.05);
  CHECK(p.k == 6);
  std::sort(scores.begin(), scores.end());
  CHECK(p.q_hat == scores[5]);

  const auto one = calibrate(std::vector<double>{0.37}, 0.05);
  CHECK(one.k == 1);
  CHECK(one.q_hat == 0.37);

  CHECK(calibrate(std::vector<double>(50, 0.2), 0.1).q_hat == 0.2);
}

TEST_CASE("the threshold itself is flagged") {
  const auto p = calibrate(uniform_scores(100, 2), 0.05);
  CHECK(detect(RppScore{1, p.q_hat, 0, 0, 0}, p, true).flagged);
  CHECK_FALSE(detect(RppScore{1, p.q_hat + 1e-12, 0, 0, 0}, p, true).flagged);
}

TEST_CASE("calibration preconditions") {
  CHECK_THROWS_AS(calibrate(std::vector<double>{}, 0.05), InvalidArgument);
  CHECK_THROWS_AS(calibrate(uniform_scores(10, 1), 0.0), InvalidArgument);
  CHECK_THROWS_AS(calibrate(uniform_scores(10, 1), 1.0), InvalidArgument);
  CHECK_THROWS_AS(calibrate(std::vector<double>{0.1, NAN}, 0.5), InvalidArgument);
  try {
    calibrate(uniform_scores(100, 1), 0.999);
    FAIL("expected a precondition error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("alpha >= n/(n+1)") != std::string::npos);
  }
}

TEST_CASE("provenance checks") {
  std::vector<RppScore> cal;
  for (std::uint64_t i = 0; i < 20; ++i) cal.push_back({i, i / 20.0, 3, 1.0, 5});
  const auto p = calibrate(cal, 0.1);
  CHECK(p.sigma == 1.0);
  CHECK(p.draws == 3);
  CHECK_NOTHROW(detect(RppScore{99, 0.5, 3, 1.0, 5}, p));
  CHECK_THROWS_AS(detect(RppScore{99, 0.5, 3, 0.5, 5}, p), ProvenanceError);
  CHECK_THROWS_AS(detect(RppScore{99, 0.5, 10, 1.0, 5}, p), ProvenanceError);
  CHECK_NOTHROW(detect(RppScore{99, 0.5, 10, 0.5, 5}, p, true));
  cal[3].sigma = 2.0;
  CHECK_THROWS_AS(calibrate(cal, 0.1), ProvenanceError);
}

TEST_CASE("theoretical bounds") {
  const auto p = calibrate(uniform_scores(100, 3), 0.05);
  const auto b = theoretical_bounds(p);
  CHECK(b.fpr_upper == doctest::Approx(0.05 + 1.0 / 101));
  CHECK(std::fabs(b.fpr_upper - 0.0599) < 1e-4);
  CHECK(std::fabs(b.clean_pass_lower - 0.9599) < 1e-4);

  CalibrationProfile big;
  big.n = 1000000;
  big.alpha = 0.05;
  CHECK(std::fabs(theoretical_bounds(big).fpr_upper - 0.05) < 1e-6);
}

TEST_CASE("exactly k calibration scores are at or below the threshold") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    rng::Stream s(rng::derive(seed, {1}));
    const std::size_t n = 1 + s.below(300);
    const double alpha = s.uniform(0.01, 0.5);
    if (conformal_rank(alpha, n) > n) continue;
    auto scores = uniform_scores(n, seed);
    const auto p = calibrate(scores, alpha);
    const auto at_or_below = std::count_if(scores.begin(), scores.end(), [&](double v) { return v <= p.q_hat; });
    CHECK(static_cast<std::size_t>(at_or_below) == p.k);
  }
  std::vector<double> tied = {0.1, 0.2, 0.2, 0.2, 0.9};
  const auto p = calibrate(tied, 0.3);
  CHECK(p.k == 2);
  CHECK(std::count_if(tied.begin(), tied.end(), [&](double v) { return v <= p.q_hat; }) >= 2);
}

TEST_CASE("threshold and flagged set grow with alpha") {
  const auto scores = uniform_scores(200, 9);
  const auto test = uniform_scores(500, 10);
  double prev_q = -1;
  std::vector<bool> prev(test.size(), false);
  for (double alpha = 0.01; alpha < 0.99; alpha += 0.01) {
    const auto p = calibrate(scores, alpha);
    CHECK(p.q_hat >= prev_q);
    prev_q = p.q_hat;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const bool f = test[i] <= p.q_hat;
      if (prev[i]) CHECK(f);
      prev[i] = f;
    }
  }
}

TEST_CASE("profile and verdict persistence") {
  std::vector<RppScore> cal;
  for (std::uint64_t i = 0; i < 30; ++i) cal.push_back({i, (i * 7 % 30) / 31.0, 3, 0.5, 8});
  auto p = calibrate(cal, 0.1);
  p.dataset_checksum = "abc";
  const auto dir = fs::temp_directory_path() / "rppcert-unit";
  fs::create_directories(dir);
  save_profile(p, dir / "profile.json");
  const auto back = load_profile(dir / "profile.json");
  CHECK(back.q_hat == p.q_hat);
  CHECK(back.k == p.k);
  CHECK(back.scores == p.scores);
  CHECK(back.sigma == 0.5);
  CHECK(back.dataset_checksum == "abc");

  std::string text = profile_to_json(p);
  const auto pos = text.find("\"1.0\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 5, "\"2.0\"");
  CHECK_THROWS_AS(profile_from_json(text), ParseError);

  const auto v = detect_all(cal, p);
  save_verdicts(v, dir / "verdicts.csv");
  const auto vb = load_verdicts(dir / "verdicts.csv");
  REQUIRE(vb.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(vb[i].flagged == v[i].flagged);
    CHECK(vb[i].score == v[i].score);
  }
}
