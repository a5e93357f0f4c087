#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rppcert/classifier.hpp"
#include "rppcert/datagen.hpp"
#include "rppcert/error.hpp"
#include "rppcert/rng.hpp"
#include "rppcert/rpp.hpp"

using namespace rppcert;
namespace fs = std::filesystem;

namespace {

class ConstantOracle final : public Oracle {
 public:
  std::size_t num_classes() const override { return 3; }
  std::size_t dim() const override { return 4; }
  ProbVector spv(std::span<const double>) const override { return {{0.2, 0.5, 0.3}}; }
};

std::shared_ptr<const ModelOracle> small_model() {
  BlobSpec b;
  b.num_classes = 3;
  b.dim = 6;
  b.per_class = {60};
  b.separation = 3.0;
  b.seed = 2;
  TrainingConfig cfg;
  cfg.seed = 5;
  return std::make_shared<const ModelOracle>(std::make_shared<const ModelParams>(train(make_blobs(b), cfg)));
}

const AnalyticLinearOracle& unit_oracle() {
  static const AnalyticLinearOracle o({1.0, 0.0}, 0.0, 1.0);
  return o;
}

}  // namespace

TEST_CASE("spv_distance") {
  const ProbVector a{{0.9, 0.1}}, b{{0.6, 0.4}};
  CHECK(spv_distance(a, a) == 0.0);
  CHECK(spv_distance(ProbVector{{1, 0}}, ProbVector{{0, 1}}) == 1.0);
  CHECK(spv_distance(a, b) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(spv_distance(a, ProbVector{{1, 0, 0}}), Error);
}

TEST_CASE("a constant oracle scores zero") {
  const ConstantOracle o;
  const std::vector<double> x = {1, 2, 3, 4};
  for (double sigma : {0.01, 1.0, 50.0}) {
    for (std::size_t j : {1u, 3u, 40u}) {
      NoiseConfig cfg{sigma, j, 3, std::nullopt};
      CHECK(erpp(o, x, cfg, 0).value == 0.0);
    }
  }
}

TEST_CASE("boundary point of the analytic oracle") {
  const std::vector<double> x = {0.0, 5.0};
  NoiseConfig cfg{1.0, 100000, 17, std::nullopt};
  CHECK(std::fabs(erpp(unit_oracle(), x, cfg, 0).value - 0.25) <= 0.005);
  CHECK(std::fabs(rpp_exact_analytic(unit_oracle(), x, 1.0) - 0.25) <= 1e-8);
  CHECK(rpp_exact_analytic(unit_oracle(), x, 1e-6) < 1e-5);
}

TEST_CASE("exact RPP agrees with an independent Simpson integration") {
  for (double t : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
    for (double s0 : {0.3, 1.0, 2.0}) {
      for (double s : {0.1, 1.0, 2.7}) {
        CAPTURE(t);
        CAPTURE(s0);
        CAPTURE(s);
        CHECK(std::fabs(rpp_exact_from_margin(t, s0, s) - oracle::rpp_exact_simpson(t, s0, s)) < 1e-9);
      }
    }
  }
}

TEST_CASE("exact RPP is nondecreasing in sigma at the boundary") {
  double prev = 0.0;
  for (int i = 1; i <= 60; ++i) {
    const double v = rpp_exact_from_margin(0.0, 1.0, i * 0.05);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("quadrature and Monte Carlo agree away from the boundary") {
  const AnalyticLinearOracle o({2.0, -1.0}, 0.5, 0.8);
  const std::vector<double> x = {0.3, 0.2};
  NoiseConfig cfg{1.3, 1000000, 99, std::nullopt};
  const auto mc = erpp_with_spread(o, x, cfg, 4);
  const double se = mc.draw_stddev / std::sqrt(1e6);
  CHECK(std::fabs(mc.score.value - rpp_exact_analytic(o, x, 1.3)) <= 3 * se);
}

TEST_CASE("tiny noise on a smooth model gives tiny scores") {
  const auto m = small_model();
  rng::Stream s(rng::derive(4, {4}));
  NoiseConfig cfg{1e-4, 3, 0, std::nullopt};
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(6);
    for (auto& v : x) v = s.normal(0.5, 3.0);
    CHECK(erpp(*m, x, cfg, i).value < 1e-3);
  }
}

TEST_CASE("scores lie in the unit interval") {
  const auto m = small_model();
  rng::Stream s(rng::derive(6, {6}));
  for (int i = 0; i < 300; ++i) {
    std::vector<double> x(6);
    for (auto& v : x) v = s.normal(0.0, 10.0);
    NoiseConfig cfg{s.uniform(0.01, 20.0), 1 + s.below(5), 1, std::nullopt};
    const double v = erpp(*m, x, cfg, i).value;
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("the score is the mean over draws regardless of draw order") {
  const auto m = small_model();
  const std::vector<double> x = {0.1, 0.4, -1, 2, 0, 3};
  NoiseConfig cfg{1.5, 7, 12, std::nullopt};
  std::vector<double> d;
  const auto clean = m->spv(x);
  for (std::size_t j = 0; j < 7; ++j) {
    const auto eps = noise_draw(cfg, rng::kScoring, 9, j, 6);
    d.push_back(spv_distance(clean, m->spv(perturb(x, eps, cfg))));
  }
  double fwd = 0, rev = 0;
  for (double v : d) fwd += v;
  std::reverse(d.begin(), d.end());
  for (double v : d) rev += v;
  CHECK(erpp(*m, x, cfg, 9).value == doctest::Approx(fwd / 7).epsilon(1e-15));
  CHECK(fwd / 7 == doctest::Approx(rev / 7).epsilon(1e-15));
}

TEST_CASE("batch scoring is deterministic and order independent") {
  const auto m = small_model();
  BlobSpec b;
  b.num_classes = 3;
  b.dim = 6;
  b.per_class = {40};
  b.seed = 8;
  const auto data = make_blobs(b);
  NoiseConfig cfg{1.0, 3, 21, std::nullopt};

  const auto one = erpp_dataset(*m, data, cfg, 1);
  const auto eight = erpp_dataset(*m, data, cfg, 8);
  REQUIRE(one.size() == data.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].value == eight[i].value);
    CHECK(one[i].sample_id == data.samples[i].id);
  }

  std::vector<ScoringItem> single = {{data.samples[5].id, data.samples[5].features}};
  CHECK(erpp_batch(*m, single, cfg)[0].value == erpp(*m, data.samples[5].features, cfg, data.samples[5].id).value);

  std::vector<ScoringItem> items;
  for (std::size_t i = data.size(); i-- > 0;) items.push_back({data.samples[i].id, data.samples[i].features});
  const auto rev = erpp_batch(*m, items, cfg, 3);
  for (std::size_t i = 0; i < rev.size(); ++i) CHECK(rev[i].value == one[data.size() - 1 - i].value);
}

TEST_CASE("noise streams depend only on seed, sample and draw index") {
  NoiseConfig cfg{2.0, 3, 5, std::nullopt};
  CHECK(noise_draw(cfg, rng::kScoring, 3, 1, 8) == noise_draw(cfg, rng::kScoring, 3, 1, 8));
  CHECK(noise_draw(cfg, rng::kScoring, 3, 1, 8) != noise_draw(cfg, rng::kScoring, 4, 1, 8));
  CHECK(noise_draw(cfg, rng::kScoring, 3, 1, 8) != noise_draw(cfg, rng::kScoring, 3, 2, 8));
  CHECK(noise_draw(cfg, rng::kScoring, 3, 1, 8) != noise_draw(cfg, rng::kCertifyCopies, 3, 1, 8));
  NoiseConfig other = cfg;
  other.master_seed = 6;
  CHECK(noise_draw(cfg, rng::kScoring, 3, 1, 8) != noise_draw(other, rng::kScoring, 3, 1, 8));
}

TEST_CASE("clipped perturbation") {
  NoiseConfig cfg{1.0, 1, 0, std::make_pair(0.0, 1.0)};
  const std::vector<double> x = {0.5, 0.5, 0.5}, eps = {-2.0, 0.1, 3.0};
  CHECK(perturb(x, eps, cfg) == std::vector<double>{0.0, 0.6, 1.0});
}

TEST_CASE("invalid noise configurations") {
  const std::vector<double> x = {0.0, 0.0};
  CHECK_THROWS_AS(erpp(unit_oracle(), x, NoiseConfig{0.0, 3, 0, std::nullopt}, 0), InvalidArgument);
  CHECK_THROWS_AS(erpp(unit_oracle(), x, NoiseConfig{1.0, 0, 0, std::nullopt}, 0), InvalidArgument);
  const std::vector<double> wrong = {0.0};
  CHECK_THROWS_AS(erpp(unit_oracle(), wrong, NoiseConfig{}, 0), Error);
}

TEST_CASE("scores from a probability table") {
  const auto dir = fs::temp_directory_path() / "rppcert-unit";
  fs::create_directories(dir);
  const auto path = dir / "probs.csv";
  {
    std::ofstream f(path);
    f << "1,0.9,0.1\n1,0.6,0.4\n1,0.8,0.2\n2,0.5,0.5\n2,0.5,0.5\n";
  }
  const auto table = ProbabilityTable::load_csv(path, 2);
  const auto s = erpp_from_table(table, NoiseConfig{0.5, 3, 2, std::nullopt});
  REQUIRE(s.size() == 2);
  CHECK(s[0].value == doctest::Approx(0.2));
  CHECK(s[0].draws == 2);
  CHECK(s[1].value == 0.0);
  CHECK(s[1].draws == 1);
}

TEST_CASE("score CSV round trip") {
  const std::vector<RppScore> s = {{3, 0.125, 3, 1.5, 9}, {8, 1.0 / 3.0, 3, 1.5, 9}};
  const auto path = fs::temp_directory_path() / "rppcert-unit" / "scores.csv";
  fs::create_directories(path.parent_path());
  save_scores(s, path);
  const auto back = load_scores(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].value == s[1].value);
  CHECK(back[1].sample_id == 8);
  CHECK(back[0].sigma == 1.5);
  {
    std::ofstream f(path);
    f << "# rppcert scores schema_version=2.0\nsample_id,score,sigma,J,seed\n";
  }
  CHECK_THROWS_AS(load_scores(path), ParseError);
}
