#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "rppcert/error.hpp"
#include "rppcert/evalkit.hpp"
#include "rppcert/io.hpp"

using namespace rppcert;

TEST_CASE("detection counts and rates") {
  std::vector<DetectionVerdict> v;
  std::vector<GroundTruth> t;
  for (std::uint64_t i = 0; i < 1018; ++i) {
    const bool poisoned = i < 18;
    const bool flagged = poisoned ? i < 17 : i < 18 + 50;
    v.push_back({i, 0.0, 0.0, flagged});
    t.push_back({i, poisoned});
  }
  const auto r = tpr_fpr(v, t);
  CHECK(r.tp == 17);
  CHECK(r.fn == 1);
  CHECK(r.fp == 50);
  CHECK(r.tn == 950);
  CHECK(*r.tpr == doctest::Approx(17.0 / 18.0));
  CHECK(*r.fpr == doctest::Approx(0.05));

  std::vector<DetectionVerdict> clean_v = {{0, 0, 0, false}, {1, 0, 0, true}};
  std::vector<GroundTruth> clean_t = {{0, false}, {1, false}};
  const auto c = tpr_fpr(clean_v, clean_t);
  CHECK_FALSE(c.tpr.has_value());
  CHECK(*c.fpr == 0.5);

  clean_t[1].sample_id = 5;
  CHECK_THROWS_AS(tpr_fpr(clean_v, clean_t), InvalidArgument);
  clean_t.pop_back();
  CHECK_THROWS_AS(tpr_fpr(clean_v, clean_t), InvalidArgument);
}

TEST_CASE("perfect detection") {
  std::vector<DetectionVerdict> v = {{0, 0, 0, true}, {1, 0, 0, false}};
  std::vector<GroundTruth> t = {{0, true}, {1, false}};
  const auto r = tpr_fpr(v, t);
  CHECK(*r.tpr == 1.0);
  CHECK(*r.fpr == 0.0);
}

TEST_CASE("attack metrics") {
  BlobSpec b;
  b.num_classes = 3;
  b.dim = 4;
  b.per_class = {10, 20, 30};
  const auto test = make_blobs(b);
  TriggerSpec trig;
  trig.target_class = 1;
  trig.dims = ImageDims::infer(4);
  trig.patch_side = 1;

  ModelParams always1;
  always1.num_classes = 3;
  always1.dim = 4;
  always1.weights.assign(12, 0.0);
  always1.biases = {0.0, 5.0, 0.0};
  auto r = attack_metrics(always1, test, trig);
  CHECK(r.asr == 1.0);
  CHECK(r.asr_samples == 40);
  CHECK(r.acc == doctest::Approx(20.0 / 60.0));

  ModelParams always0 = always1;
  always0.biases = {5.0, 0.0, 0.0};
  r = attack_metrics(always0, test, trig);
  CHECK(r.asr == 0.0);
}

TEST_CASE("fpr validator") {
  const auto sampler = make_sampler("uniform");
  std::vector<double> pool(1000);
  rng::Stream s(rng::derive(3, {3}));
  for (auto& x : pool) x = sampler.draw(s);
  const auto r = validate_fpr_bound(pool, 100, 0.05, 300, 1);
  CHECK(r.bound == doctest::Approx(0.05 + 1.0 / 101));
  CHECK(r.metric("fpr_mean") == doctest::Approx(r.metric("expected_mean")).epsilon(0.1));
  CHECK(r.observed == r.metric("fpr_q95"));
  CHECK(r.passed == (r.observed <= r.bound + r.slack));
  CHECK(report_to_json(validate_fpr_bound(pool, 100, 0.05, 50, 9)) ==
        report_to_json(validate_fpr_bound(pool, 100, 0.05, 50, 9)));
  CHECK_THROWS_AS(validate_fpr_bound(std::vector<double>(100, 0.5), 100, 0.05, 10, 1), PreconditionError);
}

TEST_CASE("coverage validator") {
  const auto r = validate_coverage_beta(make_sampler("uniform"), 100, 0.05, 1000, 7);
  CHECK(r.passed);
  CHECK(r.bound == doctest::Approx(1.63 / std::sqrt(1000.0)));
  CHECK(std::fabs(r.metric("z_mean") - 6.0 / 101.0) <= 3 * r.metric("z_mean_se"));

  const auto single = validate_coverage_beta(make_sampler("normal"), 1, 0.4, 500, 2);
  CHECK(single.metric("k") == 1);
  CHECK(single.passed);

  CHECK_THROWS_AS(validate_coverage_beta(make_sampler("discrete"), 100, 0.05, 100, 1), PreconditionError);
  CHECK_THROWS_AS(make_sampler("cauchy"), InvalidArgument);
}

TEST_CASE("eRPP oracle validator") {
  const AnalyticLinearOracle o({0.5, -1.0, 2.0}, 0.3, 1.0);
  const auto grid = random_oracle_grid(o, 20, 4);
  REQUIRE(grid.size() == 20);
  CHECK(std::fabs(o.margin(grid[0].x)) < 1e-12);
  const auto r = validate_erpp_oracle(o, grid, 100000, 4);
  CHECK(r.passed);
  CHECK(r.metric("points_within") == 20);

  std::vector<OracleGridPoint> tiny = {{grid[3].x, 1e-6}};
  const auto t = validate_erpp_oracle(o, tiny, 1000, 1);
  CHECK(t.passed);
  CHECK(t.metric("mc[0]") < 1e-5);
  CHECK(t.metric("exact[0]") < 1e-5);
}

TEST_CASE("trend validator preconditions") {
  TrendConfig cfg;
  cfg.imbalance.n_max = 50;
  cfg.rhos = {1.0};
  CHECK_THROWS_AS(imbalance_trend(cfg), InvalidArgument);
  cfg.rhos = {1.0, 10.0};
  cfg.seeds = {0, 1};
  CHECK_THROWS_AS(imbalance_trend(cfg), InvalidArgument);
}

TEST_CASE("trend with no poison sits at the target-class base rate") {
  TrendConfig cfg;
  cfg.base.num_classes = 4;
  cfg.base.dim = 9;
  cfg.base.separation = 6.0;
  cfg.imbalance = {ImbalanceKind::Step, 1.0, 0.75, 60};
  cfg.rhos = {1.0, 5.0};
  cfg.poison_count = 0;
  cfg.test_per_class = 50;
  cfg.measure_null = false;
  cfg.trigger.dims = ImageDims::infer(9);
  cfg.training.epochs = 10;
  const auto r = imbalance_trend(cfg);
  for (double rho : {1.0, 5.0}) {
    const std::string key = "mean_asr[rho=" + io::format_double(rho) + "]";
    CAPTURE(key);
    CHECK(r.metric(key) < 0.1);
  }
}

TEST_CASE("report rendering") {
  ValidationReport r;
  r.name = "x";
  r.observed = 0.25;
  r.bound = 0.5;
  r.passed = true;
  r.metrics = {{"m", 1.5}};
  r.config = {{"c", "v"}};
  const auto csv = report_to_csv(r);
  CHECK(csv.rfind("# rppcert validation-report schema_version=1.", 0) == 0);
  CHECK(csv.find("m,1.5") != std::string::npos);
  CHECK(csv.find("c,v") != std::string::npos);
  const auto js = report_to_json(r);
  CHECK(js.find("\"passed\": true") != std::string::npos);
  CHECK_THROWS_AS(r.metric("missing"), InvalidArgument);
}
