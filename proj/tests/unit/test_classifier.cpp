#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rppcert/classifier.hpp"
#include "rppcert/datagen.hpp"
#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/rng.hpp"

using namespace rppcert;
namespace fs = std::filesystem;

namespace {

Dataset two_blobs(std::size_t per_class, double separation, std::uint64_t seed) {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.per_class = {per_class};
  spec.separation = separation;
  spec.seed = seed;
  return make_blobs(spec);
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "rppcert-unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("softmax reference values") {
  const std::vector<double> l = {std::log(9.0), 0.0};
  const auto p = softmax(l);
  CHECK(std::fabs(p[0] - 0.9) < 1e-9);
  CHECK(std::fabs(p[1] - 0.1) < 1e-9);
  const std::vector<double> big = {1000.0, 999.0, -1000.0};
  const auto q = softmax(big);
  CHECK(is_valid_spv(q));
  CHECK(q[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("zero parameters give the uniform vector") {
  ModelParams m;
  m.num_classes = 4;
  m.dim = 3;
  m.weights.assign(12, 0.0);
  m.biases.assign(4, 0.0);
  const std::vector<double> x = {0.3, -2.0, 7.0};
  const auto p = predict_spv(m, x);
  for (std::size_t k = 0; k < 4; ++k) CHECK(p[k] == doctest::Approx(0.25));
}

TEST_CASE("training separates two well-separated blobs") {
  const auto data = two_blobs(100, 10.0, 3);
  TrainingConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 1;
  const auto m = train(data, cfg);
  CHECK(accuracy(m, data) >= 0.99);
  CHECK(m.meta.train_accuracy >= 0.99);
}

TEST_CASE("training loss settles monotonically on separable data") {
  const auto data = two_blobs(100, 6.0, 4);
  TrainingConfig cfg;
  cfg.epochs = 25;
  cfg.learning_rate = 0.05;
  cfg.seed = 2;
  const auto m = train(data, cfg);
  const auto& h = m.meta.loss_history;
  REQUIRE(h.size() == 25);
  for (std::size_t e = 3; e < h.size(); ++e) {
    CAPTURE(e);
    CHECK(h[e] <= h[e - 1] + 1e-6);
  }
}

TEST_CASE("a single populated class is predicted everywhere") {
  BlobSpec spec;
  spec.num_classes = 3;
  spec.dim = 2;
  spec.per_class = {0, 40, 0};
  const auto data = make_blobs(spec);
  const auto m = train(data, TrainingConfig{});
  CHECK(accuracy(m, data) == 1.0);
  CHECK(m.meta.warnings.size() == 2);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  const auto data = two_blobs(50, 3.0, 9);
  TrainingConfig cfg;
  cfg.seed = 77;
  cfg.architecture = Architecture::OneHiddenLayer;
  cfg.hidden = 8;
  CHECK(train(data, cfg) == train(data, cfg));
  TrainingConfig other = cfg;
  other.seed = 78;
  CHECK_FALSE(train(data, cfg) == train(data, other));
}

TEST_CASE("model save and load round trip") {
  const auto data = two_blobs(30, 4.0, 1);
  TrainingConfig cfg;
  cfg.architecture = Architecture::OneHiddenLayer;
  cfg.hidden = 5;
  const auto m = train(data, cfg);
  const auto path = scratch("model.json");
  save_model(m, path);
  const auto back = load_model(path);
  CHECK(back == m);
  CHECK(model_checksum(back) == model_checksum(m));
}

TEST_CASE("a truncated model file is a parse error") {
  const auto m = train(two_blobs(20, 4.0, 1), TrainingConfig{});
  const std::string text = model_to_json(m);
  CHECK_THROWS_AS(model_from_json(text.substr(0, text.size() / 2)), ParseError);
}

TEST_CASE("a model whose declared K disagrees with its weights is rejected") {
  auto m = train(two_blobs(20, 4.0, 1), TrainingConfig{});
  m.num_classes = 3;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  CHECK_THROWS_AS(model_from_json(model_to_json(m)), Error);
}

TEST_CASE("analytic oracle reference values") {
  const AnalyticLinearOracle o({3.0, 4.0}, -5.0, 1.0);
  const std::vector<double> on_plane = {1.0, 0.5};
  const auto p = o.spv(on_plane);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  const AnalyticLinearOracle unit({1.0, 0.0}, 0.0, 1.0);
  const std::vector<double> x = {1.0, 9.0};
  CHECK(std::fabs(unit.spv(x)[1] - oracle::phi(1.0)) < 1e-15);

  // Reflecting x through the hyperplane swaps the two probabilities.
  const std::vector<double> a = {2.0, 1.0};
  const double m = o.margin(a) / 25.0;
  const std::vector<double> b = {a[0] - 2 * m * 3.0, a[1] - 2 * m * 4.0};
  CHECK(o.spv(a)[0] == doctest::Approx(o.spv(b)[1]).epsilon(1e-12));
}

TEST_CASE("analytic oracle equals the noisy hard-label frequency") {
  const AnalyticLinearOracle o({0.6, -0.8, 0.0}, 0.2, 0.7);
  const std::vector<double> x = {0.5, 0.1, -3.0};
  rng::Stream s(rng::derive(3, {9}));
  const int draws = 100000;
  int ones = 0;
  for (int i = 0; i < draws; ++i) {
    double m = o.offset();
    for (std::size_t d = 0; d < 3; ++d) m += o.direction()[d] * (x[d] + s.normal(0.0, o.sigma0()));
    ones += m > 0.0;
  }
  const double p = o.spv(x)[1];
  const double se = std::sqrt(p * (1 - p) / draws);
  CHECK(std::fabs(ones / static_cast<double>(draws) - p) <= 3 * se);
}

TEST_CASE("every oracle returns valid SPVs") {
  const auto data = two_blobs(30, 3.0, 5);
  TrainingConfig cfg;
  cfg.architecture = Architecture::OneHiddenLayer;
  cfg.hidden = 6;
  auto model = std::make_shared<const ModelParams>(train(data, cfg));
  auto soft = std::make_shared<const ModelOracle>(model);
  const HardLabelOracle hard(soft);
  const AnalyticLinearOracle analytic({1.0, -2.0}, 0.5, 0.8);
  rng::Stream s(rng::derive(8, {8}));
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x = {s.normal(0, 5), s.normal(0, 5)};
    CHECK(is_valid_spv(soft->spv(x)));
    CHECK(is_valid_spv(analytic.spv(x)));
    const auto h = hard.spv(x);
    CHECK(is_valid_spv(h));
    CHECK(h[soft->spv(x).argmax()] == 1.0);
  }
}

TEST_CASE("analytic oracle JSON round trip") {
  const AnalyticLinearOracle o({0.25, -1.5, 3.0}, 0.125, 0.4);
  const auto back = AnalyticLinearOracle::from_json(o.to_json());
  CHECK(back.direction() == o.direction());
  CHECK(back.offset() == o.offset());
  CHECK(back.sigma0() == o.sigma0());
}

TEST_CASE("probability table parsing") {
  const auto path = scratch("table.csv");
  {
    std::ofstream f(path);
    f << "# rppcert probability-table schema_version=1.0\n"
      << "sample_id,p_0,p_1\n"
      << "7,0.9,0.1\n7,0.6,0.4\n3,0.5,0.5\n7,0.8,0.2\n3,0.5,0.5\n";
  }
  const auto t = ProbabilityTable::load_csv(path, 2);
  CHECK(t.ids() == std::vector<std::uint64_t>{7, 3});
  CHECK(t.rows(7).size() == 3);
  CHECK(t.rows(3).size() == 2);
  {
    std::ofstream f(path);
    f << "1,0.9,0.1\n1,0.9\n";
  }
  CHECK_THROWS_AS(ProbabilityTable::load_csv(path, 2), ParseError);
  {
    std::ofstream f(path);
    f << "1,0.9,0.3\n";
  }
  CHECK_THROWS_AS(ProbabilityTable::load_csv(path, 2), Error);
}
