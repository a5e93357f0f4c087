#include "rppcert/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "json_support.hpp"
#include "rppcert/certify.hpp"
#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/mathkit.hpp"

namespace rppcert {

using detail::json;

DetectionReport tpr_fpr(const std::vector<DetectionVerdict>& verdicts,
                        const std::vector<GroundTruth>& truth) {
  if (verdicts.size() != truth.size()) {
    throw InvalidArgument("tpr_fpr: " + std::to_string(verdicts.size()) + " verdicts but " +
                          std::to_string(truth.size()) + " ground-truth rows");
  }
  DetectionReport r;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i].sample_id != truth[i].sample_id) {
      throw InvalidArgument("tpr_fpr: id mismatch at row " + std::to_string(i) + " (" +
                            std::to_string(verdicts[i].sample_id) + " vs " +
                            std::to_string(truth[i].sample_id) + ")");
    }
    const bool flagged = verdicts[i].flagged;
    if (truth[i].poisoned) {
      (flagged ? r.tp : r.fn)++;
    } else {
      (flagged ? r.fp : r.tn)++;
    }
  }
  if (r.tp + r.fn > 0) r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  if (r.fp + r.tn > 0) r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
  return r;
}

AttackReport attack_metrics(const ModelParams& model, const Dataset& clean_test,
                            const TriggerSpec& trigger) {
  if (clean_test.empty()) throw InvalidArgument("attack_metrics: test set is empty");
  const auto delta = render_trigger(trigger);
  if (delta.size() != clean_test.dim) {
    throw InvalidArgument("attack_metrics: trigger dimension does not match the test set");
  }
  AttackReport r;
  std::size_t hits = 0;
  std::size_t correct = 0;
  for (const auto& s : clean_test.samples) {
    if (predict_label(model, s.features) == s.label) ++correct;
    if (s.label == trigger.target_class) continue;
    ++r.asr_samples;
    if (predict_label(model, stamp(s.features, delta)) == trigger.target_class) ++hits;
  }
  r.acc_samples = clean_test.size();
  r.acc = static_cast<double>(correct) / static_cast<double>(r.acc_samples);
  r.asr = r.asr_samples ? static_cast<double>(hits) / static_cast<double>(r.asr_samples) : 0.0;
  return r;
}

double ValidationReport::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics) {
    if (k == key) return v;
  }
  throw InvalidArgument("report '" + name + "' has no metric '" + key + "'");
}

std::string report_to_json(const ValidationReport& r) {
  json j = detail::schema_header("rppcert-validation-report");
  j["validator"] = r.name;
  j["trials"] = r.trials;
  j["observed"] = r.observed;
  j["bound"] = r.bound;
  j["slack"] = r.slack;
  j["comparison"] = r.comparison;
  j["passed"] = r.passed;
  j["seed"] = r.seed;
  json metrics = json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(nullptr);
  j["metrics"] = metrics;
  json config = json::object();
  for (const auto& [k, v] : r.config) config[k] = v;
  j["config"] = config;
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const ValidationReport& r) {
  std::string out = io::csv_schema_line("validation-report") + "\nkey,value\n";
  auto row = [&](const std::string& k, const std::string& v) { out += k + "," + v + "\n"; };
  row("validator", r.name);
  row("trials", std::to_string(r.trials));
  row("observed", io::format_double(r.observed));
  row("bound", io::format_double(r.bound));
  row("slack", io::format_double(r.slack));
  row("comparison", r.comparison);
  row("passed", r.passed ? "1" : "0");
  row("seed", std::to_string(r.seed));
  for (const auto& [k, v] : r.metrics) row("metric." + k, io::format_double(v));
  for (const auto& [k, v] : r.config) row("config." + k, v);
  return out;
}

namespace {

// ceil(q * m)-th smallest value (1-based), the usual empirical quantile.
double empirical_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string fmt(double v) { return io::format_double(v); }

}  // namespace

ValidationReport validate_fpr_bound(const std::vector<double>& pool, std::size_t n, double alpha,
                                    std::size_t trials, std::uint64_t seed, double slack) {
  if (n == 0) throw InvalidArgument("validate fpr: calibration size must be positive");
  if (pool.size() < n + 1) {
    throw PreconditionError("validate fpr: pool of " + std::to_string(pool.size()) +
                            " scores is too small for n=" + std::to_string(n) + " plus a holdout");
  }
  if (trials == 0) throw InvalidArgument("validate fpr: trials must be positive");
  if (slack < 0.0) throw InvalidArgument("validate fpr: slack must be non-negative");

  std::vector<double> fprs(trials);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng::Stream stream(rng::derive(seed, {rng::kValidate, 0xf9, t}));
    // Partial Fisher-Yates: the first n positions become the calibration draw.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + stream.below(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    std::vector<double> calib(n);
    for (std::size_t i = 0; i < n; ++i) calib[i] = pool[idx[i]];
    const double q_hat = calibrate(std::move(calib), alpha).q_hat;
    std::size_t flagged = 0;
    for (std::size_t i = n; i < idx.size(); ++i) flagged += pool[idx[i]] <= q_hat ? 1 : 0;
    fprs[t] = static_cast<double>(flagged) / static_cast<double>(idx.size() - n);
  }

  ValidationReport r;
  r.name = "fpr";
  r.trials = trials;
  r.seed = seed;
  r.slack = slack;
  r.bound = alpha + 1.0 / static_cast<double>(n + 1);
  r.observed = empirical_quantile(fprs, 0.95);
  r.passed = r.observed <= r.bound + slack;
  const std::size_t k = conformal_rank(alpha, n);
  r.metrics = {{"fpr_q95", r.observed},
               {"fpr_mean", mean_of(fprs)},
               {"fpr_max", *std::max_element(fprs.begin(), fprs.end())},
               {"expected_mean", static_cast<double>(k) / static_cast<double>(n + 1)},
               {"beta_q95", beta_quantile(0.95, static_cast<double>(k), static_cast<double>(n + 1 - k))}};
  r.config = {{"pool_size", std::to_string(pool.size())},
              {"pool_checksum", io::fnv1a_hex(std::string_view(reinterpret_cast<const char*>(pool.data()),
                                                               pool.size() * sizeof(double)))},
              {"n", std::to_string(n)},
              {"alpha", fmt(alpha)},
              {"holdout", std::to_string(pool.size() - n)}};
  r.notes = {"observed is the 0.95-quantile of the per-trial held-out flag rate",
             "alpha + 1/(n+1) bounds the mean flag rate; the per-trial rate follows "
             "Beta(k, n+1-k) approximately, whose 0.95-quantile is reported as beta_q95"};
  return r;
}

ScoreSampler make_sampler(const std::string& name) {
  if (name == "uniform") {
    return {name, [](rng::Stream& s) { return s.uniform(); },
            [](double x) { return std::clamp(x, 0.0, 1.0); }, true};
  }
  if (name == "normal") {
    return {name, [](rng::Stream& s) { return s.normal(); }, [](double x) { return norm_cdf(x); }, true};
  }
  if (name == "exponential") {
    return {name, [](rng::Stream& s) { return -std::log(s.uniform_open_zero()); },
            [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }, true};
  }
  if (name == "discrete") {
    return {name, [](rng::Stream& s) { return static_cast<double>(s.below(3)); },
            [](double x) { return x < 0.0 ? 0.0 : std::min(1.0, (std::floor(x) + 1.0) / 3.0); }, false};
  }
  throw InvalidArgument("unknown sampler '" + name + "' (expected uniform, normal, exponential, discrete)");
}

ValidationReport validate_coverage_beta(const ScoreSampler& sampler, std::size_t n, double alpha,
                                        std::size_t trials, std::uint64_t seed) {
  if (!sampler.continuous) {
    throw PreconditionError("validate coverage: sampler '" + sampler.name +
                            "' has mass points; the coverage law needs a continuous score distribution");
  }
  if (n == 0 || trials == 0) throw InvalidArgument("validate coverage: n and trials must be positive");
  const std::size_t k = conformal_rank(alpha, n);
  if (k < 1 || k > n) throw PreconditionError("validate coverage: alpha >= n/(n+1): threshold undefined");

  std::vector<double> z(trials);
  std::vector<double> scores(n);
  for (std::size_t t = 0; t < trials; ++t) {
    rng::Stream stream(rng::derive(seed, {rng::kValidate, 0xc0, t}));
    for (auto& s : scores) s = sampler.draw(stream);
    z[t] = sampler.cdf(calibrate(scores, alpha).q_hat);
  }
  const double a = static_cast<double>(k);
  const double b = static_cast<double>(n + 1 - k);
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  const double ks = ks_statistic(sorted, [&](double x) { return beta_cdf(x, a, b); });

  ValidationReport r;
  r.name = "coverage";
  r.trials = trials;
  r.seed = seed;
  r.observed = ks;
  r.bound = ks_critical_value(trials, 0.01);
  r.passed = ks < r.bound;
  const double mean = mean_of(z);
  const double beta_mean = a / (a + b);
  const double beta_sd = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
  r.metrics = {{"ks_statistic", ks},
               {"ks_critical_1pct", r.bound},
               {"z_mean", mean},
               {"beta_mean", beta_mean},
               {"z_mean_se", beta_sd / std::sqrt(static_cast<double>(trials))},
               {"k", a}};
  r.config = {{"sampler", sampler.name}, {"n", std::to_string(n)}, {"alpha", fmt(alpha)}};
  r.notes = {"Z = F(q_hat) per trial, tested against Beta(k, n+1-k) with k = ceil(alpha(n+1))"};
  return r;
}

std::vector<OracleGridPoint> random_oracle_grid(const AnalyticLinearOracle& oracle, std::size_t points,
                                                std::uint64_t seed) {
  std::vector<OracleGridPoint> grid;
  const auto& w = oracle.direction();
  const double wn = oracle.direction_norm();
  rng::Stream stream(rng::derive(seed, {rng::kValidate, 0x9d}));
  for (std::size_t p = 0; p < points; ++p) {
    // Random base point moved along w so that its margin hits the target.
    std::vector<double> x(w.size());
    for (double& v : x) v = stream.normal();
    const double target = p == 0 ? 0.0 : stream.uniform(-3.0, 3.0);
    const double shift = (target - oracle.margin(x)) / (wn * wn);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += shift * w[i];
    grid.push_back({std::move(x), p == 0 ? 1.0 : stream.uniform(0.1, 3.0)});
  }
  return grid;
}

ValidationReport validate_erpp_oracle(const AnalyticLinearOracle& oracle,
                                      const std::vector<OracleGridPoint>& grid, std::size_t j_mc,
                                      std::uint64_t seed) {
  if (grid.empty()) throw InvalidArgument("validate erpp: empty grid");
  ValidationReport r;
  r.name = "erpp";
  r.trials = grid.size();
  r.seed = seed;
  r.comparison = "<=";
  std::size_t within = 0;
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    NoiseConfig cfg;
    cfg.sigma = grid[i].sigma;
    cfg.draws = j_mc;
    cfg.master_seed = seed;
    const auto mc = erpp_with_spread(oracle, grid[i].x, cfg, i);
    const double exact = rpp_exact_analytic(oracle, grid[i].x, grid[i].sigma);
    const double tol = std::max(1e-12, 3.0 * mc.draw_stddev / std::sqrt(static_cast<double>(j_mc)));
    const double diff = std::abs(mc.score.value - exact);
    if (diff <= tol) ++within;
    worst_ratio = std::max(worst_ratio, diff / tol);
    const std::string tag = "[" + std::to_string(i) + "]";
    r.metrics.emplace_back("exact" + tag, exact);
    r.metrics.emplace_back("mc" + tag, mc.score.value);
    r.metrics.emplace_back("tolerance" + tag, tol);
  }
  r.observed = worst_ratio;
  r.bound = 1.0;
  r.passed = within == grid.size();
  r.metrics.insert(r.metrics.begin(), {"points_within", static_cast<double>(within)});
  r.config = {{"J_mc", std::to_string(j_mc)},
              {"points", std::to_string(grid.size())},
              {"sigma0", fmt(oracle.sigma0())},
              {"oracle_checksum", io::fnv1a_hex(oracle.to_json())}};
  r.notes = {"observed is the largest |MC - exact| divided by 3 standard errors"};
  return r;
}

ValidationReport validate_a1(const Oracle& oracle, const std::vector<std::vector<double>>& triggered,
                             std::size_t y_t, const NoiseConfig& cfg, double min_rate, SpvMode mode) {
  if (triggered.empty()) throw InvalidArgument("validate a1: no triggered samples");
  std::size_t satisfied = 0;
  double copy_fraction = 0.0;
  for (std::size_t i = 0; i < triggered.size(); ++i) {
    const double f = check_assumption_a1(oracle, triggered[i], y_t, cfg, i, mode);
    copy_fraction += f;
    if (f >= 1.0) ++satisfied;
  }
  ValidationReport r;
  r.name = "a1";
  r.trials = triggered.size();
  r.seed = cfg.master_seed;
  r.comparison = ">=";
  r.observed = static_cast<double>(satisfied) / static_cast<double>(triggered.size());
  r.bound = min_rate;
  r.passed = r.observed >= min_rate;
  r.metrics = {{"satisfied_samples", static_cast<double>(satisfied)},
               {"mean_copy_fraction", copy_fraction / static_cast<double>(triggered.size())}};
  r.config = {{"sigma", fmt(cfg.sigma)},
              {"J", std::to_string(cfg.draws)},
              {"target_class", std::to_string(y_t)},
              {"spv_mode", mode == SpvMode::Soft ? "soft" : "hard"}};
  return r;
}

ValidationReport imbalance_trend(const TrendConfig& cfg) {
  if (cfg.rhos.size() < 2) throw InvalidArgument("trend: need at least two rho values");
  if (cfg.seeds.size() < 3) throw InvalidArgument("trend: need at least three seeds");
  std::vector<double> rhos = cfg.rhos;
  std::sort(rhos.begin(), rhos.end());
  const std::size_t K = cfg.base.num_classes;
  const std::size_t n_max = cfg.imbalance.n_max;
  if (n_max == 0) throw InvalidArgument("trend: imbalance.n_max must be set");

  // asr[r][s]
  std::vector<std::vector<double>> asr(rhos.size(), std::vector<double>(cfg.seeds.size()));
  std::vector<std::vector<double>> null_asr = asr;
  ValidationReport r;
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    const std::uint64_t seed = cfg.seeds[si];
    BlobSpec spec = cfg.base;
    spec.per_class = {n_max + cfg.test_per_class};
    spec.seed = rng::derive(seed, {rng::kDatagen, 0x7e});
    const Dataset population = make_blobs(spec);

    // The first test_per_class samples of each class form the clean test set.
    Dataset pool, test;
    pool.num_classes = test.num_classes = K;
    pool.dim = test.dim = population.dim;
    std::vector<std::size_t> seen(K, 0);
    for (const auto& s : population.samples) {
      (seen[s.label]++ < cfg.test_per_class ? test : pool).samples.push_back(s);
    }

    for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
      ImbalanceSpec imb = cfg.imbalance;
      imb.rho = rhos[ri];
      const Dataset train_clean = subsample_imbalanced(pool, imb, rng::derive(seed, {rng::kSelect, 1}));
      PoisonPlan plan;
      plan.mode = PoisonMode::Count;
      plan.count = cfg.poison_count;
      plan.policy = cfg.policy;
      plan.trigger = cfg.trigger;
      plan.seed = rng::derive(seed, {rng::kSelect, 2});
      const Dataset train = apply_poison(train_clean, plan).data;
      TrainingConfig tc = cfg.training;
      tc.seed = rng::derive(seed, {rng::kInit, 3});
      const ModelParams model = rppcert::train(train, tc);
      const AttackReport ar = attack_metrics(model, test, cfg.trigger);
      asr[ri][si] = ar.asr;
      const std::string tag = "[rho=" + fmt(rhos[ri]) + ",seed=" + std::to_string(seed) + "]";
      r.metrics.emplace_back("asr" + tag, ar.asr);
      r.metrics.emplace_back("acc" + tag, ar.acc);
      r.metrics.emplace_back("train_size" + tag, static_cast<double>(train.size()));
      if (cfg.measure_null) {
        const ModelParams clean_model = rppcert::train(train_clean, tc);
        null_asr[ri][si] = attack_metrics(clean_model, test, cfg.trigger).asr;
        r.metrics.emplace_back("null_asr" + tag, null_asr[ri][si]);
      }
    }
  }

  std::vector<double> means(rhos.size());
  for (std::size_t ri = 0; ri < rhos.size(); ++ri) means[ri] = mean_of(asr[ri]);
  bool nondecreasing = true;
  for (std::size_t ri = 1; ri < rhos.size(); ++ri) nondecreasing &= means[ri] >= means[ri - 1];
  std::size_t increases = 0;
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    if (asr.back()[si] > asr.front()[si]) ++increases;
  }

  r.name = "trend";
  r.trials = cfg.seeds.size();
  r.seed = cfg.seeds.front();
  r.comparison = ">=";
  r.observed = means.back() - means.front();
  r.bound = 0.0;
  r.passed = nondecreasing;
  std::vector<std::pair<std::string, double>> head;
  for (std::size_t ri = 0; ri < rhos.size(); ++ri) {
    head.emplace_back("mean_asr[rho=" + fmt(rhos[ri]) + "]", means[ri]);
    if (cfg.measure_null) {
      head.emplace_back("mean_null_asr[rho=" + fmt(rhos[ri]) + "]", mean_of(null_asr[ri]));
    }
  }
  head.emplace_back("seeds_with_increase", static_cast<double>(increases));
  r.metrics.insert(r.metrics.begin(), head.begin(), head.end());
  std::string seeds;
  for (auto s : cfg.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
  r.config = {{"poison_count", std::to_string(cfg.poison_count)},
              {"num_classes", std::to_string(K)},
              {"dim", std::to_string(cfg.base.dim)},
              {"n_max", std::to_string(n_max)},
              {"mu", fmt(cfg.imbalance.mu)},
              {"imbalance", cfg.imbalance.kind == ImbalanceKind::Step ? "step" : "longtail"},
              {"target_class", std::to_string(cfg.trigger.target_class)},
              {"target_l2", fmt(cfg.trigger.target_l2)},
              {"seeds", seeds}};
  r.notes = {"observed is mean ASR at the largest rho minus mean ASR at the smallest rho"};
  return r;
}

}  // namespace rppcert
