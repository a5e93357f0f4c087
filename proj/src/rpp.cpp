#include "rppcert/rpp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/mathkit.hpp"
#include "rppcert/quadrature.hpp"
#include "rppcert/rng.hpp"

namespace rppcert {

void NoiseConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("noise: sigma must be positive and finite");
  }
  if (draws == 0) throw InvalidArgument("noise: number of draws J must be at least 1");
  if (clip && !(clip->first < clip->second)) {
    throw InvalidArgument("noise: clip range must satisfy lo < hi");
  }
}

double spv_distance(const ProbVector& a, const ProbVector& b) {
  if (a.size() != b.size()) throw InvalidArgument("spv_distance: probability vectors differ in length");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

std::vector<double> noise_draw(const NoiseConfig& cfg, std::uint64_t domain, std::uint64_t sample_id,
                               std::size_t j, std::size_t dim) {
  rng::Stream stream(rng::derive(cfg.master_seed, {domain, sample_id, static_cast<std::uint64_t>(j)}));
  std::vector<double> eps(dim);
  for (auto& e : eps) e = cfg.sigma * stream.normal();
  return eps;
}

std::vector<double> perturb(std::span<const double> x, std::span<const double> eps,
                            const NoiseConfig& cfg) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i] + eps[i];
    if (cfg.clip) v = std::clamp(v, cfg.clip->first, cfg.clip->second);
    out[i] = v;
  }
  return out;
}

namespace {

std::vector<double> draw_distances(const Oracle& oracle, std::span<const double> x,
                                   const NoiseConfig& cfg, std::uint64_t sample_id) {
  if (x.size() != oracle.dim()) {
    throw InvalidArgument("erpp: sample " + std::to_string(sample_id) + " has dimension " +
                          std::to_string(x.size()) + ", oracle expects " +
                          std::to_string(oracle.dim()));
  }
  const ProbVector clean = oracle.spv(x);
  std::vector<double> dist(cfg.draws);
  for (std::size_t j = 0; j < cfg.draws; ++j) {
    const auto eps = noise_draw(cfg, rng::kScoring, sample_id, j, x.size());
    dist[j] = spv_distance(clean, oracle.spv(perturb(x, eps, cfg)));
  }
  return dist;
}

RppScore make_score(std::uint64_t id, double value, std::size_t draws, const NoiseConfig& cfg) {
  return {id, value, draws, cfg.sigma, cfg.master_seed};
}

}  // namespace

RppScore erpp(const Oracle& oracle, std::span<const double> x, const NoiseConfig& cfg,
              std::uint64_t sample_id) {
  cfg.validate();
  const auto dist = draw_distances(oracle, x, cfg, sample_id);
  double sum = 0.0;
  for (double d : dist) sum += d;
  return make_score(sample_id, sum / static_cast<double>(cfg.draws), cfg.draws, cfg);
}

ErppDetail erpp_with_spread(const Oracle& oracle, std::span<const double> x, const NoiseConfig& cfg,
                            std::uint64_t sample_id) {
  cfg.validate();
  const auto dist = draw_distances(oracle, x, cfg, sample_id);
  const double n = static_cast<double>(dist.size());
  double mean = 0.0;
  for (double d : dist) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : dist) ss += (d - mean) * (d - mean);
  ErppDetail out;
  out.score = make_score(sample_id, mean, cfg.draws, cfg);
  out.draw_stddev = dist.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return out;
}

std::vector<RppScore> erpp_batch(const Oracle& oracle, std::span<const ScoringItem> items,
                                 const NoiseConfig& cfg, unsigned workers) {
  cfg.validate();
  std::vector<RppScore> out(items.size());
  if (items.empty()) return out;
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(items.size()));

  // Each item only touches its own slot and its own keyed streams, so the
  // result does not depend on how the range is partitioned.
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_at(workers, items.size());
  auto run = [&](unsigned w) {
    const std::size_t begin = items.size() * w / workers;
    const std::size_t end = items.size() * (w + 1) / workers;
    for (std::size_t i = begin; i < end; ++i) {
      try {
        out[i] = erpp(oracle, items[i].features, cfg, items[i].sample_id);
      } catch (...) {
        errors[w] = std::current_exception();
        error_at[w] = i;
        return;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  // Report the failure at the lowest index, matching a sequential run.
  for (unsigned w = 0; w < workers; ++w) {
    if (errors[w]) std::rethrow_exception(errors[w]);
  }
  return out;
}

std::vector<RppScore> erpp_dataset(const Oracle& oracle, const Dataset& data, const NoiseConfig& cfg,
                                   unsigned workers) {
  std::vector<ScoringItem> items;
  items.reserve(data.size());
  for (const auto& s : data.samples) items.push_back({s.id, s.features});
  return erpp_batch(oracle, items, cfg, workers);
}

std::vector<RppScore> erpp_from_table(const ProbabilityTable& table, const NoiseConfig& cfg) {
  std::vector<RppScore> out;
  out.reserve(table.ids().size());
  for (auto id : table.ids()) {
    const auto& rows = table.rows(id);
    if (rows.size() < 2) {
      throw InvalidArgument("probability table: sample " + std::to_string(id) +
                            " has no noisy rows after its clean row");
    }
    double sum = 0.0;
    for (std::size_t j = 1; j < rows.size(); ++j) sum += spv_distance(rows[0], rows[j]);
    const std::size_t draws = rows.size() - 1;
    out.push_back(make_score(id, sum / static_cast<double>(draws), draws, cfg));
  }
  return out;
}

double rpp_exact_from_margin(double t, double sigma0, double sigma) {
  if (!(sigma0 > 0.0) || !(sigma > 0.0)) {
    throw InvalidArgument("rpp_exact: sigma0 and sigma must be positive");
  }
  // With w.eps = sigma |w| z, p1(x + eps) = Phi((t + sigma z) / sigma0).
  // The integrand has a kink at z = 0, so the two halves are integrated
  // separately.
  const double base = norm_cdf(t / sigma0);
  auto f = [&](double z) {
    return std::abs(base - norm_cdf((t + sigma * z) / sigma0)) * norm_pdf(z);
  };
  return detail::integrate_gk15(f, -8.0, 0.0, 5e-12) + detail::integrate_gk15(f, 0.0, 8.0, 5e-12);
}

double rpp_exact_analytic(const AnalyticLinearOracle& oracle, std::span<const double> x, double sigma) {
  if (x.size() != oracle.dim()) throw InvalidArgument("rpp_exact: dimension mismatch");
  return rpp_exact_from_margin(oracle.margin(x) / oracle.direction_norm(), oracle.sigma0(), sigma);
}

std::string scores_to_csv(const std::vector<RppScore>& scores) {
  std::string out = io::csv_schema_line("scores") + "\n";
  out += "sample_id,score,sigma,J,seed\n";
  for (const auto& s : scores) {
    out += std::to_string(s.sample_id) + "," + io::format_double(s.value) + "," +
           io::format_double(s.sigma) + "," + std::to_string(s.draws) + "," + std::to_string(s.seed) +
           "\n";
  }
  return out;
}

void save_scores(const std::vector<RppScore>& scores, const std::filesystem::path& path) {
  io::write_atomic(path, scores_to_csv(scores));
}

std::vector<RppScore> load_scores(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<RppScore> out;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    if (io::trim(line).empty()) continue;
    if (io::check_csv_schema_line(line, "scores")) continue;
    const auto cells = io::split_csv_line(line);
    const std::string where = path.string() + " row " + std::to_string(row);
    if (!header_seen && !cells.empty() && io::trim(cells[0]) == "sample_id") {
      header_seen = true;
      continue;
    }
    if (cells.size() != 5) {
      throw ParseError(where + ": expected 5 cells, got " + std::to_string(cells.size()));
    }
    RppScore s;
    s.sample_id = io::parse_u64(cells[0], where + " sample_id");
    s.value = io::parse_double(cells[1], where + " score");
    s.sigma = io::parse_double(cells[2], where + " sigma");
    s.draws = io::parse_u64(cells[3], where + " J");
    s.seed = io::parse_u64(cells[4], where + " seed");
    if (!(s.value >= 0.0 && s.value <= 1.0)) throw ParseError(where + ": score outside [0,1]");
    out.push_back(s);
  }
  return out;
}

}  // namespace rppcert
