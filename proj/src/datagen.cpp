#include "rppcert/datagen.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"
#include <numeric>
#include <sstream>

#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/rng.hpp"

namespace rppcert {

using nlohmann::json;

// ---- Dataset / ImageDims ---------------------------------------------------

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto& s : samples) {
    if (s.label < num_classes) ++counts[s.label];
  }
  return counts;
}

std::vector<std::size_t> Dataset::poison_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].poisoned) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != dim) {
      throw InvalidArgument("dataset: sample " + std::to_string(i) + " has dimension " +
                            std::to_string(samples[i].features.size()) + ", expected " +
                            std::to_string(dim));
    }
    if (samples[i].label >= num_classes) {
      throw InvalidArgument("dataset: sample " + std::to_string(i) + " has label " +
                            std::to_string(samples[i].label) + " >= K");
    }
  }
}

ImageDims ImageDims::infer(std::size_t dim) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
  if (side * side == dim) return {side, side, 1};
  return {1, dim, 1};
}

// ---- make_blobs ------------------------------------------------------------

namespace {

std::vector<double> auto_layout(std::size_t k_classes, std::size_t dim, double separation,
                                std::uint64_t seed) {
  rng::Stream stream(rng::derive(seed, {rng::kDatagen, 1}));
  std::vector<std::vector<double>> dirs;
  for (std::size_t k = 0; k < k_classes; ++k) {
    std::vector<double> v(dim);
    for (;;) {
      for (double& x : v) x = stream.normal();
      if (k < dim) {
        // Gram-Schmidt against the earlier directions.
        for (const auto& u : dirs) {
          const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
          for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
        }
      }
      const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (n > 1e-8) {
        for (double& x : v) x /= n;
        break;
      }
    }
    dirs.push_back(v);
  }
  std::vector<double> means(k_classes * dim);
  const double scale = separation / std::sqrt(2.0);
  for (std::size_t k = 0; k < k_classes; ++k) {
    for (std::size_t i = 0; i < dim; ++i) means[k * dim + i] = 0.5 + scale * dirs[k][i];
  }
  return means;
}

}  // namespace

Dataset make_blobs(const BlobSpec& spec) {
  const std::size_t K = spec.num_classes;
  const std::size_t d = spec.dim;
  if (K < 2) throw InvalidArgument("make_blobs: need at least 2 classes");
  if (d < 1) throw InvalidArgument("make_blobs: dimension must be positive");
  if (spec.per_class.size() != 1 && spec.per_class.size() != K) {
    throw InvalidArgument("make_blobs: per_class must have 1 or K entries");
  }
  if (!spec.means.empty() && spec.means.size() != K * d) {
    throw InvalidArgument("make_blobs: means must be K x d");
  }
  std::vector<double> stds = spec.stddevs;
  if (stds.empty()) {
    stds.assign(K * d, spec.noise_std);
  } else if (stds.size() != K * d) {
    throw InvalidArgument("make_blobs: stddevs must be K x d");
  }
  for (double s : stds) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("make_blobs: degenerate covariance (standard deviations must be positive)");
    }
  }
  const std::vector<double> means =
      spec.means.empty() ? auto_layout(K, d, spec.separation, spec.seed) : spec.means;

  Dataset out;
  out.num_classes = K;
  out.dim = d;
  rng::Stream stream(rng::derive(spec.seed, {rng::kDatagen, 2}));
  std::uint64_t id = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t n = spec.per_class.size() == 1 ? spec.per_class[0] : spec.per_class[k];
    if (n == 0) out.warnings.push_back("class " + std::to_string(k) + " is empty");
    for (std::size_t j = 0; j < n; ++j) {
      Sample s;
      s.label = k;
      s.id = id++;
      s.features.resize(d);
      for (std::size_t i = 0; i < d; ++i) s.features[i] = stream.normal(means[k * d + i], stds[k * d + i]);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

// ---- imbalance -------------------------------------------------------------

namespace {

std::size_t minority_class_count(double mu, std::size_t K) {
  const double x = mu * static_cast<double>(K);
  const double nearest = std::round(x);
  if (std::fabs(x - nearest) < 1e-9) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(x));
}

}  // namespace

std::vector<std::size_t> imbalance_counts(const ImbalanceSpec& spec, std::size_t K) {
  if (K == 0) throw InvalidArgument("imbalance: K must be positive");
  if (!(spec.rho >= 1.0) || !std::isfinite(spec.rho)) throw InvalidArgument("imbalance: rho must be >= 1");
  if (spec.n_max == 0) throw InvalidArgument("imbalance: n_max must be positive");
  const double n_max = static_cast<double>(spec.n_max);
  std::vector<std::size_t> counts(K, spec.n_max);
  if (spec.kind == ImbalanceKind::LongTail) {
    for (std::size_t i = 1; i < K; ++i) {
      const double expo = -static_cast<double>(i) / static_cast<double>(K - 1);
      counts[i] = static_cast<std::size_t>(std::llround(n_max * std::pow(spec.rho, expo)));
    }
  } else {
    if (!(spec.mu > 0.0 && spec.mu < 1.0)) throw InvalidArgument("imbalance: mu must lie in (0, 1)");
    const std::size_t minority = minority_class_count(spec.mu, K);
    if (minority >= K) throw InvalidArgument("imbalance: ceil(mu*K) must leave at least one majority class");
    const auto small = static_cast<std::size_t>(std::llround(n_max / spec.rho));
    for (std::size_t i = K - minority; i < K; ++i) counts[i] = small;
  }
  return counts;
}

Dataset subsample_imbalanced(const Dataset& data, const ImbalanceSpec& spec, std::uint64_t seed) {
  ImbalanceSpec effective = spec;
  const auto available = data.class_counts();
  if (effective.n_max == 0) {
    effective.n_max = available.empty() ? 0 : *std::max_element(available.begin(), available.end());
  }
  const auto targets = imbalance_counts(effective, data.num_classes);

  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.samples[i].label].push_back(i);

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < data.num_classes; ++k) {
    if (by_class[k].size() < targets[k]) {
      throw PreconditionError("subsample_imbalanced: class " + std::to_string(k) + " has " +
                              std::to_string(by_class[k].size()) + " samples, needs " +
                              std::to_string(targets[k]));
    }
    rng::Stream stream(rng::derive(seed, {rng::kSelect, k}));
    rng::shuffle(by_class[k].begin(), by_class[k].end(), stream);
    keep.insert(keep.end(), by_class[k].begin(), by_class[k].begin() + static_cast<std::ptrdiff_t>(targets[k]));
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.num_classes = data.num_classes;
  out.dim = data.dim;
  out.warnings = data.warnings;
  out.samples.reserve(keep.size());
  for (auto i : keep) out.samples.push_back(data.samples[i]);
  return out;
}

// ---- triggers --------------------------------------------------------------

std::vector<double> smooth_noise_pattern(const ImageDims& dims, std::uint64_t seed) {
  constexpr std::size_t kGrid = 4;
  rng::Stream stream(rng::derive(seed, {rng::kDatagen, 3}));
  std::vector<double> grid(kGrid * kGrid * dims.channels);
  for (double& g : grid) g = stream.uniform();
  std::vector<double> out(dims.size());
  for (std::size_t r = 0; r < dims.height; ++r) {
    const double gy = dims.height > 1 ? static_cast<double>(r) * (kGrid - 1) / (dims.height - 1) : 0.0;
    const auto y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), kGrid - 2);
    const double ty = gy - static_cast<double>(y0);
    for (std::size_t c = 0; c < dims.width; ++c) {
      const double gx = dims.width > 1 ? static_cast<double>(c) * (kGrid - 1) / (dims.width - 1) : 0.0;
      const auto x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), kGrid - 2);
      const double tx = gx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < dims.channels; ++ch) {
        auto at = [&](std::size_t y, std::size_t x) { return grid[(y * kGrid + x) * dims.channels + ch]; };
        const double top = (1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1);
        const double bottom = (1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1);
        out[(r * dims.width + c) * dims.channels + ch] = (1 - ty) * top + ty * bottom;
      }
    }
  }
  return out;
}

std::vector<double> render_trigger(const TriggerSpec& spec) {
  if (!(spec.target_l2 > 0.0) || !std::isfinite(spec.target_l2)) {
    throw InvalidArgument("render_trigger: target_l2 must be positive (a zero trigger is a no-op)");
  }
  const ImageDims& dims = spec.dims;
  if (dims.size() == 0) throw InvalidArgument("render_trigger: empty image dimensions");
  std::vector<double> delta(dims.size(), 0.0);

  if (spec.kind == TriggerKind::Chessboard) {
    const std::size_t side = spec.patch_side;
    if (side == 0) throw InvalidArgument("render_trigger: patch side must be positive");
    if (side > dims.height || side > dims.width) {
      throw InvalidArgument("render_trigger: patch does not fit inside the image");
    }
    const std::size_t row = spec.patch_row.value_or(dims.height - side);
    const std::size_t col = spec.patch_col.value_or(dims.width - side);
    if (row + side > dims.height || col + side > dims.width) {
      throw InvalidArgument("render_trigger: patch does not fit inside the image");
    }
    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) {
        const double v = (i + j) % 2 == 0 ? 1.0 : -1.0;
        for (std::size_t ch = 0; ch < dims.channels; ++ch) {
          delta[((row + i) * dims.width + (col + j)) * dims.channels + ch] = v;
        }
      }
    }
  } else {
    if (!(spec.blend_rate > 0.0 && spec.blend_rate <= 1.0)) {
      throw InvalidArgument("render_trigger: blend rate must lie in (0, 1]");
    }
    const std::vector<double> pattern =
        spec.blend_pattern.empty() ? smooth_noise_pattern(dims, spec.pattern_seed) : spec.blend_pattern;
    if (pattern.size() != dims.size()) {
      throw InvalidArgument("render_trigger: blend pattern size does not match the image");
    }
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = spec.blend_rate * pattern[i];
  }

  const double norm = std::sqrt(std::inner_product(delta.begin(), delta.end(), delta.begin(), 0.0));
  if (!(norm > 0.0)) throw InvalidArgument("render_trigger: pattern has zero norm");
  const double scale = spec.target_l2 / norm;
  for (double& v : delta) v *= scale;
  return delta;
}

std::vector<double> stamp(std::span<const double> x, std::span<const double> delta) {
  if (x.size() != delta.size()) throw InvalidArgument("stamp: trigger and input dimensions differ");
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
  return out;
}

// ---- poisoning -------------------------------------------------------------

std::vector<std::size_t> eligible_sources(const Dataset& data, const PoisonPlan& plan) {
  const auto counts = data.class_counts();
  const std::size_t largest = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  const bool balanced = std::all_of(counts.begin(), counts.end(),
                                    [&](std::size_t c) { return c == largest || c == 0; });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    if (s.poisoned || s.label == plan.trigger.target_class) continue;
    if (plan.policy == SourcePolicy::MinorityOnly && !balanced && counts[s.label] >= largest) continue;
    out.push_back(i);
  }
  return out;
}

std::size_t planned_poison_count(const Dataset& data, const PoisonPlan& plan) {
  if (plan.mode == PoisonMode::Count) return plan.count;
  if (!(plan.rate >= 0.0 && plan.rate <= 1.0)) throw InvalidArgument("poison: rate must lie in [0, 1]");
  return static_cast<std::size_t>(std::llround(plan.rate * static_cast<double>(data.size())));
}

PoisonResult apply_poison(const Dataset& data, const PoisonPlan& plan) {
  if (plan.trigger.target_class >= data.num_classes) {
    throw InvalidArgument("poison: target class " + std::to_string(plan.trigger.target_class) +
                          " is out of range");
  }
  const std::size_t wanted = planned_poison_count(data, plan);
  const auto eligible = eligible_sources(data, plan);
  if (plan.mode == PoisonMode::Rate && eligible.empty()) {
    throw PreconditionError("poison: no eligible source samples");
  }
  if (wanted > eligible.size()) {
    throw PreconditionError("poison: plan needs " + std::to_string(wanted) + " samples but only " +
                            std::to_string(eligible.size()) + " are eligible");
  }

  PoisonResult result{data, {}};
  if (wanted == 0) return result;
  if (plan.trigger.dims.size() != data.dim) {
    throw InvalidArgument("poison: trigger image size " + std::to_string(plan.trigger.dims.size()) +
                          " does not match feature dimension " + std::to_string(data.dim));
  }
  const auto delta = render_trigger(plan.trigger);

  std::vector<std::size_t> pool = eligible;
  rng::Stream stream(rng::derive(plan.seed, {rng::kSelect}));
  rng::shuffle(pool.begin(), pool.end(), stream);
  pool.resize(wanted);
  std::sort(pool.begin(), pool.end());

  for (auto i : pool) {
    Sample& s = result.data.samples[i];
    for (std::size_t f = 0; f < s.features.size(); ++f) {
      s.features[f] += delta[f];
      if (plan.clip) s.features[f] = std::clamp(s.features[f], plan.clip_lo, plan.clip_hi);
    }
    s.label = plan.trigger.target_class;
    s.poisoned = true;
  }
  result.indices = std::move(pool);
  return result;
}

// ---- split -----------------------------------------------------------------

SplitResult split(const Dataset& data, const SplitSpec& spec) {
  if (spec.calib_n == 0) throw InvalidArgument("split: calibration size must be positive");
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0)) {
    throw InvalidArgument("split: test fraction must lie in [0, 1)");
  }
  const std::size_t K = data.num_classes;
  std::vector<std::vector<std::size_t>> clean(K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.samples[i].poisoned) clean[data.samples[i].label].push_back(i);
  }
  for (std::size_t k = 0; k < K; ++k) {
    rng::Stream stream(rng::derive(spec.seed, {rng::kSelect, k}));
    rng::shuffle(clean[k].begin(), clean[k].end(), stream);
  }

  std::vector<std::size_t> quota(K, 0);
  if (spec.calib_mode == CalibrationMode::Balanced) {
    for (std::size_t k = 0; k < K; ++k) quota[k] = spec.calib_n / K + (k < spec.calib_n % K ? 1 : 0);
  } else {
    const auto counts = data.class_counts();
    const std::size_t largest = *std::max_element(counts.begin(), counts.end());
    std::vector<std::size_t> majority;
    std::size_t minority = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (counts[k] == largest) {
        majority.push_back(k);
      } else if (counts[k] > 0) {
        quota[k] = 1;
        ++minority;
      }
    }
    if (spec.calib_n < minority) {
      throw PreconditionError("split: calibration size is smaller than the number of minority classes");
    }
    const std::size_t rest = spec.calib_n - minority;
    for (std::size_t m = 0; m < majority.size(); ++m) {
      quota[majority[m]] = rest / majority.size() + (m < rest % majority.size() ? 1 : 0);
    }
  }

  std::vector<std::size_t> calib, remaining;
  for (std::size_t k = 0; k < K; ++k) {
    if (clean[k].size() < quota[k]) {
      throw PreconditionError("split: class " + std::to_string(k) + " has " +
                              std::to_string(clean[k].size()) + " clean samples, calibration needs " +
                              std::to_string(quota[k]));
    }
    calib.insert(calib.end(), clean[k].begin(), clean[k].begin() + static_cast<std::ptrdiff_t>(quota[k]));
    remaining.insert(remaining.end(), clean[k].begin() + static_cast<std::ptrdiff_t>(quota[k]), clean[k].end());
  }
  std::sort(remaining.begin(), remaining.end());
  rng::Stream stream(rng::derive(spec.seed, {rng::kSelect, 0xffffffffull}));
  rng::shuffle(remaining.begin(), remaining.end(), stream);
  const auto n_test =
      static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(remaining.size())));
  std::vector<std::size_t> test(remaining.begin(), remaining.begin() + static_cast<std::ptrdiff_t>(n_test));

  std::vector<char> taken(data.size(), 0);
  for (auto i : calib) taken[i] = 1;
  for (auto i : test) taken[i] = 1;
  std::sort(calib.begin(), calib.end());
  std::sort(test.begin(), test.end());

  auto subset = [&](const std::vector<std::size_t>& idx) {
    Dataset d;
    d.num_classes = K;
    d.dim = data.dim;
    for (auto i : idx) d.samples.push_back(data.samples[i]);
    return d;
  };
  SplitResult out{{}, subset(calib), subset(test)};
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!taken[i]) train.push_back(i);
  }
  out.train = subset(train);
  out.train.warnings = data.warnings;
  return out;
}

// ---- serialization ---------------------------------------------------------

namespace {

json imbalance_json(const ImbalanceSpec& s) {
  return {{"kind", s.kind == ImbalanceKind::LongTail ? "longtail" : "step"},
          {"rho", s.rho},
          {"mu", s.mu},
          {"n_max", s.n_max}};
}

ImbalanceSpec imbalance_from(const json& j) {
  ImbalanceSpec s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "longtail") {
    s.kind = ImbalanceKind::LongTail;
  } else if (kind == "step") {
    s.kind = ImbalanceKind::Step;
  } else {
    throw ParseError("manifest: unknown imbalance kind '" + kind + "'");
  }
  s.rho = j.at("rho").get<double>();
  s.mu = j.at("mu").get<double>();
  s.n_max = j.at("n_max").get<std::size_t>();
  return s;
}

json trigger_json(const TriggerSpec& t) {
  json j = {{"kind", t.kind == TriggerKind::Chessboard ? "chessboard" : "blend"},
            {"target_l2", t.target_l2},
            {"image", {t.dims.height, t.dims.width, t.dims.channels}},
            {"patch_side", t.patch_side},
            {"blend_rate", t.blend_rate},
            {"pattern_seed", t.pattern_seed},
            {"target_class", t.target_class}};
  j["patch_row"] = t.patch_row ? json(*t.patch_row) : json(nullptr);
  j["patch_col"] = t.patch_col ? json(*t.patch_col) : json(nullptr);
  if (!t.blend_pattern.empty()) j["blend_pattern"] = t.blend_pattern;
  return j;
}

TriggerSpec trigger_from(const json& j) {
  TriggerSpec t;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "chessboard") {
    t.kind = TriggerKind::Chessboard;
  } else if (kind == "blend") {
    t.kind = TriggerKind::Blend;
  } else {
    throw ParseError("trigger: unknown kind '" + kind + "'");
  }
  t.target_l2 = j.at("target_l2").get<double>();
  const auto image = j.at("image").get<std::vector<std::size_t>>();
  if (image.size() != 3) throw ParseError("trigger: field 'image' must be [height, width, channels]");
  t.dims = {image[0], image[1], image[2]};
  t.patch_side = j.at("patch_side").get<std::size_t>();
  t.blend_rate = j.at("blend_rate").get<double>();
  t.pattern_seed = j.at("pattern_seed").get<std::uint64_t>();
  t.target_class = j.at("target_class").get<std::size_t>();
  if (!j.at("patch_row").is_null()) t.patch_row = j.at("patch_row").get<std::size_t>();
  if (!j.at("patch_col").is_null()) t.patch_col = j.at("patch_col").get<std::size_t>();
  if (j.contains("blend_pattern")) t.blend_pattern = j.at("blend_pattern").get<std::vector<double>>();
  return t;
}

json poison_json(const PoisonPlan& p) {
  return {{"mode", p.mode == PoisonMode::Count ? "count" : "rate"},
          {"count", p.count},
          {"rate", p.rate},
          {"policy", p.policy == SourcePolicy::MinorityOnly ? "minority" : "any"},
          {"trigger", trigger_json(p.trigger)},
          {"seed", p.seed},
          {"clip", p.clip},
          {"clip_lo", p.clip_lo},
          {"clip_hi", p.clip_hi}};
}

PoisonPlan poison_from(const json& j) {
  PoisonPlan p;
  p.mode = j.at("mode").get<std::string>() == "rate" ? PoisonMode::Rate : PoisonMode::Count;
  p.count = j.at("count").get<std::size_t>();
  p.rate = j.at("rate").get<double>();
  p.policy = j.at("policy").get<std::string>() == "any" ? SourcePolicy::Any : SourcePolicy::MinorityOnly;
  p.trigger = trigger_from(j.at("trigger"));
  p.seed = j.at("seed").get<std::uint64_t>();
  p.clip = j.at("clip").get<bool>();
  p.clip_lo = j.at("clip_lo").get<double>();
  p.clip_hi = j.at("clip_hi").get<double>();
  return p;
}

json parse_or_throw(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON at byte " + std::to_string(e.byte));
  }
}

void check_kind(const json& j, const char* kind) {
  if (!j.is_object()) throw ParseError(std::string(kind) + ": top level is not an object");
  const auto ver = j.value("schema_version", std::string{});
  if (ver.empty() || std::atoi(ver.c_str()) != io::kSchemaMajor) {
    throw ParseError(std::string(kind) + ": missing or unsupported schema_version");
  }
  if (j.value("kind", std::string{}) != kind) throw ParseError(std::string(kind) + ": wrong artifact kind");
}

}  // namespace

std::string trigger_to_json(const TriggerSpec& t) {
  json j = trigger_json(t);
  j["schema_version"] = "1.0";
  j["kind_of_artifact"] = "rppcert-trigger";
  return j.dump(1) + "\n";
}

TriggerSpec trigger_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "trigger file");
  const auto ver = j.value("schema_version", std::string{});
  if (ver.empty() || std::atoi(ver.c_str()) != io::kSchemaMajor) {
    throw ParseError("trigger file: missing or unsupported schema_version");
  }
  try {
    return trigger_from(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("trigger file: ") + e.what());
  }
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schema_version"] = "1.0";
  j["kind"] = "rppcert-dataset";
  j["num_classes"] = m.num_classes;
  j["dim"] = m.dim;
  j["class_counts"] = m.class_counts;
  j["imbalance"] = m.imbalance ? imbalance_json(*m.imbalance) : json(nullptr);
  j["poison"] = m.poison ? poison_json(*m.poison) : json(nullptr);
  j["seed"] = m.seed;
  j["csv_path"] = m.csv_path;
  j["poison_index_path"] = m.poison_index_path;
  j["checksum"] = m.checksum;
  if (!m.sample_ids.empty()) j["sample_ids"] = m.sample_ids;
  j["feature_range"] = m.feature_range ? json({m.feature_range->first, m.feature_range->second}) : json(nullptr);
  j["warnings"] = m.warnings;
  return j.dump(1) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "dataset manifest");
  check_kind(j, "rppcert-dataset");
  DatasetManifest m;
  try {
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    m.class_counts = j.value("class_counts", std::vector<std::size_t>{});
    if (j.contains("imbalance") && !j.at("imbalance").is_null()) m.imbalance = imbalance_from(j.at("imbalance"));
    if (j.contains("poison") && !j.at("poison").is_null()) m.poison = poison_from(j.at("poison"));
    m.seed = j.value("seed", std::uint64_t{0});
    m.csv_path = j.value("csv_path", std::string{});
    m.poison_index_path = j.value("poison_index_path", std::string{});
    m.checksum = j.value("checksum", std::string{});
    m.sample_ids = j.value("sample_ids", std::vector<std::uint64_t>{});
    if (j.contains("feature_range") && !j.at("feature_range").is_null()) {
      const auto r = j.at("feature_range").get<std::vector<double>>();
      if (r.size() != 2) throw ParseError("dataset manifest: feature_range must have two entries");
      m.feature_range = std::make_pair(r[0], r[1]);
    }
    m.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ParseError(std::string("dataset manifest: ") + e.what());
  }
  return m;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

std::filesystem::path poison_path_for(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".poison.json");
  return p;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out = io::csv_schema_line("dataset") + "\nlabel";
  for (std::size_t i = 0; i < data.dim; ++i) out += ",f_" + std::to_string(i);
  out += '\n';
  for (const auto& s : data.samples) {
    out += std::to_string(s.label);
    for (double v : s.features) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

DatasetManifest save_dataset(const Dataset& data, const std::filesystem::path& csv_path,
                             DatasetManifest manifest) {
  data.validate();
  const std::string csv = dataset_to_csv(data);
  manifest.num_classes = data.num_classes;
  manifest.dim = data.dim;
  manifest.class_counts = data.class_counts();
  manifest.csv_path = csv_path.filename().string();
  manifest.checksum = io::fnv1a_hex(csv);
  manifest.warnings = data.warnings;
  manifest.sample_ids.clear();
  bool identity = true;
  for (std::size_t i = 0; i < data.size(); ++i) identity = identity && data.samples[i].id == i;
  if (!identity) {
    for (const auto& s : data.samples) manifest.sample_ids.push_back(s.id);
  }
  const auto poisoned = data.poison_indices();
  manifest.poison_index_path.clear();
  io::write_atomic(csv_path, csv);
  if (!poisoned.empty()) {
    const auto ppath = poison_path_for(csv_path);
    manifest.poison_index_path = ppath.filename().string();
    io::write_atomic(ppath, json(poisoned).dump() + "\n");
  }
  io::write_atomic(manifest_path_for(csv_path), manifest_to_json(manifest));
  return manifest;
}

Dataset ingest_csv(const std::filesystem::path& path, const DatasetManifest& manifest) {
  if (manifest.num_classes == 0) throw InvalidArgument("ingest_csv: manifest must declare K");
  const std::string text = io::read_file(path);
  std::istringstream in(text);
  Dataset out;
  out.num_classes = manifest.num_classes;
  out.dim = manifest.dim;
  std::string line;
  std::size_t row = 0;
  bool seen_data = false;
  std::size_t out_of_range = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto trimmed = io::trim(line);
    if (trimmed.empty()) continue;
    if (io::check_csv_schema_line(trimmed, "dataset")) continue;
    const auto cells = io::split_csv_line(trimmed);
    if (!seen_data && cells[0] == "label") {
      seen_data = true;
      continue;
    }
    seen_data = true;
    const std::string where = "dataset row " + std::to_string(row);
    if (out.dim == 0) out.dim = cells.size() - 1;
    if (cells.size() != out.dim + 1) {
      throw ParseError(where + ": expected " + std::to_string(out.dim + 1) + " cells, got " +
                       std::to_string(cells.size()));
    }
    Sample s;
    s.label = io::parse_u64(cells[0], where);
    if (s.label >= out.num_classes) {
      throw ParseError(where + ": label " + std::to_string(s.label) + " is not below K = " +
                       std::to_string(out.num_classes));
    }
    s.features.reserve(out.dim);
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const double v = io::parse_double(cells[i], where);
      if (manifest.feature_range && (v < manifest.feature_range->first || v > manifest.feature_range->second)) {
        ++out_of_range;
      }
      s.features.push_back(v);
    }
    s.id = out.samples.size();
    out.samples.push_back(std::move(s));
  }
  if (out.dim == 0) throw ParseError("dataset " + path.string() + ": no data rows");
  if (out_of_range > 0) {
    out.warnings.push_back(std::to_string(out_of_range) + " feature values lie outside the declared range");
  }
  if (!manifest.sample_ids.empty()) {
    if (manifest.sample_ids.size() != out.size()) {
      throw ParseError("dataset manifest: sample_ids length does not match the row count");
    }
    for (std::size_t i = 0; i < out.size(); ++i) out.samples[i].id = manifest.sample_ids[i];
  }
  out.checksum = io::fnv1a_hex(text);
  return out;
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  const auto mpath = manifest_path_for(csv_path);
  if (!std::filesystem::exists(mpath)) {
    throw IoError("dataset manifest " + mpath.string() + " not found");
  }
  const DatasetManifest manifest = manifest_from_json(io::read_file(mpath));
  Dataset data = ingest_csv(csv_path, manifest);
  if (!manifest.checksum.empty() && manifest.checksum != data.checksum) {
    throw ProvenanceError("dataset " + csv_path.string() + " does not match its manifest checksum");
  }
  if (!manifest.poison_index_path.empty()) {
    const auto ppath = csv_path.parent_path() / manifest.poison_index_path;
    json idx = parse_or_throw(io::read_file(ppath), "poison index list");
    try {
      for (auto i : idx.get<std::vector<std::size_t>>()) {
        if (i >= data.size()) throw ParseError("poison index list: index out of range");
        data.samples[i].poisoned = true;
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("poison index list: ") + e.what());
    }
  }
  data.warnings.insert(data.warnings.end(), manifest.warnings.begin(), manifest.warnings.end());
  return data;
}

}  // namespace rppcert
