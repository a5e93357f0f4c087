#include "rppcert/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <numeric>
#include <sstream>

#include "rppcert/error.hpp"
#include "rppcert/io.hpp"
#include "rppcert/mathkit.hpp"
#include "rppcert/rng.hpp"

namespace rppcert {

using nlohmann::json;

std::size_t ProbVector::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

bool is_valid_spv(const ProbVector& p, double tol) {
  if (p.probs.empty()) return false;
  double sum = 0.0;
  for (double v : p.probs) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    sum += v;
  }
  return std::fabs(sum - 1.0) <= tol;
}

ProbVector softmax(std::span<const double> z) {
  ProbVector out;
  out.probs.resize(z.size());
  if (z.empty()) return out;
  const double zmax = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    out.probs[k] = std::exp(z[k] - zmax);
    denom += out.probs[k];
  }
  for (double& v : out.probs) v /= denom;
  return out;
}

void ModelParams::validate() const {
  if (num_classes == 0 || dim == 0) throw InvalidArgument("model: K and d must be positive");
  const std::size_t in = output_inputs();
  if (architecture == Architecture::OneHiddenLayer) {
    if (hidden == 0) throw InvalidArgument("model: one-hidden-layer model needs hidden > 0");
    if (hidden_weights.size() != hidden * dim) {
      throw InvalidArgument("model: hidden_weights shape does not match hidden x dim");
    }
    if (hidden_biases.size() != hidden) {
      throw InvalidArgument("model: hidden_biases length does not match hidden");
    }
  }
  if (weights.size() != num_classes * in) {
    throw InvalidArgument("model: weights shape does not match K x inputs");
  }
  if (biases.size() != num_classes) throw InvalidArgument("model: biases length does not match K");
}

bool ModelParams::operator==(const ModelParams& o) const {
  return architecture == o.architecture && num_classes == o.num_classes && dim == o.dim &&
         hidden == o.hidden && weights == o.weights && biases == o.biases &&
         hidden_weights == o.hidden_weights && hidden_biases == o.hidden_biases &&
         meta.seed == o.meta.seed && meta.epochs == o.meta.epochs &&
         meta.learning_rate == o.meta.learning_rate && meta.batch_size == o.meta.batch_size &&
         meta.weight_decay == o.meta.weight_decay && meta.train_accuracy == o.meta.train_accuracy &&
         meta.loss_history == o.meta.loss_history && meta.warnings == o.meta.warnings;
}

namespace {

void hidden_activations(const ModelParams& m, std::span<const double> x, std::vector<double>& h) {
  h.assign(m.hidden, 0.0);
  for (std::size_t j = 0; j < m.hidden; ++j) {
    const double* row = &m.hidden_weights[j * m.dim];
    double s = m.hidden_biases[j];
    for (std::size_t i = 0; i < m.dim; ++i) s += row[i] * x[i];
    h[j] = s > 0.0 ? s : 0.0;
  }
}

void output_logits(const ModelParams& m, std::span<const double> in, std::vector<double>& z) {
  const std::size_t n_in = m.output_inputs();
  z.assign(m.num_classes, 0.0);
  for (std::size_t k = 0; k < m.num_classes; ++k) {
    const double* row = &m.weights[k * n_in];
    double s = m.biases[k];
    for (std::size_t i = 0; i < n_in; ++i) s += row[i] * in[i];
    z[k] = s;
  }
}

void check_dim(const ModelParams& m, std::span<const double> x) {
  if (x.size() != m.dim) {
    throw InvalidArgument("model expects dimension " + std::to_string(m.dim) + ", got " +
                          std::to_string(x.size()));
  }
}

double log_sum_exp(const std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - zmax);
  return zmax + std::log(s);
}

double mean_loss(const ModelParams& m, const Dataset& data) {
  std::vector<double> h, z;
  double total = 0.0;
  for (const auto& s : data.samples) {
    if (m.architecture == Architecture::OneHiddenLayer) {
      hidden_activations(m, s.features, h);
      output_logits(m, h, z);
    } else {
      output_logits(m, s.features, z);
    }
    total += log_sum_exp(z) - z[s.label];
  }
  return total / static_cast<double>(data.size());
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::vector<double> logits(const ModelParams& model, std::span<const double> x) {
  check_dim(model, x);
  std::vector<double> z;
  if (model.architecture == Architecture::OneHiddenLayer) {
    std::vector<double> h;
    hidden_activations(model, x, h);
    output_logits(model, h, z);
  } else {
    output_logits(model, x, z);
  }
  return z;
}

ProbVector predict_spv(const ModelParams& model, std::span<const double> x) {
  return softmax(logits(model, x));
}

std::size_t predict_label(const ModelParams& model, std::span<const double> x) {
  const auto z = logits(model, x);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double accuracy(const ModelParams& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : data.samples) correct += predict_label(model, s.features) == s.label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ModelParams train(const Dataset& data, const TrainingConfig& cfg) {
  if (data.empty()) throw InvalidArgument("train: empty dataset");
  if (data.num_classes == 0 || data.dim == 0) throw InvalidArgument("train: K and d must be positive");
  if (cfg.batch_size == 0) throw InvalidArgument("train: batch size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (cfg.architecture == Architecture::OneHiddenLayer && cfg.hidden == 0) {
    throw InvalidArgument("train: one-hidden-layer architecture needs hidden > 0");
  }
  data.validate();

  ModelParams m;
  m.architecture = cfg.architecture;
  m.num_classes = data.num_classes;
  m.dim = data.dim;
  m.hidden = cfg.architecture == Architecture::OneHiddenLayer ? cfg.hidden : 0;
  m.meta.seed = cfg.seed;
  m.meta.epochs = cfg.epochs;
  m.meta.learning_rate = cfg.learning_rate;
  m.meta.batch_size = cfg.batch_size;
  m.meta.weight_decay = cfg.weight_decay;

  const auto counts = data.class_counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) m.meta.warnings.push_back("class " + std::to_string(k) + " has no training samples");
  }

  const std::size_t n_in = m.output_inputs();
  m.weights.assign(m.num_classes * n_in, 0.0);
  m.biases.assign(m.num_classes, 0.0);
  if (m.architecture == Architecture::OneHiddenLayer) {
    rng::Stream init(rng::derive(cfg.seed, {rng::kInit}));
    m.hidden_weights.resize(m.hidden * m.dim);
    m.hidden_biases.assign(m.hidden, 0.0);
    const double hscale = std::sqrt(2.0 / static_cast<double>(m.dim));
    for (double& w : m.hidden_weights) w = init.normal(0.0, hscale);
    const double oscale = std::sqrt(1.0 / static_cast<double>(m.hidden));
    for (double& w : m.weights) w = init.normal(0.0, oscale);
  }

  std::vector<std::size_t> order(data.size());
  std::vector<double> g_w(m.weights.size()), g_b(m.biases.size());
  std::vector<double> g_hw(m.hidden_weights.size()), g_hb(m.hidden_biases.size());
  std::vector<double> h, z, delta(m.num_classes), dh(m.hidden);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Stream shuffler(rng::derive(cfg.seed, {rng::kShuffle, epoch}));
    rng::shuffle(order.begin(), order.end(), shuffler);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(g_w.begin(), g_w.end(), 0.0);
      std::fill(g_b.begin(), g_b.end(), 0.0);
      std::fill(g_hw.begin(), g_hw.end(), 0.0);
      std::fill(g_hb.begin(), g_hb.end(), 0.0);

      for (std::size_t idx = start; idx < end; ++idx) {
        const Sample& s = data.samples[order[idx]];
        std::span<const double> in = s.features;
        if (m.architecture == Architecture::OneHiddenLayer) {
          hidden_activations(m, s.features, h);
          in = h;
        }
        output_logits(m, in, z);
        const ProbVector p = softmax(z);
        for (std::size_t k = 0; k < m.num_classes; ++k) {
          delta[k] = p.probs[k] - (k == s.label ? 1.0 : 0.0);
          g_b[k] += delta[k];
          double* gw = &g_w[k * n_in];
          for (std::size_t i = 0; i < n_in; ++i) gw[i] += delta[k] * in[i];
        }
        if (m.architecture == Architecture::OneHiddenLayer) {
          std::fill(dh.begin(), dh.end(), 0.0);
          for (std::size_t k = 0; k < m.num_classes; ++k) {
            const double* w = &m.weights[k * n_in];
            for (std::size_t j = 0; j < m.hidden; ++j) dh[j] += delta[k] * w[j];
          }
          for (std::size_t j = 0; j < m.hidden; ++j) {
            if (h[j] <= 0.0) continue;
            g_hb[j] += dh[j];
            double* ghw = &g_hw[j * m.dim];
            for (std::size_t i = 0; i < m.dim; ++i) ghw[i] += dh[j] * s.features[i];
          }
        }
      }

      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < m.weights.size(); ++i) {
        m.weights[i] -= scale * g_w[i] + cfg.learning_rate * cfg.weight_decay * m.weights[i];
      }
      for (std::size_t i = 0; i < m.biases.size(); ++i) m.biases[i] -= scale * g_b[i];
      for (std::size_t i = 0; i < m.hidden_weights.size(); ++i) {
        m.hidden_weights[i] -=
            scale * g_hw[i] + cfg.learning_rate * cfg.weight_decay * m.hidden_weights[i];
      }
      for (std::size_t i = 0; i < m.hidden_biases.size(); ++i) m.hidden_biases[i] -= scale * g_hb[i];
    }

    const double loss = mean_loss(m, data);
    if (!std::isfinite(loss) || !all_finite(m.weights) || !all_finite(m.biases) ||
        !all_finite(m.hidden_weights)) {
      throw TrainingError("train: loss became non-finite at epoch " + std::to_string(epoch + 1));
    }
    m.meta.loss_history.push_back(loss);
  }

  m.meta.train_accuracy = accuracy(m, data);
  return m;
}

// ---- serialization ---------------------------------------------------------

namespace {

constexpr const char* kModelKind = "rppcert-model";
constexpr const char* kOracleKind = "rppcert-analytic-oracle";

const char* arch_name(Architecture a) {
  return a == Architecture::SoftmaxLinear ? "softmax-linear" : "one-hidden-layer";
}

json rows_to_json(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  json out = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    out.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                      flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
  }
  return out;
}

const json& field(const json& j, const char* name) {
  if (!j.contains(name)) throw ParseError(std::string("model file: missing field '") + name + "'");
  return j.at(name);
}

template <typename T>
T get_field(const json& j, const char* name) {
  try {
    return field(j, name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("model file: field '") + name + "' has the wrong type");
  }
}

std::vector<double> flatten_rows(const json& j, const char* name, std::size_t rows,
                                 std::size_t cols) {
  const json& arr = field(j, name);
  if (!arr.is_array()) throw ParseError(std::string("model file: field '") + name + "' is not an array");
  if (arr.size() != rows) {
    throw InvalidArgument(std::string("model file: field '") + name + "' has " +
                          std::to_string(arr.size()) + " rows but the declared shape needs " +
                          std::to_string(rows));
  }
  std::vector<double> flat;
  flat.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> row;
    try {
      row = arr[r].get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ParseError(std::string("model file: field '") + name + "' row " + std::to_string(r) +
                       " is not numeric");
    }
    if (row.size() != cols) {
      throw InvalidArgument(std::string("model file: field '") + name + "' row " +
                            std::to_string(r) + " has " + std::to_string(row.size()) +
                            " columns, expected " + std::to_string(cols));
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return flat;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON at byte " + std::to_string(e.byte) +
                     " (" + e.what() + ")");
  }
}

void check_schema(const json& j, const char* kind) {
  if (!j.is_object()) throw ParseError(std::string(kind) + ": top level is not an object");
  const auto ver = j.value("schema_version", std::string{});
  if (ver.empty()) throw ParseError(std::string(kind) + ": missing field 'schema_version'");
  if (std::atoi(ver.c_str()) != io::kSchemaMajor) {
    throw ParseError(std::string(kind) + ": unsupported schema_version " + ver);
  }
  if (j.value("kind", std::string{}) != kind) {
    throw ParseError(std::string(kind) + ": field 'kind' does not name this artifact");
  }
}

}  // namespace

std::string model_to_json(const ModelParams& m) {
  m.validate();
  json j;
  j["schema_version"] = "1.0";
  j["kind"] = kModelKind;
  j["architecture"] = arch_name(m.architecture);
  j["num_classes"] = m.num_classes;
  j["dim"] = m.dim;
  j["hidden"] = m.hidden;
  j["weights"] = rows_to_json(m.weights, m.num_classes, m.output_inputs());
  j["biases"] = m.biases;
  if (m.architecture == Architecture::OneHiddenLayer) {
    j["hidden_weights"] = rows_to_json(m.hidden_weights, m.hidden, m.dim);
    j["hidden_biases"] = m.hidden_biases;
  }
  j["training"] = {{"seed", m.meta.seed},
                   {"epochs", m.meta.epochs},
                   {"learning_rate", m.meta.learning_rate},
                   {"batch_size", m.meta.batch_size},
                   {"weight_decay", m.meta.weight_decay},
                   {"train_accuracy", m.meta.train_accuracy},
                   {"loss_history", m.meta.loss_history},
                   {"warnings", m.meta.warnings}};
  return j.dump(1) + "\n";
}

ModelParams model_from_json(const std::string& text) {
  const json j = parse_json(text, "model file");
  check_schema(j, kModelKind);
  ModelParams m;
  const auto arch = get_field<std::string>(j, "architecture");
  if (arch == "softmax-linear") {
    m.architecture = Architecture::SoftmaxLinear;
  } else if (arch == "one-hidden-layer") {
    m.architecture = Architecture::OneHiddenLayer;
  } else {
    throw ParseError("model file: field 'architecture' has unknown value '" + arch + "'");
  }
  m.num_classes = get_field<std::size_t>(j, "num_classes");
  m.dim = get_field<std::size_t>(j, "dim");
  m.hidden = get_field<std::size_t>(j, "hidden");
  m.weights = flatten_rows(j, "weights", m.num_classes, m.output_inputs());
  m.biases = get_field<std::vector<double>>(j, "biases");
  if (m.architecture == Architecture::OneHiddenLayer) {
    m.hidden_weights = flatten_rows(j, "hidden_weights", m.hidden, m.dim);
    m.hidden_biases = get_field<std::vector<double>>(j, "hidden_biases");
  }
  const json& t = field(j, "training");
  m.meta.seed = get_field<std::uint64_t>(t, "seed");
  m.meta.epochs = get_field<std::size_t>(t, "epochs");
  m.meta.learning_rate = get_field<double>(t, "learning_rate");
  m.meta.batch_size = get_field<std::size_t>(t, "batch_size");
  m.meta.weight_decay = get_field<double>(t, "weight_decay");
  m.meta.train_accuracy = get_field<double>(t, "train_accuracy");
  m.meta.loss_history = get_field<std::vector<double>>(t, "loss_history");
  m.meta.warnings = get_field<std::vector<std::string>>(t, "warnings");
  m.validate();
  return m;
}

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  io::write_atomic(path, model_to_json(model));
}

ModelParams load_model(const std::filesystem::path& path) {
  return model_from_json(io::read_file(path));
}

std::string model_checksum(const ModelParams& model) { return io::fnv1a_hex(model_to_json(model)); }

// ---- oracles ---------------------------------------------------------------

ProbVector ModelOracle::spv(std::span<const double> x) const { return predict_spv(*model_, x); }

ProbVector HardLabelOracle::spv(std::span<const double> x) const {
  const ProbVector soft = inner_->spv(x);
  ProbVector out;
  out.probs.assign(soft.size(), 0.0);
  out.probs[soft.argmax()] = 1.0;
  return out;
}

AnalyticLinearOracle::AnalyticLinearOracle(std::vector<double> direction, double offset,
                                           double sigma0)
    : direction_(std::move(direction)), offset_(offset), sigma0_(sigma0) {
  if (direction_.empty()) throw InvalidArgument("analytic oracle: empty direction");
  double s = 0.0;
  for (double v : direction_) s += v * v;
  norm_ = std::sqrt(s);
  if (!(norm_ > 0.0) || !std::isfinite(norm_)) {
    throw InvalidArgument("analytic oracle: direction must have positive finite norm");
  }
  if (!(sigma0_ > 0.0)) throw InvalidArgument("analytic oracle: sigma0 must be positive");
  if (!std::isfinite(offset_)) throw InvalidArgument("analytic oracle: offset must be finite");
}

double AnalyticLinearOracle::margin(std::span<const double> x) const {
  if (x.size() != direction_.size()) {
    throw InvalidArgument("analytic oracle expects dimension " + std::to_string(direction_.size()) +
                          ", got " + std::to_string(x.size()));
  }
  double s = offset_;
  for (std::size_t i = 0; i < x.size(); ++i) s += direction_[i] * x[i];
  return s;
}

ProbVector AnalyticLinearOracle::spv(std::span<const double> x) const {
  const double t = margin(x) / (sigma0_ * norm_);
  // Evaluate the smaller tail directly so neither entry loses precision.
  const double p1 = norm_cdf(t);
  const double p0 = norm_cdf(-t);
  return ProbVector{{p0, p1}};
}

ProbVector analytic_spv(const AnalyticLinearOracle& oracle, std::span<const double> x) {
  return oracle.spv(x);
}

std::string AnalyticLinearOracle::to_json() const {
  json j;
  j["schema_version"] = "1.0";
  j["kind"] = kOracleKind;
  j["direction"] = direction_;
  j["offset"] = offset_;
  j["sigma0"] = sigma0_;
  return j.dump(1) + "\n";
}

AnalyticLinearOracle AnalyticLinearOracle::from_json(const std::string& text) {
  const json j = parse_json(text, "analytic oracle file");
  check_schema(j, kOracleKind);
  try {
    return AnalyticLinearOracle(j.at("direction").get<std::vector<double>>(),
                                j.at("offset").get<double>(), j.at("sigma0").get<double>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("analytic oracle file: ") + e.what());
  }
}

// ---- probability table -----------------------------------------------------

ProbabilityTable ProbabilityTable::load_csv(const std::filesystem::path& path,
                                            std::size_t num_classes) {
  if (num_classes < 2) throw InvalidArgument("probability table: K must be at least 2");
  std::istringstream in(io::read_file(path));
  ProbabilityTable table;
  table.num_classes_ = num_classes;
  std::string line;
  std::size_t row = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++row;
    const auto trimmed = io::trim(line);
    if (trimmed.empty()) continue;
    if (io::check_csv_schema_line(trimmed, "probability-table")) continue;
    const auto cells = io::split_csv_line(trimmed);
    if (first_data && !cells.empty() && cells[0] == "sample_id") {
      first_data = false;
      continue;
    }
    first_data = false;
    const std::string where = "probability table row " + std::to_string(row);
    if (cells.size() != num_classes + 1) {
      throw ParseError(where + ": expected " + std::to_string(num_classes + 1) + " cells, got " +
                       std::to_string(cells.size()));
    }
    const auto id = io::parse_u64(cells[0], where);
    ProbVector p;
    p.probs.reserve(num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) p.probs.push_back(io::parse_double(cells[k + 1], where));
    if (!is_valid_spv(p, 1e-6)) throw ParseError(where + ": entries are not a probability vector");
    auto [it, inserted] = table.rows_.try_emplace(id);
    if (inserted) table.order_.push_back(id);
    it->second.push_back(std::move(p));
  }
  if (table.order_.empty()) throw ParseError("probability table: no data rows");
  return table;
}

const std::vector<ProbVector>& ProbabilityTable::rows(std::uint64_t id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) throw InvalidArgument("probability table: unknown sample id " + std::to_string(id));
  return it->second;
}

}  // namespace rppcert
