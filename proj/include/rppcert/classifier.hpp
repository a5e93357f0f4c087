#pragma once

// Classifier oracles mapping an input vector to its predictive probability
// vector: a trainable softmax/MLP model, an analytic linear-Gaussian model
// with closed-form probabilities, and a table of externally computed
// probability vectors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rppcert/dataset.hpp"

namespace rppcert {

/// Length-K probability vector; entries in [0,1] summing to 1.
struct ProbVector {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  /// Index of the largest entry, ties to the smallest index.
  std::size_t argmax() const;
};

/// Anything that produces an SPV for a feature vector. Implementations
/// must be safe to call concurrently.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ProbVector spv(std::span<const double> x) const = 0;
};

enum class Architecture { SoftmaxLinear, OneHiddenLayer };

enum class SpvMode { Soft, Hard };

struct TrainingConfig {
  Architecture architecture = Architecture::SoftmaxLinear;
  std::size_t hidden = 0;
  std::size_t epochs = 30;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  double weight_decay = 0.0;
  double train_accuracy = 0.0;
  /// Mean cross-entropy over the training set after each epoch.
  std::vector<double> loss_history;
  std::vector<std::string> warnings;
};

struct ModelParams {
  Architecture architecture = Architecture::SoftmaxLinear;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::size_t hidden = 0;
  /// K x in, row-major; `in` is dim for softmax-linear and hidden otherwise.
  std::vector<double> weights;
  std::vector<double> biases;
  /// hidden x dim, row-major (one-hidden-layer only).
  std::vector<double> hidden_weights;
  std::vector<double> hidden_biases;
  TrainingMetadata meta;

  std::size_t output_inputs() const {
    return architecture == Architecture::SoftmaxLinear ? dim : hidden;
  }
  /// Throws InvalidArgument on inconsistent shapes.
  void validate() const;

  bool operator==(const ModelParams& other) const;
};

/// Mini-batch SGD on mean cross-entropy. Deterministic given cfg.seed.
/// Throws InvalidArgument on an empty dataset and TrainingError naming the
/// epoch if the loss becomes non-finite.
ModelParams train(const Dataset& data, const TrainingConfig& cfg);

std::vector<double> logits(const ModelParams& model, std::span<const double> x);
ProbVector predict_spv(const ModelParams& model, std::span<const double> x);
std::size_t predict_label(const ModelParams& model, std::span<const double> x);
double accuracy(const ModelParams& model, const Dataset& data);

/// Numerically stable softmax.
ProbVector softmax(std::span<const double> logits);

void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);
std::string model_to_json(const ModelParams& model);
ModelParams model_from_json(const std::string& text);
/// FNV-1a over the canonical JSON serialization.
std::string model_checksum(const ModelParams& model);

class ModelOracle final : public Oracle {
 public:
  explicit ModelOracle(std::shared_ptr<const ModelParams> model) : model_(std::move(model)) {}
  std::size_t num_classes() const override { return model_->num_classes; }
  std::size_t dim() const override { return model_->dim; }
  ProbVector spv(std::span<const double> x) const override;
  const ModelParams& model() const { return *model_; }

 private:
  std::shared_ptr<const ModelParams> model_;
};

/// One-hot indicator of the wrapped oracle's argmax (hard-label SPV).
class HardLabelOracle final : public Oracle {
 public:
  explicit HardLabelOracle(std::shared_ptr<const Oracle> inner) : inner_(std::move(inner)) {}
  std::size_t num_classes() const override { return inner_->num_classes(); }
  std::size_t dim() const override { return inner_->dim(); }
  ProbVector spv(std::span<const double> x) const override;

 private:
  std::shared_ptr<const Oracle> inner_;
};

/// Binary oracle with p1(x) = Phi((w.x + b) / (sigma0 * |w|)). This is the
/// exact probability that sign(w.(x + eta) + b) > 0 for eta ~ N(0, sigma0^2 I),
/// so its smoothing behaviour is known in closed form.
class AnalyticLinearOracle final : public Oracle {
 public:
  AnalyticLinearOracle(std::vector<double> direction, double offset, double sigma0);

  std::size_t num_classes() const override { return 2; }
  std::size_t dim() const override { return direction_.size(); }
  ProbVector spv(std::span<const double> x) const override;

  /// w.x + b
  double margin(std::span<const double> x) const;
  const std::vector<double>& direction() const { return direction_; }
  double offset() const { return offset_; }
  double sigma0() const { return sigma0_; }
  double direction_norm() const { return norm_; }

  std::string to_json() const;
  static AnalyticLinearOracle from_json(const std::string& text);

 private:
  std::vector<double> direction_;
  double offset_;
  double sigma0_;
  double norm_;
};

ProbVector analytic_spv(const AnalyticLinearOracle& oracle, std::span<const double> x);

/// Externally computed SPVs. For every sample id the first row is the SPV of
/// the unperturbed input and each later row the SPV of one noisy copy.
class ProbabilityTable {
 public:
  /// CSV rows `sample_id,p_0,...,p_{K-1}`; optional header row and
  /// `#` comment lines. Throws ParseError with the row number on bad input.
  static ProbabilityTable load_csv(const std::filesystem::path& path, std::size_t num_classes);

  std::size_t num_classes() const { return num_classes_; }
  /// Ids in first-appearance order.
  const std::vector<std::uint64_t>& ids() const { return order_; }
  const std::vector<ProbVector>& rows(std::uint64_t id) const;

 private:
  std::size_t num_classes_ = 0;
  std::vector<std::uint64_t> order_;
  std::map<std::uint64_t, std::vector<ProbVector>> rows_;
};

/// Validates an SPV: entries in [0,1], sum within 1e-9 of one.
bool is_valid_spv(const ProbVector& p, double tol = 1e-9);

}  // namespace rppcert
