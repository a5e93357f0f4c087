#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rppcert {

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
  /// Ground truth, used for evaluation only; detectors never read it.
  bool poisoned = false;
  /// Stable identity across splits; keys the per-sample noise streams.
  std::uint64_t id = 0;
};

/// Labeled samples sharing one feature dimension and class count.
struct Dataset {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<Sample> samples;
  /// Non-fatal findings (empty classes, out-of-range features, ...).
  std::vector<std::string> warnings;
  /// Checksum of the CSV this dataset was last loaded from or saved to.
  std::string checksum;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> poison_indices() const;

  /// Throws InvalidArgument when a sample has the wrong dimension or an
  /// out-of-range label.
  void validate() const;
};

/// Row-major image layout (height, width, channels) laid over a flat
/// feature vector, index = (row * width + col) * channels + channel.
struct ImageDims {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }

  /// Square single-channel layout when d is a perfect square, else 1 x d.
  static ImageDims infer(std::size_t dim);
};

}  // namespace rppcert
