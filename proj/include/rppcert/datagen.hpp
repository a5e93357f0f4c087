#pragma once

// Synthetic datasets, class-imbalance profiles, trigger rendering and the
// poisoning plan. Everything is a pure function of its inputs and seed.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rppcert/dataset.hpp"

namespace rppcert {

struct BlobSpec {
  std::size_t num_classes = 2;
  std::size_t dim = 2;
  /// Samples per class; a single entry applies to every class.
  std::vector<std::size_t> per_class = {100};
  /// K x d means. Empty: auto layout with pairwise mean distance `separation`
  /// around a base point of 0.5 in every coordinate.
  std::vector<double> means;
  /// Per-class diagonal standard deviations, K x d. Empty: `noise_std`.
  std::vector<double> stddevs;
  double separation = 4.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};

/// Gaussian-mixture samples in class order; ids are 0..N-1.
Dataset make_blobs(const BlobSpec& spec);

enum class ImbalanceKind { LongTail, Step };

struct ImbalanceSpec {
  ImbalanceKind kind = ImbalanceKind::Step;
  double rho = 1.0;
  /// Fraction of minority classes (step only).
  double mu = 0.9;
  std::size_t n_max = 0;
};

/// Target class sizes. Long-tail: round(n_max * rho^(-i/(K-1))). Step: the
/// last ceil(mu*K) classes get round(n_max/rho), the rest n_max.
std::vector<std::size_t> imbalance_counts(const ImbalanceSpec& spec, std::size_t num_classes);

/// Draws each class down to its target size without replacement.
Dataset subsample_imbalanced(const Dataset& data, const ImbalanceSpec& spec, std::uint64_t seed);

enum class TriggerKind { Chessboard, Blend };

struct TriggerSpec {
  TriggerKind kind = TriggerKind::Chessboard;
  /// ||delta||_2 after rescaling.
  double target_l2 = 0.8;
  ImageDims dims;
  /// Top-left corner of the chessboard patch; nullopt places it in the
  /// bottom-right corner.
  std::optional<std::size_t> patch_row;
  std::optional<std::size_t> patch_col;
  std::size_t patch_side = 3;
  double blend_rate = 0.2;
  /// Blend pattern over the full image; empty selects the seeded smooth
  /// noise pattern.
  std::vector<double> blend_pattern;
  std::uint64_t pattern_seed = 0;
  std::size_t target_class = 0;
};

/// The additive trigger delta, rescaled so that ||delta||_2 == target_l2.
std::vector<double> render_trigger(const TriggerSpec& spec);

/// Seeded low-frequency pattern in [0,1]: a 4x4 grid of uniforms per channel,
/// bilinearly upsampled.
std::vector<double> smooth_noise_pattern(const ImageDims& dims, std::uint64_t seed);

enum class PoisonMode { Count, Rate };
enum class SourcePolicy { MinorityOnly, Any };

struct PoisonPlan {
  PoisonMode mode = PoisonMode::Count;
  std::size_t count = 0;
  /// Fraction of the whole dataset (rate mode).
  double rate = 0.0;
  SourcePolicy policy = SourcePolicy::MinorityOnly;
  TriggerSpec trigger;
  std::uint64_t seed = 0;
  /// Optional clipping of stamped features to [clip_lo, clip_hi].
  bool clip = false;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
};

struct PoisonResult {
  Dataset data;
  /// Ascending indices into data.samples of the stamped samples.
  std::vector<std::size_t> indices;
};

/// Number of samples the plan poisons on `data`.
std::size_t planned_poison_count(const Dataset& data, const PoisonPlan& plan);

/// Indices eligible as poison sources. Minority-only takes samples of
/// classes smaller than the largest class (every class when balanced);
/// both policies exclude the target class and already-poisoned samples.
std::vector<std::size_t> eligible_sources(const Dataset& data, const PoisonPlan& plan);

PoisonResult apply_poison(const Dataset& data, const PoisonPlan& plan);

/// Stamps delta onto x (no relabelling).
std::vector<double> stamp(std::span<const double> x, std::span<const double> delta);

enum class CalibrationMode { Balanced, Imbalanced };

struct SplitSpec {
  std::size_t calib_n = 100;
  double test_fraction = 0.2;
  CalibrationMode calib_mode = CalibrationMode::Balanced;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset calibration;
  Dataset test;
};

/// Calibration and test sets are drawn from clean samples only; every
/// poisoned sample stays in train. Balanced calibration takes calib_n/K per
/// class (remainder to the lowest classes). Imbalanced calibration takes one
/// sample per minority class and splits the rest over the largest classes.
SplitResult split(const Dataset& data, const SplitSpec& spec);

struct DatasetManifest {
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> class_counts;
  std::optional<ImbalanceSpec> imbalance;
  std::optional<PoisonPlan> poison;
  std::uint64_t seed = 0;
  std::string csv_path;
  std::string poison_index_path;
  std::string checksum;
  std::vector<std::uint64_t> sample_ids;
  std::optional<std::pair<double, double>> feature_range;
  std::vector<std::string> warnings;
};

/// `label,f_0,...,f_{d-1}` rows with round-trip decimal text.
std::string dataset_to_csv(const Dataset& data);

/// Writes the CSV, the JSON manifest next to it (`<stem>.json`) and, when
/// the dataset has poisoned samples, `<stem>.poison.json`. Returns the
/// manifest as written.
DatasetManifest save_dataset(const Dataset& data, const std::filesystem::path& csv_path,
                             DatasetManifest manifest);

/// Parses a dataset CSV. Ragged rows, non-numeric cells and labels >= K are
/// ParseErrors naming the row; features outside `feature_range` are recorded
/// as warnings.
Dataset ingest_csv(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads CSV + manifest + poison index list written by save_dataset.
Dataset load_dataset(const std::filesystem::path& csv_path);

std::filesystem::path manifest_path_for(const std::filesystem::path& csv_path);
std::filesystem::path poison_path_for(const std::filesystem::path& csv_path);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

std::string trigger_to_json(const TriggerSpec& t);
TriggerSpec trigger_from_json(const std::string& text);

}  // namespace rppcert
