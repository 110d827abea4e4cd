#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mvface/classify.hpp"
#include "mvface/gabor.hpp"
#include "mvface/mvsc.hpp"

namespace mvface::data {

namespace fs = std::filesystem;

inline constexpr std::array<std::string_view, 7> kExpressions = {"AN", "DI", "FE", "HA",
                                                                  "NE", "SA", "SU"};
std::optional<int> expression_index(std::string_view code);

// ---------------------------------------------------------------------------
// Images and annotations
// ---------------------------------------------------------------------------

/// 8-bit binary PGM (P5) or PNG, as intensities in [0, 1]. Colour PNGs are
/// converted to luminance.
gabor::Image load_image(const fs::path& path);

/// Writes an 8-bit P5 PGM; values are clamped to [0, 1] and rounded.
void save_pgm(const fs::path& path, const gabor::Image& image);

enum class AnnotationMode { strict, lenient };

struct AnnotationOptions {
  AnnotationMode mode = AnnotationMode::strict;
  std::size_t expected_points = 122;
};

struct LoadedAnnotation {
  gabor::FiducialMask mask;
  std::vector<std::string> warnings;
};

/// Whitespace-separated "x y region" lines; '#' starts a comment.
LoadedAnnotation load_annotation(const fs::path& path, const AnnotationOptions& opts = {});
void save_annotation(const fs::path& path, const gabor::FiducialMask& mask);

// ---------------------------------------------------------------------------
// Manifests and splits
// ---------------------------------------------------------------------------

struct ManifestEntry {
  fs::path image_path;
  std::string subject_id;
  std::string expression;  // one of kExpressions
  fs::path annotation_path;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// Whitespace-separated "image subject expression annotation" lines, '#'
/// comments. Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const fs::path& path);
void save_manifest(const fs::path& path, const DatasetManifest& manifest);

enum class SplitMode { paper_protocol, ratio, explicit_lists };

struct SplitSpec {
  SplitMode mode = SplitMode::paper_protocol;
  std::uint64_t seed = 0;
  /// Fraction of entries sent to test in ratio mode.
  double test_ratio = 0.5;
  /// Manifest indices forming the test set in explicit mode.
  std::vector<std::size_t> test_indices;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// paper_protocol: one seeded-random entry per (subject, expression) pair
/// goes to test, the rest to train. ratio: stratified by expression.
Split split_dataset(const DatasetManifest& manifest, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::vector<int> view_dims = {20, 20};
  int num_atoms = 8;
  int num_samples = 200;
  int sparsity = 3;
  /// +infinity disables noise.
  double noise_snr_db = std::numeric_limits<double>::infinity();
  int num_classes = 1;
  /// Mean offset added to every nonzero code entry.
  double class_separation = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticInstance {
  mvsc::MultiViewFeatureMatrix features;
  mvsc::DictionarySet dictionary;
  mvsc::SparseCodeMatrix codes;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  /// Measured 10 log10(||DW||^2 / ||noise||^2); infinity when noiseless.
  double measured_snr_db = 0.0;
};

/// Random dictionaries with unit stacked-atom norms; atoms split into
/// num_classes disjoint blocks, and every sample of class c draws exactly
/// `sparsity` atoms from block c with values class_separation + N(0,1).
/// Sample i belongs to class i mod num_classes.
SyntheticInstance generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Feature file: text header, then little-endian float64 payload, each view
/// column-major, views in order.
struct FeatureFile {
  mvsc::MultiViewFeatureMatrix features;
  /// Free-form layout descriptor, e.g. "mogfa points=122 scales=5 orientations=8".
  std::string layout;
};

inline constexpr int kFeatureFormatVersion = 1;
void save_features(const fs::path& path, const FeatureFile& file);
FeatureFile load_features(const fs::path& path);

/// Per-sample metadata kept next to a feature file.
struct LabelRow {
  std::string sample_id;
  std::string subject;
  std::string expression;
  std::string split;  // "train" or "test"
};
void save_labels(const fs::path& path, const std::vector<LabelRow>& rows);
std::vector<LabelRow> load_labels(const fs::path& path);

inline constexpr int kModelFormatVersion = 1;

struct ModelArchive {
  int version = kModelFormatVersion;
  gabor::GaborParams gabor;
  std::string method;  // gmcfa, mogfa, whole, single:<view>
  std::string layout;
  std::vector<std::string> view_names;
  std::vector<std::size_t> view_dims;
  mvsc::DictionarySet dictionary;
  mvsc::SolverConfig solver;
  std::string task;  // "fer" or "fr"
  std::vector<std::string> class_names;
  std::optional<classify::LSModel> ls;
  std::optional<classify::SVMModel> svm;
  std::uint64_t seed = 0;
  std::string notes;
};

void save_model(const fs::path& path, const ModelArchive& archive);
ModelArchive load_model(const fs::path& path);

/// Throws DimensionError naming the first view whose dimension differs.
void check_compatible(const ModelArchive& archive, const mvsc::MultiViewFeatureMatrix& x);

}  // namespace mvface::data
