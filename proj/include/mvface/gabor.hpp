#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mvface::gabor {

using ComplexGrid = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

/// Grayscale image, rows = y, cols = x.
using Image = Eigen::MatrixXd;

struct GaborParams {
  double k_max = 1.5707963267948966;  // pi / 2
  double f = 1.4142135623730951;      // sqrt(2)
  double sigma = 6.283185307179586;   // 2 pi
  int num_scales = 5;
  int num_orientations = 8;
  /// Fixed half-width for every kernel. When unset each scale uses the
  /// smallest integer >= 2.5 sigma / k_v, capped at 64.
  std::optional<int> window_radius;

  void validate() const;

  /// k_v = k_max / f^v.
  double wave_number(int scale) const;
  /// phi_u = u pi / num_orientations.
  double orientation_angle(int orientation) const;
  int radius_for_scale(int scale) const;
};

struct GaborKernel {
  int scale = 0;
  int orientation = 0;
  int radius = 0;
  ComplexGrid grid;  // (2 radius + 1) x (2 radius + 1), grid(radius + dy, radius + dx)
};

class GaborBank {
 public:
  explicit GaborBank(const GaborParams& params);

  const GaborParams& params() const { return params_; }
  const std::vector<GaborKernel>& kernels() const { return kernels_; }
  /// Kernel (v, u) is stored at v * num_orientations + u.
  const GaborKernel& kernel(int scale, int orientation) const;
  int max_radius() const;
  std::size_t size() const { return kernels_.size(); }

 private:
  GaborParams params_;
  std::vector<GaborKernel> kernels_;
};

GaborBank build_bank(const GaborParams& params);

enum class Region { forehead = 0, eye = 1, mouth = 2 };
inline constexpr int kNumRegions = 3;
inline constexpr std::array<std::string_view, kNumRegions> kRegionNames = {"forehead", "eye",
                                                                          "mouth"};
std::optional<Region> parse_region(std::string_view name);
std::string_view region_name(Region r);

struct FiducialPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<Region> region;  // unset means unannotated
};

struct FiducialMask {
  std::vector<FiducialPoint> points;
  std::size_t size() const { return points.size(); }
};

/// (point, scale, orientation) -> flat index, orientation fastest.
struct FeatureLayout {
  int num_points = 0;
  int num_scales = 0;
  int num_orientations = 0;

  std::size_t length() const {
    return static_cast<std::size_t>(num_points) * num_scales * num_orientations;
  }
  std::size_t index(int point, int scale, int orientation) const {
    return (static_cast<std::size_t>(point) * num_scales + scale) * num_orientations + orientation;
  }
  bool operator==(const FeatureLayout&) const = default;
};

struct FeatureVector {
  Eigen::VectorXd values;
  FeatureLayout layout;
};

enum class BorderPolicy { strict, zero_pad };

/// Magnitude of the correlation of every kernel centred at every mask point.
/// Point coordinates are rounded to the nearest pixel.
FeatureVector extract_features(const Image& image, const FiducialMask& mask,
                               const GaborBank& bank,
                               BorderPolicy border = BorderPolicy::strict);

enum class Normalization { none, unit_norm, zscore };

void normalize_unit(FeatureVector& fv);

/// Per-coordinate mean / standard deviation fitted on training vectors.
struct ZScoreStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};
ZScoreStats fit_zscore(const std::vector<FeatureVector>& training);
void apply_zscore(FeatureVector& fv, const ZScoreStats& stats);

/// How a flat feature vector splits into views: one index list per view.
/// The union of the lists is a permutation of [0, length).
struct ViewPartition {
  std::string method;  // "mogfa", "gmcfa", "whole"
  std::vector<std::string> view_names;
  std::vector<std::vector<std::size_t>> indices;

  std::size_t num_views() const { return indices.size(); }
  std::vector<std::size_t> view_dims() const;
  std::vector<Eigen::VectorXd> split(const Eigen::VectorXd& values) const;
  Eigen::VectorXd merge(const std::vector<Eigen::VectorXd>& views, std::size_t length) const;
};

/// One view per orientation; (point-major, scale-minor) order within a view.
ViewPartition orientation_partition(const FeatureLayout& layout);
/// One view per facial region (forehead, eye, mouth); every coefficient of a
/// point lands in its region's view, points in mask order.
ViewPartition region_partition(const FeatureLayout& layout, const FiducialMask& mask);
ViewPartition whole_partition(const FeatureLayout& layout);

std::vector<Eigen::VectorXd> partition_by_orientation(const FeatureVector& fv);
FeatureVector unpartition_by_orientation(const std::vector<Eigen::VectorXd>& views,
                                         const FeatureLayout& layout);
std::vector<Eigen::VectorXd> partition_by_region(const FeatureVector& fv,
                                                 const FiducialMask& mask);

}  // namespace mvface::gabor
