#include "mvface/gabor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mvface/errors.hpp"

namespace mvface::gabor {

namespace {

constexpr int kMaxAutoRadius = 64;

[[noreturn]] void bad_param(const std::string& field, const std::string& why) {
  throw ParameterError("GaborParams." + field + " " + why);
}

}  // namespace

void GaborParams::validate() const {
  if (!(k_max > 0.0) || !std::isfinite(k_max)) bad_param("k_max", "must be positive and finite");
  if (!(f > 1.0) || !std::isfinite(f)) bad_param("f", "must be greater than 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) bad_param("sigma", "must be positive and finite");
  if (num_scales < 1) bad_param("num_scales", "must be at least 1");
  if (num_orientations < 1) bad_param("num_orientations", "must be at least 1");
  if (window_radius && *window_radius < 1) bad_param("window_radius", "must be at least 1");
}

double GaborParams::wave_number(int scale) const {
  return k_max / std::pow(f, scale);
}

double GaborParams::orientation_angle(int orientation) const {
  return orientation * std::numbers::pi / num_orientations;
}

int GaborParams::radius_for_scale(int scale) const {
  if (window_radius) return *window_radius;
  const double r = std::ceil(2.5 * sigma / wave_number(scale) - 1e-12);
  return std::clamp(static_cast<int>(r), 1, kMaxAutoRadius);
}

namespace {

// Psi(z) = (k^2/sigma^2) exp(-k^2 |z|^2 / (2 sigma^2)) [exp(i k.z) - c].
// The continuous kernel uses c = exp(-sigma^2/2); on a truncated grid that
// leaves a visible DC residue, so c is the envelope-weighted mean of the
// carrier over the grid, which zeroes the sampled sum.
GaborKernel make_kernel(const GaborParams& p, int scale, int orientation) {
  const double k = p.wave_number(scale);
  const double phi = p.orientation_angle(orientation);
  const double kx = k * std::cos(phi);
  const double ky = k * std::sin(phi);
  const double k2 = k * k;
  const double s2 = p.sigma * p.sigma;
  const int r = p.radius_for_scale(scale);
  const int side = 2 * r + 1;

  Eigen::MatrixXd envelope(side, side);
  ComplexGrid carrier(side, side);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double z2 = static_cast<double>(dx * dx + dy * dy);
      envelope(dy + r, dx + r) = (k2 / s2) * std::exp(-k2 * z2 / (2.0 * s2));
      carrier(dy + r, dx + r) = std::polar(1.0, kx * dx + ky * dy);
    }
  }
  std::complex<double> weighted(0.0, 0.0);
  double mass = 0.0;
  for (Eigen::Index i = 0; i < envelope.size(); ++i) {
    weighted += envelope(i) * carrier(i);
    mass += envelope(i);
  }
  const std::complex<double> dc = weighted / mass;

  GaborKernel kernel;
  kernel.scale = scale;
  kernel.orientation = orientation;
  kernel.radius = r;
  kernel.grid.resize(side, side);
  for (Eigen::Index i = 0; i < envelope.size(); ++i) {
    kernel.grid(i) = envelope(i) * (carrier(i) - dc);
  }
  return kernel;
}

}  // namespace

GaborBank::GaborBank(const GaborParams& params) : params_(params) {
  params_.validate();
  kernels_.reserve(static_cast<std::size_t>(params_.num_scales) * params_.num_orientations);
  for (int v = 0; v < params_.num_scales; ++v) {
    for (int u = 0; u < params_.num_orientations; ++u) {
      kernels_.push_back(make_kernel(params_, v, u));
    }
  }
}

const GaborKernel& GaborBank::kernel(int scale, int orientation) const {
  return kernels_.at(static_cast<std::size_t>(scale) * params_.num_orientations + orientation);
}

int GaborBank::max_radius() const {
  int r = 0;
  for (const auto& k : kernels_) r = std::max(r, k.radius);
  return r;
}

GaborBank build_bank(const GaborParams& params) { return GaborBank(params); }

std::optional<Region> parse_region(std::string_view name) {
  for (int i = 0; i < kNumRegions; ++i) {
    if (kRegionNames[i] == name) return static_cast<Region>(i);
  }
  return std::nullopt;
}

std::string_view region_name(Region r) { return kRegionNames[static_cast<int>(r)]; }

FeatureVector extract_features(const Image& image, const FiducialMask& mask,
                               const GaborBank& bank, BorderPolicy border) {
  const auto& params = bank.params();
  FeatureVector fv;
  fv.layout = {static_cast<int>(mask.size()), params.num_scales, params.num_orientations};
  fv.values.setZero(static_cast<Eigen::Index>(fv.layout.length()));

  const int pad = border == BorderPolicy::zero_pad ? bank.max_radius() : 0;
  Image padded;
  if (pad > 0) {
    padded.setZero(image.rows() + 2 * pad, image.cols() + 2 * pad);
    padded.block(pad, pad, image.rows(), image.cols()) = image;
  }
  const Image& source = pad > 0 ? padded : image;

  for (std::size_t p = 0; p < mask.size(); ++p) {
    const auto& pt = mask.points[p];
    const long px = std::lround(pt.x);
    const long py = std::lround(pt.y);
    if (px < 0 || py < 0 || px >= image.cols() || py >= image.rows()) {
      std::ostringstream os;
      os << "fiducial point " << p << " at (" << pt.x << ", " << pt.y
         << ") lies outside the " << image.cols() << "x" << image.rows() << " image";
      throw DimensionError(os.str());
    }
    for (const auto& kernel : bank.kernels()) {
      const long r = kernel.radius;
      const long cx = px + pad;
      const long cy = py + pad;
      if (cx - r < 0 || cy - r < 0 || cx + r >= source.cols() || cy + r >= source.rows()) {
        std::ostringstream os;
        os << "fiducial point " << p << " at (" << pt.x << ", " << pt.y
           << ") is within kernel radius " << r << " of the image border";
        throw DimensionError(os.str());
      }
      const auto patch = source.block(cy - r, cx - r, 2 * r + 1, 2 * r + 1);
      const double re = patch.cwiseProduct(kernel.grid.real()).sum();
      const double im = patch.cwiseProduct(kernel.grid.imag()).sum();
      fv.values(static_cast<Eigen::Index>(
          fv.layout.index(static_cast<int>(p), kernel.scale, kernel.orientation))) =
          std::hypot(re, im);
    }
  }
  return fv;
}

void normalize_unit(FeatureVector& fv) {
  const double n = fv.values.norm();
  if (n > 0.0) fv.values /= n;
}

ZScoreStats fit_zscore(const std::vector<FeatureVector>& training) {
  if (training.empty()) throw ParameterError("fit_zscore needs at least one training vector");
  const Eigen::Index len = training.front().values.size();
  ZScoreStats stats;
  stats.mean.setZero(len);
  stats.stddev.setZero(len);
  for (const auto& fv : training) {
    if (fv.values.size() != len) throw DimensionError("fit_zscore: feature lengths differ");
    stats.mean += fv.values;
  }
  stats.mean /= static_cast<double>(training.size());
  for (const auto& fv : training) {
    stats.stddev += (fv.values - stats.mean).array().square().matrix();
  }
  stats.stddev = (stats.stddev / static_cast<double>(training.size())).cwiseSqrt();
  for (Eigen::Index i = 0; i < len; ++i) {
    if (!(stats.stddev(i) > 0.0)) stats.stddev(i) = 1.0;
  }
  return stats;
}

void apply_zscore(FeatureVector& fv, const ZScoreStats& stats) {
  if (fv.values.size() != stats.mean.size()) {
    throw DimensionError("apply_zscore: feature length does not match the fitted statistics");
  }
  fv.values = (fv.values - stats.mean).cwiseQuotient(stats.stddev);
}

std::vector<std::size_t> ViewPartition::view_dims() const {
  std::vector<std::size_t> dims;
  dims.reserve(indices.size());
  for (const auto& idx : indices) dims.push_back(idx.size());
  return dims;
}

std::vector<Eigen::VectorXd> ViewPartition::split(const Eigen::VectorXd& values) const {
  std::vector<Eigen::VectorXd> views;
  views.reserve(indices.size());
  for (const auto& idx : indices) {
    Eigen::VectorXd view(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= static_cast<std::size_t>(values.size())) {
        throw DimensionError("view partition index exceeds feature length");
      }
      view(static_cast<Eigen::Index>(i)) = values(static_cast<Eigen::Index>(idx[i]));
    }
    views.push_back(std::move(view));
  }
  return views;
}

Eigen::VectorXd ViewPartition::merge(const std::vector<Eigen::VectorXd>& views,
                                     std::size_t length) const {
  if (views.size() != indices.size()) throw DimensionError("merge: view count mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(length));
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (static_cast<std::size_t>(views[v].size()) != indices[v].size()) {
      throw DimensionError("merge: view " + std::to_string(v) + " has the wrong length");
    }
    for (std::size_t i = 0; i < indices[v].size(); ++i) {
      out(static_cast<Eigen::Index>(indices[v][i])) = views[v](static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

ViewPartition orientation_partition(const FeatureLayout& layout) {
  ViewPartition part;
  part.method = "mogfa";
  for (int u = 0; u < layout.num_orientations; ++u) {
    part.view_names.push_back("ori" + std::to_string(u + 1));
    std::vector<std::size_t> idx;
    idx.reserve(static_cast<std::size_t>(layout.num_points) * layout.num_scales);
    for (int p = 0; p < layout.num_points; ++p) {
      for (int v = 0; v < layout.num_scales; ++v) idx.push_back(layout.index(p, v, u));
    }
    part.indices.push_back(std::move(idx));
  }
  return part;
}

ViewPartition region_partition(const FeatureLayout& layout, const FiducialMask& mask) {
  if (static_cast<int>(mask.size()) != layout.num_points) {
    throw DimensionError("region partition: mask has " + std::to_string(mask.size()) +
                         " points but the features were built from " +
                         std::to_string(layout.num_points));
  }
  ViewPartition part;
  part.method = "gmcfa";
  part.indices.resize(kNumRegions);
  for (auto name : kRegionNames) part.view_names.emplace_back(name);
  const int per_point = layout.num_scales * layout.num_orientations;
  for (int p = 0; p < layout.num_points; ++p) {
    const auto& region = mask.points[static_cast<std::size_t>(p)].region;
    if (!region) {
      throw IoError("annotation error: fiducial point " + std::to_string(p) +
                    " has no region label");
    }
    auto& idx = part.indices[static_cast<std::size_t>(*region)];
    const std::size_t base = layout.index(p, 0, 0);
    for (int j = 0; j < per_point; ++j) idx.push_back(base + static_cast<std::size_t>(j));
  }
  return part;
}

ViewPartition whole_partition(const FeatureLayout& layout) {
  ViewPartition part;
  part.method = "whole";
  part.view_names = {"whole"};
  std::vector<std::size_t> idx(layout.length());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  part.indices.push_back(std::move(idx));
  return part;
}

std::vector<Eigen::VectorXd> partition_by_orientation(const FeatureVector& fv) {
  if (static_cast<std::size_t>(fv.values.size()) != fv.layout.length()) {
    throw DimensionError("feature vector length does not match its layout");
  }
  return orientation_partition(fv.layout).split(fv.values);
}

FeatureVector unpartition_by_orientation(const std::vector<Eigen::VectorXd>& views,
                                         const FeatureLayout& layout) {
  return {orientation_partition(layout).merge(views, layout.length()), layout};
}

std::vector<Eigen::VectorXd> partition_by_region(const FeatureVector& fv,
                                                 const FiducialMask& mask) {
  if (static_cast<std::size_t>(fv.values.size()) != fv.layout.length()) {
    throw DimensionError("feature vector length does not match its layout");
  }
  return region_partition(fv.layout, mask).split(fv.values);
}

}  // namespace mvface::gabor
