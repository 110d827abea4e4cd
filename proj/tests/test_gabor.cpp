#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mvface/errors.hpp"
#include "mvface/gabor.hpp"

using namespace mvface;
using namespace mvface::gabor;

namespace {

constexpr double kPi = 3.14159265358979323846;

FiducialMask labelled_mask(int forehead, int eye, int mouth) {
  FiducialMask m;
  int i = 0;
  auto add = [&](int count, Region r) {
    for (int k = 0; k < count; ++k, ++i) {
      m.points.push_back({100.0 + i % 20, 100.0 + i / 20, r});
    }
  };
  add(forehead, Region::forehead);
  add(eye, Region::eye);
  add(mouth, Region::mouth);
  return m;
}

Eigen::VectorXd iota(std::size_t n) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  return v;
}

void expect_permutation(const std::vector<Eigen::VectorXd>& views, std::size_t n) {
  std::multiset<double> seen;
  for (const auto& v : views) seen.insert(v.data(), v.data() + v.size());
  ASSERT_EQ(seen.size(), n);
  std::size_t k = 0;
  for (double x : seen) EXPECT_EQ(x, static_cast<double>(k++));
}

}  // namespace

TEST(GaborParams, WaveNumberAndAngle) {
  GaborParams p;
  EXPECT_EQ(p.wave_number(0), p.k_max);
  EXPECT_NEAR(p.orientation_angle(2), kPi / 4, 1e-15);
  for (int v = 0; v + 1 < p.num_scales; ++v) EXPECT_GT(p.wave_number(v), p.wave_number(v + 1));
}

TEST(GaborParams, DefaultRadii) {
  GaborParams p;
  // ceil(2.5 sigma / k_v) = ceil(10 sqrt(2)^v); exact at even v.
  const int expected[] = {10, 15, 20, 29, 40};
  for (int v = 0; v < 5; ++v) {
    EXPECT_EQ(p.radius_for_scale(v), expected[v]);
  }
}

TEST(GaborParams, InvalidFieldsNamed) {
  GaborParams p;
  p.f = 1.0;
  try {
    p.validate();
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("f"), std::string::npos);
  }
  GaborParams q;
  q.num_orientations = 0;
  try {
    build_bank(q);
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("num_orientations"), std::string::npos);
  }
}

TEST(GaborBank, FortyDcFreeKernels) {
  const auto bank = build_bank(GaborParams{});
  ASSERT_EQ(bank.size(), 40u);
  for (const auto& k : bank.kernels()) {
    EXPECT_EQ(k.grid.rows(), 2 * k.radius + 1);
    EXPECT_LT(std::abs(k.grid.sum()) / k.grid.cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_EQ(&bank.kernel(2, 3), &bank.kernels()[2 * 8 + 3]);
}

TEST(GaborBank, DcFreeWithWideWindow) {
  GaborParams p;
  p.window_radius = 64;
  const auto bank = build_bank(p);
  for (const auto& k : bank.kernels()) {
    EXPECT_LT(std::abs(k.grid.sum()) / k.grid.cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(GaborBank, KernelMatchesClosedFormAwayFromCentre) {
  // Envelope and carrier at one offset, checked against a direct evaluation
  // up to the DC term, which is bounded by the envelope magnitude.
  GaborParams p;
  const auto bank = build_bank(p);
  const auto& k = bank.kernel(1, 3);
  const double kv = p.wave_number(1);
  const double phi = p.orientation_angle(3);
  const int dx = 2;
  const int dy = -1;
  const double env = kv * kv / (p.sigma * p.sigma) *
                     std::exp(-kv * kv * (dx * dx + dy * dy) / (2 * p.sigma * p.sigma));
  const std::complex<double> carrier =
      std::polar(1.0, kv * std::cos(phi) * dx + kv * std::sin(phi) * dy);
  const auto got = k.grid(k.radius + dy, k.radius + dx);
  EXPECT_LT(std::abs(got / env - carrier), 1e-3);
}

TEST(ExtractFeatures, LengthFor122Points) {
  const auto bank = build_bank(GaborParams{});
  FiducialMask mask;
  for (int i = 0; i < 122; ++i) mask.points.push_back({50.0 + i % 11 * 10, 50.0 + i / 11 * 10, {}});
  const Image img = Image::Random(220, 220);
  const auto fv = extract_features(img, mask, bank);
  EXPECT_EQ(fv.values.size(), 4880);
  EXPECT_EQ(fv.layout.length(), 4880u);
}

TEST(ExtractFeatures, ConstantImageIsNearZero) {
  const auto bank = build_bank(GaborParams{});
  FiducialMask mask;
  mask.points.push_back({32, 32, {}});
  const Image flat = Image::Constant(64, 64, 0.8);
  GaborParams small;
  small.window_radius = 20;
  const auto fv = extract_features(flat, mask, build_bank(small));
  EXPECT_LT(fv.values.cwiseAbs().maxCoeff(), 1e-8 * 0.8);
  (void)bank;
}

TEST(ExtractFeatures, TranslationEquivariant) {
  const auto bank = build_bank(GaborParams{});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image big(160, 160);
  for (Eigen::Index i = 0; i < big.size(); ++i) big.data()[i] = u(rng);
  FiducialMask a;
  a.points = {{60, 60, {}}, {70, 65, {}}};
  FiducialMask b = a;
  for (auto& q : b.points) {
    q.x += 7;
    q.y += 3;
  }
  Image shifted = Image::Zero(160, 160);
  shifted.block(3, 7, 157, 153) = big.block(0, 0, 157, 153);
  EXPECT_EQ(extract_features(big, a, bank).values, extract_features(shifted, b, bank).values);
}

TEST(ExtractFeatures, StrictBorderNamesPoint) {
  const auto bank = build_bank(GaborParams{});
  FiducialMask mask;
  mask.points = {{100, 100, {}}, {5, 100, {}}};
  const Image img = Image::Zero(200, 200);
  try {
    extract_features(img, mask, bank);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("point 1"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(extract_features(img, mask, bank, BorderPolicy::zero_pad));
}

TEST(OrientationPartition, EightViewsOf610) {
  FeatureLayout layout{122, 5, 8};
  const FeatureVector fv{iota(layout.length()), layout};
  const auto views = partition_by_orientation(fv);
  ASSERT_EQ(views.size(), 8u);
  for (const auto& v : views) EXPECT_EQ(v.size(), 610);
  expect_permutation(views, 4880);
  // View u holds every (point, scale) coefficient of orientation u.
  EXPECT_EQ(views[3][0], static_cast<double>(layout.index(0, 0, 3)));
  EXPECT_EQ(views[3][6], static_cast<double>(layout.index(1, 1, 3)));
  EXPECT_EQ(unpartition_by_orientation(views, layout).values, fv.values);
}

TEST(RegionPartition, ViewLengthsFromLabelCounts) {
  FeatureLayout layout{122, 5, 8};
  const auto mask = labelled_mask(30, 52, 40);
  const FeatureVector fv{iota(layout.length()), layout};
  const auto views = partition_by_region(fv, mask);
  ASSERT_EQ(views.size(), 3u);
  EXPECT_EQ(views[0].size(), 1200);
  EXPECT_EQ(views[1].size(), 2080);
  EXPECT_EQ(views[2].size(), 1600);
  expect_permutation(views, 4880);
}

TEST(RegionPartition, AllEye) {
  FeatureLayout layout{122, 5, 8};
  const auto views = partition_by_region({iota(4880), layout}, labelled_mask(0, 122, 0));
  EXPECT_EQ(views[0].size(), 0);
  EXPECT_EQ(views[1].size(), 4880);
  EXPECT_EQ(views[2].size(), 0);
}

TEST(RegionPartition, UnlabelledPointIsAnnotationError) {
  FeatureLayout layout{3, 5, 8};
  auto mask = labelled_mask(1, 1, 1);
  mask.points[2].region.reset();
  try {
    region_partition(layout, mask);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("point 2"), std::string::npos) << e.what();
  }
}

TEST(ViewPartition, MergeInvertsSplit) {
  FeatureLayout layout{7, 5, 8};
  const auto part = region_partition(layout, labelled_mask(2, 3, 2));
  const Eigen::VectorXd v = Eigen::VectorXd::Random(static_cast<Eigen::Index>(layout.length()));
  EXPECT_EQ(part.merge(part.split(v), layout.length()), v);
  const auto whole = whole_partition(layout);
  EXPECT_EQ(whole.num_views(), 1u);
  EXPECT_EQ(whole.split(v)[0], v);
}

TEST(Normalization, UnitAndZscore) {
  FeatureLayout layout{1, 1, 3};
  FeatureVector a{Eigen::Vector3d(3, 4, 0), layout};
  normalize_unit(a);
  EXPECT_NEAR(a.values.norm(), 1.0, 1e-15);
  std::vector<FeatureVector> train = {{Eigen::Vector3d(1, 2, 5), layout},
                                      {Eigen::Vector3d(3, 6, 5), layout}};
  const auto stats = fit_zscore(train);
  FeatureVector b{Eigen::Vector3d(3, 2, 5), layout};
  apply_zscore(b, stats);
  EXPECT_NEAR(b.values[0], 1.0, 1e-12);
  EXPECT_NEAR(b.values[1], -1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(b.values[2]));
}
