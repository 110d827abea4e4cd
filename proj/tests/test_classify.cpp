#include <gtest/gtest.h>

#include <random>

#include "mvface/classify.hpp"
#include "mvface/errors.hpp"
#include "oracles.hpp"

using namespace mvface;
using namespace mvface::classify;

namespace {

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  int ok = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ok += a[i] == b[i];
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

// Gaussian clusters around well-separated class means. The known separators
// are the means themselves; points whose winning margin under them falls
// below `margin` are redrawn.
LabeledCodes separable(int classes, int dim, int n, double margin, std::mt19937_64& rng) {
  const Eigen::MatrixXd means = 3.0 * oracle::gaussian(classes, dim, rng);
  LabeledCodes data;
  for (int c = 0; c < classes; ++c) data.class_names.push_back("k" + std::to_string(c));
  data.codes.resize(dim, n);
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    while (true) {
      const Eigen::VectorXd x = means.row(c).transpose() + 0.3 * oracle::gaussian(dim, 1, rng);
      const Eigen::VectorXd s = means * x - 0.5 * means.rowwise().squaredNorm();
      double second = -1e300;
      for (int k = 0; k < classes; ++k) {
        if (k != c) second = std::max(second, s[k]);
      }
      if (s[c] - second < margin) continue;
      data.codes.col(i) = x;
      break;
    }
    data.labels.push_back(c);
  }
  return data;
}

}  // namespace

TEST(LS, OrthogonalClasses) {
  LabeledCodes d;
  d.codes = Eigen::MatrixXd::Identity(2, 2);
  d.labels = {0, 1};
  d.class_names = {"a", "b"};
  const auto m = train_ls(d, 1e-8);
  EXPECT_EQ(predict(m, d.codes), d.labels);
}

TEST(LS, DuplicatedColumnsSamePredictions) {
  std::mt19937_64 rng(1);
  const auto d = separable(3, 4, 30, 0.5, rng);
  LabeledCodes dup = d;
  dup.codes.resize(4, 60);
  dup.codes << d.codes, d.codes;
  dup.labels.insert(dup.labels.end(), d.labels.begin(), d.labels.end());
  const Eigen::MatrixXd probe = oracle::gaussian(4, 50, rng);
  EXPECT_EQ(predict(train_ls(d, 0.0), probe), predict(train_ls(dup, 0.0), probe));
}

TEST(LS, SeparableThreeClass) {
  std::mt19937_64 rng(2);
  const auto d = separable(3, 5, 90, 0.5, rng);
  EXPECT_EQ(accuracy(predict(train_ls(d), d.codes), d.labels), 1.0);
}

TEST(LS, SingularWithoutRidge) {
  LabeledCodes d;
  d.codes = Eigen::MatrixXd::Ones(2, 4);
  d.labels = {0, 1, 0, 1};
  d.class_names = {"a", "b"};
  try {
    train_ls(d, 0.0);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("ridge"), std::string::npos) << e.what();
  }
}

TEST(SVM, SeparableTwoClass) {
  std::mt19937_64 rng(3);
  const auto d = separable(2, 3, 60, 1.0, rng);
  const auto m = train_svm(d, 1.0, 200, 0);
  EXPECT_EQ(accuracy(predict(m, d.codes), d.labels), 1.0);
}

TEST(SVM, StableUnderColumnShuffle) {
  std::mt19937_64 rng(4);
  const auto d = separable(3, 4, 60, 0.5, rng);
  std::vector<int> perm(60);
  for (int i = 0; i < 60; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  LabeledCodes s = d;
  for (int i = 0; i < 60; ++i) {
    s.codes.col(i) = d.codes.col(perm[static_cast<std::size_t>(i)]);
    s.labels[static_cast<std::size_t>(i)] = d.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double a = accuracy(predict(train_svm(d, 1.0, 200, seed), d.codes), d.labels);
    const double b = accuracy(predict(train_svm(s, 1.0, 200, seed), s.codes), s.labels);
    EXPECT_LE(std::abs(a - b) * 60, 1.0 + 1e-9) << seed;
  }
}

TEST(SVM, NoSignalGivesMajorityFraction) {
  LabeledCodes d;
  d.codes = Eigen::MatrixXd::Constant(2, 10, 0.5);
  d.labels = {0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  d.class_names = {"a", "b"};
  const auto m = train_svm(d);
  EXPECT_NEAR(accuracy(predict(m, d.codes), d.labels), 0.7, 1e-12);
}

TEST(SVM, SingleClassRejected) {
  LabeledCodes d;
  d.codes = Eigen::MatrixXd::Ones(2, 3);
  d.labels = {0, 0, 0};
  d.class_names = {"a"};
  EXPECT_THROW(train_svm(d), Error);
}

TEST(Predict, ZeroColumnTieGoesToFirstClass) {
  LSModel m;
  m.weights = Eigen::MatrixXd::Random(3, 4);
  m.bias = Eigen::VectorXd::Zero(3);
  EXPECT_EQ(predict(m, Eigen::MatrixXd::Zero(4, 1)), std::vector<int>{0});
}

TEST(Predict, CoordinatePicker) {
  SVMModel m;
  m.weights = Eigen::MatrixXd::Identity(3, 3);
  m.bias = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd x(3, 3);
  x << 0.1, 5, 0, 2, 0, 0, 0.3, 1, 0.5;
  EXPECT_EQ(predict(m, x), (std::vector<int>{1, 0, 2}));
}

TEST(Report, AllCorrect) {
  const std::vector<int> y = {0, 1, 2, 0};
  const auto r = recognition_report(y, y, {"a", "b", "c"});
  EXPECT_EQ(r.overall, 100.0);
  EXPECT_EQ(r.average, 100.0);
  for (const auto& c : r.per_class) EXPECT_EQ(*c, 100.0);
}

TEST(Report, SixtyNineOfSeventy) {
  std::vector<int> truth;
  for (int c = 0; c < 7; ++c) {
    for (int k = 0; k < 10; ++k) truth.push_back(c);
  }
  auto pred = truth;
  pred[3] = 4;
  const auto r = recognition_report(pred, truth, {"AN", "DI", "FE", "HA", "NE", "SA", "SU"});
  EXPECT_EQ(format_rate(r.average), "98.57");
  EXPECT_EQ(format_rate(r.overall), "98.57");
  EXPECT_EQ(r.confusion(0, 4), 1);
  const std::string table = format_table({{"GmCFA_SVM", r}});
  EXPECT_NE(table.find("98.57"), std::string::npos);
  const auto parsed = parse_table(table);
  ASSERT_EQ(parsed.columns.back(), "Aver");
  EXPECT_NEAR(*parsed.rows[0].values.back(), 98.57, 1e-9);
  EXPECT_NEAR(*parsed.rows[0].values[0], 90.0, 1e-9);
}

TEST(Report, EmptyClassIsNotApplicable) {
  const auto r = recognition_report({0, 0, 2}, {0, 0, 2}, {"a", "b", "c"});
  EXPECT_FALSE(r.per_class[1].has_value());
  EXPECT_EQ(r.average, 100.0);
  const auto csv = format_csv({{"x", r}});
  const auto parsed = parse_csv(csv);
  EXPECT_FALSE(parsed.rows[0].values[1].has_value());
  EXPECT_NE(format_table({{"x", r}}).find("n/a"), std::string::npos);
}

TEST(FormatRate, Decimals) {
  EXPECT_EQ(format_rate(90.0), "90");
  EXPECT_EQ(format_rate(100.0), "100");
  EXPECT_EQ(format_rate(96.5), "96.5");
  EXPECT_EQ(format_rate(200.0 / 3.0), "66.67");
}
