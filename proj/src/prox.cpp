#include "mvface/prox.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mvface/errors.hpp"

namespace mvface::prox {

namespace {

void check_inputs(const Eigen::Ref<const Eigen::VectorXd>& v, double radius, const char* who) {
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw ParameterError(std::string(who) + ": radius must be a finite nonnegative number");
  }
  if (!v.allFinite()) throw NumericError(std::string(who) + ": input has non-finite entries");
}

}  // namespace

Eigen::VectorXd project_l1_ball(const Eigen::Ref<const Eigen::VectorXd>& v, double radius) {
  check_inputs(v, radius, "project_l1_ball");
  const Eigen::VectorXd mag = v.cwiseAbs();
  if (mag.sum() <= radius) return v;
  if (radius == 0.0) return Eigen::VectorXd::Zero(v.size());

  std::vector<double> sorted(mag.data(), mag.data() + mag.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  // theta = (sum of the rho largest magnitudes - radius) / rho, where rho is
  // the last position at which the sorted magnitude still exceeds it.
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }

  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double shrunk = std::max(mag(i) - theta, 0.0);
    out(i) = std::copysign(shrunk, v(i));
    if (shrunk == 0.0) out(i) = 0.0;
  }
  return out;
}

Eigen::VectorXd prox_linf(const Eigen::Ref<const Eigen::VectorXd>& v, double t) {
  check_inputs(v, t, "prox_linf");
  if (v.cwiseAbs().sum() <= t) return Eigen::VectorXd::Zero(v.size());
  return v - project_l1_ball(v, t);
}

ProxResult prox_l1inf_rows(const Eigen::Ref<const Eigen::MatrixXd>& m, double t) {
  ProxResult result;
  result.output.resize(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r).transpose();
    result.output.row(r) = prox_linf(row, t).transpose();
  }
  result.support_size = (result.output.array() != 0.0).count();
  return result;
}

double norm_l1inf(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.cols() == 0) return 0.0;
  return m.cwiseAbs().rowwise().maxCoeff().sum();
}

}  // namespace mvface::prox
