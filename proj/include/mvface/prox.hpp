#pragma once

#include <Eigen/Core>

namespace mvface::prox {

struct ProxResult {
  Eigen::MatrixXd output;
  Eigen::Index support_size = 0;
};

/// Euclidean projection onto {u : ||u||_1 <= radius} by sorting magnitudes
/// and soft-thresholding at the KKT threshold.
Eigen::VectorXd project_l1_ball(const Eigen::Ref<const Eigen::VectorXd>& v, double radius);

/// argmin_u 0.5 ||u - v||^2 + t ||u||_inf, via Moreau decomposition
/// v - project_l1_ball(v, t).
Eigen::VectorXd prox_linf(const Eigen::Ref<const Eigen::VectorXd>& v, double t);

/// prox_linf applied to every row of m independently, i.e. the prox of
/// t * sum_rows ||row||_inf.
ProxResult prox_l1inf_rows(const Eigen::Ref<const Eigen::MatrixXd>& m, double t);

/// sum over rows of the largest absolute entry.
double norm_l1inf(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace mvface::prox
