#pragma once

// Independent reference computations used only by the tests. Nothing here
// shares code with the library under test.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

// l1-ball projection by bisection on the threshold, then an exact
// recomputation of the threshold from the resulting support.
inline Eigen::VectorXd l1_projection(const Eigen::VectorXd& v, double radius) {
  const Eigen::VectorXd a = v.cwiseAbs();
  if (a.sum() <= radius) return v;
  if (radius == 0.0) return Eigen::VectorXd::Zero(v.size());
  double lo = 0.0;
  double hi = a.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double mass = (a.array() - mid).max(0.0).sum();
    (mass > radius ? lo : hi) = mid;
  }
  double support_sum = 0.0;
  int support = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] > hi) {
      support_sum += a[i];
      ++support;
    }
  }
  // Boundary entries sitting exactly at the threshold contribute nothing.
  const double theta = support > 0 ? (support_sum - radius) / support : hi;
  Eigen::VectorXd u(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::max(a[i] - theta, 0.0);
    u[i] = v[i] < 0 ? -m : m;
  }
  return u;
}

// Uniform-ish random point of the l1 ball of the given radius.
inline Eigen::VectorXd random_l1_point(Eigen::Index n, double radius, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(n);
  double s = e(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = e(rng) * (u(rng) < 0.5 ? -1.0 : 1.0);
    s += std::abs(x[i]);
  }
  return x * (radius / s);
}

inline double l1inf(const Eigen::MatrixXd& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double r = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) r = std::max(r, std::abs(m(i, j)));
    s += r;
  }
  return s;
}

// A subgradient of ||u||_inf: mass split evenly over the maximal entries.
inline Eigen::VectorXd linf_subgradient(const Eigen::VectorXd& u) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  const double m = u.cwiseAbs().maxCoeff();
  if (m == 0.0) return g;
  int ties = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) ties += std::abs(u[i]) == m;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u[i]) == m) g[i] = (u[i] > 0 ? 1.0 : -1.0) / ties;
  }
  return g;
}

// Euclidean projection of (u, s) onto the cone {(u, s) : |u_i| <= s}. The
// optimal height solves s' - s = sum_i (|u_i| - s')_+, found by bisection.
inline std::pair<Eigen::VectorXd, double> project_linf_cone(const Eigen::VectorXd& u, double s) {
  const Eigen::VectorXd a = u.cwiseAbs();
  auto excess = [&](double h) { return (h - s) - (a.array() - h).max(0.0).sum(); };
  double height = 0.0;
  if (excess(0.0) < 0.0) {
    double lo = 0.0;
    double hi = std::max(a.maxCoeff(), s) + 1.0;
    for (int it = 0; it < 200 && lo < hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    height = 0.5 * (lo + hi);
  }
  Eigen::VectorXd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = std::clamp(u[i], -height, height);
  return {out, height};
}

// Projected subgradient method on the epigraph form
//   min 0.5||u - v||^2 + t s  subject to  |u_i| <= s
// for every row, with unit steps. Stops early once an iterate repeats.
inline Eigen::MatrixXd prox_l1inf_projected(const Eigen::MatrixXd& v, double t, int steps) {
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const Eigen::VectorXd row = v.row(r).transpose();
    Eigen::VectorXd u = row;
    double s = row.cwiseAbs().maxCoeff();
    for (int k = 0; k < steps; ++k) {
      // A unit gradient step sends u to v and s to s - t.
      auto [nu, ns] = project_linf_cone(row, s - t);
      const bool fixed = ns == s && nu == u;
      u = nu;
      s = ns;
      if (fixed) break;
    }
    out.row(r) = u.transpose();
  }
  return out;
}

// (1/N) sum_p ||X_p - D_p W||_F^2 on stacked blocks.
inline double fit_term(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d,
                       const Eigen::MatrixXd& w) {
  return (x - d * w).squaredNorm() / static_cast<double>(x.cols());
}

inline double codes_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d,
                              const Eigen::MatrixXd& w, double gamma) {
  return fit_term(x, d, w) + gamma * l1inf(w);
}

// Subgradient descent on the code subproblem with steps 1/(mu k), where mu is
// the strong convexity modulus of the fit term, keeping the best iterate.
inline double codes_subgradient_min(const Eigen::MatrixXd& x, const Eigen::MatrixXd& d,
                                    double gamma, int steps) {
  const double n = static_cast<double>(x.cols());
  const Eigen::MatrixXd gram = d.transpose() * d;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const double mu = 2.0 * es.eigenvalues().minCoeff() / n;
  // Start from the unpenalized least-squares solution.
  Eigen::MatrixXd w = gram.ldlt().solve(d.transpose() * x);
  const Eigen::MatrixXd dtx = d.transpose() * x;
  double best = codes_objective(x, d, w, gamma);
  for (int k = 1; k <= steps; ++k) {
    Eigen::MatrixXd g = (2.0 / n) * (gram * w - dtx);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      g.row(i) += gamma * linf_subgradient(w.row(i).transpose()).transpose();
    }
    w -= g / (mu * k);
    best = std::min(best, codes_objective(x, d, w, gamma));
  }
  return best;
}

}  // namespace oracle
