#include "mvface/mvsc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mvface/errors.hpp"
#include "mvface/prox.hpp"

namespace mvface::mvsc {

// ---------------------------------------------------------------------------
// Containers
// ---------------------------------------------------------------------------

Eigen::Index MultiViewFeatureMatrix::total_dim() const {
  Eigen::Index d = 0;
  for (const auto& v : views) d += v.rows();
  return d;
}

void MultiViewFeatureMatrix::validate() const {
  if (views.empty()) throw DimensionError("feature matrix has no views");
  const Eigen::Index n = views.front().cols();
  for (std::size_t p = 0; p < views.size(); ++p) {
    if (views[p].cols() != n) {
      throw DimensionError("view " + std::to_string(p) + " has " +
                           std::to_string(views[p].cols()) + " samples, view 0 has " +
                           std::to_string(n));
    }
  }
  if (!sample_ids.empty() && static_cast<Eigen::Index>(sample_ids.size()) != n) {
    throw DimensionError("sample id count does not match the sample count");
  }
  if (!view_names.empty() && view_names.size() != views.size()) {
    throw DimensionError("view name count does not match the view count");
  }
}

Eigen::MatrixXd MultiViewFeatureMatrix::stacked() const {
  Eigen::MatrixXd out(total_dim(), num_samples());
  Eigen::Index row = 0;
  for (const auto& v : views) {
    out.middleRows(row, v.rows()) = v;
    row += v.rows();
  }
  return out;
}

MultiViewFeatureMatrix MultiViewFeatureMatrix::select_samples(
    const std::vector<std::size_t>& cols) const {
  MultiViewFeatureMatrix out;
  out.view_names = view_names;
  for (const auto& v : views) {
    Eigen::MatrixXd sub(v.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      sub.col(static_cast<Eigen::Index>(j)) = v.col(static_cast<Eigen::Index>(cols[j]));
    }
    out.views.push_back(std::move(sub));
  }
  if (!sample_ids.empty()) {
    for (auto c : cols) out.sample_ids.push_back(sample_ids.at(c));
  }
  return out;
}

MultiViewFeatureMatrix MultiViewFeatureMatrix::select_view(std::size_t view) const {
  if (view >= views.size()) {
    throw DimensionError("view " + std::to_string(view) + " out of range (" +
                         std::to_string(views.size()) + " views)");
  }
  MultiViewFeatureMatrix out;
  out.views.push_back(views[view]);
  out.sample_ids = sample_ids;
  if (!view_names.empty()) out.view_names.push_back(view_names[view]);
  return out;
}

Eigen::MatrixXd DictionarySet::stacked() const {
  Eigen::Index rows = 0;
  for (const auto& d : dictionaries) rows += d.rows();
  Eigen::MatrixXd out(rows, num_atoms());
  Eigen::Index row = 0;
  for (const auto& d : dictionaries) {
    out.middleRows(row, d.rows()) = d;
    row += d.rows();
  }
  return out;
}

double DictionarySet::max_atom_norm_sq() const {
  double m = 0.0;
  for (const auto& d : dictionaries) {
    if (d.size() > 0) m = std::max(m, d.colwise().squaredNorm().maxCoeff());
  }
  return m;
}

void SolverConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ParameterError("SolverConfig." + field + " " + why);
  };
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) bad("lambda", "must be nonnegative");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) bad("gamma", "must be nonnegative");
  if (!(outer_tol > 0.0)) bad("outer_tol", "must be positive");
  if (!(inner_tol > 0.0)) bad("inner_tol", "must be positive");
  if (!(power_iter_tol > 0.0)) bad("power_iter_tol", "must be positive");
  if (outer_max_iters < 1) bad("outer_max_iters", "must be at least 1");
  if (inner_max_iters < 1) bad("inner_max_iters", "must be at least 1");
  if (power_iter_max < 1) bad("power_iter_max", "must be at least 1");
}

const char* to_string(Termination t) {
  return t == Termination::converged ? "converged" : "max_iterations";
}

// ---------------------------------------------------------------------------
// Objective and gradients
// ---------------------------------------------------------------------------

namespace {

void check_conformity(const MultiViewFeatureMatrix& x, const DictionarySet& d) {
  x.validate();
  if (d.num_views() != x.num_views()) {
    throw DimensionError("dictionary has " + std::to_string(d.num_views()) +
                         " views but the features have " + std::to_string(x.num_views()));
  }
  for (std::size_t p = 0; p < d.num_views(); ++p) {
    if (d.dictionaries[p].rows() != x.views[p].rows()) {
      throw DimensionError("view " + std::to_string(p) + ": dictionary has " +
                           std::to_string(d.dictionaries[p].rows()) +
                           " rows but the features have " + std::to_string(x.views[p].rows()));
    }
    if (d.dictionaries[p].cols() != d.num_atoms()) {
      throw DimensionError("view " + std::to_string(p) + ": atom count differs from view 0");
    }
  }
}

void check_codes(const MultiViewFeatureMatrix& x, const DictionarySet& d,
                 const Eigen::MatrixXd& w) {
  if (w.rows() != d.num_atoms() || w.cols() != x.num_samples()) {
    std::ostringstream os;
    os << "code matrix is " << w.rows() << "x" << w.cols() << ", expected " << d.num_atoms()
       << "x" << x.num_samples();
    throw DimensionError(os.str());
  }
}

double dictionary_penalty(const DictionarySet& d) {
  double s = 0.0;
  for (const auto& dp : d.dictionaries) s += prox::norm_l1inf(dp.transpose());
  return s;
}

}  // namespace

ObjectiveBreakdown objective(const MultiViewFeatureMatrix& x, const DictionarySet& d,
                             const SparseCodeMatrix& w, double lambda, double gamma) {
  check_conformity(x, d);
  check_codes(x, d, w.codes);
  const double n = static_cast<double>(x.num_samples());
  ObjectiveBreakdown out;
  for (std::size_t p = 0; p < x.num_views(); ++p) {
    out.fit_term += (x.views[p] - d.dictionaries[p] * w.codes).squaredNorm();
  }
  out.fit_term /= n;
  out.dict_penalty = lambda * dictionary_penalty(d);
  out.code_penalty = gamma * prox::norm_l1inf(w.codes);
  out.total = out.fit_term + out.dict_penalty + out.code_penalty;
  return out;
}

double spectral_norm_sq(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol, int max_iters,
                        std::uint64_t seed) {
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const Eigen::MatrixXd gram = m.transpose() * m;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(gram.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  v.normalize();

  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd gv = gram * v;
    const double rayleigh = v.dot(gv);
    const double len = gv.norm();
    if (len == 0.0) {
      // Start vector in the null space; restart from a fresh draw.
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
      v.normalize();
      continue;
    }
    v = gv / len;
    if (it > 0 && std::abs(rayleigh - estimate) <= tol * std::abs(rayleigh)) {
      return rayleigh;
    }
    estimate = rayleigh;
  }
  throw NumericError("power iteration did not converge in " + std::to_string(max_iters) +
                         " iterations",
                     estimate);
}

Eigen::MatrixXd codes_gradient(const MultiViewFeatureMatrix& x, const DictionarySet& d,
                               const Eigen::MatrixXd& w) {
  check_conformity(x, d);
  check_codes(x, d, w);
  const double n = static_cast<double>(x.num_samples());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  for (std::size_t p = 0; p < x.num_views(); ++p) {
    const auto& dp = d.dictionaries[p];
    g.noalias() += dp.transpose() * (dp * w - x.views[p]);
  }
  return g / n;
}

std::vector<Eigen::MatrixXd> dictionary_gradient(const MultiViewFeatureMatrix& x,
                                                 const DictionarySet& d,
                                                 const Eigen::MatrixXd& w) {
  check_conformity(x, d);
  check_codes(x, d, w);
  const double n = static_cast<double>(x.num_samples());
  std::vector<Eigen::MatrixXd> grads;
  for (std::size_t p = 0; p < x.num_views(); ++p) {
    grads.push_back((d.dictionaries[p] * w - x.views[p]) * w.transpose() / n);
  }
  return grads;
}

double next_momentum(double tau) {
  // With a = 1/tau', a^2 - a - tau^-2 = 0, positive root.
  const double inv = 1.0 / tau;
  const double a = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * inv * inv));
  return 1.0 / a;
}

// ---------------------------------------------------------------------------
// Code solver
// ---------------------------------------------------------------------------

namespace {

bool converged(double previous, double current, double tol) {
  const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
  return std::abs(current - previous) <= tol * scale;
}

}  // namespace

CodeSolution solve_codes(const MultiViewFeatureMatrix& x, const DictionarySet& d, double gamma,
                         const SolverConfig& cfg) {
  check_conformity(x, d);
  return solve_codes(x, d, gamma, cfg, Eigen::MatrixXd::Zero(d.num_atoms(), x.num_samples()));
}

CodeSolution solve_codes(const MultiViewFeatureMatrix& x, const DictionarySet& d, double gamma,
                         const SolverConfig& cfg, const Eigen::MatrixXd& w0) {
  cfg.validate();
  check_conformity(x, d);
  check_codes(x, d, w0);
  if (!(gamma >= 0.0)) throw ParameterError("gamma must be nonnegative");

  // All views share W, so the problem is solved on the stacked blocks.
  const Eigen::MatrixXd dict = d.stacked();
  const Eigen::MatrixXd feats = x.stacked();
  const double n = static_cast<double>(x.num_samples());
  const Eigen::MatrixXd gram = dict.transpose() * dict;
  const Eigen::MatrixXd cross = dict.transpose() * feats;
  const double feat_sq = feats.squaredNorm();

  const double lipschitz =
      spectral_norm_sq(dict, cfg.power_iter_tol, cfg.power_iter_max, cfg.rng_seed) / n;
  if (!(lipschitz > 0.0)) {
    throw DegenerateInputError(
        "solve_codes: the dictionary is zero (L1 = 0); lower lambda so atoms survive");
  }

  auto eval = [&](const Eigen::MatrixXd& w) {
    const double fit = feat_sq - 2.0 * cross.cwiseProduct(w).sum() +
                       w.cwiseProduct(gram * w).sum();
    return fit / n + gamma * prox::norm_l1inf(w);
  };

  CodeSolution sol;
  sol.trace.lipschitz = lipschitz;
  Eigen::MatrixXd w = w0;
  Eigen::MatrixXd w_avg = w0;
  double tau = 1.0;
  double best = eval(w0);
  sol.trace.initial_objective = best;
  sol.codes.codes = w0;
  double previous = best;

  for (int k = 0; k < cfg.inner_max_iters; ++k) {
    sol.trace.momentum.push_back(tau);
    const Eigen::MatrixXd z = tau * w + (1.0 - tau) * w_avg;
    const Eigen::MatrixXd grad = (gram * z - cross) / n;
    const double step = 1.0 / (tau * lipschitz);
    const Eigen::MatrixXd u = w - step * grad;
    // argmin ||W - U||^2 + (gamma / (tau L1)) ||W||_{1,inf}; the half-scaled
    // prox therefore carries weight gamma / (2 tau L1).
    w = prox::prox_l1inf_rows(u, 0.5 * gamma * step).output;
    w_avg = tau * w + (1.0 - tau) * w_avg;
    tau = next_momentum(tau);

    const double f = eval(w_avg);
    sol.trace.objectives.push_back(f);
    sol.trace.iterations = k + 1;
    if (f < best) {
      best = f;
      sol.codes.codes = w_avg;
    }
    if (converged(previous, f, cfg.inner_tol)) {
      sol.trace.termination = Termination::converged;
      break;
    }
    previous = f;
  }
  sol.trace.best_objective = best;
  return sol;
}

// ---------------------------------------------------------------------------
// Dictionary solver
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd prox_columns(const Eigen::MatrixXd& b, double t) {
  return prox::prox_l1inf_rows(b.transpose(), t).output.transpose();
}

// Objective of one view block after over-norm atoms are rescaled, computed
// from B^T B so the clamped and raw forms share one product.
struct BlockObjective {
  double raw = 0.0;
  double clamped = 0.0;
};

BlockObjective block_objective(const Eigen::MatrixXd& b, const Eigen::MatrixXd& code_gram,
                               const Eigen::MatrixXd& cross, double feat_sq, double n,
                               double lambda) {
  const Eigen::MatrixXd btb = b.transpose() * b;
  const Eigen::VectorXd col_max = b.cwiseAbs().colwise().maxCoeff().transpose();
  Eigen::VectorXd scale(b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    const double sq = btb(j, j);
    scale(j) = sq > 1.0 ? 1.0 / std::sqrt(sq) : 1.0;
  }
  const Eigen::VectorXd cross_dot = cross.cwiseProduct(b).colwise().sum().transpose();

  BlockObjective out;
  out.raw = (feat_sq - 2.0 * cross_dot.sum() + btb.cwiseProduct(code_gram).sum()) / n +
            lambda * col_max.sum();
  const Eigen::MatrixXd scaled_btb = scale.asDiagonal() * btb * scale.asDiagonal();
  out.clamped = (feat_sq - 2.0 * cross_dot.dot(scale) +
                 scaled_btb.cwiseProduct(code_gram).sum()) / n +
                lambda * col_max.dot(scale);
  return out;
}

}  // namespace

void clamp_atoms(DictionarySet& d) {
  for (auto& dp : d.dictionaries) {
    for (Eigen::Index j = 0; j < dp.cols(); ++j) {
      const double sq = dp.col(j).squaredNorm();
      if (sq > 1.0) dp.col(j) /= std::sqrt(sq);
    }
  }
}

DictionarySolution solve_dictionary(const MultiViewFeatureMatrix& x, const SparseCodeMatrix& w,
                                    double lambda, const SolverConfig& cfg,
                                    const DictionarySet& d0) {
  cfg.validate();
  check_conformity(x, d0);
  check_codes(x, d0, w.codes);
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be nonnegative");

  const std::size_t views = x.num_views();
  const double n = static_cast<double>(x.num_samples());
  const Eigen::MatrixXd code_gram = w.codes * w.codes.transpose();
  std::vector<Eigen::MatrixXd> cross(views);
  std::vector<double> feat_sq(views);
  for (std::size_t p = 0; p < views; ++p) {
    cross[p] = x.views[p] * w.codes.transpose();
    feat_sq[p] = x.views[p].squaredNorm();
  }

  // sigma_max(W W^T) = largest eigenvalue of (W^T)^T W^T.
  const double lipschitz =
      spectral_norm_sq(w.codes.transpose(), cfg.power_iter_tol, cfg.power_iter_max,
                       cfg.rng_seed) /
      n;
  if (!(lipschitz > 0.0)) {
    throw DegenerateInputError(
        "solve_dictionary: the code matrix is zero (L2 = 0); lower gamma so codes survive");
  }

  auto eval = [&](const std::vector<Eigen::MatrixXd>& blocks) {
    BlockObjective total;
    for (std::size_t p = 0; p < views; ++p) {
      const auto o = block_objective(blocks[p], code_gram, cross[p], feat_sq[p], n, lambda);
      total.raw += o.raw;
      total.clamped += o.clamped;
    }
    return total;
  };

  DictionarySolution sol;
  sol.trace.lipschitz = lipschitz;
  std::vector<Eigen::MatrixXd> b = d0.dictionaries;
  std::vector<Eigen::MatrixXd> b_avg = d0.dictionaries;
  std::vector<Eigen::MatrixXd> best_blocks = d0.dictionaries;

  const BlockObjective start = eval(b);
  sol.trace.initial_objective = start.raw;
  double best = start.clamped;
  double previous = start.raw;
  double tau = 1.0;

  for (int k = 0; k < cfg.inner_max_iters; ++k) {
    sol.trace.momentum.push_back(tau);
    const double step = 1.0 / (tau * lipschitz);
    for (std::size_t p = 0; p < views; ++p) {
      const Eigen::MatrixXd z = tau * b[p] + (1.0 - tau) * b_avg[p];
      const Eigen::MatrixXd grad = (z * code_gram - cross[p]) / n;
      const Eigen::MatrixXd u = b[p] - step * grad;
      // Penalty on (D^(p))^T rows, i.e. one inf-norm per atom column.
      b[p] = prox_columns(u, 0.5 * lambda * step);
      b_avg[p] = tau * b[p] + (1.0 - tau) * b_avg[p];
    }
    tau = next_momentum(tau);

    const BlockObjective f = eval(b_avg);
    sol.trace.objectives.push_back(f.raw);
    sol.trace.iterations = k + 1;
    if (f.clamped < best) {
      best = f.clamped;
      best_blocks = b_avg;
    }
    if (converged(previous, f.raw, cfg.inner_tol)) {
      sol.trace.termination = Termination::converged;
      break;
    }
    previous = f.raw;
  }

  sol.dictionary.dictionaries = std::move(best_blocks);
  clamp_atoms(sol.dictionary);
  sol.trace.best_objective = best;
  return sol;
}

// ---------------------------------------------------------------------------
// Alternating driver
// ---------------------------------------------------------------------------

DictionarySet initial_dictionary(const MultiViewFeatureMatrix& x, int num_atoms,
                                 std::uint64_t seed) {
  x.validate();
  if (num_atoms < 1) throw ParameterError("SolverConfig.num_atoms must be at least 1");
  const Eigen::Index n = x.num_samples();
  const Eigen::Index atoms = num_atoms;

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }

  const Eigen::MatrixXd stacked = x.stacked();
  Eigen::MatrixXd atoms_stacked(stacked.rows(), atoms);
  std::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < atoms; ++j) {
    Eigen::VectorXd col;
    if (j < n) col = stacked.col(order[static_cast<std::size_t>(j)]);
    // More atoms than samples, or an all-zero sample: fall back to a random
    // direction.
    if (col.size() == 0 || col.norm() == 0.0) {
      col.resize(stacked.rows());
      for (Eigen::Index i = 0; i < col.size(); ++i) col(i) = normal(rng);
    }
    atoms_stacked.col(j) = col / col.norm();
  }

  DictionarySet d;
  Eigen::Index row = 0;
  for (const auto& v : x.views) {
    d.dictionaries.push_back(atoms_stacked.middleRows(row, v.rows()));
    row += v.rows();
  }
  return d;
}

FitResult fit(const MultiViewFeatureMatrix& x, const SolverConfig& cfg) {
  cfg.validate();
  x.validate();
  if (x.num_samples() < 1) throw ParameterError("fit: the feature matrix has no samples");
  return fit(x, cfg, initial_dictionary(x, cfg.num_atoms, cfg.rng_seed));
}

FitResult fit(const MultiViewFeatureMatrix& x, const SolverConfig& cfg,
              const DictionarySet& d0) {
  cfg.validate();
  x.validate();
  if (x.num_samples() < 1) throw ParameterError("fit: the feature matrix has no samples");
  check_conformity(x, d0);

  FitResult result;
  result.dictionary = d0;
  result.codes.codes = Eigen::MatrixXd::Zero(d0.num_atoms(), x.num_samples());
  if (d0.num_atoms() > x.num_samples()) {
    result.trace.warnings.push_back("more atoms (" + std::to_string(d0.num_atoms()) +
                                    ") than samples (" + std::to_string(x.num_samples()) + ")");
  }
  auto f = objective(x, result.dictionary, result.codes, cfg.lambda, cfg.gamma);
  result.trace.objectives.push_back(f);

  for (int t = 0; t < cfg.outer_max_iters; ++t) {
    auto codes = solve_codes(x, result.dictionary, cfg.gamma, cfg, result.codes.codes);
    result.codes = std::move(codes.codes);
    result.trace.code_solves.push_back(std::move(codes.trace));

    auto dict = solve_dictionary(x, result.codes, cfg.lambda, cfg, result.dictionary);
    result.dictionary = std::move(dict.dictionary);
    result.trace.dictionary_solves.push_back(std::move(dict.trace));

    const auto next = objective(x, result.dictionary, result.codes, cfg.lambda, cfg.gamma);
    result.trace.objectives.push_back(next);
    const bool done = std::abs(next.total - f.total) < cfg.outer_tol * (1.0 + std::abs(f.total));
    f = next;
    if (done) {
      result.trace.termination = Termination::converged;
      break;
    }
  }
  return result;
}

SparseCodeMatrix encode(const MultiViewFeatureMatrix& x_new, const DictionarySet& d,
                        double gamma, const SolverConfig& cfg) {
  return solve_codes(x_new, d, gamma, cfg).codes;
}

}  // namespace mvface::mvsc
