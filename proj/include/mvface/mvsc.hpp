#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mvface::mvsc {

/// Per-view feature blocks X^(p) (d_p x N). Column i of every view is the
/// same sample.
struct MultiViewFeatureMatrix {
  std::vector<Eigen::MatrixXd> views;
  std::vector<std::string> sample_ids;
  std::vector<std::string> view_names;

  std::size_t num_views() const { return views.size(); }
  Eigen::Index num_samples() const { return views.empty() ? 0 : views.front().cols(); }
  Eigen::Index total_dim() const;
  /// Throws DimensionError when views disagree on the sample count.
  void validate() const;
  /// Vertical concatenation of the views.
  Eigen::MatrixXd stacked() const;
  /// Columns `cols` of every view, ids carried along.
  MultiViewFeatureMatrix select_samples(const std::vector<std::size_t>& cols) const;
  MultiViewFeatureMatrix select_view(std::size_t view) const;
};

/// Per-view dictionaries D^(p) (d_p x N_d) sharing the atom count.
struct DictionarySet {
  std::vector<Eigen::MatrixXd> dictionaries;

  std::size_t num_views() const { return dictionaries.size(); }
  Eigen::Index num_atoms() const {
    return dictionaries.empty() ? 0 : dictionaries.front().cols();
  }
  Eigen::MatrixXd stacked() const;
  /// Largest squared atom norm over all views and atoms.
  double max_atom_norm_sq() const;
};

/// Shared code matrix W (N_d x N).
struct SparseCodeMatrix {
  Eigen::MatrixXd codes;
};

struct SolverConfig {
  double lambda = 0.01;
  double gamma = 0.01;
  int num_atoms = 0;
  double outer_tol = 1e-4;
  int outer_max_iters = 100;
  double inner_tol = 1e-6;
  int inner_max_iters = 200;
  double power_iter_tol = 1e-12;
  int power_iter_max = 10000;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct ObjectiveBreakdown {
  double total = 0.0;
  double fit_term = 0.0;      // (1/N) sum_p ||X^(p) - D^(p) W||_F^2
  double dict_penalty = 0.0;  // lambda sum_p ||(D^(p))^T||_{1,inf}
  double code_penalty = 0.0;  // gamma ||W||_{1,inf}
};

enum class Termination { converged, max_iterations };
const char* to_string(Termination t);

/// Record of one accelerated proximal-gradient run.
struct InnerTrace {
  int iterations = 0;
  double lipschitz = 0.0;
  std::vector<double> momentum;    // tau^(k), k = 0..iterations-1
  std::vector<double> objectives;  // subproblem objective of the averaged iterate
  double initial_objective = 0.0;
  double best_objective = 0.0;
  Termination termination = Termination::max_iterations;
};

struct SolverTrace {
  /// Entry 0 is the objective at initialization; entry t after t alternations.
  std::vector<ObjectiveBreakdown> objectives;
  std::vector<InnerTrace> code_solves;
  std::vector<InnerTrace> dictionary_solves;
  Termination termination = Termination::max_iterations;
  std::vector<std::string> warnings;
};

ObjectiveBreakdown objective(const MultiViewFeatureMatrix& x, const DictionarySet& d,
                             const SparseCodeMatrix& w, double lambda, double gamma);

/// Largest eigenvalue of m^T m by power iteration from a seeded start vector.
/// Returns 0 for a zero matrix.
double spectral_norm_sq(const Eigen::Ref<const Eigen::MatrixXd>& m, double tol, int max_iters,
                        std::uint64_t seed);

/// (1/N)(D^T D W - D^T X) on stacked views: the gradient of half the fit term
/// with respect to W.
Eigen::MatrixXd codes_gradient(const MultiViewFeatureMatrix& x, const DictionarySet& d,
                               const Eigen::MatrixXd& w);

/// Per-view (1/N)(D^(p) W W^T - X^(p) W^T): the gradient of half the fit term
/// with respect to each D^(p).
std::vector<Eigen::MatrixXd> dictionary_gradient(const MultiViewFeatureMatrix& x,
                                                 const DictionarySet& d,
                                                 const Eigen::MatrixXd& w);

/// tau^(k+1) solving (tau')^-2 - (tau')^-1 = tau^-2.
double next_momentum(double tau);

struct CodeSolution {
  SparseCodeMatrix codes;
  InnerTrace trace;
};

/// min_W (1/N) sum_p ||X^(p) - D^(p) W||_F^2 + gamma ||W||_{1,inf}, starting
/// from w0 (zero when omitted). Returns the lowest-objective iterate seen.
CodeSolution solve_codes(const MultiViewFeatureMatrix& x, const DictionarySet& d, double gamma,
                         const SolverConfig& cfg);
CodeSolution solve_codes(const MultiViewFeatureMatrix& x, const DictionarySet& d, double gamma,
                         const SolverConfig& cfg, const Eigen::MatrixXd& w0);

struct DictionarySolution {
  DictionarySet dictionary;
  InnerTrace trace;
};

/// min_D (1/N) sum_p ||X^(p) - D^(p) W||_F^2 + lambda sum_p ||(D^(p))^T||_{1,inf}
/// followed by rescaling over-norm atoms to the unit ball. Tracks the
/// objective of the rescaled iterates and returns the best one.
DictionarySolution solve_dictionary(const MultiViewFeatureMatrix& x, const SparseCodeMatrix& w,
                                    double lambda, const SolverConfig& cfg,
                                    const DictionarySet& d0);

/// Rescales every atom column whose squared norm exceeds 1 to unit norm,
/// independently per view.
void clamp_atoms(DictionarySet& d);

/// N_d distinct samples chosen by seed, each scaled to unit stacked norm.
DictionarySet initial_dictionary(const MultiViewFeatureMatrix& x, int num_atoms,
                                 std::uint64_t seed);

struct FitResult {
  DictionarySet dictionary;
  SparseCodeMatrix codes;
  SolverTrace trace;
};

/// Alternates solve_codes and solve_dictionary until
/// |f - f0| < outer_tol (1 + |f0|) or outer_max_iters alternations.
FitResult fit(const MultiViewFeatureMatrix& x, const SolverConfig& cfg);
FitResult fit(const MultiViewFeatureMatrix& x, const SolverConfig& cfg,
              const DictionarySet& d0);

/// Codes for new samples against a fixed dictionary.
SparseCodeMatrix encode(const MultiViewFeatureMatrix& x_new, const DictionarySet& d,
                        double gamma, const SolverConfig& cfg);

}  // namespace mvface::mvsc
