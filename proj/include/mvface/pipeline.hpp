#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvface/classify.hpp"
#include "mvface/mvsc.hpp"

namespace mvface::pipeline {

struct ClassifierOptions {
  bool use_ls = true;
  bool use_svm = true;
  double ridge = 1e-6;
  double svm_c = 1.0;
  int svm_epochs = 200;
  std::uint64_t seed = 0;
};

struct TrainedPipeline {
  mvsc::DictionarySet dictionary;
  mvsc::SolverConfig solver;
  mvsc::SparseCodeMatrix train_codes;
  mvsc::SolverTrace trace;
  std::optional<classify::LSModel> ls;
  std::optional<classify::SVMModel> svm;
};

/// fit on the training features, then train the requested classifiers on the
/// learned codes.
TrainedPipeline train_pipeline(const mvsc::MultiViewFeatureMatrix& x, const std::vector<int>& labels,
                               const std::vector<std::string>& class_names,
                               const mvsc::SolverConfig& cfg, const ClassifierOptions& opts);

struct Evaluation {
  mvsc::SparseCodeMatrix codes;
  std::optional<classify::RecognitionReport> ls;
  std::optional<classify::RecognitionReport> svm;

  /// Best available average rate (percent).
  double best_average() const;
};

/// Encode x against a trained dictionary and score every available classifier.
Evaluation evaluate(const mvsc::DictionarySet& dictionary, const mvsc::SolverConfig& solver,
                    const std::optional<classify::LSModel>& ls,
                    const std::optional<classify::SVMModel>& svm,
                    const mvsc::MultiViewFeatureMatrix& x, const std::vector<int>& truth,
                    const std::vector<std::string>& class_names);

Evaluation evaluate(const TrainedPipeline& model, const mvsc::MultiViewFeatureMatrix& x,
                    const std::vector<int>& truth, const std::vector<std::string>& class_names);

/// One CSV line per outer iteration: objective terms, inner iteration counts
/// and Lipschitz constants.
std::string trace_csv(const mvsc::SolverTrace& trace);

}  // namespace mvface::pipeline
