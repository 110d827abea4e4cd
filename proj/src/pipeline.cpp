#include "mvface/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include "mvface/errors.hpp"

namespace mvface::pipeline {

TrainedPipeline train_pipeline(const mvsc::MultiViewFeatureMatrix& x, const std::vector<int>& labels,
                               const std::vector<std::string>& class_names,
                               const mvsc::SolverConfig& cfg, const ClassifierOptions& opts) {
  if (!opts.use_ls && !opts.use_svm) throw ParameterError("no classifier selected");
  auto fitted = mvsc::fit(x, cfg);

  TrainedPipeline out;
  out.solver = cfg;
  out.dictionary = std::move(fitted.dictionary);
  out.train_codes = std::move(fitted.codes);
  out.trace = std::move(fitted.trace);

  const classify::LabeledCodes data{out.train_codes.codes, labels, class_names};
  if (opts.use_ls) out.ls = classify::train_ls(data, opts.ridge);
  if (opts.use_svm) out.svm = classify::train_svm(data, opts.svm_c, opts.svm_epochs, opts.seed);
  return out;
}

double Evaluation::best_average() const {
  double best = 0.0;
  if (ls) best = std::max(best, ls->average);
  if (svm) best = std::max(best, svm->average);
  return best;
}

Evaluation evaluate(const mvsc::DictionarySet& dictionary, const mvsc::SolverConfig& solver,
                    const std::optional<classify::LSModel>& ls,
                    const std::optional<classify::SVMModel>& svm,
                    const mvsc::MultiViewFeatureMatrix& x, const std::vector<int>& truth,
                    const std::vector<std::string>& class_names) {
  Evaluation ev;
  ev.codes = mvsc::encode(x, dictionary, solver.gamma, solver);
  if (ls) {
    ev.ls = classify::recognition_report(classify::predict(*ls, ev.codes.codes), truth, class_names);
  }
  if (svm) {
    ev.svm =
        classify::recognition_report(classify::predict(*svm, ev.codes.codes), truth, class_names);
  }
  return ev;
}

Evaluation evaluate(const TrainedPipeline& model, const mvsc::MultiViewFeatureMatrix& x,
                    const std::vector<int>& truth, const std::vector<std::string>& class_names) {
  return evaluate(model.dictionary, model.solver, model.ls, model.svm, x, truth, class_names);
}

std::string trace_csv(const mvsc::SolverTrace& trace) {
  std::string out =
      "iteration,total,fit_term,dict_penalty,code_penalty,code_iters,dict_iters,L1,L2\n";
  char buf[512];
  for (std::size_t t = 0; t < trace.objectives.size(); ++t) {
    const auto& o = trace.objectives[t];
    int code_iters = 0;
    int dict_iters = 0;
    double l1 = 0.0;
    double l2 = 0.0;
    if (t > 0) {
      code_iters = trace.code_solves[t - 1].iterations;
      dict_iters = trace.dictionary_solves[t - 1].iterations;
      l1 = trace.code_solves[t - 1].lipschitz;
      l2 = trace.dictionary_solves[t - 1].lipschitz;
    }
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,%.17g\n", t, o.total,
                  o.fit_term, o.dict_penalty, o.code_penalty, code_iters, dict_iters, l1, l2);
    out += buf;
  }
  return out;
}

}  // namespace mvface::pipeline
