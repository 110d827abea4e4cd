#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvface/classify.hpp"
#include "mvface/data.hpp"
#include "mvface/errors.hpp"
#include "mvface/gabor.hpp"
#include "mvface/mvsc.hpp"
#include "mvface/pipeline.hpp"

namespace mvface::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write '" + tmp.string() + "'");
    os << text;
    if (!os) throw IoError("error writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move output into place at '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Methods and layout descriptors
// ---------------------------------------------------------------------------

struct MethodSpec {
  std::string base;  // gmcfa, mogfa, whole
  std::optional<std::string> single_view;
  std::string text;
};

MethodSpec parse_method(const std::string& s) {
  MethodSpec m;
  m.text = s;
  if (s == "gmcfa" || s == "mogfa" || s == "whole") {
    m.base = s;
    return m;
  }
  if (s.rfind("single:", 0) == 0) {
    const std::string view = s.substr(7);
    if (gabor::parse_region(view)) {
      m.base = "gmcfa";
    } else if (view.rfind("ori", 0) == 0 && view.size() > 3 &&
               std::all_of(view.begin() + 3, view.end(), [](char c) { return std::isdigit(c); })) {
      m.base = "mogfa";
    } else {
      throw UsageError("unknown view '" + view + "' in method '" + s +
                       "' (expected forehead, eye, mouth or oriK)");
    }
    m.single_view = view;
    return m;
  }
  throw UsageError("unknown method '" + s + "' (expected gmcfa, mogfa, whole or single:<view>)");
}

std::string display_name(const std::string& method) {
  if (method == "gmcfa") return "GmCFA";
  if (method == "mogfa") return "mOGFA";
  if (method == "whole") return "Whole";
  if (method.rfind("single:", 0) == 0) {
    std::string v = method.substr(7);
    if (!v.empty()) v[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(v[0])));
    return v;
  }
  return method;
}

std::map<std::string, std::string> parse_layout(const std::string& layout) {
  std::map<std::string, std::string> kv;
  std::istringstream is(layout);
  std::string tok;
  bool first = true;
  while (is >> tok) {
    if (first) {
      kv["method"] = tok;
      first = false;
      continue;
    }
    const auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

gabor::GaborParams gabor_from_layout(const std::map<std::string, std::string>& kv) {
  gabor::GaborParams g;
  auto num = [&](const char* key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
  };
  g.k_max = num("kmax", g.k_max);
  g.f = num("f", g.f);
  g.sigma = num("sigma", g.sigma);
  g.num_scales = static_cast<int>(num("scales", g.num_scales));
  g.num_orientations = static_cast<int>(num("orientations", g.num_orientations));
  const auto r = kv.find("radius");
  if (r != kv.end() && r->second != "auto") g.window_radius = std::stoi(r->second);
  return g;
}

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct SolverFlags {
  double lambda = 0.01;
  double gamma = 0.01;
  int atoms = 0;
  int atoms_per_class = 0;
  double outer_tol = 1e-4;
  double inner_tol = 1e-6;
  int outer_max = 100;
  int inner_max = 200;
};

void add_solver_flags(CLI::App* app, SolverFlags& f) {
  app->add_option("--lambda", f.lambda, "Dictionary L1,inf penalty weight")->capture_default_str();
  app->add_option("--gamma", f.gamma, "Code L1,inf penalty weight")->capture_default_str();
  app->add_option("--atoms", f.atoms, "Total dictionary atoms");
  app->add_option("--atoms-per-class", f.atoms_per_class,
                  "Atoms per class (total = value x number of classes)");
  app->add_option("--outer-tol", f.outer_tol, "Relative tolerance of the alternation")
      ->capture_default_str();
  app->add_option("--inner-tol", f.inner_tol, "Relative tolerance of the inner solvers")
      ->capture_default_str();
  app->add_option("--outer-max", f.outer_max, "Alternation cap")->capture_default_str();
  app->add_option("--inner-max", f.inner_max, "Inner iteration cap")->capture_default_str();
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

struct ExtractFlags {
  fs::path manifest;
  fs::path out_dir;
  std::vector<std::string> methods{"gmcfa", "mogfa", "whole"};
  double kmax = 1.5707963267948966;
  double f = 1.4142135623730951;
  double sigma = 6.283185307179586;
  int window_radius = 0;
  std::string border = "strict";
  std::string normalize = "unit";
  std::string annotation_mode = "strict";
  int points = 122;
  std::string split = "paper";
  double test_ratio = 0.3;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct ImageResult {
  gabor::FeatureVector features;
  gabor::FiducialMask mask;
  std::string error;
  int error_code = kOk;
};

int exit_code_for(const std::exception& e);

int cmd_extract(const ExtractFlags& fl, std::ostream& out, std::ostream& err) {
  const auto manifest = data::load_manifest(fl.manifest);
  if (manifest.entries.empty()) throw UsageError("manifest '" + fl.manifest.string() + "' is empty");
  std::vector<MethodSpec> methods;
  for (const auto& m : fl.methods) methods.push_back(parse_method(m));

  data::SplitSpec split_spec;
  split_spec.seed = fl.seed;
  if (fl.split == "paper") {
    split_spec.mode = data::SplitMode::paper_protocol;
  } else if (fl.split == "ratio") {
    split_spec.mode = data::SplitMode::ratio;
    split_spec.test_ratio = fl.test_ratio;
  } else {
    throw UsageError("--split must be 'paper' or 'ratio'");
  }
  const auto split = data::split_dataset(manifest, split_spec);

  gabor::GaborParams params;
  params.k_max = fl.kmax;
  params.f = fl.f;
  params.sigma = fl.sigma;
  if (fl.window_radius > 0) params.window_radius = fl.window_radius;
  const auto bank = gabor::build_bank(params);

  gabor::BorderPolicy border;
  if (fl.border == "strict") {
    border = gabor::BorderPolicy::strict;
  } else if (fl.border == "zero") {
    border = gabor::BorderPolicy::zero_pad;
  } else {
    throw UsageError("--border must be 'strict' or 'zero'");
  }
  data::AnnotationOptions ann_opts;
  ann_opts.expected_points = static_cast<std::size_t>(fl.points);
  if (fl.annotation_mode == "strict") {
    ann_opts.mode = data::AnnotationMode::strict;
  } else if (fl.annotation_mode == "lenient") {
    ann_opts.mode = data::AnnotationMode::lenient;
  } else {
    throw UsageError("--annotation-mode must be 'strict' or 'lenient'");
  }
  if (fl.normalize != "unit" && fl.normalize != "none" && fl.normalize != "zscore") {
    throw UsageError("--normalize must be 'unit', 'none' or 'zscore'");
  }

  const std::size_t n = manifest.entries.size();
  std::vector<ImageResult> results(n);
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& e = manifest.entries[i];
      try {
        const auto image = data::load_image(e.image_path);
        auto ann = data::load_annotation(e.annotation_path, ann_opts);
        for (const auto& w : ann.warnings) {
          std::lock_guard lock(log_mutex);
          err << "warning: " << w << '\n';
        }
        results[i].features = gabor::extract_features(image, ann.mask, bank, border);
        results[i].mask = std::move(ann.mask);
      } catch (const std::exception& ex) {
        results[i].error = ex.what();
        results[i].error_code = exit_code_for(ex);
      }
    }
  };
  unsigned workers = fl.threads > 0 ? static_cast<unsigned>(fl.threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int failure = kOk;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i].error.empty()) {
      err << "error: " << manifest.entries[i].image_path.string() << ": " << results[i].error
          << '\n';
      if (failure == kOk) failure = results[i].error_code;
    }
  }
  if (failure != kOk) return failure;

  const auto& ref_mask = results.front().mask;
  const auto layout = results.front().features.layout;
  for (std::size_t i = 1; i < n; ++i) {
    const auto& m = results[i].mask;
    bool same = m.size() == ref_mask.size();
    for (std::size_t p = 0; same && p < m.size(); ++p) {
      same = m.points[p].region == ref_mask.points[p].region;
    }
    if (!same) {
      throw ProtocolError("annotation of '" + manifest.entries[i].image_path.string() +
                          "' differs from the first image in point count or region labels");
    }
  }

  if (fl.normalize == "unit") {
    for (auto& r : results) gabor::normalize_unit(r.features);
  } else if (fl.normalize == "zscore") {
    std::vector<gabor::FeatureVector> training;
    for (auto i : split.train) training.push_back(results[i].features);
    const auto stats = gabor::fit_zscore(training);
    for (auto& r : results) gabor::apply_zscore(r.features, stats);
  }

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%04zu_", i);
    ids[i] = prefix + manifest.entries[i].image_path.filename().string();
  }

  fs::create_directories(fl.out_dir);
  const std::string radius =
      params.window_radius ? std::to_string(*params.window_radius) : std::string("auto");
  for (const auto& m : methods) {
    gabor::ViewPartition part;
    if (m.base == "gmcfa") {
      part = gabor::region_partition(layout, ref_mask);
    } else if (m.base == "mogfa") {
      part = gabor::orientation_partition(layout);
    } else {
      part = gabor::whole_partition(layout);
    }
    if (m.single_view) {
      const auto it = std::find(part.view_names.begin(), part.view_names.end(), *m.single_view);
      if (it == part.view_names.end()) throw UsageError("no view named '" + *m.single_view + "'");
      const auto k = static_cast<std::size_t>(it - part.view_names.begin());
      part.view_names = {part.view_names[k]};
      part.indices = {part.indices[k]};
    }

    data::FeatureFile file;
    file.features.sample_ids = ids;
    file.features.view_names = part.view_names;
    const auto dims = part.view_dims();
    for (auto d : dims) {
      file.features.views.emplace_back(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto views = part.split(results[i].features.values);
      for (std::size_t p = 0; p < views.size(); ++p) {
        file.features.views[p].col(static_cast<Eigen::Index>(i)) = views[p];
      }
    }
    file.layout = m.text + " points=" + std::to_string(layout.num_points) +
                  " scales=" + std::to_string(layout.num_scales) +
                  " orientations=" + std::to_string(layout.num_orientations) +
                  " kmax=" + fmt_double(params.k_max) + " f=" + fmt_double(params.f) +
                  " sigma=" + fmt_double(params.sigma) + " radius=" + radius +
                  " normalize=" + fl.normalize;
    std::string file_name = m.text;
    std::replace(file_name.begin(), file_name.end(), ':', '_');
    data::save_features(fl.out_dir / (file_name + ".mvf"), file);

    out << m.text << " views=" << dims.size() << " dims=";
    for (std::size_t p = 0; p < dims.size(); ++p) out << (p ? "," : "") << dims[p];
    out << " samples=" << n << '\n';
  }

  std::vector<data::LabelRow> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i] = {ids[i], manifest.entries[i].subject_id, manifest.entries[i].expression, "train"};
  }
  for (auto i : split.test) rows[i].split = "test";
  data::save_labels(fl.out_dir / "labels.tsv", rows);
  err << "extracted " << n << " images (" << split.train.size() << " train, "
      << split.test.size() << " test)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// Label plumbing shared by train and eval
// ---------------------------------------------------------------------------

std::string label_value(const data::LabelRow& r, const std::string& task) {
  return task == "fr" ? r.subject : r.expression;
}

std::vector<std::string> class_names_for(const std::vector<data::LabelRow>& rows,
                                         const std::string& task) {
  std::vector<std::string> names;
  bool all_expressions = task == "fer";
  for (const auto& r : rows) {
    const auto v = label_value(r, task);
    if (!data::expression_index(v)) all_expressions = false;
    if (std::find(names.begin(), names.end(), v) == names.end()) names.push_back(v);
  }
  if (all_expressions) return {data::kExpressions.begin(), data::kExpressions.end()};
  return names;
}

struct SelectedSamples {
  std::vector<std::size_t> columns;
  std::vector<int> labels;
};

SelectedSamples select_split(const mvsc::MultiViewFeatureMatrix& x,
                             const std::vector<data::LabelRow>& rows, const std::string& split,
                             const std::string& task, const std::vector<std::string>& classes) {
  if (x.sample_ids.empty()) throw UsageError("feature file carries no sample ids");
  std::map<std::string, const data::LabelRow*> by_id;
  for (const auto& r : rows) by_id[r.sample_id] = &r;
  SelectedSamples sel;
  for (std::size_t i = 0; i < x.sample_ids.size(); ++i) {
    const auto it = by_id.find(x.sample_ids[i]);
    if (it == by_id.end()) {
      throw UsageError("no truth label for sample '" + x.sample_ids[i] + "'");
    }
    if (split != "all" && it->second->split != split) continue;
    const auto v = label_value(*it->second, task);
    const auto c = std::find(classes.begin(), classes.end(), v);
    if (c == classes.end()) throw ProtocolError("label '" + v + "' is unknown to the model");
    sel.columns.push_back(i);
    sel.labels.push_back(static_cast<int>(c - classes.begin()));
  }
  if (sel.columns.empty()) throw UsageError("no samples in split '" + split + "'");
  return sel;
}

mvsc::MultiViewFeatureMatrix restrict_view(const mvsc::MultiViewFeatureMatrix& x,
                                           const std::string& view) {
  const auto it = std::find(x.view_names.begin(), x.view_names.end(), view);
  if (it != x.view_names.end()) {
    return x.select_view(static_cast<std::size_t>(it - x.view_names.begin()));
  }
  throw UsageError("feature file has no view named '" + view + "'");
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainFlags {
  fs::path features;
  fs::path labels;
  fs::path out;
  fs::path trace;
  fs::path sweep_dir;
  std::string task = "fer";
  std::string view;
  SolverFlags solver;
  std::string classifier = "both";
  double ridge = 1e-6;
  double svm_c = 1.0;
  int svm_epochs = 200;
  std::uint64_t seed = 0;
  std::vector<double> sweep_lambda;
  std::vector<double> sweep_gamma;
  std::vector<int> sweep_atoms;
  double val_ratio = 0.3;
};

pipeline::ClassifierOptions classifier_options(const std::string& which, double ridge, double c,
                                               int epochs, std::uint64_t seed) {
  pipeline::ClassifierOptions o;
  if (which == "ls") {
    o.use_svm = false;
  } else if (which == "svm") {
    o.use_ls = false;
  } else if (which != "both") {
    throw UsageError("--classifier must be ls, svm or both");
  }
  o.ridge = ridge;
  o.svm_c = c;
  o.svm_epochs = epochs;
  o.seed = seed;
  return o;
}

mvsc::SolverConfig solver_config(const SolverFlags& f, std::size_t num_classes,
                                 std::uint64_t seed) {
  mvsc::SolverConfig cfg;
  cfg.lambda = f.lambda;
  cfg.gamma = f.gamma;
  cfg.outer_tol = f.outer_tol;
  cfg.inner_tol = f.inner_tol;
  cfg.outer_max_iters = f.outer_max;
  cfg.inner_max_iters = f.inner_max;
  cfg.rng_seed = seed;
  if (f.atoms > 0 && f.atoms_per_class > 0) {
    throw UsageError("give either --atoms or --atoms-per-class, not both");
  }
  if (f.atoms > 0) {
    cfg.num_atoms = f.atoms;
  } else if (f.atoms_per_class > 0) {
    cfg.num_atoms = f.atoms_per_class * static_cast<int>(num_classes);
  } else {
    throw UsageError("--atoms or --atoms-per-class is required");
  }
  cfg.validate();
  return cfg;
}

double mean_rate(const pipeline::Evaluation& ev) {
  double s = 0.0;
  int k = 0;
  if (ev.ls) {
    s += ev.ls->average;
    ++k;
  }
  if (ev.svm) {
    s += ev.svm->average;
    ++k;
  }
  return k ? s / k : 0.0;
}

int cmd_train(const TrainFlags& fl, std::ostream& out, std::ostream& err) {
  auto file = data::load_features(fl.features);
  const auto rows = data::load_labels(fl.labels);
  if (fl.task != "fer" && fl.task != "fr") throw UsageError("--task must be 'fer' or 'fr'");
  const auto classes = class_names_for(rows, fl.task);
  auto layout = parse_layout(file.layout);
  std::string method = layout.count("method") ? layout["method"] : std::string("features");

  mvsc::MultiViewFeatureMatrix x = file.features;
  if (!fl.view.empty()) {
    x = restrict_view(x, fl.view);
    method = "single:" + fl.view;
  }
  const auto sel = select_split(x, rows, "train", fl.task, classes);
  const auto x_train = x.select_samples(sel.columns);
  const auto opts =
      classifier_options(fl.classifier, fl.ridge, fl.svm_c, fl.svm_epochs, fl.seed);

  SolverFlags chosen = fl.solver;
  const bool sweeping =
      !fl.sweep_lambda.empty() || !fl.sweep_gamma.empty() || !fl.sweep_atoms.empty();
  if (sweeping) {
    const auto lambdas = fl.sweep_lambda.empty() ? std::vector<double>{fl.solver.lambda}
                                                 : fl.sweep_lambda;
    const auto gammas =
        fl.sweep_gamma.empty() ? std::vector<double>{fl.solver.gamma} : fl.sweep_gamma;
    std::vector<std::pair<int, int>> atom_choices;  // (atoms, atoms_per_class)
    if (fl.sweep_atoms.empty()) {
      atom_choices.emplace_back(fl.solver.atoms, fl.solver.atoms_per_class);
    } else {
      for (int a : fl.sweep_atoms) atom_choices.emplace_back(0, a);
    }

    // Held-out validation split carved from the training rows.
    data::DatasetManifest pseudo;
    for (std::size_t i = 0; i < sel.labels.size(); ++i) {
      pseudo.entries.push_back({"", "", classes[static_cast<std::size_t>(sel.labels[i])], ""});
    }
    data::SplitSpec vs;
    vs.mode = data::SplitMode::ratio;
    vs.test_ratio = fl.val_ratio;
    vs.seed = fl.seed;
    const auto val_split = data::split_dataset(pseudo, vs);
    if (val_split.test.empty() || val_split.train.empty()) {
      throw UsageError("--val-ratio leaves an empty fit or validation set");
    }
    const auto x_fit = x_train.select_samples(val_split.train);
    const auto x_val = x_train.select_samples(val_split.test);
    std::vector<int> y_fit;
    std::vector<int> y_val;
    for (auto i : val_split.train) y_fit.push_back(sel.labels[i]);
    for (auto i : val_split.test) y_val.push_back(sel.labels[i]);

    const fs::path dir = fl.sweep_dir.empty() ? fs::path(fl.out).concat(".sweep") : fl.sweep_dir;
    fs::create_directories(dir);
    std::string summary = "lambda,gamma,atoms_per_class,atoms,ls_rate,svm_rate,final_objective,status\n";
    double best_score = -1.0;
    for (double lam : lambdas) {
      for (double gam : gammas) {
        for (const auto& [atoms, per_class] : atom_choices) {
          SolverFlags trial = fl.solver;
          trial.lambda = lam;
          trial.gamma = gam;
          trial.atoms = atoms;
          trial.atoms_per_class = per_class;
          const auto cfg = solver_config(trial, classes.size(), fl.seed);
          const std::string tag = "l" + short_double(lam) + "_g" + short_double(gam) + "_a" +
                                  std::to_string(cfg.num_atoms);
          std::string ls_rate;
          std::string svm_rate;
          std::string objective;
          std::string status = "ok";
          try {
            const auto model = pipeline::train_pipeline(x_fit, y_fit, classes, cfg, opts);
            write_text(dir / ("trace_" + tag + ".csv"), pipeline::trace_csv(model.trace));
            const auto ev = pipeline::evaluate(model, x_val, y_val, classes);
            if (ev.ls) ls_rate = classify::format_rate(ev.ls->average);
            if (ev.svm) svm_rate = classify::format_rate(ev.svm->average);
            objective = fmt_double(model.trace.objectives.back().total);
            const double score = mean_rate(ev);
            if (score > best_score) {
              best_score = score;
              chosen = trial;
            }
          } catch (const NumericError& e) {
            status = "numeric_error";
            write_text(dir / ("trace_" + tag + ".csv"), std::string("error,") + e.what() + "\n");
            err << "sweep " << tag << ": " << e.what() << '\n';
          }
          summary += short_double(lam) + "," + short_double(gam) + "," +
                     (per_class > 0 ? std::to_string(per_class) : std::string()) + "," +
                     std::to_string(cfg.num_atoms) + "," + ls_rate + "," + svm_rate + "," +
                     objective + "," + status + "\n";
          err << "sweep " << tag << " ls=" << ls_rate << " svm=" << svm_rate << '\n';
        }
      }
    }
    write_text(dir / "summary.csv", summary);
    if (best_score < 0.0) throw NumericError("every sweep configuration failed");
  }

  const auto cfg = solver_config(chosen, classes.size(), fl.seed);
  const auto model = pipeline::train_pipeline(x_train, sel.labels, classes, cfg, opts);
  for (const auto& w : model.trace.warnings) err << "warning: " << w << '\n';

  data::ModelArchive archive;
  archive.gabor = gabor_from_layout(layout);
  archive.method = method;
  archive.layout = file.layout;
  archive.view_names = x.view_names;
  for (const auto& v : x.views) archive.view_dims.push_back(static_cast<std::size_t>(v.rows()));
  archive.dictionary = model.dictionary;
  archive.solver = cfg;
  archive.task = fl.task;
  archive.class_names = classes;
  archive.ls = model.ls;
  archive.svm = model.svm;
  archive.seed = fl.seed;
  archive.notes = "trained on " + std::to_string(sel.columns.size()) + " samples";
  data::save_model(fl.out, archive);

  const fs::path trace_path = fl.trace.empty() ? fs::path(fl.out).concat(".trace.csv") : fl.trace;
  write_text(trace_path, pipeline::trace_csv(model.trace));

  const auto& last = model.trace.objectives.back();
  out << "trained method=" << method << " atoms=" << cfg.num_atoms
      << " lambda=" << short_double(cfg.lambda) << " gamma=" << short_double(cfg.gamma)
      << " outer_iters=" << model.trace.objectives.size() - 1
      << " termination=" << mvsc::to_string(model.trace.termination)
      << " objective=" << fmt_double(last.total);
  if (model.ls) {
    const auto rep = classify::recognition_report(
        classify::predict(*model.ls, model.train_codes.codes), sel.labels, classes);
    out << " train_ls=" << classify::format_rate(rep.average);
  }
  if (model.svm) {
    const auto rep = classify::recognition_report(
        classify::predict(*model.svm, model.train_codes.codes), sel.labels, classes);
    out << " train_svm=" << classify::format_rate(rep.average);
  }
  out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalFlags {
  fs::path model;
  fs::path features;
  fs::path labels;
  std::string split = "test";
  std::string format = "text";
  std::string name;
  fs::path out;
};

int cmd_eval(const EvalFlags& fl, std::ostream& out, std::ostream& err) {
  if (fl.labels.empty()) throw UsageError("eval needs truth labels (--labels)");
  if (fl.format != "text" && fl.format != "csv") throw UsageError("--format must be text or csv");
  const auto archive = data::load_model(fl.model);
  const auto file = data::load_features(fl.features);
  const auto rows = data::load_labels(fl.labels);

  mvsc::MultiViewFeatureMatrix x = file.features;
  if (archive.method.rfind("single:", 0) == 0 && x.num_views() != 1) {
    x = restrict_view(x, archive.method.substr(7));
  }
  data::check_compatible(archive, x);
  const auto sel = select_split(x, rows, fl.split, archive.task, archive.class_names);
  const auto x_eval = x.select_samples(sel.columns);

  const auto ev = pipeline::evaluate(archive.dictionary, archive.solver, archive.ls, archive.svm,
                                     x_eval, sel.labels, archive.class_names);
  const std::string prefix = fl.name.empty() ? display_name(archive.method) : fl.name;
  std::vector<classify::ReportRow> table;
  if (ev.ls) table.push_back({prefix + "_LS", *ev.ls});
  if (ev.svm) table.push_back({prefix + "_SVM", *ev.svm});

  std::string text;
  if (fl.format == "csv") {
    text = classify::format_csv(table);
  } else {
    text = classify::format_table(table);
    for (const auto& row : table) {
      text += "\n" + row.name + " overall " + classify::format_rate(row.report.overall) + " (" +
              std::to_string(row.report.confusion.trace()) + "/" +
              std::to_string(row.report.num_samples) + ")\n";
      text += classify::format_confusion(row.report);
    }
  }
  if (fl.out.empty()) {
    out << text;
  } else {
    write_text(fl.out, text);
  }
  err << "evaluated " << sel.columns.size() << " samples\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthFlags {
  fs::path out_dir;
  std::vector<int> views{20, 20};
  int atoms = 8;
  int samples = 200;
  int sparsity = 3;
  std::string snr = "inf";
  int classes = 1;
  double separation = 0.0;
  std::uint64_t seed = 0;
  double test_ratio = 0.3;
};

int cmd_synth(const SynthFlags& fl, std::ostream& out, std::ostream&) {
  data::SyntheticSpec spec;
  spec.view_dims = fl.views;
  spec.num_atoms = fl.atoms;
  spec.num_samples = fl.samples;
  spec.sparsity = fl.sparsity;
  spec.num_classes = fl.classes;
  spec.class_separation = fl.separation;
  spec.seed = fl.seed;
  if (fl.snr == "inf" || fl.snr == "none") {
    spec.noise_snr_db = std::numeric_limits<double>::infinity();
  } else {
    try {
      spec.noise_snr_db = std::stod(fl.snr);
    } catch (const std::exception&) {
      throw UsageError("--snr must be a number of dB or 'inf'");
    }
  }
  const auto inst = data::generate_synthetic(spec);
  fs::create_directories(fl.out_dir);

  data::FeatureFile features{inst.features, "synthetic"};
  data::save_features(fl.out_dir / "synth.mvf", features);

  data::FeatureFile codes;
  codes.features.views = {inst.codes.codes};
  codes.features.sample_ids = inst.features.sample_ids;
  codes.features.view_names = {"codes"};
  codes.layout = "truth_codes";
  data::save_features(fl.out_dir / "truth_codes.mvf", codes);

  data::FeatureFile dict;
  dict.features.views = inst.dictionary.dictionaries;
  dict.features.view_names = inst.features.view_names;
  dict.layout = "truth_dictionary";
  data::save_features(fl.out_dir / "truth_dictionary.mvf", dict);

  data::DatasetManifest pseudo;
  for (int label : inst.labels) {
    pseudo.entries.push_back({"", "", inst.class_names[static_cast<std::size_t>(label)], ""});
  }
  data::SplitSpec ss;
  ss.mode = data::SplitMode::ratio;
  ss.test_ratio = fl.test_ratio;
  ss.seed = fl.seed;
  const auto split = data::split_dataset(pseudo, ss);
  std::vector<data::LabelRow> rows;
  for (std::size_t i = 0; i < inst.labels.size(); ++i) {
    rows.push_back({inst.features.sample_ids[i], "synthetic",
                    inst.class_names[static_cast<std::size_t>(inst.labels[i])], "train"});
  }
  for (auto i : split.test) rows[i].split = "test";
  data::save_labels(fl.out_dir / "labels.tsv", rows);

  nlohmann::json oracle;
  oracle["spec"] = {{"view_dims", spec.view_dims},
                    {"num_atoms", spec.num_atoms},
                    {"num_samples", spec.num_samples},
                    {"sparsity", spec.sparsity},
                    {"noise_snr_db", fl.snr},
                    {"num_classes", spec.num_classes},
                    {"class_separation", spec.class_separation},
                    {"seed", spec.seed}};
  std::vector<double> residuals;
  for (std::size_t p = 0; p < inst.features.num_views(); ++p) {
    residuals.push_back(
        (inst.features.views[p] - inst.dictionary.dictionaries[p] * inst.codes.codes).norm());
  }
  oracle["residual_norms"] = residuals;
  oracle["measured_snr_db"] = std::isfinite(inst.measured_snr_db)
                                  ? nlohmann::json(inst.measured_snr_db)
                                  : nlohmann::json("inf");
  oracle["class_names"] = inst.class_names;
  write_text(fl.out_dir / "oracle.json", oracle.dump(2) + "\n");

  out << "synth views=" << spec.view_dims.size() << " samples=" << spec.num_samples
      << " atoms=" << spec.num_atoms << " snr_db="
      << (std::isfinite(inst.measured_snr_db) ? short_double(inst.measured_snr_db) : "inf")
      << " train=" << split.train.size() << " test=" << split.test.size() << '\n';
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kUsage;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const ProtocolError*>(&e)) return kProtocol;
  if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const DimensionError*>(&e)) {
    return kInvalidInput;
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  return kUnexpected;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view sparse coding on Gabor features"};
  app.require_subcommand(1);

  ExtractFlags ex;
  auto* extract = app.add_subcommand("extract", "Gabor features for every manifest image");
  extract->add_option("--manifest", ex.manifest, "Dataset manifest")->required();
  extract->add_option("--out-dir", ex.out_dir, "Output directory")->required();
  extract->add_option("--method", ex.methods, "gmcfa, mogfa, whole or single:<view>")
      ->delimiter(',');
  extract->add_option("--kmax", ex.kmax, "Maximum wave number")->capture_default_str();
  extract->add_option("--f", ex.f, "Scale spacing factor")->capture_default_str();
  extract->add_option("--sigma", ex.sigma, "Gaussian width")->capture_default_str();
  extract->add_option("--window-radius", ex.window_radius, "Kernel half-width (0 = per scale)");
  extract->add_option("--border", ex.border, "strict or zero")->capture_default_str();
  extract->add_option("--normalize", ex.normalize, "unit, none or zscore")->capture_default_str();
  extract->add_option("--annotation-mode", ex.annotation_mode, "strict or lenient")
      ->capture_default_str();
  extract->add_option("--points", ex.points, "Expected fiducial points")->capture_default_str();
  extract->add_option("--split", ex.split, "paper or ratio")->capture_default_str();
  extract->add_option("--test-ratio", ex.test_ratio, "Test fraction in ratio mode")
      ->capture_default_str();
  extract->add_option("--seed", ex.seed, "Split seed")->capture_default_str();
  extract->add_option("--threads", ex.threads, "Worker threads (0 = hardware)");

  TrainFlags tr;
  auto* train = app.add_subcommand("train", "Learn dictionaries and classifiers");
  train->add_option("--features", tr.features, "Feature file")->required();
  train->add_option("--labels", tr.labels, "Label table")->required();
  train->add_option("--out", tr.out, "Model archive to write")->required();
  train->add_option("--trace", tr.trace, "Objective trace CSV (default <out>.trace.csv)");
  train->add_option("--task", tr.task, "fer or fr")->capture_default_str();
  train->add_option("--view", tr.view, "Train on a single named view");
  train->add_option("--method", tr.view, "single:<view> restricts training to one view")
      ->transform([](std::string s) {
        if (s.rfind("single:", 0) == 0) return s.substr(7);
        throw CLI::ValidationError("--method", "train accepts only single:<view>");
      });
  add_solver_flags(train, tr.solver);
  train->add_option("--classifier", tr.classifier, "ls, svm or both")->capture_default_str();
  train->add_option("--ridge", tr.ridge, "Least-squares ridge")->capture_default_str();
  train->add_option("--svm-c", tr.svm_c, "SVM regularization C")->capture_default_str();
  train->add_option("--svm-epochs", tr.svm_epochs, "SVM epochs")->capture_default_str();
  train->add_option("--seed", tr.seed, "Seed for initialization and SVM shuffling")
      ->capture_default_str();
  train->add_option("--sweep-lambda", tr.sweep_lambda, "Lambda grid")->delimiter(',');
  train->add_option("--sweep-gamma", tr.sweep_gamma, "Gamma grid")->delimiter(',');
  train->add_option("--sweep-atoms", tr.sweep_atoms, "Atoms-per-class grid")->delimiter(',');
  train->add_option("--sweep-dir", tr.sweep_dir, "Sweep output directory");
  train->add_option("--val-ratio", tr.val_ratio, "Validation fraction for sweeps")
      ->capture_default_str();

  EvalFlags ev;
  auto* eval = app.add_subcommand("eval", "Encode, classify and report");
  eval->add_option("--model", ev.model, "Model archive")->required();
  eval->add_option("--features", ev.features, "Feature file")->required();
  eval->add_option("--labels", ev.labels, "Label table with truth");
  eval->add_option("--split", ev.split, "test, train or all")->capture_default_str();
  eval->add_option("--format", ev.format, "text or csv")->capture_default_str();
  eval->add_option("--name", ev.name, "Row name prefix");
  eval->add_option("--out", ev.out, "Write the report here instead of stdout");

  SynthFlags sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-view instance");
  synth->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  synth->add_option("--views", sy.views, "Per-view dimensions")->delimiter(',');
  synth->add_option("--atoms", sy.atoms, "True atom count")->capture_default_str();
  synth->add_option("--samples", sy.samples, "Sample count")->capture_default_str();
  synth->add_option("--sparsity", sy.sparsity, "Nonzeros per code column")->capture_default_str();
  synth->add_option("--snr", sy.snr, "Noise SNR in dB or inf")->capture_default_str();
  synth->add_option("--classes", sy.classes, "Class count")->capture_default_str();
  synth->add_option("--separation", sy.separation, "Mean offset of nonzero code entries")
      ->capture_default_str();
  synth->add_option("--seed", sy.seed, "Seed")->capture_default_str();
  synth->add_option("--test-ratio", sy.test_ratio, "Test fraction")->capture_default_str();

  std::vector<std::string> argv_store{"mvface"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kUsage;
  }

  try {
    if (extract->parsed()) return cmd_extract(ex, out, err);
    if (train->parsed()) return cmd_train(tr, out, err);
    if (eval->parsed()) return cmd_eval(ev, out, err);
    if (synth->parsed()) return cmd_synth(sy, out, err);
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    err << (code == kUsage ? "usage error: " : "error: ") << e.what() << '\n';
    return code;
  }
  return kUsage;
}

}  // namespace mvface::cli
