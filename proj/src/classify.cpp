#include "mvface/classify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "mvface/errors.hpp"

namespace mvface::classify {

void LabeledCodes::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != codes.cols()) {
    throw DimensionError("label count " + std::to_string(labels.size()) +
                         " does not match code column count " + std::to_string(codes.cols()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
      throw DimensionError("label " + std::to_string(labels[i]) + " of sample " +
                           std::to_string(i) + " has no class name");
    }
  }
}

namespace {

std::size_t distinct_labels(const std::vector<int>& labels) {
  return std::set<int>(labels.begin(), labels.end()).size();
}

void check_code_dim(Eigen::Index model_dim, const Eigen::MatrixXd& codes) {
  if (codes.rows() != model_dim) {
    throw DimensionError("codes have dimension " + std::to_string(codes.rows()) +
                         ", the model expects " + std::to_string(model_dim));
  }
}

}  // namespace

LSModel train_ls(const LabeledCodes& data, double ridge) {
  data.validate();
  if (!(ridge >= 0.0)) throw ParameterError("ridge must be nonnegative");
  const auto num_classes = static_cast<Eigen::Index>(data.class_names.size());
  if (num_classes < 2 || distinct_labels(data.labels) < 2) {
    throw ParameterError("least-squares training needs at least two classes");
  }
  const Eigen::Index dim = data.codes.rows();
  const Eigen::Index n = data.codes.cols();

  Eigen::MatrixXd design(dim + 1, n);
  design.topRows(dim) = data.codes;
  design.row(dim).setOnes();
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(num_classes, n);
  for (Eigen::Index i = 0; i < n; ++i) targets(data.labels[static_cast<std::size_t>(i)], i) = 1.0;

  Eigen::MatrixXd normal = design * design.transpose();
  normal.diagonal().head(dim).array() += ridge;
  const Eigen::MatrixXd rhs = design * targets.transpose();

  Eigen::MatrixXd beta;
  if (ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(normal);
    if (qr.rank() < normal.rows()) {
      throw NumericError("least-squares normal equations are singular (rank " +
                         std::to_string(qr.rank()) + " of " + std::to_string(normal.rows()) +
                         "); use a positive ridge");
    }
    beta = qr.solve(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success) {
      throw NumericError("least-squares factorization failed; increase the ridge");
    }
    beta = ldlt.solve(rhs);
  }
  if (!beta.allFinite()) throw NumericError("least-squares solution is not finite");

  LSModel model;
  model.ridge = ridge;
  model.weights = beta.topRows(dim).transpose();
  model.bias = beta.row(dim).transpose();
  return model;
}

SVMModel train_svm(const LabeledCodes& data, double c, int epochs, std::uint64_t seed) {
  data.validate();
  if (!(c > 0.0)) throw ParameterError("SVM regularization C must be positive");
  if (epochs < 1) throw ParameterError("SVM epochs must be at least 1");
  if (distinct_labels(data.labels) < 2) {
    throw ParameterError("SVM training needs samples from at least two classes");
  }
  const auto num_classes = static_cast<Eigen::Index>(data.class_names.size());
  const Eigen::Index dim = data.codes.rows();
  const Eigen::Index n = data.codes.cols();

  // Pegasos form: lambda/2 ||w||^2 + (1/n) sum hinge, lambda = 1/(C n).
  const double lambda = 1.0 / (c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);

  Eigen::MatrixXd augmented(dim + 1, n);
  augmented.topRows(dim) = data.codes;
  augmented.row(dim).setOnes();

  SVMModel model;
  model.c = c;
  model.epochs = epochs;
  model.weights.setZero(num_classes, dim);
  model.bias.setZero(num_classes);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index cls = 0; cls < num_classes; ++cls) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(cls));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim + 1);
    std::uint64_t t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
      }
      for (auto i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double y = data.labels[static_cast<std::size_t>(i)] == cls ? 1.0 : -1.0;
        const double margin = y * w.dot(augmented.col(i));
        w *= 1.0 - eta * lambda;
        if (margin < 1.0) w += eta * y * augmented.col(i);
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
      }
    }
    model.weights.row(cls) = w.head(dim).transpose();
    model.bias(cls) = w(dim);
  }
  return model;
}

Eigen::MatrixXd decision_values(const LSModel& model, const Eigen::MatrixXd& codes) {
  check_code_dim(model.weights.cols(), codes);
  return (model.weights * codes).colwise() + model.bias;
}

Eigen::MatrixXd decision_values(const SVMModel& model, const Eigen::MatrixXd& codes) {
  check_code_dim(model.weights.cols(), codes);
  return (model.weights * codes).colwise() + model.bias;
}

std::vector<int> argmax_columns(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()), 0);
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.rows(); ++c) {
      if (scores(c, j) > scores(best, j)) best = c;
    }
    out[static_cast<std::size_t>(j)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const LSModel& model, const Eigen::MatrixXd& codes) {
  return argmax_columns(decision_values(model, codes));
}

std::vector<int> predict(const SVMModel& model, const Eigen::MatrixXd& codes) {
  return argmax_columns(decision_values(model, codes));
}

RecognitionReport recognition_report(const std::vector<int>& predicted,
                                     const std::vector<int>& truth,
                                     const std::vector<std::string>& class_names) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("prediction count " + std::to_string(predicted.size()) +
                         " does not match truth count " + std::to_string(truth.size()));
  }
  const auto k = static_cast<int>(class_names.size());
  RecognitionReport rep;
  rep.class_names = class_names;
  rep.confusion.setZero(k, k);
  rep.num_samples = static_cast<int>(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
      throw DimensionError("label out of range at sample " + std::to_string(i));
    }
    rep.confusion(truth[i], predicted[i]) += 1;
  }
  rep.class_counts.resize(static_cast<std::size_t>(k));
  rep.per_class.resize(static_cast<std::size_t>(k));
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < k; ++c) {
    const int count = rep.confusion.row(c).sum();
    rep.class_counts[static_cast<std::size_t>(c)] = count;
    if (count > 0) {
      const double rate = 100.0 * rep.confusion(c, c) / count;
      rep.per_class[static_cast<std::size_t>(c)] = rate;
      sum += rate;
      ++defined;
    }
  }
  rep.average = defined > 0 ? sum / defined : 0.0;
  rep.overall = rep.num_samples > 0 ? 100.0 * rep.confusion.trace() / rep.num_samples : 0.0;
  return rep;
}

std::string format_rate(double percent) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", percent);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

namespace {

constexpr const char* kNotApplicable = "n/a";

std::string cell(const std::optional<double>& v) {
  return v ? format_rate(*v) : std::string(kNotApplicable);
}

std::string token_name(std::string name) {
  std::replace_if(name.begin(), name.end(), [](unsigned char ch) { return std::isspace(ch); }, '_');
  return name.empty() ? std::string("-") : name;
}

std::vector<std::string> header_columns(const std::vector<ReportRow>& rows) {
  std::vector<std::string> cols;
  if (!rows.empty()) {
    for (const auto& n : rows.front().report.class_names) cols.push_back(token_name(n));
  }
  cols.emplace_back("Aver");
  return cols;
}

std::vector<std::string> row_cells(const RecognitionReport& rep) {
  std::vector<std::string> cells;
  for (const auto& v : rep.per_class) cells.push_back(cell(v));
  cells.push_back(format_rate(rep.average));
  return cells;
}

std::optional<double> parse_cell(const std::string& s) {
  if (s == kNotApplicable || s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw IoError("cannot parse table cell '" + s + "'");
  }
  if (used != s.size()) throw IoError("cannot parse table cell '" + s + "'");
  return v;
}

}  // namespace

std::string format_table(const std::vector<ReportRow>& rows) {
  const auto cols = header_columns(rows);
  std::size_t name_width = 6;
  for (const auto& r : rows) name_width = std::max(name_width, token_name(r.name).size());
  name_width += 2;
  constexpr int kCell = 8;

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(name_width)) << "Method";
  for (const auto& c : cols) os << std::right << std::setw(kCell) << c;
  os << '\n';
  for (const auto& r : rows) {
    if (r.report.per_class.size() + 1 != cols.size()) {
      throw DimensionError("report rows disagree on the class list");
    }
    os << std::left << std::setw(static_cast<int>(name_width)) << token_name(r.name);
    for (const auto& c : row_cells(r.report)) os << std::right << std::setw(kCell) << c;
    os << '\n';
  }
  return os.str();
}

std::string format_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "Method";
  for (const auto& c : header_columns(rows)) os << ',' << c;
  os << '\n';
  for (const auto& r : rows) {
    os << token_name(r.name);
    for (const auto& c : row_cells(r.report)) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

std::string format_confusion(const RecognitionReport& report) {
  std::size_t width = 6;
  for (const auto& n : report.class_names) width = std::max(width, n.size() + 2);
  std::size_t label_width = 11;
  for (const auto& n : report.class_names) label_width = std::max(label_width, n.size() + 1);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(label_width)) << "truth\\pred";
  for (const auto& n : report.class_names) {
    os << std::right << std::setw(static_cast<int>(width)) << token_name(n);
  }
  os << '\n';
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    os << std::left << std::setw(static_cast<int>(label_width))
       << token_name(report.class_names[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) {
      os << std::right << std::setw(static_cast<int>(width)) << report.confusion(r, c);
    }
    os << '\n';
  }
  return os.str();
}

namespace {

ParsedTable parse_lines(const std::string& text, bool csv) {
  auto split = [csv](const std::string& line) {
    std::vector<std::string> out;
    if (csv) {
      std::string cur;
      std::istringstream is(line);
      while (std::getline(is, cur, ',')) out.push_back(cur);
      if (!line.empty() && line.back() == ',') out.emplace_back();
    } else {
      std::istringstream is(line);
      std::string tok;
      while (is >> tok) out.push_back(tok);
    }
    return out;
  };

  ParsedTable table;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split(line);
    if (header) {
      if (fields.empty() || fields.front() != "Method") throw IoError("missing table header");
      table.columns.assign(fields.begin() + 1, fields.end());
      header = false;
      continue;
    }
    if (fields.size() != table.columns.size() + 1) {
      throw IoError("table row '" + line + "' has the wrong number of cells");
    }
    ParsedRow row;
    row.name = fields.front();
    for (std::size_t i = 1; i < fields.size(); ++i) row.values.push_back(parse_cell(fields[i]));
    table.rows.push_back(std::move(row));
  }
  if (header) throw IoError("empty table");
  return table;
}

}  // namespace

ParsedTable parse_table(const std::string& text) { return parse_lines(text, false); }
ParsedTable parse_csv(const std::string& text) { return parse_lines(text, true); }

}  // namespace mvface::classify
