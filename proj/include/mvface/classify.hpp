#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mvface::classify {

/// Sparse codes (N_d x N) with one class id per column. Class ids index
/// class_names.
struct LabeledCodes {
  Eigen::MatrixXd codes;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  void validate() const;
};

/// Ridge regression onto one-hot targets with an unpenalized bias.
struct LSModel {
  Eigen::MatrixXd weights;  // classes x N_d
  Eigen::VectorXd bias;     // classes
  double ridge = 1e-6;
};

/// One-vs-rest linear hinge-loss models.
struct SVMModel {
  Eigen::MatrixXd weights;  // classes x N_d
  Eigen::VectorXd bias;     // classes
  double c = 1.0;
  int epochs = 200;
};

LSModel train_ls(const LabeledCodes& data, double ridge = 1e-6);

/// Stochastic subgradient descent on
///   0.5 ||w||^2 + C sum_i max(0, 1 - y_i (w.x_i + b))
/// per class, with the bias carried as a constant feature and a seeded
/// shuffle per epoch.
SVMModel train_svm(const LabeledCodes& data, double c = 1.0, int epochs = 200,
                   std::uint64_t seed = 0);

/// Class scores (classes x N).
Eigen::MatrixXd decision_values(const LSModel& model, const Eigen::MatrixXd& codes);
Eigen::MatrixXd decision_values(const SVMModel& model, const Eigen::MatrixXd& codes);

/// argmax per column; ties go to the lowest class id.
std::vector<int> predict(const LSModel& model, const Eigen::MatrixXd& codes);
std::vector<int> predict(const SVMModel& model, const Eigen::MatrixXd& codes);
std::vector<int> argmax_columns(const Eigen::MatrixXd& scores);

struct RecognitionReport {
  std::vector<std::string> class_names;
  /// Percent correct per class; empty when the class has no test samples.
  std::vector<std::optional<double>> per_class;
  std::vector<int> class_counts;
  /// Mean of the defined per-class rates (the "Aver" column).
  double average = 0.0;
  /// trace(confusion) / N, percent.
  double overall = 0.0;
  /// confusion(truth, predicted).
  Eigen::MatrixXi confusion;
  int num_samples = 0;
};

RecognitionReport recognition_report(const std::vector<int>& predicted,
                                     const std::vector<int>& truth,
                                     const std::vector<std::string>& class_names);

/// Rate with at most two decimals and trailing zeros dropped ("98.57", "90").
std::string format_rate(double percent);

/// One named row of a results table.
struct ReportRow {
  std::string name;
  RecognitionReport report;
};

/// Aligned text table: header of class names then "Aver", one line per row.
std::string format_table(const std::vector<ReportRow>& rows);
std::string format_csv(const std::vector<ReportRow>& rows);
std::string format_confusion(const RecognitionReport& report);

/// Rates read back from format_table / format_csv output; n/a cells are
/// empty optionals. The last column is the average.
struct ParsedRow {
  std::string name;
  std::vector<std::optional<double>> values;
};
struct ParsedTable {
  std::vector<std::string> columns;
  std::vector<ParsedRow> rows;
};
ParsedTable parse_table(const std::string& text);
ParsedTable parse_csv(const std::string& text);

}  // namespace mvface::classify
