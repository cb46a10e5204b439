#include "evoroc/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "evoroc/binary_io.hpp"
#include "evoroc/error.hpp"

namespace evoroc {

namespace {

double value_of(const std::optional<double>& v, const char* method, const char* split) {
  require(v.has_value(), ErrorCode::kInvalidArgument, fmt::format("report is missing the {} {} AUC", method, split));
  return *v;
}

void require_complete(const ComparisonReport& r) {
  value_of(r.sgd.train, "SGD", "train");
  value_of(r.sgd.val, "SGD", "validation");
  value_of(r.sgd.test, "SGD", "test");
  value_of(r.ga.train, "GA", "train");
  value_of(r.ga.val, "GA", "validation");
  value_of(r.ga.test, "GA", "test");
}

}  // namespace

double ComparisonReport::improvement_percent() const {
  const double base = value_of(sgd.test, "SGD", "test");
  const double tuned = value_of(ga.test, "GA", "test");
  require(base > 0, ErrorCode::kInvalidArgument, "SGD test AUC must be positive");
  return (tuned - base) / base * 100.0;
}

namespace {
std::string one_decimal(double value) {
  std::string s = fmt::format("{:.1f}", value);
  return s == "-0.0" ? "0.0" : s;
}
}  // namespace

std::string format_percent(double value) { return one_decimal(value) + "%"; }

std::string report_csv(const ComparisonReport& r) {
  require_complete(r);
  std::string out = "metric,sgd,ga\n";
  out += fmt::format("train_auc,{:.6f},{:.6f}\n", *r.sgd.train, *r.ga.train);
  out += fmt::format("val_auc,{:.6f},{:.6f}\n", *r.sgd.val, *r.ga.val);
  out += fmt::format("test_auc,{:.6f},{:.6f}\n", *r.sgd.test, *r.ga.test);
  out += "test_improvement_pct," + one_decimal(r.improvement_percent()) + ",\n";
  return out;
}

std::string report_table(const ComparisonReport& r) {
  require_complete(r);
  std::string out = "Classifier head AUC by split\n";
  out += fmt::format("{:<24}{:>8}{:>8}\n", "", "SGD", "GA");
  out += fmt::format("{:<24}{:>8.3f}{:>8.3f}\n", "AUC on train set", *r.sgd.train, *r.ga.train);
  out += fmt::format("{:<24}{:>8.3f}{:>8.3f}\n", "AUC on validation set", *r.sgd.val, *r.ga.val);
  out += fmt::format("{:<24}{:>8.3f}{:>8.3f}\n", "AUC on test set", *r.sgd.test, *r.ga.test);
  out += "Relative test AUC improvement: " + format_percent(r.improvement_percent()) + "\n";
  return out;
}

void write_report(const ComparisonReport& report, const std::filesystem::path& path) {
  const std::string table = report_table(report);
  const std::string csv = report_csv(report);
  std::filesystem::path csv_path = path;
  csv_path.replace_extension(".csv");
  require(csv_path != path, ErrorCode::kInvalidArgument, "report path must not end in .csv");
  write_file(path, table);
  write_file(csv_path, csv);
}

}  // namespace evoroc
