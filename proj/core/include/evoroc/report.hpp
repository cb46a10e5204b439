#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace evoroc {

struct SplitAucs {
  std::optional<double> train, val, test;
};

struct ComparisonReport {
  SplitAucs sgd;
  SplitAucs ga;

  // (ga_test - sgd_test) / sgd_test * 100; throws if either test AUC is missing.
  double improvement_percent() const;
};

// One decimal, e.g. "9.3%", "-4.0%"; a value that rounds to zero prints "0.0%".
std::string format_percent(double value);

std::string report_csv(const ComparisonReport& report);
std::string report_table(const ComparisonReport& report);

// Writes the human-readable table to `path` and the CSV next to it
// (`path` with extension replaced by .csv). Throws if any of the six values is missing.
void write_report(const ComparisonReport& report, const std::filesystem::path& path);

}  // namespace evoroc
