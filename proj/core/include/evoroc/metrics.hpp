#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evoroc {

// Scores are "higher = more positive"; labels are 0/1 and parallel to scores.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;  // +inf for the (0,0) start point
};

struct RocCurve {
  std::vector<RocPoint> points;
};

// Mann-Whitney AUC with midrank ties (a tied positive/negative pair counts
// one half). Throws kAucUndefined unless both classes are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);
inline double auc(const ScoredSet& set) { return auc(set.scores, set.labels); }

// One point per distinct threshold in descending order, framed by (0,0) and (1,1).
RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);
inline RocCurve roc_curve(const ScoredSet& set) { return roc_curve(set.scores, set.labels); }

double trapezoid_area(const RocCurve& curve);

// CSV `fpr,tpr,threshold`, six decimals.
std::string roc_csv(const RocCurve& curve);

}  // namespace evoroc
