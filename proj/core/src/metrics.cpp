#include "evoroc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "evoroc/error.hpp"

namespace evoroc {

namespace {

struct ClassCounts {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
};

ClassCounts check_scored(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), ErrorCode::kInvalidArgument,
          "scores (" + std::to_string(scores.size()) + ") and labels (" + std::to_string(labels.size()) +
              ") differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), ErrorCode::kInvalidArgument,
            "score " + std::to_string(i) + " is not finite");
    require(labels[i] <= 1, ErrorCode::kInvalidArgument, "label " + std::to_string(i) + " is not 0/1");
    (labels[i] ? c.pos : c.neg) += 1;
  }
  require(c.pos > 0 && c.neg > 0, ErrorCode::kAucUndefined,
          "need both classes, got " + std::to_string(c.pos) + " positive and " + std::to_string(c.neg) +
              " negative");
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const ClassCounts c = check_scored(scores, labels);
  const std::vector<std::size_t> order = order_by_score(scores, false);
  // Twice the rank sum of positives stays integral under midranks: a tie group
  // occupying 1-based ranks i+1..j has midrank (i+1+j)/2.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::int64_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) group_pos += labels[order[j++]];
    twice_rank_sum += group_pos * static_cast<std::int64_t>(i + 1 + j);
    i = j;
  }
  const std::int64_t twice_u = twice_rank_sum - c.pos * (c.pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * c.pos * c.neg);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const ClassCounts c = check_scored(scores, labels);
  const std::vector<std::size_t> order = order_by_score(scores, true);
  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) (labels[order[i++]] ? tp : fp) += 1;
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(c.neg),
                            static_cast<double>(tp) / static_cast<double>(c.pos), threshold});
  }
  return curve;
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

std::string roc_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr,threshold\n";
  for (const RocPoint& p : curve.points) out += fmt::format("{:.6f},{:.6f},{:.6f}\n", p.fpr, p.tpr, p.threshold);
  return out;
}

}  // namespace evoroc
