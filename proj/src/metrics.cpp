#include "cinexai/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "cinexai/errors.hpp"

namespace cinexai::metrics {

double dice(std::span<const LabelFrame> a, std::span<const LabelFrame> b) {
  if (a.size() != b.size() || a.empty()) throw ParameterError("dice needs two non-empty sequences of equal length");
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].shape != b[t].shape) throw ParameterError("dice inputs differ in frame shape");
    std::array<std::size_t, kLabelCount> count_a{};
    std::array<std::size_t, kLabelCount> count_b{};
    std::array<std::size_t, kLabelCount> both{};
    for (std::size_t v = 0; v < a[t].labels.size(); ++v) {
      const auto la = a[t].labels[v];
      const auto lb = b[t].labels[v];
      ++count_a[la];
      ++count_b[lb];
      if (la == lb) ++both[la];
    }
    double sum = 0.0;
    int classes = 0;
    for (int k = 1; k < kLabelCount; ++k) {
      const auto denom = count_a[static_cast<std::size_t>(k)] + count_b[static_cast<std::size_t>(k)];
      if (denom == 0) continue;
      sum += 2.0 * static_cast<double>(both[static_cast<std::size_t>(k)]) / static_cast<double>(denom);
      ++classes;
    }
    total += classes == 0 ? 1.0 : sum / classes;
  }
  return total / static_cast<double>(a.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ParameterError("scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw MetricError("AUC scores contain NaN");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  // Twice the rank sum of positives, with tied groups sharing their mean rank.
  double positives = 0.0;
  double negatives = 0.0;
  double twice_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double twice_mean_rank = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positives += 1.0;
        twice_rank_sum += twice_mean_rank;
      } else if (labels[order[k]] == 0) {
        negatives += 1.0;
      } else {
        throw MetricError("labels must be 0 or 1");
      }
    }
    i = j;
  }
  if (positives == 0.0 || negatives == 0.0) throw MetricError("AUC needs both classes present");
  // U = R+ - n+(n+ + 1)/2, kept doubled so every term stays an exact integer.
  const double twice_u = twice_rank_sum - positives * (positives + 1.0);
  return 0.5 * twice_u / (positives * negatives);
}

}  // namespace cinexai::metrics
