#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "formfactor/errors.hpp"

namespace formfactor {

struct ScoreLabel {
  double score = 0;
  bool positive = false;
};

// Probability that a random positive outranks a random negative, ties counted
// one half (Mann-Whitney U / (P * N)). O(n log n).
inline double roc_auc(std::vector<ScoreLabel> data) {
  std::size_t pos = 0;
  for (const auto& d : data) pos += d.positive;
  const std::size_t neg = data.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("degenerate-labels", "roc_auc needs at least one positive and one negative");
  std::sort(data.begin(), data.end(), [](const ScoreLabel& a, const ScoreLabel& b) { return a.score < b.score; });
  // Sum over positives of (#negatives strictly below + 0.5 * #negatives tied), in doubled units.
  unsigned long long twice_u = 0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < data.size();) {
    std::size_t j = i, p = 0, n = 0;
    while (j < data.size() && data[j].score == data[i].score) {
      (data[j].positive ? p : n) += 1;
      ++j;
    }
    twice_u += static_cast<unsigned long long>(p) * (2 * neg_below + n);
    neg_below += n;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

struct MedianSummary {
  double median = 0;
  double min = 0;
  double max = 0;
};

// Even-length median is the mean of the middle two.
inline MedianSummary median_over_seeds(std::vector<double> values) {
  if (values.empty()) throw DataError("empty", "median_over_seeds needs at least one value");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  MedianSummary s;
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  s.min = values.front();
  s.max = values.back();
  return s;
}

}  // namespace formfactor
