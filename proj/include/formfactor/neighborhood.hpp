#pragma once

// Candidate neighborhoods: nearby same-page tokens with their positions
// relative to the candidate. The candidate's own tokens are never included.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "formfactor/candgen.hpp"
#include "formfactor/docmodel.hpp"

namespace formfactor {

struct ZoneWeights {
  double left = 1.0;
  double above = 1.0;
  double right = 1.5;
  double below = 1.5;

  friend bool operator==(const ZoneWeights&, const ZoneWeights&) = default;
};

struct FeatureConfig {
  std::size_t n_max = 16;
  double radius = 0.35;  // cap on the zone-weighted distance
  ZoneWeights zone_weights;

  void validate() const {
    if (n_max < 1) throw InvariantError("feature config: n_max must be >= 1");
    if (!(radius > 0.0 && radius <= std::sqrt(2.0))) throw InvariantError("feature config: radius must be in (0, sqrt(2)]");
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct Neighbor {
  std::size_t token_index = 0;
  std::string token_text;
  double rel_x = 0;
  double rel_y = 0;
  double distance = 0;
  double weighted_distance = 0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborSet {
  std::string candidate_id;
  std::vector<Neighbor> neighbors;  // ascending weighted distance, ties by reading order
  std::size_t pad_count = 0;

  friend bool operator==(const NeighborSet&, const NeighborSet&) = default;
};

// Zone of an offset: horizontal when |dx| >= |dy|, vertical otherwise.
inline double zone_weight(const ZoneWeights& w, double rel_x, double rel_y) {
  if (std::abs(rel_x) >= std::abs(rel_y)) return rel_x <= 0 ? w.left : w.right;
  return rel_y < 0 ? w.above : w.below;
}

inline NeighborSet extract_neighbors(const Document& doc, const Candidate& cand, const FeatureConfig& cfg) {
  if (cand.span_begin >= cand.span_end || cand.span_end > doc.tokens.size())
    throw DataError("bad-candidate", "candidate " + cand.candidate_id + " references tokens outside document " + doc.doc_id);
  const double cx = cand.bbox.center_x();
  const double cy = cand.bbox.center_y();

  std::vector<Neighbor> pool;
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const Token& t = doc.tokens[i];
    if (cand.covers(i) || t.page_index != cand.page_index) continue;
    Neighbor n;
    n.token_index = i;
    n.rel_x = t.bbox.center_x() - cx;
    n.rel_y = t.bbox.center_y() - cy;
    n.distance = std::hypot(n.rel_x, n.rel_y);
    n.weighted_distance = n.distance * zone_weight(cfg.zone_weights, n.rel_x, n.rel_y);
    if (n.weighted_distance > cfg.radius) continue;
    n.token_text = t.text;
    pool.push_back(std::move(n));
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    if (a.weighted_distance != b.weighted_distance) return a.weighted_distance < b.weighted_distance;
    return a.token_index < b.token_index;
  };
  const std::size_t keep = std::min(cfg.n_max, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), closer);
  pool.resize(keep);

  NeighborSet ns;
  ns.candidate_id = cand.candidate_id;
  ns.neighbors = std::move(pool);
  ns.pad_count = cfg.n_max - keep;
  return ns;
}

}  // namespace formfactor
