#pragma once

// Final pipeline stage: per-field argmax with optional score thresholds and
// greedy repair of business-constraint violations.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "formfactor/docmodel.hpp"
#include "formfactor/model.hpp"

namespace formfactor {

struct AssignedValue {
  std::string candidate_id;
  std::string canonical_value;
  double score = 0;

  friend bool operator==(const AssignedValue&, const AssignedValue&) = default;
};

struct Extraction {
  std::string doc_id;
  std::map<std::string, std::optional<AssignedValue>> fields;  // every schema field, absent = nullopt

  const std::optional<AssignedValue>& at(const std::string& field) const { return fields.at(field); }

  friend bool operator==(const Extraction&, const Extraction&) = default;
};

inline json extraction_to_json(const Extraction& e) {
  json fields = json::object();
  for (const auto& [name, v] : e.fields)
    fields[name] = v ? json{{"candidate_id", v->candidate_id}, {"value", v->canonical_value}, {"score", v->score}} : json(nullptr);
  return {{"doc_id", e.doc_id}, {"fields", fields}};
}

// Higher score first; equal scores by logit, then lexicographic candidate_id.
inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.logit != b.logit) return a.logit > b.logit;
  return a.candidate_id < b.candidate_id;
}

inline bool violates(const Constraint& c, const std::optional<AssignedValue>& a, const std::optional<AssignedValue>& b) {
  if (!a || !b) return false;
  switch (c.kind) {
    case Constraint::Kind::kDatePrecedes: return a->canonical_value > b->canonical_value;  // ISO dates
    case Constraint::Kind::kDistinctValues: return a->canonical_value == b->canonical_value;
  }
  return false;
}

struct AssignOptions {
  bool use_thresholds = true;
};

// Picks each field's best candidate at or above its threshold, then while a
// constraint is violated drops the lower-scored of its two assignments and
// retries that field with its next-best candidate. Each retry advances one
// field's cursor, so the loop ends after at most (number of candidates) steps.
inline Extraction assign(const DocumentScores& scored, const TargetSchema& schema, const AssignOptions& opt = {}) {
  struct Ranked {
    std::vector<const ScoredCandidate*> order;
    std::size_t cursor = 0;
  };
  std::map<std::string, Ranked> ranked;
  for (const auto& f : schema.fields) {
    Ranked r;
    if (auto it = scored.by_field.find(f.name); it != scored.by_field.end()) {
      for (const auto& s : it->second)
        if (!opt.use_thresholds || !f.threshold || s.score >= *f.threshold) r.order.push_back(&s);
    }
    std::sort(r.order.begin(), r.order.end(), [](auto* a, auto* b) { return ranks_before(*a, *b); });
    ranked.emplace(f.name, std::move(r));
  }
  auto current = [&](const std::string& field) -> std::optional<AssignedValue> {
    const auto& r = ranked.at(field);
    if (r.cursor >= r.order.size()) return std::nullopt;
    const ScoredCandidate* s = r.order[r.cursor];
    auto c = scored.candidates.find(s->candidate_id);
    if (c == scored.candidates.end()) throw DataError("unknown-candidate", "scored candidate " + s->candidate_id + " not found");
    return AssignedValue{s->candidate_id, c->second.canonical_value, s->score};
  };

  std::map<std::string, std::optional<AssignedValue>> chosen;
  for (const auto& f : schema.fields) chosen[f.name] = current(f.name);

  for (;;) {
    const Constraint* broken = nullptr;
    for (const auto& c : schema.constraints) {
      if (violates(c, chosen[c.field_a], chosen[c.field_b])) {
        broken = &c;
        break;
      }
    }
    if (!broken) break;
    const auto& a = *chosen[broken->field_a];
    const auto& b = *chosen[broken->field_b];
    // The lower score yields; on a tie field_b yields.
    const std::string& loser = a.score < b.score ? broken->field_a : broken->field_b;
    ++ranked.at(loser).cursor;
    chosen[loser] = current(loser);
  }

  Extraction e;
  e.doc_id = scored.doc_id;
  e.fields = std::move(chosen);
  return e;
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct PRPoint {
  double threshold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
  double precision = 1;
  double recall = 0;
  bool precision_defined = true;  // false when nothing is predicted (precision reported as 1)

  double f1() const { return precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall); }
};

struct FieldSweep {
  std::string field_name;
  std::size_t n_ground_truth = 0;  // documents with at least one ground-truth value
  std::vector<PRPoint> points;     // ascending threshold
};

// Precision/recall of the assigned values as a minimum-score threshold rises.
// Thresholds are 0, 1 and every distinct assigned score of the field.
inline std::vector<FieldSweep> sweep_thresholds(const std::vector<Extraction>& extractions,
                                                const std::vector<Document>& docs, const TargetSchema& schema) {
  if (extractions.size() != docs.size()) throw DataError("size-mismatch", "one extraction per document expected");
  std::vector<FieldSweep> out;
  for (const auto& f : schema.fields) {
    FieldSweep sweep;
    sweep.field_name = f.name;
    std::vector<std::pair<double, bool>> preds;  // (score, correct)
    for (std::size_t d = 0; d < docs.size(); ++d) {
      if (!docs[d].labeled()) throw DataError("unlabeled", "document " + docs[d].doc_id + " lacks ground truth");
      if (!docs[d].values_of(f.name).empty()) ++sweep.n_ground_truth;
      auto it = extractions[d].fields.find(f.name);
      if (it == extractions[d].fields.end() || !it->second) continue;
      preds.emplace_back(it->second->score, matches_ground_truth(docs[d], f.name, it->second->canonical_value));
    }
    if (!preds.empty()) {
      std::vector<double> thresholds{0.0, 1.0};
      for (const auto& p : preds) thresholds.push_back(p.first);
      std::sort(thresholds.begin(), thresholds.end());
      thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
      // Walk thresholds from high to low, admitting predictions as they qualify.
      std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      std::size_t k = 0, correct = 0;
      std::vector<PRPoint> desc;
      for (auto t = thresholds.rbegin(); t != thresholds.rend(); ++t) {
        while (k < preds.size() && preds[k].first >= *t) correct += preds[k++].second;
        PRPoint p;
        p.threshold = *t;
        p.predicted = k;
        p.correct = correct;
        p.precision_defined = k > 0;
        p.precision = k > 0 ? static_cast<double>(correct) / static_cast<double>(k) : 1.0;
        p.recall = sweep.n_ground_truth > 0 ? static_cast<double>(correct) / static_cast<double>(sweep.n_ground_truth) : 0.0;
        desc.push_back(p);
      }
      sweep.points.assign(desc.rbegin(), desc.rend());
    }
    out.push_back(std::move(sweep));
  }
  return out;
}

}  // namespace formfactor
