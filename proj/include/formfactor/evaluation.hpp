#pragma once

// End-to-end metrics: per-field PR curves from a threshold sweep, Max F1,
// field filtering by coverage and label count, macro averaging, and report
// writers (JSON, learning-curve CSV and SVG).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "formfactor/assign.hpp"
#include "formfactor/candgen.hpp"
#include "formfactor/metrics.hpp"
#include "formfactor/model.hpp"
#include "formfactor/neighborhood.hpp"

namespace formfactor {

struct EvalConfig {
  double min_coverage = 0.8;         // strictly greater than
  std::size_t min_ground_truth = 40;  // at least
};

struct FieldMetrics {
  std::string field_name;
  double coverage = 0;
  std::size_t n_ground_truth = 0;
  std::vector<PRPoint> pr_points;
  double max_f1 = 0;
  bool included = false;
};

struct EvalResult {
  std::vector<FieldMetrics> fields;
  std::optional<double> macro_f1;  // empty when no field passes the filters
};

inline double max_f1_of(const std::vector<PRPoint>& points) {
  double best = 0;
  for (const auto& p : points) best = std::max(best, p.f1());
  return best;
}

// Unweighted mean of max_f1 over included fields.
inline double macro_average(const std::vector<FieldMetrics>& metrics) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& m : metrics)
    if (m.included) {
      sum += m.max_f1;
      ++n;
    }
  if (n == 0) throw DataError("no-included-fields", "no field passes the coverage and label-count filters");
  return sum / static_cast<double>(n);
}

// Metrics from already scored documents (one DocumentScores per document, same order).
inline EvalResult evaluate_scored(const std::vector<Document>& docs, const std::vector<DocumentScores>& scores,
                                  const TargetSchema& schema, const EvalConfig& cfg = {}) {
  if (docs.size() != scores.size()) throw DataError("size-mismatch", "one score set per document expected");
  std::vector<Extraction> extractions;
  extractions.reserve(docs.size());
  std::map<std::string, CoverageCount> coverage;
  for (const auto& f : schema.fields) coverage[f.name];
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const Document& doc = docs[d];
    if (!doc.labeled()) throw DataError("unlabeled", "document " + doc.doc_id + " lacks ground truth");
    extractions.push_back(assign(scores[d], schema, {.use_thresholds = false}));
    for (const auto& f : schema.fields) {
      for (const auto& gt : doc.values_of(f.name)) {
        auto& c = coverage[f.name];
        ++c.total;
        for (const auto& [id, cand] : scores[d].candidates) {
          if (cand.field_type == f.field_type && cand.canonical_value == gt.canonical_value) {
            ++c.matched;
            break;
          }
        }
      }
    }
  }
  EvalResult out;
  for (auto& sweep : sweep_thresholds(extractions, docs, schema)) {
    FieldMetrics m;
    m.field_name = sweep.field_name;
    m.coverage = coverage[sweep.field_name].fraction();
    m.n_ground_truth = sweep.n_ground_truth;
    m.pr_points = std::move(sweep.points);
    m.max_f1 = max_f1_of(m.pr_points);
    m.included = m.coverage > cfg.min_coverage && m.n_ground_truth >= cfg.min_ground_truth;
    out.fields.push_back(std::move(m));
  }
  if (std::any_of(out.fields.begin(), out.fields.end(), [](const auto& m) { return m.included; }))
    out.macro_f1 = macro_average(out.fields);
  return out;
}

inline EvalResult evaluate(const ScorerModel& model, const std::vector<Document>& docs, const TargetSchema& schema,
                           const FeatureConfig& features, const EvalConfig& cfg = {}) {
  for (const auto& d : docs)
    if (!d.labeled()) throw DataError("unlabeled", "document " + d.doc_id + " lacks ground truth");
  std::vector<DocumentScores> scores;
  scores.reserve(docs.size());
  for (const auto& d : docs) scores.push_back(score_document(d, schema, model, features));
  return evaluate_scored(docs, scores, schema, cfg);
}

// ---------------------------------------------------------------------------
// Reports

inline json field_metrics_to_json(const FieldMetrics& m) {
  json points = json::array();
  for (const auto& p : m.pr_points)
    points.push_back({{"threshold", p.threshold},
                      {"precision", p.precision},
                      {"recall", p.recall},
                      {"predicted", p.predicted},
                      {"correct", p.correct},
                      {"precision_defined", p.precision_defined}});
  return {{"field", m.field_name},     {"coverage", m.coverage}, {"n_ground_truth", m.n_ground_truth},
          {"max_f1", m.max_f1},        {"included", m.included}, {"pr_points", points}};
}

inline json report_to_json(const std::string& regime, std::size_t size, std::uint64_t seed, const EvalResult& r) {
  json fields = json::array();
  json per_field = json::object();
  for (const auto& m : r.fields) {
    fields.push_back(field_metrics_to_json(m));
    per_field[m.field_name] = m.max_f1;
  }
  return {{"regime", regime},
          {"size", size},
          {"seed", seed},
          {"fields", fields},
          {"per_field_f1", per_field},
          {"macro_f1", r.macro_f1 ? json(*r.macro_f1) : json(nullptr)}};
}

// One point of a learning curve: a regime at a target size, summarized over seeds.
struct CurvePoint {
  std::string regime;
  std::size_t size = 0;
  std::vector<double> per_seed;
  MedianSummary summary;
};

inline std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::string out = "regime,size,n_seeds,median,min,max\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f\n", p.regime.c_str(), p.size, p.per_seed.size(),
                  p.summary.median, p.summary.min, p.summary.max);
    out += buf;
  }
  return out;
}

// Median macro F1 against target size (log x axis), min/max error bars.
inline std::string curve_svg(const std::vector<CurvePoint>& points) {
  constexpr double W = 640, H = 420, L = 60, R = 150, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  std::vector<std::string> regimes;
  double lo = 0, hi = 0;
  bool first = true;
  for (const auto& p : points) {
    if (std::find(regimes.begin(), regimes.end(), p.regime) == regimes.end()) regimes.push_back(p.regime);
    const double x = std::log10(static_cast<double>(std::max<std::size_t>(p.size, 1)));
    lo = first ? x : std::min(lo, x);
    hi = first ? x : std::max(hi, x);
    first = false;
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto sx = [&](std::size_t size) {
    return L + pw * (std::log10(static_cast<double>(std::max<std::size_t>(size, 1))) - lo) / (hi - lo);
  };
  auto sy = [&](double f1) { return T + ph * (1.0 - std::clamp(f1, 0.0, 1.0)); };
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};

  std::string s;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                W, H, W, H);
  s += buf;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n"
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                L, T + ph, L + pw, T + ph, L, T, L, T + ph);
  s += buf;
  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">%.2f</text>\n", L - 6, sy(v) + 4, v);
    s += buf;
  }
  std::vector<std::size_t> sizes;
  for (const auto& p : points) sizes.push_back(p.size);
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  for (auto size : sizes) {
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">%zu</text>\n", sx(size),
                  T + ph + 16, size);
    s += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\">labeled target documents</text>\n"
                "<text x=\"14\" y=\"%.1f\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 %.1f)\">macro Max F1</text>\n",
                L + pw / 2, H - 10, T + ph / 2, T + ph / 2);
  s += buf;

  for (std::size_t r = 0; r < regimes.size(); ++r) {
    const char* color = kColors[r % std::size(kColors)];
    std::vector<const CurvePoint*> pts;
    for (const auto& p : points)
      if (p.regime == regimes[r]) pts.push_back(&p);
    std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->size < b->size; });
    if (pts.size() > 1) {
      s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"";
      for (const auto* p : pts) {
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", sx(p->size), sy(p->summary.median));
        s += buf;
      }
      s += "\"/>\n";
    }
    for (const auto* p : pts) {
      const double x = sx(p->size);
      std::snprintf(buf, sizeof buf,
                    "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\"/>\n"
                    "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3.5\" fill=\"%s\"/>\n",
                    x, sy(p->summary.min), x, sy(p->summary.max), color, x, sy(p->summary.median), color);
      s += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">%s</text>\n",
                  L + pw + 16, T + 20.0 * static_cast<double>(r), color, L + pw + 34, T + 20.0 * static_cast<double>(r) + 10,
                  regimes[r].c_str());
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace formfactor
