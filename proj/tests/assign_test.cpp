#include <gtest/gtest.h>

#include <cmath>

#include "formfactor/assign.hpp"
#include "formfactor/random.hpp"

namespace ff = formfactor;

namespace {

struct Builder {
  ff::DocumentScores s;

  Builder& add(const std::string& field, const std::string& id, const std::string& value, double score) {
    ff::Candidate c;
    c.candidate_id = id;
    c.canonical_value = value;
    s.candidates[id] = c;
    s.by_field[field].push_back({id, field, score, std::log(score / (1 - score))});
    return *this;
  }
};

ff::TargetSchema two_dates(bool constrained) {
  ff::TargetSchema t;
  t.fields = {{"start", ff::FieldType::kDate, std::nullopt}, {"end", ff::FieldType::kDate, std::nullopt}};
  if (constrained) t.constraints = {{ff::Constraint::Kind::kDatePrecedes, "start", "end"}};
  return t;
}

std::string iso(int day) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "2020-01-%02d", day);
  return buf;
}

// Random scores over a shared candidate pool, as for two fields of one type.
ff::DocumentScores random_scores(ff::Rng& rng, std::size_t n) {
  Builder b;
  b.s.doc_id = "r";
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "c" + std::to_string(i);
    const auto value = iso(rng.range(1, 28));
    b.add("start", id, value, rng.uniform(0.01, 0.99));
    b.s.by_field["end"].push_back({id, "end", rng.uniform(0.01, 0.99), 0});
  }
  for (auto& [f, list] : b.s.by_field)
    for (auto& c : list) c.logit = std::log(c.score / (1 - c.score));
  return b.s;
}

}  // namespace

TEST(Assign, PicksArgmaxAndHonoursThresholds) {
  Builder b;
  b.s.doc_id = "d";
  b.add("start", "a", iso(1), 0.3).add("start", "b", iso(2), 0.8).add("end", "c", iso(9), 0.6);
  auto schema = two_dates(false);
  auto e = ff::assign(b.s, schema);
  EXPECT_EQ(e.at("start")->candidate_id, "b");
  EXPECT_EQ(e.at("end")->candidate_id, "c");
  schema.fields[1].threshold = 0.7;
  EXPECT_FALSE(ff::assign(b.s, schema).at("end").has_value());
  EXPECT_TRUE(ff::assign(b.s, schema, {false}).at("end").has_value());
  // A field with no candidates at all is absent but present in the map.
  schema.fields.push_back({"other", ff::FieldType::kAmount, std::nullopt});
  auto e2 = ff::assign(b.s, schema);
  ASSERT_TRUE(e2.fields.count("other"));
  EXPECT_FALSE(e2.at("other").has_value());
}

TEST(Assign, LowerScoredSideOfViolationYields) {
  Builder b;
  b.s.doc_id = "d";
  // Best start is after best end; end has the lower score so it moves on.
  b.add("start", "s1", iso(20), 0.9).add("start", "s2", iso(1), 0.5);
  b.add("end", "e1", iso(10), 0.7).add("end", "e2", iso(25), 0.6);
  auto e = ff::assign(b.s, two_dates(true));
  EXPECT_EQ(e.at("start")->candidate_id, "s1");
  EXPECT_EQ(e.at("end")->candidate_id, "e2");

  // Same, but end is the stronger side.
  Builder c;
  c.add("start", "s1", iso(20), 0.6).add("start", "s2", iso(1), 0.5);
  c.add("end", "e1", iso(10), 0.9);
  auto f = ff::assign(c.s, two_dates(true));
  EXPECT_EQ(f.at("start")->candidate_id, "s2");
  EXPECT_EQ(f.at("end")->candidate_id, "e1");

  // Running out of candidates leaves the field empty.
  Builder d;
  d.add("start", "s1", iso(20), 0.6).add("end", "e1", iso(10), 0.9);
  auto g = ff::assign(d.s, two_dates(true));
  EXPECT_FALSE(g.at("start").has_value());
  EXPECT_EQ(g.at("end")->candidate_id, "e1");
}

TEST(Assign, TiesBreakByCandidateId) {
  Builder b;
  b.add("start", "zz", iso(1), 0.5).add("start", "aa", iso(2), 0.5);
  EXPECT_EQ(ff::assign(b.s, two_dates(false)).at("start")->candidate_id, "aa");
}

TEST(Assign, UnconstrainedMatchesBruteForceArgmax) {
  ff::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_scores(rng, 1 + rng.index(12));
    auto e = ff::assign(s, two_dates(false));
    for (const char* f : {"start", "end"}) {
      const ff::ScoredCandidate* best = nullptr;
      for (const auto& c : s.by_field[f])
        if (!best || c.score > best->score) best = &c;
      EXPECT_EQ(e.at(f)->candidate_id, best->candidate_id);
    }
  }
}

TEST(Assign, ConstrainedOutputIsSoundAndMatchesGreedyOracle) {
  ff::Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    auto s = random_scores(rng, 1 + rng.index(10));
    auto e = ff::assign(s, two_dates(true));
    const auto& st = e.at("start");
    const auto& en = e.at("end");
    if (st && en) EXPECT_LE(st->canonical_value, en->canonical_value);

    // Oracle: walk both descending lists, advancing the weaker side of each violation.
    auto sorted = [&](const char* f) {
      auto v = s.by_field[f];
      std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
      return v;
    };
    auto a = sorted("start"), b = sorted("end");
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size() &&
           s.candidates[a[i].candidate_id].canonical_value > s.candidates[b[j].candidate_id].canonical_value)
      (a[i].score < b[j].score ? i : j) += 1;
    EXPECT_EQ(st.has_value(), i < a.size());
    EXPECT_EQ(en.has_value(), j < b.size());
    if (st) EXPECT_EQ(st->candidate_id, a[i].candidate_id);
    if (en) EXPECT_EQ(en->candidate_id, b[j].candidate_id);
  }
}

TEST(Assign, InvariantUnderMonotoneScoreTransform) {
  ff::Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_scores(rng, 2 + rng.index(8));
    auto t = s;
    for (auto& [f, list] : t.by_field)
      for (auto& c : list) c.score = c.score * c.score * 0.5;
    auto a = ff::assign(s, two_dates(true), {false});
    auto b = ff::assign(t, two_dates(true), {false});
    for (const char* f : {"start", "end"}) {
      ASSERT_EQ(a.at(f).has_value(), b.at(f).has_value());
      if (a.at(f)) EXPECT_EQ(a.at(f)->candidate_id, b.at(f)->candidate_id);
    }
  }
}

TEST(Assign, DistinctValuesConstraint) {
  Builder b;
  b.add("start", "x", iso(5), 0.9).add("end", "x", iso(5), 0.8).add("end", "y", iso(6), 0.3);
  auto schema = two_dates(false);
  schema.constraints = {{ff::Constraint::Kind::kDistinctValues, "start", "end"}};
  auto e = ff::assign(b.s, schema);
  EXPECT_EQ(e.at("end")->candidate_id, "y");
}

// ---------------------------------------------------------------------------

namespace {

ff::Document labeled(const std::string& id, std::optional<std::string> start) {
  ff::Document d;
  d.doc_id = id;
  ff::GroundTruth gt;
  if (start) gt["start"] = {{*start, std::nullopt}};
  d.ground_truth = gt;
  return d;
}

ff::Extraction extracted(const std::string& id, std::optional<std::pair<std::string, double>> start) {
  ff::Extraction e;
  e.doc_id = id;
  e.fields["start"] = std::nullopt;
  e.fields["end"] = std::nullopt;
  if (start) e.fields["start"] = ff::AssignedValue{"c", start->first, start->second};
  return e;
}

}  // namespace

TEST(SweepThresholds, HandTable) {
  std::vector<ff::Document> docs{labeled("1", iso(1)), labeled("2", iso(2)), labeled("3", iso(3)), labeled("4", {})};
  std::vector<ff::Extraction> ex{extracted("1", {{iso(1), 0.9}}), extracted("2", {{iso(9), 0.7}}),
                                 extracted("3", {{iso(3), 0.4}}), extracted("4", {})};
  auto sweeps = ff::sweep_thresholds(ex, docs, two_dates(false));
  ASSERT_EQ(sweeps.size(), 2u);
  const auto& s = sweeps[0];
  EXPECT_EQ(s.n_ground_truth, 3u);
  ASSERT_EQ(s.points.size(), 5u);  // 0, 0.4, 0.7, 0.9, 1
  // t = 0.4: 3 predicted, 2 correct.
  EXPECT_DOUBLE_EQ(s.points[1].threshold, 0.4);
  EXPECT_DOUBLE_EQ(s.points[1].precision, 2.0 / 3);
  EXPECT_DOUBLE_EQ(s.points[1].recall, 2.0 / 3);
  // t = 0.9: 1 of 1.
  EXPECT_DOUBLE_EQ(s.points[3].precision, 1.0);
  EXPECT_DOUBLE_EQ(s.points[3].recall, 1.0 / 3);
  EXPECT_DOUBLE_EQ(s.points[3].f1(), 0.5);
  // t = 1: nothing predicted, precision reported as 1, recall 0.
  EXPECT_EQ(s.points[4].predicted, 0u);
  EXPECT_FALSE(s.points[4].precision_defined);
  EXPECT_DOUBLE_EQ(s.points[4].precision, 1.0);
  EXPECT_DOUBLE_EQ(s.points[4].f1(), 0.0);
  EXPECT_TRUE(sweeps[1].points.empty());
  EXPECT_THROW(ff::sweep_thresholds({}, docs, two_dates(false)), ff::DataError);
}

TEST(SweepThresholds, MatchesQuadraticRecount) {
  ff::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ff::Document> docs;
    std::vector<ff::Extraction> ex;
    const std::size_t n = 1 + rng.index(30);
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = std::to_string(i);
      std::optional<std::string> truth;
      if (rng.bernoulli(0.8)) truth = iso(rng.range(1, 3));
      docs.push_back(labeled(id, truth));
      std::optional<std::pair<std::string, double>> pred;
      if (rng.bernoulli(0.7)) pred = std::make_pair(iso(rng.range(1, 3)), std::round(rng.uniform(0, 1) * 8) / 8 * 0.98 + 0.01);
      ex.push_back(extracted(id, pred));
    }
    auto sweep = ff::sweep_thresholds(ex, docs, two_dates(false))[0];
    for (const auto& p : sweep.points) {
      std::size_t predicted = 0, correct = 0, gt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        gt += docs[i].values_of("start").empty() ? 0 : 1;
        const auto& v = ex[i].fields["start"];
        if (v && v->score >= p.threshold) {
          ++predicted;
          correct += !docs[i].values_of("start").empty() && docs[i].values_of("start")[0].canonical_value == v->canonical_value;
        }
      }
      EXPECT_EQ(p.predicted, predicted);
      EXPECT_EQ(p.correct, correct);
      EXPECT_EQ(sweep.n_ground_truth, gt);
      if (predicted) EXPECT_DOUBLE_EQ(p.precision, static_cast<double>(correct) / predicted);
      if (gt) EXPECT_DOUBLE_EQ(p.recall, static_cast<double>(correct) / gt);
    }
    for (std::size_t k = 1; k < sweep.points.size(); ++k) {
      EXPECT_LT(sweep.points[k - 1].threshold, sweep.points[k].threshold);
      EXPECT_GE(sweep.points[k - 1].recall, sweep.points[k].recall);
    }
  }
}
