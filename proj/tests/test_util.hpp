#pragma once

// Shared fixtures for the test suites.

#include <cmath>
#include <string>
#include <vector>

#include "formfactor/docmodel.hpp"
#include "formfactor/random.hpp"
#include "formfactor/scorer.hpp"

namespace formfactor::testing {

inline EncodedNeighbors random_neighbors(Rng& rng, std::size_t n, std::size_t vocab_size) {
  EncodedNeighbors e;
  for (std::size_t i = 0; i < n; ++i) {
    e.token_ids.push_back(static_cast<std::int32_t>(1 + rng.index(vocab_size - 1)));
    double x = rng.uniform(-0.3, 0.3), y = rng.uniform(-0.3, 0.3);
    e.positions.push_back({x, y, std::hypot(x, y)});
  }
  return e;
}

// Inputs own the neighbor storage the examples point into.
struct RandomBatch {
  std::vector<EncodedNeighbors> inputs;
  std::vector<ScorerExample> examples;
};

inline RandomBatch random_batch(Rng& rng, std::size_t size, std::size_t vocab_size, std::size_t num_fields,
                                std::size_t max_neighbors = 6) {
  RandomBatch b;
  b.inputs.reserve(size);
  for (std::size_t i = 0; i < size; ++i)
    b.inputs.push_back(random_neighbors(rng, rng.index(max_neighbors + 1), vocab_size));
  for (std::size_t i = 0; i < size; ++i)
    b.examples.push_back({&b.inputs[i], rng.index(num_fields), rng.bernoulli(0.4) ? 1.0 : 0.0});
  return b;
}

// Random finite parameters with a non-trivial field bias.
template <typename T>
ScorerParams<T> random_params(std::uint64_t seed, std::size_t vocab, std::size_t fields, const ScorerDims& dims) {
  auto p = init_params<T>(seed, vocab, fields, dims);
  Rng rng(seed * 31 + 7);
  for (Eigen::Index i = 0; i < p.field_bias.size(); ++i) p.field_bias.data()[i] = static_cast<T>(rng.uniform(-0.5, 0.5));
  // Larger query/key weights make the attention non-uniform.
  p.query *= static_cast<T>(4);
  p.key *= static_cast<T>(4);
  return p;
}

// Two date fields, each introduced by a distinctive key, plus a distractor
// date. Block positions jitter per document so only the keys identify fields.
inline TargetSchema toy_schema() {
  TargetSchema s;
  s.doc_type = "toy";
  s.fields = {{"issued", FieldType::kDate, std::nullopt}, {"due", FieldType::kDate, std::nullopt}};
  s.constraints = {{Constraint::Kind::kDatePrecedes, "issued", "due"}};
  return s;
}

inline std::string toy_date(int day, int month) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d/%02d/2021", month, day);
  return buf;
}

inline std::string toy_iso(int day, int month) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "2021-%02d-%02d", month, day);
  return buf;
}

inline Document toy_document(std::uint64_t seed, std::size_t index) {
  Rng rng(seed * 1000003 + index);
  Document d;
  d.doc_id = "toy-" + std::to_string(index);
  d.language = "en";
  d.doc_type = "toy";
  d.template_id = "toy";
  d.pages = {{1, 1}};
  const int m1 = rng.range(1, 6), m2 = m1 + rng.range(1, 5), m3 = rng.range(1, 12);
  const int d1 = rng.range(1, 28), d2 = rng.range(1, 28), d3 = rng.range(1, 28);
  struct Block {
    const char* key;
    std::string value;
  };
  std::vector<Block> blocks{{"Issued", toy_date(d1, m1)}, {"Due", toy_date(d2, m2)}, {"Printed", toy_date(d3, m3)}};
  rng.shuffle(blocks);
  double y = rng.uniform(0.05, 0.2);
  for (const auto& b : blocks) {
    const double x = rng.uniform(0.05, 0.5);
    d.tokens.push_back({b.key, {x, y, x + 0.06, y + 0.012}, 0});
    d.tokens.push_back({b.value, {x + 0.08, y, x + 0.16, y + 0.012}, 0});
    d.tokens.push_back({"filler", {0.8, y + 0.03, 0.86, y + 0.042}, 0});
    y += rng.uniform(0.08, 0.2);
  }
  sort_reading_order(d.tokens);
  GroundTruth gt;
  gt["issued"] = {{toy_iso(d1, m1), std::nullopt}};
  gt["due"] = {{toy_iso(d2, m2), std::nullopt}};
  d.ground_truth = gt;
  return d;
}

inline std::vector<Document> toy_corpus(std::uint64_t seed, std::size_t n) {
  std::vector<Document> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(toy_document(seed, i));
  return out;
}

}  // namespace formfactor::testing
