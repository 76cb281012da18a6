#pragma once

// Supervised training of the scorer: vocabulary construction, example
// labeling with negative downsampling, document-level train/validation split,
// the RAdam epoch loop and best-validation-AUC checkpoint selection.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "formfactor/candgen.hpp"
#include "formfactor/corpus.hpp"
#include "formfactor/metrics.hpp"
#include "formfactor/model.hpp"
#include "formfactor/neighborhood.hpp"
#include "formfactor/radam.hpp"
#include "formfactor/random.hpp"
#include "formfactor/scorer.hpp"

namespace formfactor {

struct TrainConfig {
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 25;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t neg_per_pos_cap = 10;
  double split_fraction = 0.8;
  std::uint64_t seed = 0;
  ScorerDims dims;

  void validate() const {
    if (batch_size < 1) throw InvariantError("train config: batch_size must be >= 1");
    if (!(split_fraction > 0 && split_fraction < 1)) throw InvariantError("train config: split_fraction must be in (0,1)");
    if (!(learning_rate > 0)) throw InvariantError("train config: learning_rate must be positive");
  }

  RAdamOptions optimizer() const { return {learning_rate, beta1, beta2, epsilon, 4.0, true}; }

  json to_json() const {
    return {{"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"max_epochs", max_epochs},
            {"beta1", beta1},
            {"beta2", beta2},
            {"epsilon", epsilon},
            {"neg_per_pos_cap", neg_per_pos_cap},
            {"split_fraction", split_fraction},
            {"seed", seed},
            {"dims", {{"token_dim", dims.token_dim}, {"position_dim", dims.position_dim}, {"output_dim", dims.output_dim}}}};
  }
};

// ---------------------------------------------------------------------------
// Vocabulary

// Top-k lowercased tokens by frequency over the given documents, ties broken
// lexicographically; PAD and UNK come first.
inline Vocab build_vocab(const std::vector<const Document*>& docs, std::size_t k) {
  if (k < 1) throw InvariantError("build_vocab: k must be >= 1");
  if (docs.empty()) throw DataError("empty-corpora", "build_vocab needs at least one document");
  std::unordered_map<std::string, std::size_t> counts;
  for (const Document* d : docs)
    for (const auto& t : d->tokens) ++counts[text::lower(t.text)];
  counts.erase(std::string(Vocab::kPadToken));
  counts.erase(std::string(Vocab::kUnkToken));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& [w, n] : ranked) words.push_back(std::move(w));
  return Vocab(words);
}

inline std::vector<const Document*> document_pointers(const std::vector<Document>& docs) {
  std::vector<const Document*> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(&d);
  return out;
}

// ---------------------------------------------------------------------------
// Labeling

struct LabeledExample {
  NeighborSet neighbors;
  std::size_t field_index = 0;  // index into the labeling schema
  int label = 0;
  std::string doc_id;
};

// Every candidate is paired with every schema field of its type. Negatives of
// each (document, field) are sampled down to cap * max(1, positives).
inline std::vector<LabeledExample> label_candidates(const Document& doc, const TargetSchema& schema,
                                                    const std::map<FieldType, std::vector<Candidate>>& candidates,
                                                    const std::map<std::string, NeighborSet>& features,
                                                    std::size_t neg_per_pos_cap, std::uint64_t seed) {
  if (!doc.labeled()) throw DataError("unlabeled", "document " + doc.doc_id + " lacks ground truth");
  std::vector<LabeledExample> out;
  for (std::size_t fi = 0; fi < schema.fields.size(); ++fi) {
    const auto& field = schema.fields[fi];
    auto it = candidates.find(field.field_type);
    if (it == candidates.end()) continue;
    const auto& pool = it->second;
    std::vector<std::size_t> positives, negatives;
    for (std::size_t c = 0; c < pool.size(); ++c)
      (matches_ground_truth(doc, field.name, pool[c].canonical_value) ? positives : negatives).push_back(c);
    const std::size_t keep_neg = neg_per_pos_cap * std::max<std::size_t>(1, positives.size());
    if (negatives.size() > keep_neg) {
      Rng rng(derive_seed(seed, "negatives", fnv1a(doc.doc_id + "\x1f" + field.name)));
      rng.shuffle(negatives);
      negatives.resize(keep_neg);
    }
    std::vector<std::pair<std::size_t, int>> chosen;
    for (auto c : positives) chosen.emplace_back(c, 1);
    for (auto c : negatives) chosen.emplace_back(c, 0);
    std::sort(chosen.begin(), chosen.end());
    for (auto [c, label] : chosen) {
      auto f = features.find(pool[c].candidate_id);
      if (f == features.end()) throw DataError("missing-features", "no neighborhood for " + pool[c].candidate_id);
      out.push_back({f->second, fi, label, doc.doc_id});
    }
  }
  return out;
}

// Candidates and neighborhoods of one document, then its labeled examples.
inline std::vector<LabeledExample> label_document(const Document& doc, const TargetSchema& schema,
                                                  const FeatureConfig& features, std::size_t neg_per_pos_cap,
                                                  std::uint64_t seed) {
  auto cands = generate_all_candidates(doc, schema);
  std::map<std::string, NeighborSet> ns;
  for (const auto& [type, list] : cands)
    for (const auto& c : list) ns.emplace(c.candidate_id, extract_neighbors(doc, c, features));
  return label_candidates(doc, schema, cands, ns, neg_per_pos_cap, seed);
}

// ---------------------------------------------------------------------------
// Split

// Seeded document-level split; returns (train, validation) positions into
// `doc_keys`. |train| = round(fraction * n), clamped so both sides are non-empty.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_documents(
    const std::vector<std::string>& doc_keys, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw InvariantError("split fraction must be in (0,1)");
  const std::size_t n = doc_keys.size();
  if (n < 2) throw DataError("too-few-documents", "a train/validation split needs at least 2 documents");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return doc_keys[a] < doc_keys[b]; });
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

inline std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_examples(
    const std::vector<LabeledExample>& examples, double fraction, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> pos;
  for (const auto& e : examples)
    if (pos.emplace(e.doc_id, ids.size()).second) ids.push_back(e.doc_id);
  auto [train_docs, val_docs] = split_documents(ids, fraction, seed);
  std::vector<bool> is_train(ids.size(), false);
  for (auto i : train_docs) is_train[i] = true;
  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  for (const auto& e : examples) (is_train[pos[e.doc_id]] ? out.first : out.second).push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Training

// Documents labeled against one schema. Fields map into the model's field
// table by name.
struct TrainingSource {
  const std::vector<Document>* docs = nullptr;
  const TargetSchema* schema = nullptr;
};

struct EncodedExample {
  EncodedNeighbors input;
  std::size_t field_index = 0;  // row in the model's field table
  double label = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  std::optional<double> val_auc;

  json to_json() const {
    return {{"epoch", epoch}, {"train_loss", train_loss}, {"val_auc", val_auc ? json(*val_auc) : json(nullptr)}};
  }
};

struct Checkpoint {
  ScorerModel model;
  std::optional<double> val_auc;  // empty when validation was degenerate or no epoch ran
  std::size_t epoch = 0;          // 0 = initial parameters
  bool validation_degenerate = false;
  std::string fingerprint;
  std::vector<EpochLog> history;
};

struct PreparedData {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> validation;
};

inline std::vector<ScorerExample> as_scorer_examples(const std::vector<EncodedExample>& ex) {
  std::vector<ScorerExample> out;
  out.reserve(ex.size());
  for (const auto& e : ex) out.push_back({&e.input, e.field_index, e.label});
  return out;
}

// Labels and encodes every document, splitting documents 80/20 (configurable).
inline PreparedData prepare_training_data(const std::vector<TrainingSource>& sources, const ScorerModel& model,
                                          const FeatureConfig& features, const TrainConfig& cfg) {
  std::vector<std::string> keys;
  std::vector<std::pair<std::size_t, std::size_t>> where;  // (source, doc)
  for (std::size_t s = 0; s < sources.size(); ++s)
    for (std::size_t d = 0; d < sources[s].docs->size(); ++d) {
      keys.push_back(std::to_string(s) + "\x1f" + (*sources[s].docs)[d].doc_id);
      where.emplace_back(s, d);
    }
  auto [train_docs, val_docs] = split_documents(keys, cfg.split_fraction, cfg.seed);

  PreparedData out;
  auto add = [&](std::size_t k, std::vector<EncodedExample>& dst) {
    const auto& src = sources[where[k].first];
    const Document& doc = (*src.docs)[where[k].second];
    const auto rows = model.field_indices_for(*src.schema);
    for (auto& ex : label_document(doc, *src.schema, features, cfg.neg_per_pos_cap, cfg.seed))
      dst.push_back({encode_neighbors(ex.neighbors, model.vocab), rows[ex.field_index], static_cast<double>(ex.label)});
  };
  for (auto k : train_docs) add(k, out.train);
  for (auto k : val_docs) add(k, out.validation);
  return out;
}

// Logits of every example, in order.
inline std::vector<double> example_logits(const ScorerParams<float>& params, const std::vector<EncodedExample>& ex,
                                          std::size_t chunk = 1024) {
  std::vector<double> out;
  out.reserve(ex.size());
  for (std::size_t start = 0; start < ex.size(); start += chunk) {
    const std::size_t end = std::min(ex.size(), start + chunk);
    std::vector<const EncodedNeighbors*> inputs;
    for (std::size_t i = start; i < end; ++i) inputs.push_back(&ex[i].input);
    const Matrix<float> emb = embed_candidates(inputs, params);
    for (std::size_t i = start; i < end; ++i) {
      const RowVector<float> row = emb.row(static_cast<Eigen::Index>(i - start));
      out.push_back(score_pair(row, ex[i].field_index, params).logit);
    }
  }
  return out;
}

// ROC AUC of the model over labeled examples; empty when one class is missing.
// Ranks by logit, which orders exactly like the score.
inline std::optional<double> examples_auc(const ScorerParams<float>& params, const std::vector<EncodedExample>& ex) {
  std::size_t pos = 0;
  for (const auto& e : ex) pos += e.label > 0.5;
  if (pos == 0 || pos == ex.size()) return std::nullopt;
  const auto logits = example_logits(params, ex);
  std::vector<ScoreLabel> data;
  data.reserve(ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) data.push_back({logits[i], ex[i].label > 0.5});
  return roc_auc(std::move(data));
}

inline std::string config_fingerprint(const TrainConfig& cfg, const FeatureConfig& features, const ScorerModel& init) {
  json j = cfg.to_json();
  j["features"] = {{"n_max", features.n_max},
                   {"radius", features.radius},
                   {"zone_weights", {features.zone_weights.left, features.zone_weights.above, features.zone_weights.right, features.zone_weights.below}}};
  j["vocab_size"] = init.vocab.size();
  j["fields"] = init.field_names;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

using EpochCallback = std::function<void(const EpochLog&)>;

// Runs the epoch loop from `init` (fresh or pre-trained parameters) and returns
// the parameters of the epoch with the best validation ROC AUC.
inline Checkpoint train_prepared(const PreparedData& data, ScorerModel init, const TrainConfig& cfg,
                                 const FeatureConfig& features, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  init.check_consistent();
  Checkpoint best;
  best.fingerprint = config_fingerprint(cfg, features, init);
  best.model = init;

  const auto train_examples = as_scorer_examples(data.train);
  if (cfg.max_epochs > 0 && train_examples.empty())
    throw DataError("no-examples", "training set produced no examples");
  OptimizerState<float> state = OptimizerState<float>::for_params(init.params);
  const RAdamOptions opt = cfg.optimizer();
  ScorerParams<float>& params = init.params;

  std::vector<std::size_t> order(train_examples.size());
  std::vector<ScorerExample> batch;
  batch.reserve(cfg.batch_size);
  bool any_auc = false;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, "epoch", epoch));
    rng.shuffle(order);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_examples[order[i]]);
      auto lg = batch_gradient(batch, params);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      radam_step(params, lg.gradient, state, opt);
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(order.size()), examples_auc(params, data.validation)};
    best.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val_auc && (!any_auc || *log.val_auc > *best.val_auc)) {
      any_auc = true;
      best.val_auc = log.val_auc;
      best.epoch = epoch;
      best.model.params = params;
    }
  }
  if (cfg.max_epochs > 0 && !any_auc) {
    best.validation_degenerate = true;
    best.epoch = cfg.max_epochs;
    best.model.params = params;
  }
  best.model.training = {{"val_auc", best.val_auc ? json(*best.val_auc) : json(nullptr)},
                         {"epoch", best.epoch},
                         {"validation_degenerate", best.validation_degenerate},
                         {"fingerprint", best.fingerprint}};
  return best;
}

// Fresh model for a vocabulary and field table.
inline ScorerModel fresh_model(const Vocab& vocab, std::vector<std::string> field_names, std::uint64_t seed,
                               const ScorerDims& dims = {}) {
  ScorerModel m;
  m.vocab = vocab;
  m.field_names = std::move(field_names);
  m.params = init_params<float>(seed, vocab.size(), m.field_names.size(), dims);
  return m;
}

// Trains on one or more labeled sources. Without `initial`, parameters are
// initialized from cfg.seed for `vocab` and `field_names`.
inline Checkpoint train(const std::vector<TrainingSource>& sources, const Vocab& vocab,
                        const std::vector<std::string>& field_names, const TrainConfig& cfg,
                        const FeatureConfig& features, const std::optional<ScorerModel>& initial = std::nullopt,
                        const EpochCallback& on_epoch = {}) {
  if (sources.empty()) throw DataError("empty-corpora", "train needs at least one source");
  ScorerModel init;
  if (initial) {
    if (!(initial->vocab == vocab) || initial->field_names != field_names)
      throw ShapeError("initial parameters do not match the vocabulary / field table");
    init = *initial;
  } else {
    init = fresh_model(vocab, field_names, cfg.seed, cfg.dims);
  }
  auto data = prepare_training_data(sources, init, features, cfg);
  return train_prepared(data, std::move(init), cfg, features, on_epoch);
}

}  // namespace formfactor
