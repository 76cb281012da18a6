#pragma once

// Training regimes over a (source, target) domain pair: scratch, two-stage
// transfer, and multi-domain transfer, plus the learning-curve driver.

#include <atomic>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "formfactor/corpus.hpp"
#include "formfactor/evaluation.hpp"
#include "formfactor/training.hpp"

namespace formfactor {

enum class Regime { kScratch, kTransfer, kMultidomain };

inline constexpr Regime kAllRegimes[] = {Regime::kScratch, Regime::kTransfer, Regime::kMultidomain};

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kScratch: return "scratch";
    case Regime::kTransfer: return "transfer";
    case Regime::kMultidomain: return "multidomain";
  }
  return "unknown";
}

inline std::optional<Regime> regime_from_string(std::string_view s) {
  for (Regime r : kAllRegimes)
    if (to_string(r) == s) return r;
  return std::nullopt;
}

struct DomainPair {
  const Corpus* source = nullptr;
  const Corpus* target = nullptr;
  std::size_t target_train_size = 0;
};

struct RegimeConfig {
  TrainConfig train;
  FeatureConfig features;
  std::size_t vocab_size = 2000;
};

// Seeded permutation of the target train documents (ordered by doc_id first);
// the first `size` entries. Sizes nest for a fixed seed.
inline std::vector<Document> target_subsample(const std::vector<Document>& docs, std::size_t size, std::uint64_t seed) {
  if (size > docs.size())
    throw DataError("size-too-large", "requested " + std::to_string(size) + " target documents, corpus has " +
                                          std::to_string(docs.size()));
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return docs[a].doc_id < docs[b].doc_id; });
  Rng rng(derive_seed(seed, "subsample"));
  rng.shuffle(order);
  std::vector<Document> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(docs[order[i]]);
  return out;
}

// Stage-1 source models keyed by (source, config, seed); shared across cells.
class Stage1Cache {
 public:
  template <class F>
  ScorerModel get_or_train(const std::string& key, F&& make) {
    std::shared_future<ScorerModel> fut;
    std::promise<ScorerModel> promise;
    bool owner = false;
    {
      std::lock_guard lock(mu_);
      auto it = entries_.find(key);
      if (it == entries_.end()) {
        fut = promise.get_future().share();
        entries_.emplace(key, fut);
        owner = true;
      } else {
        fut = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(make());
      } catch (...) {
        promise.set_exception(std::current_exception());
      }
    }
    return fut.get();
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_future<ScorerModel>> entries_;
};

struct RegimeRun {
  Checkpoint checkpoint;
  std::vector<std::string> target_doc_ids;  // the subsample used for training
  std::vector<EpochLog> stage1_history;
};

namespace transfer_detail {

inline void check_pair(const DomainPair& pair, bool needs_source) {
  if (!pair.target) throw DataError("empty-corpora", "domain pair has no target corpus");
  if (needs_source && (!pair.source || pair.source->train.empty()))
    throw DataError("empty-corpora", "transfer regimes need a non-empty source corpus");
  if (pair.target_train_size < 2)
    throw DataError("too-few-documents", "target_train_size must be >= 2, got " + std::to_string(pair.target_train_size));
}

inline TrainConfig seeded(const RegimeConfig& cfg, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.seed = seed;
  return t;
}

inline std::vector<std::string> ids_of(const std::vector<Document>& docs) {
  std::vector<std::string> out;
  for (const auto& d : docs) out.push_back(d.doc_id);
  return out;
}

// Keeps the rows of `m` and appends fresh seeded rows for `names` not yet in its field table.
inline ScorerModel extend_fields(ScorerModel m, const std::vector<std::string>& names, std::uint64_t seed) {
  std::vector<std::string> added;
  for (const auto& n : names)
    if (std::find(m.field_names.begin(), m.field_names.end(), n) == m.field_names.end()) added.push_back(n);
  if (added.empty()) return m;
  const auto dims = ScorerDims{static_cast<std::size_t>(m.params.token_embeddings.cols()),
                               static_cast<std::size_t>(m.params.pos_projection.cols()),
                               static_cast<std::size_t>(m.params.field_embeddings.cols())};
  const auto fresh = init_params<float>(derive_seed(seed, "extend-fields"), m.vocab.size(), added.size(), dims);
  const Eigen::Index old_rows = m.params.field_embeddings.rows();
  const auto add = static_cast<Eigen::Index>(added.size());
  Matrix<float> emb(old_rows + add, m.params.field_embeddings.cols());
  emb << m.params.field_embeddings, fresh.field_embeddings;
  Matrix<float> bias(old_rows + add, 1);
  bias << m.params.field_bias, fresh.field_bias;
  m.params.field_embeddings = std::move(emb);
  m.params.field_bias = std::move(bias);
  for (auto& n : added) m.field_names.push_back(std::move(n));
  return m;
}

inline std::string stage1_key(const DomainPair& pair, const RegimeConfig& cfg, std::uint64_t seed) {
  json j = seeded(cfg, seed).to_json();
  j["source"] = pair.source->name;
  j["source_docs"] = ids_of(pair.source->train);
  j["vocab_size"] = cfg.vocab_size;
  j["n_max"] = cfg.features.n_max;
  j["radius"] = cfg.features.radius;
  return j.dump();
}

}  // namespace transfer_detail

inline RegimeRun run_scratch(const DomainPair& pair, const RegimeConfig& cfg, std::uint64_t seed,
                             const EpochCallback& on_epoch = {}) {
  transfer_detail::check_pair(pair, false);
  const TrainConfig tc = transfer_detail::seeded(cfg, seed);
  auto sub = target_subsample(pair.target->train, pair.target_train_size, seed);
  const Vocab vocab = build_vocab(document_pointers(sub), cfg.vocab_size);
  RegimeRun run;
  run.target_doc_ids = transfer_detail::ids_of(sub);
  run.checkpoint = train({{&sub, &pair.target->schema}}, vocab, pair.target->schema.field_names(), tc, cfg.features,
                         std::nullopt, on_epoch);
  run.checkpoint.model.training["regime"] = "scratch";
  return run;
}

inline RegimeRun run_transfer(const DomainPair& pair, const RegimeConfig& cfg, std::uint64_t seed,
                              Stage1Cache* cache = nullptr, const EpochCallback& on_epoch = {}) {
  transfer_detail::check_pair(pair, true);
  const TrainConfig tc = transfer_detail::seeded(cfg, seed);
  RegimeRun run;
  auto stage1 = [&] {
    const Vocab vocab = build_vocab(document_pointers(pair.source->train), cfg.vocab_size);
    auto ck = train({{&pair.source->train, &pair.source->schema}}, vocab, pair.source->schema.field_names(), tc,
                    cfg.features);
    ck.model.training["history"] = json::array();
    for (const auto& h : ck.history) ck.model.training["history"].push_back(h.to_json());
    return ck.model;
  };
  ScorerModel source_model = cache ? cache->get_or_train(transfer_detail::stage1_key(pair, cfg, seed), stage1) : stage1();
  for (const auto& h : source_model.training.value("history", json::array()))
    run.stage1_history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_loss").get<double>(),
                                  h.at("val_auc").is_null() ? std::nullopt : std::optional<double>(h.at("val_auc").get<double>())});
  const json stage1_summary = {{"val_auc", source_model.training.value("val_auc", json(nullptr))},
                               {"epoch", source_model.training.value("epoch", 0)}};

  auto sub = target_subsample(pair.target->train, pair.target_train_size, seed);
  run.target_doc_ids = transfer_detail::ids_of(sub);
  ScorerModel init = transfer_detail::extend_fields(std::move(source_model), pair.target->schema.field_names(), seed);
  init.training = json::object();
  run.checkpoint = train({{&sub, &pair.target->schema}}, init.vocab, init.field_names, tc, cfg.features, init, on_epoch);
  run.checkpoint.model.training["regime"] = "transfer";
  run.checkpoint.model.training["stage1"] = stage1_summary;
  return run;
}

inline RegimeRun run_multidomain(const DomainPair& pair, const RegimeConfig& cfg, std::uint64_t seed,
                                 const EpochCallback& on_epoch = {}) {
  transfer_detail::check_pair(pair, true);
  const TrainConfig tc = transfer_detail::seeded(cfg, seed);
  auto sub = target_subsample(pair.target->train, pair.target_train_size, seed);
  auto pooled = document_pointers(pair.source->train);
  for (const auto& d : sub) pooled.push_back(&d);
  const Vocab vocab = build_vocab(pooled, cfg.vocab_size);

  std::vector<std::string> fields = pair.source->schema.field_names();
  for (const auto& f : pair.target->schema.field_names())
    if (std::find(fields.begin(), fields.end(), f) == fields.end()) fields.push_back(f);

  RegimeRun run;
  run.target_doc_ids = transfer_detail::ids_of(sub);
  auto stage1 = train({{&pair.source->train, &pair.source->schema}, {&sub, &pair.target->schema}}, vocab, fields, tc,
                      cfg.features);
  run.stage1_history = stage1.history;
  ScorerModel init = stage1.model;
  const json stage1_summary = {{"val_auc", init.training.value("val_auc", json(nullptr))},
                               {"epoch", init.training.value("epoch", 0)}};
  init.training = json::object();
  run.checkpoint = train({{&sub, &pair.target->schema}}, vocab, fields, tc, cfg.features, init, on_epoch);
  run.checkpoint.model.training["regime"] = "multidomain";
  run.checkpoint.model.training["stage1"] = stage1_summary;
  return run;
}

inline RegimeRun run_regime(Regime r, const DomainPair& pair, const RegimeConfig& cfg, std::uint64_t seed,
                            Stage1Cache* cache = nullptr, const EpochCallback& on_epoch = {}) {
  switch (r) {
    case Regime::kScratch: return run_scratch(pair, cfg, seed, on_epoch);
    case Regime::kTransfer: return run_transfer(pair, cfg, seed, cache, on_epoch);
    case Regime::kMultidomain: return run_multidomain(pair, cfg, seed, on_epoch);
  }
  throw InvariantError("unknown regime");
}

// ---------------------------------------------------------------------------
// Learning curve

struct CellResult {
  Regime regime = Regime::kScratch;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  EvalResult eval;
  json metrics;  // the persisted metrics document
};

inline std::string cell_name(Regime r, std::size_t size, std::uint64_t seed) {
  return std::string(to_string(r)) + "-" + std::to_string(size) + "-" + std::to_string(seed);
}

// Writes best.ckpt, train_log.jsonl and metrics.json for one cell.
inline void persist_cell(const std::filesystem::path& dir, const RegimeRun& run, const json& metrics) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("io", "cannot create " + dir.string() + ": " + ec.message());
  save_model(run.checkpoint.model, (dir / "best.ckpt").string());
  std::string log;
  for (const auto& h : run.stage1_history) {
    json j = h.to_json();
    j["stage"] = 1;
    log += j.dump() + "\n";
  }
  for (const auto& h : run.checkpoint.history) {
    json j = h.to_json();
    j["stage"] = run.stage1_history.empty() ? 1 : 2;
    log += j.dump() + "\n";
  }
  write_file((dir / "train_log.jsonl").string(), log);
  write_file((dir / "metrics.json").string(), metrics.dump(2) + "\n");
}

struct CurveOptions {
  std::vector<Regime> regimes{kAllRegimes, kAllRegimes + 3};
  std::vector<std::size_t> sizes;
  std::vector<std::uint64_t> seeds;
  EvalConfig eval;
  std::optional<std::filesystem::path> out_dir;  // per-cell results when set
  std::size_t jobs = 1;
};

struct CurveReport {
  std::vector<CellResult> cells;   // regime-major, then size, then seed
  std::vector<CurvePoint> points;  // one per (regime, size)
};

// Median of per-seed macro F1 for each (regime, size); cells with no included
// field count as 0.
inline std::vector<CurvePoint> summarize_cells(const std::vector<CellResult>& cells) {
  std::vector<CurvePoint> out;
  for (const auto& c : cells) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CurvePoint& p) {
      return p.regime == to_string(c.regime) && p.size == c.size;
    });
    if (it == out.end()) {
      out.push_back({std::string(to_string(c.regime)), c.size, {}, {}});
      it = out.end() - 1;
    }
    it->per_seed.push_back(c.eval.macro_f1.value_or(0.0));
  }
  for (auto& p : out) p.summary = median_over_seeds(p.per_seed);
  return out;
}

inline CurveReport learning_curve(const Corpus& source, const Corpus& target, const RegimeConfig& cfg,
                                  const CurveOptions& opt, Stage1Cache* shared_cache = nullptr,
                                  const std::function<void(const CellResult&)>& on_cell = {}) {
  if (opt.seeds.empty()) throw InvariantError("learning_curve: seeds must be non-empty");
  if (opt.sizes.empty() || !std::is_sorted(opt.sizes.begin(), opt.sizes.end()))
    throw InvariantError("learning_curve: sizes must be non-empty and ascending");
  struct Job {
    Regime regime;
    std::size_t size;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Regime r : opt.regimes)
    for (auto size : opt.sizes)
      for (auto seed : opt.seeds) jobs.push_back({r, size, seed});

  Stage1Cache local_cache;
  Stage1Cache* cache = shared_cache ? shared_cache : &local_cache;
  CurveReport report;
  report.cells.resize(jobs.size());
  std::mutex report_mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      {
        std::lock_guard lock(report_mu);
        if (failure) return;
      }
      try {
        const Job& j = jobs[k];
        DomainPair pair{&source, &target, j.size};
        RegimeRun run = run_regime(j.regime, pair, cfg, j.seed, cache);
        for (const auto& id : run.target_doc_ids)
          for (const auto& t : target.test)
            if (t.doc_id == id) throw InvariantError("test document " + id + " used for training");
        CellResult cell{j.regime, j.size, j.seed, evaluate(run.checkpoint.model, target.test, target.schema, cfg.features, opt.eval), {}};
        cell.metrics = report_to_json(std::string(to_string(j.regime)), j.size, j.seed, cell.eval);
        if (opt.out_dir) persist_cell(*opt.out_dir / cell_name(j.regime, j.size, j.seed), run, cell.metrics);
        std::lock_guard lock(report_mu);
        report.cells[k] = std::move(cell);
        if (on_cell) on_cell(report.cells[k]);
      } catch (...) {
        std::lock_guard lock(report_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.jobs, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  report.points = summarize_cells(report.cells);
  return report;
}

}  // namespace formfactor
