#pragma once

// Experiment configuration: one JSON file describing the source and target
// corpora, training and feature settings, and the learning-curve grid. The
// CLI is a thin layer over the helpers here.
//
// {
//   "out_dir": "runs",
//   "source": {"doc_type": "invoice", "language": "en", "n_docs": 500, "n_test": 0, "seed": 101, "dir": "..."},
//   "target": {"doc_type": "invoice", "language": "fr", "n_docs": 150, "n_test": 100, "seed": 202},
//   "train": {"batch_size": 256, "learning_rate": 0.001, "max_epochs": 25, ...},
//   "features": {"n_max": 16, "radius": 0.35, "zone_weights": {"left": 1, "above": 1, "right": 1.5, "below": 1.5}},
//   "regimes": ["scratch", "transfer", "multidomain"],
//   "sizes": [10, 50], "seeds": [1, 2, 3, 4, 5],
//   "vocab_size": 2000,
//   "eval": {"min_coverage": 0.8, "min_ground_truth": 40}
// }

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "formfactor/corpus.hpp"
#include "formfactor/evaluation.hpp"
#include "formfactor/synthcorpus.hpp"
#include "formfactor/transfer.hpp"

namespace formfactor {

// The configuration file is malformed or inconsistent (a usage error).
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("invalid-config", what) {}
};

struct CorpusEntry {
  CorpusSpec spec;
  std::filesystem::path dir;  // where gen-corpus writes and the other commands read
};

struct ExperimentConfig {
  std::filesystem::path out_dir = "runs";
  CorpusEntry source;
  CorpusEntry target;
  TrainConfig train;
  FeatureConfig features;
  std::vector<Regime> regimes{kAllRegimes, kAllRegimes + 3};
  std::vector<std::size_t> sizes{10, 50};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t vocab_size = 2000;
  EvalConfig eval;

  RegimeConfig regime_config() const { return {train, features, vocab_size}; }
  std::filesystem::path cell_dir(Regime r, std::size_t size, std::uint64_t seed) const {
    return out_dir / cell_name(r, size, seed);
  }
};

// Cross-doctype experiments default to the larger vocabulary.
inline std::size_t default_vocab_size(const CorpusSpec& source, const CorpusSpec& target) {
  return source.doc_type == target.doc_type ? 2000 : 4000;
}

namespace experiment_detail {

template <typename T>
T get(const json& j, const char* key, const T& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "/" + key + ": " + e.what());
  }
}

inline void reject_unknown(const json& j, const std::vector<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError(where + ": unknown key '" + k + "'");
}

inline CorpusEntry corpus_from_json(const json& j, const std::string& where, const std::filesystem::path& default_dir) {
  reject_unknown(j, {"doc_type", "language", "n_docs", "n_test", "test_fraction", "seed", "noise", "dir"}, where);
  CorpusEntry e;
  auto& s = e.spec;
  s.doc_type = get(j, "doc_type", s.doc_type, where);
  s.language = get(j, "language", s.language, where);
  const long long n_docs = get<long long>(j, "n_docs", static_cast<long long>(s.n_docs), where);
  if (n_docs < 1) throw ConfigError(where + "/n_docs: must be >= 1");
  s.n_docs = static_cast<std::size_t>(n_docs);
  if (j.contains("n_test")) s.n_test = get<std::size_t>(j, "n_test", 0, where);
  s.test_fraction = get(j, "test_fraction", s.test_fraction, where);
  s.seed = get(j, "seed", s.seed, where);
  s.noise = get(j, "noise", s.noise, where);
  e.dir = j.contains("dir") ? std::filesystem::path(get<std::string>(j, "dir", "", where)) : default_dir;
  try {
    s.validate();
  } catch (const InvariantError& err) {
    throw ConfigError(where + ": " + err.what());
  }
  return e;
}

}  // namespace experiment_detail

inline ExperimentConfig experiment_from_json(const json& j) {
  using namespace experiment_detail;
  reject_unknown(j, {"out_dir", "source", "target", "train", "features", "regimes", "sizes", "seeds", "vocab_size", "eval"},
                 "");
  ExperimentConfig c;
  c.out_dir = get<std::string>(j, "out_dir", c.out_dir.string(), "");
  if (!j.contains("source") || !j.contains("target")) throw ConfigError("config needs 'source' and 'target' corpora");
  c.source = corpus_from_json(j.at("source"), "/source", c.out_dir / "corpus-source");
  c.target = corpus_from_json(j.at("target"), "/target", c.out_dir / "corpus-target");

  const json t = j.value("train", json::object());
  reject_unknown(t, {"batch_size", "learning_rate", "max_epochs", "beta1", "beta2", "epsilon", "neg_per_pos_cap",
                     "split_fraction", "dims"},
                 "/train");
  auto& tc = c.train;
  tc.batch_size = get(t, "batch_size", tc.batch_size, "/train");
  tc.learning_rate = get(t, "learning_rate", tc.learning_rate, "/train");
  tc.max_epochs = get(t, "max_epochs", tc.max_epochs, "/train");
  tc.beta1 = get(t, "beta1", tc.beta1, "/train");
  tc.beta2 = get(t, "beta2", tc.beta2, "/train");
  tc.epsilon = get(t, "epsilon", tc.epsilon, "/train");
  tc.neg_per_pos_cap = get(t, "neg_per_pos_cap", tc.neg_per_pos_cap, "/train");
  tc.split_fraction = get(t, "split_fraction", tc.split_fraction, "/train");
  if (t.contains("dims")) {
    const json& d = t.at("dims");
    reject_unknown(d, {"token_dim", "position_dim", "output_dim"}, "/train/dims");
    tc.dims.token_dim = get(d, "token_dim", tc.dims.token_dim, "/train/dims");
    tc.dims.position_dim = get(d, "position_dim", tc.dims.position_dim, "/train/dims");
    tc.dims.output_dim = get(d, "output_dim", tc.dims.output_dim, "/train/dims");
  }

  const json f = j.value("features", json::object());
  reject_unknown(f, {"n_max", "radius", "zone_weights"}, "/features");
  c.features.n_max = get(f, "n_max", c.features.n_max, "/features");
  c.features.radius = get(f, "radius", c.features.radius, "/features");
  if (f.contains("zone_weights")) {
    const json& z = f.at("zone_weights");
    reject_unknown(z, {"left", "above", "right", "below"}, "/features/zone_weights");
    auto& w = c.features.zone_weights;
    w.left = get(z, "left", w.left, "/features/zone_weights");
    w.above = get(z, "above", w.above, "/features/zone_weights");
    w.right = get(z, "right", w.right, "/features/zone_weights");
    w.below = get(z, "below", w.below, "/features/zone_weights");
  }

  if (j.contains("regimes")) {
    c.regimes.clear();
    for (const auto& name : get<std::vector<std::string>>(j, "regimes", {}, "")) {
      auto r = regime_from_string(name);
      if (!r) throw ConfigError("/regimes: unknown regime '" + name + "'");
      c.regimes.push_back(*r);
    }
  }
  c.sizes = get(j, "sizes", c.sizes, "");
  c.seeds = get(j, "seeds", c.seeds, "");
  c.vocab_size = get(j, "vocab_size", default_vocab_size(c.source.spec, c.target.spec), "");

  const json e = j.value("eval", json::object());
  reject_unknown(e, {"min_coverage", "min_ground_truth"}, "/eval");
  c.eval.min_coverage = get(e, "min_coverage", c.eval.min_coverage, "/eval");
  c.eval.min_ground_truth = get(e, "min_ground_truth", c.eval.min_ground_truth, "/eval");

  if (c.vocab_size < 2) throw ConfigError("/vocab_size: must be >= 2");
  if (c.regimes.empty()) throw ConfigError("/regimes: must be non-empty");
  if (c.seeds.empty()) throw ConfigError("/seeds: must be non-empty");
  if (c.sizes.empty() || !std::is_sorted(c.sizes.begin(), c.sizes.end()))
    throw ConfigError("/sizes: must be non-empty and ascending");
  try {
    c.train.validate();
    c.features.validate();
  } catch (const InvariantError& err) {
    throw ConfigError(err.what());
  }
  return c;
}

// Relative corpus and output paths resolve against the config file's directory.
inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError("no config file at " + path.string());
  json j;
  try {
    j = json::parse(read_file(path.string()));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = experiment_from_json(j);
  const auto base = path.parent_path();
  auto resolve = [&](std::filesystem::path& p) {
    if (p.is_relative()) p = base / p;
  };
  resolve(c.out_dir);
  resolve(c.source.dir);
  resolve(c.target.dir);
  return c;
}

inline Corpus load_corpus_of(const CorpusEntry& e) {
  if (!std::filesystem::exists(e.dir / "manifest.jsonl"))
    throw DataError("missing-corpus", "no corpus at " + e.dir.string() + " (run gen-corpus first)");
  return read_corpus(e.dir);
}

// One learning-curve cell: trains, evaluates on the target test split and
// writes best.ckpt, train_log.jsonl and metrics.json under the cell directory.
inline CellResult run_cell(const ExperimentConfig& cfg, const Corpus& source, const Corpus& target, Regime regime,
                           std::size_t size, std::uint64_t seed, const EpochCallback& on_epoch = {}) {
  DomainPair pair{&source, &target, size};
  RegimeRun run = run_regime(regime, pair, cfg.regime_config(), seed, nullptr, on_epoch);
  CellResult cell{regime, size, seed, evaluate(run.checkpoint.model, target.test, target.schema, cfg.features, cfg.eval), {}};
  cell.metrics = report_to_json(std::string(to_string(regime)), size, seed, cell.eval);
  persist_cell(cfg.cell_dir(regime, size, seed), run, cell.metrics);
  return cell;
}

// Curve points from every metrics.json found directly under `dir`.
inline std::vector<CurvePoint> collect_curve(const std::filesystem::path& dir) {
  std::vector<CellResult> cells;
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir))
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (std::filesystem::exists(entry.path() / "metrics.json")) files.push_back(entry.path() / "metrics.json");
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    json m;
    try {
      m = json::parse(read_file(f.string()));
    } catch (const json::exception& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
    auto r = regime_from_string(m.value("regime", ""));
    if (!r) continue;
    CellResult c;
    c.regime = *r;
    c.size = m.value("size", std::size_t{0});
    c.seed = m.value("seed", std::uint64_t{0});
    if (!m["macro_f1"].is_null()) c.eval.macro_f1 = m["macro_f1"].get<double>();
    cells.push_back(std::move(c));
  }
  // Regime order, then ascending size.
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    if (a.regime != b.regime) return a.regime < b.regime;
    if (a.size != b.size) return a.size < b.size;
    return a.seed < b.seed;
  });
  return summarize_cells(cells);
}

}  // namespace formfactor
