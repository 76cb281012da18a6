// formfactor: corpus generation, training, evaluation, extraction and
// learning-curve experiments driven by one experiment config file.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Failures are
// reported on stderr as one JSON object {"error": kind, "message": text}.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "formfactor/experiment.hpp"

namespace ff = formfactor;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << ff::json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("formfactor");
  logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("FORMFACTOR_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only accept it when asked for.
    if (level == spdlog::level::off && std::string(env) != "off")
      throw UsageError("FORMFACTOR_LOG_LEVEL must be one of trace, debug, info, warn, error, critical, off");
    spdlog::set_level(level);
  }
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Timestamps live only here so every other output is reproducible.
class RunMeta {
 public:
  RunMeta(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), started_(utc_now()),
        t0_(std::chrono::steady_clock::now()) {}

  void write(const fs::path& dir) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    ff::json j{{"command", command_}, {"argv", argv_}, {"started", started_}, {"finished", utc_now()},
               {"duration_s", secs}};
    fs::create_directories(dir);
    ff::write_file((dir / "run_meta.json").string(), j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  std::chrono::steady_clock::time_point t0_;
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    const fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    ff::write_file(out_path, text);
  }
}

ff::EpochCallback epoch_logger(const std::string& cell) {
  return [cell](const ff::EpochLog& log) {
    ff::json j = log.to_json();
    j["cell"] = cell;
    spdlog::info("{}", j.dump());
  };
}

struct Options {
  std::string config;
  std::string regime;
  std::size_t size = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  bool plot = false;
  std::string out;
  std::string which = "both";
  std::string checkpoint;
  std::string schema;
  std::vector<std::string> documents;
};

ff::Regime parse_regime(const std::string& s) {
  auto r = ff::regime_from_string(s);
  if (!r) throw UsageError("unknown regime '" + s + "' (expected scratch, transfer or multidomain)");
  return *r;
}

ff::ExperimentConfig load_config(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  return ff::load_experiment(o.config);
}

// ---------------------------------------------------------------------------

int cmd_gen_corpus(const Options& o, const std::vector<std::string>& argv) {
  RunMeta meta("gen-corpus", argv);
  auto cfg = load_config(o);
  std::vector<std::pair<std::string, ff::CorpusEntry>> todo;
  if (o.which == "source" || o.which == "both") todo.emplace_back("source", cfg.source);
  if (o.which == "target" || o.which == "both") todo.emplace_back("target", cfg.target);
  if (!o.out.empty()) {
    if (todo.size() != 1) throw UsageError("--out needs --which source or --which target");
    todo[0].second.dir = o.out;
  }
  for (const auto& [role, entry] : todo) {
    spdlog::info("generating {} corpus ({} {}, {} docs) into {}", role, entry.spec.doc_type, entry.spec.language,
                 entry.spec.n_docs, entry.dir.string());
    const ff::Corpus corpus = ff::generate_corpus(entry.spec);
    ff::write_corpus(corpus, entry.dir);
    meta.write(entry.dir);
    std::cout << ff::json{{"role", role}, {"dir", entry.dir.string()}, {"train", corpus.train.size()},
                          {"test", corpus.test.size()}}
                     .dump()
              << "\n";
  }
  return 0;
}

int cmd_train(const Options& o, const std::vector<std::string>& argv) {
  RunMeta meta("train", argv);
  const ff::Regime regime = parse_regime(o.regime);
  auto cfg = load_config(o);
  if (!o.out.empty()) cfg.out_dir = o.out;
  const ff::Corpus target = ff::load_corpus_of(cfg.target);
  const ff::Corpus source = regime == ff::Regime::kScratch ? ff::Corpus{} : ff::load_corpus_of(cfg.source);
  const std::string name = ff::cell_name(regime, o.size, o.seed);
  spdlog::info("training cell {}", name);
  const auto cell = ff::run_cell(cfg, source, target, regime, o.size, o.seed, epoch_logger(name));
  const fs::path dir = cfg.cell_dir(regime, o.size, o.seed);
  meta.write(dir);
  std::cout << ff::json{{"cell", name},
                        {"checkpoint", (dir / "best.ckpt").string()},
                        {"macro_f1", cell.metrics["macro_f1"]}}
                   .dump()
            << "\n";
  return 0;
}

// Checkpoint from --checkpoint, or from the cell named by --regime/--size/--seed.
fs::path checkpoint_path(const Options& o, const ff::ExperimentConfig& cfg) {
  if (!o.checkpoint.empty()) return o.checkpoint;
  if (o.regime.empty()) throw UsageError("give --checkpoint or --regime/--size/--seed");
  return cfg.cell_dir(parse_regime(o.regime), o.size, o.seed) / "best.ckpt";
}

int cmd_eval(const Options& o) {
  auto cfg = load_config(o);
  const bool want_report = !o.checkpoint.empty() || !o.regime.empty();
  if (!want_report && !o.plot) throw UsageError("eval needs a checkpoint (--checkpoint or a cell) or --plot");
  if (want_report) {
    const fs::path ckpt = checkpoint_path(o, cfg);
    if (!fs::exists(ckpt)) throw ff::DataError("missing-checkpoint", "no checkpoint at " + ckpt.string());
    const ff::ScorerModel model = ff::load_model(ckpt.string());
    const ff::Corpus target = ff::load_corpus_of(cfg.target);
    ff::require_same_fields(model, target.schema);
    const std::string regime = o.regime.empty() ? model.training.value("regime", std::string("unknown")) : o.regime;
    const auto result = ff::evaluate(model, target.test, target.schema, cfg.features, cfg.eval);
    emit(ff::report_to_json(regime, o.size, o.seed, result).dump(2) + "\n", o.out);
  }
  if (o.plot) {
    const auto points = ff::collect_curve(cfg.out_dir);
    if (points.empty()) throw ff::DataError("no-metrics", "no cell metrics under " + cfg.out_dir.string());
    ff::write_file((cfg.out_dir / "curve.svg").string(), ff::curve_svg(points));
    ff::write_file((cfg.out_dir / "curve.csv").string(), ff::curve_csv(points));
    spdlog::info("wrote {}", (cfg.out_dir / "curve.svg").string());
  }
  return 0;
}

int cmd_extract(const Options& o) {
  if (o.documents.empty()) throw UsageError("extract needs at least one document path");
  ff::TargetSchema schema;
  fs::path ckpt;
  if (!o.schema.empty() && !o.checkpoint.empty()) {
    schema = ff::load_schema(o.schema);
    ckpt = o.checkpoint;
  } else {
    auto cfg = load_config(o);
    ckpt = checkpoint_path(o, cfg);
    schema = o.schema.empty() ? ff::load_schema((cfg.target.dir / "schema.json").string()) : ff::load_schema(o.schema);
  }
  if (!fs::exists(ckpt)) throw ff::DataError("missing-checkpoint", "no checkpoint at " + ckpt.string());
  const ff::ScorerModel model = ff::load_model(ckpt.string());
  ff::require_same_fields(model, schema);
  ff::FeatureConfig features;
  if (!o.config.empty()) features = ff::load_experiment(o.config).features;

  std::string out;
  std::size_t failures = 0;
  for (const auto& path : o.documents) {
    try {
      const ff::Document doc = ff::strip_ground_truth(ff::load_document(path));
      const auto scores = ff::score_document(doc, schema, model, features);
      out += ff::extraction_to_json(ff::assign(scores, schema)).dump() + "\n";
    } catch (const ff::Error& e) {
      ++failures;
      std::cerr << ff::json{{"error", e.kind()}, {"message", e.what()}, {"document", path}}.dump() << std::endl;
    }
  }
  emit(out, o.out);
  return failures ? kExitRuntime : 0;
}

int cmd_curve(const Options& o, const std::vector<std::string>& argv) {
  RunMeta meta("curve", argv);
  auto cfg = load_config(o);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  const ff::Corpus source = ff::load_corpus_of(cfg.source);
  const ff::Corpus target = ff::load_corpus_of(cfg.target);
  ff::CurveOptions opt;
  opt.regimes = cfg.regimes;
  opt.sizes = cfg.sizes;
  opt.seeds = cfg.seeds;
  opt.eval = cfg.eval;
  opt.out_dir = cfg.out_dir;
  opt.jobs = std::max<std::size_t>(1, o.jobs);
  const auto report = ff::learning_curve(source, target, cfg.regime_config(), opt, nullptr, [](const ff::CellResult& c) {
    spdlog::info("cell {} macro_f1={}", ff::cell_name(c.regime, c.size, c.seed), c.metrics["macro_f1"].dump());
  });
  ff::write_file((cfg.out_dir / "curve.csv").string(), ff::curve_csv(report.points));
  ff::write_file((cfg.out_dir / "curve.svg").string(), ff::curve_svg(report.points));
  meta.write(cfg.out_dir);
  std::cout << ff::curve_csv(report.points);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Form document field extraction: corpora, training, evaluation and learning curves"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Experiment config file (JSON)");

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic source and/or target corpus");
  gen->add_option("--which", o.which, "source, target or both")->check(CLI::IsMember({"source", "target", "both"}));
  gen->add_option("--out", o.out, "Output directory (with --which source|target)");

  auto* train = app.add_subcommand("train", "Train one learning-curve cell");
  train->add_option("--regime", o.regime, "scratch, transfer or multidomain")->required();
  train->add_option("--size", o.size, "Number of target training documents")->required();
  train->add_option("--seed", o.seed, "Seed")->required();
  train->add_option("--out", o.out, "Override the config's out_dir");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the target test split");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint path (default: the cell's best.ckpt)");
  eval->add_option("--regime", o.regime, "Cell regime");
  eval->add_option("--size", o.size, "Cell size");
  eval->add_option("--seed", o.seed, "Cell seed");
  eval->add_flag("--plot", o.plot, "Write curve.svg and curve.csv from all cell metrics under out_dir");
  eval->add_option("--out", o.out, "Write the report here instead of stdout");

  auto* extract = app.add_subcommand("extract", "Extract fields from documents (JSON lines on stdout)");
  extract->add_option("documents", o.documents, "Document JSON files")->required();
  extract->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
  extract->add_option("--schema", o.schema, "Schema file (default: the target corpus schema)");
  extract->add_option("--regime", o.regime, "Cell regime");
  extract->add_option("--size", o.size, "Cell size");
  extract->add_option("--seed", o.seed, "Cell seed");
  extract->add_option("--out", o.out, "Write extractions here instead of stdout");

  auto* curve = app.add_subcommand("curve", "Run the configured learning-curve grid");
  curve->add_option("--seeds", o.seeds, "Comma-separated seeds (overrides the config)")->delimiter(',');
  curve->add_option("--jobs", o.jobs, "Parallel cells")->check(CLI::PositiveNumber);
  curve->add_option("--out", o.out, "Override the config's out_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kExitUsage;
  }

  try {
    setup_logging();
    if (gen->parsed()) return cmd_gen_corpus(o, args);
    if (train->parsed()) return cmd_train(o, args);
    if (eval->parsed()) return cmd_eval(o);
    if (extract->parsed()) return cmd_extract(o);
    if (curve->parsed()) return cmd_curve(o, args);
  } catch (const UsageError& e) {
    report_error("usage", e.what());
    return kExitUsage;
  } catch (const ff::ConfigError& e) {
    report_error(e.kind(), e.what());
    return kExitUsage;
  } catch (const ff::Error& e) {
    report_error(e.kind(), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
