#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "formfactor/synthcorpus.hpp"
#include "formfactor/transfer.hpp"

namespace ff = formfactor;
namespace fs = std::filesystem;

namespace {

ff::Corpus make(const std::string& type, const std::string& lang, std::size_t n, std::uint64_t seed) {
  ff::CorpusSpec s;
  s.doc_type = type;
  s.language = lang;
  s.n_docs = n;
  s.seed = seed;
  return ff::generate_corpus(s);
}

ff::RegimeConfig tiny_config() {
  ff::RegimeConfig c;
  c.train.batch_size = 64;
  c.train.learning_rate = 5e-3;
  c.train.max_epochs = 2;
  c.train.dims = {8, 4, 8};
  c.vocab_size = 300;
  return c;
}

struct Corpora {
  ff::Corpus source = make("invoice", "en", 12, 1);
  ff::Corpus target = make("invoice", "fr", 15, 2);
};

const Corpora& corpora() {
  static const Corpora c;
  return c;
}

std::string temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("formfactor_transfer_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST(Regime, NamesRoundTrip) {
  for (auto r : ff::kAllRegimes) EXPECT_EQ(ff::regime_from_string(ff::to_string(r)), r);
  EXPECT_FALSE(ff::regime_from_string("finetune").has_value());
}

TEST(TargetSubsample, NestedSeededAndBounded) {
  const auto& docs = corpora().target.train;
  auto small = ff::target_subsample(docs, 4, 9);
  auto big = ff::target_subsample(docs, 10, 9);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].doc_id, big[i].doc_id);
  std::set<std::string> ids;
  for (const auto& d : big) ids.insert(d.doc_id);
  EXPECT_EQ(ids.size(), 10u);
  // Input order does not matter.
  std::vector<ff::Document> rev(docs.rbegin(), docs.rend());
  auto again = ff::target_subsample(rev, 4, 9);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(again[i].doc_id, small[i].doc_id);
  auto other = ff::target_subsample(docs, 10, 10);
  std::vector<std::string> a, b;
  for (const auto& d : big) a.push_back(d.doc_id);
  for (const auto& d : other) b.push_back(d.doc_id);
  EXPECT_NE(a, b);
  EXPECT_THROW(ff::target_subsample(docs, docs.size() + 1, 1), ff::DataError);
}

TEST(Regimes, RejectTooFewTargetDocuments) {
  const auto& c = corpora();
  for (std::size_t n : {0u, 1u})
    for (auto r : ff::kAllRegimes) {
      try {
        ff::run_regime(r, {&c.source, &c.target, n}, tiny_config(), 1);
        FAIL() << "expected an error";
      } catch (const ff::DataError& e) {
        EXPECT_EQ(e.kind(), "too-few-documents");
      }
    }
}

TEST(Regimes, VocabularyProvenanceAndFieldTables) {
  const auto& c = corpora();
  const auto cfg = tiny_config();
  ff::DomainPair pair{&c.source, &c.target, 6};

  auto scratch = ff::run_scratch(pair, cfg, 3);
  auto sub = ff::target_subsample(c.target.train, 6, 3);
  EXPECT_TRUE(scratch.checkpoint.model.vocab == ff::build_vocab(ff::document_pointers(sub), cfg.vocab_size));
  EXPECT_EQ(scratch.checkpoint.model.field_names, c.target.schema.field_names());
  EXPECT_EQ(scratch.target_doc_ids.size(), 6u);
  EXPECT_TRUE(scratch.stage1_history.empty());

  ff::Stage1Cache cache;
  auto transfer = ff::run_transfer(pair, cfg, 3, &cache);
  const auto& tv = transfer.checkpoint.model.vocab;
  EXPECT_TRUE(tv == ff::build_vocab(ff::document_pointers(c.source.train), cfg.vocab_size));
  // Target-only words stay unknown after transfer.
  EXPECT_EQ(tv.lookup("facture"), ff::Vocab::kUnk);
  EXPECT_EQ(transfer.stage1_history.size(), cfg.train.max_epochs);
  EXPECT_EQ(transfer.checkpoint.history.size(), cfg.train.max_epochs);
  EXPECT_EQ(transfer.checkpoint.model.training["regime"], "transfer");

  auto multi = ff::run_multidomain(pair, cfg, 3);
  auto pooled = ff::document_pointers(c.source.train);
  for (const auto& d : sub) pooled.push_back(&d);
  EXPECT_TRUE(multi.checkpoint.model.vocab == ff::build_vocab(pooled, cfg.vocab_size));
  EXPECT_NE(multi.checkpoint.model.vocab.lookup("facture"), ff::Vocab::kUnk);
  EXPECT_EQ(multi.checkpoint.model.field_names, c.source.schema.field_names());  // same field names
}

TEST(Regimes, TransferCrossDoctypeExtendsFieldTable) {
  auto paystubs = make("paystub", "en", 8, 4);
  const auto& src = corpora().source;
  ff::DomainPair pair{&src, &paystubs, 4};
  auto cfg = tiny_config();
  cfg.train.max_epochs = 1;
  auto run = ff::run_transfer(pair, cfg, 1);
  const auto& names = run.checkpoint.model.field_names;
  // Source fields first, then unseen target fields.
  for (std::size_t i = 0; i < src.schema.fields.size(); ++i) EXPECT_EQ(names[i], src.schema.fields[i].name);
  for (const auto& f : paystubs.schema.fields)
    EXPECT_NE(std::find(names.begin(), names.end(), f.name), names.end()) << f.name;
  std::set<std::string> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), names.size());
  EXPECT_EQ(static_cast<std::size_t>(run.checkpoint.model.params.field_embeddings.rows()), names.size());
}

TEST(Regimes, DeterministicAndStage1Cached) {
  const auto& c = corpora();
  const auto cfg = tiny_config();
  ff::DomainPair pair{&c.source, &c.target, 5};
  ff::Stage1Cache cache;
  auto a = ff::run_transfer(pair, cfg, 2, &cache);
  auto b = ff::run_transfer(pair, cfg, 2, &cache);
  auto fresh = ff::run_transfer(pair, cfg, 2);
  EXPECT_TRUE(a.checkpoint.model.params == b.checkpoint.model.params);
  EXPECT_TRUE(a.checkpoint.model.params == fresh.checkpoint.model.params);
  auto m1 = ff::run_multidomain(pair, cfg, 2);
  auto m2 = ff::run_multidomain(pair, cfg, 2);
  EXPECT_EQ(ff::serialize_model(m1.checkpoint.model), ff::serialize_model(m2.checkpoint.model));

  int calls = 0;
  ff::Stage1Cache counted;
  auto make_model = [&] {
    ++calls;
    return a.checkpoint.model;
  };
  counted.get_or_train("k", make_model);
  counted.get_or_train("k", make_model);
  counted.get_or_train("j", make_model);
  EXPECT_EQ(calls, 2);
}

TEST(LearningCurve, PersistsCellsAndMediansRecomputeFromDisk) {
  const auto& c = corpora();
  ff::CurveOptions opt;
  opt.sizes = {4, 8};
  opt.seeds = {1, 2, 3};
  opt.eval.min_ground_truth = 1;
  opt.out_dir = temp_dir("curve");
  opt.jobs = 2;
  auto report = ff::learning_curve(c.source, c.target, tiny_config(), opt);
  ASSERT_EQ(report.cells.size(), 3u * 2 * 3);
  ASSERT_EQ(report.points.size(), 3u * 2);

  std::set<std::string> test_ids, test_templates;
  for (const auto& d : c.target.test) {
    test_ids.insert(d.doc_id);
    test_templates.insert(d.template_id);
  }
  for (const auto& p : report.points) {
    std::vector<double> from_disk;
    for (std::uint64_t seed : opt.seeds) {
      const auto dir = fs::path(*opt.out_dir) / ff::cell_name(*ff::regime_from_string(p.regime), p.size, seed);
      ASSERT_TRUE(fs::exists(dir / "best.ckpt"));
      ASSERT_TRUE(fs::exists(dir / "train_log.jsonl"));
      auto metrics = ff::json::parse(ff::read_file((dir / "metrics.json").string()));
      from_disk.push_back(metrics["macro_f1"].is_null() ? 0.0 : metrics["macro_f1"].get<double>());
      EXPECT_EQ(metrics["regime"], p.regime);
      EXPECT_EQ(metrics["size"], p.size);
      auto model = ff::load_model((dir / "best.ckpt").string());
      EXPECT_TRUE(ff::all_finite(model.params));
    }
    auto s = ff::median_over_seeds(from_disk);
    EXPECT_DOUBLE_EQ(p.summary.median, s.median) << p.regime << " " << p.size;
    EXPECT_DOUBLE_EQ(p.summary.min, s.min);
    EXPECT_DOUBLE_EQ(p.summary.max, s.max);
  }

  // Training subsamples never touch the test split, by doc id or template.
  for (std::size_t size : opt.sizes)
    for (auto seed : opt.seeds)
      for (const auto& d : ff::target_subsample(c.target.train, size, seed)) {
        EXPECT_FALSE(test_ids.count(d.doc_id));
        EXPECT_FALSE(test_templates.count(d.template_id));
      }

  // Two-stage logs record both stages.
  const auto log = ff::read_file((fs::path(*opt.out_dir) / "transfer-4-1" / "train_log.jsonl").string());
  EXPECT_NE(log.find("\"stage\":1"), std::string::npos);
  EXPECT_NE(log.find("\"stage\":2"), std::string::npos);
  fs::remove_all(*opt.out_dir);
}

TEST(LearningCurve, JobsDoNotChangeResults) {
  const auto& c = corpora();
  ff::CurveOptions opt;
  opt.regimes = {ff::Regime::kScratch, ff::Regime::kTransfer};
  opt.sizes = {4};
  opt.seeds = {5, 6};
  opt.eval.min_ground_truth = 1;
  auto serial = ff::learning_curve(c.source, c.target, tiny_config(), opt);
  opt.jobs = 3;
  auto parallel = ff::learning_curve(c.source, c.target, tiny_config(), opt);
  ASSERT_EQ(serial.cells.size(), parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) EXPECT_EQ(serial.cells[i].metrics, parallel.cells[i].metrics);
  opt.sizes = {8, 4};
  EXPECT_THROW(ff::learning_curve(c.source, c.target, tiny_config(), opt), ff::InvariantError);
}
