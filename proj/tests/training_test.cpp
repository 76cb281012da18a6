#include <gtest/gtest.h>

#include <set>

#include "formfactor/training.hpp"
#include "test_util.hpp"

namespace ff = formfactor;
namespace tu = formfactor::testing;

namespace {

ff::Document words_doc(const std::string& id, const std::vector<std::string>& words) {
  ff::Document d;
  d.doc_id = id;
  d.pages = {{1, 1}};
  double x = 0.01;
  for (const auto& w : words) {
    d.tokens.push_back({w, {x, 0.1, x + 0.01, 0.11}, 0});
    x += 0.012;
  }
  return d;
}

ff::TrainConfig fast_config() {
  ff::TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  cfg.max_epochs = 15;
  cfg.seed = 4;
  cfg.dims = {16, 4, 16};
  return cfg;
}

}  // namespace

TEST(BuildVocab, CountsLowercasedTokensAndBreaksTiesLexicographically) {
  auto a = words_doc("a", {"Total", "total", "Date", "b", "c"});
  auto b = words_doc("b", {"DATE", "date", "a", "c"});
  auto v = ff::build_vocab({&a, &b}, 3);
  // Counts: date 3, total 2, c 2, a 1, b 1 -> top 3 = date, c, total.
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
  EXPECT_EQ(v.token(2), "date");
  EXPECT_EQ(v.token(3), "c");
  EXPECT_EQ(v.token(4), "total");
  EXPECT_EQ(v.lookup("a"), ff::Vocab::kUnk);

  // Pooling over documents equals counting the concatenation.
  auto joined = words_doc("j", {"Total", "total", "Date", "b", "c", "DATE", "date", "a", "c"});
  EXPECT_TRUE(ff::build_vocab({&joined}, 3) == v);
  EXPECT_THROW(ff::build_vocab({}, 3), ff::DataError);
  EXPECT_THROW(ff::build_vocab({&a}, 0), ff::InvariantError);
}

TEST(Labeling, NegativeCapArithmetic) {
  // One true date among 200 distractor dates on the page.
  ff::Document d;
  d.doc_id = "cap";
  d.pages = {{1, 1}};
  d.tokens.push_back({"01/02/2021", {0.01, 0.01, 0.05, 0.015}, 0});
  for (int i = 0; i < 200; ++i) {
    const double y = 0.02 + 0.0045 * i;
    d.tokens.push_back({tu::toy_date(1 + i % 28, 3 + i / 28), {0.5, y, 0.55, y + 0.003}, 0});
  }
  ff::TargetSchema s;
  s.fields = {{"when", ff::FieldType::kDate, std::nullopt}};
  d.ground_truth = ff::GroundTruth{{"when", {{"2021-01-02", std::nullopt}}}};
  auto ex = ff::label_document(d, s, {}, 10, 1);
  ASSERT_EQ(ex.size(), 11u);
  int pos = 0;
  for (const auto& e : ex) pos += e.label;
  EXPECT_EQ(pos, 1);

  // Without any positive the cap is still 10 negatives.
  d.ground_truth = ff::GroundTruth{{"when", {{"1999-01-01", std::nullopt}}}};
  EXPECT_EQ(ff::label_document(d, s, {}, 10, 1).size(), 10u);
  // The subsample is seeded.
  auto again = ff::label_document(d, s, {}, 10, 1);
  auto other = ff::label_document(d, s, {}, 10, 2);
  std::vector<std::string> a, b, c;
  for (const auto& e : ff::label_document(d, s, {}, 10, 1)) a.push_back(e.neighbors.candidate_id);
  for (const auto& e : again) b.push_back(e.neighbors.candidate_id);
  for (const auto& e : other) c.push_back(e.neighbors.candidate_id);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  d.ground_truth.reset();
  EXPECT_THROW(ff::label_document(d, s, {}, 10, 1), ff::DataError);
}

TEST(Labeling, SharedTypeFieldsEachGetLabels) {
  auto d = tu::toy_document(1, 0);
  auto ex = ff::label_document(d, tu::toy_schema(), {}, 10, 0);
  // Three date candidates, two date fields: 3 examples per field.
  ASSERT_EQ(ex.size(), 6u);
  int pos_issued = 0, pos_due = 0;
  for (const auto& e : ex) (e.field_index == 0 ? pos_issued : pos_due) += e.label;
  EXPECT_EQ(pos_issued, 1);
  EXPECT_EQ(pos_due, 1);
}

TEST(Split, SizesPartitionAndSeed) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("doc" + std::to_string(i));
  auto [tr, va] = ff::split_documents(ids, 0.8, 7);
  EXPECT_EQ(tr.size(), 8u);
  EXPECT_EQ(va.size(), 2u);
  std::set<std::size_t> all(tr.begin(), tr.end());
  all.insert(va.begin(), va.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_EQ(ff::split_documents(ids, 0.8, 7), std::make_pair(tr, va));
  // Input order does not matter, only doc ids.
  std::vector<std::string> rev(ids.rbegin(), ids.rend());
  auto [tr2, va2] = ff::split_documents(rev, 0.8, 7);
  std::set<std::string> a, b;
  for (auto i : va) a.insert(ids[i]);
  for (auto i : va2) b.insert(rev[i]);
  EXPECT_EQ(a, b);
  // Clamped so both sides are non-empty.
  EXPECT_EQ(ff::split_documents({"x", "y"}, 0.99, 1).first.size(), 1u);
  EXPECT_EQ(ff::split_documents({"x", "y"}, 0.01, 1).first.size(), 1u);
  EXPECT_THROW(ff::split_documents({"x"}, 0.8, 1), ff::DataError);
  EXPECT_THROW(ff::split_documents(ids, 1.0, 1), ff::InvariantError);
}

TEST(Split, ExamplesFollowDocuments) {
  auto docs = tu::toy_corpus(2, 10);
  std::vector<ff::LabeledExample> ex;
  for (const auto& d : docs)
    for (auto& e : ff::label_document(d, tu::toy_schema(), {}, 10, 0)) ex.push_back(std::move(e));
  auto [tr, va] = ff::split_examples(ex, 0.8, 3);
  EXPECT_EQ(tr.size() + va.size(), ex.size());
  std::set<std::string> tr_docs, va_docs;
  for (const auto& e : tr) tr_docs.insert(e.doc_id);
  for (const auto& e : va) va_docs.insert(e.doc_id);
  EXPECT_EQ(tr_docs.size(), 8u);
  EXPECT_EQ(va_docs.size(), 2u);
  for (const auto& id : va_docs) EXPECT_FALSE(tr_docs.count(id));
}

TEST(Train, ZeroEpochsReturnsInitialParameters) {
  auto docs = tu::toy_corpus(3, 6);
  const auto schema = tu::toy_schema();
  auto cfg = fast_config();
  cfg.max_epochs = 0;
  auto vocab = ff::build_vocab(ff::document_pointers(docs), 50);
  auto ck = ff::train({{&docs, &schema}}, vocab, schema.field_names(), cfg, {});
  EXPECT_EQ(ck.epoch, 0u);
  EXPECT_TRUE(ck.history.empty());
  EXPECT_TRUE(ck.model.params == ff::fresh_model(vocab, schema.field_names(), cfg.seed, cfg.dims).params);
}

TEST(Train, SeparableCorpusReachesHighValidationAuc) {
  auto docs = tu::toy_corpus(5, 20);
  const auto schema = tu::toy_schema();
  auto cfg = fast_config();
  cfg.batch_size = 8;
  cfg.max_epochs = 40;
  auto vocab = ff::build_vocab(ff::document_pointers(docs), 50);
  std::vector<double> losses;
  auto ck = ff::train({{&docs, &schema}}, vocab, schema.field_names(), cfg, {}, std::nullopt,
                      [&](const ff::EpochLog& l) { losses.push_back(l.train_loss); });
  ASSERT_TRUE(ck.val_auc.has_value());
  EXPECT_GE(*ck.val_auc, 0.95);
  ASSERT_EQ(losses.size(), cfg.max_epochs);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_FALSE(ck.validation_degenerate);

  // Chosen epoch is the argmax of the history, earliest on ties.
  std::size_t arg = 0;
  for (std::size_t i = 0; i < ck.history.size(); ++i)
    if (ck.history[i].val_auc && (!ck.history[arg].val_auc || *ck.history[i].val_auc > *ck.history[arg].val_auc))
      arg = i;
  EXPECT_EQ(ck.epoch, ck.history[arg].epoch);
  EXPECT_EQ(*ck.val_auc, *ck.history[arg].val_auc);

  // The stored parameters reproduce the recorded AUC.
  auto data = ff::prepare_training_data({{&docs, &schema}}, ck.model, {}, cfg);
  EXPECT_DOUBLE_EQ(*ff::examples_auc(ck.model.params, data.validation), *ck.val_auc);
}

TEST(Train, DeterministicForFixedSeed) {
  auto docs = tu::toy_corpus(6, 8);
  const auto schema = tu::toy_schema();
  auto cfg = fast_config();
  cfg.max_epochs = 3;
  auto vocab = ff::build_vocab(ff::document_pointers(docs), 50);
  auto a = ff::train({{&docs, &schema}}, vocab, schema.field_names(), cfg, {});
  auto b = ff::train({{&docs, &schema}}, vocab, schema.field_names(), cfg, {});
  EXPECT_TRUE(a.model.params == b.model.params);
  EXPECT_EQ(ff::serialize_model(a.model), ff::serialize_model(b.model));
  cfg.seed += 1;
  auto c = ff::train({{&docs, &schema}}, vocab, schema.field_names(), cfg, {});
  EXPECT_FALSE(a.model.params == c.model.params);
}

TEST(Train, RejectsMismatchedInitialModel) {
  auto docs = tu::toy_corpus(6, 4);
  const auto schema = tu::toy_schema();
  auto vocab = ff::build_vocab(ff::document_pointers(docs), 50);
  auto other = ff::fresh_model(vocab, {"x"}, 0, fast_config().dims);
  EXPECT_THROW(ff::train({{&docs, &schema}}, vocab, schema.field_names(), fast_config(), {}, other), ff::ShapeError);
  EXPECT_THROW(ff::train({}, vocab, schema.field_names(), fast_config(), {}), ff::DataError);
}
