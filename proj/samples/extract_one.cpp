// Generates a small synthetic invoice corpus, trains a scorer from scratch and
// prints the extraction for the first test document next to its ground truth.

#include <iostream>

#include "formfactor/evaluation.hpp"
#include "formfactor/synthcorpus.hpp"
#include "formfactor/training.hpp"

namespace ff = formfactor;

int main() {
  ff::CorpusSpec spec;
  spec.doc_type = "invoice";
  spec.language = "en";
  spec.n_docs = 60;
  spec.n_test = 10;
  spec.seed = 7;
  const ff::Corpus corpus = ff::generate_corpus(spec);

  ff::TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.seed = 1;
  const ff::FeatureConfig features;
  const ff::Vocab vocab = ff::build_vocab(ff::document_pointers(corpus.train), 2000);
  const auto ck = ff::train({{&corpus.train, &corpus.schema}}, vocab, corpus.schema.field_names(), cfg, features);
  std::cerr << "best epoch " << ck.epoch << ", validation AUC " << ck.val_auc.value_or(0) << "\n";

  const ff::Document& doc = corpus.test.front();
  const auto scores = ff::score_document(ff::strip_ground_truth(doc), corpus.schema, ck.model, features);
  const ff::Extraction extraction = ff::assign(scores, corpus.schema);
  for (const auto& f : corpus.schema.fields) {
    const auto& got = extraction.at(f.name);
    std::cout << f.name << ": " << (got ? got->canonical_value : "-") << "  (truth "
              << doc.values_of(f.name).front().canonical_value << ")\n";
  }
  const auto report = ff::evaluate(ck.model, corpus.test, corpus.schema, features, {0.8, 1});
  std::cout << "macro Max F1 on " << corpus.test.size() << " test documents: " << report.macro_f1.value_or(0) << "\n";
}
