#pragma once

// A labeled corpus: documents of one schema and language, split into train
// and test, plus its on-disk layout:
//   <dir>/schema.json
//   <dir>/manifest.jsonl      {"path": "docs/<doc_id>.json", "split": "train"|"test"} per line
//   <dir>/docs/<doc_id>.json

#include <filesystem>
#include <string>
#include <vector>

#include "formfactor/docmodel.hpp"

namespace formfactor {

struct Corpus {
  std::string name;
  std::string language;
  TargetSchema schema;
  std::vector<Document> train;
  std::vector<Document> test;

  std::size_t size() const { return train.size() + test.size(); }
};

struct ManifestEntry {
  std::string path;
  std::string split;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline std::string manifest_to_string(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += json{{"path", e.path}, {"split", e.split}}.dump() + "\n";
  return out;
}

inline std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      ManifestEntry e{j.at("path").get<std::string>(), j.at("split").get<std::string>()};
      if (e.split != "train" && e.split != "test")
        throw ParseError("manifest line " + std::to_string(line_no) + ": split must be train or test");
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "docs", ec);
  if (ec) throw DataError("io", "cannot create " + (dir / "docs").string() + ": " + ec.message());
  write_file((dir / "schema.json").string(), schema_to_json(corpus.schema).dump(2) + "\n");
  std::vector<ManifestEntry> manifest;
  auto emit = [&](const std::vector<Document>& docs, const char* split) {
    for (const auto& d : docs) {
      const std::string rel = "docs/" + d.doc_id + ".json";
      write_file((dir / rel).string(), serialize_document(d) + "\n");
      manifest.push_back({rel, split});
    }
  };
  emit(corpus.train, "train");
  emit(corpus.test, "test");
  write_file((dir / "manifest.jsonl").string(), manifest_to_string(manifest));
}

inline Corpus read_corpus(const std::filesystem::path& dir) {
  Corpus c;
  c.name = dir.filename().string();
  c.schema = load_schema((dir / "schema.json").string());
  for (const auto& e : parse_manifest(read_file((dir / "manifest.jsonl").string()))) {
    Document d;
    try {
      d = load_document((dir / e.path).string());
    } catch (const Error& err) {
      throw DataError(err.kind(), e.path + ": " + err.what());
    }
    if (c.language.empty()) c.language = d.language;
    (e.split == "train" ? c.train : c.test).push_back(std::move(d));
  }
  return c;
}

}  // namespace formfactor
