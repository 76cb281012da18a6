#pragma once

// A trained scorer together with the vocabulary and field names it was
// trained against, and its checkpoint file format.
//
// Checkpoint layout (all integers little-endian):
//   bytes 0..7    magic "FFCKPT\0\0"
//   u32           format version (currently 1)
//   u64           metadata length L
//   L bytes       UTF-8 JSON: dims, vocab tokens, field names, tensor shapes,
//                 free-form "training" metadata
//   tensors       float32 row-major, in the order token_embeddings,
//                 pos_projection, query, key, value, output_projection,
//                 field_embeddings, field_bias
//   u64           FNV-1a 64 of every preceding byte

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "formfactor/docmodel.hpp"
#include "formfactor/scorer.hpp"

namespace formfactor {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'F', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

struct ScorerModel {
  Vocab vocab;
  std::vector<std::string> field_names;
  ScorerParams<float> params;
  json training = json::object();

  std::optional<std::size_t> field_index(std::string_view name) const {
    for (std::size_t i = 0; i < field_names.size(); ++i)
      if (field_names[i] == name) return i;
    return std::nullopt;
  }

  // Field rows for every schema field, in schema order; throws when any is missing.
  std::vector<std::size_t> field_indices_for(const TargetSchema& schema) const {
    std::vector<std::size_t> out;
    for (const auto& f : schema.fields) {
      auto i = field_index(f.name);
      if (!i) throw ShapeError("checkpoint has no embedding for field " + f.name);
      out.push_back(*i);
    }
    return out;
  }

  void check_consistent() const {
    if (params.vocab_size() != vocab.size()) throw ShapeError("embedding rows do not match vocabulary size");
    if (params.num_fields() != field_names.size()) throw ShapeError("field rows do not match field names");
  }
};

// Strict: the checkpoint's fields must be exactly the schema's (same set).
inline void require_same_fields(const ScorerModel& m, const TargetSchema& schema) {
  if (m.field_names.size() != schema.fields.size())
    throw ShapeError("checkpoint has " + std::to_string(m.field_names.size()) + " fields, schema has " +
                     std::to_string(schema.fields.size()));
  (void)m.field_indices_for(schema);
}

namespace ckpt_detail {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw CheckpointError("corrupt-file", "checkpoint truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace ckpt_detail

inline std::string serialize_model(const ScorerModel& m) {
  m.check_consistent();
  json meta;
  meta["dims"] = {{"token_dim", m.params.dims.token_dim},
                  {"position_dim", m.params.dims.position_dim},
                  {"output_dim", m.params.dims.output_dim}};
  meta["vocab"] = m.vocab.tokens();
  meta["fields"] = m.field_names;
  json shapes = json::array();
  ScorerParams<float>::visit(m.params, [&](std::string_view name, const Matrix<float>& t) {
    shapes.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  });
  meta["tensors"] = shapes;
  meta["training"] = m.training;
  const std::string meta_str = meta.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  ckpt_detail::put<std::uint32_t>(out, kCheckpointVersion);
  ckpt_detail::put<std::uint64_t>(out, meta_str.size());
  out += meta_str;
  ScorerParams<float>::visit(m.params, [&](std::string_view, const Matrix<float>& t) {
    out.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(float));
  });
  ckpt_detail::put<std::uint64_t>(out, fnv1a(out));
  return out;
}

inline ScorerModel deserialize_model(std::string_view data) {
  ckpt_detail::Reader r(data);
  if (r.bytes(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
    throw CheckpointError("corrupt-file", "not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("version-mismatch", "checkpoint version " + std::to_string(version) + ", expected " +
                                                  std::to_string(kCheckpointVersion));
  const auto meta_len = r.get<std::uint64_t>();
  if (meta_len > data.size()) throw CheckpointError("corrupt-file", "checkpoint truncated");
  const std::string_view meta_str = r.bytes(static_cast<std::size_t>(meta_len));

  if (data.size() < sizeof(std::uint64_t)) throw CheckpointError("corrupt-file", "checkpoint truncated");
  const std::size_t body = data.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, data.data() + body, sizeof stored);
  if (fnv1a(data.substr(0, body)) != stored) throw CheckpointError("corrupt-file", "checkpoint checksum mismatch");

  ScorerModel m;
  try {
    const json meta = json::parse(meta_str);
    ScorerDims dims{meta.at("dims").at("token_dim").get<std::size_t>(),
                    meta.at("dims").at("position_dim").get<std::size_t>(),
                    meta.at("dims").at("output_dim").get<std::size_t>()};
    m.vocab = Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
    m.field_names = meta.at("fields").get<std::vector<std::string>>();
    m.training = meta.value("training", json::object());
    m.params = ScorerParams<float>::zeros(dims, m.vocab.size(), m.field_names.size());
    const json& shapes = meta.at("tensors");
    std::size_t k = 0;
    ScorerParams<float>::visit(m.params, [&](std::string_view name, Matrix<float>& t) {
      const json& s = shapes.at(k++);
      if (s.at("name").get<std::string>() != name || s.at("rows").get<Eigen::Index>() != t.rows() ||
          s.at("cols").get<Eigen::Index>() != t.cols())
        throw ShapeError("checkpoint tensor " + std::string(name) + " has unexpected shape");
      const auto raw = r.bytes(static_cast<std::size_t>(t.size()) * sizeof(float));
      std::memcpy(t.data(), raw.data(), raw.size());
    });
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt-file", std::string("checkpoint metadata: ") + e.what());
  }
  if (r.position() != body) throw CheckpointError("corrupt-file", "checkpoint has trailing bytes");
  return m;
}

inline void save_model(const ScorerModel& m, const std::string& path) { write_file(path, serialize_model(m)); }

inline ScorerModel load_model(const std::string& path) {
  std::string data;
  try {
    data = read_file(path);
  } catch (const DataError&) {
    throw CheckpointError("missing-checkpoint", "cannot read checkpoint " + path);
  }
  return deserialize_model(data);
}

// ---------------------------------------------------------------------------
// Inference over whole documents

struct DocumentScores {
  std::string doc_id;
  std::map<std::string, std::vector<ScoredCandidate>> by_field;  // schema field -> scored candidates
  std::map<std::string, Candidate> candidates;                    // candidate_id -> candidate
};

// Generates candidates, embeds each once and scores it against every schema
// field of its type. Ground truth is never read.
inline DocumentScores score_document(const Document& doc, const TargetSchema& schema, const ScorerModel& model,
                                     const FeatureConfig& features) {
  const auto field_rows = model.field_indices_for(schema);
  DocumentScores out;
  out.doc_id = doc.doc_id;
  for (const auto& f : schema.fields) out.by_field[f.name];
  for (const auto& [type, cands] : generate_all_candidates(doc, schema)) {
    if (cands.empty()) continue;
    std::vector<EncodedNeighbors> encoded;
    encoded.reserve(cands.size());
    for (const auto& c : cands) encoded.push_back(encode_neighbors(extract_neighbors(doc, c, features), model.vocab));
    std::vector<const EncodedNeighbors*> ptrs;
    for (const auto& e : encoded) ptrs.push_back(&e);
    const Matrix<float> emb = embed_candidates(ptrs, model.params);
    for (std::size_t fi = 0; fi < schema.fields.size(); ++fi) {
      if (schema.fields[fi].field_type != type) continue;
      auto& scored = out.by_field[schema.fields[fi].name];
      for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        const RowVector<float> row = emb.row(static_cast<Eigen::Index>(ci));
        ScoredCandidate s = score_pair(row, field_rows[fi], model.params);
        s.candidate_id = cands[ci].candidate_id;
        s.field_name = schema.fields[fi].name;
        scored.push_back(std::move(s));
      }
    }
    for (const auto& c : cands) out.candidates.emplace(c.candidate_id, c);
  }
  return out;
}

}  // namespace formfactor
