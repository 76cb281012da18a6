#pragma once

// Document, schema and ground-truth data model plus the JSON file formats.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "formfactor/errors.hpp"

namespace formfactor {

using json = nlohmann::json;

enum class FieldType { kDate, kAmount, kInteger, kNumeric, kAlphanumeric };

inline constexpr FieldType kAllFieldTypes[] = {FieldType::kDate, FieldType::kAmount,
                                               FieldType::kInteger, FieldType::kNumeric,
                                               FieldType::kAlphanumeric};

inline std::string_view to_string(FieldType t) {
  switch (t) {
    case FieldType::kDate: return "date";
    case FieldType::kAmount: return "amount";
    case FieldType::kInteger: return "integer";
    case FieldType::kNumeric: return "numeric";
    case FieldType::kAlphanumeric: return "alphanumeric";
  }
  return "unknown";
}

inline std::optional<FieldType> field_type_from_string(std::string_view s) {
  for (FieldType t : kAllFieldTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

struct BBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool valid() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    return in01(x_min) && in01(y_min) && in01(x_max) && in01(y_max) && x_min <= x_max &&
           y_min <= y_max;
  }

  BBox united(const BBox& o) const {
    return {std::min(x_min, o.x_min), std::min(y_min, o.y_min), std::max(x_max, o.x_max),
            std::max(y_max, o.y_max)};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Token {
  std::string text;
  BBox bbox;
  std::size_t page_index = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

struct PageSize {
  double width = 1.0;
  double height = 1.0;

  friend bool operator==(const PageSize&, const PageSize&) = default;
};

struct GroundTruthValue {
  std::string canonical_value;
  std::optional<BBox> bbox;

  friend bool operator==(const GroundTruthValue&, const GroundTruthValue&) = default;
};

using GroundTruth = std::map<std::string, std::vector<GroundTruthValue>>;

struct Document {
  std::string doc_id;
  std::string language;
  std::string doc_type;
  std::string template_id;
  std::vector<PageSize> pages;
  std::vector<Token> tokens;  // reading order
  std::optional<GroundTruth> ground_truth;

  bool labeled() const { return ground_truth.has_value(); }

  // Ground-truth values of one field; empty when unlabeled or absent.
  const std::vector<GroundTruthValue>& values_of(const std::string& field) const {
    static const std::vector<GroundTruthValue> kNone;
    if (!ground_truth) return kNone;
    auto it = ground_truth->find(field);
    return it == ground_truth->end() ? kNone : it->second;
  }

  friend bool operator==(const Document&, const Document&) = default;
};

// A value is correct for a field when it equals any of the field's ground-truth values.
inline bool matches_ground_truth(const Document& doc, const std::string& field, const std::string& canonical) {
  for (const auto& gt : doc.values_of(field))
    if (gt.canonical_value == canonical) return true;
  return false;
}

// Assignment-stage business rule between two fields.
struct Constraint {
  enum class Kind { kDatePrecedes, kDistinctValues };
  Kind kind = Kind::kDatePrecedes;
  std::string field_a;
  std::string field_b;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

inline std::string_view to_string(Constraint::Kind k) {
  return k == Constraint::Kind::kDatePrecedes ? "date_precedes" : "distinct_values";
}

struct FieldSpec {
  std::string name;
  FieldType field_type = FieldType::kAlphanumeric;
  std::optional<double> threshold;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

struct TargetSchema {
  std::string doc_type;
  std::vector<FieldSpec> fields;
  std::vector<Constraint> constraints;

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i].name == name) return i;
    return std::nullopt;
  }

  std::vector<std::string> field_names() const {
    std::vector<std::string> out;
    out.reserve(fields.size());
    for (const auto& f : fields) out.push_back(f.name);
    return out;
  }

  std::set<FieldType> field_types() const {
    std::set<FieldType> out;
    for (const auto& f : fields) out.insert(f.field_type);
    return out;
  }

  friend bool operator==(const TargetSchema&, const TargetSchema&) = default;
};

// ---------------------------------------------------------------------------
// Reading order

// y_min is quantized to 1/100 of the page so tokens on one visual line sort
// left to right even when their top edges jitter.
inline long reading_row(const BBox& b) { return std::lround(std::floor(b.y_min * 100.0 + 1e-9)); }

inline bool reading_order_less(const Token& a, const Token& b) {
  if (a.page_index != b.page_index) return a.page_index < b.page_index;
  long ra = reading_row(a.bbox), rb = reading_row(b.bbox);
  if (ra != rb) return ra < rb;
  return a.bbox.x_min < b.bbox.x_min;
}

// Stable, so equal keys keep input order.
inline void sort_reading_order(std::vector<Token>& tokens) {
  std::stable_sort(tokens.begin(), tokens.end(), reading_order_less);
}

// ---------------------------------------------------------------------------
// Document JSON

namespace detail {

inline bool has_whitespace(std::string_view s) {
  for (unsigned char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return true;
  // U+00A0 and U+3000 are whitespace in OCR output as well.
  if (s.find("\xC2\xA0") != std::string_view::npos) return true;
  if (s.find("\xE3\x80\x80") != std::string_view::npos) return true;
  return false;
}

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path + ": expected object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "/" + key + ": missing");
  return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "/" + key + ": expected string");
  return v.get<std::string>();
}

inline double require_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ParseError(path + ": expected number");
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(path + ": expected finite number");
  return d;
}

inline BBox parse_bbox(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 4) throw ParseError(path + ": expected [x_min,y_min,x_max,y_max]");
  return {require_number(v[0], path + "/0"), require_number(v[1], path + "/1"),
          require_number(v[2], path + "/2"), require_number(v[3], path + "/3")};
}

inline json bbox_to_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

}  // namespace detail

inline Document document_from_json(const json& j) {
  using namespace detail;
  Document doc;
  const std::string root;
  doc.doc_id = require_string(j, "doc_id", root);
  doc.language = require_string(j, "language", root);
  doc.doc_type = require_string(j, "doc_type", root);
  doc.template_id = require_string(j, "template_id", root);
  if (doc.template_id.empty()) throw InvariantError("/template_id: must be non-empty");

  const json& pages = require(j, "pages", root);
  if (!pages.is_array()) throw ParseError("/pages: expected array");
  for (std::size_t i = 0; i < pages.size(); ++i) {
    const std::string p = "/pages/" + std::to_string(i);
    PageSize ps{require_number(require(pages[i], "width", p), p + "/width"),
                require_number(require(pages[i], "height", p), p + "/height")};
    if (ps.width <= 0 || ps.height <= 0) throw InvariantError(p + ": page size must be positive");
    doc.pages.push_back(ps);
  }

  const json& tokens = require(j, "tokens", root);
  if (!tokens.is_array()) throw ParseError("/tokens: expected array");
  doc.tokens.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string p = "/tokens/" + std::to_string(i);
    Token t;
    t.text = require_string(tokens[i], "text", p);
    const json& page = require(tokens[i], "page", p);
    if (!page.is_number_integer() || page.get<long long>() < 0)
      throw ParseError(p + "/page: expected non-negative integer");
    t.page_index = page.get<std::size_t>();
    t.bbox = parse_bbox(require(tokens[i], "bbox", p), p + "/bbox");
    if (t.text.empty()) throw InvariantError("token " + std::to_string(i) + ": empty text");
    if (has_whitespace(t.text)) throw InvariantError("token " + std::to_string(i) + ": text contains whitespace");
    if (!t.bbox.valid()) throw InvariantError("token " + std::to_string(i) + ": bbox out of range or inverted");
    if (t.page_index >= doc.pages.size())
      throw InvariantError("token " + std::to_string(i) + ": page index beyond page count");
    doc.tokens.push_back(std::move(t));
  }
  sort_reading_order(doc.tokens);

  if (auto it = j.find("ground_truth"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ParseError("/ground_truth: expected object");
    GroundTruth gt;
    for (auto f = it->begin(); f != it->end(); ++f) {
      const std::string p = "/ground_truth/" + f.key();
      if (!f->is_array()) throw ParseError(p + ": expected array");
      std::vector<GroundTruthValue> values;
      for (std::size_t k = 0; k < f->size(); ++k) {
        const std::string pk = p + "/" + std::to_string(k);
        GroundTruthValue v;
        v.canonical_value = require_string((*f)[k], "value", pk);
        if (v.canonical_value.empty()) throw InvariantError(pk + ": empty ground-truth value");
        if (auto b = (*f)[k].find("bbox"); b != (*f)[k].end() && !b->is_null()) {
          v.bbox = parse_bbox(*b, pk + "/bbox");
          if (!v.bbox->valid()) throw InvariantError(pk + "/bbox: out of range");
        }
        values.push_back(std::move(v));
      }
      gt.emplace(f.key(), std::move(values));
    }
    doc.ground_truth = std::move(gt);
  }
  return doc;
}

// Never throws anything but formfactor::Error, whatever the bytes are.
inline Document parse_document(std::string_view raw) {
  json j;
  try {
    j = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw ParseError(std::string("/: ") + e.what());
  }
  try {
    return document_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(std::string("/: ") + e.what());
  }
}

inline json document_to_json(const Document& doc) {
  json j;
  j["doc_id"] = doc.doc_id;
  j["language"] = doc.language;
  j["doc_type"] = doc.doc_type;
  j["template_id"] = doc.template_id;
  j["pages"] = json::array();
  for (const auto& p : doc.pages) j["pages"].push_back({{"width", p.width}, {"height", p.height}});
  j["tokens"] = json::array();
  for (const auto& t : doc.tokens)
    j["tokens"].push_back({{"text", t.text}, {"page", t.page_index}, {"bbox", detail::bbox_to_json(t.bbox)}});
  if (doc.ground_truth) {
    json gt = json::object();
    for (const auto& [field, values] : *doc.ground_truth) {
      json arr = json::array();
      for (const auto& v : values) {
        json e{{"value", v.canonical_value}};
        if (v.bbox) e["bbox"] = detail::bbox_to_json(*v.bbox);
        arr.push_back(std::move(e));
      }
      gt[field] = std::move(arr);
    }
    j["ground_truth"] = std::move(gt);
  }
  return j;
}

inline std::string serialize_document(const Document& doc) { return document_to_json(doc).dump(); }

inline Document strip_ground_truth(Document doc) {
  doc.ground_truth.reset();
  return doc;
}

// ---------------------------------------------------------------------------
// Schema

struct ValidationResult {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

inline ValidationResult validate_schema(const TargetSchema& schema) {
  ValidationResult r;
  if (schema.fields.empty()) r.errors.push_back("schema has no fields");
  std::set<std::string> seen;
  for (const auto& f : schema.fields) {
    if (f.name.empty()) r.errors.push_back("empty field name");
    if (!seen.insert(f.name).second) r.errors.push_back("duplicate-field-name: " + f.name);
    if (f.threshold && !(*f.threshold >= 0.0 && *f.threshold <= 1.0))
      r.errors.push_back("threshold out of [0,1] for field " + f.name);
  }
  for (const auto& c : schema.constraints) {
    for (const std::string* name : {&c.field_a, &c.field_b}) {
      auto idx = schema.index_of(*name);
      if (!idx) {
        r.errors.push_back("dangling-reference: " + std::string(to_string(c.kind)) + " references unknown field " + *name);
      } else if (c.kind == Constraint::Kind::kDatePrecedes &&
                 schema.fields[*idx].field_type != FieldType::kDate) {
        r.errors.push_back("date_precedes over non-date field " + *name);
      }
    }
  }
  return r;
}

inline json schema_to_json(const TargetSchema& s) {
  json j;
  j["doc_type"] = s.doc_type;
  j["fields"] = json::array();
  for (const auto& f : s.fields) {
    json e{{"name", f.name}, {"type", to_string(f.field_type)}};
    if (f.threshold) e["threshold"] = *f.threshold;
    j["fields"].push_back(std::move(e));
  }
  j["constraints"] = json::array();
  for (const auto& c : s.constraints)
    j["constraints"].push_back({{"kind", to_string(c.kind)}, {"field_a", c.field_a}, {"field_b", c.field_b}});
  return j;
}

// Collects every violation (unknown types included) before throwing.
inline TargetSchema schema_from_json(const json& j) {
  using namespace detail;
  TargetSchema s;
  std::vector<std::string> errors;
  try {
    s.doc_type = require_string(j, "doc_type", "");
    const json& fields = require(j, "fields", "");
    if (!fields.is_array()) throw ParseError("/fields: expected array");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string p = "/fields/" + std::to_string(i);
      FieldSpec f;
      f.name = require_string(fields[i], "name", p);
      std::string type = require_string(fields[i], "type", p);
      if (auto t = field_type_from_string(type)) {
        f.field_type = *t;
      } else {
        errors.push_back("unknown-field-type: " + type + " for field " + f.name);
      }
      if (auto th = fields[i].find("threshold"); th != fields[i].end() && !th->is_null())
        f.threshold = require_number(*th, p + "/threshold");
      s.fields.push_back(std::move(f));
    }
    if (auto cs = j.find("constraints"); cs != j.end()) {
      if (!cs->is_array()) throw ParseError("/constraints: expected array");
      for (std::size_t i = 0; i < cs->size(); ++i) {
        const std::string p = "/constraints/" + std::to_string(i);
        Constraint c;
        std::string kind = require_string((*cs)[i], "kind", p);
        if (kind == "date_precedes") {
          c.kind = Constraint::Kind::kDatePrecedes;
        } else if (kind == "distinct_values") {
          c.kind = Constraint::Kind::kDistinctValues;
        } else {
          errors.push_back("unknown constraint kind: " + kind);
          continue;
        }
        c.field_a = require_string((*cs)[i], "field_a", p);
        c.field_b = require_string((*cs)[i], "field_b", p);
        s.constraints.push_back(std::move(c));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  auto v = validate_schema(s);
  errors.insert(errors.end(), v.errors.begin(), v.errors.end());
  if (!errors.empty()) throw SchemaError(std::move(errors));
  return s;
}

inline TargetSchema parse_schema(std::string_view raw) {
  json j;
  try {
    j = json::parse(raw.begin(), raw.end());
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("io", "cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw DataError("io", "short write to " + path);
}

inline Document load_document(const std::string& path) { return parse_document(read_file(path)); }
inline TargetSchema load_schema(const std::string& path) { return parse_schema(read_file(path)); }

}  // namespace formfactor
