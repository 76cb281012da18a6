#pragma once

// High-recall typed candidate generators: hand-written parsers for dates,
// amounts, integers, numerics and alphanumeric identifiers, and the span
// scanner that proposes every parseable token span of a document.

#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formfactor/docmodel.hpp"

namespace formfactor {

struct Candidate {
  std::string candidate_id;
  std::string doc_id;
  FieldType field_type = FieldType::kAlphanumeric;
  std::size_t span_begin = 0;  // token indices, [begin, end)
  std::size_t span_end = 0;
  std::string raw_text;
  std::string canonical_value;
  BBox bbox;
  std::size_t page_index = 0;

  std::size_t span_length() const { return span_end - span_begin; }
  bool covers(std::size_t token) const { return token >= span_begin && token < span_end; }

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

inline constexpr std::size_t kMaxSpanTokens = 4;

namespace text {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!is_digit(c)) return false;
  return true;
}

// ASCII lowercase plus the Latin-1 supplement uppercase block (À..Þ) in UTF-8.
inline std::string lower(std::string_view s) {
  std::string out(s);
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(out[i]);
    if (c >= 'A' && c <= 'Z') {
      out[i] = static_cast<char>(c + 32);
    } else if (c == 0xC3 && i + 1 < out.size()) {
      unsigned char d = static_cast<unsigned char>(out[i + 1]);
      if (d >= 0x80 && d <= 0x9E && d != 0x97) out[i + 1] = static_cast<char>(d + 0x20);
      ++i;
    }
  }
  return out;
}

inline std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string strip_leading_zeros(std::string_view digits) {
  std::size_t i = 0;
  while (i + 1 < digits.size() && digits[i] == '0') ++i;
  return std::string(digits.substr(i));
}

// Digit string with optional grouping: first group 1-3 digits, then groups of
// exactly 3 separated by one consistent separator from `seps`.
inline std::optional<std::string> ungroup(std::string_view s, std::string_view seps) {
  if (s.empty()) return std::nullopt;
  char sep = 0;
  std::string digits;
  std::size_t group = 0;
  bool first_group = true;
  for (char c : s) {
    if (is_digit(c)) {
      digits.push_back(c);
      ++group;
      continue;
    }
    if (seps.find(c) == std::string_view::npos) return std::nullopt;
    if (sep != 0 && c != sep) return std::nullopt;
    sep = c;
    if (group == 0 || (first_group ? group > 3 : group != 3)) return std::nullopt;
    first_group = false;
    group = 0;
  }
  if (group == 0) return std::nullopt;
  if (!first_group && group != 3) return std::nullopt;
  return digits;
}

}  // namespace text

// ---------------------------------------------------------------------------
// Dates

namespace date_detail {

inline bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kDays[static_cast<std::size_t>(m - 1)];
}

inline bool valid(int y, int m, int d) {
  return y >= 1000 && y <= 9999 && m >= 1 && m <= 12 && d >= 1 && d <= days_in_month(y, m);
}

inline std::string iso(int y, int m, int d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  return buf;
}

// Two-digit years: 00-68 -> 2000-2068, 69-99 -> 1969-1999.
inline int expand_year(std::string_view digits) {
  int y = std::stoi(std::string(digits));
  if (digits.size() == 2) return y <= 68 ? 2000 + y : 1900 + y;
  return y;
}

inline std::optional<int> month_from_name(std::string_view word) {
  static const std::map<std::string, int, std::less<>> kMonths = {
      {"january", 1},   {"jan", 1},     {"february", 2}, {"feb", 2},      {"march", 3},
      {"mar", 3},       {"april", 4},   {"apr", 4},      {"may", 5},      {"june", 6},
      {"jun", 6},       {"july", 7},    {"jul", 7},      {"august", 8},   {"aug", 8},
      {"september", 9}, {"sep", 9},     {"sept", 9},     {"october", 10}, {"oct", 10},
      {"november", 11}, {"nov", 11},    {"december", 12}, {"dec", 12},
      {"janvier", 1},   {"janv", 1},    {"février", 2},  {"fevrier", 2},  {"févr", 2},
      {"fevr", 2},      {"fév", 2},     {"mars", 3},     {"avril", 4},    {"avr", 4},
      {"mai", 5},       {"juin", 6},    {"juillet", 7},  {"juil", 7},     {"août", 8},
      {"aout", 8},      {"septembre", 9}, {"octobre", 10}, {"novembre", 11}, {"décembre", 12},
      {"decembre", 12}, {"déc", 12}};
  while (!word.empty() && word.back() == '.') word.remove_suffix(1);
  auto it = kMonths.find(word);
  if (it == kMonths.end()) return std::nullopt;
  return it->second;
}

// "22", "1er", "22nd", "3rd", "1st", "4th"
inline std::optional<int> day_from_word(std::string_view w) {
  std::size_t n = 0;
  while (n < w.size() && text::is_digit(w[n])) ++n;
  if (n == 0 || n > 2) return std::nullopt;
  std::string_view suffix = w.substr(n);
  if (!(suffix.empty() || suffix == "er" || suffix == "st" || suffix == "nd" || suffix == "rd" ||
        suffix == "th"))
    return std::nullopt;
  return std::stoi(std::string(w.substr(0, n)));
}

inline std::optional<int> year_from_word(std::string_view w) {
  if (!text::all_digits(w) || (w.size() != 4 && w.size() != 2)) return std::nullopt;
  return expand_year(w);
}

inline std::optional<std::string> numeric_date(std::string_view s, std::string_view language) {
  std::array<std::string, 3> parts;
  std::size_t k = 0;
  char sep = 0;
  for (char c : s) {
    if (text::is_digit(c)) {
      parts[k].push_back(c);
    } else if (c == '/' || c == '-' || c == '.') {
      if (sep != 0 && c != sep) return std::nullopt;
      sep = c;
      if (++k >= 3) return std::nullopt;
    } else {
      return std::nullopt;
    }
  }
  if (k != 2) return std::nullopt;
  for (const auto& p : parts)
    if (p.empty()) return std::nullopt;

  if (parts[0].size() == 4) {  // YYYY-MM-DD
    if (parts[1].size() > 2 || parts[2].size() > 2) return std::nullopt;
    int y = std::stoi(parts[0]), m = std::stoi(parts[1]), d = std::stoi(parts[2]);
    if (!valid(y, m, d)) return std::nullopt;
    return iso(y, m, d);
  }
  if (parts[0].size() > 2 || parts[1].size() > 2) return std::nullopt;
  if (parts[2].size() != 2 && parts[2].size() != 4) return std::nullopt;
  int a = std::stoi(parts[0]), b = std::stoi(parts[1]);
  int y = expand_year(parts[2]);
  const bool month_first = language != "fr";
  // Language convention first; the other order only when the first is impossible.
  if (month_first) {
    if (valid(y, a, b)) return iso(y, a, b);
    if (valid(y, b, a)) return iso(y, b, a);
  } else {
    if (valid(y, b, a)) return iso(y, b, a);
    if (valid(y, a, b)) return iso(y, a, b);
  }
  return std::nullopt;
}

inline std::optional<std::string> worded_date(const std::vector<std::string>& w) {
  if (w.size() != 3) return std::nullopt;
  // D Month Y
  if (auto d = day_from_word(w[0])) {
    if (auto m = month_from_name(w[1])) {
      if (auto y = year_from_word(w[2]); y && valid(*y, *m, *d)) return iso(*y, *m, *d);
    }
  }
  // Month D Y
  if (auto m = month_from_name(w[0])) {
    if (auto d = day_from_word(w[1])) {
      if (auto y = year_from_word(w[2]); y && valid(*y, *m, *d)) return iso(*y, *m, *d);
    }
  }
  return std::nullopt;
}

}  // namespace date_detail

// Canonical form YYYY-MM-DD. Numeric dates are month-first for English and
// day-first otherwise; the other order is used only when the preferred one is
// not a calendar date.
inline std::optional<std::string> parse_date(std::string_view input, std::string_view language) {
  std::string s = text::lower(text::trim(input));
  if (s.empty()) return std::nullopt;
  if (auto r = date_detail::numeric_date(s, language)) return r;

  bool has_alpha = false;
  for (char c : s) has_alpha |= text::is_alpha(c) || static_cast<unsigned char>(c) >= 0x80;
  if (!has_alpha) return std::nullopt;
  for (char& c : s)
    if (c == ',' || c == '/' || c == '-') c = ' ';
  return date_detail::worded_date(text::split_words(s));
}

// ---------------------------------------------------------------------------
// Amounts

namespace amount_detail {

inline bool is_currency_word(std::string_view w) {
  static constexpr std::string_view kWords[] = {"$",   "€",   "£",   "usd", "eur", "gbp",
                                                "cad", "chf", "us$", "ca$", "eur.", "euros"};
  for (auto k : kWords)
    if (w == k) return true;
  return false;
}

// Removes currency markers at either end, including glued ones ("$12", "12€").
inline std::string strip_currency(std::string s) {
  static constexpr std::string_view kGlued[] = {"us$", "ca$", "$", "€", "£"};
  bool changed = true;
  while (changed) {
    changed = false;
    s = std::string(text::trim(s));
    auto words = text::split_words(s);
    if (words.size() > 1 && is_currency_word(text::lower(words.front()))) {
      s = s.substr(s.find(words.front()) + words.front().size());
      changed = true;
      continue;
    }
    if (words.size() > 1 && is_currency_word(text::lower(words.back()))) {
      s = s.substr(0, s.rfind(words.back()));
      changed = true;
      continue;
    }
    for (auto g : kGlued) {
      if (s.size() > g.size() && s.compare(0, g.size(), g) == 0) {
        s = s.substr(g.size());
        changed = true;
        break;
      }
      if (s.size() > g.size() && s.compare(s.size() - g.size(), g.size(), g) == 0) {
        s = s.substr(0, s.size() - g.size());
        changed = true;
        break;
      }
    }
  }
  return s;
}

inline std::string canonical_decimal(bool negative, std::string_view int_digits, std::string frac) {
  std::string ip = text::strip_leading_zeros(int_digits.empty() ? "0" : int_digits);
  while (frac.size() > 2 && frac.back() == '0') frac.pop_back();
  while (frac.size() < 2) frac.push_back('0');
  bool zero = ip == "0" && frac.find_first_not_of('0') == std::string::npos;
  return (negative && !zero ? "-" : "") + ip + "." + frac;
}

}  // namespace amount_detail

// Canonical form: optional '-', no grouping, '.' decimal point, at least two
// fraction digits and no trailing zeros beyond two ("1234.50", "12.345").
inline std::optional<std::string> parse_amount(std::string_view input, std::string_view language) {
  std::string s(text::trim(input));
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.size() > 2 && s.front() == '(' && s.back() == ')') {
    negative = true;
    s = s.substr(1, s.size() - 2);
  }
  s = amount_detail::strip_currency(std::move(s));
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = negative || s.front() == '-';
    s = amount_detail::strip_currency(s.substr(1));
  }
  if (s.empty() || !text::is_digit(s.front()) || !text::is_digit(s.back())) return std::nullopt;

  // Decimal separator: the last '.' or ',' followed by 1-2 digits, or by 3 digits
  // when the language uses that mark as its decimal point.
  const char decimal_mark = language == "fr" ? ',' : '.';
  std::size_t dec = std::string::npos;
  std::size_t last = s.find_last_of(".,");
  if (last != std::string::npos) {
    std::string_view tail(s.data() + last + 1, s.size() - last - 1);
    if (text::all_digits(tail) &&
        (tail.size() <= 2 || (tail.size() >= 3 && s[last] == decimal_mark) ||
         (tail.size() > 3))) {
      dec = last;
    }
  }
  std::string int_part = dec == std::string::npos ? s : s.substr(0, dec);
  std::string frac = dec == std::string::npos ? std::string() : s.substr(dec + 1);
  if (!frac.empty() && !text::all_digits(frac)) return std::nullopt;

  std::string seps = " '";
  seps.push_back(decimal_mark == '.' ? ',' : '.');
  if (dec == std::string::npos) seps.push_back(decimal_mark == '.' ? '.' : ',');
  auto digits = text::ungroup(int_part, seps);
  if (!digits) return std::nullopt;
  return amount_detail::canonical_decimal(negative, *digits, frac);
}

// ---------------------------------------------------------------------------
// Integers, numerics, identifiers

inline std::optional<std::string> parse_integer(std::string_view input) {
  std::string_view s = text::trim(input);
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto digits = text::ungroup(s, ", ");
  if (!digits) return std::nullopt;
  std::string v = text::strip_leading_zeros(*digits);
  return (negative && v != "0" ? "-" : "") + v;
}

inline std::optional<std::string> parse_numeric(std::string_view input) {
  std::string_view s = text::trim(input);
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return parse_integer(s);
  if (s.find('.', dot + 1) != std::string_view::npos) return std::nullopt;
  std::string_view frac = s.substr(dot + 1);
  if (!text::all_digits(frac)) return std::nullopt;
  std::string_view head = s.substr(0, dot);
  bool negative = false;
  if (!head.empty() && (head.front() == '-' || head.front() == '+')) {
    negative = head.front() == '-';
    head.remove_prefix(1);
  }
  std::string ip = "0";
  if (!head.empty()) {
    auto digits = text::ungroup(head, ",");
    if (!digits) return std::nullopt;
    ip = text::strip_leading_zeros(*digits);
  }
  std::string f(frac);
  while (!f.empty() && f.back() == '0') f.pop_back();
  std::string out = ip + (f.empty() ? "" : "." + f);
  return (negative && out != "0" ? "-" : "") + out;
}

// Identifier-like token: ASCII letters and digits with internal '-', '/', '_',
// '.' separators, at least one digit, length >= 3. Canonical form is uppercase.
inline std::optional<std::string> parse_alphanumeric(std::string_view input) {
  std::string_view s = text::trim(input);
  if (s.size() < 3) return std::nullopt;
  if (!(text::is_alpha(s.front()) || text::is_digit(s.front()))) return std::nullopt;
  if (!(text::is_alpha(s.back()) || text::is_digit(s.back()))) return std::nullopt;
  bool digit = false;
  for (char c : s) {
    if (text::is_digit(c)) {
      digit = true;
    } else if (!text::is_alpha(c) && c != '-' && c != '/' && c != '_' && c != '.') {
      return std::nullopt;
    }
  }
  if (!digit) return std::nullopt;
  return text::upper_ascii(s);
}

inline std::optional<std::string> canonicalize(FieldType type, std::string_view raw,
                                               std::string_view language) {
  switch (type) {
    case FieldType::kDate: return parse_date(raw, language);
    case FieldType::kAmount: return parse_amount(raw, language);
    case FieldType::kInteger: return parse_integer(raw);
    case FieldType::kNumeric: return parse_numeric(raw);
    case FieldType::kAlphanumeric: return parse_alphanumeric(raw);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Span scanning

namespace candgen_detail {

// Standalone currency markers and punctuation never start or end a span; the
// same value is proposed by the span without them.
inline bool is_affix_token(std::string_view t) {
  if (amount_detail::is_currency_word(text::lower(t))) return true;
  for (char c : t)
    if (text::is_digit(c) || text::is_alpha(c) || static_cast<unsigned char>(c) >= 0x80) return false;
  return true;
}

// Consecutive span tokens share the page, overlap vertically and advance rightwards.
inline bool continues_line(const Token& prev, const Token& next) {
  return prev.page_index == next.page_index && next.bbox.y_min < prev.bbox.y_max &&
         prev.bbox.y_min < next.bbox.y_max && next.bbox.x_min >= prev.bbox.x_min;
}

inline std::string make_candidate_id(FieldType type, std::size_t begin, std::size_t end) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s:%05zu:%05zu", std::string(to_string(type)).c_str(), begin, end);
  return buf;
}

}  // namespace candgen_detail

inline std::vector<Candidate> generate_candidates(const Document& doc, FieldType type,
                                                  std::size_t max_span = kMaxSpanTokens) {
  std::vector<Candidate> out;
  const auto& toks = doc.tokens;
  for (std::size_t begin = 0; begin < toks.size(); ++begin) {
    std::string raw;
    BBox box = toks[begin].bbox;
    for (std::size_t end = begin + 1; end <= toks.size() && end - begin <= max_span; ++end) {
      const Token& last = toks[end - 1];
      if (end - begin > 1 && !candgen_detail::continues_line(toks[end - 2], last)) break;
      if (!raw.empty()) raw.push_back(' ');
      raw += last.text;
      box = box.united(last.bbox);
      if (end - begin > 1 && (candgen_detail::is_affix_token(toks[begin].text) ||
                              candgen_detail::is_affix_token(last.text)))
        continue;
      auto canonical = canonicalize(type, raw, doc.language);
      if (!canonical) continue;
      Candidate c;
      c.candidate_id = candgen_detail::make_candidate_id(type, begin, end);
      c.doc_id = doc.doc_id;
      c.field_type = type;
      c.span_begin = begin;
      c.span_end = end;
      c.raw_text = raw;
      c.canonical_value = std::move(*canonical);
      c.bbox = box;
      c.page_index = toks[begin].page_index;
      out.push_back(std::move(c));
    }
  }
  return out;
}

// Candidates for every type the schema uses, keyed by type.
inline std::map<FieldType, std::vector<Candidate>> generate_all_candidates(const Document& doc,
                                                                          const TargetSchema& schema) {
  std::map<FieldType, std::vector<Candidate>> out;
  for (FieldType t : schema.field_types()) out.emplace(t, generate_candidates(doc, t));
  return out;
}

inline json candidate_to_json(const Candidate& c) {
  return {{"candidate_id", c.candidate_id},
          {"doc_id", c.doc_id},
          {"field_type", to_string(c.field_type)},
          {"token_span", {c.span_begin, c.span_end}},
          {"raw_text", c.raw_text},
          {"canonical_value", c.canonical_value},
          {"bbox", detail::bbox_to_json(c.bbox)},
          {"page", c.page_index}};
}

// One JSON object per line.
inline std::string dump_candidates(const std::vector<Candidate>& cands) {
  std::string out;
  for (const auto& c : cands) out += candidate_to_json(c).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Coverage

struct CoverageCount {
  std::size_t matched = 0;
  std::size_t total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total); }
};

inline std::map<std::string, CoverageCount> candidate_coverage_counts(const std::vector<Document>& corpus,
                                                                      const TargetSchema& schema) {
  std::map<std::string, CoverageCount> counts;
  for (const auto& f : schema.fields) counts[f.name];
  for (const auto& doc : corpus) {
    if (!doc.labeled()) throw DataError("unlabeled", "document " + doc.doc_id + " lacks ground truth");
    auto cands = generate_all_candidates(doc, schema);
    for (const auto& f : schema.fields) {
      const auto& pool = cands[f.field_type];
      for (const auto& gt : doc.values_of(f.name)) {
        auto& c = counts[f.name];
        ++c.total;
        for (const auto& cand : pool) {
          if (cand.canonical_value == gt.canonical_value) {
            ++c.matched;
            break;
          }
        }
      }
    }
  }
  return counts;
}

inline std::map<std::string, double> candidate_coverage(const std::vector<Document>& corpus,
                                                        const TargetSchema& schema) {
  std::map<std::string, double> out;
  for (const auto& [name, c] : candidate_coverage_counts(corpus, schema)) out[name] = c.fraction();
  return out;
}

}  // namespace formfactor
