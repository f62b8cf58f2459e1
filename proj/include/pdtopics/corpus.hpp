#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdtopics/common.hpp"
#include "pdtopics/text.hpp"

namespace pdtopics {

// One ingested social-media record: text plus the engagement metadata the
// influence weighting consumes.
struct Post {
  std::string post_id;
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  std::string text;
  long long likes = 0;
  long long comments = 0;
  long long reposts = 0;
  long long followers = 0;
  std::optional<std::vector<std::int64_t>> comment_times;  // nondecreasing
  std::string platform;
  std::optional<std::vector<std::string>> pre_tokens;  // pre-segmented input, used verbatim
};

struct TokenizedPost {
  std::string post_id;
  std::vector<std::string> tokens;
  int length() const { return static_cast<int>(tokens.size()); }
  bool has_bigrams() const { return tokens.size() >= 2; }
};

struct Vocabulary {
  std::vector<std::string> entries;                 // index -> word, first-occurrence order
  std::unordered_map<std::string, int> index_of;    // word -> index

  int size() const { return static_cast<int>(entries.size()); }
  int add(const std::string& word) {
    auto it = index_of.find(word);
    if (it != index_of.end()) return it->second;
    const int id = size();
    entries.push_back(word);
    index_of.emplace(word, id);
    return id;
  }
  int lookup(const std::string& word) const {
    auto it = index_of.find(word);
    return it == index_of.end() ? -1 : it->second;
  }
};

namespace time_detail {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace time_detail

// Parses RFC3339 ("2024-05-01T10:30:00Z", fractional seconds and numeric
// offsets accepted) to epoch seconds. Fractional seconds are truncated.
inline std::int64_t parse_rfc3339(std::string_view s, const std::string& context) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  char tsep = 0;
  int consumed = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2d%c%2d:%2d:%lf%n", &y, &mo, &d, &tsep, &h, &mi, &sec, &consumed) < 7 ||
      (tsep != 'T' && tsep != 't' && tsep != ' ')) {
    throw DataError(context + ": invalid RFC3339 timestamp \"" + str + "\"");
  }
  std::int64_t offset = 0;
  std::string_view rest = s.substr(static_cast<std::size_t>(consumed));
  if (rest.empty()) {
    // tolerate a missing zone designator, treat as UTC
  } else if (rest == "Z" || rest == "z") {
    offset = 0;
  } else if ((rest[0] == '+' || rest[0] == '-') && rest.size() == 6 && rest[3] == ':') {
    const int oh = (rest[1] - '0') * 10 + (rest[2] - '0');
    const int om = (rest[4] - '0') * 10 + (rest[5] - '0');
    offset = (rest[0] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
  } else {
    throw DataError(context + ": invalid timezone in timestamp \"" + str + "\"");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec < 0 || sec >= 61) {
    throw DataError(context + ": out-of-range timestamp \"" + str + "\"");
  }
  const std::int64_t days = time_detail::days_from_civil(y, mo, d);
  return days * 86400 + h * 3600 + mi * 60 + static_cast<std::int64_t>(sec) - offset;
}

inline std::string format_rfc3339(std::int64_t t) {
  // inverse of days_from_civil
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  std::int64_t z = days + 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

enum class InputFormat { jsonl, csv };

inline InputFormat parse_format(std::string_view name) {
  if (name == "jsonl") return InputFormat::jsonl;
  if (name == "csv") return InputFormat::csv;
  throw ConfigError("unknown input format \"" + std::string(name) + "\" (expected jsonl or csv)");
}

namespace detail {

inline long long require_count(const nlohmann::json& row, const char* field, int line, bool required,
                               long long fallback = 0) {
  if (!row.contains(field)) {
    if (required) throw DataError("line " + std::to_string(line) + ": missing field \"" + field + "\"");
    return fallback;
  }
  const auto& v = row.at(field);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw DataError("line " + std::to_string(line) + ": field \"" + field + "\" must be a nonnegative integer");
  }
  const long long x = v.get<long long>();
  if (x < 0) throw DataError("line " + std::to_string(line) + ": field \"" + field + "\" must be nonnegative");
  return x;
}

inline long long parse_count_str(const std::string& raw, const char* field, int line, bool required,
                                 long long fallback = 0) {
  const auto t = trim(raw);
  if (t.empty()) {
    if (required) throw DataError("line " + std::to_string(line) + ": missing field \"" + field + "\"");
    return fallback;
  }
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(std::string(t), &pos);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line) + ": field \"" + field + "\" must be a nonnegative integer, got \"" +
                    std::string(t) + "\"");
  }
  if (pos != t.size() || x < 0) {
    throw DataError("line " + std::to_string(line) + ": field \"" + field + "\" must be a nonnegative integer, got \"" +
                    std::string(t) + "\"");
  }
  return x;
}

inline void validate_comment_times(const std::vector<std::int64_t>& times, int line) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] < times[i - 1]) {
      throw DataError("line " + std::to_string(line) + ": field \"comment_times\" must be nondecreasing");
    }
  }
}

// RFC4180-ish row parser; supports quoted fields with embedded commas/quotes.
inline std::vector<std::string> parse_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

inline std::vector<Post> ingest_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::vector<Post> posts;
  std::unordered_set<std::string> seen;  // dedup key: post_id + US + text
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    if (!row.is_object()) throw DataError("line " + std::to_string(lineno) + ": expected a JSON object");
    if (lineno == 1 && row.contains("schema") && row.size() == 1) continue;  // artifact schema header
    Post p;
    for (const char* f : {"post_id", "timestamp", "text"}) {
      if (!row.contains(f) || !row.at(f).is_string()) {
        throw DataError("line " + std::to_string(lineno) + ": missing or non-string field \"" + f + "\"");
      }
    }
    p.post_id = row.at("post_id").get<std::string>();
    if (p.post_id.empty()) throw DataError("line " + std::to_string(lineno) + ": field \"post_id\" must be nonempty");
    p.timestamp = parse_rfc3339(row.at("timestamp").get<std::string>(),
                                "line " + std::to_string(lineno) + ": field \"timestamp\"");
    p.text = row.at("text").get<std::string>();
    p.likes = detail::require_count(row, "likes", lineno, true);
    p.comments = detail::require_count(row, "comments", lineno, true);
    p.followers = detail::require_count(row, "followers", lineno, true);
    p.reposts = detail::require_count(row, "reposts", lineno, false, 0);
    if (row.contains("comment_times") && !row.at("comment_times").is_null()) {
      if (!row.at("comment_times").is_array()) {
        throw DataError("line " + std::to_string(lineno) + ": field \"comment_times\" must be an array");
      }
      std::vector<std::int64_t> times;
      for (const auto& v : row.at("comment_times")) {
        if (!v.is_string()) {
          throw DataError("line " + std::to_string(lineno) + ": field \"comment_times\" entries must be RFC3339 strings");
        }
        times.push_back(parse_rfc3339(v.get<std::string>(),
                                      "line " + std::to_string(lineno) + ": field \"comment_times\""));
      }
      detail::validate_comment_times(times, lineno);
      p.comment_times = std::move(times);
    }
    if (row.contains("platform") && row.at("platform").is_string()) p.platform = row.at("platform").get<std::string>();
    if (row.contains("tokens") && row.at("tokens").is_array()) {
      std::vector<std::string> toks;
      for (const auto& v : row.at("tokens")) {
        if (v.is_string()) toks.push_back(v.get<std::string>());
      }
      p.pre_tokens = std::move(toks);
    }
    if (seen.insert(p.post_id + '\x1f' + p.text).second) posts.push_back(std::move(p));
  }
  return posts;
}

inline std::vector<Post> ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::string header;
  int lineno = 0;
  do {
    if (!std::getline(in, header)) throw DataError(path + ": empty CSV file");
    ++lineno;
  } while (trim(header).empty() || header.starts_with("#"));
  const auto cols = detail::parse_csv_row(header);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < cols.size(); ++i) col[std::string(trim(cols[i]))] = i;
  for (const char* f : {"post_id", "timestamp", "text", "likes", "comments", "followers"}) {
    if (!col.count(f)) throw DataError(path + ": CSV header missing required column \"" + f + "\"");
  }
  const auto get = [&](const std::vector<std::string>& row, const char* name, bool required) -> std::string {
    auto it = col.find(name);
    if (it == col.end() || it->second >= row.size()) {
      if (required) throw DataError("line " + std::to_string(lineno) + ": missing field \"" + std::string(name) + "\"");
      return {};
    }
    return row[it->second];
  };
  std::vector<Post> posts;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto row = detail::parse_csv_row(line);
    Post p;
    p.post_id = get(row, "post_id", true);
    if (p.post_id.empty()) throw DataError("line " + std::to_string(lineno) + ": field \"post_id\" must be nonempty");
    p.timestamp = parse_rfc3339(get(row, "timestamp", true), "line " + std::to_string(lineno) + ": field \"timestamp\"");
    p.text = get(row, "text", true);
    p.likes = detail::parse_count_str(get(row, "likes", true), "likes", lineno, true);
    p.comments = detail::parse_count_str(get(row, "comments", true), "comments", lineno, true);
    p.followers = detail::parse_count_str(get(row, "followers", true), "followers", lineno, true);
    p.reposts = detail::parse_count_str(get(row, "reposts", false), "reposts", lineno, false, 0);
    const std::string times_raw = get(row, "comment_times", false);
    if (!trim(times_raw).empty()) {
      std::vector<std::int64_t> times;
      for (const auto& part : split(times_raw, '|')) {
        times.push_back(parse_rfc3339(trim(part), "line " + std::to_string(lineno) + ": field \"comment_times\""));
      }
      detail::validate_comment_times(times, lineno);
      p.comment_times = std::move(times);
    }
    p.platform = get(row, "platform", false);
    if (seen.insert(p.post_id + '\x1f' + p.text).second) posts.push_back(std::move(p));
  }
  return posts;
}

// Reads posts from disk; exact (post_id, text) duplicates collapse to the
// first occurrence, missing reposts default to 0.
inline std::vector<Post> ingest(const std::string& path, InputFormat format) {
  return format == InputFormat::jsonl ? ingest_jsonl(path) : ingest_csv(path);
}

struct PreprocessOptions {
  std::unordered_set<std::string> stop_words;
  std::unordered_set<std::string> protected_terms;             // never split, never dropped
  std::unordered_map<std::string, std::string> replacements;   // variant -> canonical
  Tokenizer tokenizer;                                         // defaults to text::default_tokenizer()
};

struct PreprocessResult {
  std::vector<TokenizedPost> posts;  // aligned with the input order
  Vocabulary vocab;
  int flagged_no_bigram = 0;  // posts with < 2 surviving tokens (kept, produce no edges)
};

namespace detail {

// Shields protected terms from the splitter by swapping separators for \x01,
// restored as '_' afterwards so tokens stay whitespace-free.
inline std::string shield_protected(std::string cleaned, const std::unordered_set<std::string>& terms) {
  for (const auto& term : terms) {
    const std::string folded = text::clean(term);
    if (folded.empty()) continue;
    std::size_t pos = 0;
    while ((pos = cleaned.find(folded, pos)) != std::string::npos) {
      for (std::size_t k = 0; k < folded.size(); ++k) {
        std::size_t idx = pos + k;
        char32_t cp = text::decode_utf8(cleaned, idx);
        if (cp < 0x80 && text::is_separator(cp)) cleaned[pos + k] = '\x01';
        k = idx - pos - 1;
      }
      pos += folded.size();
    }
  }
  return cleaned;
}

}  // namespace detail

// Cleans and tokenizes every post and builds the vocabulary in first-occurrence
// order. Posts that lose all tokens stay in the output (zero-length) so the
// corpus stays aligned with its influence metadata.
inline PreprocessResult preprocess(const std::vector<Post>& posts, const PreprocessOptions& options = {}) {
  const Tokenizer tok = options.tokenizer ? options.tokenizer : text::default_tokenizer();
  std::unordered_set<std::string> folded_protected;  // protection compares folded forms
  for (const auto& term : options.protected_terms) folded_protected.insert(text::clean(term));
  PreprocessResult result;
  result.posts.reserve(posts.size());
  for (const auto& post : posts) {
    std::vector<std::string> raw_tokens;
    if (post.pre_tokens) {
      raw_tokens = *post.pre_tokens;  // pre-segmented input: segmentation is trusted
      for (auto& t : raw_tokens) t = text::clean(t);
    } else {
      std::string cleaned = text::clean(post.text);
      if (!options.protected_terms.empty()) cleaned = detail::shield_protected(std::move(cleaned), options.protected_terms);
      raw_tokens = tok(cleaned);
    }
    TokenizedPost tp;
    tp.post_id = post.post_id;
    for (auto& t : raw_tokens) {
      bool is_protected = false;
      if (t.find('\x01') != std::string::npos) {
        std::replace(t.begin(), t.end(), '\x01', '_');
        is_protected = true;
      } else if (folded_protected.count(t)) {
        is_protected = true;
      }
      if (t.empty()) continue;
      if (!is_protected) {
        auto rep = options.replacements.find(t);
        if (rep != options.replacements.end()) t = rep->second;
        if (t.empty() || options.stop_words.count(t)) continue;
      }
      tp.tokens.push_back(t);
    }
    if (!tp.has_bigrams()) ++result.flagged_no_bigram;
    for (const auto& t : tp.tokens) result.vocab.add(t);
    result.posts.push_back(std::move(tp));
  }
  if (result.vocab.size() == 0) throw DataError("no usable posts: corpus is empty after cleaning");
  return result;
}

inline std::unordered_set<std::string> load_word_set(const std::string& path) {
  std::unordered_set<std::string> out;
  for (const auto& line : read_lines(path)) out.insert(line);
  return out;
}

// Replacement file: one "variant<TAB>canonical" per line.
inline std::unordered_map<std::string, std::string> load_replacements(const std::string& path) {
  std::unordered_map<std::string, std::string> out;
  for (const auto& line : read_lines(path)) {
    const auto parts = split(line, '\t');
    if (parts.size() != 2 || parts[0].empty()) throw DataError(path + ": replacement lines must be variant<TAB>canonical");
    out[parts[0]] = parts[1];
  }
  return out;
}

}  // namespace pdtopics
