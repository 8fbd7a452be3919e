#include "radlabel/extractor.hpp"

#include <cctype>
#include <set>

#include "radlabel/errors.hpp"

namespace radlabel {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct Cursor {
  const std::string& text;
  std::size_t pos;
  std::size_t end;

  bool done() const { return pos >= end; }
  char peek() const { return text[pos]; }
  void skip_ws() {
    while (!done() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
};

std::string read_quoted(Cursor& cur) {
  const char quote = cur.peek();
  ++cur.pos;
  std::string out;
  while (!cur.done()) {
    const char c = cur.text[cur.pos];
    if (c == '\\' && cur.pos + 1 < cur.end) {
      out.push_back(cur.text[cur.pos + 1]);
      cur.pos += 2;
      continue;
    }
    if (c == quote) {
      ++cur.pos;
      return out;
    }
    out.push_back(c);
    ++cur.pos;
  }
  throw ExtractError("unterminated quoted string");
}

long long read_integer_token(Cursor& cur) {
  std::size_t start = cur.pos;
  if (!cur.done() && (cur.peek() == '-' || cur.peek() == '+')) ++cur.pos;
  std::size_t digits_from = cur.pos;
  while (!cur.done() && is_digit(cur.peek())) ++cur.pos;
  if (cur.pos == digits_from) throw ExtractError("unparseable value");
  if (!cur.done()) {
    const char next = cur.peek();
    if (next != ',' && next != '}' && !std::isspace(static_cast<unsigned char>(next))) {
      throw ExtractError("unparseable value");  // e.g. 1.5 or 1x
    }
  }
  try {
    return std::stoll(cur.text.substr(start, cur.pos - start));
  } catch (const std::exception&) {
    throw ExtractError("integer out of range");
  }
}

std::optional<long long> parse_integer_string(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  if (begin == end) return std::nullopt;
  std::size_t i = begin;
  if (s[i] == '-' || s[i] == '+') ++i;
  if (i == end) return std::nullopt;
  for (std::size_t j = i; j < end; ++j) {
    if (!is_digit(s[j])) return std::nullopt;
  }
  try {
    return std::stoll(s.substr(begin, end - begin));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// [start, end) of the first balanced brace span, quote-aware.
std::pair<std::size_t, std::size_t> find_braced_span(const std::string& text) {
  const auto start = text.find('{');
  if (start == std::string::npos) throw ExtractError("no braced span in text");
  int depth = 0;
  char quote = 0;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (quote != 0) {
      if (c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      --depth;
      if (depth == 0) return {start, i + 1};
    }
  }
  throw ExtractError("unbalanced braces");
}

}  // namespace

std::string to_string(RepairKind kind) {
  switch (kind) {
    case RepairKind::MissingKeyFilled: return "missing_key_filled";
    case RepairKind::UnknownKeyDropped: return "unknown_key_dropped";
    case RepairKind::StringValueCoerced: return "string_value_coerced";
  }
  return "?";
}

std::string to_string(const RepairNote& note) {
  return to_string(note.kind) + "(" + note.key + ")";
}

ExtractedObject extract_object(const std::string& text) {
  const auto [start, end] = find_braced_span(text);
  Cursor cur{text, start, end};

  ExtractedObject object;
  ++cur.pos;  // consume '{'
  cur.skip_ws();
  if (!cur.done() && cur.peek() == '}') return object;  // empty object

  while (true) {
    cur.skip_ws();
    if (cur.done()) throw ExtractError("unbalanced braces");
    if (cur.peek() == '}') return object;  // trailing comma
    if (cur.peek() != '\'' && cur.peek() != '"') throw ExtractError("expected quoted key");
    const std::string key = read_quoted(cur);

    cur.skip_ws();
    if (cur.done() || cur.peek() != ':') throw ExtractError("expected ':' after key");
    ++cur.pos;
    cur.skip_ws();
    if (cur.done()) throw ExtractError("missing value");

    long long value = 0;
    const char c = cur.peek();
    if (c == '{' || c == '[') {
      throw ExtractError("nested structures are not allowed");
    } else if (c == '\'' || c == '"') {
      const std::string raw_value = read_quoted(cur);
      const auto coerced = parse_integer_string(raw_value);
      if (!coerced) throw ExtractError("unparseable value for key '" + key + "'");
      value = *coerced;
      object.repairs.push_back({RepairKind::StringValueCoerced, key});
    } else {
      value = read_integer_token(cur);
    }
    object.entries.emplace_back(key, value);

    cur.skip_ws();
    if (cur.done()) throw ExtractError("unbalanced braces");
    if (cur.peek() == '}') return object;
    if (cur.peek() != ',') throw ExtractError("expected ',' or '}'");
    ++cur.pos;
  }
}

ParsedPrediction validate(const ExtractedObject& object, const TaxonomySpec& taxonomy) {
  ParsedPrediction prediction;
  prediction.repairs = object.repairs;
  prediction.valid = true;

  std::map<std::string, long long> resolved;  // last occurrence wins
  for (const auto& [raw_key, value] : object.entries) {
    const std::string key = normalize_finding(raw_key);
    if (!taxonomy.has_finding(key)) {
      prediction.repairs.push_back({RepairKind::UnknownKeyDropped, key});
      continue;
    }
    resolved[key] = value;
  }

  for (const auto& finding : taxonomy.findings()) {
    const auto it = resolved.find(finding);
    if (it == resolved.end()) {
      prediction.labels[finding] = kCodeNotMentioned;
      prediction.repairs.push_back({RepairKind::MissingKeyFilled, finding});
      continue;
    }
    const long long value = it->second;
    const bool in_range = value >= kCodeNotMentioned && value <= kCodeNegative &&
                          taxonomy.code_allowed(static_cast<int>(value));
    if (in_range) {
      prediction.labels[finding] = static_cast<int>(value);
    } else {
      prediction.labels[finding] = kCodeNotMentioned;
      prediction.valid = false;
    }
  }
  return prediction;
}

ParsedPrediction parse_answer(const RawAnswer& raw, const TaxonomySpec& taxonomy) {
  if (raw.finished_by != FinishReason::Stop) {
    ParsedPrediction prediction = default_prediction(taxonomy);
    prediction.raw = raw.text;
    return prediction;
  }
  try {
    ParsedPrediction prediction = validate(extract_object(raw.text), taxonomy);
    prediction.raw = raw.text;
    return prediction;
  } catch (const ExtractError&) {
    ParsedPrediction prediction = default_prediction(taxonomy);
    prediction.raw = raw.text;
    return prediction;
  }
}

ParsedPrediction default_prediction(const TaxonomySpec& taxonomy) {
  ParsedPrediction prediction;
  prediction.valid = false;
  for (const auto& finding : taxonomy.findings()) {
    prediction.labels[finding] = kCodeNotMentioned;
  }
  return prediction;
}

}  // namespace radlabel
