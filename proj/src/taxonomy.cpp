#include "radlabel/taxonomy.hpp"

#include <algorithm>
#include <cctype>

#include "radlabel/errors.hpp"

namespace radlabel {

int code_for(MentionClass cls) {
  switch (cls) {
    case MentionClass::Positive: return kCodePositive;
    case MentionClass::Negative: return kCodeNegative;
    case MentionClass::Uncertain: return kCodeUncertain;
    case MentionClass::NotMentioned: return kCodeNotMentioned;
  }
  throw Error("unknown mention class");
}

std::optional<MentionClass> mention_class_for_code(int code) {
  switch (code) {
    case kCodePositive: return MentionClass::Positive;
    case kCodeNegative: return MentionClass::Negative;
    case kCodeUncertain: return MentionClass::Uncertain;
    case kCodeNotMentioned: return MentionClass::NotMentioned;
    default: return std::nullopt;
  }
}

std::string to_string(MentionClass cls) {
  switch (cls) {
    case MentionClass::Positive: return "positive";
    case MentionClass::Negative: return "negative";
    case MentionClass::Uncertain: return "uncertain";
    case MentionClass::NotMentioned: return "not_mentioned";
  }
  return "?";
}

std::optional<MentionClass> mention_class_from_string(const std::string& name) {
  if (name == "positive") return MentionClass::Positive;
  if (name == "negative") return MentionClass::Negative;
  if (name == "uncertain") return MentionClass::Uncertain;
  if (name == "not_mentioned") return MentionClass::NotMentioned;
  return std::nullopt;
}

std::string normalize_finding(const std::string& raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string out = raw.substr(begin, end - begin);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

TaxonomySpec::TaxonomySpec(std::string dataset_id, std::vector<std::string> findings,
                           std::set<MentionClass> mention_classes)
    : dataset_id_(std::move(dataset_id)), mention_classes_(std::move(mention_classes)) {
  if (dataset_id_.empty()) throw ConfigError("taxonomy: dataset_id must be nonempty");
  if (findings.empty()) throw ConfigError("taxonomy: findings list must be nonempty");
  findings_.reserve(findings.size());
  for (const auto& raw : findings) {
    std::string name = normalize_finding(raw);
    if (name.empty()) throw ConfigError("taxonomy: finding name is empty after trimming");
    if (!finding_set_.insert(name).second) {
      throw ConfigError("taxonomy: duplicate finding '" + name + "'");
    }
    findings_.push_back(std::move(name));
  }
  if (mention_classes_.count(MentionClass::NotMentioned) > 0) {
    throw ConfigError("taxonomy: NotMentioned is implicit and not a mention class");
  }
  if (mention_classes_.count(MentionClass::Positive) == 0) {
    throw ConfigError("taxonomy: mention classes must include positive");
  }
  allowed_codes_.insert(kCodeNotMentioned);
  for (MentionClass cls : mention_classes_) allowed_codes_.insert(code_for(cls));
}

bool TaxonomySpec::has_finding(const std::string& normalized_name) const {
  return finding_set_.count(normalized_name) > 0;
}

std::vector<int> TaxonomySpec::allowed_codes() const {
  return {allowed_codes_.begin(), allowed_codes_.end()};
}

void check_labels(const TaxonomySpec& taxonomy, const LabelMap& labels,
                  const std::string& context) {
  const std::string where = context.empty() ? std::string() : context + ": ";
  if (labels.size() != taxonomy.findings().size()) {
    throw DataError(where + "expected " + std::to_string(taxonomy.findings().size()) +
                    " label entries, got " + std::to_string(labels.size()));
  }
  for (const auto& [finding, code] : labels) {
    if (!taxonomy.has_finding(finding)) {
      throw DataError(where + "unknown finding key '" + finding + "'");
    }
    if (!taxonomy.code_allowed(code)) {
      throw DataError(where + "code " + std::to_string(code) + " not allowed for finding '" +
                      finding + "'");
    }
  }
}

}  // namespace radlabel
