#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace radlabel {

// Mention status of a finding in a report. NotMentioned is always a legal
// state; the other three depend on the dataset's annotation scheme.
enum class MentionClass { Positive, Negative, Uncertain, NotMentioned };

// Fixed code scheme shared by prompts, answers and dataset files.
constexpr int kCodePositive = 1;
constexpr int kCodeNegative = 2;
constexpr int kCodeUncertain = 0;
constexpr int kCodeNotMentioned = -1;

int code_for(MentionClass cls);
std::optional<MentionClass> mention_class_for_code(int code);
std::string to_string(MentionClass cls);
std::optional<MentionClass> mention_class_from_string(const std::string& name);

// finding name -> integer code
using LabelMap = std::map<std::string, int>;

std::string normalize_finding(const std::string& raw);  // trim + ASCII lowercase

// A dataset's finding vocabulary, its permitted mention classes and the
// derived allowed-code set. Immutable after construction.
class TaxonomySpec {
 public:
  // Findings are normalized (lowercase, trimmed) and must be unique and
  // nonempty; mention_classes must contain Positive and may not name
  // NotMentioned. Throws ConfigError on violation.
  TaxonomySpec(std::string dataset_id, std::vector<std::string> findings,
               std::set<MentionClass> mention_classes);

  const std::string& dataset_id() const { return dataset_id_; }
  const std::vector<std::string>& findings() const { return findings_; }
  const std::set<MentionClass>& mention_classes() const { return mention_classes_; }

  bool has_class(MentionClass cls) const { return mention_classes_.count(cls) > 0; }
  bool has_finding(const std::string& normalized_name) const;
  bool code_allowed(int code) const { return allowed_codes_.count(code) > 0; }

  // Ascending; always contains -1 and 1.
  std::vector<int> allowed_codes() const;

 private:
  std::string dataset_id_;
  std::vector<std::string> findings_;
  std::set<std::string> finding_set_;
  std::set<MentionClass> mention_classes_;
  std::set<int> allowed_codes_;
};

struct Report {
  std::string id;
  std::string language;  // two-letter tag: en, es, fr, da, ...
  std::string text;
  std::string source;  // dataset_id the report came from
};

struct AnnotatedReport {
  Report report;
  LabelMap labels;
};

// Throws DataError unless labels carry exactly the taxonomy's findings, each
// with an allowed code. context is prepended to the message when nonempty.
void check_labels(const TaxonomySpec& taxonomy, const LabelMap& labels,
                  const std::string& context = {});

}  // namespace radlabel
