#include "radlabel/promptgen.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "radlabel/errors.hpp"
#include "radlabel/rng.hpp"

namespace radlabel {

namespace {

// Common header; {findings} and {classes} are substituted per taxonomy.
constexpr const char* kHeader =
    "You are a helpful radiology assistant. Given a radiology report, classify each abnormality "
    "into a class. Output a valid JSON with each abnormality as key, and the class as value. The "
    "keys must be {findings}. The values can be one of {classes}. The values have the following "
    "interpretation:";

// Value clauses. Which variant of (1) and (-1) applies depends on whether the
// taxonomy annotates uncertain or negative mentions. The folded (1) clause
// carries a trailing space so the assembled text keeps its double-space
// separator before (-1).
constexpr const char* kClausePositiveOnly =
    "(1) the abnormality was positively mentioned in the report;";
constexpr const char* kClausePositiveFolded =
    "(1) the abnormality was mentioned, even with uncertainty, in the report e.g. 'A large "
    "pleural effusion', 'The cardiac contours are stable.', 'The cardiac size cannot be "
    "evaluated.'; ";
constexpr const char* kClauseNegative =
    "(2) the abnormality was negatively mentioned in the report; e.g. 'No pneumothorax.'";
constexpr const char* kClauseUncertain =
    "(0) the abnormality was either: mentioned with uncertainty in the report,or mentioned with "
    "ambiguous language in the report and it is unclear if the pathology exists or not, e.g. "
    "Explicit uncertainty: 'The cardiac size cannot be evaluated.', Ambiguous language: 'The "
    "cardiac contours are stable.'";
constexpr const char* kClauseNotMentioned =
    "(-1) the abnormality was not mentioned in the report.";
constexpr const char* kClauseNotMentionedFoldsNegative =
    "(-1) the abnormality was not mentioned in the report, or the abnormality was negatively "
    "mentioned in the report; e.g. 'No pneumothorax.'.";

std::string replace_once(std::string text, const std::string& placeholder,
                         const std::string& value) {
  const auto pos = text.find(placeholder);
  if (pos == std::string::npos) throw Error("placeholder " + placeholder + " missing");
  return text.replace(pos, placeholder.size(), value);
}

std::string render_findings_list(const TaxonomySpec& taxonomy) {
  std::string out = "[";
  bool first = true;
  for (const auto& finding : taxonomy.findings()) {
    if (!first) out += ", ";
    out += "'" + finding + "'";
    first = false;
  }
  return out + "]";
}

std::string render_code_list(const TaxonomySpec& taxonomy) {
  std::string out = "[";
  bool first = true;
  for (int code : taxonomy.allowed_codes()) {
    if (!first) out += ", ";
    out += std::to_string(code);
    first = false;
  }
  return out + "]";
}

}  // namespace

std::string build_instruction(const TaxonomySpec& taxonomy) {
  const bool has_uncertain = taxonomy.has_class(MentionClass::Uncertain);
  const bool has_negative = taxonomy.has_class(MentionClass::Negative);

  std::string text = replace_once(kHeader, "{findings}", render_findings_list(taxonomy));
  text = replace_once(std::move(text), "{classes}", render_code_list(taxonomy));

  text += " ";
  text += has_uncertain ? kClausePositiveOnly : kClausePositiveFolded;
  if (has_negative) {
    text += " ";
    text += kClauseNegative;
  }
  if (has_uncertain) {
    text += " ";
    text += kClauseUncertain;
  }
  text += " ";
  text += has_negative ? kClauseNotMentioned : kClauseNotMentionedFoldsNegative;
  return text;
}

std::string serialize_answer(const LabelMap& labels, const TaxonomySpec& taxonomy) {
  check_labels(taxonomy, labels, "serialize_answer");
  std::string out = "{";
  bool first = true;
  for (const auto& finding : taxonomy.findings()) {
    if (!first) out += ", ";
    out += "\"" + finding + "\": " + std::to_string(labels.at(finding));
    first = false;
  }
  return out + "}";
}

std::optional<ShotSampling> shot_sampling_from_string(const std::string& name) {
  if (name == "uniform") return ShotSampling::Uniform;
  if (name == "balanced") return ShotSampling::Balanced;
  return std::nullopt;
}

namespace {

bool exhibits_class(const AnnotatedReport& item, int code) {
  for (const auto& [_, value] : item.labels) {
    if (value == code) return true;
  }
  return false;
}

std::vector<std::size_t> balanced_indices(const std::vector<AnnotatedReport>& train,
                                          const TaxonomySpec& taxonomy, std::size_t n,
                                          SeededRng& rng) {
  std::vector<int> class_codes;
  for (MentionClass cls : taxonomy.mention_classes()) class_codes.push_back(code_for(cls));

  std::vector<std::size_t> pool(train.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::vector<std::size_t> chosen;
  chosen.reserve(n);
  for (std::size_t slot = 0; slot < n; ++slot) {
    const int code = class_codes[slot % class_codes.size()];
    std::vector<std::size_t> candidates;
    for (std::size_t pos = 0; pos < pool.size(); ++pos) {
      if (exhibits_class(train[pool[pos]], code)) candidates.push_back(pos);
    }
    const std::size_t pos = candidates.empty() ? rng.pick(pool.size())
                                               : candidates[rng.pick(candidates.size())];
    chosen.push_back(pool[pos]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  return chosen;
}

}  // namespace

std::vector<Shot> sample_shots(const std::vector<AnnotatedReport>& train,
                               const TaxonomySpec& taxonomy, std::size_t n, std::uint64_t seed,
                               ShotSampling sampling) {
  if (n > train.size()) {
    throw DataError("cannot draw " + std::to_string(n) + " shots from " +
                    std::to_string(train.size()) + " training records");
  }
  SeededRng rng(seed);
  const auto indices = sampling == ShotSampling::Uniform
                           ? rng.sample_indices(train.size(), n)
                           : balanced_indices(train, taxonomy, n, rng);
  std::vector<Shot> shots;
  shots.reserve(n);
  for (std::size_t idx : indices) {
    shots.push_back({train[idx].report.text, serialize_answer(train[idx].labels, taxonomy)});
  }
  return shots;
}

PromptBundle build_prompt(const std::string& instruction, const std::vector<Shot>& shots,
                          const Report& report) {
  return {instruction, shots, report.text};
}

std::size_t export_sft(const std::vector<AnnotatedReport>& dataset, const TaxonomySpec& taxonomy,
                       const std::filesystem::path& out) {
  std::ofstream file(out, std::ios::binary);
  if (!file) throw DataError("cannot write SFT file " + out.string());
  const std::string instruction = build_instruction(taxonomy);
  std::size_t count = 0;
  for (const auto& item : dataset) {
    nlohmann::ordered_json record;
    record["instruction"] = instruction;
    record["input"] = item.report.text;
    record["completion"] = serialize_answer(item.labels, taxonomy);
    file << record.dump() << "\n";
    ++count;
  }
  if (!file) throw DataError("write failed for " + out.string());
  return count;
}

}  // namespace radlabel
