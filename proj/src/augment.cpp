#include "radlabel/augment.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "radlabel/errors.hpp"
#include "radlabel/meteor.hpp"

namespace radlabel {

namespace {

constexpr const char* kTranslationTemplate =
    "Translate this text into {language}. Respond only with the translation.";

long whitespace_token_count(const std::string& text) {
  std::istringstream stream(text);
  std::string token;
  long count = 0;
  while (stream >> token) ++count;
  return count;
}

GenerationParams prose_params(GenerationParams params) {
  params.stop.clear();  // translations are prose, not brace-stopped objects
  return params;
}

PromptBundle translation_bundle(const Report& report, const std::string& target_lang) {
  const auto name = language_name(target_lang);
  if (!name) throw DataError("unsupported target language tag '" + target_lang + "'");
  return {translation_instruction(*name), {}, report.text};
}

std::optional<TranslationRecord> record_from_answer(const Report& report,
                                                    const std::string& target_lang,
                                                    const RawAnswer& answer,
                                                    std::string* error) {
  if (answer.finished_by == FinishReason::Error) {
    if (error) *error = report.id + ": " + answer.error;
    return std::nullopt;
  }
  if (answer.text.find_first_not_of(" \t\r\n") == std::string::npos) {
    if (error) *error = report.id + ": empty translation";
    return std::nullopt;
  }
  TranslationRecord record;
  record.source_id = report.id;
  record.source_lang = report.language;
  record.target_lang = target_lang;
  record.translated_text = answer.text;
  record.identity_direction = report.language == target_lang;
  record.completion_tokens = answer.completion_tokens;
  return record;
}

}  // namespace

std::optional<std::string> language_name(const std::string& tag) {
  if (tag == "en") return "English";
  if (tag == "es") return "Spanish";
  if (tag == "fr") return "French";
  if (tag == "da") return "Danish";
  return std::nullopt;
}

std::string translation_instruction(const std::string& language_name) {
  std::string text = kTranslationTemplate;
  const auto pos = text.find("{language}");
  return text.replace(pos, std::string("{language}").size(), language_name);
}

std::optional<TranslationRecord> translate(const Report& report, const std::string& target_lang,
                                           ChatBackend& backend, const GenerationParams& params,
                                           std::string* error) {
  const PromptBundle bundle = translation_bundle(report, target_lang);
  const RawAnswer answer = backend.complete(bundle, prose_params(params));
  return record_from_answer(report, target_lang, answer, error);
}

std::vector<TranslationRecord> translate_batch(const std::vector<Report>& reports,
                                               const std::string& target_lang,
                                               ChatBackend& backend,
                                               const GenerationParams& params, int max_in_flight,
                                               std::vector<std::string>* errors) {
  std::vector<PromptBundle> bundles;
  bundles.reserve(reports.size());
  for (const auto& report : reports) bundles.push_back(translation_bundle(report, target_lang));

  const auto answers = backend.complete_batch(bundles, prose_params(params), max_in_flight);
  std::vector<TranslationRecord> records;
  records.reserve(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::string error;
    if (auto record = record_from_answer(reports[i], target_lang, answers[i], &error)) {
      records.push_back(std::move(*record));
    } else if (errors) {
      errors->push_back(std::move(error));
    }
  }
  return records;
}

LengthFilterResult length_filter(const std::vector<TranslationRecord>& records, long max_tokens) {
  if (max_tokens < 1) throw DataError("length filter cap must be >= 1");
  LengthFilterResult result;
  for (TranslationRecord record : records) {
    const long tokens = record.completion_tokens
                            ? static_cast<long>(*record.completion_tokens)
                            : whitespace_token_count(record.translated_text);
    record.kept = tokens <= max_tokens;
    (record.kept ? result.kept : result.dropped).push_back(std::move(record));
  }
  return result;
}

std::optional<AugmentMode> augment_mode_from_string(const std::string& name) {
  if (name == "translated_only") return AugmentMode::TranslatedOnly;
  if (name == "union") return AugmentMode::Union;
  return std::nullopt;
}

std::string to_string(AugmentMode mode) {
  return mode == AugmentMode::TranslatedOnly ? "translated_only" : "union";
}

std::vector<AnnotatedReport> build_augmented_set(const std::vector<AnnotatedReport>& original,
                                                 const std::vector<TranslationRecord>& translations,
                                                 AugmentMode mode) {
  std::map<std::string, const AnnotatedReport*> by_id;
  for (const auto& item : original) by_id[item.report.id] = &item;

  std::vector<AnnotatedReport> out;
  std::set<std::string> ids;
  if (mode == AugmentMode::Union) {
    for (const auto& item : original) {
      out.push_back(item);
      ids.insert(item.report.id);
    }
  }
  for (const auto& record : translations) {
    if (!record.kept) continue;
    const auto source = by_id.find(record.source_id);
    if (source == by_id.end()) {
      throw DataError("translation of unknown source id '" + record.source_id + "'");
    }
    AnnotatedReport item;
    item.report.id = record.source_id + "::" + record.target_lang;
    item.report.language = record.target_lang;
    item.report.text = record.translated_text;
    item.report.source = source->second->report.source;
    item.labels = source->second->labels;  // labels carry over unchanged
    if (!ids.insert(item.report.id).second) {
      throw DataError("duplicate id after suffixing: '" + item.report.id + "'");
    }
    out.push_back(std::move(item));
  }
  if (out.empty()) throw DataError("augmented set is empty");
  return out;
}

double score_backtranslation(const std::vector<TranslationEvalPair>& pairs,
                             const std::string& target_lang, ChatBackend& backend,
                             const GenerationParams& params, int max_in_flight,
                             std::vector<TranslationRecord>* details) {
  if (pairs.empty()) throw DataError("backtranslation corpus is empty");
  std::vector<PromptBundle> bundles;
  bundles.reserve(pairs.size());
  for (const auto& pair : pairs) {
    bundles.push_back(translation_bundle(pair.source, target_lang));
  }
  const auto answers = backend.complete_batch(bundles, prose_params(params), max_in_flight);

  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool failed = answers[i].finished_by == FinishReason::Error;
    const std::string hypothesis = failed ? std::string() : answers[i].text;
    const double score = meteor(hypothesis, pairs[i].reference, target_lang);
    sum += score;
    if (details) {
      std::string error;
      auto record = record_from_answer(pairs[i].source, target_lang, answers[i], &error);
      if (!record) {
        record.emplace();
        record->source_id = pairs[i].source.id;
        record->source_lang = pairs[i].source.language;
        record->target_lang = target_lang;
        record->kept = false;
      }
      record->meteor_vs_reference = score;
      details->push_back(std::move(*record));
    }
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace radlabel
