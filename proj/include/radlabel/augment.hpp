#pragma once

#include <optional>
#include <string>
#include <vector>

#include "radlabel/backend.hpp"
#include "radlabel/taxonomy.hpp"

namespace radlabel {

// Full English name for a supported two-letter tag ("en" -> "English").
std::optional<std::string> language_name(const std::string& tag);

// The translation instruction with the language filled in.
std::string translation_instruction(const std::string& language_name);

struct TranslationRecord {
  std::string source_id;
  std::string source_lang;
  std::string target_lang;
  std::string translated_text;
  bool kept = true;                // cleared by the length filter
  bool identity_direction = false;  // target equals the source language
  std::optional<int> completion_tokens;
  std::optional<double> meteor_vs_reference;
};

// Translates one report. The stop sequence is cleared: translations are prose.
// Backend failures and empty responses yield nullopt with the error in *error.
std::optional<TranslationRecord> translate(const Report& report, const std::string& target_lang,
                                           ChatBackend& backend, const GenerationParams& params,
                                           std::string* error = nullptr);

// Batch version over backend.complete_batch; failed items are skipped and
// their diagnostics appended to errors (when given).
std::vector<TranslationRecord> translate_batch(const std::vector<Report>& reports,
                                               const std::string& target_lang,
                                               ChatBackend& backend,
                                               const GenerationParams& params,
                                               int max_in_flight = 64,
                                               std::vector<std::string>* errors = nullptr);

struct LengthFilterResult {
  std::vector<TranslationRecord> kept;
  std::vector<TranslationRecord> dropped;
};

// Partitions by translated length: endpoint-reported tokens when available,
// whitespace tokens otherwise. max_tokens must be >= 1.
LengthFilterResult length_filter(const std::vector<TranslationRecord>& records, long max_tokens);

enum class AugmentMode { TranslatedOnly, Union };
std::optional<AugmentMode> augment_mode_from_string(const std::string& name);
std::string to_string(AugmentMode mode);

// Kept translations become reports with the source's labels; ids gain a
// "::<lang>" suffix. Union mode prepends the originals.
std::vector<AnnotatedReport> build_augmented_set(const std::vector<AnnotatedReport>& original,
                                                 const std::vector<TranslationRecord>& translations,
                                                 AugmentMode mode);

struct TranslationEvalPair {
  Report source;
  std::string reference;  // gold text in the target language
};

// Translates each source and scores METEOR against the reference; failures
// score zero. Returns the mean for this direction. Per-pair records (with
// meteor_vs_reference filled) land in *details when given.
double score_backtranslation(const std::vector<TranslationEvalPair>& pairs,
                             const std::string& target_lang, ChatBackend& backend,
                             const GenerationParams& params, int max_in_flight = 64,
                             std::vector<TranslationRecord>* details = nullptr);

}  // namespace radlabel
