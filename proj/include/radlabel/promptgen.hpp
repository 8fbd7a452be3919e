#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "radlabel/taxonomy.hpp"

namespace radlabel {

// One in-context example: a report and its canonical serialized answer.
struct Shot {
  std::string report_text;
  std::string answer;
};

// Everything a chat endpoint needs for one classification request.
struct PromptBundle {
  std::string instruction;
  std::vector<Shot> shots;  // empty for zero-shot
  std::string target_text;
};

// One fine-tuning pair, exported line-delimited.
struct SftRecord {
  std::string instruction;
  std::string input;
  std::string completion;
};

// Taxonomy-conditional instruction: common header (findings list and allowed
// codes filled in) followed by the value clauses the mention-class set calls
// for. Equal taxonomies produce byte-equal text.
std::string build_instruction(const TaxonomySpec& taxonomy);

// Canonical single-line answer object: double-quoted keys in taxonomy order,
// integer values, no trailing whitespace.
std::string serialize_answer(const LabelMap& labels, const TaxonomySpec& taxonomy);

enum class ShotSampling { Uniform, Balanced };
std::optional<ShotSampling> shot_sampling_from_string(const std::string& name);

// n distinct training records drawn without replacement; order is draw order.
// Uniform sampling is the default. Balanced sampling cycles over the
// taxonomy's mention classes, each time drawing a record that exhibits the
// class (falling back to any record when none remains). Throws DataError when
// n exceeds the training set.
std::vector<Shot> sample_shots(const std::vector<AnnotatedReport>& train,
                               const TaxonomySpec& taxonomy, std::size_t n, std::uint64_t seed,
                               ShotSampling sampling = ShotSampling::Uniform);

PromptBundle build_prompt(const std::string& instruction, const std::vector<Shot>& shots,
                          const Report& report);

// Writes one line-delimited record {"instruction", "input", "completion"} per
// report; returns the record count. Re-export is byte-identical.
std::size_t export_sft(const std::vector<AnnotatedReport>& dataset, const TaxonomySpec& taxonomy,
                       const std::filesystem::path& out);

}  // namespace radlabel
