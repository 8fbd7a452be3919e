#pragma once

#include <string>
#include <utility>
#include <vector>

#include "radlabel/backend.hpp"
#include "radlabel/taxonomy.hpp"

namespace radlabel {

enum class RepairKind { MissingKeyFilled, UnknownKeyDropped, StringValueCoerced };
std::string to_string(RepairKind kind);

struct RepairNote {
  RepairKind kind;
  std::string key;

  bool operator==(const RepairNote& other) const = default;
};

std::string to_string(const RepairNote& note);  // e.g. missing_key_filled(mass)

// First balanced {...} span, parsed as a flat literal map. Keys may be single-
// or double-quoted; values are integers or integer-valued quoted strings
// (coerced, with a note); a trailing comma is tolerated. Surrounding prose and
// code fences are ignored. Nested structures are rejected.
struct ExtractedObject {
  std::vector<std::pair<std::string, long long>> entries;  // textual order
  std::vector<RepairNote> repairs;                         // coercion notes
};

// Throws ExtractError when no parsable flat object is present.
ExtractedObject extract_object(const std::string& text);

struct ParsedPrediction {
  LabelMap labels;  // always the full taxonomy key set with allowed codes
  bool valid = false;
  std::vector<RepairNote> repairs;
  std::string raw;
};

// Keys normalized and matched exactly against the taxonomy: unknown keys are
// dropped, missing findings filled with the not-mentioned code (noted), and
// out-of-range values replaced with it while forcing valid=false. Never throws.
ParsedPrediction validate(const ExtractedObject& object, const TaxonomySpec& taxonomy);

// Total composition: extraction failures and length/error generations yield
// the all-default invalid prediction; anything else goes through validate.
ParsedPrediction parse_answer(const RawAnswer& raw, const TaxonomySpec& taxonomy);

// All findings not mentioned, valid=false.
ParsedPrediction default_prediction(const TaxonomySpec& taxonomy);

}  // namespace radlabel
