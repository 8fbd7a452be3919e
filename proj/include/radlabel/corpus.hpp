#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "radlabel/taxonomy.hpp"

namespace radlabel {

// Loads an annotated dataset. Two formats are accepted:
//   A) line-delimited records (.jsonl/.ndjson): {"id", "language", "text", "labels": {...}}
//   B) delimited table (.csv/.tsv): columns id, language, text, one column per finding
// Findings absent from a record are filled with the not-mentioned code. Any
// malformed record aborts the load with a DataError naming the line.
std::vector<AnnotatedReport> load_dataset(const std::filesystem::path& path,
                                          const TaxonomySpec& taxonomy);

// Writes format A, labels rendered in taxonomy order. Output is byte-stable.
void save_dataset(const std::vector<AnnotatedReport>& dataset, const TaxonomySpec& taxonomy,
                  const std::filesystem::path& path);

// REFLACX-style certainty score: 4 and 5 count as positive mentions, 1..3 as
// uncertain. Throws DataError outside 1..5.
int map_certainty(int score);

// support(f) = number of reports whose code for f is not the not-mentioned code.
std::map<std::string, long> finding_supports(const std::vector<AnnotatedReport>& dataset,
                                             const TaxonomySpec& taxonomy);

struct FilterResult {
  TaxonomySpec taxonomy;
  std::vector<AnnotatedReport> dataset;
};

// Keeps findings with support >= min_count (order preserved) and prunes the
// dropped findings from every record. Throws DataError when nothing survives.
FilterResult filter_findings_by_support(const std::vector<AnnotatedReport>& dataset,
                                        const TaxonomySpec& taxonomy, long min_count);
// Same, with supports counted elsewhere (e.g. on the train split only).
FilterResult filter_findings_by_support(const std::vector<AnnotatedReport>& dataset,
                                        const TaxonomySpec& taxonomy, long min_count,
                                        const std::map<std::string, long>& supports);

// Keeps the k highest-support findings; ties keep the earlier taxonomy entry.
FilterResult top_k_findings(const std::vector<AnnotatedReport>& dataset,
                            const TaxonomySpec& taxonomy, std::size_t k);
FilterResult top_k_findings(const std::vector<AnnotatedReport>& dataset,
                            const TaxonomySpec& taxonomy, std::size_t k,
                            const std::map<std::string, long>& supports);

}  // namespace radlabel
