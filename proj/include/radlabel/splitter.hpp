#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "radlabel/taxonomy.hpp"

namespace radlabel {

enum class Subset { Train, Dev, Test };

std::string to_string(Subset subset);
std::optional<Subset> subset_from_string(const std::string& name);

struct SplitAssignment {
  std::map<std::string, Subset> assignment;  // report id -> subset
  std::array<double, 3> fractions{};         // train, dev, test
  std::uint64_t seed = 0;
  std::optional<std::size_t> dev_count;  // absolute dev-size targeting, when used
};

// Iterative multilabel stratification: repeatedly take the label with fewest
// remaining unassigned mentioned examples and hand each of its examples to the
// subset with the greatest remaining demand for that label; ties fall back to
// overall remaining capacity, then to a seeded draw. A label counts as present
// when its code is not the not-mentioned code. Subset sizes follow largest-
// remainder quotas of fraction*N, so each is within one report of its target.
//
// dev_count, when given, pins the dev subset to that absolute size and splits
// the remainder between train and test in proportion to their fractions.
SplitAssignment stratified_split(const std::vector<AnnotatedReport>& dataset,
                                 const TaxonomySpec& taxonomy,
                                 const std::array<double, 3>& fractions, std::uint64_t seed,
                                 std::optional<std::size_t> dev_count = std::nullopt);

// Stratified subsample of ceil(fraction * N) reports (a two-way split keeping
// the first part). Returned in dataset order; deterministic under seed.
std::vector<AnnotatedReport> subsample(const std::vector<AnnotatedReport>& train,
                                       const TaxonomySpec& taxonomy, double fraction,
                                       std::uint64_t seed);

// Records from dataset assigned to subset, in dataset order. Throws DataError
// when an id is missing from the assignment.
std::vector<AnnotatedReport> select_subset(const std::vector<AnnotatedReport>& dataset,
                                           const SplitAssignment& split, Subset subset);

// Manifest persistence: a header record {"fractions", "seed", "n"} followed by
// one {"id", "subset"} record per report.
void save_manifest(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment load_manifest(const std::filesystem::path& path);

}  // namespace radlabel
