#include "radlabel/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "radlabel/errors.hpp"
#include "radlabel/rng.hpp"

namespace radlabel {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kSubsets = 3;

void check_fractions(const std::array<double, 3>& fractions) {
  double sum = 0;
  for (double f : fractions) {
    if (f < 0 || !std::isfinite(f)) throw DataError("split fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("split fractions must sum to 1");
}

// Largest-remainder rounding of fraction*n to integer quotas summing to n.
std::array<std::size_t, 3> quotas_from_fractions(const std::array<double, 3>& fractions,
                                                 std::size_t n) {
  std::array<std::size_t, 3> quotas{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < kSubsets; ++j) {
    const double target = fractions[j] * static_cast<double>(n);
    quotas[j] = static_cast<std::size_t>(std::floor(target));
    remainders[j] = target - std::floor(target);
    assigned += quotas[j];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t i = 0; assigned < n; ++i) {
    ++quotas[order[i % kSubsets]];
    ++assigned;
  }
  return quotas;
}

// Core pass shared by stratified_split and subsample: returns the subset index
// per report. A classic greedy stratification pass distributes examples by
// per-label demand; a fixup pass then restores the exact integer quotas by
// moving the examples whose move disturbs label balance least.
std::vector<std::size_t> stratify(const std::vector<AnnotatedReport>& dataset,
                                  const TaxonomySpec& taxonomy,
                                  const std::array<std::size_t, 3>& quotas,
                                  const std::array<double, 3>& fractions, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  const auto& findings = taxonomy.findings();
  const std::size_t n_labels = findings.size();

  // labels_of[e]: label indices mentioned by report e.
  std::vector<std::vector<std::size_t>> labels_of(n);
  std::vector<std::vector<std::size_t>> examples_of(n_labels);
  for (std::size_t e = 0; e < n; ++e) {
    check_labels(taxonomy, dataset[e].labels, dataset[e].report.id);
    for (std::size_t l = 0; l < n_labels; ++l) {
      if (dataset[e].labels.at(findings[l]) != kCodeNotMentioned) {
        labels_of[e].push_back(l);
        examples_of[l].push_back(e);
      }
    }
  }

  // demand[l][j]: how many label-l examples subset j still wants;
  // room[j]: how many examples subset j still wants overall. Both may run
  // negative; they guide the greedy choice rather than capping it.
  std::vector<std::array<double, 3>> demand(n_labels);
  for (std::size_t l = 0; l < n_labels; ++l) {
    for (std::size_t j = 0; j < kSubsets; ++j) {
      demand[l][j] = fractions[j] * static_cast<double>(examples_of[l].size());
    }
  }
  std::array<double, 3> room{};
  for (std::size_t j = 0; j < kSubsets; ++j) room[j] = fractions[j] * static_cast<double>(n);

  std::vector<std::size_t> assignment(n, kSubsets);  // kSubsets = unassigned
  std::vector<std::size_t> remaining(n_labels);
  for (std::size_t l = 0; l < n_labels; ++l) remaining[l] = examples_of[l].size();

  SeededRng rng(seed);

  auto pick_tied = [&](const std::vector<std::size_t>& tied) {
    return tied.size() == 1 ? tied[0] : tied[rng.pick(tied.size())];
  };

  auto place = [&](std::size_t e, std::size_t label_hint, bool use_demand) {
    std::vector<std::size_t> tied;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < kSubsets; ++j) {
      const double key = use_demand ? demand[label_hint][j] : room[j];
      if (key > best) {
        best = key;
        tied.assign(1, j);
      } else if (key == best) {
        tied.push_back(j);
      }
    }
    if (use_demand && tied.size() > 1) {
      // Demand tie: prefer the subset with the most overall demand left.
      std::vector<std::size_t> roomier;
      double most = -std::numeric_limits<double>::infinity();
      for (std::size_t j : tied) {
        if (room[j] > most) {
          most = room[j];
          roomier.assign(1, j);
        } else if (room[j] == most) {
          roomier.push_back(j);
        }
      }
      tied = std::move(roomier);
    }
    const std::size_t j = pick_tied(tied);
    assignment[e] = j;
    room[j] -= 1.0;
    for (std::size_t l : labels_of[e]) {
      demand[l][j] -= 1.0;
      --remaining[l];
    }
  };

  while (true) {
    // Rarest label with examples still unassigned; ties resolved by seeded draw.
    std::vector<std::size_t> tied;
    std::size_t fewest = std::numeric_limits<std::size_t>::max();
    for (std::size_t l = 0; l < n_labels; ++l) {
      if (remaining[l] == 0) continue;
      if (remaining[l] < fewest) {
        fewest = remaining[l];
        tied.assign(1, l);
      } else if (remaining[l] == fewest) {
        tied.push_back(l);
      }
    }
    if (tied.empty()) break;
    const std::size_t label = pick_tied(tied);
    for (std::size_t e : examples_of[label]) {
      if (assignment[e] == kSubsets) place(e, label, /*use_demand=*/true);
    }
  }

  // Reports mentioning nothing carry no stratification signal; spread them by
  // remaining overall demand.
  for (std::size_t e = 0; e < n; ++e) {
    if (assignment[e] == kSubsets) place(e, 0, /*use_demand=*/false);
  }

  // Fixup to the exact quotas. counts[l][j] tracks the label spread; each move
  // takes the example whose relocation adds the least label imbalance,
  // breaking ties by dataset position.
  std::array<long, 3> sizes{};
  for (std::size_t e = 0; e < n; ++e) ++sizes[assignment[e]];
  std::vector<std::array<long, 3>> counts(n_labels, {0, 0, 0});
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t l : labels_of[e]) ++counts[l][assignment[e]];
  }

  auto imbalance_delta = [&](std::size_t e, std::size_t from, std::size_t to) {
    double delta = 0;
    for (std::size_t l : labels_of[e]) {
      const double target_from = fractions[from] * static_cast<double>(examples_of[l].size());
      const double target_to = fractions[to] * static_cast<double>(examples_of[l].size());
      const double cf = static_cast<double>(counts[l][from]);
      const double ct = static_cast<double>(counts[l][to]);
      delta += std::abs(cf - 1.0 - target_from) - std::abs(cf - target_from);
      delta += std::abs(ct + 1.0 - target_to) - std::abs(ct - target_to);
    }
    return delta;
  };

  auto move_example = [&](std::size_t e, std::size_t from, std::size_t to) {
    assignment[e] = to;
    --sizes[from];
    ++sizes[to];
    for (std::size_t l : labels_of[e]) {
      --counts[l][from];
      ++counts[l][to];
    }
  };

  while (true) {
    std::size_t over = kSubsets, under = kSubsets;
    long worst_over = 0, worst_under = 0;
    for (std::size_t j = 0; j < kSubsets; ++j) {
      const long excess = sizes[j] - static_cast<long>(quotas[j]);
      if (excess > worst_over) {
        worst_over = excess;
        over = j;
      }
      if (-excess > worst_under) {
        worst_under = -excess;
        under = j;
      }
    }
    if (over == kSubsets) break;

    std::size_t best_e = n;
    double best_delta = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < n; ++e) {
      if (assignment[e] != over) continue;
      const double delta = imbalance_delta(e, over, under);
      if (delta < best_delta) {
        best_delta = delta;
        best_e = e;
      }
    }
    move_example(best_e, over, under);
  }

  // Swap-rebalance: the greedy pass can leave a label lopsided when its
  // examples ride along with other labels' batches. While some label sits more
  // than half an example away from its per-subset target, look for a
  // size-preserving swap that shrinks total imbalance: a carrier of the label
  // leaves the crowded subset, a non-carrier comes back. Violations are
  // visited worst-first; the carrier side is beam-searched. Total imbalance
  // strictly decreases with every applied swap, so the loop terminates
  // (iteration cap as a backstop).
  struct Violation {
    double dev;
    std::size_t label;
    std::size_t over;
    std::size_t under;
  };

  auto collect_violations = [&] {
    std::vector<Violation> violations;
    for (std::size_t l = 0; l < n_labels; ++l) {
      const double support = static_cast<double>(examples_of[l].size());
      double high = -std::numeric_limits<double>::infinity();
      double low = std::numeric_limits<double>::infinity();
      std::size_t high_j = 0, low_j = 0;
      for (std::size_t j = 0; j < kSubsets; ++j) {
        const double gap = static_cast<double>(counts[l][j]) - fractions[j] * support;
        if (gap > high) {
          high = gap;
          high_j = j;
        }
        if (gap < low) {
          low = gap;
          low_j = j;
        }
      }
      const double dev = std::min(high, -low);
      if (dev > 0.5) violations.push_back({dev, l, high_j, low_j});
    }
    std::stable_sort(violations.begin(), violations.end(),
                     [](const Violation& a, const Violation& b) { return a.dev > b.dev; });
    return violations;
  };

  constexpr std::size_t kBeam = 8;
  for (std::size_t iteration = 0; iteration < 2 * n; ++iteration) {
    bool applied = false;
    for (const Violation& violation : collect_violations()) {
      // Carrier candidates leaving the crowded subset, best deltas first.
      std::vector<std::pair<double, std::size_t>> outs;
      for (std::size_t e : examples_of[violation.label]) {
        if (assignment[e] != violation.over) continue;
        outs.emplace_back(imbalance_delta(e, violation.over, violation.under), e);
      }
      std::stable_sort(outs.begin(), outs.end());
      if (outs.size() > kBeam) outs.resize(kBeam);

      double best_total = -1e-9;  // require a strict improvement
      std::size_t best_out = n, best_back = n;
      for (const auto& [out_delta, out_e] : outs) {
        move_example(out_e, violation.over, violation.under);
        for (std::size_t e = 0; e < n; ++e) {
          if (assignment[e] != violation.under || e == out_e) continue;
          if (dataset[e].labels.at(findings[violation.label]) != kCodeNotMentioned) continue;
          const double total = out_delta + imbalance_delta(e, violation.under, violation.over);
          if (total < best_total) {
            best_total = total;
            best_out = out_e;
            best_back = e;
          }
        }
        move_example(out_e, violation.under, violation.over);  // undo the probe
      }
      if (best_out != n) {
        move_example(best_out, violation.over, violation.under);
        move_example(best_back, violation.under, violation.over);
        applied = true;
        break;
      }
    }
    if (!applied) break;
  }
  return assignment;
}

}  // namespace

std::string to_string(Subset subset) {
  switch (subset) {
    case Subset::Train: return "train";
    case Subset::Dev: return "dev";
    case Subset::Test: return "test";
  }
  return "?";
}

std::optional<Subset> subset_from_string(const std::string& name) {
  if (name == "train") return Subset::Train;
  if (name == "dev") return Subset::Dev;
  if (name == "test") return Subset::Test;
  return std::nullopt;
}

SplitAssignment stratified_split(const std::vector<AnnotatedReport>& dataset,
                                 const TaxonomySpec& taxonomy,
                                 const std::array<double, 3>& fractions, std::uint64_t seed,
                                 std::optional<std::size_t> dev_count) {
  if (dataset.empty()) throw DataError("cannot split an empty dataset");
  check_fractions(fractions);

  const std::size_t n = dataset.size();
  std::array<std::size_t, 3> quotas{};
  if (dev_count) {
    if (*dev_count > n) throw DataError("dev_count exceeds the dataset size");
    const std::size_t rest = n - *dev_count;
    const double train_test = fractions[0] + fractions[2];
    if (rest > 0 && train_test <= 0) {
      throw DataError("dev_count targeting needs nonzero train or test fractions");
    }
    quotas[0] = rest == 0 ? 0
                          : static_cast<std::size_t>(std::llround(
                                static_cast<double>(rest) * fractions[0] / train_test));
    quotas[1] = *dev_count;
    quotas[2] = rest - quotas[0];
  } else {
    quotas = quotas_from_fractions(fractions, n);
  }
  // Demand guidance follows the actual quotas.
  const std::array<double, 3> effective{
      static_cast<double>(quotas[0]) / static_cast<double>(n),
      static_cast<double>(quotas[1]) / static_cast<double>(n),
      static_cast<double>(quotas[2]) / static_cast<double>(n)};
  const auto assignment = stratify(dataset, taxonomy, quotas, effective, seed);

  SplitAssignment split;
  split.fractions = fractions;
  split.seed = seed;
  split.dev_count = dev_count;
  static constexpr std::array<Subset, 3> kOrder{Subset::Train, Subset::Dev, Subset::Test};
  for (std::size_t e = 0; e < dataset.size(); ++e) {
    const auto [it, inserted] =
        split.assignment.emplace(dataset[e].report.id, kOrder[assignment[e]]);
    if (!inserted) throw DataError("duplicate report id '" + dataset[e].report.id + "'");
  }
  return split;
}

std::vector<AnnotatedReport> subsample(const std::vector<AnnotatedReport>& train,
                                       const TaxonomySpec& taxonomy, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) throw DataError("subsample fraction outside (0, 1]");
  if (train.empty()) throw DataError("cannot subsample an empty set");

  const std::size_t n = train.size();
  const auto target =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
  const std::size_t kept = std::min(std::max<std::size_t>(target, 1), n);

  const std::array<std::size_t, 3> quotas{kept, n - kept, 0};
  const std::array<double, 3> effective{
      static_cast<double>(kept) / static_cast<double>(n),
      static_cast<double>(n - kept) / static_cast<double>(n), 0.0};
  const auto assignment = stratify(train, taxonomy, quotas, effective, seed);

  std::vector<AnnotatedReport> out;
  out.reserve(kept);
  for (std::size_t e = 0; e < n; ++e) {
    if (assignment[e] == 0) out.push_back(train[e]);
  }
  return out;
}

std::vector<AnnotatedReport> select_subset(const std::vector<AnnotatedReport>& dataset,
                                           const SplitAssignment& split, Subset subset) {
  std::vector<AnnotatedReport> out;
  for (const auto& item : dataset) {
    const auto it = split.assignment.find(item.report.id);
    if (it == split.assignment.end()) {
      throw DataError("report id '" + item.report.id + "' missing from split manifest");
    }
    if (it->second == subset) out.push_back(item);
  }
  return out;
}

void save_manifest(const SplitAssignment& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  ordered_json header;
  header["fractions"] = split.fractions;
  header["seed"] = split.seed;
  header["n"] = split.assignment.size();
  if (split.dev_count) header["dev_count"] = *split.dev_count;
  out << header.dump() << "\n";
  for (const auto& [id, subset] : split.assignment) {
    ordered_json record;
    record["id"] = id;
    record["subset"] = to_string(subset);
    out << record.dump() << "\n";
  }
  if (!out) throw DataError("write failed for " + path.string());
}

SplitAssignment load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest " + path.string());
  SplitAssignment split;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (record.is_discarded() || !record.is_object()) {
      throw DataError(where + ": not a valid manifest record");
    }
    if (!have_header && record.contains("fractions")) {
      const auto& fr = record["fractions"];
      if (!fr.is_array() || fr.size() != 3) throw DataError(where + ": bad fractions");
      for (std::size_t j = 0; j < 3; ++j) split.fractions[j] = fr[j].get<double>();
      split.seed = record.value("seed", std::uint64_t{0});
      if (record.contains("dev_count")) {
        split.dev_count = record["dev_count"].get<std::size_t>();
      }
      have_header = true;
      continue;
    }
    if (!record.contains("id") || !record.contains("subset")) {
      throw DataError(where + ": manifest record needs id and subset");
    }
    const auto subset = subset_from_string(record["subset"].get<std::string>());
    if (!subset) throw DataError(where + ": unknown subset name");
    if (!split.assignment.emplace(record["id"].get<std::string>(), *subset).second) {
      throw DataError(where + ": duplicate id in manifest");
    }
  }
  if (split.assignment.empty()) throw DataError(path.string() + ": empty manifest");
  return split;
}

}  // namespace radlabel
