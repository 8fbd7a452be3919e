#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "radlabel/taxonomy.hpp"

namespace radlabel {

// A full prediction vector aligned to a gold report by id.
struct PredictedReport {
  std::string id;
  LabelMap labels;
  bool valid = true;
};

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

// One-vs-rest confusion counts for (finding, class_code). Throws DataError
// when the prediction and gold id sets differ.
Counts confusion(const std::vector<PredictedReport>& preds,
                 const std::vector<AnnotatedReport>& golds, const std::string& finding,
                 int class_code);

// 2tp / (2tp + fp + fn); empty when tp+fp+fn == 0 (excluded from averages).
std::optional<double> f1_from_counts(long tp, long fp, long fn);

// Unweighted mean of per-finding F1 for one mention class, over findings where
// F1 is defined. The _opt variant reports "no finding defined" as nullopt; the
// plain one throws.
std::optional<double> macro_f1_opt(const std::vector<PredictedReport>& preds,
                                   const std::vector<AnnotatedReport>& golds,
                                   const TaxonomySpec& taxonomy, MentionClass cls);
double macro_f1(const std::vector<PredictedReport>& preds,
                const std::vector<AnnotatedReport>& golds, const TaxonomySpec& taxonomy,
                MentionClass cls);

// Support-weighted mean of F1 over finding x mention-class cells (NotMentioned
// excluded), skipping undefined cells. Throws when total support is zero.
std::optional<double> weighted_f1_opt(const std::vector<PredictedReport>& preds,
                                      const std::vector<AnnotatedReport>& golds,
                                      const TaxonomySpec& taxonomy);
double weighted_f1(const std::vector<PredictedReport>& preds,
                   const std::vector<AnnotatedReport>& golds, const TaxonomySpec& taxonomy);

// Share of predictions with valid == false. Throws on an empty list.
double invalid_rate(const std::vector<PredictedReport>& preds);

struct MismatchResult {
  long count = 0;
  double rate = 0.0;  // count / (n_reports * n_findings)
};

MismatchResult count_mismatches(const std::vector<PredictedReport>& preds,
                                const std::vector<AnnotatedReport>& golds,
                                const TaxonomySpec& taxonomy);

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;  // gold occurrences of the class for this finding
  long tp = 0;
  long fp = 0;
  long fn = 0;
  bool defined = false;  // tp+fp+fn > 0
};

struct EvalReport {
  std::vector<std::string> findings;                             // taxonomy order
  std::map<std::string, std::map<int, ClassScore>> per_finding;  // finding -> class code
  std::optional<double> macro_pos_f1;
  std::optional<double> macro_neg_f1;  // only when Negative is in the taxonomy
  bool negative_in_taxonomy = false;
  std::optional<double> weighted_f1;
  double invalid_rate = 0.0;
  long n_reports = 0;
  long mismatches = 0;
  double mismatch_rate = 0.0;
  std::vector<std::string> notes;
};

EvalReport evaluate(const std::vector<PredictedReport>& preds,
                    const std::vector<AnnotatedReport>& golds, const TaxonomySpec& taxonomy);

// Machine-readable line records plus a human-readable table.
void save_eval_report(const EvalReport& report, const std::filesystem::path& jsonl_path,
                      const std::filesystem::path& table_path);
std::string format_eval_table(const EvalReport& report);

}  // namespace radlabel
