#include "radlabel/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "radlabel/errors.hpp"

namespace radlabel {

namespace {

using nlohmann::ordered_json;

// Gold/prediction label pairs aligned by report id, in gold order.
struct Aligned {
  std::vector<const LabelMap*> pred;
  std::vector<const LabelMap*> gold;
};

Aligned align(const std::vector<PredictedReport>& preds,
              const std::vector<AnnotatedReport>& golds) {
  if (preds.size() != golds.size()) {
    throw DataError("prediction/gold size mismatch: " + std::to_string(preds.size()) + " vs " +
                    std::to_string(golds.size()));
  }
  std::unordered_map<std::string, const PredictedReport*> by_id;
  by_id.reserve(preds.size());
  for (const auto& pred : preds) {
    if (!by_id.emplace(pred.id, &pred).second) {
      throw DataError("duplicate prediction id '" + pred.id + "'");
    }
  }
  Aligned aligned;
  aligned.pred.reserve(golds.size());
  aligned.gold.reserve(golds.size());
  for (const auto& gold : golds) {
    const auto it = by_id.find(gold.report.id);
    if (it == by_id.end()) {
      throw DataError("no prediction for report id '" + gold.report.id + "'");
    }
    aligned.pred.push_back(&it->second->labels);
    aligned.gold.push_back(&gold.labels);
  }
  return aligned;
}

Counts cell_counts(const Aligned& aligned, const std::string& finding, int class_code) {
  Counts counts;
  for (std::size_t i = 0; i < aligned.gold.size(); ++i) {
    const int gold = aligned.gold[i]->at(finding);
    const int pred = aligned.pred[i]->at(finding);
    if (pred == class_code && gold == class_code) ++counts.tp;
    else if (pred == class_code) ++counts.fp;
    else if (gold == class_code) ++counts.fn;
  }
  return counts;
}

}  // namespace

Counts confusion(const std::vector<PredictedReport>& preds,
                 const std::vector<AnnotatedReport>& golds, const std::string& finding,
                 int class_code) {
  return cell_counts(align(preds, golds), finding, class_code);
}

std::optional<double> f1_from_counts(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw DataError("negative confusion counts");
  const long denom = 2 * tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::optional<double> macro_f1_opt(const std::vector<PredictedReport>& preds,
                                   const std::vector<AnnotatedReport>& golds,
                                   const TaxonomySpec& taxonomy, MentionClass cls) {
  if (!taxonomy.has_class(cls)) {
    throw DataError("class " + to_string(cls) + " not in taxonomy");
  }
  const Aligned aligned = align(preds, golds);
  const int code = code_for(cls);
  double sum = 0.0;
  long defined = 0;
  for (const auto& finding : taxonomy.findings()) {
    const Counts counts = cell_counts(aligned, finding, code);
    if (const auto f1 = f1_from_counts(counts.tp, counts.fp, counts.fn)) {
      sum += *f1;
      ++defined;
    }
  }
  if (defined == 0) return std::nullopt;
  return sum / static_cast<double>(defined);
}

double macro_f1(const std::vector<PredictedReport>& preds,
                const std::vector<AnnotatedReport>& golds, const TaxonomySpec& taxonomy,
                MentionClass cls) {
  const auto value = macro_f1_opt(preds, golds, taxonomy, cls);
  if (!value) throw DataError("macro F1 undefined: no finding has a defined F1");
  return *value;
}

std::optional<double> weighted_f1_opt(const std::vector<PredictedReport>& preds,
                                      const std::vector<AnnotatedReport>& golds,
                                      const TaxonomySpec& taxonomy) {
  const Aligned aligned = align(preds, golds);
  double weighted_sum = 0.0;
  long total_support = 0;
  for (const auto& finding : taxonomy.findings()) {
    for (MentionClass cls : taxonomy.mention_classes()) {
      const Counts counts = cell_counts(aligned, finding, code_for(cls));
      const auto f1 = f1_from_counts(counts.tp, counts.fp, counts.fn);
      if (!f1) continue;
      const long support = counts.tp + counts.fn;
      weighted_sum += static_cast<double>(support) * (*f1);
      total_support += support;
    }
  }
  if (total_support == 0) return std::nullopt;
  return weighted_sum / static_cast<double>(total_support);
}

double weighted_f1(const std::vector<PredictedReport>& preds,
                   const std::vector<AnnotatedReport>& golds, const TaxonomySpec& taxonomy) {
  const auto value = weighted_f1_opt(preds, golds, taxonomy);
  if (!value) throw DataError("weighted F1 undefined: total support is zero");
  return *value;
}

double invalid_rate(const std::vector<PredictedReport>& preds) {
  if (preds.empty()) throw DataError("invalid rate of an empty prediction list");
  long invalid = 0;
  for (const auto& pred : preds) {
    if (!pred.valid) ++invalid;
  }
  return static_cast<double>(invalid) / static_cast<double>(preds.size());
}

MismatchResult count_mismatches(const std::vector<PredictedReport>& preds,
                                const std::vector<AnnotatedReport>& golds,
                                const TaxonomySpec& taxonomy) {
  const Aligned aligned = align(preds, golds);
  MismatchResult result;
  for (std::size_t i = 0; i < aligned.gold.size(); ++i) {
    for (const auto& finding : taxonomy.findings()) {
      if (aligned.gold[i]->at(finding) != aligned.pred[i]->at(finding)) ++result.count;
    }
  }
  const auto cells =
      static_cast<double>(aligned.gold.size()) * static_cast<double>(taxonomy.findings().size());
  result.rate = cells == 0 ? 0.0 : static_cast<double>(result.count) / cells;
  return result;
}

EvalReport evaluate(const std::vector<PredictedReport>& preds,
                    const std::vector<AnnotatedReport>& golds, const TaxonomySpec& taxonomy) {
  const Aligned aligned = align(preds, golds);

  EvalReport report;
  report.findings = taxonomy.findings();
  report.n_reports = static_cast<long>(golds.size());

  for (const auto& finding : taxonomy.findings()) {
    auto& per_class = report.per_finding[finding];
    for (MentionClass cls : taxonomy.mention_classes()) {
      const int code = code_for(cls);
      const Counts counts = cell_counts(aligned, finding, code);
      ClassScore score;
      score.tp = counts.tp;
      score.fp = counts.fp;
      score.fn = counts.fn;
      score.support = counts.tp + counts.fn;
      if (const auto f1 = f1_from_counts(counts.tp, counts.fp, counts.fn)) {
        score.defined = true;
        score.f1 = *f1;
        score.precision = counts.tp + counts.fp == 0
                              ? 0.0
                              : static_cast<double>(counts.tp) /
                                    static_cast<double>(counts.tp + counts.fp);
        score.recall = score.support == 0 ? 0.0
                                          : static_cast<double>(counts.tp) /
                                                static_cast<double>(score.support);
      }
      per_class[code] = score;
    }
  }

  report.macro_pos_f1 = macro_f1_opt(preds, golds, taxonomy, MentionClass::Positive);
  report.negative_in_taxonomy = taxonomy.has_class(MentionClass::Negative);
  if (report.negative_in_taxonomy) {
    report.macro_neg_f1 = macro_f1_opt(preds, golds, taxonomy, MentionClass::Negative);
  }
  report.weighted_f1 = weighted_f1_opt(preds, golds, taxonomy);
  report.invalid_rate = invalid_rate(preds);
  const MismatchResult mismatches = count_mismatches(preds, golds, taxonomy);
  report.mismatches = mismatches.count;
  report.mismatch_rate = mismatches.rate;
  report.notes.push_back("zero-support finding/class cells are excluded from averages");
  report.notes.push_back("weighted F1 weights finding x mention-class cells; not-mentioned is excluded");
  return report;
}

namespace {

ordered_json json_or_null(const std::optional<double>& value) {
  if (value) return *value;
  return nullptr;
}

}  // namespace

void save_eval_report(const EvalReport& report, const std::filesystem::path& jsonl_path,
                      const std::filesystem::path& table_path) {
  std::ofstream out(jsonl_path, std::ios::binary);
  if (!out) throw DataError("cannot write eval report " + jsonl_path.string());
  for (const auto& finding : report.findings) {
    for (const auto& [code, score] : report.per_finding.at(finding)) {
      ordered_json line;
      line["finding"] = finding;
      line["class"] = code;
      line["precision"] = score.precision;
      line["recall"] = score.recall;
      line["f1"] = score.f1;
      line["support"] = score.support;
      line["tp"] = score.tp;
      line["fp"] = score.fp;
      line["fn"] = score.fn;
      line["defined"] = score.defined;
      out << line.dump() << "\n";
    }
  }
  ordered_json summary;
  summary["summary"] = true;
  summary["macro_pos_f1"] = json_or_null(report.macro_pos_f1);
  summary["macro_neg_f1"] = json_or_null(report.macro_neg_f1);
  summary["negative_in_taxonomy"] = report.negative_in_taxonomy;
  summary["weighted_f1"] = json_or_null(report.weighted_f1);
  summary["invalid_rate"] = report.invalid_rate;
  summary["n_reports"] = report.n_reports;
  summary["mismatches"] = report.mismatches;
  summary["mismatch_rate"] = report.mismatch_rate;
  summary["notes"] = report.notes;
  out << summary.dump() << "\n";
  if (!out) throw DataError("write failed for " + jsonl_path.string());

  std::ofstream table(table_path, std::ios::binary);
  if (!table) throw DataError("cannot write eval table " + table_path.string());
  table << format_eval_table(report);
}

std::string format_eval_table(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);

  std::size_t width = 7;
  for (const auto& finding : report.findings) width = std::max(width, finding.size());

  out << std::left << std::setw(static_cast<int>(width) + 2) << "finding"
      << std::right << std::setw(6) << "class" << std::setw(11) << "precision" << std::setw(9)
      << "recall" << std::setw(9) << "f1" << std::setw(9) << "support" << "\n";
  for (const auto& finding : report.findings) {
    for (const auto& [code, score] : report.per_finding.at(finding)) {
      out << std::left << std::setw(static_cast<int>(width) + 2) << finding << std::right
          << std::setw(6) << code;
      if (score.defined) {
        out << std::setw(11) << score.precision << std::setw(9) << score.recall << std::setw(9)
            << score.f1;
      } else {
        out << std::setw(11) << "-" << std::setw(9) << "-" << std::setw(9) << "-";
      }
      out << std::setw(9) << score.support << "\n";
    }
  }

  auto print_opt = [&](const char* name, const std::optional<double>& value) {
    out << name << ": ";
    if (value) out << *value;
    else out << "undefined";
    out << "\n";
  };
  out << "\n";
  print_opt("macro (+)F1", report.macro_pos_f1);
  if (report.negative_in_taxonomy) print_opt("macro (-)F1", report.macro_neg_f1);
  print_opt("weighted F1", report.weighted_f1);
  out << "invalid rate: " << report.invalid_rate << "\n";
  out << "reports: " << report.n_reports << "\n";
  out << "mismatches: " << report.mismatches << " (rate " << report.mismatch_rate << ")\n";
  return out.str();
}

}  // namespace radlabel
