#include "radlabel/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "radlabel/errors.hpp"

namespace radlabel {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

bool valid_language_tag(const std::string& tag) {
  return tag.size() == 2 && std::islower(static_cast<unsigned char>(tag[0])) &&
         std::islower(static_cast<unsigned char>(tag[1]));
}

void check_report_fields(const Report& report, const std::string& where) {
  if (report.id.empty()) throw DataError(where + ": empty report id");
  if (!valid_language_tag(report.language)) {
    throw DataError(where + ": language must be a two-letter tag, got '" + report.language + "'");
  }
  if (report.text.empty()) throw DataError(where + ": empty report text");
}

LabelMap complete_labels(const TaxonomySpec& taxonomy, LabelMap labels, const std::string& where) {
  for (const auto& finding : taxonomy.findings()) {
    labels.emplace(finding, kCodeNotMentioned);
  }
  check_labels(taxonomy, labels, where);
  return labels;
}

std::vector<AnnotatedReport> load_jsonl(const std::filesystem::path& path,
                                        const TaxonomySpec& taxonomy) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset file " + path.string());

  std::vector<AnnotatedReport> out;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = at_line(path, line_no);
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw DataError(where + ": not a valid record object");
    }
    for (const char* field : {"id", "language", "text"}) {
      if (!record.contains(field) || !record[field].is_string()) {
        throw DataError(where + ": missing string field '" + std::string(field) + "'");
      }
    }
    if (!record.contains("labels") || !record["labels"].is_object()) {
      throw DataError(where + ": missing object field 'labels'");
    }

    AnnotatedReport item;
    item.report.id = record["id"].get<std::string>();
    item.report.language = record["language"].get<std::string>();
    item.report.text = record["text"].get<std::string>();
    item.report.source = taxonomy.dataset_id();
    check_report_fields(item.report, where);
    if (!seen_ids.insert(item.report.id).second) {
      throw DataError(where + ": duplicate report id '" + item.report.id + "'");
    }

    for (const auto& [raw_key, value] : record["labels"].items()) {
      const std::string key = normalize_finding(raw_key);
      if (!taxonomy.has_finding(key)) {
        throw DataError(where + ": unknown finding key '" + raw_key + "'");
      }
      if (!value.is_number_integer()) {
        throw DataError(where + ": label '" + raw_key + "' is not an integer");
      }
      const int code = value.get<int>();
      if (!taxonomy.code_allowed(code)) {
        throw DataError(where + ": code " + std::to_string(code) + " not allowed (finding '" +
                        key + "')");
      }
      item.labels[key] = code;
    }
    item.labels = complete_labels(taxonomy, std::move(item.labels), where);
    out.push_back(std::move(item));
  }
  return out;
}

// One table row, plus the 1-based line where the record started.
struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
};

// RFC-4180-style reader: quoted fields may contain the delimiter, doubled
// quotes and embedded newlines.
std::vector<CsvRow> read_delimited(const std::filesystem::path& path, char delim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset file " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<CsvRow> rows;
  CsvRow row;
  row.line_no = 1;
  std::string field;
  bool in_quotes = false;
  bool row_has_data = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.fields.push_back(field);
    field.clear();
  };
  auto end_row = [&] {
    if (row_has_data || !row.fields.empty() || !field.empty()) {
      end_field();
      rows.push_back(std::move(row));
    }
    row = CsvRow{};
    row.line_no = line;
    row_has_data = false;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (c == '\n') ++line;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      row_has_data = true;
    } else if (c == delim) {
      end_field();
      row_has_data = true;
    } else if (c == '\n') {
      end_row();
      row.line_no = line;
    } else if (c != '\r') {
      field.push_back(c);
      row_has_data = true;
    }
  }
  if (in_quotes) throw DataError(path.string() + ": unterminated quoted field");
  end_row();
  return rows;
}

int parse_label_cell(const std::string& cell, const std::string& where, const std::string& key) {
  std::size_t pos = 0;
  int value = 0;
  try {
    value = std::stoi(cell, &pos);
  } catch (const std::exception&) {
    throw DataError(where + ": label '" + key + "' is not an integer ('" + cell + "')");
  }
  if (pos != cell.size()) {
    throw DataError(where + ": label '" + key + "' is not an integer ('" + cell + "')");
  }
  return value;
}

std::vector<AnnotatedReport> load_table(const std::filesystem::path& path,
                                        const TaxonomySpec& taxonomy, char delim) {
  const std::vector<CsvRow> rows = read_delimited(path, delim);
  if (rows.empty()) return {};

  const CsvRow& header = rows.front();
  std::vector<std::string> columns;
  columns.reserve(header.fields.size());
  int id_col = -1, lang_col = -1, text_col = -1;
  for (std::size_t c = 0; c < header.fields.size(); ++c) {
    const std::string name = normalize_finding(header.fields[c]);
    if (name == "id") id_col = static_cast<int>(c);
    else if (name == "language") lang_col = static_cast<int>(c);
    else if (name == "text") text_col = static_cast<int>(c);
    else if (!taxonomy.has_finding(name)) {
      throw DataError(at_line(path, header.line_no) + ": unknown finding key '" +
                      header.fields[c] + "'");
    }
    columns.push_back(name);
  }
  if (id_col < 0 || lang_col < 0 || text_col < 0) {
    throw DataError(path.string() + ": table needs id, language and text columns");
  }

  std::vector<AnnotatedReport> out;
  std::set<std::string> seen_ids;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    const std::string where = at_line(path, row.line_no);
    if (row.fields.size() != columns.size()) {
      throw DataError(where + ": expected " + std::to_string(columns.size()) + " fields, got " +
                      std::to_string(row.fields.size()));
    }
    AnnotatedReport item;
    item.report.id = row.fields[static_cast<std::size_t>(id_col)];
    item.report.language = row.fields[static_cast<std::size_t>(lang_col)];
    item.report.text = row.fields[static_cast<std::size_t>(text_col)];
    item.report.source = taxonomy.dataset_id();
    check_report_fields(item.report, where);
    if (!seen_ids.insert(item.report.id).second) {
      throw DataError(where + ": duplicate report id '" + item.report.id + "'");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const int ci = static_cast<int>(c);
      if (ci == id_col || ci == lang_col || ci == text_col) continue;
      const std::string& cell = row.fields[c];
      if (cell.empty()) continue;  // blank cell means not mentioned
      const int code = parse_label_cell(cell, where, columns[c]);
      if (!taxonomy.code_allowed(code)) {
        throw DataError(where + ": code " + std::to_string(code) + " not allowed (finding '" +
                        columns[c] + "')");
      }
      item.labels[columns[c]] = code;
    }
    item.labels = complete_labels(taxonomy, std::move(item.labels), where);
    out.push_back(std::move(item));
  }
  return out;
}

enum class FileFormat { Jsonl, Csv, Tsv };

FileFormat detect_format(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return FileFormat::Jsonl;
  if (ext == ".csv") return FileFormat::Csv;
  if (ext == ".tsv") return FileFormat::Tsv;
  // Sniff: a record file starts with '{'.
  std::ifstream in(path);
  if (!in) throw DataError("cannot read dataset file " + path.string());
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) break;
  }
  return c == '{' ? FileFormat::Jsonl : FileFormat::Csv;
}

}  // namespace

std::vector<AnnotatedReport> load_dataset(const std::filesystem::path& path,
                                          const TaxonomySpec& taxonomy) {
  switch (detect_format(path)) {
    case FileFormat::Jsonl: return load_jsonl(path, taxonomy);
    case FileFormat::Csv: return load_table(path, taxonomy, ',');
    case FileFormat::Tsv: return load_table(path, taxonomy, '\t');
  }
  throw DataError("unreachable");
}

void save_dataset(const std::vector<AnnotatedReport>& dataset, const TaxonomySpec& taxonomy,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  for (const auto& item : dataset) {
    check_labels(taxonomy, item.labels, item.report.id);
    ordered_json record;
    record["id"] = item.report.id;
    record["language"] = item.report.language;
    record["text"] = item.report.text;
    ordered_json labels;
    for (const auto& finding : taxonomy.findings()) labels[finding] = item.labels.at(finding);
    record["labels"] = std::move(labels);
    out << record.dump() << "\n";
  }
  if (!out) throw DataError("write failed for " + path.string());
}

int map_certainty(int score) {
  if (score < 1 || score > 5) {
    throw DataError("certainty score " + std::to_string(score) + " outside 1..5");
  }
  return score >= 4 ? kCodePositive : kCodeUncertain;
}

std::map<std::string, long> finding_supports(const std::vector<AnnotatedReport>& dataset,
                                             const TaxonomySpec& taxonomy) {
  std::map<std::string, long> supports;
  for (const auto& finding : taxonomy.findings()) supports[finding] = 0;
  for (const auto& item : dataset) {
    check_labels(taxonomy, item.labels, item.report.id);
    for (const auto& [finding, code] : item.labels) {
      if (code != kCodeNotMentioned) ++supports[finding];
    }
  }
  return supports;
}

namespace {

FilterResult keep_findings(const std::vector<AnnotatedReport>& dataset,
                           const TaxonomySpec& taxonomy,
                           const std::vector<std::string>& kept) {
  if (kept.empty()) throw DataError("finding filter would drop every finding");
  TaxonomySpec filtered(taxonomy.dataset_id(), kept, taxonomy.mention_classes());
  std::vector<AnnotatedReport> out;
  out.reserve(dataset.size());
  for (const auto& item : dataset) {
    AnnotatedReport pruned;
    pruned.report = item.report;
    for (const auto& finding : kept) pruned.labels[finding] = item.labels.at(finding);
    out.push_back(std::move(pruned));
  }
  return {std::move(filtered), std::move(out)};
}

}  // namespace

FilterResult filter_findings_by_support(const std::vector<AnnotatedReport>& dataset,
                                        const TaxonomySpec& taxonomy, long min_count) {
  return filter_findings_by_support(dataset, taxonomy, min_count,
                                    finding_supports(dataset, taxonomy));
}

FilterResult filter_findings_by_support(const std::vector<AnnotatedReport>& dataset,
                                        const TaxonomySpec& taxonomy, long min_count,
                                        const std::map<std::string, long>& supports) {
  if (min_count < 1) throw DataError("min_count must be >= 1");
  std::vector<std::string> kept;
  for (const auto& finding : taxonomy.findings()) {
    const auto it = supports.find(finding);
    const long support = it == supports.end() ? 0 : it->second;
    if (support >= min_count) kept.push_back(finding);
  }
  return keep_findings(dataset, taxonomy, kept);
}

FilterResult top_k_findings(const std::vector<AnnotatedReport>& dataset,
                            const TaxonomySpec& taxonomy, std::size_t k) {
  return top_k_findings(dataset, taxonomy, k, finding_supports(dataset, taxonomy));
}

FilterResult top_k_findings(const std::vector<AnnotatedReport>& dataset,
                            const TaxonomySpec& taxonomy, std::size_t k,
                            const std::map<std::string, long>& supports) {
  const auto& findings = taxonomy.findings();
  if (k < 1 || k > findings.size()) {
    throw DataError("k=" + std::to_string(k) + " out of range 1.." +
                    std::to_string(findings.size()));
  }
  // Sort positions by support (desc); equal supports keep taxonomy order.
  std::vector<std::size_t> order(findings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const long sa = supports.count(findings[a]) ? supports.at(findings[a]) : 0;
    const long sb = supports.count(findings[b]) ? supports.at(findings[b]) : 0;
    return sa > sb;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());  // restore taxonomy order among the kept
  std::vector<std::string> kept;
  kept.reserve(k);
  for (std::size_t pos : order) kept.push_back(findings[pos]);
  return keep_findings(dataset, taxonomy, kept);
}

}  // namespace radlabel
