#include "radlabel/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "radlabel/corpus.hpp"
#include "radlabel/errors.hpp"
#include "radlabel/extractor.hpp"
#include "radlabel/promptgen.hpp"

namespace radlabel {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct PreparedData {
  TaxonomySpec taxonomy;
  std::vector<AnnotatedReport> dataset;
};

std::map<std::string, long> scoped_supports(const RunConfig& config,
                                            const std::vector<AnnotatedReport>& dataset,
                                            const TaxonomySpec& taxonomy,
                                            const SplitAssignment* split) {
  if (config.filter.support_scope == "train") {
    if (!split) {
      throw ConfigError("finding filter with support_scope=train needs a split manifest");
    }
    return finding_supports(select_subset(dataset, *split, Subset::Train), taxonomy);
  }
  return finding_supports(dataset, taxonomy);
}

// Loads the dataset and applies the configured finding filters.
PreparedData prepare(const RunConfig& config, const DatasetConfig& ds,
                     const SplitAssignment* split) {
  std::vector<AnnotatedReport> dataset = load_dataset(config.resolve(ds.path), ds.taxonomy);
  TaxonomySpec taxonomy = ds.taxonomy;
  if (config.filter.min_support) {
    auto supports = scoped_supports(config, dataset, taxonomy, split);
    FilterResult filtered =
        filter_findings_by_support(dataset, taxonomy, *config.filter.min_support, supports);
    taxonomy = std::move(filtered.taxonomy);
    dataset = std::move(filtered.dataset);
  }
  if (config.filter.top_k) {
    auto supports = scoped_supports(config, dataset, taxonomy, split);
    FilterResult filtered = top_k_findings(dataset, taxonomy, *config.filter.top_k, supports);
    taxonomy = std::move(filtered.taxonomy);
    dataset = std::move(filtered.dataset);
  }
  return {std::move(taxonomy), std::move(dataset)};
}

bool needs_manifest_for_filter(const RunConfig& config) {
  return (config.filter.min_support || config.filter.top_k) &&
         config.filter.support_scope == "train";
}

// Mock endpoint: canned generations come from a line-delimited file keyed by
// report id; the backend itself is keyed by target text.
std::unique_ptr<MockBackend> mock_from_file(const std::filesystem::path& path,
                                            const std::vector<AnnotatedReport>& dataset) {
  std::map<std::string, const Report*> by_id;
  for (const auto& item : dataset) by_id[item.report.id] = &item.report;

  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read mock answers file " + path.string());
  auto mock = std::make_unique<MockBackend>();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (record.is_discarded() || !record.is_object() || !record.contains("id")) {
      throw ConfigError(where + ": bad mock answer record");
    }
    const auto id = record["id"].get<std::string>();
    const auto report = by_id.find(id);
    if (report == by_id.end()) {
      throw ConfigError(where + ": mock answer for unknown report id '" + id + "'");
    }
    if (record.contains("error")) {
      mock->set_failure(report->second->text, record["error"].get<std::string>());
    } else if (record.contains("text")) {
      mock->set_answer(report->second->text, record["text"].get<std::string>());
    } else {
      throw ConfigError(where + ": mock answer needs 'text' or 'error'");
    }
  }
  return mock;
}

std::unique_ptr<ChatBackend> backend_from_config(const RunConfig& config,
                                                 const std::vector<AnnotatedReport>& dataset) {
  if (config.endpoint.kind == "mock") {
    if (config.endpoint.answers_path.empty()) {
      throw ConfigError("mock endpoint needs answers_path");
    }
    return mock_from_file(config.resolve(config.endpoint.answers_path), dataset);
  }
  EndpointConfig endpoint;
  endpoint.base_url = config.endpoint.base_url;
  endpoint.path = config.endpoint.path;
  endpoint.model = config.endpoint.model;
  endpoint.retry = config.endpoint.retry;
  endpoint.timeout = std::chrono::seconds(config.endpoint.timeout_s);
  if (const char* key = std::getenv(config.endpoint.api_key_env.c_str())) {
    endpoint.api_key = key;
  }
  return std::make_unique<HttpBackend>(std::move(endpoint));
}

SplitAssignment manifest_for(const RunConfig& config, const std::string& dataset_id,
                             const std::optional<std::filesystem::path>& override_path) {
  return load_manifest(override_path ? *override_path
                                     : config.default_manifest_path(dataset_id));
}

ordered_json labels_json(const LabelMap& labels, const TaxonomySpec& taxonomy) {
  ordered_json out;
  for (const auto& finding : taxonomy.findings()) out[finding] = labels.at(finding);
  return out;
}

ordered_json repairs_json(const std::vector<RepairNote>& repairs) {
  ordered_json out = ordered_json::array();
  for (const auto& note : repairs) out.push_back(to_string(note));
  return out;
}

}  // namespace

IngestSummary cmd_ingest(const RunConfig& config, const std::string& dataset_id) {
  const DatasetConfig& ds = config.dataset(dataset_id);
  const auto dataset = load_dataset(config.resolve(ds.path), ds.taxonomy);

  IngestSummary summary;
  summary.n_reports = static_cast<long>(dataset.size());
  double chars = 0;
  for (const auto& item : dataset) chars += static_cast<double>(item.report.text.size());
  summary.avg_chars = dataset.empty() ? 0.0 : chars / static_cast<double>(dataset.size());
  summary.supports = finding_supports(dataset, ds.taxonomy);
  return summary;
}

std::filesystem::path cmd_split(const RunConfig& config, const std::string& dataset_id,
                                const std::optional<std::filesystem::path>& out) {
  const DatasetConfig& ds = config.dataset(dataset_id);
  const auto dataset = load_dataset(config.resolve(ds.path), ds.taxonomy);
  const SplitAssignment split =
      stratified_split(dataset, ds.taxonomy, config.fractions, config.seed, config.dev_count);
  const std::filesystem::path path = out ? *out : config.default_manifest_path(ds.id);
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  save_manifest(split, path);
  return path;
}

ClassifyResult cmd_classify(const RunConfig& config, const std::string& dataset_id, Subset subset,
                            std::optional<int> shots_override, ChatBackend* backend,
                            const std::optional<std::filesystem::path>& manifest_path) {
  const auto started = std::chrono::steady_clock::now();
  const DatasetConfig& ds = config.dataset(dataset_id);
  const SplitAssignment split = manifest_for(config, ds.id, manifest_path);
  const PreparedData data = prepare(config, ds, &split);

  const auto targets = select_subset(data.dataset, split, subset);
  if (targets.empty()) {
    throw DataError("subset " + to_string(subset) + " of dataset '" + ds.id + "' is empty");
  }

  const int n_shots = shots_override.value_or(config.shots);
  const std::string instruction = build_instruction(data.taxonomy);
  std::vector<Shot> shots;
  if (n_shots > 0) {
    const auto train = select_subset(data.dataset, split, Subset::Train);
    shots = sample_shots(train, data.taxonomy, static_cast<std::size_t>(n_shots), config.seed,
                         config.shot_sampling);
  }

  std::vector<PromptBundle> bundles;
  bundles.reserve(targets.size());
  for (const auto& item : targets) {
    bundles.push_back(build_prompt(instruction, shots, item.report));
  }

  std::unique_ptr<ChatBackend> owned;
  if (backend == nullptr) {
    owned = backend_from_config(config, data.dataset);
    backend = owned.get();
  }
  const auto answers =
      backend->complete_batch(bundles, config.generation, config.endpoint.max_in_flight);

  const std::filesystem::path out_dir = config.resolve(config.output_dir);
  std::filesystem::create_directories(out_dir);
  const std::string stem =
      ds.id + "_" + to_string(subset) + "_shots" + std::to_string(n_shots);

  ClassifyResult result;
  result.predictions_path = out_dir / (stem + "_predictions.jsonl");
  result.run_log_path = out_dir / (stem + "_runlog.jsonl");
  result.n_reports = static_cast<long>(targets.size());

  std::ofstream predictions(result.predictions_path, std::ios::binary);
  std::ofstream run_log(result.run_log_path, std::ios::binary);
  if (!predictions || !run_log) {
    throw DataError("cannot write outputs under " + out_dir.string());
  }

  long invalid = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const ParsedPrediction parsed = parse_answer(answers[i], data.taxonomy);
    if (!parsed.valid) ++invalid;
    if (answers[i].finished_by == FinishReason::Error) ++result.backend_errors;

    ordered_json line;
    line["id"] = targets[i].report.id;
    line["labels"] = labels_json(parsed.labels, data.taxonomy);
    line["valid"] = parsed.valid;
    line["repairs"] = repairs_json(parsed.repairs);
    line["finished_by"] = to_string(answers[i].finished_by);
    predictions << line.dump() << "\n";

    ordered_json log_line;
    log_line["id"] = targets[i].report.id;
    log_line["valid"] = parsed.valid;
    log_line["repairs"] = repairs_json(parsed.repairs);
    log_line["finished_by"] = to_string(answers[i].finished_by);
    log_line["latency_ms"] = answers[i].latency.count();
    if (!answers[i].error.empty()) log_line["error"] = answers[i].error;
    run_log << log_line.dump() << "\n";
  }

  result.invalid_rate = static_cast<double>(invalid) / static_cast<double>(targets.size());
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                           .count();

  ordered_json summary;
  summary["summary"] = true;
  summary["n_reports"] = result.n_reports;
  summary["invalid_rate"] = result.invalid_rate;
  summary["backend_errors"] = result.backend_errors;
  summary["shots"] = n_shots;
  summary["max_tokens"] =
      effective_max_tokens(config.generation, bundles.empty() ? PromptBundle{} : bundles.front());
  summary["wall_time_s"] = result.wall_time_s;
  run_log << summary.dump() << "\n";
  return result;
}

EvalReport cmd_eval(const RunConfig& config, const std::string& dataset_id,
                    const std::filesystem::path& predictions_path, Subset subset,
                    EvalPaths* out_paths,
                    const std::optional<std::filesystem::path>& manifest_path) {
  const DatasetConfig& ds = config.dataset(dataset_id);
  const SplitAssignment split = manifest_for(config, ds.id, manifest_path);
  const PreparedData data = prepare(config, ds, &split);
  const auto golds = select_subset(data.dataset, split, subset);

  std::ifstream in(predictions_path);
  if (!in) throw DataError("cannot read predictions " + predictions_path.string());
  std::vector<PredictedReport> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    const std::string where = predictions_path.string() + ":" + std::to_string(line_no);
    if (record.is_discarded() || !record.is_object()) {
      throw DataError(where + ": bad prediction record");
    }
    if (record.contains("summary")) continue;
    if (!record.contains("id") || !record.contains("labels") || !record.contains("valid")) {
      throw DataError(where + ": prediction record needs id, labels and valid");
    }
    PredictedReport pred;
    pred.id = record["id"].get<std::string>();
    pred.valid = record["valid"].get<bool>();
    for (const auto& [key, value] : record["labels"].items()) {
      if (!value.is_number_integer()) throw DataError(where + ": non-integer label");
      pred.labels[normalize_finding(key)] = value.get<int>();
    }
    check_labels(data.taxonomy, pred.labels, where);
    preds.push_back(std::move(pred));
  }

  const EvalReport report = evaluate(preds, golds, data.taxonomy);

  EvalPaths paths;
  std::filesystem::path base = predictions_path;
  base.replace_extension();
  paths.jsonl = base.string() + "_eval.jsonl";
  paths.table = base.string() + "_eval.txt";
  save_eval_report(report, paths.jsonl, paths.table);
  if (out_paths) *out_paths = paths;
  return report;
}

AugmentResult cmd_augment(const RunConfig& config, const std::string& dataset_id,
                          const std::string& target_lang, std::optional<Subset> subset,
                          ChatBackend* backend,
                          const std::optional<std::filesystem::path>& manifest_path) {
  if (!language_name(target_lang)) {
    throw ConfigError("unsupported target language '" + target_lang + "'");
  }
  const DatasetConfig& ds = config.dataset(dataset_id);

  std::optional<SplitAssignment> split;
  if (subset || needs_manifest_for_filter(config)) {
    split = manifest_for(config, ds.id, manifest_path);
  }
  const PreparedData data = prepare(config, ds, split ? &*split : nullptr);
  const auto originals = subset ? select_subset(data.dataset, *split, *subset) : data.dataset;
  if (originals.empty()) throw DataError("nothing to translate");

  std::unique_ptr<ChatBackend> owned;
  if (backend == nullptr) {
    owned = backend_from_config(config, data.dataset);
    backend = owned.get();
  }

  std::vector<Report> sources;
  sources.reserve(originals.size());
  for (const auto& item : originals) sources.push_back(item.report);

  std::vector<std::string> errors;
  auto records = translate_batch(sources, target_lang, *backend, config.generation,
                                 config.endpoint.max_in_flight, &errors);
  const long cap = config.augment.max_tokens.value_or(config.generation.max_sequence_tokens);
  LengthFilterResult filtered = length_filter(records, cap);

  const AugmentMode mode = *augment_mode_from_string(config.augment.mode);
  const auto augmented = build_augmented_set(originals, filtered.kept, mode);

  const std::filesystem::path out_dir = config.resolve(config.output_dir);
  std::filesystem::create_directories(out_dir);
  const std::string subset_tag = subset ? to_string(*subset) : std::string("all");
  AugmentResult result;
  result.out_path = out_dir / (ds.id + "_" + subset_tag + "_aug_" + target_lang + "_" +
                               config.augment.mode + ".jsonl");
  save_dataset(augmented, data.taxonomy, result.out_path);
  result.translated = static_cast<long>(records.size());
  result.kept = static_cast<long>(filtered.kept.size());
  result.dropped = static_cast<long>(filtered.dropped.size());
  result.failed = static_cast<long>(errors.size());
  for (const auto& message : errors) {
    std::cerr << "translation failed: " << message << "\n";
  }
  return result;
}

SftResult cmd_export_sft(const RunConfig& config, const std::string& dataset_id, Subset subset,
                         const std::optional<std::filesystem::path>& out,
                         const std::optional<std::filesystem::path>& manifest_path) {
  const DatasetConfig& ds = config.dataset(dataset_id);
  const SplitAssignment split = manifest_for(config, ds.id, manifest_path);
  const PreparedData data = prepare(config, ds, &split);
  const auto records = select_subset(data.dataset, split, subset);
  if (records.empty()) throw DataError("subset " + to_string(subset) + " is empty");

  SftResult result;
  if (out) {
    result.out_path = *out;
  } else {
    const std::filesystem::path out_dir = config.resolve(config.output_dir);
    std::filesystem::create_directories(out_dir);
    result.out_path = out_dir / (ds.id + "_" + to_string(subset) + "_sft.jsonl");
  }
  result.count = export_sft(records, data.taxonomy, result.out_path);
  return result;
}

namespace {

void print_ingest(const IngestSummary& summary) {
  std::cout << "reports: " << summary.n_reports << "\n";
  std::cout << "avg chars: " << summary.avg_chars << "\n";
  std::cout << "supports:\n";
  for (const auto& [finding, count] : summary.supports) {
    std::cout << "  " << finding << ": " << count << "\n";
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"taxonomy-agnostic radiology report classification harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dataset_id;
  std::string subset_name = "test";
  std::string target_lang;
  std::string mode_override;
  std::string predictions_path;
  std::string out_path;
  std::string manifest_override;
  int shots = -1;
  std::int64_t seed_override = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
    cmd->add_option("--dataset", dataset_id, "dataset id (defaults to the only one)");
    cmd->add_option("--seed", seed_override, "override the config seed");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "load a dataset and print its statistics");
  add_common(ingest);

  CLI::App* split = app.add_subcommand("split", "write a stratified split manifest");
  add_common(split);
  split->add_option("--out", out_path, "manifest path");

  CLI::App* classify = app.add_subcommand("classify", "run classification over a subset");
  add_common(classify);
  classify->add_option("--subset", subset_name, "train|dev|test")->capture_default_str();
  classify->add_option("--shots", shots, "in-context examples (overrides config)");
  classify->add_option("--manifest", manifest_override, "split manifest path");

  CLI::App* eval = app.add_subcommand("eval", "score a predictions file against gold labels");
  add_common(eval);
  eval->add_option("--predictions", predictions_path, "predictions file")->required();
  eval->add_option("--subset", subset_name, "train|dev|test")->capture_default_str();
  eval->add_option("--manifest", manifest_override, "split manifest path");

  CLI::App* augment = app.add_subcommand("augment", "translate reports and write an augmented set");
  add_common(augment);
  augment->add_option("--target-lang", target_lang, "two-letter target language")->required();
  augment->add_option("--subset", subset_name, "train|dev|test|all")->default_val("train");
  augment->add_option("--mode", mode_override, "union|translated_only");
  augment->add_option("--manifest", manifest_override, "split manifest path");

  CLI::App* export_sft = app.add_subcommand("export-sft", "write fine-tuning chat pairs");
  add_common(export_sft);
  export_sft->add_option("--subset", subset_name, "train|dev|test")->default_val("train");
  export_sft->add_option("--out", out_path, "output path");
  export_sft->add_option("--manifest", manifest_override, "split manifest path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig config = load_config(config_path);
    if (seed_override >= 0) {
      config.seed = static_cast<std::uint64_t>(seed_override);
      config.generation.seed = static_cast<int>(seed_override);
    }
    if (!mode_override.empty()) {
      if (!augment_mode_from_string(mode_override)) {
        throw ConfigError("mode must be 'union' or 'translated_only'");
      }
      config.augment.mode = mode_override;
    }
    std::optional<std::filesystem::path> manifest;
    if (!manifest_override.empty()) manifest = manifest_override;

    auto parse_subset = [&](bool allow_all) -> std::optional<Subset> {
      if (allow_all && subset_name == "all") return std::nullopt;
      const auto parsed = subset_from_string(subset_name);
      if (!parsed) throw ConfigError("bad subset '" + subset_name + "'");
      return parsed;
    };

    if (*ingest) {
      print_ingest(cmd_ingest(config, dataset_id));
      return 0;
    }
    if (*split) {
      std::optional<std::filesystem::path> out;
      if (!out_path.empty()) out = out_path;
      const auto path = cmd_split(config, dataset_id, out);
      const auto manifest_written = load_manifest(path);
      long train = 0, dev = 0, test = 0;
      for (const auto& [_, s] : manifest_written.assignment) {
        if (s == Subset::Train) ++train;
        else if (s == Subset::Dev) ++dev;
        else ++test;
      }
      std::cout << "manifest: " << path.string() << "\n";
      std::cout << "train/dev/test: " << train << "/" << dev << "/" << test << "\n";
      return 0;
    }
    if (*classify) {
      std::optional<int> shots_override;
      if (shots >= 0) shots_override = shots;
      const auto result = cmd_classify(config, dataset_id, *parse_subset(false), shots_override,
                                       nullptr, manifest);
      std::cout << "predictions: " << result.predictions_path.string() << "\n";
      std::cout << "run log: " << result.run_log_path.string() << "\n";
      std::cout << "reports: " << result.n_reports << "\n";
      std::cout << "invalid rate: " << result.invalid_rate << "\n";
      std::cout << "backend errors: " << result.backend_errors << "\n";
      std::cout << "wall time: " << result.wall_time_s << "s\n";
      if (result.backend_errors > 0) {
        std::cerr << "error: " << result.backend_errors << " request(s) failed\n";
        return 1;
      }
      return 0;
    }
    if (*eval) {
      EvalPaths paths;
      const EvalReport report =
          cmd_eval(config, dataset_id, predictions_path, *parse_subset(false), &paths, manifest);
      std::cout << format_eval_table(report);
      std::cout << "\nwrote " << paths.jsonl.string() << " and " << paths.table.string() << "\n";
      return 0;
    }
    if (*augment) {
      const auto result =
          cmd_augment(config, dataset_id, target_lang, parse_subset(true), nullptr, manifest);
      std::cout << "translated: " << result.translated << " (failed: " << result.failed << ")\n";
      std::cout << "kept/dropped by length: " << result.kept << "/" << result.dropped << "\n";
      std::cout << "augmented set: " << result.out_path.string() << "\n";
      return result.failed > 0 ? 1 : 0;
    }
    if (*export_sft) {
      std::optional<std::filesystem::path> out;
      if (!out_path.empty()) out = out_path;
      const auto result = cmd_export_sft(config, dataset_id, *parse_subset(false), out, manifest);
      std::cout << "wrote " << result.count << " records to " << result.out_path.string() << "\n";
      return 0;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace radlabel
