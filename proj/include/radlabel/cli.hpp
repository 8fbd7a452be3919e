#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "radlabel/augment.hpp"
#include "radlabel/config.hpp"
#include "radlabel/metrics.hpp"
#include "radlabel/splitter.hpp"

namespace radlabel {

// Commands are plain functions so tests can drive them without a subprocess;
// the binary in tools/ is a thin argument parser around them. An explicit
// backend overrides whatever the config's endpoint section says.

struct IngestSummary {
  long n_reports = 0;
  double avg_chars = 0.0;
  std::map<std::string, long> supports;
};

IngestSummary cmd_ingest(const RunConfig& config, const std::string& dataset_id = {});

// Writes the split manifest and returns its path.
std::filesystem::path cmd_split(const RunConfig& config, const std::string& dataset_id = {},
                                const std::optional<std::filesystem::path>& out = std::nullopt);

struct ClassifyResult {
  std::filesystem::path predictions_path;
  std::filesystem::path run_log_path;
  long n_reports = 0;
  double invalid_rate = 0.0;
  long backend_errors = 0;
  double wall_time_s = 0.0;
};

ClassifyResult cmd_classify(const RunConfig& config, const std::string& dataset_id, Subset subset,
                            std::optional<int> shots_override = std::nullopt,
                            ChatBackend* backend = nullptr,
                            const std::optional<std::filesystem::path>& manifest_path =
                                std::nullopt);

struct EvalPaths {
  std::filesystem::path jsonl;
  std::filesystem::path table;
};

EvalReport cmd_eval(const RunConfig& config, const std::string& dataset_id,
                    const std::filesystem::path& predictions_path, Subset subset,
                    EvalPaths* out_paths = nullptr,
                    const std::optional<std::filesystem::path>& manifest_path = std::nullopt);

struct AugmentResult {
  std::filesystem::path out_path;
  long translated = 0;
  long kept = 0;
  long dropped = 0;
  long failed = 0;
};

// subset: train/dev/test per the manifest, or nullopt for the whole dataset.
AugmentResult cmd_augment(const RunConfig& config, const std::string& dataset_id,
                          const std::string& target_lang,
                          std::optional<Subset> subset = std::nullopt,
                          ChatBackend* backend = nullptr,
                          const std::optional<std::filesystem::path>& manifest_path =
                              std::nullopt);

struct SftResult {
  std::filesystem::path out_path;
  std::size_t count = 0;
};

SftResult cmd_export_sft(const RunConfig& config, const std::string& dataset_id, Subset subset,
                         const std::optional<std::filesystem::path>& out = std::nullopt,
                         const std::optional<std::filesystem::path>& manifest_path = std::nullopt);

// Entry point for the binary: parses arguments, runs one command, reports
// errors on stderr. Returns the process exit code (0 only on full success).
int run_cli(int argc, const char* const* argv);

}  // namespace radlabel
