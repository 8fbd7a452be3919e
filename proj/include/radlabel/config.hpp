#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "radlabel/backend.hpp"
#include "radlabel/promptgen.hpp"
#include "radlabel/taxonomy.hpp"

namespace radlabel {

struct DatasetConfig {
  std::string id;
  std::filesystem::path path;
  TaxonomySpec taxonomy;
};

struct EndpointSettings {
  std::string kind = "mock";  // mock | http
  // http
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "RADLABEL_API_KEY";
  RetryPolicy retry;
  long timeout_s = 120;
  // mock
  std::filesystem::path answers_path;  // line records {"id", "text"} or {"id", "error"}
  int max_in_flight = 64;
};

struct FilterSettings {
  std::optional<long> min_support;
  std::string support_scope = "train";  // train | all
  std::optional<std::size_t> top_k;
};

struct AugmentSettings {
  std::optional<long> max_tokens;  // defaults to generation.max_sequence_tokens
  std::string mode = "union";     // union | translated_only
};

// One experiment: datasets with their taxonomies, split policy, prompting and
// generation settings, endpoint. Fully validated at load; commands may then
// assume every field is coherent.
struct RunConfig {
  std::vector<DatasetConfig> datasets;
  std::array<double, 3> fractions{0.7, 0.1, 0.2};
  std::optional<std::size_t> dev_count;  // absolute dev-size targeting
  std::uint64_t seed = 42;  // fans out to splitter, shot sampler and generation
  int shots = 0;
  ShotSampling shot_sampling = ShotSampling::Uniform;
  GenerationParams generation;
  EndpointSettings endpoint;
  FilterSettings filter;
  AugmentSettings augment;
  std::filesystem::path output_dir = "runs";
  std::filesystem::path config_dir;  // directory the config file lives in

  // Relative paths in the config resolve against the config file's directory.
  std::filesystem::path resolve(const std::filesystem::path& path) const;
  const DatasetConfig& dataset(const std::string& id) const;  // empty id -> sole dataset
  std::filesystem::path default_manifest_path(const std::string& dataset_id) const;
};

RunConfig load_config(const std::filesystem::path& path);

}  // namespace radlabel
