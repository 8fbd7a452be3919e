#include "radlabel/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "radlabel/errors.hpp"
#include "radlabel/splitter.hpp"

namespace radlabel {

namespace {

using nlohmann::json;

void expect_keys(const json& object, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (const auto& [key, _] : object.items()) {
    if (allowed.count(key) == 0) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T require(const json& object, const std::string& key, const std::string& where) {
  if (!object.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": '" + key + "' has the wrong type");
  }
}

template <typename T>
T optional_of(const json& object, const std::string& key, T fallback, const std::string& where) {
  if (!object.contains(key)) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": '" + key + "' has the wrong type");
  }
}

TaxonomySpec parse_taxonomy(const json& node, const std::string& dataset_id,
                            const std::string& where) {
  if (!node.is_object()) throw ConfigError(where + ": taxonomy must be an object");
  expect_keys(node, {"findings", "mention_classes"}, where);
  const auto findings = require<std::vector<std::string>>(node, "findings", where);
  const auto class_names = require<std::vector<std::string>>(node, "mention_classes", where);
  std::set<MentionClass> classes;
  for (const auto& name : class_names) {
    const auto cls = mention_class_from_string(name);
    if (!cls || *cls == MentionClass::NotMentioned) {
      throw ConfigError(where + ": bad mention class '" + name + "'");
    }
    classes.insert(*cls);
  }
  try {
    return TaxonomySpec(dataset_id, findings, classes);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

DatasetConfig parse_dataset(const json& node, const std::string& where) {
  if (!node.is_object()) throw ConfigError(where + ": dataset must be an object");
  expect_keys(node, {"id", "path", "taxonomy"}, where);
  const auto id = require<std::string>(node, "id", where);
  const auto path = require<std::string>(node, "path", where);
  if (!node.contains("taxonomy")) throw ConfigError(where + ": missing 'taxonomy'");
  return DatasetConfig{id, path, parse_taxonomy(node.at("taxonomy"), id, where)};
}

GenerationParams parse_generation(const json& node, std::uint64_t run_seed,
                                  const std::string& where) {
  GenerationParams params;
  params.seed = static_cast<int>(run_seed);
  if (node.is_null()) return params;
  if (!node.is_object()) throw ConfigError(where + ": generation must be an object");
  expect_keys(node, {"temperature", "min_p", "seed", "stop", "max_sequence_tokens"}, where);
  params.temperature = optional_of<double>(node, "temperature", params.temperature, where);
  params.min_p = optional_of<double>(node, "min_p", params.min_p, where);
  params.seed = optional_of<int>(node, "seed", params.seed, where);
  params.stop = optional_of<std::string>(node, "stop", params.stop, where);
  params.max_sequence_tokens =
      optional_of<int>(node, "max_sequence_tokens", params.max_sequence_tokens, where);
  if (params.min_p < 0.0 || params.min_p > 1.0) {
    throw ConfigError(where + ": min_p must be in [0, 1]");
  }
  if (params.max_sequence_tokens < 1) {
    throw ConfigError(where + ": max_sequence_tokens must be >= 1");
  }
  return params;
}

EndpointSettings parse_endpoint(const json& node, const std::string& where) {
  EndpointSettings endpoint;
  if (node.is_null()) return endpoint;
  if (!node.is_object()) throw ConfigError(where + ": endpoint must be an object");
  expect_keys(node,
              {"kind", "base_url", "path", "model", "api_key_env", "answers_path",
               "max_in_flight", "retry_attempts", "retry_initial_backoff_ms", "timeout_s"},
              where);
  endpoint.kind = optional_of<std::string>(node, "kind", endpoint.kind, where);
  if (endpoint.kind != "mock" && endpoint.kind != "http") {
    throw ConfigError(where + ": endpoint kind must be 'mock' or 'http'");
  }
  endpoint.base_url = optional_of<std::string>(node, "base_url", endpoint.base_url, where);
  endpoint.path = optional_of<std::string>(node, "path", endpoint.path, where);
  endpoint.model = optional_of<std::string>(node, "model", endpoint.model, where);
  endpoint.api_key_env = optional_of<std::string>(node, "api_key_env", endpoint.api_key_env, where);
  endpoint.answers_path =
      optional_of<std::string>(node, "answers_path", endpoint.answers_path.string(), where);
  endpoint.max_in_flight = optional_of<int>(node, "max_in_flight", endpoint.max_in_flight, where);
  endpoint.retry.attempts =
      optional_of<int>(node, "retry_attempts", endpoint.retry.attempts, where);
  endpoint.retry.initial_backoff = std::chrono::milliseconds(optional_of<long>(
      node, "retry_initial_backoff_ms", endpoint.retry.initial_backoff.count(), where));
  endpoint.timeout_s = optional_of<long>(node, "timeout_s", endpoint.timeout_s, where);
  if (endpoint.max_in_flight < 1) throw ConfigError(where + ": max_in_flight must be >= 1");
  if (endpoint.kind == "http" && endpoint.base_url.empty()) {
    throw ConfigError(where + ": http endpoint needs base_url");
  }
  if (endpoint.kind == "http" && endpoint.model.empty()) {
    throw ConfigError(where + ": http endpoint needs model");
  }
  return endpoint;
}

FilterSettings parse_filter(const json& node, const std::string& where) {
  FilterSettings filter;
  if (node.is_null()) return filter;
  if (!node.is_object()) throw ConfigError(where + ": filter must be an object");
  expect_keys(node, {"min_support", "support_scope", "top_k"}, where);
  if (node.contains("min_support")) {
    filter.min_support = require<long>(node, "min_support", where);
    if (*filter.min_support < 1) throw ConfigError(where + ": min_support must be >= 1");
  }
  filter.support_scope =
      optional_of<std::string>(node, "support_scope", filter.support_scope, where);
  if (filter.support_scope != "train" && filter.support_scope != "all") {
    throw ConfigError(where + ": support_scope must be 'train' or 'all'");
  }
  if (node.contains("top_k")) {
    const long k = require<long>(node, "top_k", where);
    if (k < 1) throw ConfigError(where + ": top_k must be >= 1");
    filter.top_k = static_cast<std::size_t>(k);
  }
  return filter;
}

AugmentSettings parse_augment(const json& node, const std::string& where) {
  AugmentSettings augment;
  if (node.is_null()) return augment;
  if (!node.is_object()) throw ConfigError(where + ": augment must be an object");
  expect_keys(node, {"max_tokens", "mode"}, where);
  if (node.contains("max_tokens")) {
    augment.max_tokens = require<long>(node, "max_tokens", where);
    if (*augment.max_tokens < 1) throw ConfigError(where + ": max_tokens must be >= 1");
  }
  augment.mode = optional_of<std::string>(node, "mode", augment.mode, where);
  if (augment.mode != "union" && augment.mode != "translated_only") {
    throw ConfigError(where + ": mode must be 'union' or 'translated_only'");
  }
  return augment;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::filesystem::path& path) const {
  if (path.is_absolute() || config_dir.empty()) return path;
  return config_dir / path;
}

const DatasetConfig& RunConfig::dataset(const std::string& id) const {
  if (id.empty()) {
    if (datasets.size() == 1) return datasets.front();
    throw ConfigError("config declares " + std::to_string(datasets.size()) +
                      " datasets; pass --dataset");
  }
  for (const auto& ds : datasets) {
    if (ds.id == id) return ds;
  }
  throw ConfigError("dataset '" + id + "' has no declared taxonomy in the config");
}

std::filesystem::path RunConfig::default_manifest_path(const std::string& dataset_id) const {
  return resolve(output_dir) / (dataset_id + "_split.jsonl");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json root = json::parse(in, nullptr, false);
  if (root.is_discarded() || !root.is_object()) {
    throw ConfigError(path.string() + ": not a valid config object");
  }
  const std::string where = path.filename().string();
  expect_keys(root,
              {"datasets", "split", "seed", "shots", "shot_sampling", "generation", "endpoint",
               "filter", "augment", "output_dir"},
              where);

  RunConfig config;
  config.config_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  config.seed = optional_of<std::uint64_t>(root, "seed", config.seed, where);
  config.shots = optional_of<int>(root, "shots", config.shots, where);
  if (config.shots < 0) throw ConfigError(where + ": shots must be >= 0");
  if (root.contains("shot_sampling")) {
    const auto name = require<std::string>(root, "shot_sampling", where);
    const auto sampling = shot_sampling_from_string(name);
    if (!sampling) throw ConfigError(where + ": shot_sampling must be 'uniform' or 'balanced'");
    config.shot_sampling = *sampling;
  }
  config.output_dir = optional_of<std::string>(root, "output_dir", config.output_dir.string(), where);

  if (!root.contains("datasets") || !root["datasets"].is_array() || root["datasets"].empty()) {
    throw ConfigError(where + ": 'datasets' must be a nonempty array");
  }
  std::set<std::string> ids;
  for (const auto& node : root["datasets"]) {
    DatasetConfig ds = parse_dataset(node, where + "/datasets");
    if (!ids.insert(ds.id).second) {
      throw ConfigError(where + ": duplicate dataset id '" + ds.id + "'");
    }
    config.datasets.push_back(std::move(ds));
  }

  if (root.contains("split")) {
    const auto& split = root["split"];
    if (!split.is_object()) throw ConfigError(where + ": split must be an object");
    expect_keys(split, {"fractions", "dev_count"}, where + "/split");
    const auto fractions = require<std::vector<double>>(split, "fractions", where + "/split");
    if (fractions.size() != 3) throw ConfigError(where + ": split fractions must have 3 entries");
    for (std::size_t j = 0; j < 3; ++j) config.fractions[j] = fractions[j];
    double sum = config.fractions[0] + config.fractions[1] + config.fractions[2];
    if (config.fractions[0] < 0 || config.fractions[1] < 0 || config.fractions[2] < 0 ||
        std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError(where + ": split fractions must be nonnegative and sum to 1");
    }
    if (split.contains("dev_count")) {
      const long count = require<long>(split, "dev_count", where + "/split");
      if (count < 0) throw ConfigError(where + ": dev_count must be >= 0");
      config.dev_count = static_cast<std::size_t>(count);
    }
  }

  config.generation = parse_generation(root.contains("generation") ? root["generation"] : json(),
                                       config.seed, where + "/generation");
  config.endpoint =
      parse_endpoint(root.contains("endpoint") ? root["endpoint"] : json(), where + "/endpoint");
  config.filter =
      parse_filter(root.contains("filter") ? root["filter"] : json(), where + "/filter");
  config.augment =
      parse_augment(root.contains("augment") ? root["augment"] : json(), where + "/augment");
  return config;
}

}  // namespace radlabel
