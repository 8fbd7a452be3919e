#include "radlabel/backend.hpp"

#include <algorithm>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "radlabel/errors.hpp"

namespace radlabel {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

RawAnswer error_answer(std::string message, std::string endpoint_id,
                       std::chrono::milliseconds latency = std::chrono::milliseconds{0}) {
  RawAnswer answer;
  answer.finished_by = FinishReason::Error;
  answer.error = std::move(message);
  answer.endpoint_id = std::move(endpoint_id);
  answer.latency = latency;
  return answer;
}

}  // namespace

std::vector<ChatMessage> render_messages(const PromptBundle& bundle) {
  std::vector<ChatMessage> messages;
  messages.reserve(2 + 2 * bundle.shots.size());
  messages.push_back({"system", bundle.instruction});
  for (const auto& shot : bundle.shots) {
    messages.push_back({"user", shot.report_text});
    messages.push_back({"assistant", shot.answer});
  }
  messages.push_back({"user", bundle.target_text});
  return messages;
}

int effective_max_tokens(const GenerationParams& params, const PromptBundle& bundle) {
  return bundle.shots.empty() ? params.max_sequence_tokens : 2 * params.max_sequence_tokens;
}

std::string to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "?";
}

std::string apply_stop(const std::string& text, const std::string& stop) {
  if (stop.empty()) return text;
  const auto pos = text.find(stop);
  if (pos == std::string::npos) return text + stop;
  return text.substr(0, pos + stop.size());
}

std::vector<RawAnswer> ChatBackend::complete_batch(const std::vector<PromptBundle>& bundles,
                                                   const GenerationParams& params,
                                                   int max_in_flight) {
  std::vector<RawAnswer> results(bundles.size());
  if (bundles.empty()) return results;

  const std::size_t workers =
      std::min<std::size_t>(std::max(max_in_flight, 1), bundles.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < bundles.size(); i = next.fetch_add(1)) {
        try {
          results[i] = complete(bundles[i], params);
        } catch (const std::exception& e) {
          results[i] = error_answer(e.what(), "batch");
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

std::string build_request_body(const EndpointConfig& endpoint, const PromptBundle& bundle,
                               const GenerationParams& params, bool include_min_p) {
  ordered_json body;
  body["model"] = endpoint.model;
  ordered_json messages = ordered_json::array();
  for (const auto& message : render_messages(bundle)) {
    messages.push_back({{"role", message.role}, {"content", message.content}});
  }
  body["messages"] = std::move(messages);
  body["temperature"] = params.temperature;
  body["seed"] = params.seed;
  body["max_tokens"] = effective_max_tokens(params, bundle);
  if (!params.stop.empty()) body["stop"] = ordered_json::array({params.stop});
  if (include_min_p) body["min_p"] = params.min_p;
  return body.dump();
}

HttpBackend::HttpBackend(EndpointConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw BackendError("endpoint base_url is empty");
  if (config_.model.empty()) throw BackendError("endpoint model is empty");
}

HttpBackend::~HttpBackend() = default;

RawAnswer HttpBackend::complete(const PromptBundle& bundle, const GenerationParams& params) {
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 started);
  };

  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  auto backoff = config_.retry.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < std::max(config_.retry.attempts, 1); ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * config_.retry.multiplier));
    }

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout.count(), 0);
    client.set_read_timeout(config_.timeout.count(), 0);
    client.set_write_timeout(config_.timeout.count(), 0);

    const std::string body =
        build_request_body(config_, bundle, params, !min_p_unsupported_.load());
    auto result = client.Post(config_.path, headers, body, "application/json");
    if (!result) {
      last_error = "transport failure: " + httplib::to_string(result.error());
      continue;  // retryable
    }

    const int status = result->status;
    if (status == 401 || status == 403) {
      return error_answer("authentication failure (HTTP " + std::to_string(status) + ")",
                          config_.model, elapsed());
    }
    if (status >= 500) {
      last_error = "server failure: HTTP " + std::to_string(status);
      continue;  // retryable
    }
    if (status == 400 && !min_p_unsupported_.load() &&
        result->body.find("min_p") != std::string::npos) {
      min_p_unsupported_.store(true);
      if (!min_p_warned_.exchange(true)) {
        std::cerr << "warning: endpoint rejected min_p; continuing without it\n";
      }
      --attempt;  // immediate resend, not a failure of the normal budget
      continue;
    }
    if (status != 200) {
      return error_answer("HTTP " + std::to_string(status) + ": " + result->body, config_.model,
                          elapsed());
    }

    json response = json::parse(result->body, nullptr, false);
    if (response.is_discarded() || !response.contains("choices") || response["choices"].empty()) {
      return error_answer("malformed endpoint response", config_.model, elapsed());
    }
    const auto& choice = response["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string()) {
      return error_answer("endpoint response lacks message content", config_.model, elapsed());
    }

    RawAnswer answer;
    answer.text = choice["message"]["content"].get<std::string>();
    answer.endpoint_id = config_.model;
    answer.latency = elapsed();
    const std::string finish = choice.value("finish_reason", std::string("stop"));
    answer.finished_by = finish == "length" ? FinishReason::Length : FinishReason::Stop;
    if (answer.finished_by == FinishReason::Stop) {
      answer.text = apply_stop(answer.text, params.stop);
    }
    if (response.contains("usage") && response["usage"].contains("completion_tokens") &&
        response["usage"]["completion_tokens"].is_number_integer()) {
      answer.completion_tokens = response["usage"]["completion_tokens"].get<int>();
    }
    return answer;
  }
  return error_answer("endpoint unreachable after " + std::to_string(config_.retry.attempts) +
                          " attempts: " + last_error,
                      config_.model, elapsed());
}

void MockBackend::set_answer(const std::string& target_text, std::string generation) {
  answers_[target_text] = std::move(generation);
}

void MockBackend::set_failure(const std::string& target_text, std::string message) {
  failures_[target_text] = std::move(message);
}

RawAnswer MockBackend::complete(const PromptBundle& bundle, const GenerationParams& params) {
  calls_.fetch_add(1);
  const int now = in_flight_.fetch_add(1) + 1;
  int seen = max_in_flight_observed_.load();
  while (now > seen && !max_in_flight_observed_.compare_exchange_weak(seen, now)) {
  }
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  RawAnswer answer;
  answer.endpoint_id = "mock";
  if (const auto failure = failures_.find(bundle.target_text); failure != failures_.end()) {
    answer.finished_by = FinishReason::Error;
    answer.error = failure->second;
  } else if (const auto hit = answers_.find(bundle.target_text); hit != answers_.end()) {
    if (params.stop.empty()) {
      answer.text = hit->second;
      answer.finished_by = FinishReason::Stop;
    } else if (hit->second.find(params.stop) != std::string::npos) {
      answer.text = apply_stop(hit->second, params.stop);
      answer.finished_by = FinishReason::Stop;
    } else {
      // The generation never produced the stop sequence: budget ran out.
      answer.text = hit->second;
      answer.finished_by = FinishReason::Length;
    }
  } else {
    answer.finished_by = FinishReason::Error;
    answer.error = "no canned answer for target text";
  }

  in_flight_.fetch_sub(1);
  return answer;
}

}  // namespace radlabel
