#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "radlabel/promptgen.hpp"

namespace radlabel {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

// Chat rendering of a bundle: instruction as the system turn, each shot as a
// user/assistant pair, the target report as the final user turn.
std::vector<ChatMessage> render_messages(const PromptBundle& bundle);

struct GenerationParams {
  double temperature = 0.5;
  double min_p = 0.1;
  int seed = 42;
  std::string stop = "}";
  int max_sequence_tokens = 2048;  // doubled when the bundle carries shots
};

int effective_max_tokens(const GenerationParams& params, const PromptBundle& bundle);

enum class FinishReason { Stop, Length, Error };
std::string to_string(FinishReason reason);

struct RawAnswer {
  std::string text;
  FinishReason finished_by = FinishReason::Error;
  std::chrono::milliseconds latency{0};
  std::string endpoint_id;
  std::optional<int> completion_tokens;  // from usage, when the server reports it
  std::string error;                     // diagnostic when finished_by == Error
};

// Cuts text at the first stop occurrence and re-appends the stop string so a
// brace-stopped object stays closed. No-op when stop is empty.
std::string apply_stop(const std::string& text, const std::string& stop);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual RawAnswer complete(const PromptBundle& bundle, const GenerationParams& params) = 0;

  // Results in input order regardless of completion order; at most
  // max_in_flight requests outstanding at once. Per-item failures land in the
  // corresponding slot; the batch itself never aborts.
  std::vector<RawAnswer> complete_batch(const std::vector<PromptBundle>& bundles,
                                        const GenerationParams& params, int max_in_flight = 64);
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

struct EndpointConfig {
  std::string base_url;  // e.g. http://localhost:8000
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;  // empty -> no Authorization header
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
};

// Request body following the chat-completions convention. min_p rides along as
// an extension field unless include_min_p is false.
std::string build_request_body(const EndpointConfig& endpoint, const PromptBundle& bundle,
                               const GenerationParams& params, bool include_min_p);

// HTTP client for a chat-completions endpoint. Retries transport failures and
// 5xx responses with exponential backoff; other failures are permanent. A
// server that rejects min_p keeps working: the field is dropped and a warning
// logged once.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(EndpointConfig config);
  ~HttpBackend() override;

  RawAnswer complete(const PromptBundle& bundle, const GenerationParams& params) override;

 private:
  EndpointConfig config_;
  std::string host_;
  int port_ = 80;
  std::atomic<bool> min_p_unsupported_{false};
  std::atomic<bool> min_p_warned_{false};
};

// Deterministic stand-in keyed by the bundle's target text. Canned generations
// go through the same stop handling as real answers. Tracks concurrency so
// tests can assert the in-flight bound.
class MockBackend : public ChatBackend {
 public:
  void set_answer(const std::string& target_text, std::string generation);
  void set_failure(const std::string& target_text, std::string message = "injected failure");
  void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

  RawAnswer complete(const PromptBundle& bundle, const GenerationParams& params) override;

  long calls() const { return calls_.load(); }
  int max_in_flight_observed() const { return max_in_flight_observed_.load(); }

 private:
  std::map<std::string, std::string> answers_;
  std::map<std::string, std::string> failures_;
  std::chrono::milliseconds latency_{0};
  std::atomic<long> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_observed_{0};
};

}  // namespace radlabel
