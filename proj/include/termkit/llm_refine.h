#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "termkit/corpus.h"

namespace termkit {

enum class PromptKind { translation, refinement };

struct PromptRequest {
  PromptKind kind = PromptKind::translation;
  std::string source;
  std::string translation;  // refinement only
  std::string lang;
  std::vector<std::pair<std::string, std::string>> constraints;  // (src_term, trg_term)
};

// Renders the chat prompt for a request. Lines are joined with single
// newlines and there is no trailing newline; constraint lines end with ";"
// except the last, which ends with ".".
std::string build_prompt(const PromptRequest& req);

struct BackendConfig {
  std::string endpoint;  // "https://host/v1/chat/completions" or "mock:<script.json>"
  std::string model = "gpt-3.5-turbo-0613";
  std::string api_key_env;  // name of the env var holding the key; may be empty
  double timeout_seconds = 30.0;
  int max_retries = 3;
  int max_in_flight = 4;
  double temperature = 0.0;
  int requests_per_minute = 0;  // 0 = unlimited
  int backoff_initial_ms = 100;
};

struct TransportResult {
  int status = 0;  // HTTP status; <=0 means transport-level failure
  std::string body;
  bool timed_out = false;
};

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual TransportResult send(const std::string& request_body) = 0;
};

// Reads a scripted backend from a JSON file:
//   {
//     "default": {"behavior": "echo_translation"},
//     "rules": [
//       {"match": "Haus", "response": "the house", "times": 1},
//       {"match": "quota", "status": 429},
//       {"match": "Source:", "behavior": "append_terms", "latency_ms": 5}
//     ]
//   }
// A request is answered by the first unexhausted rule whose "match" substring
// occurs in the prompt, else by "default". Behaviors: "literal" (uses
// "response"), "echo_source", "echo_translation", "append_terms" (translation
// text followed by every constraint target term found in the prompt).
class MockTransport : public ChatTransport {
 public:
  explicit MockTransport(const std::string& script_path);

  TransportResult send(const std::string& request_body) override;

  std::size_t call_count() const;
  std::size_t max_concurrency() const;
  std::vector<std::string> transcript() const;

 private:
  struct Rule {
    std::string match;
    std::string behavior = "literal";
    std::string response;
    int status = 200;
    int times = -1;  // -1 = unlimited
    int latency_ms = 0;
  };

  TransportResult respond(const Rule& rule, const std::string& prompt) const;

  std::vector<Rule> rules_;
  Rule default_rule_;
  mutable std::mutex mu_;
  std::vector<std::string> transcript_;
  std::size_t calls_ = 0;
  std::size_t in_flight_ = 0;
  std::size_t max_in_flight_seen_ = 0;
};

// POSTs chat-completion requests to an OpenAI-style endpoint. The bearer
// token is read from the configured environment variable at construction and
// held in memory only; it is never logged.
class HttpTransport : public ChatTransport {
 public:
  explicit HttpTransport(const BackendConfig& config);

  TransportResult send(const std::string& request_body) override;

 private:
  std::string scheme_host_;
  std::string path_;
  std::string api_key_;
  double timeout_seconds_;
};

class ChatClient {
 public:
  explicit ChatClient(BackendConfig config);
  ChatClient(BackendConfig config, std::unique_ptr<ChatTransport> transport);

  // One stateless chat-completion round trip: single user message, retries
  // with exponential backoff on 429/5xx/transport failures, and returns the
  // assistant text trimmed of surrounding whitespace and one layer of
  // surrounding quotes.
  std::string query(const std::string& prompt);

  const BackendConfig& config() const { return config_; }
  ChatTransport& transport() { return *transport_; }

 private:
  void pace();

  BackendConfig config_;
  std::unique_ptr<ChatTransport> transport_;
  std::mutex pace_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
};

// Two-step refinement for one sentence. Without an initial hypothesis the
// first call obtains an unconstrained translation; the second (always issued)
// asks for a constraint-aware revision. The result carries stage LLM and a
// zero log score.
Hypothesis refine_llm(ChatClient& client, const std::string& source_text,
                      const std::optional<Hypothesis>& initial, const std::string& lang,
                      const std::vector<std::pair<std::string, std::string>>& constraints);

struct LlmTask {
  std::string id;
  std::string source_text;
  std::optional<Hypothesis> initial;
  std::vector<std::pair<std::string, std::string>> constraints;
};

struct LlmOutcome {
  std::string id;
  std::optional<Hypothesis> hyp;  // absent when the sentence failed
  std::string error;
};

// Runs refine_llm for every task with at most config.max_in_flight requests
// outstanding. Outcomes are returned in task order; per-sentence failures are
// captured, not propagated.
std::vector<LlmOutcome> refine_batch(ChatClient& client, const std::vector<LlmTask>& tasks,
                                     const std::string& lang);

}  // namespace termkit
