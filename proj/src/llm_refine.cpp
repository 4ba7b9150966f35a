#include "termkit/llm_refine.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "termkit/errors.h"
#include "termkit/text.h"

// httplib is header-only; keep it out of our public headers.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace termkit {

using nlohmann::json;

std::string build_prompt(const PromptRequest& req) {
  if (req.source.empty()) throw MissingField("source");
  if (req.lang.empty()) throw MissingField("lang");

  std::vector<std::string> lines;
  lines.push_back("Source: " + req.source);
  if (req.kind == PromptKind::translation) {
    if (!req.translation.empty() || !req.constraints.empty())
      throw Error("translation prompt takes no translation or constraints");
    lines.push_back("Please give me a translation in " + req.lang + " without any explanation.");
  } else {
    if (req.translation.empty()) throw MissingField("translation");
    lines.push_back("Translation: " + req.translation);
    lines.push_back("Please give me a better " + req.lang +
                    " translation without any explanation.");
    for (std::size_t i = 0; i < req.constraints.size(); ++i) {
      const auto& [src, trg] = req.constraints[i];
      const char* tail = (i + 1 == req.constraints.size()) ? "." : ";";
      lines.push_back("\"" + src + "\" should be translated as \"" + trg + "\"" + tail);
    }
  }

  std::string prompt;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) prompt += '\n';
    prompt += lines[i];
  }
  return prompt;
}

namespace {

std::string extract_prompt(const std::string& request_body) {
  json doc = json::parse(request_body);
  return doc.at("messages").at(0).at("content").get<std::string>();
}

// First line of the prompt starting with the given label, payload only.
std::string prompt_line(const std::string& prompt, const std::string& label) {
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(label, 0) == 0) return line.substr(label.size());
  }
  return {};
}

// Target terms from the constraint lines, in prompt order.
std::vector<std::string> prompt_terms(const std::string& prompt) {
  static const std::string kMid = "\" should be translated as \"";
  std::vector<std::string> terms;
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    auto mid = line.find(kMid);
    if (mid == std::string::npos) continue;
    auto start = mid + kMid.size();
    auto end = line.rfind('"');
    if (end == std::string::npos || end <= start) continue;
    terms.push_back(line.substr(start, end - start));
  }
  return terms;
}

std::string chat_body(const std::string& content) {
  json msg{{"role", "assistant"}, {"content", content}};
  json doc{{"choices", json::array({json{{"message", msg}}})}};
  return doc.dump();
}

}  // namespace

MockTransport::MockTransport(const std::string& script_path) {
  std::ifstream in(script_path);
  if (!in) throw IoError("cannot open mock script: " + script_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(script_path, 0, e.what());
  }

  auto parse_rule = [&](const json& j) {
    Rule r;
    if (j.contains("match")) r.match = j.at("match").get<std::string>();
    if (j.contains("response")) r.response = j.at("response").get<std::string>();
    if (j.contains("behavior")) r.behavior = j.at("behavior").get<std::string>();
    if (j.contains("status")) r.status = j.at("status").get<int>();
    if (j.contains("times")) r.times = j.at("times").get<int>();
    if (j.contains("latency_ms")) r.latency_ms = j.at("latency_ms").get<int>();
    return r;
  };
  if (doc.contains("rules")) {
    for (const auto& j : doc.at("rules")) rules_.push_back(parse_rule(j));
  }
  if (doc.contains("default")) {
    default_rule_ = parse_rule(doc.at("default"));
  } else {
    default_rule_.behavior = "echo_translation";
  }
}

TransportResult MockTransport::respond(const Rule& rule, const std::string& prompt) const {
  if (rule.status != 200) return {rule.status, "", false};
  std::string content;
  if (rule.behavior == "literal") {
    content = rule.response;
  } else if (rule.behavior == "echo_source") {
    content = prompt_line(prompt, "Source: ");
  } else if (rule.behavior == "echo_translation") {
    content = prompt_line(prompt, "Translation: ");
    if (content.empty()) content = prompt_line(prompt, "Source: ");
  } else if (rule.behavior == "append_terms") {
    content = prompt_line(prompt, "Translation: ");
    if (content.empty()) content = prompt_line(prompt, "Source: ");
    for (const auto& term : prompt_terms(prompt)) content += " " + term;
  } else {
    throw ParseError("mock script", 0, "unknown behavior: " + rule.behavior);
  }
  return {200, chat_body(content), false};
}

TransportResult MockTransport::send(const std::string& request_body) {
  const std::string prompt = extract_prompt(request_body);
  Rule chosen;
  int latency_ms = 0;
  {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.push_back(request_body);
    ++calls_;
    ++in_flight_;
    if (in_flight_ > max_in_flight_seen_) max_in_flight_seen_ = in_flight_;
    chosen = default_rule_;
    for (auto& rule : rules_) {
      if (rule.times == 0) continue;
      if (!rule.match.empty() && prompt.find(rule.match) == std::string::npos) continue;
      if (rule.times > 0) --rule.times;
      chosen = rule;
      break;
    }
    latency_ms = chosen.latency_ms;
  }
  if (latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms));
  TransportResult result = respond(chosen, prompt);
  {
    std::lock_guard<std::mutex> lock(mu_);
    --in_flight_;
  }
  return result;
}

std::size_t MockTransport::call_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

std::size_t MockTransport::max_concurrency() const {
  std::lock_guard<std::mutex> lock(mu_);
  return max_in_flight_seen_;
}

std::vector<std::string> MockTransport::transcript() const {
  std::lock_guard<std::mutex> lock(mu_);
  return transcript_;
}

HttpTransport::HttpTransport(const BackendConfig& config)
    : timeout_seconds_(config.timeout_seconds) {
  const std::string& url = config.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint is not a URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_ = url;
    path_ = "/v1/chat/completions";
  } else {
    scheme_host_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw AuthError("environment variable " + config.api_key_env + " is not set");
    api_key_ = key;
  }
}

TransportResult HttpTransport::send(const std::string& request_body) {
  // A fresh connection per request keeps every call an independent session.
  httplib::Client client(scheme_host_);
  auto seconds = static_cast<time_t>(timeout_seconds_);
  auto micros = static_cast<time_t>((timeout_seconds_ - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, request_body, "application/json");
  if (!res) {
    bool timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                     res.error() == httplib::Error::Read || res.error() == httplib::Error::Write;
    return {-1, httplib::to_string(res.error()), timed_out};
  }
  return {res->status, res->body, false};
}

ChatClient::ChatClient(BackendConfig config) : config_(std::move(config)) {
  static const std::string kMockPrefix = "mock:";
  if (config_.endpoint.rfind(kMockPrefix, 0) == 0) {
    transport_ = std::make_unique<MockTransport>(config_.endpoint.substr(kMockPrefix.size()));
  } else {
    transport_ = std::make_unique<HttpTransport>(config_);
  }
}

ChatClient::ChatClient(BackendConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

void ChatClient::pace() {
  if (config_.requests_per_minute <= 0) return;
  const auto interval = std::chrono::microseconds(60'000'000 / config_.requests_per_minute);
  std::chrono::steady_clock::time_point wake;
  {
    std::lock_guard<std::mutex> lock(pace_mu_);
    const auto now = std::chrono::steady_clock::now();
    if (next_slot_ < now) next_slot_ = now;
    wake = next_slot_;
    next_slot_ += interval;
  }
  std::this_thread::sleep_until(wake);
}

namespace {

std::string normalize_reply(std::string text) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  auto trim = [&](std::string s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
  };
  text = trim(std::move(text));
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
    text = trim(text.substr(1, text.size() - 2));
  return text;
}

}  // namespace

std::string ChatClient::query(const std::string& prompt) {
  json msg{{"role", "user"}, {"content", prompt}};
  json request{{"model", config_.model},
               {"temperature", config_.temperature},
               {"messages", json::array({msg})}};
  const std::string body = request.dump();

  int attempts = config_.max_retries + 1;
  int backoff_ms = config_.backoff_initial_ms;
  TransportResult last;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    pace();
    last = transport_->send(body);
    if (last.status == 401 || last.status == 403)
      throw AuthError("backend rejected credentials (HTTP " + std::to_string(last.status) + ")");
    if (last.status == 429 || last.status >= 500 || last.status <= 0) continue;  // transient
    if (last.status != 200)
      throw Error("backend returned HTTP " + std::to_string(last.status));

    try {
      json doc = json::parse(last.body);
      return normalize_reply(
          doc.at("choices").at(0).at("message").at("content").get<std::string>());
    } catch (const json::exception& e) {
      throw MalformedResponse(e.what());
    }
  }
  if (last.status == 429) throw RateLimited();
  if (last.timed_out) throw TimeoutError();
  if (last.status <= 0) throw TimeoutError();
  throw Error("backend failed after retries (HTTP " + std::to_string(last.status) + ")");
}

Hypothesis refine_llm(ChatClient& client, const std::string& source_text,
                      const std::optional<Hypothesis>& initial, const std::string& lang,
                      const std::vector<std::pair<std::string, std::string>>& constraints) {
  std::string first;
  if (initial.has_value()) {
    first = join_tokens(initial->trg_tokens);
  } else {
    PromptRequest req;
    req.kind = PromptKind::translation;
    req.source = source_text;
    req.lang = lang;
    first = client.query(build_prompt(req));
  }

  PromptRequest req;
  req.kind = PromptKind::refinement;
  req.source = source_text;
  req.translation = first;
  req.lang = lang;
  req.constraints = constraints;
  const std::string refined = client.query(build_prompt(req));

  Hypothesis hyp;
  hyp.trg_tokens = tokenize(refined);
  hyp.log_score = 0.0;
  hyp.stage = Stage::LLM;
  return hyp;
}

std::vector<LlmOutcome> refine_batch(ChatClient& client, const std::vector<LlmTask>& tasks,
                                     const std::string& lang) {
  std::vector<LlmOutcome> outcomes(tasks.size());
  const int workers =
      std::max(1, std::min<int>(client.config().max_in_flight, static_cast<int>(tasks.size())));

  std::atomic<std::size_t> next{0};
  auto run = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const LlmTask& task = tasks[i];
      outcomes[i].id = task.id;
      try {
        outcomes[i].hyp =
            refine_llm(client, task.source_text, task.initial, lang, task.constraints);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

}  // namespace termkit
