#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace synthq {

/// Transport for chat-completion requests. post() sends one request and
/// returns the raw response body, throwing HttpError on failure.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string post(const nlohmann::json& payload) = 0;
  virtual std::string endpoint() const = 0;
};

/// OpenAI-compatible POST <endpoint> with a bearer token. The API key is read
/// from the named environment variable; when it is unset no Authorization
/// header is sent (local servers).
class OpenAiChatClient final : public ChatClient {
 public:
  OpenAiChatClient(std::string endpoint_url, std::string_view api_key_env,
                   std::chrono::seconds timeout = std::chrono::seconds(120));
  ~OpenAiChatClient() override;

  /// Append every request/response pair as a JSON line to `path`.
  void log_transcripts(std::filesystem::path path);

  std::string post(const nlohmann::json& payload) override;
  std::string endpoint() const override { return endpoint_url_; }

 private:
  struct Impl;
  std::string endpoint_url_;
  std::unique_ptr<Impl> impl_;
};

/// choices[0].message.content of a chat-completions response body.
std::string extract_completion_text(std::string_view response_body);

}  // namespace synthq
