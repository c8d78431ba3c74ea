#include "synthq/llm_client.hpp"

#include <cstdlib>
#include <fstream>

#include "http_util.hpp"
#include "synthq/error.hpp"

namespace synthq {

struct OpenAiChatClient::Impl {
  std::string path;
  std::unique_ptr<httplib::Client> client;
  httplib::Headers headers;
  std::mutex mutex;
  std::optional<std::filesystem::path> transcript;
};

OpenAiChatClient::OpenAiChatClient(std::string endpoint_url, std::string_view api_key_env,
                                   std::chrono::seconds timeout)
    : endpoint_url_(std::move(endpoint_url)), impl_(std::make_unique<Impl>()) {
  const auto url = detail::parse_url(endpoint_url_);
  impl_->path = url.path;
  impl_->client = detail::make_client(url.origin, timeout);
  if (!api_key_env.empty()) {
    if (const char* key = std::getenv(std::string(api_key_env).c_str()); key && *key) {
      impl_->headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
}

OpenAiChatClient::~OpenAiChatClient() = default;

void OpenAiChatClient::log_transcripts(std::filesystem::path path) {
  impl_->transcript = std::move(path);
}

std::string OpenAiChatClient::post(const nlohmann::json& payload) {
  // httplib::Client is not safe for concurrent requests.
  std::lock_guard lock(impl_->mutex);
  std::string body = detail::post_json(*impl_->client, impl_->path, payload.dump(), impl_->headers);
  if (impl_->transcript) {
    std::ofstream out(*impl_->transcript, std::ios::app);
    nlohmann::json line = {{"endpoint", endpoint_url_}, {"request", payload}, {"response", body}};
    out << line.dump() << '\n';
  }
  return body;
}

std::string extract_completion_text(std::string_view response_body) {
  nlohmann::json res;
  try {
    res = nlohmann::json::parse(response_body);
  } catch (const nlohmann::json::exception&) {
    throw Error("chat completion response is not JSON");
  }
  const auto* choices = res.contains("choices") ? &res["choices"] : nullptr;
  if (choices == nullptr || !choices->is_array() || choices->empty()) {
    throw Error("chat completion response has no choices");
  }
  const auto& choice = (*choices)[0];
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string()) {
    throw Error("chat completion response has no message content");
  }
  return choice["message"]["content"].get<std::string>();
}

}  // namespace synthq
