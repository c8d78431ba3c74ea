#pragma once

// Internal: URL splitting and JSON POST on top of cpp-httplib.

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include "httplib.h"
#include "json.hpp"
#include "synthq/error.hpp"

namespace synthq::detail {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

inline ParsedUrl parse_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error("invalid URL (no scheme): " + std::string(url));
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = std::string(url.substr(0, path_start));
  out.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  return out;
}

inline std::string join_path(std::string base, std::string_view suffix) {
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + std::string(suffix);
}

inline std::unique_ptr<httplib::Client> make_client(const std::string& origin,
                                                    std::chrono::seconds timeout) {
  auto cli = std::make_unique<httplib::Client>(origin);
  cli->set_connection_timeout(timeout);
  cli->set_read_timeout(timeout);
  cli->set_write_timeout(timeout);
  return cli;
}

/// POST JSON, return the response body. Non-2xx responses and transport
/// failures (status 0) throw HttpError.
inline std::string post_json(httplib::Client& cli, const std::string& path, const std::string& body,
                             const httplib::Headers& headers = {}) {
  auto res = cli.Post(path, headers, body, "application/json");
  if (!res) {
    throw HttpError(0, "request to " + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw HttpError(res->status, "HTTP " + std::to_string(res->status) + " from " + path +
                                           ": " + res->body.substr(0, 200));
  }
  return res->body;
}

inline nlohmann::json get_json(httplib::Client& cli, const std::string& path) {
  auto res = cli.Get(path);
  if (!res) throw HttpError(0, "request to " + path + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw HttpError(res->status, "HTTP " + std::to_string(res->status) + " from " + path);
  }
  return nlohmann::json::parse(res->body);
}

}  // namespace synthq::detail
