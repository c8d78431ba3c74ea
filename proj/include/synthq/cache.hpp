#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "synthq/error.hpp"

namespace synthq {

class CacheCorruption : public Error {
 public:
  using Error::Error;
};

/// Canonical request bytes: sorted keys, no insignificant whitespace.
std::string canonical_payload(std::string_view endpoint, const nlohmann::json& payload);

/// Content-addressed store of remote responses, one file per key at
/// `<root>/<first two hex chars>/<key>.bin`.
///
/// Each file carries a one-line JSON header with the value's SHA-256 and
/// creation time; a mismatch on read raises CacheCorruption. Writes go to a
/// unique temp file and are renamed into place, so concurrent readers only
/// ever observe complete entries.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  static std::string key_for(std::string_view canonical_bytes);
  std::filesystem::path path_for(std::string_view key) const;

  /// Returns the cached value for `canonical_bytes`, or invokes `remote`,
  /// stores its result and returns it. Exceptions from `remote` propagate and
  /// nothing is stored.
  std::string get_or_call(std::string_view canonical_bytes,
                          const std::function<std::string()>& remote);

  /// Cached value if present and intact.
  std::optional<std::string> lookup(std::string_view key) const;
  void store(std::string_view key, std::string_view value);

 private:
  std::filesystem::path root_;
  std::mutex write_mutex_;
};

}  // namespace synthq
