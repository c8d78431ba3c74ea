#include "synthq/cache.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "synthq/hashing.hpp"

namespace synthq {

namespace {

constexpr std::string_view kMagic = "synthq-cache-v1";

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheCorruption("cache entry unreadable: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::atomic<unsigned long> g_tmp_counter{0};

}  // namespace

std::string canonical_payload(std::string_view endpoint, const nlohmann::json& payload) {
  // nlohmann::json objects are std::map-backed, so dump() emits sorted keys.
  nlohmann::json envelope = {{"endpoint", std::string(endpoint)}, {"payload", payload}};
  return envelope.dump();
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

std::string ResponseCache::key_for(std::string_view canonical_bytes) {
  return sha256_hex(canonical_bytes);
}

std::filesystem::path ResponseCache::path_for(std::string_view key) const {
  return root_ / std::string(key.substr(0, 2)) / (std::string(key) + ".bin");
}

std::optional<std::string> ResponseCache::lookup(std::string_view key) const {
  const auto path = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;

  const std::string raw = read_all(path);
  const auto nl = raw.find('\n');
  if (nl == std::string::npos) throw CacheCorruption("cache entry has no header: " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(raw.substr(0, nl));
  } catch (const nlohmann::json::exception&) {
    throw CacheCorruption("cache entry header unparsable: " + path.string());
  }
  if (!header.is_object() || header.value("magic", "") != kMagic ||
      header.value("key", "") != key) {
    throw CacheCorruption("cache entry header mismatch: " + path.string());
  }
  std::string value = raw.substr(nl + 1);
  if (header.value("size", std::size_t{0}) != value.size() ||
      header.value("sha256", "") != sha256_hex(value)) {
    throw CacheCorruption("cache entry checksum mismatch: " + path.string());
  }
  return value;
}

void ResponseCache::store(std::string_view key, std::string_view value) {
  const auto path = path_for(key);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
  nlohmann::json header = {{"magic", kMagic},
                           {"key", std::string(key)},
                           {"sha256", sha256_hex(value)},
                           {"size", value.size()},
                           {"created_at", seconds}};

  std::lock_guard lock(write_mutex_);
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(g_tmp_counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    const std::string head = header.dump() + "\n";
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
    if (!out) throw Error("cache write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string ResponseCache::get_or_call(std::string_view canonical_bytes,
                                       const std::function<std::string()>& remote) {
  const std::string key = key_for(canonical_bytes);
  if (auto hit = lookup(key)) return *std::move(hit);
  std::string value = remote();
  store(key, value);
  return value;
}

}  // namespace synthq
