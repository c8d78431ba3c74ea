#pragma once

// Internal JSON-Lines helpers shared by the persistence code.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "synthq/error.hpp"

namespace synthq::detail {

using Json = nlohmann::json;

/// Calls `fn(object, line_number)` for every non-blank line. Malformed JSON
/// or a non-object line raises an error naming the file and line.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<bool(const Json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(path.string() + ": malformed JSON on line " + std::to_string(lineno));
    }
    if (!obj.is_object()) {
      throw Error(path.string() + ": line " + std::to_string(lineno) + " is not a JSON object");
    }
    if (!fn(obj, lineno)) break;
  }
}

inline std::string required_string(const Json& obj, std::string_view key, std::size_t lineno) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error("line " + std::to_string(lineno) + ": missing string field \"" +
                std::string(key) + "\"");
  }
  return it->get<std::string>();
}

/// Writes `contents` to a sibling temp file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string buf;
  for (const auto& row : rows) {
    buf += row.dump();
    buf += '\n';
  }
  write_file_atomic(path, buf);
}

}  // namespace synthq::detail
