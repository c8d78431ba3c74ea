#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "jsonl.hpp"
#include "synthq/error.hpp"
#include "synthq/hashing.hpp"

namespace synthq::detail {

namespace {

constexpr char kMagic[8] = {'S', 'Y', 'N', 'T', 'H', 'Q', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_doubles(std::string& out, const std::vector<double>& xs) {
  for (double x : xs) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::string arrays;
  arrays.reserve(8 * (data.projection.size() + data.adam_m.size() + data.adam_v.size() +
                      data.best_projection.size()));
  put_doubles(arrays, data.projection);
  put_doubles(arrays, data.adam_m);
  put_doubles(arrays, data.adam_v);
  put_doubles(arrays, data.best_projection);

  nlohmann::json header = data.header;
  header["arrays"] = {{"projection", data.projection.size()},
                      {"adam_m", data.adam_m.size()},
                      {"adam_v", data.adam_v.size()},
                      {"best_projection", data.best_projection.size()}};
  header["arrays_sha256"] = sha256_hex(arrays);
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u64(out, header_text.size());
  out += header_text;
  out += arrays;
  write_file_atomic(path, out);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto bad = [&](const std::string& why) {
    return Error("checkpoint " + path.string() + ": " + why);
  };
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw bad("not a synthq checkpoint");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto version = static_cast<std::uint32_t>(get_u64(raw + 8, 4));
  if (version != kVersion) throw bad("unsupported version " + std::to_string(version));
  const std::uint64_t header_len = get_u64(raw + 12, 8);
  if (header_len > bytes.size() - 20) throw bad("truncated header");

  CheckpointData data;
  try {
    data.header = nlohmann::json::parse(bytes.begin() + 20,
                                        bytes.begin() + 20 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception&) {
    throw bad("malformed header");
  }
  const std::string_view arrays(bytes.data() + 20 + header_len, bytes.size() - 20 - header_len);
  if (sha256_hex(arrays) != data.header.value("arrays_sha256", "")) throw bad("array checksum mismatch");

  const auto& sizes = data.header.at("arrays");
  std::size_t offset = 0;
  auto take = [&](const char* name, std::vector<double>& dst) {
    const auto n = sizes.at(name).get<std::size_t>();
    if (arrays.size() - offset < 8 * n) throw bad("truncated array " + std::string(name));
    dst.resize(n);
    const auto* p = reinterpret_cast<const unsigned char*>(arrays.data() + offset);
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::bit_cast<double>(get_u64(p + 8 * i, 8));
    offset += 8 * n;
  };
  take("projection", data.projection);
  take("adam_m", data.adam_m);
  take("adam_v", data.adam_v);
  take("best_projection", data.best_projection);
  if (offset != arrays.size()) throw bad("trailing bytes");
  return data;
}

}  // namespace synthq::detail
