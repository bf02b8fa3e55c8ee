#include "humor/manifest.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace humor {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::uint64_t h) {
  static const char* hex = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = hex[h & 0xf];
    h >>= 4;
  }
  return s;
}

std::string digest_bytes(std::string_view bytes) {
  return digest_hex(fnv1a64(bytes.data(), bytes.size()));
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for digest: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  return digest_bytes(s);
}

nlohmann::json RunManifest::to_json() const {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(
                        now.time_since_epoch())
                        .count();
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = seeds;
  j["input_digests"] = input_digests;
  j["output_paths"] = output_paths;
  j["tool_version"] = kToolVersion;
  j["timestamp_epoch_s"] = secs;
  return j;
}

void RunManifest::add_input(const std::string& path) {
  input_digests[path] = digest_file(path);
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << to_json().dump(2) << '\n';
}

}  // namespace humor
