#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace humor {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string digest_hex(std::uint64_t h);
std::string digest_bytes(std::string_view bytes);
std::string digest_file(const std::string& path);

// One manifest per CLI run: what ran, with which configuration and inputs,
// and what it produced. The timestamp is the only field that varies between
// otherwise identical runs.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;
  std::vector<std::string> output_paths;

  nlohmann::json to_json() const;
  void add_input(const std::string& path);
  void write(const std::string& path) const;
};

}  // namespace humor
