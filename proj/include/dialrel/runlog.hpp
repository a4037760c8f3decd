#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dialrel {

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Reproduction record written next to every command's outputs: input paths
// with content hashes, the effective configuration and the seeds.
struct RunLog {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;

  void write(const std::filesystem::path& path) const;
};

}  // namespace dialrel
