#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fedfac {

inline constexpr const char* kVersion = "0.1.0";

std::uint64_t fnv1a_digest(const std::string& bytes);
std::uint64_t fnv1a_file_digest(const std::string& path);
std::string digest_hex(std::uint64_t digest);

/// Record of one CLI invocation: resolved configuration and the digests of
/// everything it wrote. Every run directory carries one as manifest.json.
struct RunManifest {
  std::string command;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_echo;
  std::string started_at;
  std::string finished_at;

  struct Output {
    std::string path;  // relative to the run directory
    std::uint64_t bytes = 0;
    std::string digest;
  };
  std::vector<Output> outputs;

  /// Digest a freshly written file and append it to the output list.
  void add_output(const std::string& run_dir, const std::string& relative_path);

  void write(const std::string& path) const;
  static RunManifest read(const std::string& path);

  /// Re-read every listed output and compare digests.
  bool verify_outputs(const std::string& run_dir) const;
};

std::string timestamp_utc();

}  // namespace fedfac
