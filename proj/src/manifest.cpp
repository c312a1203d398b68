#include "fedfac/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <json.hpp>

#include "fedfac/textio.hpp"

namespace fedfac {

std::uint64_t fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file_digest(const std::string& path) {
  return fnv1a_digest(read_text_file(path));
}

std::string digest_hex(std::uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_output(const std::string& run_dir,
                             const std::string& relative_path) {
  Output out;
  out.path = relative_path;
  const std::string content = read_text_file(run_dir + "/" + relative_path);
  out.bytes = content.size();
  out.digest = digest_hex(fnv1a_digest(content));
  outputs.push_back(std::move(out));
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["version"] = version;
  j["seed"] = seed;
  j["config"] = config_echo;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["outputs"] = nlohmann::json::array();
  for (const auto& out : outputs) {
    j["outputs"].push_back(
        {{"path", out.path}, {"bytes", out.bytes}, {"digest", out.digest}});
  }
  write_text_file(path, j.dump(2) + "\n");
}

RunManifest RunManifest::read(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config_echo = j.at("config").get<std::map<std::string, std::string>>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  for (const auto& out : j.at("outputs")) {
    m.outputs.push_back({out.at("path").get<std::string>(),
                         out.at("bytes").get<std::uint64_t>(),
                         out.at("digest").get<std::string>()});
  }
  return m;
}

bool RunManifest::verify_outputs(const std::string& run_dir) const {
  for (const auto& out : outputs) {
    try {
      const std::string content = read_text_file(run_dir + "/" + out.path);
      if (content.size() != out.bytes) return false;
      if (digest_hex(fnv1a_digest(content)) != out.digest) return false;
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

}  // namespace fedfac
