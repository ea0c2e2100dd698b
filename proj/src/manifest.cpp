#include "dplopt/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "dplopt/error.hpp"

namespace dplopt {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, value >>= 4) out[i] = digits[value & 0xf];
  return out;
}

void RunManifest::add_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  inputs.push_back({path.string(), hex64(fnv1a64(buf.str()))});
}

Json RunManifest::to_json() const {
  Json j;
  j["command"] = command;
  Json in = Json::array();
  for (const auto& i : inputs) in.push_back({{"path", i.path}, {"fnv1a64", i.hash}});
  j["inputs"] = std::move(in);
  j["config"] = config;
  j["version"] = version;
  j["seed"] = seed;
  return j;
}

std::string RunManifest::digest() const { return hex64(fnv1a64(to_json().dump())); }

Json RunManifest::sidecar(const std::string& started, const std::string& finished) const {
  Json j = to_json();
  j["digest"] = digest();
  j["started_at"] = started;
  j["finished_at"] = finished;
  return j;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dplopt
