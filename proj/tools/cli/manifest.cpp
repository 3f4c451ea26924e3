#include "cli/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>

#include "cdrc/error.hpp"

#ifndef CDRC_VERSION
#define CDRC_VERSION "dev"
#endif

namespace cdrc::cli {
namespace {

std::string now_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(bytes));
}

Manifest::Manifest(std::string command, nlohmann::json config)
    : command_(std::move(command)), config_(std::move(config)), started_(now_utc()) {}

void Manifest::add_input(const std::string& role, const std::filesystem::path& path) {
  inputs_[role] = {{"path", path.string()}, {"fnv1a", fnv1a_file(path)}};
}

void Manifest::add_output(const std::filesystem::path& path) {
  outputs_.push_back({{"path", path.filename().string()}, {"fnv1a", fnv1a_file(path)}});
}

void Manifest::write(const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["command"] = command_;
  doc["version"] = CDRC_VERSION;
  doc["config"] = config_;
  doc["config_hash"] = hex64(fnv1a(config_.dump()));
  doc["inputs"] = inputs_;
  doc["outputs"] = outputs_;
  for (auto it = extra_.begin(); it != extra_.end(); ++it) doc[it.key()] = it.value();
  doc["started"] = started_;
  doc["finished"] = now_utc();
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace cdrc::cli
