#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cdrc::cli {

/// Effective configuration of one command. Values are layered: defaults,
/// then the --config file, then CDRC_SEED / CDRC_THREADS, then explicit flags.
class Settings {
 public:
  explicit Settings(nlohmann::json defaults) : values_(std::move(defaults)) {}

  /// Top-level keys, or the object under `command` when the file has one.
  void overlay_file(const std::filesystem::path& path, std::string_view command);
  void overlay_environment();
  void set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }

  bool has(const std::string& key) const;
  std::string text(const std::string& key) const;
  double number(const std::string& key) const;
  std::size_t count(const std::string& key) const;  // non-negative integer
  std::uint64_t seed() const;
  bool flag(const std::string& key) const;
  std::vector<std::string> texts(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;

  const nlohmann::json& effective() const noexcept { return values_; }

 private:
  const nlohmann::json& get(const std::string& key) const;
  nlohmann::json values_;
};

double parse_double(std::string_view text, std::string_view what);

}  // namespace cdrc::cli
