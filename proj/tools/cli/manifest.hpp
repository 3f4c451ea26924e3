#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cdrc::cli {

std::uint64_t fnv1a(std::string_view bytes);
std::string fnv1a_file(const std::filesystem::path& path);  // 16 hex digits

class Manifest {
 public:
  Manifest(std::string command, nlohmann::json config);

  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  /// Stamps the finish time and writes pretty JSON.
  void write(const std::filesystem::path& path);

 private:
  std::string command_;
  nlohmann::json config_;
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
  std::string started_;
};

}  // namespace cdrc::cli
