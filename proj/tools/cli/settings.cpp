#include "cli/settings.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cdrc/error.hpp"

namespace cdrc::cli {

using nlohmann::json;

double parse_double(std::string_view text, std::string_view what) {
  const std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ArgumentError("invalid number '" + s + "' for " + std::string(what));
  }
  return v;
}

void Settings::overlay_file(const std::filesystem::path& path, std::string_view command) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config file " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError("config file must hold a JSON object");
  const std::string cmd(command);
  const json& layer = doc.contains(cmd) && doc[cmd].is_object() ? doc[cmd] : doc;
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    if (it.value().is_object()) continue;
    values_[it.key()] = it.value();
  }
}

void Settings::overlay_environment() {
  if (const char* seed = std::getenv("CDRC_SEED"); seed && *seed) values_["seed"] = std::string(seed);
  if (const char* threads = std::getenv("CDRC_THREADS"); threads && *threads) values_["threads"] = std::string(threads);
}

bool Settings::has(const std::string& key) const {
  return values_.contains(key) && !values_[key].is_null() && !(values_[key].is_string() && values_[key].get<std::string>().empty());
}

const json& Settings::get(const std::string& key) const {
  if (!has(key)) throw ArgumentError("missing required option --" + key);
  return values_[key];
}

std::string Settings::text(const std::string& key) const {
  const json& v = get(key);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

double Settings::number(const std::string& key) const {
  const json& v = get(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_double(v.get<std::string>(), "--" + key);
  throw ArgumentError("option --" + key + " must be a number");
}

std::size_t Settings::count(const std::string& key) const {
  const double v = number(key);
  if (!(v >= 0) || v != std::floor(v) || v > 1e15) {
    throw ArgumentError("option --" + key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t Settings::seed() const {
  const json& v = get("seed");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || s.front() == '-') throw ArgumentError("invalid seed '" + s + "'");
  return out;
}

bool Settings::flag(const std::string& key) const {
  if (!values_.contains(key)) return false;
  const json& v = values_[key];
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() != 0.0;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no" || s.empty()) return false;
  }
  throw ArgumentError("option --" + key + " must be true or false");
}

std::vector<std::string> Settings::texts(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  const json& v = values_[key];
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    return out;
  }
  std::stringstream ss(v.is_string() ? v.get<std::string>() : v.dump());
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<double> Settings::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : texts(key)) out.push_back(parse_double(s, "--" + key));
  return out;
}

}  // namespace cdrc::cli
