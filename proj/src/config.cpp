#include "ion/config.hpp"

#include <fstream>
#include <sstream>

#include "ion/tensor.hpp"

namespace ion {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), "config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_string(buf.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    check(eq != std::string::npos, origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    check(!key.empty(), origin + ":" + std::to_string(line_no) + ": empty key");
    check(cfg.entries_.count(key) == 0, origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    cfg.entries_[key] = Entry{value, line_no, false};
  }
  return cfg;
}

std::string KeyValueConfig::take_string(const std::string& key, const std::string& fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  return it->second.value;
}

int KeyValueConfig::take_int(const std::string& key, int fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  try {
    size_t pos = 0;
    int v = std::stoi(it->second.value, &pos);
    check(pos == it->second.value.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(origin_ + ":" + std::to_string(it->second.line) + ": key '" + key +
                                "' is not an integer: '" + it->second.value + "'");
  }
}

double KeyValueConfig::take_double(const std::string& key, double fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  try {
    size_t pos = 0;
    double v = std::stod(it->second.value, &pos);
    check(pos == it->second.value.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(origin_ + ":" + std::to_string(it->second.line) + ": key '" + key +
                                "' is not a number: '" + it->second.value + "'");
  }
}

bool KeyValueConfig::take_bool(const std::string& key, bool fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  const std::string& v = it->second.value;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument(origin_ + ":" + std::to_string(it->second.line) + ": key '" + key +
                              "' is not a boolean: '" + v + "'");
}

std::vector<std::string> KeyValueConfig::take_list(const std::string& key, const std::vector<std::string>& fallback) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  it->second.used = true;
  std::vector<std::string> out;
  std::istringstream is(it->second.value);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void KeyValueConfig::finish() const {
  std::string unknown;
  for (const auto& [key, entry] : entries_) {
    if (!entry.used) {
      if (!unknown.empty()) unknown += ", ";
      unknown += "'" + key + "' (line " + std::to_string(entry.line) + ")";
    }
  }
  check(unknown.empty(), origin_ + ": unknown config keys: " + unknown);
}

}  // namespace ion
