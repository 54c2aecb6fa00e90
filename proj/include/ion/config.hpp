#ifndef ION_CONFIG_HPP_
#define ION_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

namespace ion {

// Flat `key = value` config text with # comments. Every key must be consumed
// by a typed take_*() call; finish() rejects unknown keys.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  std::string take_string(const std::string& key, const std::string& fallback);
  int take_int(const std::string& key, int fallback);
  double take_double(const std::string& key, double fallback);
  bool take_bool(const std::string& key, bool fallback);
  std::vector<std::string> take_list(const std::string& key, const std::vector<std::string>& fallback);

  // Throws if any parsed key was never taken.
  void finish() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::string origin_;
  std::map<std::string, Entry> entries_;
};

}  // namespace ion

#endif  // ION_CONFIG_HPP_
