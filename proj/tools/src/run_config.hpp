#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace disent::cli {

// Bad flags, bad config keys, malformed values: exit code 2 territory.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat `key = value` configuration with a fixed per-command schema.
// Resolution order: schema defaults, then the config file, then flag
// overrides. Unknown keys fail fast, and the effective map is echoed to
// <out>/config.resolved in a form load_file() parses back identically.
class RunConfig {
 public:
  explicit RunConfig(
      std::vector<std::pair<std::string, std::string>> defaults);

  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, std::string value);

  const std::string& raw(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_seed(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  // Comma-separated doubles; an empty value is an empty list.
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  void write_resolved(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace disent::cli
