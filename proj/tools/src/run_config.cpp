#include "run_config.hpp"

#include <fstream>
#include <set>

#include "disentangle/textio.hpp"

namespace disent::cli {

RunConfig::RunConfig(
    std::vector<std::pair<std::string, std::string>> defaults) {
  for (auto& [k, v] : defaults) values_.emplace(k, std::move(v));
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = [&] {
      return path.string() + ":" + std::to_string(lineno);
    };
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(where() + ": expected key = value");
    const std::string key{trim(body.substr(0, eq))};
    const std::string value{trim(body.substr(eq + 1))};
    if (key.empty()) throw UsageError(where() + ": empty key");
    if (!seen.insert(key).second)
      throw UsageError(where() + ": duplicate key '" + key + "'");
    set(key, value);
  }
}

void RunConfig::set(const std::string& key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw UsageError("unknown configuration key '" + key + "'");
  it->second = std::move(value);
}

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw UsageError("unknown configuration key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  try {
    return parse_double(raw(key));
  } catch (const std::invalid_argument&) {
    throw UsageError("key '" + key + "': not a number: '" + raw(key) + "'");
  }
}

long long RunConfig::get_int(const std::string& key) const {
  try {
    return parse_int(raw(key));
  } catch (const std::invalid_argument&) {
    throw UsageError("key '" + key + "': not an integer: '" + raw(key) + "'");
  }
}

std::uint64_t RunConfig::get_seed(const std::string& key) const {
  try {
    return parse_uint(raw(key));
  } catch (const std::invalid_argument&) {
    throw UsageError("key '" + key + "': not an unsigned integer: '" +
                     raw(key) + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("key '" + key + "': expected true or false, got '" + v +
                   "'");
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  const std::string_view v = trim(raw(key));
  if (v.empty()) return out;
  try {
    for (const auto& piece : split(v, ',')) out.push_back(parse_double(piece));
  } catch (const std::invalid_argument&) {
    throw UsageError("key '" + key + "': bad number list: '" + raw(key) + "'");
  }
  return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  const std::string_view v = trim(raw(key));
  if (v.empty()) return out;
  try {
    for (const auto& piece : split(v, ','))
      out.push_back(static_cast<int>(parse_int(piece)));
  } catch (const std::invalid_argument&) {
    throw UsageError("key '" + key + "': bad integer list: '" + raw(key) +
                     "'");
  }
  return out;
}

void RunConfig::write_resolved(const std::filesystem::path& dir) const {
  const auto path = dir / "config.resolved";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  if (!out) throw UsageError("write failed for " + path.string());
}

}  // namespace disent::cli
