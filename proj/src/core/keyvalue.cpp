#include "marflow/core/keyvalue.hpp"

#include <fstream>

#include "marflow/core/error.hpp"

namespace marflow {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<KeyValueLine> parse_key_values(std::istream& in) {
  std::vector<KeyValueLine> out;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key=value");
    KeyValueLine kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), number};
    if (kv.key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValueLine> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_key_values(in);
}

std::map<std::string, std::string> read_key_value_map(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  for (auto& kv : read_key_values(path)) out[kv.key] = kv.value;
  return out;
}

}  // namespace marflow
