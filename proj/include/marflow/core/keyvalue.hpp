#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace marflow {

struct KeyValueLine {
  std::string key;
  std::string value;
  int line = 0;
};

// Parses "key = value" lines; blank lines and lines starting with '#' are
// skipped. Throws ConfigError (with the line number) on malformed lines.
std::vector<KeyValueLine> parse_key_values(std::istream& in);
std::vector<KeyValueLine> read_key_values(const std::filesystem::path& path);
std::map<std::string, std::string> read_key_value_map(const std::filesystem::path& path);

}  // namespace marflow
