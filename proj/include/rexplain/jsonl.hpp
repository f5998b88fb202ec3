#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "rexplain/error.hpp"

namespace rexplain {

// Calls fn(record, line_number) for every non-empty line of a JSONL file.
// Line numbers are 1-based and reported in parse errors.
inline void for_each_jsonl_line(const std::filesystem::path& path,
                                const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(path.string(), lineno, "expected a JSON object");
    fn(rec, lineno);
  }
}

template <class T>
T require_field(const nlohmann::json& rec, const char* key, const std::filesystem::path& path,
                std::size_t lineno) {
  auto it = rec.find(key);
  if (it == rec.end()) {
    throw ParseError(path.string(), lineno, std::string("missing field \"") + key + "\"");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(path.string(), lineno, std::string("field \"") + key + "\" has the wrong type");
  }
}

}  // namespace rexplain
