#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rexplain::detail {

// Scans free-form text for balanced, parseable JSON objects. Replies from
// chat models routinely wrap JSON in prose or code fences; this walks the
// text tracking brace depth and string state, attempting a parse at each
// balanced candidate.
inline std::vector<nlohmann::json> scan_json_objects(const std::string& text) {
  std::vector<nlohmann::json> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string::npos;
    for (std::size_t j = i; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          end = j;
          break;
        }
      }
    }
    if (end == std::string::npos) {
      ++i;
      continue;
    }
    const std::string candidate = text.substr(i, end - i + 1);
    nlohmann::json parsed = nlohmann::json::parse(candidate, nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) {
      found.push_back(std::move(parsed));
      i = end + 1;
    } else {
      ++i;
    }
  }
  return found;
}

inline std::optional<nlohmann::json> first_json_object(const std::string& text) {
  auto objects = scan_json_objects(text);
  if (objects.empty()) return std::nullopt;
  return std::move(objects.front());
}

// Case-insensitive object lookup.
inline const nlohmann::json* find_key_ci(const nlohmann::json& obj, const std::string& key) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& k = it.key();
    if (k.size() != key.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(k[i])) !=
          std::tolower(static_cast<unsigned char>(key[i]))) {
        match = false;
        break;
      }
    }
    if (match) return &it.value();
  }
  return nullptr;
}

// Accepts numbers and numeric strings.
inline std::optional<double> as_number(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t pos = 0;
      const std::string s = v.get<std::string>();
      const double x = std::stod(s, &pos);
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == s.size()) return x;
    } catch (...) {
    }
  }
  return std::nullopt;
}

}  // namespace rexplain::detail
