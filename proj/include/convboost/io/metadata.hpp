#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "convboost/random.hpp"

namespace convboost::io {

inline constexpr const char* kToolVersion = "convboost 1.0.0";

// Ordered key/value provenance record embedded in every output file.
struct Metadata {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(std::string key, std::string value) {
    for (auto& [k, v] : entries)
      if (k == key) {
        v = std::move(value);
        return;
      }
    entries.emplace_back(std::move(key), std::move(value));
  }

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return std::nullopt;
  }

  friend bool operator==(const Metadata&, const Metadata&) = default;
};

inline std::string content_fingerprint(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

}  // namespace convboost::io
