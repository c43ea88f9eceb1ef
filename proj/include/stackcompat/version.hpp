#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stackcompat/common.hpp"

namespace stackcompat {

/// A version token as it appears in prose: 1 to 3 numeric segments, an
/// optional leading "v" and an optional trailing ".x" wildcard.
struct Version {
  std::string raw;
  std::vector<std::uint32_t> segments;
  // Digit count of each segment after the first, so calendar-style minors
  // ("16.04", "2020.02") keep their zero padding. The leading segment is
  // rendered without padding ("007.1" -> "7.1").
  std::vector<std::uint8_t> widths;
  bool wildcard = false;
  bool had_v_prefix = false;

  /// Canonical form: segments joined by "." plus ".x" for wildcards.
  std::string normalized() const {
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      auto digits = std::to_string(segments[i]);
      if (i) {
        out += '.';
        if (i < widths.size() && widths[i] > digits.size()) out.append(widths[i] - digits.size(), '0');
      }
      out += digits;
    }
    if (wildcard) out += ".x";
    return out;
  }

  /// Identity is the normalized form; the raw spelling is ignored.
  friend bool operator==(const Version& a, const Version& b) { return a.normalized() == b.normalized(); }
};

namespace detail {

// Parses the union of the three version grammars. Returns nullopt on mismatch.
inline std::optional<Version> parse_version(std::string_view raw) {
  Version v;
  v.raw = std::string(raw);
  std::size_t i = 0;
  if (i < raw.size() && (raw[i] == 'v' || raw[i] == 'V')) {
    v.had_v_prefix = true;
    ++i;
  }
  while (true) {
    if (i >= raw.size() || !is_digit(raw[i])) return std::nullopt;
    std::uint64_t value = 0;
    std::size_t digits = 0;
    while (i < raw.size() && is_digit(raw[i])) {
      value = value * 10 + static_cast<std::uint64_t>(raw[i] - '0');
      if (++digits > 9) return std::nullopt;
      ++i;
    }
    v.segments.push_back(static_cast<std::uint32_t>(value));
    v.widths.push_back(v.segments.size() == 1 ? 0 : static_cast<std::uint8_t>(digits));
    if (i == raw.size()) break;
    if (raw[i] != '.') return std::nullopt;
    ++i;
    if (i < raw.size() && (raw[i] == 'x' || raw[i] == 'X') && i + 1 == raw.size()) {
      v.wildcard = true;
      break;
    }
  }
  if (v.segments.size() > 3) return std::nullopt;
  if (v.wildcard && v.segments.size() > 2) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses and canonicalizes a version token. Throws on text outside the
/// version grammar.
inline Version normalize_version(std::string_view raw) {
  auto v = detail::parse_version(raw);
  if (!v) throw data_error("not a version: '" + std::string(raw) + "'");
  return *v;
}

inline bool is_version(std::string_view raw) { return detail::parse_version(raw).has_value(); }

/// Number of numerically equal leading segments.
inline std::size_t common_prefix(const Version& a, const Version& b) {
  std::size_t n = 0;
  while (n < a.segments.size() && n < b.segments.size() && a.segments[n] == b.segments[n]) ++n;
  return n;
}

/// Prefix subsumption: "1.13" matches "1.13.1", "3.x" matches "3.7.2".
/// A concrete version longer than a wildcard's prefix is also matched, so
/// the relation is symmetric.
inline bool version_matches(const Version& a, const Version& b) {
  return common_prefix(a, b) == std::min(a.segments.size(), b.segments.size());
}

}  // namespace stackcompat
