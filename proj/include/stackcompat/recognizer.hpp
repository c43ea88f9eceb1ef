#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stackcompat/common.hpp"
#include "stackcompat/dictionary.hpp"
#include "stackcompat/matching.hpp"
#include "stackcompat/version.hpp"

namespace stackcompat {

enum class MentionKind { component, version };

/// Which version grammar produced a version mention.
enum class VersionPattern { dotted = 1, wildcard = 2, component_adjacent = 3 };

struct Mention {
  MentionKind kind = MentionKind::component;
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::string> component_id;  // set on component mentions and on pre-bound versions
  std::optional<Layer> layer;
  std::optional<Version> version;
  std::optional<VersionPattern> pattern;
  std::size_t sentence_index = 0;
  std::size_t token_index = 0;
  bool joint = false;  // emitted together with its partner by the component-adjacent pattern
};

/// A component-version pair bound within one paragraph, with the indexes of
/// the mentions that produced it.
struct Binding {
  VersionedComponent component;
  std::size_t component_mention = 0;
  std::size_t version_mention = 0;
};

// ---------------------------------------------------------------------------
// Text geometry

/// Start offsets of sentences. A sentence ends at '.', '!' or '?' followed by
/// whitespace or end of text, so dotted versions never split a sentence.
inline std::vector<std::size_t> sentence_starts(std::string_view text) {
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() && is_space(text[i + 1])) {
      std::size_t j = i + 1;
      while (j < text.size() && is_space(text[j])) ++j;
      if (j < text.size()) starts.push_back(j);
    }
  }
  return starts;
}

inline bool is_token_char(char c) {
  return is_alnum(c) || c == '.' || c == '-' || c == '_' || c == '+' || c == '\'';
}

/// Start offsets of tokens (maximal runs of word characters and the
/// punctuation that occurs inside version strings and package names).
inline std::vector<std::size_t> token_starts(std::string_view text) {
  std::vector<std::size_t> starts;
  bool in_token = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const bool t = is_token_char(text[i]);
    if (t && !in_token) starts.push_back(i);
    in_token = t;
  }
  return starts;
}

inline std::size_t index_at(const std::vector<std::size_t>& starts, std::size_t offset) {
  auto it = std::upper_bound(starts.begin(), starts.end(), offset);
  return it == starts.begin() ? 0 : static_cast<std::size_t>(it - starts.begin() - 1);
}

namespace detail {

inline bool word_boundary_before(std::string_view s, std::size_t pos) {
  return pos == 0 || !is_alnum(s[pos - 1]);
}
inline bool word_boundary_after(std::string_view s, std::size_t end) {
  return end >= s.size() || !is_alnum(s[end]);
}

// A version token must not be glued to a preceding identifier or dotted
// path ("libcublas.so.10.0"), nor continue into further dotted parts.
inline bool version_left_ok(std::string_view s, std::size_t pos) {
  return pos == 0 || !(is_alnum(s[pos - 1]) || s[pos - 1] == '.');
}
inline bool version_right_ok(std::string_view s, std::size_t end) {
  if (end >= s.size()) return true;
  if (is_alnum(s[end])) return false;
  if (s[end] == '.' && end + 1 < s.size() && is_alnum(s[end + 1])) return false;
  return true;
}

inline std::size_t scan_digits(std::string_view s, std::size_t i) {
  while (i < s.size() && is_digit(s[i])) ++i;
  return i;
}

inline std::size_t skip_v(std::string_view s, std::size_t i) {
  return (i + 1 < s.size() && (s[i] == 'v' || s[i] == 'V') && is_digit(s[i + 1])) ? i + 1 : i;
}

// v?\d+(\.\d+){1,2}
inline std::optional<std::size_t> match_dotted(std::string_view s, std::size_t pos) {
  if (!version_left_ok(s, pos)) return std::nullopt;
  std::size_t i = skip_v(s, pos);
  std::size_t e = scan_digits(s, i);
  if (e == i) return std::nullopt;
  int groups = 0;
  while (groups < 2 && e + 1 < s.size() && s[e] == '.' && is_digit(s[e + 1])) {
    e = scan_digits(s, e + 1);
    ++groups;
  }
  if (groups == 0 || !version_right_ok(s, e)) return std::nullopt;
  return e;
}

// v?\d+(\.\d+)?\.x  (the wildcard suffix is required)
inline std::optional<std::size_t> match_wildcard(std::string_view s, std::size_t pos) {
  if (!version_left_ok(s, pos)) return std::nullopt;
  std::size_t i = skip_v(s, pos);
  std::size_t e = scan_digits(s, i);
  if (e == i) return std::nullopt;
  if (e + 1 < s.size() && s[e] == '.' && is_digit(s[e + 1])) {
    std::size_t e2 = scan_digits(s, e + 1);
    if (e2 + 1 < s.size() && s[e2] == '.' && (s[e2 + 1] == 'x' || s[e2 + 1] == 'X')) e = e2;
  }
  if (e + 1 < s.size() && s[e] == '.' && (s[e + 1] == 'x' || s[e + 1] == 'X')) {
    e += 2;
    if (version_right_ok(s, e)) return e;
  }
  return std::nullopt;
}

struct AliasHit {
  std::size_t start, end;
  const ComponentEntry* entry;
};

inline std::vector<AliasHit> alias_hits(std::string_view paragraph, const Dictionary& dict) {
  const auto lower = to_lower(paragraph);
  std::vector<AliasHit> hits;
  for (const auto& entry : dict.entries()) {
    for (const auto& alias : entry.aliases) {
      for (auto pos = lower.find(alias); pos != std::string::npos; pos = lower.find(alias, pos + 1)) {
        const auto end = pos + alias.size();
        if (word_boundary_before(lower, pos) && word_boundary_after(lower, end))
          hits.push_back({pos, end, &entry});
      }
    }
  }
  return hits;
}

// Longest match first, then leftmost; accepted spans never overlap.
template <class T, class Len>
std::vector<T> select_non_overlapping(std::vector<T> cands, Len&& extra_order) {
  std::stable_sort(cands.begin(), cands.end(), [&](const T& a, const T& b) {
    const auto la = a.end - a.start, lb = b.end - b.start;
    if (la != lb) return la > lb;
    if (a.start != b.start) return a.start < b.start;
    return extra_order(a) < extra_order(b);
  });
  std::vector<T> taken;
  for (auto& c : cands) {
    bool clash = std::any_of(taken.begin(), taken.end(),
                             [&](const T& t) { return c.start < t.end && t.start < c.end; });
    if (!clash) taken.push_back(std::move(c));
  }
  std::sort(taken.begin(), taken.end(), [](const T& a, const T& b) { return a.start < b.start; });
  return taken;
}

inline Mention make_component_mention(std::string_view paragraph, const AliasHit& h) {
  Mention m;
  m.kind = MentionKind::component;
  m.text = std::string(paragraph.substr(h.start, h.end - h.start));
  m.start = h.start;
  m.end = h.end;
  m.component_id = h.entry->id;
  m.layer = h.entry->layer;
  return m;
}

inline void assign_positions(std::string_view paragraph, std::vector<Mention>& mentions) {
  const auto sentences = sentence_starts(paragraph);
  const auto tokens = token_starts(paragraph);
  for (auto& m : mentions) {
    m.sentence_index = index_at(sentences, m.start);
    m.token_index = index_at(tokens, m.start);
  }
}

}  // namespace detail

/// Dictionary alias occurrences on word boundaries, case-insensitive.
/// Overlaps resolve longest-match-first, then leftmost.
inline std::vector<Mention> recognize_components(std::string_view paragraph, const Dictionary& dict) {
  if (dict.empty()) throw usage_error("recognize_components requires a non-empty dictionary");
  auto hits = detail::select_non_overlapping(detail::alias_hits(paragraph, dict),
                                             [](const detail::AliasHit& h) { return h.entry->id; });
  std::vector<Mention> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.push_back(detail::make_component_mention(paragraph, h));
  detail::assign_positions(paragraph, out);
  return out;
}

/// Version tokens under the three grammars. Component-adjacent matches
/// ("cuda-8", "python v3") emit a component mention and a version mention
/// marked `joint`, with the version pre-bound to the component.
inline std::vector<Mention> recognize_versions(std::string_view paragraph, const Dictionary& dict) {
  struct Cand {
    std::size_t start, end;
    VersionPattern pattern;
    std::size_t digits_start = 0;
    const ComponentEntry* entry = nullptr;
    std::size_t alias_end = 0;
  };
  std::vector<Cand> cands;
  for (std::size_t pos = 0; pos < paragraph.size(); ++pos) {
    const char c = paragraph[pos];
    if (!is_digit(c) && c != 'v' && c != 'V') continue;
    if (auto e = detail::match_dotted(paragraph, pos)) cands.push_back({pos, *e, VersionPattern::dotted, pos});
    if (auto e = detail::match_wildcard(paragraph, pos))
      cands.push_back({pos, *e, VersionPattern::wildcard, pos});
  }
  for (const auto& hit : detail::alias_hits(paragraph, dict)) {
    std::size_t i = hit.end;
    if (i >= paragraph.size() || (paragraph[i] != '-' && paragraph[i] != ' ' && paragraph[i] != '_')) continue;
    ++i;
    const std::size_t digits_start = i;
    i = detail::skip_v(paragraph, i);
    const std::size_t e = detail::scan_digits(paragraph, i);
    if (e == i || !detail::version_right_ok(paragraph, e)) continue;
    cands.push_back({hit.start, e, VersionPattern::component_adjacent, digits_start, hit.entry, hit.end});
  }
  auto chosen = detail::select_non_overlapping(std::move(cands), [](const Cand& c) {
    return static_cast<int>(c.pattern);
  });

  std::vector<Mention> out;
  for (const auto& c : chosen) {
    Mention v;
    v.kind = MentionKind::version;
    v.pattern = c.pattern;
    v.start = c.digits_start;
    v.end = c.end;
    v.text = std::string(paragraph.substr(v.start, v.end - v.start));
    v.version = normalize_version(v.text);
    if (c.pattern == VersionPattern::component_adjacent) {
      auto comp = detail::make_component_mention(paragraph, {c.start, c.alias_end, c.entry});
      comp.joint = true;
      comp.pattern = c.pattern;
      v.joint = true;
      v.component_id = c.entry->id;
      v.layer = c.entry->layer;
      out.push_back(std::move(comp));
    }
    out.push_back(std::move(v));
  }
  detail::assign_positions(paragraph, out);
  return out;
}

/// All mentions of a paragraph, sorted by start offset. Component mentions
/// that overlap a version span are replaced by the joint ones.
inline std::vector<Mention> recognize(std::string_view paragraph, const Dictionary& dict) {
  auto versions = recognize_versions(paragraph, dict);
  auto comps = recognize_components(paragraph, dict);
  std::vector<Mention> out = versions;
  for (auto& c : comps) {
    bool clash = std::any_of(versions.begin(), versions.end(), [&](const Mention& v) {
      if (v.kind == MentionKind::version && !v.joint)
        return c.start < v.end && v.start < c.end;
      if (v.kind == MentionKind::component && v.joint)
        return c.start < v.end && v.start < c.end;
      return false;
    });
    if (!clash) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const Mention& a, const Mention& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.kind < b.kind;
  });
  return out;
}

/// Default binding cost: token distance plus a large penalty across sentences.
struct TokenDistanceCost {
  long cross_sentence_penalty = 1000;

  long operator()(const Mention& component, const Mention& version) const {
    const long a = static_cast<long>(component.token_index), b = static_cast<long>(version.token_index);
    long cost = a > b ? a - b : b - a;
    if (component.sentence_index != version.sentence_index) cost += cross_sentence_penalty;
    return cost;
  }
};

/// Indexes of the mentions that take part in stable matching (joint pairs
/// are excluded).
struct MatchingSides {
  std::vector<std::size_t> components;
  std::vector<std::size_t> versions;
};

inline MatchingSides matching_sides(const std::vector<Mention>& mentions) {
  MatchingSides s;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    if (mentions[i].joint) continue;
    (mentions[i].kind == MentionKind::component ? s.components : s.versions).push_back(i);
  }
  return s;
}

/// One-to-one binding of component mentions to version mentions by weighted
/// stable matching. Both sides rank partners by ascending cost; cost ties go
/// to the leftmost mention. Joint (component-adjacent) matches are pre-bound.
/// Output is ordered by component mention offset.
template <class Cost = TokenDistanceCost>
std::vector<Binding> bind_versions(const std::vector<Mention>& mentions, Cost cost = {}) {
  std::vector<Binding> out;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const auto& v = mentions[i];
    if (v.kind != MentionKind::version || !v.joint) continue;
    std::size_t comp_index = i;
    for (std::size_t k = 0; k < mentions.size(); ++k)
      if (mentions[k].joint && mentions[k].kind == MentionKind::component && mentions[k].end <= v.start &&
          mentions[k].component_id == v.component_id)
        comp_index = k;
    out.push_back({{*v.component_id, v.layer.value_or(Layer::library), *v.version}, comp_index, i});
  }

  const auto sides = matching_sides(mentions);
  auto pair_cost = [&](std::size_t c, std::size_t v) {
    return cost(mentions[sides.components[c]], mentions[sides.versions[v]]);
  };
  auto m = stable_match(
      sides.components.size(), sides.versions.size(), pair_cost,
      [&](std::size_t c) { return mentions[sides.components[c]].start; },
      [&](std::size_t v) { return mentions[sides.versions[v]].start; });
  for (std::size_t c = 0; c < sides.components.size(); ++c) {
    if (!m.left_partner[c]) continue;
    const auto& cm = mentions[sides.components[c]];
    const auto vi = sides.versions[*m.left_partner[c]];
    out.push_back({{*cm.component_id, cm.layer.value_or(Layer::library), *mentions[vi].version},
                   sides.components[c], vi});
  }
  std::sort(out.begin(), out.end(), [&](const Binding& a, const Binding& b) {
    return mentions[a.component_mention].start < mentions[b.component_mention].start;
  });
  return out;
}

}  // namespace stackcompat
