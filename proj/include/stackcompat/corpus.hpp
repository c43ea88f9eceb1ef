#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackcompat/common.hpp"
#include "stackcompat/recognizer.hpp"

namespace stackcompat {

enum class PostKind { question, answer };

struct Post {
  std::uint64_t id = 0;
  std::string title;
  std::vector<std::string> paragraphs;
  std::set<std::string> tags;
  std::int64_t votes = 0;
  PostKind kind = PostKind::question;
  bool accepted = false;
  std::optional<std::uint64_t> parent_id;
};

/// Splits raw body text on blank lines; paragraphs are trimmed and empty
/// ones dropped.
inline std::vector<std::string> split_paragraphs(std::string_view body) {
  std::vector<std::string> out;
  std::string current;
  std::istringstream in{std::string(body)};
  std::string line;
  auto flush = [&] {
    auto t = trim(current);
    if (!t.empty()) out.push_back(std::move(t));
    current.clear();
  };
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
  }
  flush();
  return out;
}

/// Parses one corpus record. Throws data errors on schema violations.
inline Post post_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw data_error("record is not an object");
  Post p;
  try {
    const auto id = j.at("id").get<std::int64_t>();
    if (id <= 0) throw data_error("id must be positive");
    p.id = static_cast<std::uint64_t>(id);
    p.title = j.value("title", std::string{});
    const auto& body = j.at("body");
    if (body.is_string()) {
      p.paragraphs = split_paragraphs(body.get<std::string>());
    } else if (body.is_array()) {
      for (const auto& para : body) {
        auto t = trim(para.get<std::string>());
        if (!t.empty()) p.paragraphs.push_back(std::move(t));
      }
    } else {
      throw data_error("body must be a string or a list of strings");
    }
    if (j.contains("tags"))
      for (const auto& t : j.at("tags")) p.tags.insert(to_lower(trim(t.get<std::string>())));
    p.votes = j.value("votes", std::int64_t{0});
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "question") {
      p.kind = PostKind::question;
    } else if (kind == "answer") {
      p.kind = PostKind::answer;
    } else {
      throw data_error("kind must be 'question' or 'answer'");
    }
    p.accepted = j.value("accepted", false);
    if (j.contains("parent_id") && !j.at("parent_id").is_null())
      p.parent_id = j.at("parent_id").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw data_error(ex.what());
  }
  if (p.kind == PostKind::question && (p.accepted || p.parent_id))
    throw data_error("questions cannot carry 'accepted' or 'parent_id'");
  return p;
}

inline nlohmann::json to_json(const Post& p) {
  nlohmann::json j;
  j["id"] = p.id;
  j["title"] = p.title;
  j["body"] = p.paragraphs;
  j["tags"] = std::vector<std::string>(p.tags.begin(), p.tags.end());
  j["votes"] = p.votes;
  j["kind"] = p.kind == PostKind::question ? "question" : "answer";
  if (p.kind == PostKind::answer) {
    j["accepted"] = p.accepted;
    if (p.parent_id) j["parent_id"] = *p.parent_id;
  }
  return j;
}

struct RecordError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct CorpusLoad {
  std::vector<Post> posts;
  std::vector<RecordError> errors;
};

/// Answers carry no tags of their own; they take on their parent's.
inline void inherit_parent_tags(std::vector<Post>& posts) {
  std::map<std::uint64_t, const Post*> questions;
  for (const auto& p : posts)
    if (p.kind == PostKind::question) questions[p.id] = &p;
  std::vector<std::set<std::string>> extra(posts.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    const auto& p = posts[i];
    if (p.kind != PostKind::answer || !p.parent_id) continue;
    if (auto it = questions.find(*p.parent_id); it != questions.end()) extra[i] = it->second->tags;
  }
  for (std::size_t i = 0; i < posts.size(); ++i) posts[i].tags.insert(extra[i].begin(), extra[i].end());
}

/// Parses line-delimited corpus text. Blank lines are ignored; malformed
/// records are skipped and reported with their line numbers.
inline CorpusLoad parse_corpus(std::string_view text) {
  CorpusLoad out;
  std::set<std::uint64_t> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto p = post_from_json(j);
      if (!seen.insert(p.id).second) throw data_error("duplicate post id " + std::to_string(p.id));
      out.posts.push_back(std::move(p));
    } catch (const nlohmann::json::parse_error& ex) {
      out.errors.push_back({lineno, std::string("malformed record: ") + ex.what()});
    } catch (const Error& ex) {
      out.errors.push_back({lineno, ex.what()});
    }
  }
  inherit_parent_tags(out.posts);
  return out;
}

inline CorpusLoad load_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

inline std::string write_posts(const std::vector<Post>& posts) {
  std::string out;
  for (const auto& p : posts) {
    out += to_json(p).dump();
    out += '\n';
  }
  return out;
}

/// Tag whitelist plus case-insensitive cue patterns for compatibility talk.
class FilterConfig {
 public:
  FilterConfig(std::set<std::string> dl_tags, std::vector<std::string> cue_patterns)
      : patterns_(std::move(cue_patterns)) {
    for (const auto& t : dl_tags) dl_tags_.insert(to_lower(trim(t)));
    if (dl_tags_.empty()) throw data_error("filter config: dl_tags is empty");
    if (patterns_.empty()) throw data_error("filter config: cue_patterns is empty");
    for (const auto& p : patterns_) {
      try {
        compiled_.emplace_back(p, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
      } catch (const std::regex_error& ex) {
        throw data_error("filter config: invalid cue pattern '" + p + "': " + ex.what());
      }
    }
  }

  static FilterConfig from_json(const nlohmann::json& j) {
    try {
      return FilterConfig(j.at("dl_tags").get<std::set<std::string>>(),
                          j.at("cue_patterns").get<std::vector<std::string>>());
    } catch (const nlohmann::json::exception& ex) {
      throw data_error(std::string("filter config: ") + ex.what());
    }
  }

  static FilterConfig load(const std::string& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw data_error("filter config " + path + ": " + ex.what());
    }
  }

  const std::set<std::string>& dl_tags() const noexcept { return dl_tags_; }
  const std::vector<std::string>& cue_patterns() const noexcept { return patterns_; }

  bool has_dl_tag(const Post& p) const {
    return std::any_of(p.tags.begin(), p.tags.end(), [&](const std::string& t) { return dl_tags_.count(t) > 0; });
  }

  bool has_cue(const Post& p) const {
    for (const auto& para : p.paragraphs)
      for (const auto& re : compiled_)
        if (std::regex_search(para, re)) return true;
    return false;
  }

 private:
  std::set<std::string> dl_tags_;
  std::vector<std::string> patterns_;
  std::vector<std::regex> compiled_;
};

/// Per-stage survivor counts of filter_posts.
struct FilterReport {
  std::size_t input = 0;
  std::size_t tagged = 0;          // pass the DL-tag filter
  std::size_t with_cues = 0;       // ... and the cue-pattern filter
  std::size_t kept = 0;            // ... and the accepted-answer filter
};

/// Keeps DL-tagged questions with compatibility cues, and accepted answers
/// whose parent question is DL-tagged and where the answer or its parent has
/// a cue. An answer whose parent is absent falls back on its own tags, which
/// already include the parent's when both were loaded together; this keeps
/// the filter idempotent. Output preserves input order.
inline std::vector<Post> filter_posts(const std::vector<Post>& posts, const FilterConfig& cfg,
                                      FilterReport* report = nullptr) {
  std::map<std::uint64_t, const Post*> questions;
  for (const auto& p : posts)
    if (p.kind == PostKind::question) questions[p.id] = &p;

  FilterReport r;
  r.input = posts.size();
  std::vector<Post> out;
  for (const auto& p : posts) {
    const Post* parent = nullptr;
    if (p.kind == PostKind::answer && p.parent_id) {
      if (auto it = questions.find(*p.parent_id); it != questions.end()) parent = it->second;
    }
    const bool tagged = parent ? cfg.has_dl_tag(*parent) : cfg.has_dl_tag(p);
    if (!tagged) continue;
    ++r.tagged;
    const bool cue = cfg.has_cue(p) || (parent && cfg.has_cue(*parent));
    if (!cue) continue;
    ++r.with_cues;
    if (p.kind == PostKind::answer && !p.accepted) continue;
    ++r.kept;
    out.push_back(p);
  }
  if (report) *report = r;
  return out;
}

/// Indexes of paragraphs whose bindings cover at least two distinct
/// components.
inline std::vector<std::size_t> candidate_paragraphs(const Post& post,
                                                     const std::vector<std::vector<Binding>>& bindings) {
  std::vector<std::size_t> out;
  const auto n = std::min(post.paragraphs.size(), bindings.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::string> ids;
    for (const auto& b : bindings[i]) ids.insert(b.component.component_id);
    if (ids.size() >= 2) out.push_back(i);
  }
  return out;
}

}  // namespace stackcompat
