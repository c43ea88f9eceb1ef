#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stackcompat/common.hpp"
#include "stackcompat/corpus.hpp"
#include "stackcompat/recognizer.hpp"

namespace stackcompat {

enum class Label { compatible, incompatible, unknown };
enum class VerdictSource { heuristic, remote };

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::compatible: return "compatible";
    case Label::incompatible: return "incompatible";
    case Label::unknown: return "unknown";
  }
  return "unknown";
}

inline Label parse_label(std::string_view s) {
  if (s == "compatible") return Label::compatible;
  if (s == "incompatible") return Label::incompatible;
  if (s == "unknown") return Label::unknown;
  throw data_error("unknown label '" + std::string(s) + "'");
}

inline std::string_view to_string(VerdictSource s) { return s == VerdictSource::remote ? "remote" : "heuristic"; }

struct CompatibilityQuestion {
  std::string context;
  std::string question;
  std::pair<VersionedComponent, VersionedComponent> pair;
  /// Character range [first, second) of the sentences spanning both mentions.
  std::optional<std::pair<std::size_t, std::size_t>> focus;
};

/// One oracle judgment about one pair in one paragraph.
struct Verdict {
  Label label = Label::unknown;
  VerdictSource source = VerdictSource::heuristic;
  std::uint64_t post_id = 0;
  std::int64_t votes = 0;
  VersionedComponent a, b;
  std::size_t paragraph = 0;
};

inline constexpr std::string_view kDefaultQuestionTemplate = "Does {A} {va} work with {B} {vb}?";

/// Fills the question template with canonical ids and normalized versions.
inline std::string build_question(const VersionedComponent& a, const VersionedComponent& b,
                                  std::string_view tmpl = kDefaultQuestionTemplate) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    auto put = [&](std::string_view key, const std::string& value) {
      if (tmpl.substr(i, key.size()) != key) return false;
      out += value;
      i += key.size();
      return true;
    };
    if (put("{A}", a.component_id) || put("{va}", a.version_string()) || put("{B}", b.component_id) ||
        put("{vb}", b.version_string()))
      continue;
    out += tmpl[i++];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heuristic oracle

struct CueLexicon {
  std::vector<std::string> incompatible{"doesn't work", "not compatible", "incompatible", "fails", "cannot",
                                        "error",        "conflict",       "downgrade"};
  std::vector<std::string> compatible{"works with", "compatible with", "supports", "solved", "fixed by"};
};

namespace detail {

struct Span {
  std::size_t start, end;
};

inline std::vector<Span> find_cues(const std::string& lower, const std::vector<std::string>& cues) {
  std::vector<Span> spans;
  std::vector<std::string> forms;
  for (const auto& cue : cues) {
    auto c = to_lower(cue);
    if (c.empty()) continue;
    // Typographic apostrophe (U+2019) variant.
    if (auto q = c.find('\''); q != std::string::npos) {
      auto curly = c;
      curly.replace(q, 1, "\xE2\x80\x99");
      forms.push_back(std::move(curly));
    }
    forms.push_back(std::move(c));
  }
  for (const auto& c : forms) {
    for (auto pos = lower.find(c); pos != std::string::npos; pos = lower.find(c, pos + 1)) {
      const auto end = pos + c.size();
      if (word_boundary_before(lower, pos) && word_boundary_after(lower, end)) spans.push_back({pos, end});
    }
  }
  return spans;
}

}  // namespace detail

/// Lexicon score for a context. Compatibility cues that overlap an
/// incompatibility cue ("not compatible with") are ignored; cues inside the
/// focus window count twice.
struct CueScore {
  int compatible = 0;
  int incompatible = 0;
};

inline CueScore score_context(const CompatibilityQuestion& q, const CueLexicon& lex = {}) {
  const auto lower = to_lower(q.context);
  const auto bad = detail::find_cues(lower, lex.incompatible);
  auto good = detail::find_cues(lower, lex.compatible);
  std::erase_if(good, [&](const detail::Span& g) {
    return std::any_of(bad.begin(), bad.end(), [&](const detail::Span& b) { return g.start < b.end && b.start < g.end; });
  });
  auto weight = [&](const detail::Span& s) {
    return q.focus && s.start >= q.focus->first && s.end <= q.focus->second ? 2 : 1;
  };
  CueScore score;
  for (const auto& s : bad) score.incompatible += weight(s);
  for (const auto& s : good) score.compatible += weight(s);
  return score;
}

inline Label heuristic_infer(const CompatibilityQuestion& q, const CueLexicon& lex = {}) {
  const auto s = score_context(q, lex);
  if (s.compatible > s.incompatible) return Label::compatible;
  if (s.incompatible > s.compatible) return Label::incompatible;
  return Label::unknown;
}

// ---------------------------------------------------------------------------
// Remote oracle

/// Thread-safe sink for non-fatal problems (oracle failures, skipped input).
class Diagnostics {
 public:
  void add(std::string message) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(message));
  }
  std::vector<std::string> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> entries_;
};

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // defaults to "/"
};

inline Endpoint parse_endpoint(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) throw usage_error("endpoint must be an http URL: " + std::string(url));
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

/// Maps a free-text answer to a label: "yes..." compatible, "no..."
/// incompatible, anything else unknown.
inline Label label_from_answer(std::string_view answer) {
  const auto a = to_lower(trim(answer));
  auto starts_word = [&](std::string_view w) {
    return a.rfind(w, 0) == 0 && (a.size() == w.size() || !is_alnum(a[w.size()]));
  };
  if (starts_word("yes")) return Label::compatible;
  if (starts_word("no")) return Label::incompatible;
  return Label::unknown;
}

/// Asks a remote QA service. Never throws: every failure becomes unknown
/// and one diagnostics entry.
inline Label remote_infer(const CompatibilityQuestion& q, const std::string& endpoint,
                          std::chrono::milliseconds timeout, Diagnostics& diag) {
  try {
    const auto ep = parse_endpoint(endpoint);
    httplib::Client client(ep.base);
    const auto sec = static_cast<time_t>(timeout.count() / 1000);
    const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    const nlohmann::json body{{"context", q.context}, {"question", q.question}};
    auto res = client.Post(ep.path, body.dump(), "application/json");
    if (!res) {
      diag.add("remote oracle: " + httplib::to_string(res.error()) + " (" + q.question + ")");
      return Label::unknown;
    }
    if (res->status < 200 || res->status >= 300) {
      diag.add("remote oracle: HTTP " + std::to_string(res->status) + " (" + q.question + ")");
      return Label::unknown;
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("answer") || !j["answer"].is_string()) {
      diag.add("remote oracle: unparsable response (" + q.question + ")");
      return Label::unknown;
    }
    return label_from_answer(j["answer"].get<std::string>());
  } catch (const std::exception& ex) {
    diag.add(std::string("remote oracle: ") + ex.what());
    return Label::unknown;
  }
}

/// Yes/no answerer interface.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Label infer(const CompatibilityQuestion& q) = 0;
  virtual VerdictSource source() const = 0;
};

class HeuristicOracle final : public Oracle {
 public:
  explicit HeuristicOracle(CueLexicon lexicon = {}) : lexicon_(std::move(lexicon)) {}
  Label infer(const CompatibilityQuestion& q) override { return heuristic_infer(q, lexicon_); }
  VerdictSource source() const override { return VerdictSource::heuristic; }

 private:
  CueLexicon lexicon_;
};

class RemoteOracle final : public Oracle {
 public:
  static constexpr std::ptrdiff_t kMaxInFlight = 64;

  RemoteOracle(std::string endpoint, std::chrono::milliseconds timeout, Diagnostics& diag,
               std::ptrdiff_t max_in_flight = 8)
      : endpoint_(std::move(endpoint)), timeout_(timeout), diag_(diag),
        slots_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, kMaxInFlight)) {}

  Label infer(const CompatibilityQuestion& q) override {
    slots_.acquire();
    const auto label = remote_infer(q, endpoint_, timeout_, diag_);
    slots_.release();
    return label;
  }
  VerdictSource source() const override { return VerdictSource::remote; }

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  Diagnostics& diag_;
  std::counting_semaphore<kMaxInFlight> slots_;
};

struct OracleSettings {
  std::string kind = "heuristic";  // heuristic | remote
  std::string endpoint;
  long timeout_ms = 5000;
  int max_in_flight = 8;
};

inline std::unique_ptr<Oracle> make_oracle(const OracleSettings& s, Diagnostics& diag) {
  if (s.kind == "heuristic") return std::make_unique<HeuristicOracle>();
  if (s.kind == "remote") {
    if (s.endpoint.empty()) throw usage_error("oracle.kind=remote requires oracle.endpoint");
    return std::make_unique<RemoteOracle>(s.endpoint, std::chrono::milliseconds(s.timeout_ms), diag,
                                          s.max_in_flight);
  }
  throw usage_error("unknown oracle kind '" + s.kind + "' (expected heuristic or remote)");
}

// ---------------------------------------------------------------------------
// Paragraph inference

/// Range of whole sentences covering all given mentions.
inline std::pair<std::size_t, std::size_t> sentence_window(std::string_view paragraph,
                                                           std::initializer_list<const Mention*> mentions) {
  const auto starts = sentence_starts(paragraph);
  std::size_t lo = paragraph.size(), hi = 0;
  for (const auto* m : mentions) {
    lo = std::min(lo, m->start);
    hi = std::max(hi, m->end);
  }
  const auto first = index_at(starts, lo), last = index_at(starts, hi == 0 ? 0 : hi - 1);
  const std::size_t begin = starts[first];
  const std::size_t end = last + 1 < starts.size() ? starts[last + 1] : paragraph.size();
  return {begin, end};
}

/// One verdict per unordered pair of bound components with distinct ids.
/// Repeated (component, version) bindings in the paragraph are asked once.
inline std::vector<Verdict> infer_paragraph(const Post& post, std::size_t paragraph_index,
                                            const std::vector<Binding>& bound, const std::vector<Mention>& mentions,
                                            Oracle& oracle, std::string_view question_template = kDefaultQuestionTemplate) {
  const auto& text = post.paragraphs.at(paragraph_index);
  std::vector<const Binding*> unique;
  for (const auto& b : bound) {
    bool dup = std::any_of(unique.begin(), unique.end(), [&](const Binding* u) { return u->component == b.component; });
    if (!dup) unique.push_back(&b);
  }
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    for (std::size_t j = i + 1; j < unique.size(); ++j) {
      const auto& x = *unique[i];
      const auto& y = *unique[j];
      if (x.component.component_id == y.component.component_id) continue;
      CompatibilityQuestion q;
      q.context = text;
      q.pair = {x.component, y.component};
      q.question = build_question(x.component, y.component, question_template);
      q.focus = sentence_window(text, {&mentions.at(x.component_mention), &mentions.at(x.version_mention),
                                       &mentions.at(y.component_mention), &mentions.at(y.version_mention)});
      Verdict v;
      v.label = oracle.infer(q);
      v.source = oracle.source();
      v.post_id = post.id;
      v.votes = post.votes;
      v.a = x.component;
      v.b = y.component;
      v.paragraph = paragraph_index;
      out.push_back(std::move(v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verdict files (one JSON object per line)

inline nlohmann::json to_json(const VersionedComponent& vc) {
  return {{"component", vc.component_id}, {"layer", to_string(vc.layer)}, {"version", vc.version_string()}};
}

inline VersionedComponent versioned_from_json(const nlohmann::json& j) {
  VersionedComponent vc;
  vc.component_id = j.at("component").get<std::string>();
  auto layer = parse_layer(j.value("layer", std::string{"library"}));
  if (!layer) throw data_error("unknown layer in record");
  vc.layer = *layer;
  vc.version = normalize_version(j.at("version").get<std::string>());
  return vc;
}

inline nlohmann::json to_json(const Verdict& v) {
  return {{"post_id", v.post_id}, {"paragraph", v.paragraph}, {"votes", v.votes},
          {"a", to_json(v.a)},    {"b", to_json(v.b)},        {"label", to_string(v.label)},
          {"source", to_string(v.source)}};
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  try {
    Verdict v;
    v.post_id = j.at("post_id").get<std::uint64_t>();
    v.paragraph = j.value("paragraph", std::size_t{0});
    v.votes = j.value("votes", std::int64_t{0});
    v.a = versioned_from_json(j.at("a"));
    v.b = versioned_from_json(j.at("b"));
    v.label = parse_label(j.at("label").get<std::string>());
    v.source = j.value("source", std::string{"heuristic"}) == "remote" ? VerdictSource::remote : VerdictSource::heuristic;
    return v;
  } catch (const nlohmann::json::exception& ex) {
    throw data_error(std::string("malformed verdict: ") + ex.what());
  }
}

inline std::string write_verdicts(const std::vector<Verdict>& verdicts) {
  std::string out;
  for (const auto& v : verdicts) {
    out += to_json(v).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Verdict> parse_verdicts(std::string_view text) {
  std::vector<Verdict> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(verdict_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& ex) {
      throw data_error("verdicts line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      throw data_error("verdicts line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace stackcompat
