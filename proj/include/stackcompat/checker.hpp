#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackcompat/common.hpp"
#include "stackcompat/graph.hpp"

namespace stackcompat {

struct EnvironmentSpec {
  std::vector<VersionedComponent> entries;
  std::string source;
  std::vector<std::string> diagnostics;  // skipped lines, with line numbers
};

/// Parses a pinned environment. Accepted line forms:
///   name==version
///   name version
///   name==version @layer      (also with the space-separated form)
/// '#' starts a comment. Names resolve through dictionary aliases.
inline EnvironmentSpec parse_environment_text(std::string_view text, const Dictionary& dict,
                                              std::string source = "<text>") {
  EnvironmentSpec env;
  env.source = std::move(source);
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  auto skip = [&](const std::string& why) {
    env.diagnostics.push_back(env.source + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;

    std::optional<Layer> layer;
    if (auto at = line.find('@'); at != std::string::npos) {
      const auto tag = trim(line.substr(at + 1));
      layer = parse_layer(to_lower(tag));
      if (!layer) {
        skip("unknown layer '" + tag + "'");
        continue;
      }
      line = trim(line.substr(0, at));
    }
    std::string name, version;
    if (auto eq = line.find("=="); eq != std::string::npos) {
      name = trim(line.substr(0, eq));
      version = trim(line.substr(eq + 2));
    } else if (auto sp = line.find_last_of(" \t"); sp != std::string::npos) {
      name = trim(line.substr(0, sp));
      version = trim(line.substr(sp + 1));
    }
    if (name.empty() || version.empty()) {
      skip("cannot parse '" + line + "'");
      continue;
    }
    if (!is_version(version)) {
      skip("unsupported version '" + version + "'");
      continue;
    }
    const auto* entry = dict.resolve(name);
    if (!entry) {
      skip("unknown component '" + name + "'");
      continue;
    }
    if (std::any_of(env.entries.begin(), env.entries.end(),
                    [&](const VersionedComponent& e) { return e.component_id == entry->id; })) {
      skip("duplicate component '" + entry->id + "'");
      continue;
    }
    env.entries.push_back(canonical({entry->id, layer.value_or(entry->layer), normalize_version(version)}));
  }
  if (env.entries.empty()) throw data_error(env.source + ": no resolvable environment entries");
  return env;
}

inline EnvironmentSpec parse_environment(const std::string& path, const Dictionary& dict) {
  return parse_environment_text(read_file(path), dict, path);
}

struct Issue {
  VersionedComponent a, b;  // environment entries, canonical order
  Rational confidence;
  std::int64_t n_compatible = 0;
  std::int64_t n_incompatible = 0;
  std::vector<Evidence> evidence;
  std::vector<VersionedComponent> matched_nodes;
};

struct CheckResult {
  std::vector<Issue> issues;
  /// Entry pairs with no matching knowledge (audit aid; never issues).
  std::vector<std::pair<VersionedComponent, VersionedComponent>> unknown_pairs;
};

/// Checks every distinct-component pair of the environment against the
/// graph. Only negative merged confidence is reported; missing knowledge is
/// silent. Issues are ordered most incompatible first.
inline CheckResult check_environment(const KnowledgeGraph& g, const EnvironmentSpec& env) {
  CheckResult out;
  for (std::size_t i = 0; i < env.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < env.entries.size(); ++j) {
      auto [x, y] = canonical_pair(env.entries[i], env.entries[j]);
      if (x.component_id == y.component_id) continue;
      const auto hit = lookup_pair(g, x, y);
      if (!hit.found()) {
        out.unknown_pairs.emplace_back(x, y);
        continue;
      }
      const auto conf = *hit.confidence();
      if (conf.sign() >= 0) continue;
      Issue issue{x, y, conf, hit.n_compatible, hit.n_incompatible, hit.evidence, {}};
      std::set<std::string> seen;
      for (auto l : hit.links)
        for (const auto* n : {&g.links()[l].a, &g.links()[l].b})
          if (seen.insert(n->key()).second) issue.matched_nodes.push_back(*n);
      std::sort(issue.matched_nodes.begin(), issue.matched_nodes.end());
      out.issues.push_back(std::move(issue));
    }
  }
  std::sort(out.issues.begin(), out.issues.end(), [](const Issue& p, const Issue& q) {
    if (p.confidence != q.confidence) return p.confidence < q.confidence;
    return pair_key(p.a, p.b) < pair_key(q.a, q.b);
  });
  return out;
}

inline nlohmann::json to_json(const Issue& issue) {
  nlohmann::json ev = nlohmann::json::array(), matched = nlohmann::json::array();
  for (const auto& e : issue.evidence) ev.push_back(to_json(e));
  for (const auto& n : issue.matched_nodes) matched.push_back(to_json(n));
  return {{"a", to_json(issue.a)},
          {"b", to_json(issue.b)},
          {"confidence", issue.confidence.to_double()},
          {"n_compatible", issue.n_compatible},
          {"n_incompatible", issue.n_incompatible},
          {"evidence", std::move(ev)},
          {"matched_nodes", std::move(matched)}};
}

inline nlohmann::json to_json(const CheckResult& r, bool report_unknown) {
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& i : r.issues) issues.push_back(to_json(i));
  nlohmann::json j{{"schema_version", 1}, {"issues", std::move(issues)}};
  if (report_unknown) {
    nlohmann::json unknown = nlohmann::json::array();
    for (const auto& [a, b] : r.unknown_pairs) unknown.push_back({{"a", node_ref(a)}, {"b", node_ref(b)}});
    j["unknown_pairs"] = std::move(unknown);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Detection quality

struct Metrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::optional<Rational> precision;  // absent when TP + FP = 0
  std::optional<Rational> recall;     // absent when TP + FN = 0
  std::optional<Rational> f1;         // absent when P or R is absent or both are zero
};

inline std::optional<Rational> harmonic_mean(const std::optional<Rational>& p, const std::optional<Rational>& r) {
  if (!p || !r) return std::nullopt;
  // 2PR / (P + R) over a common denominator.
  const auto num = 2 * p->num() * r->num();
  const auto den = p->num() * r->den() + r->num() * p->den();
  if (den == 0) return std::nullopt;
  return Rational(num, den);
}

/// F1 from real-valued precision and recall (used for published figures).
inline double f1_score(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

/// Set-based precision/recall/F1 of reported pairs against ground truth.
inline Metrics evaluate_metrics(const std::set<std::string>& reported, const std::set<std::string>& truth) {
  Metrics m;
  for (const auto& r : reported) (truth.count(r) ? m.true_positives : m.false_positives) += 1;
  for (const auto& t : truth)
    if (!reported.count(t)) ++m.false_negatives;
  const auto tp = static_cast<std::int64_t>(m.true_positives);
  if (m.true_positives + m.false_positives > 0)
    m.precision = Rational(tp, tp + static_cast<std::int64_t>(m.false_positives));
  if (m.true_positives + m.false_negatives > 0)
    m.recall = Rational(tp, tp + static_cast<std::int64_t>(m.false_negatives));
  m.f1 = harmonic_mean(m.precision, m.recall);
  return m;
}

inline nlohmann::json to_json(const Metrics& m) {
  auto opt = [](const std::optional<Rational>& r) { return r ? nlohmann::json(r->to_double()) : nlohmann::json(nullptr); };
  return {{"schema_version", 1},
          {"true_positives", m.true_positives},
          {"false_positives", m.false_positives},
          {"false_negatives", m.false_negatives},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)}};
}

/// Reads a set of pair keys from either a check result ({issues: [...]}),
/// a list of issues, or a list of {a, b} pair objects. Objects may carry an
/// "env" field that scopes the key to one environment.
inline std::set<std::string> read_pair_set(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object() && j.contains("issues")) list = &j.at("issues");
  if (!list->is_array()) throw data_error("expected a list of pairs");
  std::set<std::string> out;
  try {
    for (const auto& item : *list) {
      auto ref = [](const nlohmann::json& r) {
        return VersionedComponent{r.at("component").get<std::string>(), Layer::library,
                                  normalize_version(r.at("version").get<std::string>())};
      };
      auto key = pair_key(ref(item.at("a")), ref(item.at("b")));
      if (item.contains("env")) key = item.at("env").get<std::string>() + ": " + key;
      out.insert(std::move(key));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw data_error(std::string("malformed pair list: ") + ex.what());
  }
  return out;
}

}  // namespace stackcompat
