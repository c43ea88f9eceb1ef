#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackcompat/common.hpp"
#include "stackcompat/dictionary.hpp"
#include "stackcompat/inference.hpp"

namespace stackcompat {

inline constexpr int kGraphFormatVersion = 1;

/// (c - i) / (c + i), exact.
inline Rational confidence_score(std::int64_t n_compatible, std::int64_t n_incompatible) {
  if (n_compatible < 0 || n_incompatible < 0) throw data_error("confidence_score: negative count");
  if (n_compatible + n_incompatible == 0) throw data_error("confidence_score: no evidence");
  return {n_compatible - n_incompatible, n_compatible + n_incompatible};
}

struct Evidence {
  std::uint64_t post_id = 0;
  std::int64_t votes = 0;
  Label label = Label::compatible;

  friend bool operator==(const Evidence&, const Evidence&) = default;
};

/// Votes descending, then post id ascending.
inline void sort_evidence(std::vector<Evidence>& ev) {
  std::sort(ev.begin(), ev.end(), [](const Evidence& x, const Evidence& y) {
    if (x.votes != y.votes) return x.votes > y.votes;
    return x.post_id < y.post_id;
  });
}

/// An aggregated link between two versioned components; a < b canonically.
struct Relation {
  VersionedComponent a, b;
  std::int64_t n_compatible = 0;
  std::int64_t n_incompatible = 0;
  std::vector<Evidence> evidence;

  Rational confidence() const { return confidence_score(n_compatible, n_incompatible); }
  Label label() const {
    const auto s = confidence().sign();
    return s > 0 ? Label::compatible : s < 0 ? Label::incompatible : Label::unknown;
  }

  friend bool operator==(const Relation& x, const Relation& y) {
    return x.a == y.a && x.a.layer == y.a.layer && x.b == y.b && x.b.layer == y.b.layer &&
           x.n_compatible == y.n_compatible && x.n_incompatible == y.n_incompatible && x.evidence == y.evidence;
  }
};

inline std::pair<VersionedComponent, VersionedComponent> canonical_pair(VersionedComponent x, VersionedComponent y) {
  x = canonical(std::move(x));
  y = canonical(std::move(y));
  if (y < x) std::swap(x, y);
  return {std::move(x), std::move(y)};
}

inline std::string pair_key(const VersionedComponent& a, const VersionedComponent& b) {
  auto [x, y] = canonical_pair(a, b);
  return x.key() + " | " + y.key();
}

struct AggregateReport {
  std::size_t verdicts = 0;
  std::size_t unknown = 0;
  std::size_t duplicates = 0;
  std::size_t pairs = 0;
  std::size_t neutral_discarded = 0;
  std::size_t kept = 0;
};

/// Consolidates verdicts into relations. Unknown verdicts are skipped; a post
/// contributes at most once per pair (its earliest paragraph wins); neutral
/// pairs are dropped. Output is sorted by canonical pair and independent of
/// input order.
inline std::vector<Relation> aggregate(std::vector<Verdict> verdicts, AggregateReport* report = nullptr) {
  AggregateReport r;
  r.verdicts = verdicts.size();
  struct Keyed {
    std::pair<VersionedComponent, VersionedComponent> pair;
    const Verdict* v;
  };
  std::vector<Keyed> keyed;
  for (const auto& v : verdicts) {
    if (v.label == Label::unknown) {
      ++r.unknown;
      continue;
    }
    if (v.a.component_id == v.b.component_id) continue;
    keyed.push_back({canonical_pair(v.a, v.b), &v});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& x, const Keyed& y) {
    if (x.pair.first < y.pair.first || y.pair.first < x.pair.first) return x.pair.first < y.pair.first;
    if (x.pair.second < y.pair.second || y.pair.second < x.pair.second) return x.pair.second < y.pair.second;
    if (x.v->post_id != y.v->post_id) return x.v->post_id < y.v->post_id;
    if (x.v->paragraph != y.v->paragraph) return x.v->paragraph < y.v->paragraph;
    return x.v->label < y.v->label;
  });

  std::vector<Relation> out;
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t j = i;
    Relation rel;
    rel.a = keyed[i].pair.first;
    rel.b = keyed[i].pair.second;
    std::set<std::uint64_t> posts;
    for (; j < keyed.size() && keyed[j].pair.first == rel.a && keyed[j].pair.second == rel.b; ++j) {
      const auto& v = *keyed[j].v;
      if (!posts.insert(v.post_id).second) {
        ++r.duplicates;
        continue;
      }
      (v.label == Label::compatible ? rel.n_compatible : rel.n_incompatible) += 1;
      rel.evidence.push_back({v.post_id, v.votes, v.label});
    }
    i = j;
    ++r.pairs;
    if (rel.n_compatible == rel.n_incompatible) {
      ++r.neutral_discarded;
      continue;
    }
    sort_evidence(rel.evidence);
    out.push_back(std::move(rel));
  }
  r.kept = out.size();
  if (report) *report = r;
  return out;
}

/// Immutable knowledge graph: versioned-component nodes and confidence-scored
/// links, with lookup indexes.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  static KnowledgeGraph build(std::vector<Relation> relations) {
    KnowledgeGraph g;
    std::map<std::string, VersionedComponent> nodes;
    std::set<std::string> seen;
    for (auto& rel : relations) {
      auto [a, b] = canonical_pair(rel.a, rel.b);
      if (a.component_id == b.component_id) throw data_error("self-loop relation on " + a.component_id);
      if (rel.n_compatible + rel.n_incompatible < 1) throw data_error("relation without evidence: " + pair_key(a, b));
      if (rel.n_compatible == rel.n_incompatible) throw data_error("neutral relation stored: " + pair_key(a, b));
      if (!seen.insert(pair_key(a, b)).second) throw data_error("duplicate relation: " + pair_key(a, b));
      rel.a = a;
      rel.b = b;
      for (const auto* n : {&rel.a, &rel.b}) {
        auto [it, inserted] = nodes.emplace(n->key(), *n);
        if (!inserted && it->second.layer != n->layer)
          throw data_error("node " + n->key() + " appears with two layers");
      }
    }
    std::sort(relations.begin(), relations.end(), [](const Relation& x, const Relation& y) {
      if (x.a < y.a || y.a < x.a) return x.a < y.a;
      return x.b < y.b;
    });
    for (auto& [key, node] : nodes) g.nodes_.push_back(node);
    std::sort(g.nodes_.begin(), g.nodes_.end());
    g.links_ = std::move(relations);
    g.index();
    return g;
  }

  const std::vector<VersionedComponent>& nodes() const noexcept { return nodes_; }
  const std::vector<Relation>& links() const noexcept { return links_; }
  bool empty() const noexcept { return links_.empty(); }

  std::optional<std::size_t> node_index(const VersionedComponent& vc) const {
    auto it = by_key_.find(vc.key());
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  /// Node indexes for a component id (all versions).
  const std::vector<std::size_t>& nodes_of(std::string_view component_id) const {
    static const std::vector<std::size_t> none;
    auto it = by_component_.find(std::string(component_id));
    return it == by_component_.end() ? none : it->second;
  }

  const std::vector<std::size_t>& nodes_in(Layer layer) const {
    static const std::vector<std::size_t> none;
    auto it = by_layer_.find(layer);
    return it == by_layer_.end() ? none : it->second;
  }

  /// Link indexes incident to a node.
  const std::vector<std::size_t>& incident(std::size_t node) const { return incident_.at(node); }

  const Relation* find_relation(const VersionedComponent& x, const VersionedComponent& y) const {
    auto it = by_pair_.find(pair_key(x, y));
    return it == by_pair_.end() ? nullptr : &links_[it->second];
  }

  friend bool operator==(const KnowledgeGraph& x, const KnowledgeGraph& y) {
    if (x.nodes_.size() != y.nodes_.size() || x.links_ != y.links_) return false;
    for (std::size_t i = 0; i < x.nodes_.size(); ++i)
      if (!(x.nodes_[i] == y.nodes_[i]) || x.nodes_[i].layer != y.nodes_[i].layer) return false;
    return true;
  }

 private:
  void index() {
    incident_.assign(nodes_.size(), {});
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      by_key_[nodes_[i].key()] = i;
      by_component_[nodes_[i].component_id].push_back(i);
      by_layer_[nodes_[i].layer].push_back(i);
    }
    for (std::size_t l = 0; l < links_.size(); ++l) {
      by_pair_[pair_key(links_[l].a, links_[l].b)] = l;
      incident_[by_key_.at(links_[l].a.key())].push_back(l);
      incident_[by_key_.at(links_[l].b.key())].push_back(l);
    }
  }

  std::vector<VersionedComponent> nodes_;
  std::vector<Relation> links_;
  std::map<std::string, std::size_t> by_key_;
  std::map<std::string, std::vector<std::size_t>> by_component_;
  std::map<Layer, std::vector<std::size_t>> by_layer_;
  std::map<std::string, std::size_t> by_pair_;
  std::vector<std::vector<std::size_t>> incident_;
};

inline KnowledgeGraph build_graph(std::vector<Relation> relations) {
  return KnowledgeGraph::build(std::move(relations));
}

// ---------------------------------------------------------------------------
// Version-subsumption lookup shared by queries and the environment checker

/// Nodes of `component_id` whose version prefix-matches `v`. Exact matches,
/// when present, are returned alone.
inline std::vector<std::size_t> match_nodes(const KnowledgeGraph& g, std::string_view component_id,
                                            const std::optional<Version>& v) {
  std::vector<std::size_t> all, exact;
  for (auto i : g.nodes_of(component_id)) {
    const auto& node = g.nodes()[i];
    if (!v || version_matches(*v, node.version)) all.push_back(i);
    if (v && node.version == *v) exact.push_back(i);
  }
  return exact.empty() ? all : exact;
}

/// Result of looking up a (possibly under-specified) pair in the graph.
struct PairLookup {
  std::vector<std::size_t> links;  // the most specific matching links
  std::int64_t n_compatible = 0;
  std::int64_t n_incompatible = 0;
  std::vector<Evidence> evidence;

  bool found() const { return !links.empty(); }
  std::optional<Rational> confidence() const {
    if (!found()) return std::nullopt;
    return confidence_score(n_compatible, n_incompatible);
  }
  Label label() const {
    auto c = confidence();
    if (!c || c->sign() == 0) return Label::unknown;
    return c->sign() > 0 ? Label::compatible : Label::incompatible;
  }
};

namespace detail {

// Ordered specificity of a node version against a probe version.
struct Specificity {
  std::size_t prefix = 0;
  int exact = 0;
  int concrete = 0;
  auto operator<=>(const Specificity&) const = default;
};

}  // namespace detail

/// Finds links whose endpoints prefix-match (x, y). The most specific
/// matches win (longest common prefix, then exact, then concrete over
/// wildcard); ties merge their evidence.
inline PairLookup lookup_pair(const KnowledgeGraph& g, const VersionedComponent& x, const VersionedComponent& y) {
  PairLookup out;
  if (x.component_id == y.component_id) return out;
  std::optional<detail::Specificity> best;
  for (auto xi : g.nodes_of(x.component_id)) {
    const auto& xn = g.nodes()[xi];
    if (!version_matches(x.version, xn.version)) continue;
    for (auto li : g.incident(xi)) {
      const auto& rel = g.links()[li];
      const auto& other = rel.a.component_id == x.component_id ? rel.b : rel.a;
      if (other.component_id != y.component_id || !version_matches(y.version, other.version)) continue;
      detail::Specificity s{common_prefix(x.version, xn.version) + common_prefix(y.version, other.version),
                            (xn.version == x.version) + (other.version == y.version),
                            !xn.version.wildcard + !other.version.wildcard};
      if (!best || *best < s) {
        best = s;
        out.links.clear();
      }
      if (*best == s) out.links.push_back(li);
    }
  }
  std::sort(out.links.begin(), out.links.end());
  for (auto li : out.links) {
    const auto& rel = g.links()[li];
    out.n_compatible += rel.n_compatible;
    out.n_incompatible += rel.n_incompatible;
    out.evidence.insert(out.evidence.end(), rel.evidence.begin(), rel.evidence.end());
  }
  sort_evidence(out.evidence);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json node_ref(const VersionedComponent& vc) {
  return {{"component", vc.component_id}, {"version", vc.version_string()}};
}

inline nlohmann::json to_json(const Evidence& e) {
  return {{"post_id", e.post_id}, {"votes", e.votes}, {"label", to_string(e.label)}};
}

inline nlohmann::json to_json(const Relation& r) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : r.evidence) ev.push_back(to_json(e));
  return {{"a", node_ref(r.a)},
          {"b", node_ref(r.b)},
          {"n_compatible", r.n_compatible},
          {"n_incompatible", r.n_incompatible},
          {"confidence", r.confidence().to_double()},
          {"evidence", std::move(ev)}};
}

inline nlohmann::json to_json(const KnowledgeGraph& g) {
  nlohmann::json nodes = nlohmann::json::array(), links = nlohmann::json::array();
  for (const auto& n : g.nodes()) nodes.push_back(to_json(n));
  for (const auto& l : g.links()) links.push_back(to_json(l));
  return {{"format_version", kGraphFormatVersion}, {"nodes", std::move(nodes)}, {"links", std::move(links)}};
}

inline std::string serialize_graph(const KnowledgeGraph& g) { return to_json(g).dump(2) + "\n"; }

inline KnowledgeGraph graph_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || !j.contains("format_version")) throw data_error("graph file has no format_version");
    const auto version = j.at("format_version").get<int>();
    if (version != kGraphFormatVersion)
      throw data_error("unsupported graph format_version " + std::to_string(version) + " (expected " +
                       std::to_string(kGraphFormatVersion) + ")");
    std::map<std::string, VersionedComponent> nodes;
    for (const auto& n : j.at("nodes")) {
      auto vc = canonical(versioned_from_json(n));
      nodes.emplace(vc.key(), vc);
    }
    std::vector<Relation> rels;
    for (const auto& l : j.at("links")) {
      auto endpoint = [&](const nlohmann::json& ref) {
        VersionedComponent probe{ref.at("component").get<std::string>(), Layer::library,
                                 normalize_version(ref.at("version").get<std::string>())};
        auto it = nodes.find(probe.key());
        if (it == nodes.end()) throw data_error("link endpoint not among nodes: " + probe.key());
        return it->second;
      };
      Relation r;
      r.a = endpoint(l.at("a"));
      r.b = endpoint(l.at("b"));
      r.n_compatible = l.at("n_compatible").get<std::int64_t>();
      r.n_incompatible = l.at("n_incompatible").get<std::int64_t>();
      for (const auto& e : l.at("evidence")) {
        const auto label = parse_label(e.at("label").get<std::string>());
        if (label == Label::unknown) throw data_error("evidence with unknown label");
        r.evidence.push_back({e.at("post_id").get<std::uint64_t>(), e.at("votes").get<std::int64_t>(), label});
      }
      if (l.contains("confidence") &&
          std::abs(l.at("confidence").get<double>() - r.confidence().to_double()) > 1e-9)
        throw data_error("link confidence disagrees with its counts: " + pair_key(r.a, r.b));
      rels.push_back(std::move(r));
    }
    auto g = KnowledgeGraph::build(std::move(rels));
    if (g.nodes().size() != nodes.size()) throw data_error("graph file lists nodes without links");
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw data_error(std::string("malformed graph file: ") + ex.what());
  }
}

inline KnowledgeGraph parse_graph(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw data_error(std::string("graph file is not valid JSON: ") + ex.what());
  }
  return graph_from_json(j);
}

inline void save_graph(const KnowledgeGraph& g, const std::string& path) { write_file(path, serialize_graph(g)); }

inline KnowledgeGraph load_graph(const std::string& path) { return parse_graph(read_file(path)); }

}  // namespace stackcompat
