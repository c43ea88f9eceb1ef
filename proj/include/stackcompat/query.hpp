#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stackcompat/common.hpp"
#include "stackcompat/graph.hpp"
#include "stackcompat/recognizer.hpp"

namespace stackcompat {

enum class QueryKind { pair, versioned_component, component };

inline std::string_view to_string(QueryKind k) {
  switch (k) {
    case QueryKind::pair: return "pair";
    case QueryKind::versioned_component: return "versioned_component";
    case QueryKind::component: return "component";
  }
  return "component";
}

struct QueryOperand {
  std::string component_id;
  Layer layer = Layer::library;
  std::optional<Version> version;
};

struct Query {
  QueryKind kind = QueryKind::component;
  QueryOperand first;
  std::optional<QueryOperand> second;
  std::string raw;
};

/// Search-bar parsing: two bound versioned components make a pair query,
/// one makes a versioned-component query, bare component names make a
/// component query.
inline Query parse_query(std::string_view text, const Dictionary& dict) {
  Query q;
  q.raw = std::string(text);
  const auto mentions = recognize(text, dict);
  const auto bound = bind_versions(mentions);

  std::vector<const Binding*> distinct;
  for (const auto& b : bound) {
    bool seen = std::any_of(distinct.begin(), distinct.end(),
                            [&](const Binding* d) { return d->component.component_id == b.component.component_id; });
    if (!seen) distinct.push_back(&b);
  }
  auto operand = [](const VersionedComponent& vc) {
    return QueryOperand{vc.component_id, vc.layer, vc.version};
  };
  if (distinct.size() >= 2) {
    q.kind = QueryKind::pair;
    q.first = operand(distinct[0]->component);
    q.second = operand(distinct[1]->component);
    return q;
  }
  if (distinct.size() == 1) {
    q.kind = QueryKind::versioned_component;
    q.first = operand(distinct[0]->component);
    return q;
  }
  for (const auto& m : mentions) {
    if (m.kind == MentionKind::component && m.component_id) {
      q.kind = QueryKind::component;
      q.first = {*m.component_id, m.layer.value_or(Layer::library), std::nullopt};
      return q;
    }
  }
  std::string known;
  for (const auto& id : dict.ids()) known += (known.empty() ? "" : ", ") + id;
  throw usage_error("unrecognized query '" + std::string(text) + "'; known components: " + known);
}

struct Subgraph {
  std::vector<VersionedComponent> nodes;
  std::vector<Relation> links;
  std::vector<VersionedComponent> focus;
};

struct QuerySummary {
  Label verdict = Label::unknown;
  std::optional<Rational> confidence;
  std::int64_t n_compatible = 0;
  std::int64_t n_incompatible = 0;
  bool has_knowledge = false;
  std::string message;
};

struct QueryResult {
  Query query;
  Subgraph subgraph;
  QuerySummary summary;
};

namespace detail {

inline Subgraph collect(const KnowledgeGraph& g, const std::set<std::size_t>& node_ids,
                        const std::set<std::size_t>& link_ids, const std::set<std::size_t>& focus_ids) {
  Subgraph s;
  std::set<std::size_t> all = node_ids;
  for (auto l : link_ids) {
    all.insert(*g.node_index(g.links()[l].a));
    all.insert(*g.node_index(g.links()[l].b));
  }
  for (auto n : all) s.nodes.push_back(g.nodes()[n]);
  for (auto l : link_ids) s.links.push_back(g.links()[l]);
  for (auto f : focus_ids) s.focus.push_back(g.nodes()[f]);
  return s;
}

inline std::string describe(const VersionedComponent& vc) { return vc.component_id + " " + vc.version_string(); }

}  // namespace detail

/// Filters the graph to the nodes and links relevant to a query.
inline QueryResult resolve(const KnowledgeGraph& g, const Query& q) {
  QueryResult r;
  r.query = q;
  std::set<std::size_t> nodes, links, focus;

  if (q.kind == QueryKind::pair && q.second) {
    const VersionedComponent x{q.first.component_id, q.first.layer, *q.first.version};
    const VersionedComponent y{q.second->component_id, q.second->layer, *q.second->version};
    const auto hit = lookup_pair(g, x, y);
    const auto [lo, hi] = canonical_pair(x, y);
    if (hit.found()) {
      for (auto l : hit.links) {
        links.insert(l);
        for (const auto* end : {&g.links()[l].a, &g.links()[l].b}) focus.insert(*g.node_index(*end));
      }
      r.summary.has_knowledge = true;
      r.summary.verdict = hit.label();
      r.summary.confidence = hit.confidence();
      r.summary.n_compatible = hit.n_compatible;
      r.summary.n_incompatible = hit.n_incompatible;
      r.summary.message = detail::describe(lo) + " and " + detail::describe(hi) + " are " +
                          (hit.label() == Label::unknown ? std::string("undecided") : std::string(to_string(hit.label())));
    } else {
      for (const auto* op : {&q.first, &*q.second})
        for (auto n : match_nodes(g, op->component_id, op->version)) focus.insert(n);
      r.summary.message = "no knowledge about " + detail::describe(lo) + " with " + detail::describe(hi);
    }
    nodes = focus;
    r.subgraph = detail::collect(g, nodes, links, focus);
    return r;
  }

  for (auto n : match_nodes(g, q.first.component_id, q.kind == QueryKind::component ? std::nullopt : q.first.version))
    focus.insert(n);
  for (auto f : focus)
    for (auto l : g.incident(f)) links.insert(l);
  nodes = focus;
  r.subgraph = detail::collect(g, nodes, links, focus);
  r.summary.has_knowledge = !focus.empty();
  if (focus.empty()) {
    r.summary.message = "no knowledge about " + q.first.component_id +
                        (q.first.version && q.kind != QueryKind::component ? " " + q.first.version->normalized() : "");
  } else {
    r.summary.message = std::to_string(focus.size()) + " matching node(s), " + std::to_string(links.size()) +
                        " relation(s)";
  }
  return r;
}

struct LayerStats {
  Layer layer = Layer::library;
  std::vector<std::pair<std::string, std::size_t>> top;
};

/// Per layer, the k components with the most incident relations (over all
/// their versions). Ties go to the smaller id.
inline std::vector<LayerStats> top_components(const KnowledgeGraph& g, std::size_t k = 5) {
  std::vector<LayerStats> out;
  for (auto layer : kAllLayers) {
    std::map<std::string, std::set<std::size_t>> links_by_component;
    for (auto n : g.nodes_in(layer))
      for (auto l : g.incident(n)) links_by_component[g.nodes()[n].component_id].insert(l);
    LayerStats s;
    s.layer = layer;
    for (const auto& [id, ls] : links_by_component) s.top.emplace_back(id, ls.size());
    std::sort(s.top.begin(), s.top.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    if (s.top.size() > k) s.top.resize(k);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structured output shared by the CLI and the HTTP service

inline constexpr int kApiSchemaVersion = 1;

inline nlohmann::json to_json(const QueryOperand& op) {
  nlohmann::json j{{"component", op.component_id}, {"layer", to_string(op.layer)}};
  j["version"] = op.version ? nlohmann::json(op.version->normalized()) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const Subgraph& s) {
  nlohmann::json nodes = nlohmann::json::array(), links = nlohmann::json::array(), focus = nlohmann::json::array();
  for (const auto& n : s.nodes) nodes.push_back(to_json(n));
  for (const auto& l : s.links) links.push_back(to_json(l));
  for (const auto& f : s.focus) focus.push_back(node_ref(f));
  return {{"nodes", std::move(nodes)}, {"links", std::move(links)}, {"focus", std::move(focus)}};
}

inline nlohmann::json to_json(const QueryResult& r) {
  nlohmann::json query{{"kind", to_string(r.query.kind)}, {"raw", r.query.raw}, {"first", to_json(r.query.first)}};
  if (r.query.second) query["second"] = to_json(*r.query.second);
  nlohmann::json summary{{"verdict", to_string(r.summary.verdict)},
                         {"has_knowledge", r.summary.has_knowledge},
                         {"n_compatible", r.summary.n_compatible},
                         {"n_incompatible", r.summary.n_incompatible},
                         {"message", r.summary.message}};
  summary["confidence"] =
      r.summary.confidence ? nlohmann::json(r.summary.confidence->to_double()) : nlohmann::json(nullptr);
  return {{"schema_version", kApiSchemaVersion},
          {"kind", to_string(r.query.kind)},
          {"verdict", to_string(r.summary.verdict)},
          {"query", std::move(query)},
          {"summary", std::move(summary)},
          {"subgraph", to_json(r.subgraph)}};
}

/// Parse + resolve + serialize: the single path behind `query` and /api/query.
inline nlohmann::json run_query(const KnowledgeGraph& g, const Dictionary& dict, std::string_view text) {
  return to_json(resolve(g, parse_query(text, dict)));
}

inline nlohmann::json to_json(const std::vector<LayerStats>& stats) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : stats) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& [id, n] : s.top) top.push_back({{"component", id}, {"relations", n}});
    layers.push_back({{"layer", to_string(s.layer)}, {"top", std::move(top)}});
  }
  return {{"schema_version", kApiSchemaVersion}, {"layers", std::move(layers)}};
}

}  // namespace stackcompat
