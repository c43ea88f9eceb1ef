#pragma once

#include <atomic>
#include <csignal>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stackcompat/checker.hpp"
#include "stackcompat/corpus.hpp"
#include "stackcompat/graph.hpp"
#include "stackcompat/query.hpp"

namespace stackcompat {

struct ComponentStats {
  std::string component_id;
  std::vector<std::string> keywords;
  std::string license;
  std::vector<std::string> dependencies;
  std::string homepage;
};

inline std::map<std::string, ComponentStats> parse_stats(const nlohmann::json& j, const Dictionary& dict) {
  if (!j.is_array()) throw data_error("stats file must be a list of component stats");
  std::map<std::string, ComponentStats> out;
  try {
    for (const auto& item : j) {
      ComponentStats s;
      s.component_id = to_lower(item.at("component_id").get<std::string>());
      if (!dict.find(s.component_id)) throw data_error("stats for unknown component '" + s.component_id + "'");
      s.keywords = item.value("keywords", std::vector<std::string>{});
      s.license = item.value("license", std::string{});
      s.dependencies = item.value("dependencies", std::vector<std::string>{});
      s.homepage = item.value("homepage", std::string{});
      out[s.component_id] = std::move(s);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw data_error(std::string("malformed stats file: ") + ex.what());
  }
  return out;
}

inline nlohmann::json to_json(const ComponentStats& s) {
  return {{"component_id", s.component_id}, {"keywords", s.keywords}, {"license", s.license},
          {"dependencies", s.dependencies}, {"homepage", s.homepage}};
}

struct PostRef {
  std::uint64_t post_id = 0;
  std::string title;
  std::string url;
  std::int64_t votes = 0;
};

inline constexpr std::string_view kDefaultUrlTemplate = "https://stackoverflow.com/questions/{id}";

inline std::string post_url(std::string_view url_template, std::uint64_t id) {
  std::string out(url_template);
  const auto pos = out.find("{id}");
  if (pos == std::string::npos) return out + std::to_string(id);
  return out.replace(pos, 4, std::to_string(id));
}

struct ServiceConfig {
  std::string graph_path;
  std::string stats_path;   // optional
  std::string dict_path;
  std::string posts_path;   // optional: corpus file supplying post titles
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::string url_template = std::string(kDefaultUrlTemplate);
  std::string static_dir;   // optional: directory served at /
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Read-only HTTP facade over an immutable graph. Handlers are plain
/// functions of the request so they can be exercised without sockets.
class Service {
 public:
  Service(KnowledgeGraph graph, Dictionary dict, std::map<std::string, ComponentStats> stats = {},
          std::map<std::uint64_t, std::string> titles = {}, ServiceConfig config = {})
      : graph_(std::move(graph)), dict_(std::move(dict)), stats_(std::move(stats)), titles_(std::move(titles)),
        config_(std::move(config)) {}

  static Service from_config(const ServiceConfig& cfg) {
    auto dict = Dictionary::load(cfg.dict_path);
    auto graph = load_graph(cfg.graph_path);
    std::map<std::string, ComponentStats> stats;
    if (!cfg.stats_path.empty()) {
      auto j = nlohmann::json::parse(read_file(cfg.stats_path), nullptr, false);
      if (j.is_discarded()) throw data_error("stats file is not valid JSON: " + cfg.stats_path);
      stats = parse_stats(j, dict);
    }
    std::map<std::uint64_t, std::string> titles;
    if (!cfg.posts_path.empty()) {
      auto corpus = load_corpus(cfg.posts_path);
      for (const auto& p : corpus.posts) titles[p.id] = p.title;
    }
    return Service(std::move(graph), std::move(dict), std::move(stats), std::move(titles), cfg);
  }

  using Params = std::multimap<std::string, std::string>;

  ApiResponse get(const std::string& path, const Params& params) const {
    try {
      if (path == "/api/graph") return graph_listing(params);
      if (path == "/api/query") return query(params);
      if (path == "/api/relation") return relation(params);
      if (path == "/api/stats/top") return top(params);
      static const std::string component_prefix = "/api/component/";
      if (path.rfind(component_prefix, 0) == 0) return component(path.substr(component_prefix.size()));
      return error(404, "not_found", "no such endpoint: " + path);
    } catch (const Error& ex) {
      return error(ex.kind() == ErrorKind::usage ? 400 : 422, "bad_request", ex.what());
    }
  }

  ApiResponse post(const std::string& path, const std::string& body) const {
    try {
      if (path == "/api/check") return check(body);
      return error(404, "not_found", "no such endpoint: " + path);
    } catch (const Error& ex) {
      return error(400, "bad_request", ex.what());
    }
  }

  /// Registers all routes on an httplib server.
  void mount(httplib::Server& server) const {
    auto reply = [this](httplib::Response& res, const ApiResponse& api) {
      res.status = api.status;
      res.set_content(api.body.dump(2) + "\n", "application/json");
      res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
    };
    auto params_of = [](const httplib::Request& req) {
      Params p;
      for (const auto& [k, v] : req.params) p.emplace(k, v);
      return p;
    };
    server.Get(R"(/api/.*)", [=, this](const httplib::Request& req, httplib::Response& res) {
      reply(res, get(req.path, params_of(req)));
    });
    server.Post(R"(/api/.*)", [=, this](const httplib::Request& req, httplib::Response& res) {
      reply(res, post(req.path, req.body));
    });
    server.Options(R"(/api/.*)", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
      res.set_header("Access-Control-Allow-Origin", config_.cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    if (!config_.static_dir.empty()) server.set_mount_point("/", config_.static_dir);
  }

  const KnowledgeGraph& graph() const noexcept { return graph_; }
  const Dictionary& dictionary() const noexcept { return dict_; }

 private:
  static ApiResponse error(int status, const std::string& code, const std::string& message) {
    return {status, {{"schema_version", kApiSchemaVersion}, {"error", {{"code", code}, {"message", message}}}}};
  }

  static std::optional<std::string> param(const Params& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) return std::nullopt;
    return it->second;
  }

  static std::size_t count_param(const Params& p, const std::string& key, std::size_t fallback) {
    auto v = param(p, key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const auto n = std::stoll(*v, &used);
      if (used != v->size() || n < 0) throw std::invalid_argument(key);
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw usage_error("parameter '" + key + "' must be a non-negative integer");
    }
  }

  ApiResponse graph_listing(const Params& p) const {
    if (!param(p, "limit") && !param(p, "offset")) {
      auto j = to_json(graph_);
      j["schema_version"] = kApiSchemaVersion;
      return {200, std::move(j)};
    }
    const auto offset = count_param(p, "offset", 0);
    const auto limit = count_param(p, "limit", graph_.links().size());
    std::vector<Relation> slice;
    std::set<std::string> keys;
    std::vector<VersionedComponent> nodes;
    for (std::size_t i = offset; i < graph_.links().size() && slice.size() < limit; ++i) {
      const auto& l = graph_.links()[i];
      slice.push_back(l);
      for (const auto* n : {&l.a, &l.b})
        if (keys.insert(n->key()).second) nodes.push_back(*n);
    }
    std::sort(nodes.begin(), nodes.end());
    nlohmann::json jn = nlohmann::json::array(), jl = nlohmann::json::array();
    for (const auto& n : nodes) jn.push_back(to_json(n));
    for (const auto& l : slice) jl.push_back(to_json(l));
    return {200,
            {{"schema_version", kApiSchemaVersion},
             {"format_version", kGraphFormatVersion},
             {"total_links", graph_.links().size()},
             {"offset", offset},
             {"nodes", std::move(jn)},
             {"links", std::move(jl)}}};
  }

  ApiResponse query(const Params& p) const {
    auto q = param(p, "q");
    if (!q || trim(*q).empty()) return error(400, "missing_parameter", "parameter 'q' is required");
    try {
      return {200, run_query(graph_, dict_, *q)};
    } catch (const Error& ex) {
      return error(400, "unrecognized_query", ex.what());
    }
  }

  ApiResponse component(const std::string& raw_id) const {
    const auto* entry = dict_.resolve(raw_id);
    if (!entry) return error(404, "unknown_component", "unknown component '" + raw_id + "'");
    nlohmann::json versions = nlohmann::json::array();
    for (auto n : graph_.nodes_of(entry->id)) versions.push_back(graph_.nodes()[n].version_string());
    auto it = stats_.find(entry->id);
    return {200,
            {{"schema_version", kApiSchemaVersion},
             {"component_id", entry->id},
             {"layer", to_string(entry->layer)},
             {"aliases", entry->aliases},
             {"versions", std::move(versions)},
             {"stats", it == stats_.end() ? nlohmann::json(nullptr) : to_json(it->second)}}};
  }

  ApiResponse relation(const Params& p) const {
    auto a = param(p, "a"), va = param(p, "va"), b = param(p, "b"), vb = param(p, "vb");
    if (!a || !va || !b || !vb) return error(400, "missing_parameter", "parameters a, va, b, vb are required");
    const auto* ea = dict_.resolve(*a);
    const auto* eb = dict_.resolve(*b);
    if (!ea || !eb) return error(404, "unknown_component", "unknown component in relation request");
    const VersionedComponent x{ea->id, ea->layer, normalize_version(*va)};
    const VersionedComponent y{eb->id, eb->layer, normalize_version(*vb)};
    const auto* rel = graph_.find_relation(x, y);
    if (!rel) return error(404, "no_relation", "no relation between " + x.key() + " and " + y.key());
    auto j = to_json(*rel);
    nlohmann::json posts = nlohmann::json::array();
    for (const auto& e : rel->evidence) {
      auto t = titles_.find(e.post_id);
      posts.push_back({{"post_id", e.post_id},
                       {"title", t == titles_.end() ? std::string{} : t->second},
                       {"url", post_url(config_.url_template, e.post_id)},
                       {"votes", e.votes},
                       {"label", to_string(e.label)}});
    }
    j["schema_version"] = kApiSchemaVersion;
    j["label"] = to_string(rel->label());
    j["posts"] = std::move(posts);
    return {200, std::move(j)};
  }

  ApiResponse top(const Params& p) const {
    const auto k = count_param(p, "k", 5);
    return {200, to_json(top_components(graph_, k))};
  }

  ApiResponse check(const std::string& body) const {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error(400, "bad_body", "body must be a JSON object");
    std::string text;
    if (j.contains("text") && j["text"].is_string()) {
      text = j["text"].get<std::string>();
    } else if (j.contains("entries") && j["entries"].is_array()) {
      for (const auto& e : j["entries"]) {
        if (!e.is_object() || !e.contains("component") || !e.contains("version"))
          return error(400, "bad_body", "entries must be {component, version, layer?} objects");
        text += e["component"].get<std::string>() + "==" + e["version"].get<std::string>();
        if (e.contains("layer")) text += " @" + e["layer"].get<std::string>();
        text += "\n";
      }
    } else {
      return error(400, "bad_body", "body must carry 'entries' or 'text'");
    }
    const auto env = parse_environment_text(text, dict_, "request");
    const bool report_unknown = j.value("report_unknown", false);
    auto out = to_json(check_environment(graph_, env), report_unknown);
    out["diagnostics"] = env.diagnostics;
    return {200, std::move(out)};
  }

  KnowledgeGraph graph_;
  Dictionary dict_;
  std::map<std::string, ComponentStats> stats_;
  std::map<std::uint64_t, std::string> titles_;
  ServiceConfig config_;
};

namespace detail {
inline std::atomic<httplib::Server*> g_running_server{nullptr};
inline void stop_on_signal(int) {
  if (auto* s = g_running_server.load()) s->stop();
}
}  // namespace detail

/// Blocks serving until SIGINT/SIGTERM. Throws an io error if the port
/// cannot be bound.
inline void serve(const ServiceConfig& cfg) {
  const auto service = Service::from_config(cfg);
  httplib::Server server;
  // httplib's default also sets SO_REUSEPORT, which would let a second
  // instance share a busy port instead of failing.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  service.mount(server);
  if (!server.bind_to_port(cfg.host, cfg.port))
    throw io_error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  detail::g_running_server = &server;
  std::signal(SIGINT, detail::stop_on_signal);
  std::signal(SIGTERM, detail::stop_on_signal);
  server.listen_after_bind();
  detail::g_running_server = nullptr;
}

}  // namespace stackcompat
