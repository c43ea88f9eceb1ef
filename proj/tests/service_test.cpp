#include <gtest/gtest.h>

#include <thread>

#include "stackcompat/service.hpp"

using namespace stackcompat;

namespace {

const Dictionary& dict() {
  static const Dictionary d = Dictionary::load(STACKCOMPAT_DATA_DIR "/dictionary.json");
  return d;
}

VersionedComponent vc(const std::string& id, const std::string& ver) {
  return {id, dict().find(id)->layer, normalize_version(ver)};
}

KnowledgeGraph fixture() {
  Relation fig{vc("tensorflow", "1.13"), vc("cuda", "10.1"), 0, 2,
               {{55028552, 12, Label::incompatible}, {1001, 3, Label::incompatible}}};
  Relation ok{vc("python", "3.6.8"), vc("ubuntu", "16.04.6"), 2, 1,
              {{7, 9, Label::compatible}, {5, 4, Label::incompatible}, {6, 4, Label::compatible}}};
  Relation py{vc("python", "3.7"), vc("tensorflow", "1.13"), 1, 0, {{1002, 5, Label::compatible}}};
  return build_graph({fig, ok, py});
}

Service make_service() {
  ServiceConfig cfg;
  cfg.url_template = "https://example.org/q/{id}";
  auto stats = parse_stats(nlohmann::json::parse(read_file(STACKCOMPAT_DATA_DIR "/stats.json")), dict());
  return Service(fixture(), dict(), stats, {{55028552, "TensorFlow 1.13 with CUDA 10.1"}}, cfg);
}

}  // namespace

TEST(Service, GraphListingMatchesFile) {
  const auto path = STACKCOMPAT_DATA_DIR "/benchmark/graph.json";
  Service svc(load_graph(path), dict());
  auto r = svc.get("/api/graph", {});
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("schema_version"), 1);
  auto body = r.body;
  body.erase("schema_version");
  EXPECT_EQ(body, nlohmann::json::parse(read_file(path)));
}

TEST(Service, GraphListingPaginates) {
  auto svc = make_service();
  auto r = svc.get("/api/graph", {{"limit", "1"}, {"offset", "1"}});
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["links"].size(), 1u);
  EXPECT_EQ(r.body["nodes"].size(), 2u);
  EXPECT_EQ(r.body["total_links"], 3);
  EXPECT_EQ(svc.get("/api/graph", {{"limit", "-1"}}).status, 400);
  EXPECT_EQ(svc.get("/api/graph", {{"offset", "abc"}}).status, 400);
}

TEST(Service, PairQuery) {
  auto svc = make_service();
  auto r = svc.get("/api/query", {{"q", "Does python 3.6.8 work with ubuntu 16.04.6?"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["schema_version"], 1);
  EXPECT_EQ(r.body["kind"], "pair");
  EXPECT_EQ(r.body["verdict"], "compatible");
  EXPECT_EQ(r.body["subgraph"]["links"].size(), 1u);
  EXPECT_EQ(r.body, run_query(svc.graph(), svc.dictionary(), "Does python 3.6.8 work with ubuntu 16.04.6?"));
}

TEST(Service, QueryErrors) {
  auto svc = make_service();
  auto missing = svc.get("/api/query", {});
  EXPECT_EQ(missing.status, 400);
  EXPECT_EQ(missing.body["error"]["code"], "missing_parameter");
  auto bad = svc.get("/api/query", {{"q", "hello world"}});
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body["error"]["code"], "unrecognized_query");
  EXPECT_EQ(bad.body["schema_version"], 1);
  EXPECT_EQ(svc.get("/api/nope", {}).status, 404);
}

TEST(Service, RelationDetailKeepsStoredEvidenceOrder) {
  auto svc = make_service();
  auto r = svc.get("/api/relation", {{"a", "CUDA"}, {"va", "10.1"}, {"b", "tf"}, {"vb", "1.13"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["label"], "incompatible");
  EXPECT_EQ(r.body["n_incompatible"], 2);
  ASSERT_EQ(r.body["posts"].size(), 2u);
  EXPECT_EQ(r.body["posts"][0]["post_id"], 55028552);
  EXPECT_EQ(r.body["posts"][0]["title"], "TensorFlow 1.13 with CUDA 10.1");
  EXPECT_EQ(r.body["posts"][0]["url"], "https://example.org/q/55028552");
  EXPECT_EQ(r.body["posts"][1]["post_id"], 1001);
  EXPECT_EQ(r.body["posts"][1]["title"], "");

  auto ok = svc.get("/api/relation", {{"a", "python"}, {"va", "3.6.8"}, {"b", "ubuntu"}, {"vb", "16.04.6"}});
  std::vector<std::uint64_t> ids;
  for (const auto& p : ok.body["posts"]) ids.push_back(p["post_id"]);
  EXPECT_EQ(ids, (std::vector<std::uint64_t>{7, 5, 6}));
}

TEST(Service, RelationErrors) {
  auto svc = make_service();
  EXPECT_EQ(svc.get("/api/relation", {{"a", "cuda"}}).status, 400);
  EXPECT_EQ(svc.get("/api/relation", {{"a", "leftpad"}, {"va", "1"}, {"b", "cuda"}, {"vb", "1.0"}}).status, 404);
  EXPECT_EQ(svc.get("/api/relation", {{"a", "cuda"}, {"va", "9.0"}, {"b", "tensorflow"}, {"vb", "1.13"}}).status, 404);
  EXPECT_EQ(svc.get("/api/relation", {{"a", "cuda"}, {"va", "latest"}, {"b", "tensorflow"}, {"vb", "1.13"}}).status,
            422);
}

TEST(Service, TopStats) {
  auto svc = make_service();
  auto r = svc.get("/api/stats/top", {{"k", "5"}});
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body["layers"].size(), 5u);
  EXPECT_EQ(r.body["layers"][0]["layer"], "library");
  EXPECT_EQ(r.body["layers"][0]["top"][0]["component"], "tensorflow");
  EXPECT_EQ(r.body["layers"][0]["top"][0]["relations"], 2);
  auto one = svc.get("/api/stats/top", {{"k", "0"}});
  for (const auto& l : one.body["layers"]) EXPECT_TRUE(l["top"].empty());
}

TEST(Service, ComponentDetail) {
  auto svc = make_service();
  auto r = svc.get("/api/component/torch", {});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["component_id"], "pytorch");
  EXPECT_EQ(r.body["stats"]["license"], "BSD-3-Clause");
  EXPECT_TRUE(r.body["versions"].empty());
  auto py = svc.get("/api/component/python", {});
  EXPECT_EQ(py.body["versions"], nlohmann::json({"3.6.8", "3.7"}));
  EXPECT_EQ(py.body["layer"], "runtime");
  EXPECT_EQ(svc.get("/api/component/leftpad", {}).status, 404);
}

TEST(Service, CheckEndpoint) {
  auto svc = make_service();
  auto r = svc.post("/api/check", R"({"entries": [{"component": "tensorflow", "version": "1.13"},
                                                  {"component": "cuda", "version": "10.1", "layer": "driver"},
                                                  {"component": "leftpad", "version": "1.0"}],
                                      "report_unknown": true})");
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body["issues"].size(), 1u);
  EXPECT_EQ(r.body["issues"][0]["confidence"], -1.0);
  EXPECT_EQ(r.body["diagnostics"].size(), 1u);
  EXPECT_TRUE(r.body.contains("unknown_pairs"));

  auto text = svc.post("/api/check", R"({"text": "tensorflow==1.13\npython==3.7\n"})");
  EXPECT_TRUE(text.body["issues"].empty());
  EXPECT_FALSE(text.body.contains("unknown_pairs"));

  EXPECT_EQ(svc.post("/api/check", "not json").status, 400);
  EXPECT_EQ(svc.post("/api/check", R"({"entries": [1]})").status, 400);
  EXPECT_EQ(svc.post("/api/check", R"({"text": "leftpad==1"})").status, 400);
  EXPECT_EQ(svc.post("/api/other", "{}").status, 404);
}

TEST(Service, IdempotentReads) {
  auto svc = make_service();
  const Service::Params q{{"q", "tensorflow"}};
  EXPECT_EQ(svc.get("/api/query", q).body, svc.get("/api/query", q).body);
  EXPECT_EQ(svc.get("/api/graph", {}).body, svc.get("/api/graph", {}).body);
}

TEST(Service, OverRealSocketWithCors) {
  auto svc = make_service();
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/api/query?q=Does%20python%203.6.8%20work%20with%20ubuntu%2016.04.6%3F");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(res->get_header_value("Content-Type").find("application/json"), std::string::npos);
  auto body = nlohmann::json::parse(res->body);
  EXPECT_EQ(body["kind"], "pair");
  EXPECT_EQ(res->body, run_query(svc.graph(), svc.dictionary(), "Does python 3.6.8 work with ubuntu 16.04.6?").dump(2) + "\n");

  auto post = client.Post("/api/check", R"({"text": "tensorflow==1.13\ncuda==10.1 @driver"})", "application/json");
  ASSERT_TRUE(post);
  EXPECT_EQ(nlohmann::json::parse(post->body)["issues"].size(), 1u);

  auto options = client.Options("/api/check");
  ASSERT_TRUE(options);
  EXPECT_EQ(options->status, 204);
  EXPECT_NE(options->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  server.stop();
  t.join();
}

TEST(Service, FromConfigAndBindFailure) {
  ServiceConfig cfg;
  cfg.graph_path = STACKCOMPAT_DATA_DIR "/benchmark/graph.json";
  cfg.dict_path = STACKCOMPAT_DATA_DIR "/dictionary.json";
  cfg.stats_path = STACKCOMPAT_DATA_DIR "/stats.json";
  cfg.posts_path = STACKCOMPAT_DATA_DIR "/synthetic/corpus.jsonl";
  auto svc = Service::from_config(cfg);
  EXPECT_FALSE(svc.graph().empty());

  httplib::Server holder;
  const int port = holder.bind_to_any_port("127.0.0.1");
  cfg.port = port;
  try {
    serve(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(PostUrl, Template) {
  EXPECT_EQ(post_url(kDefaultUrlTemplate, 55028552), "https://stackoverflow.com/questions/55028552");
  EXPECT_EQ(post_url("https://x/", 3), "https://x/3");
}
