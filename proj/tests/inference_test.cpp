#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "stackcompat/inference.hpp"

using namespace stackcompat;

namespace {

VersionedComponent vc(std::string id, Layer layer, std::string ver) {
  return {std::move(id), layer, normalize_version(ver)};
}

CompatibilityQuestion question(std::string context) {
  CompatibilityQuestion q;
  q.context = std::move(context);
  q.pair = {vc("tensorflow", Layer::library, "1.13"), vc("cuda", Layer::driver, "10.1")};
  q.question = build_question(q.pair.first, q.pair.second);
  return q;
}

const Dictionary& dict() {
  static const Dictionary d({{"tensorflow", Layer::library, {"tensorflow", "tf"}},
                             {"cuda", Layer::driver, {"cuda"}},
                             {"python", Layer::runtime, {"python"}}});
  return d;
}

// Local stand-in for a QA service.
class FakeQa {
 public:
  explicit FakeQa(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/qa", [handler](const httplib::Request& req, httplib::Response& res) { handler(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeQa() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/qa"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

void answer(httplib::Response& res, const std::string& text) {
  res.set_content(nlohmann::json{{"answer", text}}.dump(), "application/json");
}

}  // namespace

TEST(BuildQuestion, DefaultTemplate) {
  EXPECT_EQ(build_question(vc("tensorflow", Layer::library, "1.13"), vc("cuda", Layer::driver, "10.1")),
            "Does tensorflow 1.13 work with cuda 10.1?");
  EXPECT_EQ(build_question(vc("python", Layer::runtime, "v3.x"), vc("pytorch", Layer::library, "1.7")),
            "Does python 3.x work with pytorch 1.7?");
}

TEST(BuildQuestion, CustomTemplate) {
  EXPECT_EQ(build_question(vc("a", Layer::library, "1.0"), vc("b", Layer::library, "2.0"), "{B}={vb} vs {A}={va} {C}"),
            "b=2.0 vs a=1.0 {C}");
}

TEST(Heuristic, FigureSentenceIsIncompatible) {
  EXPECT_EQ(heuristic_infer(question("tensorflow 1.13 doesn't work with cuda 10.1 because of the following: "
                                     "\"ImportError: libcublas.so.10.0: cannot open shared object file\".")),
            Label::incompatible);
}

TEST(Heuristic, TypographicApostrophe) {
  EXPECT_EQ(heuristic_infer(question("tensorflow 1.13 doesn\xE2\x80\x99t work with cuda 10.1")), Label::incompatible);
}

TEST(Heuristic, Compatible) {
  EXPECT_EQ(heuristic_infer(question("tensorflow 1.13 works with cuda 10.0 fine")), Label::compatible);
  EXPECT_EQ(heuristic_infer(question("My issue was SOLVED by switching versions")), Label::compatible);
}

TEST(Heuristic, NegatedCompatibilityIsNotCompatible) {
  EXPECT_EQ(heuristic_infer(question("tensorflow 1.13 is not compatible with cuda 10.1")), Label::incompatible);
}

TEST(Heuristic, NoCuesOrTieIsUnknown) {
  EXPECT_EQ(heuristic_infer(question("tensorflow 1.13 and cuda 10.1")), Label::unknown);
  EXPECT_EQ(heuristic_infer(question("it works with one and fails with another")), Label::unknown);
  // "errors" is not the cue "error" on a word boundary
  EXPECT_EQ(heuristic_infer(question("no terrors here")), Label::unknown);
}

TEST(Heuristic, FocusWindowWeighsDouble) {
  auto q = question("It fails on my old laptop. tensorflow 1.13 works with cuda 10.1 here.");
  EXPECT_EQ(heuristic_infer(q), Label::unknown);
  q.focus = std::pair<std::size_t, std::size_t>{27, q.context.size()};
  EXPECT_EQ(heuristic_infer(q), Label::compatible);
}

TEST(LabelFromAnswer, Mapping) {
  EXPECT_EQ(label_from_answer("Yes"), Label::compatible);
  EXPECT_EQ(label_from_answer("  yes, it does"), Label::compatible);
  EXPECT_EQ(label_from_answer("No."), Label::incompatible);
  EXPECT_EQ(label_from_answer("nope"), Label::unknown);
  EXPECT_EQ(label_from_answer("maybe"), Label::unknown);
  EXPECT_EQ(label_from_answer(""), Label::unknown);
}

TEST(RemoteOracle, PostsContextAndQuestion) {
  std::string seen_context, seen_question;
  std::mutex mu;
  FakeQa qa([&](const httplib::Request& req, httplib::Response& res) {
    auto j = nlohmann::json::parse(req.body);
    std::lock_guard lock(mu);
    seen_context = j.at("context");
    seen_question = j.at("question");
    answer(res, "No.");
  });
  Diagnostics diag;
  RemoteOracle oracle(qa.url(), std::chrono::milliseconds(2000), diag);
  auto q = question("tensorflow 1.13 doesn't work with cuda 10.1");
  EXPECT_EQ(oracle.infer(q), Label::incompatible);
  EXPECT_EQ(oracle.source(), VerdictSource::remote);
  EXPECT_EQ(seen_context, q.context);
  EXPECT_EQ(seen_question, "Does tensorflow 1.13 work with cuda 10.1?");
  EXPECT_EQ(diag.size(), 0u);
}

TEST(RemoteOracle, YesIsCompatible) {
  FakeQa qa([](const httplib::Request&, httplib::Response& res) { answer(res, "yes"); });
  Diagnostics diag;
  EXPECT_EQ(remote_infer(question("x"), qa.url(), std::chrono::milliseconds(2000), diag), Label::compatible);
}

TEST(RemoteOracle, TimeoutBecomesUnknownWithDiagnostic) {
  FakeQa qa([](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    answer(res, "yes");
  });
  Diagnostics diag;
  EXPECT_EQ(remote_infer(question("x"), qa.url(), std::chrono::milliseconds(100), diag), Label::unknown);
  EXPECT_EQ(diag.size(), 1u);
}

TEST(RemoteOracle, BadResponsesBecomeUnknown) {
  FakeQa qa([](const httplib::Request& req, httplib::Response& res) {
    if (req.body.find("500") != std::string::npos) {
      res.status = 500;
    } else {
      res.set_content("not json", "text/plain");
    }
  });
  Diagnostics diag;
  EXPECT_EQ(remote_infer(question("500"), qa.url(), std::chrono::milliseconds(2000), diag), Label::unknown);
  EXPECT_EQ(remote_infer(question("x"), qa.url(), std::chrono::milliseconds(2000), diag), Label::unknown);
  EXPECT_EQ(remote_infer(question("x"), "http://127.0.0.1:1/qa", std::chrono::milliseconds(500), diag),
            Label::unknown);
  EXPECT_EQ(remote_infer(question("x"), "not a url", std::chrono::milliseconds(500), diag), Label::unknown);
  EXPECT_EQ(diag.size(), 4u);
}

TEST(RemoteOracle, BoundsRequestsInFlight) {
  std::atomic<int> current{0}, peak{0};
  FakeQa qa([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --current;
    answer(res, "yes");
  });
  Diagnostics diag;
  RemoteOracle oracle(qa.url(), std::chrono::milliseconds(3000), diag, 2);
  std::vector<std::jthread> workers;
  for (int i = 0; i < 6; ++i) workers.emplace_back([&] { EXPECT_EQ(oracle.infer(question("x")), Label::compatible); });
  workers.clear();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(MakeOracle, Validates) {
  Diagnostics diag;
  EXPECT_EQ(make_oracle({}, diag)->source(), VerdictSource::heuristic);
  EXPECT_THROW(make_oracle({"remote", "", 100, 1}, diag), Error);
  EXPECT_THROW(make_oracle({"magic", "", 100, 1}, diag), Error);
}

TEST(InferParagraph, OneVerdictPerDistinctPair) {
  Post p;
  p.id = 7;
  p.votes = 3;
  p.paragraphs = {"tensorflow 1.13 doesn't work with cuda 10.1 or python 3.8. tensorflow 1.13 again."};
  auto ms = recognize(p.paragraphs[0], dict());
  auto bound = bind_versions(ms);
  HeuristicOracle oracle;
  auto vs = infer_paragraph(p, 0, bound, ms, oracle);
  ASSERT_EQ(vs.size(), 3u);
  for (const auto& v : vs) {
    EXPECT_EQ(v.post_id, 7u);
    EXPECT_EQ(v.votes, 3);
    EXPECT_EQ(v.label, Label::incompatible);
    EXPECT_NE(v.a.component_id, v.b.component_id);
  }
}

TEST(InferParagraph, SameComponentYieldsNothing) {
  Post p;
  p.id = 8;
  p.paragraphs = {"tensorflow 1.13 doesn't work with tensorflow 2.0"};
  auto ms = recognize(p.paragraphs[0], dict());
  HeuristicOracle oracle;
  EXPECT_TRUE(infer_paragraph(p, 0, bind_versions(ms), ms, oracle).empty());
}

TEST(Verdicts, JsonRoundTrip) {
  Verdict v;
  v.label = Label::compatible;
  v.source = VerdictSource::remote;
  v.post_id = 42;
  v.votes = -1;
  v.a = vc("python", Layer::runtime, "3.x");
  v.b = vc("tensorflow", Layer::library, "2.4.0");
  v.paragraph = 2;
  auto back = parse_verdicts(write_verdicts({v, v}));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].label, v.label);
  EXPECT_EQ(back[0].source, v.source);
  EXPECT_EQ(back[0].a, v.a);
  EXPECT_EQ(back[0].b, v.b);
  EXPECT_EQ(back[0].paragraph, 2u);
  EXPECT_EQ(back[0].votes, -1);
}
