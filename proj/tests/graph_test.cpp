#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "stackcompat/graph.hpp"

using namespace stackcompat;

namespace {

VersionedComponent vc(std::string id, Layer layer, std::string ver) {
  return {std::move(id), layer, normalize_version(ver)};
}

const auto kTf = vc("tensorflow", Layer::library, "1.13");
const auto kCuda = vc("cuda", Layer::driver, "10.1");
const auto kPy = vc("python", Layer::runtime, "3.7");

Verdict verdict(const VersionedComponent& a, const VersionedComponent& b, Label label, std::uint64_t post,
                std::int64_t votes = 0, std::size_t paragraph = 0) {
  Verdict v;
  v.a = a;
  v.b = b;
  v.label = label;
  v.post_id = post;
  v.votes = votes;
  v.paragraph = paragraph;
  return v;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("stackcompat_graph_test_" + name)).string();
}

}  // namespace

TEST(Confidence, Examples) {
  EXPECT_EQ(confidence_score(1, 0), Rational(1, 1));
  EXPECT_EQ(confidence_score(3, 1), Rational(1, 2));
  EXPECT_EQ(confidence_score(2, 2).sign(), 0);
  EXPECT_EQ(confidence_score(0, 4), Rational(-1, 1));
}

TEST(Confidence, Errors) {
  EXPECT_THROW(confidence_score(0, 0), Error);
  EXPECT_THROW(confidence_score(-1, 2), Error);
}

TEST(Confidence, AntisymmetryBoundsUnanimity) {
  for (std::int64_t c = 0; c <= 20; ++c) {
    for (std::int64_t i = 0; i <= 20; ++i) {
      if (c + i == 0) continue;
      const auto s = confidence_score(c, i);
      EXPECT_EQ(confidence_score(i, c), Rational(-s.num(), s.den()));
      EXPECT_LE(s, Rational(1, 1));
      EXPECT_GE(s, Rational(-1, 1));
      EXPECT_EQ(s == Rational(1, 1) || s == Rational(-1, 1), c == 0 || i == 0);
      EXPECT_EQ(s.sign() > 0, c > i);
    }
  }
}

TEST(Aggregate, MajorityExample) {
  std::vector<Verdict> vs{verdict(kTf, kCuda, Label::compatible, 1, 5), verdict(kCuda, kTf, Label::compatible, 2, 9),
                          verdict(kTf, kCuda, Label::compatible, 3, 5), verdict(kTf, kCuda, Label::incompatible, 4, 1)};
  auto rels = aggregate(vs);
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].label(), Label::compatible);
  EXPECT_EQ(rels[0].confidence(), Rational(1, 2));
  EXPECT_EQ(rels[0].a.component_id, "cuda");  // canonical order
  ASSERT_EQ(rels[0].evidence.size(), 4u);
  std::vector<std::uint64_t> order;
  for (const auto& e : rels[0].evidence) order.push_back(e.post_id);
  EXPECT_EQ(order, (std::vector<std::uint64_t>{2, 1, 3, 4}));
}

TEST(Aggregate, NeutralDiscarded) {
  AggregateReport r;
  auto rels = aggregate({verdict(kTf, kCuda, Label::compatible, 1), verdict(kTf, kCuda, Label::incompatible, 2)}, &r);
  EXPECT_TRUE(rels.empty());
  EXPECT_EQ(r.pairs, 1u);
  EXPECT_EQ(r.neutral_discarded, 1u);
}

TEST(Aggregate, SamePostCountedOnce) {
  AggregateReport r;
  auto rels = aggregate({verdict(kTf, kCuda, Label::incompatible, 1, 0, 1), verdict(kTf, kCuda, Label::compatible, 1, 0, 0),
                         verdict(kTf, kCuda, Label::unknown, 2)},
                        &r);
  ASSERT_EQ(rels.size(), 1u);
  EXPECT_EQ(rels[0].n_compatible, 1);  // earliest paragraph wins
  EXPECT_EQ(rels[0].n_incompatible, 0);
  EXPECT_EQ(r.duplicates, 1u);
  EXPECT_EQ(r.unknown, 1u);
}

TEST(Aggregate, OrderInsensitive) {
  std::mt19937 rng(9);
  const std::vector<VersionedComponent> pool{kTf, kCuda, kPy, vc("cuda", Layer::driver, "10.0"),
                                             vc("tensorflow", Layer::library, "2.x")};
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Verdict> vs;
    for (int k = 0; k < 30; ++k) {
      auto a = pool[rng() % pool.size()], b = pool[rng() % pool.size()];
      if (a.component_id == b.component_id) continue;
      const std::uint64_t post = 1 + rng() % 8;
      vs.push_back(verdict(a, b, static_cast<Label>(rng() % 3), post, static_cast<std::int64_t>(post * 7 % 5), rng() % 3));
    }
    const auto expected = build_graph(aggregate(vs));
    for (int s = 0; s < 5; ++s) {
      std::shuffle(vs.begin(), vs.end(), rng);
      EXPECT_TRUE(build_graph(aggregate(vs)) == expected);
      EXPECT_EQ(serialize_graph(build_graph(aggregate(vs))), serialize_graph(expected));
    }
    for (const auto& rel : expected.links()) {
      EXPECT_GE(rel.n_compatible + rel.n_incompatible, 1);
      EXPECT_NE(rel.confidence().sign(), 0);
      std::set<std::uint64_t> posts;
      for (const auto& e : rel.evidence) EXPECT_TRUE(posts.insert(e.post_id).second);
    }
  }
}

TEST(BuildGraph, NodesAndLinks) {
  auto one = build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1)}));
  EXPECT_EQ(one.nodes().size(), 2u);
  EXPECT_EQ(one.links().size(), 1u);
  auto two = build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1), verdict(kCuda, kPy, Label::compatible, 2)}));
  EXPECT_EQ(two.nodes().size(), 3u);
  EXPECT_EQ(two.links().size(), 2u);
  EXPECT_EQ(two.nodes_of("cuda").size(), 1u);
  EXPECT_EQ(two.nodes_in(Layer::runtime).size(), 1u);
  EXPECT_EQ(two.incident(*two.node_index(kCuda)).size(), 2u);
  ASSERT_NE(two.find_relation(kPy, kCuda), nullptr);
  EXPECT_EQ(two.find_relation(kPy, kTf), nullptr);
}

TEST(BuildGraph, RejectsInvalidRelations) {
  auto rel = aggregate({verdict(kTf, kCuda, Label::incompatible, 1)});
  auto dup = rel;
  dup.push_back(rel[0]);
  EXPECT_THROW(build_graph(dup), Error);
  Relation self{kTf, vc("tensorflow", Layer::library, "2.0"), 1, 0, {}};
  EXPECT_THROW(build_graph({self}), Error);
  Relation neutral{kTf, kCuda, 1, 1, {}};
  EXPECT_THROW(build_graph({neutral}), Error);
}

TEST(Lookup, PrefixSubsumptionAndSpecificity) {
  auto g = build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1),
                                  verdict(vc("tensorflow", Layer::library, "1.13.1"), kCuda, Label::compatible, 2),
                                  verdict(vc("tensorflow", Layer::library, "1.x"), kCuda, Label::compatible, 3)}));
  // exact
  auto exact = lookup_pair(g, kCuda, kTf);
  EXPECT_EQ(exact.label(), Label::incompatible);
  // more specific probe prefers the more specific node
  auto deep = lookup_pair(g, vc("tensorflow", Layer::library, "1.13.1"), kCuda);
  EXPECT_EQ(deep.label(), Label::compatible);
  EXPECT_EQ(deep.links.size(), 1u);
  // under-specified probe "tensorflow 1" ties between 1.13, 1.13.1 and the concrete ones win over 1.x
  auto loose = lookup_pair(g, vc("tensorflow", Layer::library, "1"), kCuda);
  EXPECT_TRUE(loose.found());
  EXPECT_EQ(loose.links.size(), 2u);
  EXPECT_EQ(loose.label(), Label::unknown);  // 1 compatible vs 1 incompatible merged
  EXPECT_FALSE(lookup_pair(g, vc("tensorflow", Layer::library, "2.0"), kCuda).found());
}

TEST(Persistence, RoundTrip) {
  auto g = build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1, 12),
                                  verdict(kTf, kCuda, Label::incompatible, 7, 40),
                                  verdict(kPy, kTf, Label::compatible, 2, 3)}));
  const auto path = temp_path("roundtrip.json");
  save_graph(g, path);
  auto back = load_graph(path);
  EXPECT_TRUE(back == g);
  EXPECT_EQ(serialize_graph(back), read_file(path));
  std::filesystem::remove(path);
}

TEST(Persistence, TruncatedFileIsFatal) {
  auto g = build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1)}));
  auto text = serialize_graph(g);
  try {
    parse_graph(text.substr(0, text.size() / 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(Persistence, UnknownFormatVersion) {
  auto j = to_json(build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1)})));
  j["format_version"] = 99;
  try {
    graph_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("format_version"), std::string::npos);
  }
}

TEST(Persistence, InconsistentConfidenceRejected) {
  auto j = to_json(build_graph(aggregate({verdict(kTf, kCuda, Label::incompatible, 1)})));
  j["links"][0]["confidence"] = 0.5;
  EXPECT_THROW(graph_from_json(j), Error);
}

TEST(Persistence, MissingFileIsIoError) {
  try {
    load_graph("/nonexistent/graph.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}
