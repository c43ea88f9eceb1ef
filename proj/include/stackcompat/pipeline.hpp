#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stackcompat/corpus.hpp"
#include "stackcompat/graph.hpp"
#include "stackcompat/inference.hpp"
#include "stackcompat/recognizer.hpp"

namespace stackcompat {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

struct PipelineConfig {
  std::string corpus_path;
  std::string filters_path;
  std::string dict_path;
  OracleSettings oracle;
  std::string question_template = std::string(kDefaultQuestionTemplate);
  std::string graph_out;
  std::string report_out;     // optional
  std::string work_dir;       // optional: filtered posts and verdicts are written here
  std::size_t parallelism = 1;
};

struct RunReport {
  std::size_t posts_loaded = 0;
  std::size_t malformed_records = 0;
  std::vector<RecordError> record_errors;
  FilterReport filter;
  std::size_t paragraphs = 0;
  std::size_t candidate_paragraphs = 0;
  std::size_t verdicts_compatible = 0;
  std::size_t verdicts_incompatible = 0;
  std::size_t verdicts_unknown = 0;
  AggregateReport aggregate;
  std::size_t nodes = 0;
  std::size_t links = 0;
  std::vector<std::string> diagnostics;
};

struct InferStats {
  std::size_t paragraphs = 0;
  std::size_t candidates = 0;
};

/// Recognition + inference over filtered posts. Verdict order follows post
/// order and paragraph order, whatever the parallelism.
inline std::vector<Verdict> infer_posts(const std::vector<Post>& posts, const Dictionary& dict, Oracle& oracle,
                                        std::size_t parallelism, std::string_view question_template = kDefaultQuestionTemplate,
                                        InferStats* stats = nullptr) {
  std::vector<std::vector<Verdict>> per_post(posts.size());
  std::vector<InferStats> per_stats(posts.size());
  parallel_for(posts.size(), parallelism, [&](std::size_t i) {
    const auto& post = posts[i];
    std::vector<std::vector<Mention>> mentions;
    std::vector<std::vector<Binding>> bindings;
    for (const auto& para : post.paragraphs) {
      mentions.push_back(recognize(para, dict));
      bindings.push_back(bind_versions(mentions.back()));
    }
    const auto candidates = candidate_paragraphs(post, bindings);
    per_stats[i] = {post.paragraphs.size(), candidates.size()};
    for (auto p : candidates) {
      auto v = infer_paragraph(post, p, bindings[p], mentions[p], oracle, question_template);
      per_post[i].insert(per_post[i].end(), v.begin(), v.end());
    }
  });
  std::vector<Verdict> out;
  InferStats total;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    out.insert(out.end(), per_post[i].begin(), per_post[i].end());
    total.paragraphs += per_stats[i].paragraphs;
    total.candidates += per_stats[i].candidates;
  }
  if (stats) *stats = total;
  return out;
}

inline nlohmann::json to_json(const RunReport& r) {
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : r.record_errors) errors.push_back({{"line", e.line}, {"message", e.message}});
  return {
      {"stages",
       {{"posts_loaded", r.posts_loaded},
        {"malformed_records", r.malformed_records},
        {"after_tag_filter", r.filter.tagged},
        {"after_cue_filter", r.filter.with_cues},
        {"after_accepted_filter", r.filter.kept},
        {"paragraphs", r.paragraphs},
        {"candidate_paragraphs", r.candidate_paragraphs}}},
      {"verdicts",
       {{"compatible", r.verdicts_compatible},
        {"incompatible", r.verdicts_incompatible},
        {"unknown", r.verdicts_unknown}}},
      {"relations",
       {{"pairs_before_discard", r.aggregate.pairs},
        {"duplicate_post_verdicts", r.aggregate.duplicates},
        {"discarded_neutral", r.aggregate.neutral_discarded},
        {"kept", r.aggregate.kept}}},
      {"graph", {{"nodes", r.nodes}, {"links", r.links}}},
      {"record_errors", std::move(errors)},
      {"diagnostics", r.diagnostics},
      {"reference_funnel",
       {{"note", "original study corpus sizes; not reproduced by this run"},
        {"posts_total", "53M"},
        {"after_tag_filter", "4.9M"},
        {"after_pattern_filter", "549K"},
        {"after_accepted_filter", "355K"}}}};
}

inline std::string format_report(const RunReport& r) {
  std::ostringstream out;
  out << "posts loaded           " << r.posts_loaded << " (" << r.malformed_records << " malformed skipped)\n"
      << "after tag filter       " << r.filter.tagged << "\n"
      << "after cue filter       " << r.filter.with_cues << "\n"
      << "after accepted filter  " << r.filter.kept << "\n"
      << "candidate paragraphs   " << r.candidate_paragraphs << " of " << r.paragraphs << "\n"
      << "verdicts               " << r.verdicts_compatible << " compatible, " << r.verdicts_incompatible
      << " incompatible, " << r.verdicts_unknown << " unknown\n"
      << "relations              " << r.aggregate.pairs << " before discard, " << r.aggregate.neutral_discarded
      << " neutral discarded, " << r.aggregate.kept << " kept\n"
      << "graph                  " << r.nodes << " nodes, " << r.links << " links\n"
      << "reference funnel (original study, not reproduced): 53M -> 4.9M -> 549K -> 355K posts\n";
  return out.str();
}

/// corpus -> filter -> recognize/bind -> infer -> aggregate -> build -> save.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
  if (cfg.parallelism < 1) throw usage_error("parallelism must be >= 1");
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const Error& ex) {
      throw Error(ex.kind(), std::string("[") + name + "] " + ex.what());
    }
  };
  RunReport report;
  const auto dict = stage("dictionary", [&] { return Dictionary::load(cfg.dict_path); });
  const auto filters = stage("ingest", [&] { return FilterConfig::load(cfg.filters_path); });
  auto corpus = stage("ingest", [&] { return load_corpus(cfg.corpus_path); });
  report.posts_loaded = corpus.posts.size();
  report.malformed_records = corpus.errors.size();
  report.record_errors = corpus.errors;
  const auto kept = filter_posts(corpus.posts, filters, &report.filter);

  Diagnostics diag;
  auto oracle = stage("infer", [&] { return make_oracle(cfg.oracle, diag); });
  InferStats stats;
  auto verdicts = infer_posts(kept, dict, *oracle, cfg.parallelism, cfg.question_template, &stats);
  report.paragraphs = stats.paragraphs;
  report.candidate_paragraphs = stats.candidates;
  for (const auto& v : verdicts) {
    (v.label == Label::compatible     ? report.verdicts_compatible
     : v.label == Label::incompatible ? report.verdicts_incompatible
                                      : report.verdicts_unknown) += 1;
  }
  if (!cfg.work_dir.empty()) {
    stage("ingest", [&] { write_file(cfg.work_dir + "/filtered_posts.jsonl", write_posts(kept)); return 0; });
    stage("infer", [&] { write_file(cfg.work_dir + "/verdicts.jsonl", write_verdicts(verdicts)); return 0; });
  }
  auto graph = stage("build", [&] { return build_graph(aggregate(std::move(verdicts), &report.aggregate)); });
  report.nodes = graph.nodes().size();
  report.links = graph.links().size();
  report.diagnostics = diag.entries();
  stage("build", [&] { save_graph(graph, cfg.graph_out); return 0; });
  if (!cfg.report_out.empty())
    stage("build", [&] { write_file(cfg.report_out, to_json(report).dump(2) + "\n"); return 0; });
  return report;
}

}  // namespace stackcompat
