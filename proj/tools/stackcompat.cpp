// Command-line front end: ingest -> infer -> build, plus query/check/eval/serve.

#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "stackcompat/stackcompat.hpp"

namespace sc = stackcompat;

namespace {

#ifndef STACKCOMPAT_DATA_DIR
#define STACKCOMPAT_DATA_DIR "data"
#endif

const std::string kDataDir = STACKCOMPAT_DATA_DIR;

std::string default_dict() { return kDataDir + "/dictionary.json"; }

void print_subgraph_table(const sc::QueryResult& r) {
  std::cout << "query    " << sc::to_string(r.query.kind) << ": " << r.query.raw << "\n"
            << "verdict  " << sc::to_string(r.summary.verdict);
  if (r.summary.confidence)
    std::cout << " (confidence " << std::fixed << std::setprecision(3) << r.summary.confidence->to_double() << ", "
              << r.summary.n_compatible << " compatible / " << r.summary.n_incompatible << " incompatible posts)";
  std::cout << "\n" << r.summary.message << "\n\n";
  if (r.subgraph.links.empty()) return;
  std::cout << std::left << std::setw(28) << "A" << std::setw(28) << "B" << std::setw(14) << "label" << std::right
            << std::setw(11) << "confidence" << std::setw(7) << "posts" << "\n";
  for (const auto& l : r.subgraph.links) {
    std::cout << std::left << std::setw(28) << l.a.key() << std::setw(28) << l.b.key() << std::setw(14)
              << sc::to_string(l.label()) << std::right << std::setw(11) << std::fixed << std::setprecision(3)
              << l.confidence().to_double() << std::setw(7) << l.evidence.size() << "\n";
  }
}

std::string fmt_opt(const std::optional<sc::Rational>& r) {
  if (!r) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << r->to_double();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Version-compatibility knowledge graph for deep-learning stacks"};
  app.require_subcommand(1);
  std::string format = "table";
  std::size_t parallelism = 1;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a corpus and keep compatibility-related posts");
  std::string corpus_path, filters_path, posts_out;
  ingest->add_option("--corpus", corpus_path, "Corpus file (one JSON record per line)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--filters", filters_path, "Filter config (dl_tags, cue_patterns)")
      ->envname("STACKCOMPAT_FILTERS")->required();
  ingest->add_option("--out", posts_out, "Write kept posts here (JSON lines)");

  // infer
  auto* infer = app.add_subcommand("infer", "Recognize components and infer verdicts for filtered posts");
  std::string posts_in, verdicts_out, dict_path = default_dict(), question_template(sc::kDefaultQuestionTemplate);
  sc::OracleSettings oracle;
  infer->add_option("--posts", posts_in, "Filtered posts (JSON lines)")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", verdicts_out, "Verdicts output (JSON lines)")->required();
  for (auto* cmd : {infer}) {
    cmd->add_option("--dict", dict_path, "Component dictionary")->envname("STACKCOMPAT_DICT");
  }

  // build
  auto* build = app.add_subcommand("build", "Aggregate verdicts into a knowledge graph file");
  std::string verdicts_in, graph_out;
  build->add_option("--verdicts", verdicts_in, "Verdicts (JSON lines)")->required()->check(CLI::ExistingFile);
  build->add_option("--out", graph_out, "Graph file to write")->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run ingest, infer and build in one go");
  sc::PipelineConfig pcfg;
  pipeline->add_option("--corpus", pcfg.corpus_path, "Corpus file")->envname("STACKCOMPAT_CORPUS")->required();
  pipeline->add_option("--filters", pcfg.filters_path, "Filter config")->envname("STACKCOMPAT_FILTERS")->required();
  pipeline->add_option("--dict", pcfg.dict_path, "Component dictionary")->envname("STACKCOMPAT_DICT");
  pipeline->add_option("--out", pcfg.graph_out, "Graph file to write")->required();
  pipeline->add_option("--report", pcfg.report_out, "Write the run report (JSON) here");
  pipeline->add_option("--work-dir", pcfg.work_dir, "Directory for intermediate files");

  for (auto* cmd : {infer, pipeline}) {
    cmd->add_option("--oracle", oracle.kind, "heuristic or remote")
        ->envname("STACKCOMPAT_ORACLE_KIND")->check(CLI::IsMember({"heuristic", "remote"}));
    cmd->add_option("--endpoint", oracle.endpoint, "Remote QA service URL")->envname("STACKCOMPAT_ORACLE_ENDPOINT");
    cmd->add_option("--timeout-ms", oracle.timeout_ms, "Remote oracle timeout")->envname("STACKCOMPAT_ORACLE_TIMEOUT_MS");
    cmd->add_option("--max-in-flight", oracle.max_in_flight, "Concurrent remote requests")
        ->envname("STACKCOMPAT_ORACLE_MAX_IN_FLIGHT")->check(CLI::Range(1, 64));
    cmd->add_option("--question-template", question_template, "Question template ({A} {va} {B} {vb})")
        ->envname("STACKCOMPAT_QUESTION_TEMPLATE");
    cmd->add_option("--parallelism", parallelism, "Worker threads")
        ->envname("STACKCOMPAT_PARALLELISM")->check(CLI::PositiveNumber);
  }

  // query
  auto* query = app.add_subcommand("query", "Ask the graph a search-bar query");
  std::string graph_path, query_text, subgraph_out;
  query->add_option("--graph", graph_path, "Graph file")->envname("STACKCOMPAT_GRAPH")->required();
  query->add_option("--dict", dict_path, "Component dictionary")->envname("STACKCOMPAT_DICT");
  query->add_option("--subgraph-out", subgraph_out, "Also write the result (JSON) here");
  query->add_option("text", query_text, "Query text")->required();

  // check
  auto* check = app.add_subcommand("check", "Check a pinned environment against the graph");
  std::string env_path;
  bool report_unknown = false;
  check->add_option("--graph", graph_path, "Graph file")->envname("STACKCOMPAT_GRAPH")->required();
  check->add_option("--env", env_path, "Environment file")->required()->check(CLI::ExistingFile);
  check->add_option("--dict", dict_path, "Component dictionary")->envname("STACKCOMPAT_DICT");
  check->add_flag("--report-unknown", report_unknown, "List pairs the graph knows nothing about");

  // eval
  auto* eval = app.add_subcommand("eval", "Precision/recall/F1 of reported issues against ground truth");
  std::string pred_path, truth_path;
  eval->add_option("--pred", pred_path, "Reported pairs")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", truth_path, "Ground-truth pairs")->required()->check(CLI::ExistingFile);

  for (auto* cmd : {query, check, eval})
    cmd->add_option("--format", format, "table or machine")->check(CLI::IsMember({"table", "machine"}));

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the graph over HTTP");
  sc::ServiceConfig scfg;
  scfg.dict_path = default_dict();
  serve->add_option("--graph", scfg.graph_path, "Graph file")->envname("STACKCOMPAT_GRAPH")->required();
  serve->add_option("--stats", scfg.stats_path, "Component stats file")->envname("STACKCOMPAT_STATS");
  serve->add_option("--dict", scfg.dict_path, "Component dictionary")->envname("STACKCOMPAT_DICT");
  serve->add_option("--posts", scfg.posts_path, "Corpus file supplying post titles")->envname("STACKCOMPAT_POSTS");
  serve->add_option("--host", scfg.host, "Bind address")->envname("STACKCOMPAT_HOST");
  serve->add_option("--port", scfg.port, "Port")->envname("STACKCOMPAT_PORT");
  serve->add_option("--cors-origin", scfg.cors_origin, "Allowed CORS origin")->envname("STACKCOMPAT_CORS_ORIGIN");
  serve->add_option("--url-template", scfg.url_template, "Post URL template with {id}")
      ->envname("STACKCOMPAT_URL_TEMPLATE");
  serve->add_option("--static", scfg.static_dir, "Directory with UI assets served at /");

  // recognize
  auto* recognize = app.add_subcommand("recognize", "Show mentions and bindings for a text (debugging)");
  std::string text;
  recognize->add_option("--dict", dict_path, "Component dictionary")->envname("STACKCOMPAT_DICT");
  recognize->add_option("--text", text, "Paragraph text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(sc::ErrorKind::usage);
  }

  try {
    if (*ingest) {
      const auto filters = sc::FilterConfig::load(filters_path);
      const auto corpus = sc::load_corpus(corpus_path);
      for (const auto& e : corpus.errors) std::cerr << corpus_path << ":" << e.line << ": " << e.message << "\n";
      sc::FilterReport r;
      const auto kept = sc::filter_posts(corpus.posts, filters, &r);
      if (!posts_out.empty()) sc::write_file(posts_out, sc::write_posts(kept));
      std::cout << "posts loaded " << corpus.posts.size() << " (" << corpus.errors.size() << " malformed)\n"
                << "after tag filter " << r.tagged << "\nafter cue filter " << r.with_cues
                << "\nafter accepted filter " << r.kept << "\n";
    } else if (*infer) {
      const auto dict = sc::Dictionary::load(dict_path);
      const auto posts = sc::load_corpus(posts_in);
      for (const auto& e : posts.errors) std::cerr << posts_in << ":" << e.line << ": " << e.message << "\n";
      sc::Diagnostics diag;
      auto o = sc::make_oracle(oracle, diag);
      sc::InferStats stats;
      const auto verdicts = sc::infer_posts(posts.posts, dict, *o, parallelism, question_template, &stats);
      for (const auto& d : diag.entries()) std::cerr << d << "\n";
      sc::write_file(verdicts_out, sc::write_verdicts(verdicts));
      std::cout << "candidate paragraphs " << stats.candidates << " of " << stats.paragraphs << "\nverdicts "
                << verdicts.size() << "\n";
    } else if (*build) {
      const auto verdicts = sc::parse_verdicts(sc::read_file(verdicts_in));
      sc::AggregateReport r;
      const auto g = sc::build_graph(sc::aggregate(verdicts, &r));
      sc::save_graph(g, graph_out);
      std::cout << "relations " << r.pairs << " before discard, " << r.neutral_discarded << " neutral discarded, "
                << r.kept << " kept\ngraph " << g.nodes().size() << " nodes, " << g.links().size() << " links\n";
    } else if (*pipeline) {
      if (pcfg.dict_path.empty()) pcfg.dict_path = default_dict();
      pcfg.oracle = oracle;
      pcfg.parallelism = parallelism;
      pcfg.question_template = question_template;
      const auto report = sc::run_pipeline(pcfg);
      for (const auto& e : report.record_errors) std::cerr << pcfg.corpus_path << ":" << e.line << ": " << e.message << "\n";
      for (const auto& d : report.diagnostics) std::cerr << d << "\n";
      std::cout << sc::format_report(report);
    } else if (*query) {
      const auto dict = sc::Dictionary::load(dict_path);
      const auto g = sc::load_graph(graph_path);
      const auto result = sc::resolve(g, sc::parse_query(query_text, dict));
      const auto j = sc::to_json(result);
      if (!subgraph_out.empty()) sc::write_file(subgraph_out, j.dump(2) + "\n");
      if (format == "machine") {
        std::cout << j.dump(2) << "\n";
      } else {
        print_subgraph_table(result);
      }
    } else if (*check) {
      const auto dict = sc::Dictionary::load(dict_path);
      const auto g = sc::load_graph(graph_path);
      const auto env = sc::parse_environment(env_path, dict);
      for (const auto& d : env.diagnostics) std::cerr << d << "\n";
      const auto result = sc::check_environment(g, env);
      if (format == "machine") {
        std::cout << sc::to_json(result, report_unknown).dump(2) << "\n";
      } else {
        std::cout << result.issues.size() << " issue(s) in " << env.entries.size() << " entries\n";
        for (const auto& i : result.issues) {
          std::cout << "  " << i.a.key() << " x " << i.b.key() << "  confidence " << std::fixed << std::setprecision(3)
                    << i.confidence.to_double() << "  posts";
          for (const auto& e : i.evidence) std::cout << " " << e.post_id;
          std::cout << "\n";
        }
        if (report_unknown) {
          std::cout << result.unknown_pairs.size() << " unchecked pair(s)\n";
          for (const auto& [a, b] : result.unknown_pairs) std::cout << "  " << a.key() << " x " << b.key() << "\n";
        }
      }
    } else if (*eval) {
      auto load = [](const std::string& path) {
        auto j = nlohmann::json::parse(sc::read_file(path), nullptr, false);
        if (j.is_discarded()) throw sc::data_error(path + " is not valid JSON");
        return sc::read_pair_set(j);
      };
      const auto m = sc::evaluate_metrics(load(pred_path), load(truth_path));
      if (format == "machine") {
        std::cout << sc::to_json(m).dump(2) << "\n";
      } else {
        std::cout << "TP " << m.true_positives << "  FP " << m.false_positives << "  FN " << m.false_negatives
                  << "\nprecision " << fmt_opt(m.precision) << "\nrecall    " << fmt_opt(m.recall)
                  << "\nf1        " << fmt_opt(m.f1) << "\n";
      }
    } else if (*serve) {
      std::cerr << "serving on " << scfg.host << ":" << scfg.port << "\n";
      sc::serve(scfg);
    } else if (*recognize) {
      const auto dict = sc::Dictionary::load(dict_path);
      const auto mentions = sc::recognize(text, dict);
      for (const auto& m : mentions) {
        std::cout << (m.kind == sc::MentionKind::component ? "component " : "version   ") << std::setw(4) << m.start
                  << "-" << std::left << std::setw(4) << m.end << std::right << " s" << m.sentence_index << " t"
                  << m.token_index << "  '" << m.text << "'";
        if (m.component_id) std::cout << " -> " << *m.component_id;
        if (m.version) std::cout << " v" << m.version->normalized();
        if (m.joint) std::cout << " (joint)";
        std::cout << "\n";
      }
      for (const auto& b : sc::bind_versions(mentions)) std::cout << "bound     " << b.component.key() << "\n";
    }
  } catch (const sc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(sc::ErrorKind::data);
  }
  return 0;
}
