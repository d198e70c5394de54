#include "scfg/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "scfg/closures.hpp"
#include "scfg/estimation.hpp"
#include "scfg/grammar.hpp"
#include "scfg/oracle.hpp"
#include "scfg/parser.hpp"

namespace scfg {

namespace {

using json = nlohmann::json;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string join(const std::vector<std::string>& xs, const std::string& sep = " ") {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + xs[i];
  return out;
}

struct Settings {
  std::string grammar_path;
  std::string input_path;
  std::vector<std::string> sentences;
  bool strict = false;
  bool eliminate = false;
  bool renormalize = false;
  bool no_filter = false;
  int prune = 0;
  double prune_rel = 0.0;
  bool maximal = false;
  int iterations = 100;
  double tol = 1e-6;
  bool verify = false;
  bool dump_chart = false;
  std::string format = "text";
  std::string output_path;
};

class Runner {
 public:
  Runner(const Settings& s, std::ostream& out, std::ostream& err) : s_(s), out_(out), err_(err) {}

  Grammar load() {
    LoadOptions lo;
    lo.strict = s_.strict;
    lo.allow_unnormalized = s_.renormalize;
    std::vector<std::string> warnings;
    Grammar g = load_grammar_file(s_.grammar_path, lo, &warnings);
    for (const auto& w : warnings) err_ << "warning: " << w << "\n";
    if (s_.renormalize) g = renormalize(g);
    if (s_.eliminate) g = eliminate_null(g);
    return g;
  }

  std::vector<std::vector<std::string>> sentences() const {
    std::vector<std::vector<std::string>> out;
    for (const auto& s : s_.sentences) out.push_back(tokenize(s));
    if (!s_.input_path.empty())
      for (auto& toks : load_corpus(s_.input_path)) out.push_back(std::move(toks));
    return out;
  }

  ParseOptions parse_options() const {
    ParseOptions o;
    o.filter = !s_.no_filter;
    if (s_.prune > 0) {
      o.prune.mode = PruneOptions::Mode::Beam;
      o.prune.beam = s_.prune;
    } else if (s_.prune_rel > 0.0) {
      o.prune.mode = PruneOptions::Mode::Relative;
      o.prune.relative = s_.prune_rel;
    }
    return o;
  }

  bool structured() const { return s_.format == "structured"; }

  int check() {
    Grammar g = load();
    auto d = validate(g);
    for (const auto& w : build_closure_tables(g).warnings) err_ << "warning: " << w << "\n";
    if (structured()) {
      json j;
      j["proper"] = d.proper();
      json improper = json::array();
      for (const auto& im : d.improper_lhs)
        improper.push_back({{"nonterminal", g.nonterminal_name(im.nonterminal)}, {"sum", im.sum}});
      j["improper"] = improper;
      json useless = json::array();
      for (int x : d.useless) useless.push_back(g.nonterminal_name(x));
      j["useless"] = useless;
      j["null_start"] = d.null_start;
      j["left_corner_radius"] = d.left_corner_radius;
      j["unit_radius"] = d.unit_radius;
      j["consistency_estimate"] = d.consistency_estimate;
      out_ << j.dump() << "\n";
    } else {
      out_ << "nonterminals: " << g.nonterminal_count() << "\n";
      out_ << "terminals: " << g.terminal_count() << "\n";
      out_ << "productions: " << g.production_count() << "\n";
      out_ << "proper: " << (d.proper() ? "yes" : "no") << "\n";
      for (const auto& im : d.improper_lhs)
        out_ << "improper: " << g.nonterminal_name(im.nonterminal) << " sums to " << num(im.sum)
             << "\n";
      for (int x : d.useless) out_ << "useless: " << g.nonterminal_name(x) << "\n";
      out_ << "null_start: " << (d.null_start ? "yes" : "no") << "\n";
      out_ << "left_corner_radius: " << num(d.left_corner_radius) << "\n";
      out_ << "unit_radius: " << num(d.unit_radius) << "\n";
      out_ << "consistency_estimate: " << num(d.consistency_estimate) << "\n";
    }
    if (s_.strict && !d.proper()) return kExitUsage;
    return kExitOk;
  }

  int tables() {
    Grammar g = load();
    out_ << dump_tables(g, build_closure_tables(g));
    return kExitOk;
  }

  // parse, viterbi and robust share the per-sentence loop.
  int parse(const std::string& mode) {
    Parser parser(load());
    const auto opts = parse_options();
    int status = kExitOk;
    std::optional<OracleResult> oracle;
    for (const auto& x : sentences()) {
      ParseResult r = mode == "robust" ? parser.parse_robust(x, opts) : parser.parse(x, opts);
      for (const auto& w : r.warnings) err_ << "warning: " << w << "\n";
      if (!r.accepted && mode != "robust") status = kExitRejected;
      std::optional<double> deviation;
      if (s_.verify && mode != "robust") deviation = verify(parser.grammar(), x, r, oracle);
      if (structured())
        out_ << to_json(x, r, mode, deviation).dump() << "\n";
      else
        print_text(x, r, mode, deviation);
      if (s_.dump_chart) out_ << dump_chart(*r.grammar, r.chart);
    }
    return status;
  }

  int prefix() {
    Parser parser(load());
    int status = kExitOk;
    auto inputs = sentences();
    if (inputs.empty()) inputs.push_back({});
    for (const auto& x : inputs) {
      std::map<std::string, double> dist;
      try {
        dist = parser.next_word_distribution(x);
      } catch (const ParseError& e) {
        err_ << "prefix '" << join(x) << "': " << e.what() << "\n";
        status = kExitRejected;
        continue;
      }
      if (structured()) {
        json j;
        j["prefix"] = x;
        j["distribution"] = dist;
        out_ << j.dump() << "\n";
      } else {
        out_ << "prefix: " << join(x) << "\n";
        for (const auto& [w, p] : dist) out_ << "  " << w << " " << num(p) << "\n";
      }
    }
    return status;
  }

  int train() {
    Grammar g = load();
    auto corpus = sentences();
    if (corpus.empty()) throw CLI::ValidationError("train needs sentences or --input");
    TrainOptions to;
    to.max_iters = s_.iterations;
    to.tol = s_.tol;
    to.strict = s_.strict;
    auto rep = scfg::train(g, corpus, to);
    for (const auto& w : rep.warnings) err_ << "warning: " << w << "\n";
    const std::string text = to_text(rep.grammar);
    if (structured()) {
      json j;
      j["iterations"] = rep.iterations;
      j["converged"] = rep.converged;
      j["log_likelihoods"] = rep.log_likelihoods;
      j["grammar"] = text;
      out_ << j.dump() << "\n";
    } else {
      for (size_t i = 0; i < rep.log_likelihoods.size(); ++i)
        out_ << "iteration " << i + 1 << ": log_likelihood " << num(rep.log_likelihoods[i]) << "\n";
      out_ << "converged: " << (rep.converged ? "yes" : "no") << "\n";
      if (s_.output_path.empty()) out_ << text;
    }
    if (!s_.output_path.empty()) {
      std::ofstream f(s_.output_path);
      if (!f) throw GrammarError("cannot write " + s_.output_path);
      f << text;
    }
    return kExitOk;
  }

 private:
  // Largest deviation from brute-force enumeration over sentence, prefix
  // and Viterbi probabilities.
  double verify(const Grammar& g, const std::vector<std::string>& x, const ParseResult& r,
                std::optional<OracleResult>& oracle) {
    std::vector<std::string> plain;
    for (const auto& t : x)
      if (t != kOpenBracket && t != kCloseBracket) plain.push_back(t);
    const bool bracketed = plain.size() != x.size();
    OracleConfig cfg;
    cfg.max_len = std::max<int>(static_cast<int>(plain.size()), oracle ? 0 : 1);
    if (!oracle || static_cast<int>(plain.size()) > oracle_len_) {
      oracle = enumerate(g, cfg);
      oracle_len_ = cfg.max_len;
    }
    double dev = 0.0;
    bound_ = 0.0;
    if (bracketed) {
      err_ << "warning: --verify ignores bracketed input\n";
      return dev;
    }
    dev = std::abs(r.sentence_prob - oracle_string_prob(g, *oracle, plain));
    bound_ = oracle_string_residual(g, *oracle, plain);
    for (size_t k = 0; k < r.prefix_probs.size(); ++k) {
      std::vector<std::string> pre(plain.begin(), plain.begin() + k + 1);
      dev = std::max(dev, std::abs(r.prefix_probs[k] - oracle_prefix_prob(g, *oracle, pre)));
      bound_ = std::max(bound_, oracle_prefix_residual(g, *oracle, pre));
    }
    if (r.viterbi_prob)
      if (auto v = oracle_viterbi(g, *oracle, plain))
        dev = std::max(dev, std::abs(*r.viterbi_prob - v->second));
    return dev;
  }

  json to_json(const std::vector<std::string>& x, const ParseResult& r, const std::string& mode,
               std::optional<double> deviation) const {
    json j;
    j["sentence"] = join(x);
    j["accepted"] = r.accepted;
    j["sentence_prob"] = r.sentence_prob;
    j["prefix_probs"] = r.prefix_probs;
    j["approximate"] = r.approximate;
    j["viterbi_prob"] = r.viterbi_prob ? json(*r.viterbi_prob) : json(nullptr);
    j["viterbi_tree"] = r.viterbi_tree ? json(r.viterbi_tree->to_string()) : json(nullptr);
    json parts = json::array();
    for (const auto& pp : r.partial_parses) {
      if (s_.maximal && !pp.maximal) continue;
      parts.push_back({{"labels", pp.labels},
                       {"split_points", pp.split_points},
                       {"inner_prob", pp.inner_prob},
                       {"viterbi_prob", pp.viterbi_prob},
                       {"maximal", pp.maximal}});
    }
    j["partial_parses"] = parts;
    if (mode != "robust") j.erase("partial_parses");
    if (deviation) {
      j["verify_max_deviation"] = *deviation;
      j["verify_bound"] = bound_;
    }
    return j;
  }

  void print_text(const std::vector<std::string>& x, const ParseResult& r, const std::string& mode,
                  std::optional<double> deviation) const {
    out_ << "sentence: " << join(x) << "\n";
    out_ << "accepted: " << (r.accepted ? "yes" : "no") << "\n";
    if (mode != "robust" || r.accepted) out_ << "sentence_prob: " << num(r.sentence_prob) << "\n";
    if (mode == "parse") {
      std::vector<std::string> ps;
      for (double p : r.prefix_probs) ps.push_back(num(p));
      out_ << "prefix_probs: " << join(ps) << "\n";
    }
    if (mode == "viterbi" && r.viterbi_prob) {
      out_ << "viterbi_prob: " << num(*r.viterbi_prob) << "\n";
      out_ << "tree: " << r.viterbi_tree->to_string() << "\n";
    }
    if (mode == "robust") {
      for (const auto& pp : r.partial_parses) {
        if (s_.maximal && !pp.maximal) continue;
        std::vector<std::string> splits;
        for (int k : pp.split_points) splits.push_back(std::to_string(k));
        out_ << "  " << join(pp.labels) << "  inner=" << num(pp.inner_prob)
             << " viterbi=" << num(pp.viterbi_prob) << " splits=" << join(splits, ",")
             << (pp.maximal ? " maximal" : "") << "\n";
      }
    }
    if (r.approximate) out_ << "approximate: yes\n";
    if (deviation) {
      out_ << "verify_max_deviation: " << num(*deviation) << "\n";
      out_ << "verify_bound: " << num(bound_) << "\n";
    }
  }

  const Settings& s_;
  std::ostream& out_;
  std::ostream& err_;
  int oracle_len_ = 0;
  double bound_ = 0.0;  // enumeration error bound of the last verify
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Probabilistic Earley parser for stochastic context-free grammars", "scfg"};
  app.require_subcommand(1);

  auto add_grammar = [&](CLI::App* sub) {
    sub->add_option("-g,--grammar", s.grammar_path, "Grammar file")->required();
    sub->add_flag("--strict", s.strict, "Treat improper grammars and bad sentences as errors");
    sub->add_flag("--renormalize", s.renormalize, "Normalize rule probabilities per LHS");
    sub->add_flag("--eliminate-null", s.eliminate, "Remove null productions before use");
  };
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("sentences", s.sentences, "Sentences (whitespace-separated tokens)");
    sub->add_option("--input", s.input_path, "File with one sentence per line");
    sub->add_option("--format", s.format, "Output format")
        ->check(CLI::IsMember({"text", "structured"}));
  };
  auto add_parse = [&](CLI::App* sub) {
    add_grammar(sub);
    add_input(sub);
    sub->add_flag("--no-filter", s.no_filter, "Disable bottom-up prediction filtering");
    auto* beam = sub->add_option("--prune", s.prune, "Keep at most N states per set")
                     ->check(CLI::PositiveNumber);
    auto* rel = sub->add_option("--prune-rel", s.prune_rel,
                                "Drop states with alpha below R times the set maximum")
                    ->check(CLI::Range(0.0, 1.0));
    beam->excludes(rel);
    sub->add_flag("--dump-chart", s.dump_chart, "Print the Earley chart");
  };

  auto* check = app.add_subcommand("check", "Grammar diagnostics");
  add_grammar(check);
  check->add_option("--format", s.format)->check(CLI::IsMember({"text", "structured"}));
  auto* tables = app.add_subcommand("tables", "Dump e, P_L, R_L, P_U, R_U");
  add_grammar(tables);
  auto* parse = app.add_subcommand("parse", "Sentence and prefix probabilities");
  add_parse(parse);
  parse->add_flag("--verify", s.verify, "Compare against brute-force enumeration");
  auto* viterbi = app.add_subcommand("viterbi", "Most probable parse");
  add_parse(viterbi);
  viterbi->add_flag("--verify", s.verify, "Compare against brute-force enumeration");
  auto* robust = app.add_subcommand("robust", "Partial parses of possibly ungrammatical input");
  add_parse(robust);
  robust->add_flag("--maximal", s.maximal, "Only list maximal partial parses");
  auto* prefix = app.add_subcommand("prefix", "Next-word distribution after a prefix");
  add_grammar(prefix);
  add_input(prefix);
  auto* train = app.add_subcommand("train", "Estimate rule probabilities by EM");
  add_grammar(train);
  add_input(train);
  train->add_option("--iterations", s.iterations, "Maximum EM iterations")
      ->check(CLI::PositiveNumber);
  train->add_option("--tol", s.tol, "Convergence tolerance")->check(CLI::NonNegativeNumber);
  train->add_option("-o,--output", s.output_path, "Write the trained grammar here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Runner runner(s, out, err);
  try {
    if (check->parsed()) return runner.check();
    if (tables->parsed()) return runner.tables();
    if (parse->parsed()) return runner.parse("parse");
    if (viterbi->parsed()) return runner.parse("viterbi");
    if (robust->parsed()) return runner.parse("robust");
    if (prefix->parsed()) return runner.prefix();
    if (train->parsed()) return runner.train();
  } catch (const GrammarError& e) {
    err << "grammar error: " << e.what() << "\n";
  } catch (const ClosureError& e) {
    err << "grammar error: " << e.what() << "\n";
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
  } catch (const EstimationError& e) {
    err << "estimation error: " << e.what() << "\n";
  } catch (const OracleError& e) {
    err << "verify error: " << e.what() << "\n";
  } catch (const CLI::Error& e) {
    err << e.what() << "\n";
  }
  return kExitUsage;
}

}  // namespace scfg
