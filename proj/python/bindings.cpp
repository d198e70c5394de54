#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scfg/estimation.hpp"
#include "scfg/grammar.hpp"
#include "scfg/parser.hpp"

namespace py = pybind11;
using namespace scfg;

namespace {

std::vector<std::string> as_tokens(const py::object& x) {
  if (py::isinstance<py::str>(x)) return tokenize(x.cast<std::string>());
  return x.cast<std::vector<std::string>>();
}

Corpus as_corpus(const py::iterable& xs) {
  Corpus c;
  for (auto x : xs) c.push_back(as_tokens(py::reinterpret_borrow<py::object>(x)));
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Probabilistic Earley parser for stochastic context-free grammars";

  py::register_exception<GrammarError>(m, "GrammarError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  py::class_<Grammar>(m, "Grammar")
      .def_static(
          "from_text",
          [](const std::string& text, bool strict, bool allow_unnormalized) {
            LoadOptions lo;
            lo.strict = strict;
            lo.allow_unnormalized = allow_unnormalized;
            return parse_grammar(text, lo);
          },
          py::arg("text"), py::arg("strict") = false, py::arg("allow_unnormalized") = false)
      .def_static(
          "load", [](const std::string& path) { return load_grammar_file(path); }, py::arg("path"))
      .def_property_readonly("start", [](const Grammar& g) { return g.nonterminal_name(g.start()); })
      .def_property_readonly("nonterminals",
                             [](const Grammar& g) {
                               std::vector<std::string> out;
                               for (int i = 0; i < g.nonterminal_count(); ++i)
                                 out.push_back(g.nonterminal_name(i));
                               return out;
                             })
      .def_property_readonly("terminals",
                             [](const Grammar& g) {
                               std::vector<std::string> out;
                               for (int i = 0; i < g.terminal_count(); ++i)
                                 out.push_back(g.terminal_name(i));
                               return out;
                             })
      .def_property_readonly("rules",
                             [](const Grammar& g) {
                               py::list out;
                               for (const auto& p : g.productions()) {
                                 std::vector<std::string> rhs;
                                 for (auto s : p.rhs) rhs.push_back(g.symbol_name(s));
                                 out.append(py::make_tuple(g.nonterminal_name(p.lhs), rhs, p.prob));
                               }
                               return out;
                             })
      .def("is_proper", [](const Grammar& g) { return validate(g).proper(); })
      .def("eliminate_null", [](const Grammar& g) { return eliminate_null(g); })
      .def("renormalize", [](const Grammar& g) { return renormalize(g); })
      .def("__str__", [](const Grammar& g) { return to_text(g); })
      .def("__len__", &Grammar::production_count);

  py::class_<PartialParse>(m, "PartialParse")
      .def_readonly("labels", &PartialParse::labels)
      .def_readonly("split_points", &PartialParse::split_points)
      .def_readonly("inner_prob", &PartialParse::inner_prob)
      .def_readonly("viterbi_prob", &PartialParse::viterbi_prob)
      .def_readonly("maximal", &PartialParse::maximal);

  py::class_<ParseResult>(m, "ParseResult")
      .def_readonly("accepted", &ParseResult::accepted)
      .def_readonly("sentence_prob", &ParseResult::sentence_prob)
      .def_readonly("prefix_probs", &ParseResult::prefix_probs)
      .def_readonly("approximate", &ParseResult::approximate)
      .def_readonly("viterbi_prob", &ParseResult::viterbi_prob)
      .def_property_readonly("viterbi_tree",
                             [](const ParseResult& r) -> std::optional<std::string> {
                               if (!r.viterbi_tree) return std::nullopt;
                               return r.viterbi_tree->to_string();
                             })
      .def_readonly("partial_parses", &ParseResult::partial_parses)
      .def_readonly("warnings", &ParseResult::warnings)
      .def("substring_prob",
           [](const ParseResult& r, const std::string& x, int k, int i) {
             return substring_probability(r, x, k, i);
           })
      .def("chart", [](const ParseResult& r) { return dump_chart(*r.grammar, r.chart); });

  py::class_<Parser>(m, "Parser")
      .def(py::init<Grammar>(), py::arg("grammar"))
      .def_property_readonly("grammar", &Parser::grammar)
      .def(
          "parse",
          [](const Parser& p, const py::object& x, bool filter, int prune) {
            ParseOptions o;
            o.filter = filter;
            if (prune > 0) {
              o.prune.mode = PruneOptions::Mode::Beam;
              o.prune.beam = prune;
            }
            return p.parse(as_tokens(x), o);
          },
          py::arg("sentence"), py::arg("filter") = true, py::arg("prune") = 0)
      .def(
          "parse_robust", [](const Parser& p, const py::object& x) { return p.parse_robust(as_tokens(x)); },
          py::arg("sentence"))
      .def(
          "next_word",
          [](const Parser& p, const py::object& x) { return p.next_word_distribution(as_tokens(x)); },
          py::arg("prefix"))
      .def(
          "expected_counts",
          [](const Parser& p, const py::object& x) { return expected_counts(p, as_tokens(x)).counts; },
          py::arg("sentence"));

  m.def(
      "em_step",
      [](const Grammar& g, const py::iterable& corpus) {
        auto r = em_step(g, as_corpus(corpus));
        return py::make_tuple(r.grammar, r.log_likelihood);
      },
      py::arg("grammar"), py::arg("corpus"));
  m.def(
      "train",
      [](const Grammar& g, const py::iterable& corpus, int max_iters, double tol) {
        TrainOptions o;
        o.max_iters = max_iters;
        o.tol = tol;
        auto r = train(g, as_corpus(corpus), o);
        return py::make_tuple(r.grammar, r.log_likelihoods);
      },
      py::arg("grammar"), py::arg("corpus"), py::arg("max_iters") = 100, py::arg("tol") = 1e-6);
  m.def("tokenize", &tokenize);
}
