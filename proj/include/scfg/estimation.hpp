#pragma once

#include <string>
#include <vector>

#include "scfg/grammar.hpp"
#include "scfg/parser.hpp"

namespace scfg {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Outer probabilities, indexed like the chart: beta[set][state]. beta is the
// derivative of the sentence probability with respect to a state's inner
// probability; beta_nonunit the same for its non-unit part.
struct OuterAnnotations {
  std::vector<std::vector<double>> beta;
  std::vector<std::vector<double>> beta_nonunit;
  std::vector<double> rule_gradient;  // dP(x)/dP(r), by production id
  double sentence_prob = 0.0;
};

struct ExpectedCounts {
  std::vector<double> counts;  // by production id
  double log_likelihood = 0.0;
  int sentences = 0;
  int skipped = 0;
  std::vector<std::string> warnings;

  ExpectedCounts& operator+=(const ExpectedCounts& o);
};

// Requires a parse with record_derivations set that accepted its input.
OuterAnnotations backward_pass(const ParseResult& r);
ExpectedCounts expected_counts(const ParseResult& r, const OuterAnnotations& outer);
ExpectedCounts expected_counts(const Parser& p, std::span<const std::string> sentence);

using Corpus = std::vector<std::vector<std::string>>;

Corpus load_corpus(const std::string& path);
Corpus corpus_from_text(const std::string& text);

struct EstimationOptions {
  bool strict = false;  // unparseable sentences abort instead of being skipped
};

struct EmResult {
  Grammar grammar;
  double log_likelihood = 0.0;  // corpus log-likelihood under the input grammar
  ExpectedCounts counts;
  std::vector<std::string> warnings;
};

EmResult em_step(const Grammar& g, const Corpus& corpus, const EstimationOptions& options = {});

struct TrainOptions {
  int max_iters = 100;
  double tol = 1e-6;
  bool strict = false;
};

struct TrainingReport {
  Grammar grammar;
  std::vector<double> log_likelihoods;  // entry t: corpus LL before update t
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

TrainingReport train(const Grammar& g, const Corpus& corpus, const TrainOptions& options = {});

}  // namespace scfg
