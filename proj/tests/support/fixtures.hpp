#pragma once

#include <cmath>
#include <string>

#include "scfg/grammar.hpp"

namespace scfg::testing {

// S -> a [p], S -> S S [1 - p]
inline Grammar binary_grammar(double p) {
  GrammarBuilder b;
  b.add("S", {"a"}, p);
  b.add("S", {"S", "S"}, 1.0 - p);
  b.set_start("S");
  return b.build();
}

inline Grammar unit_cycle_grammar(double p) {
  GrammarBuilder b;
  b.add("S", {"a"}, p);
  b.add("S", {"T"}, 1.0 - p);
  b.add("T", {"S"}, 1.0);
  b.set_start("S");
  return b.build();
}

inline const char* kTinyEnglish = R"(S -> NP VP [1]
NP -> Det N [1]
VP -> VT NP [0.5]
VP -> VI PP [0.5]
PP -> P NP [1]
Det -> a [1]
N -> circle [0.3333333333333333]
N -> square [0.3333333333333333]
N -> triangle [0.3333333333333334]
VT -> touches [1]
VI -> is [1]
P -> above [0.5]
P -> below [0.5]
)";

inline Grammar tiny_english() { return parse_grammar(kTinyEnglish); }

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace scfg::testing
