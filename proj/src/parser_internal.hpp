#pragma once

#include <vector>

#include "scfg/parser.hpp"

namespace scfg::detail {

// Partial parses read off the wildcard states of the final set, with the
// maximal flag filled in.
std::vector<PartialParse> collect_partial_parses(const ParseResult& r, int final_set);

}  // namespace scfg::detail
