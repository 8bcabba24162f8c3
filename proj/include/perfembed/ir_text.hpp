#pragma once

#include <stdexcept>
#include <string>

#include "perfembed/ir.hpp"

namespace perfembed::ir {

// Versioned textual nest format ("perfembed-ir v1"): sections `arrays`,
// `maps`, `body`, `memlets`. parse and serialize round-trip structurally.

struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(const std::string& msg, int line, int column);
};

struct SemanticError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LoopNest parse_loopnest(const std::string& text);
std::string serialize(const LoopNest& nest);

// Expression helpers reused by other text formats.
ExprPtr parse_expr_text(const std::string& text);

}  // namespace perfembed::ir
