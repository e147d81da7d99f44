#pragma once

#include <string>
#include <string_view>

#include "spacetime/lang/ast.hpp"

namespace spacetime::lang {

// Parses a Trk source file. Throws SyntaxError (with line and column) on
// malformed input, on more than one statement per line, and on duplicate
// function names.
SourceUnit parse(std::string_view source, std::string path = "<input>");

// Parses a single function definition (optionally preceded by a pragma line),
// as used for code overrides. Line numbers restart at 1.
std::shared_ptr<FunctionDef> parse_function(std::string_view source, std::string path = "<override>");

// Parses a guest literal: ints, floats, strings, true/false/nil, and lists or
// maps of literals. Heap values are allocated from `heap`.
Value parse_literal(std::string_view text, Heap& heap);

}  // namespace spacetime::lang
