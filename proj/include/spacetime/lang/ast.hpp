#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spacetime/lang/value.hpp"

namespace spacetime::lang {

enum class BinaryOp { Add, Sub, Mul, Div, FloorDiv, Mod, Eq, Ne, Lt, Le, Gt, Ge, In, And, Or };
enum class UnaryOp { Neg, Not };

std::string_view op_text(BinaryOp op);

enum class ExprKind { Literal, Name, ListLit, MapLit, Unary, Binary, Index, Field, Call };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  ExprKind kind = ExprKind::Literal;
  int line = 0;
  int column = 0;
  Value literal;       // Literal: primitives only
  std::string name;    // Name, Field (member name), Call (callee)
  BinaryOp binary_op = BinaryOp::Add;
  UnaryOp unary_op = UnaryOp::Neg;
  // Operands, list elements, call arguments. MapLit stores key, value pairs
  // flattened; Index stores [container, index]; Field stores [object].
  std::vector<ExprPtr> children;
};

enum class StmtKind { Assign, ExprStmt, If, While, For, Return, Global, Pass, Break, Continue };

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
  StmtKind kind = StmtKind::Pass;
  int line = 0;
  ExprPtr target;                   // Assign: Name, Index or Field expression
  ExprPtr expr;                     // value, condition, iterable or return value
  std::string loop_var;             // For
  std::vector<std::string> names;   // Global
  std::vector<StmtPtr> body;
  std::vector<StmtPtr> orelse;      // If: else branch; an elif is a lone If here
  bool is_elif = false;
};

enum class Granularity { Function, Line };

// Options from an `@monitor(...)` line directly above a `def`.
struct MonitorPragma {
  int line = 0;
  Granularity granularity = Granularity::Function;
  std::vector<std::string> track;
  std::vector<std::string> call_hooks;
  std::vector<std::string> return_hooks;
  std::vector<std::string> include;
  std::vector<std::string> exclude;
};

struct FunctionDef {
  std::string name;
  std::vector<std::string> params;
  std::vector<StmtPtr> body;
  std::optional<MonitorPragma> pragma;
  // Exact source lines from the `def` line through the last body statement,
  // LF-terminated. Line 1 of source_text is the `def` line.
  std::string source_text;
  int def_line = 0;   // absolute line of `def` in its unit
  int end_line = 0;   // absolute line of the last body statement

  int relative_line(int absolute) const { return absolute - def_line + 1; }
  int absolute_line(int relative) const { return relative + def_line - 1; }
};

struct SourceUnit {
  std::string path;
  std::string source;
  std::vector<std::shared_ptr<FunctionDef>> functions;
  std::vector<StmtPtr> top_level;

  const FunctionDef* find(std::string_view name) const;
};

// Structural equality of two definitions. Line numbers are compared relative
// to each definition's `def` line; pragmas and source_text are ignored.
bool same_structure(const FunctionDef& a, const FunctionDef& b);

// Number of statements in a body, nested blocks included.
std::size_t count_statements(const std::vector<StmtPtr>& body);

}  // namespace spacetime::lang
