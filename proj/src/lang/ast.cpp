#include "spacetime/lang/ast.hpp"

namespace spacetime::lang {

std::string_view op_text(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::FloorDiv: return "//";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::In: return "in";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

const FunctionDef* SourceUnit::find(std::string_view name) const {
  for (const auto& fn : functions)
    if (fn->name == name) return fn.get();
  return nullptr;
}

namespace {

bool same_expr(const Expr* a, const Expr* b, int da, int db) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind || a->line - da != b->line - db) return false;
  if (a->name != b->name) return false;
  if (a->kind == ExprKind::Literal && !deep_equal(a->literal, b->literal)) return false;
  if (a->kind == ExprKind::Binary && a->binary_op != b->binary_op) return false;
  if (a->kind == ExprKind::Unary && a->unary_op != b->unary_op) return false;
  if (a->children.size() != b->children.size()) return false;
  for (std::size_t i = 0; i < a->children.size(); ++i)
    if (!same_expr(a->children[i].get(), b->children[i].get(), da, db)) return false;
  return true;
}

bool same_block(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b, int da, int db);

bool same_stmt(const Stmt& a, const Stmt& b, int da, int db) {
  return a.kind == b.kind && a.line - da == b.line - db && a.loop_var == b.loop_var &&
         a.names == b.names && a.is_elif == b.is_elif &&
         same_expr(a.target.get(), b.target.get(), da, db) &&
         same_expr(a.expr.get(), b.expr.get(), da, db) && same_block(a.body, b.body, da, db) &&
         same_block(a.orelse, b.orelse, da, db);
}

bool same_block(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b, int da, int db) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_stmt(*a[i], *b[i], da, db)) return false;
  return true;
}

}  // namespace

bool same_structure(const FunctionDef& a, const FunctionDef& b) {
  return a.name == b.name && a.params == b.params &&
         same_block(a.body, b.body, a.def_line, b.def_line);
}

std::size_t count_statements(const std::vector<StmtPtr>& body) {
  std::size_t n = 0;
  for (const auto& s : body) n += 1 + count_statements(s->body) + count_statements(s->orelse);
  return n;
}

}  // namespace spacetime::lang
