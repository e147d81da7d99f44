#include "spacetime/lang/parser.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <set>

#include "spacetime/lang/errors.hpp"

namespace spacetime::lang {

namespace {

enum class Tok { Ident, Keyword, Int, Float, String, Op, End };

struct Token {
  Tok type = Tok::End;
  std::string text;
  int column = 0;
  std::int64_t int_value = 0;
  double float_value = 0;
};

struct Line {
  int number = 0;
  int indent = 0;
  std::vector<Token> tokens;
};

const std::set<std::string, std::less<>> kKeywords = {
    "def", "if", "elif", "else", "while", "for", "in", "return", "global", "pass",
    "break", "continue", "and", "or", "not", "true", "false", "nil"};

class Lexer {
 public:
  Lexer(std::string_view source, const std::string& path) : source_(source), path_(path) {}

  std::vector<Line> lines() {
    std::vector<Line> out;
    std::size_t start = 0;
    int number = 0;
    while (start <= source_.size()) {
      std::size_t end = source_.find('\n', start);
      if (end == std::string_view::npos) end = source_.size();
      ++number;
      std::string_view text = source_.substr(start, end - start);
      Line line = lex_line(text, number);
      if (!line.tokens.empty()) out.push_back(std::move(line));
      if (end == source_.size()) break;
      start = end + 1;
    }
    return out;
  }

 private:
  [[noreturn]] void fail(int line, int column, const std::string& message) const {
    throw SyntaxError(path_, line, column, message);
  }

  Line lex_line(std::string_view text, int number) {
    Line line;
    line.number = number;
    std::size_t i = 0;
    while (i < text.size() && text[i] == ' ') ++i;
    if (i < text.size() && text[i] == '\t') fail(number, static_cast<int>(i) + 1, "tab in indentation");
    line.indent = static_cast<int>(i);
    while (i < text.size()) {
      char c = text[i];
      int column = static_cast<int>(i) + 1;
      if (c == ' ' || c == '\t') {
        ++i;
      } else if (c == '#') {
        break;
      } else if (c == '\r') {
        fail(number, column, "carriage return in source (LF line endings required)");
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
        Token t;
        t.text = std::string(text.substr(i, j - i));
        t.type = kKeywords.count(t.text) ? Tok::Keyword : Tok::Ident;
        t.column = column;
        line.tokens.push_back(std::move(t));
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        i = lex_number(text, i, number, line);
      } else if (c == '"' || c == '\'') {
        i = lex_string(text, i, number, line);
      } else {
        static const char* two[] = {"==", "!=", "<=", ">=", "//"};
        Token t;
        t.type = Tok::Op;
        t.column = column;
        for (const char* op : two) {
          if (text.substr(i, 2) == op) t.text = op;
        }
        if (t.text.empty()) {
          if (std::string_view("+-*/%<>=()[]{},:.@").find(c) == std::string_view::npos)
            fail(number, column, std::string("unexpected character '") + c + "'");
          t.text = std::string(1, c);
        }
        i += t.text.size();
        line.tokens.push_back(std::move(t));
      }
    }
    return line;
  }

  std::size_t lex_number(std::string_view text, std::size_t i, int number, Line& line) {
    std::size_t j = i;
    bool is_float = false;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j + 1 < text.size() && text[j] == '.' && std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
      is_float = true;
      ++j;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    }
    if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
      std::size_t k = j + 1;
      if (k < text.size() && (text[k] == '+' || text[k] == '-')) ++k;
      if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
        is_float = true;
        j = k;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
    }
    Token t;
    t.text = std::string(text.substr(i, j - i));
    t.column = static_cast<int>(i) + 1;
    if (is_float) {
      t.type = Tok::Float;
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.float_value);
      if (res.ec != std::errc()) fail(number, t.column, "bad float literal '" + t.text + "'");
    } else {
      t.type = Tok::Int;
      auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.int_value);
      if (res.ec != std::errc()) fail(number, t.column, "integer literal out of range '" + t.text + "'");
    }
    line.tokens.push_back(std::move(t));
    return j;
  }

  std::size_t lex_string(std::string_view text, std::size_t i, int number, Line& line) {
    char quote = text[i];
    Token t;
    t.type = Tok::String;
    t.column = static_cast<int>(i) + 1;
    std::size_t j = i + 1;
    for (;;) {
      if (j >= text.size()) fail(number, t.column, "unterminated string literal");
      char c = text[j];
      if (c == quote) break;
      if (c == '\\') {
        if (j + 1 >= text.size()) fail(number, static_cast<int>(j) + 1, "bad escape");
        char e = text[j + 1];
        switch (e) {
          case 'n': t.text += '\n'; break;
          case 't': t.text += '\t'; break;
          case 'r': t.text += '\r'; break;
          case '\\': t.text += '\\'; break;
          case '"': t.text += '"'; break;
          case '\'': t.text += '\''; break;
          case 'x': {
            if (j + 3 >= text.size()) fail(number, static_cast<int>(j) + 1, "bad \\x escape");
            int v = 0;
            auto res = std::from_chars(text.data() + j + 2, text.data() + j + 4, v, 16);
            if (res.ptr != text.data() + j + 4) fail(number, static_cast<int>(j) + 1, "bad \\x escape");
            t.text += static_cast<char>(v);
            j += 2;
            break;
          }
          default: fail(number, static_cast<int>(j) + 1, std::string("unknown escape '\\") + e + "'");
        }
        j += 2;
      } else {
        t.text += c;
        ++j;
      }
    }
    line.tokens.push_back(std::move(t));
    return j + 1;
  }

  std::string_view source_;
  const std::string& path_;
};

class Parser {
 public:
  Parser(std::string_view source, std::string path) : source_(source), path_(std::move(path)) {
    lines_ = Lexer(source_, path_).lines();
    std::size_t start = 0;
    while (start <= source_.size()) {
      std::size_t end = source_.find('\n', start);
      if (end == std::string_view::npos) end = source_.size();
      raw_lines_.push_back(source_.substr(start, end - start));
      if (end == source_.size()) break;
      start = end + 1;
    }
  }

  SourceUnit parse_unit() {
    SourceUnit unit;
    unit.path = path_;
    unit.source = std::string(source_);
    std::set<std::string> names;
    std::optional<MonitorPragma> pending;
    int pending_line = 0;
    pos_ = 0;
    while (pos_ < lines_.size()) {
      const Line& line = lines_[pos_];
      if (line.indent != 0) fail(line.number, 1, "unexpected indent");
      if (is_op(line.tokens[0], "@")) {
        if (pending) fail(line.number, 1, "two monitor pragmas for one function");
        pending = parse_pragma(line);
        pending_line = line.number;
        ++pos_;
        continue;
      }
      if (is_kw(line.tokens[0], "def")) {
        auto fn = parse_def(0);
        if (!names.insert(fn->name).second)
          fail(fn->def_line, 1, "duplicate function name '" + fn->name + "'");
        fn->pragma = std::move(pending);
        pending.reset();
        unit.functions.push_back(std::move(fn));
        continue;
      }
      if (pending) fail(pending_line, 1, "monitor pragma must precede a function definition");
      unit.top_level.push_back(parse_statement(0));
    }
    if (pending) fail(pending_line, 1, "monitor pragma must precede a function definition");
    return unit;
  }

  std::shared_ptr<FunctionDef> parse_single_function() {
    SourceUnit unit = parse_unit();
    if (unit.functions.size() != 1 || !unit.top_level.empty())
      fail(1, 1, "expected exactly one function definition");
    return unit.functions.front();
  }

  Value parse_literal_value(Heap& heap) {
    if (lines_.size() != 1) fail(1, 1, "expected a single-line literal");
    cur_ = &lines_[0];
    tok_ = 0;
    ExprPtr e = parse_expr();
    expect_end("literal");
    return constant(*e, heap);
  }

 private:
  [[noreturn]] void fail(int line, int column, const std::string& message) const {
    throw SyntaxError(path_, line, column, message);
  }

  static bool is_op(const Token& t, std::string_view op) { return t.type == Tok::Op && t.text == op; }
  static bool is_kw(const Token& t, std::string_view kw) { return t.type == Tok::Keyword && t.text == kw; }

  const Token& peek() const {
    static const Token end{};
    return tok_ < cur_->tokens.size() ? cur_->tokens[tok_] : end;
  }
  int column() const {
    if (tok_ < cur_->tokens.size()) return cur_->tokens[tok_].column;
    if (cur_->tokens.empty()) return 1;
    const Token& last = cur_->tokens.back();
    return last.column + static_cast<int>(last.text.size());
  }
  bool at_end() const { return tok_ >= cur_->tokens.size(); }
  bool accept_op(std::string_view op) {
    if (!at_end() && is_op(peek(), op)) {
      ++tok_;
      return true;
    }
    return false;
  }
  bool accept_kw(std::string_view kw) {
    if (!at_end() && is_kw(peek(), kw)) {
      ++tok_;
      return true;
    }
    return false;
  }
  void expect_op(std::string_view op) {
    if (!accept_op(op)) fail(cur_->number, column(), "expected '" + std::string(op) + "'" + found());
  }
  std::string expect_ident(const char* what) {
    if (at_end() || peek().type != Tok::Ident)
      fail(cur_->number, column(), std::string("expected ") + what + found());
    return cur_->tokens[tok_++].text;
  }
  std::string found() const {
    if (at_end()) return " at end of line";
    return " but found '" + peek().text + "'";
  }
  void expect_end(const char* what) {
    if (!at_end())
      fail(cur_->number, column(),
           std::string("unexpected '") + peek().text + "' after " + what +
               " (one statement per line)");
  }
  void expect_block_colon() {
    expect_op(":");
    if (!at_end())
      fail(cur_->number, column(), "statement after ':' must start on its own line (one statement per line)");
  }

  MonitorPragma parse_pragma(const Line& line) {
    cur_ = &line;
    tok_ = 1;
    MonitorPragma p;
    p.line = line.number;
    std::string name = expect_ident("'monitor' after '@'");
    if (name != "monitor") fail(line.number, cur_->tokens[1].column, "unknown pragma '@" + name + "'");
    std::set<std::string> seen;
    if (accept_op("(")) {
      if (!accept_op(")")) {
        do {
          int col = column();
          std::string key = expect_ident("pragma option name");
          if (!seen.insert(key).second) fail(line.number, col, "repeated pragma option '" + key + "'");
          expect_op("=");
          std::vector<std::string> values = parse_pragma_value();
          if (key == "granularity") {
            if (values.size() != 1 || (values[0] != "function" && values[0] != "line"))
              fail(line.number, col, "granularity must be \"function\" or \"line\"");
            p.granularity = values[0] == "line" ? Granularity::Line : Granularity::Function;
          } else if (key == "track") {
            p.track = std::move(values);
          } else if (key == "return_hook" || key == "return_hooks") {
            p.return_hooks = std::move(values);
          } else if (key == "call_hook" || key == "call_hooks") {
            p.call_hooks = std::move(values);
          } else if (key == "include") {
            p.include = std::move(values);
          } else if (key == "exclude") {
            p.exclude = std::move(values);
          } else {
            fail(line.number, col, "unknown pragma option '" + key + "'");
          }
        } while (accept_op(","));
        expect_op(")");
      }
    }
    expect_end("pragma");
    for (const auto& name_in : p.include)
      for (const auto& name_ex : p.exclude)
        if (name_in == name_ex)
          fail(line.number, 1, "variable '" + name_in + "' is both included and excluded");
    return p;
  }

  std::vector<std::string> parse_pragma_value() {
    std::vector<std::string> out;
    auto one = [&] {
      if (at_end() || (peek().type != Tok::String && peek().type != Tok::Ident))
        fail(cur_->number, column(), "expected a name or string in pragma" + found());
      out.push_back(cur_->tokens[tok_++].text);
    };
    if (accept_op("[")) {
      if (!accept_op("]")) {
        do {
          one();
        } while (accept_op(","));
        expect_op("]");
      }
    } else {
      one();
    }
    return out;
  }

  std::shared_ptr<FunctionDef> parse_def(int indent) {
    const Line& line = lines_[pos_];
    cur_ = &line;
    tok_ = 1;
    auto fn = std::make_shared<FunctionDef>();
    fn->def_line = line.number;
    fn->name = expect_ident("function name");
    expect_op("(");
    std::set<std::string> params;
    if (!accept_op(")")) {
      do {
        int col = column();
        std::string p = expect_ident("parameter name");
        if (!params.insert(p).second) fail(line.number, col, "duplicate parameter '" + p + "'");
        fn->params.push_back(std::move(p));
      } while (accept_op(","));
      expect_op(")");
    }
    expect_block_colon();
    ++pos_;
    fn->body = parse_body(indent, line.number);
    fn->end_line = last_line(fn->body);
    for (int l = fn->def_line; l <= fn->end_line; ++l) {
      fn->source_text += raw_lines_[static_cast<std::size_t>(l - 1)];
      fn->source_text += '\n';
    }
    return fn;
  }

  static int last_line(const std::vector<StmtPtr>& body) {
    int last = 0;
    for (const auto& s : body) {
      last = std::max(last, s->line);
      last = std::max(last, last_line(s->body));
      last = std::max(last, last_line(s->orelse));
    }
    return last;
  }

  // Parses the indented block following a header at `indent`.
  std::vector<StmtPtr> parse_body(int indent, int header_line) {
    if (pos_ >= lines_.size() || lines_[pos_].indent <= indent)
      fail(header_line, 1, "expected an indented block");
    int block_indent = lines_[pos_].indent;
    std::vector<StmtPtr> body;
    while (pos_ < lines_.size()) {
      const Line& line = lines_[pos_];
      if (line.indent > block_indent) fail(line.number, 1, "unexpected indent");
      if (line.indent < block_indent) {
        if (line.indent > indent) fail(line.number, 1, "dedent does not match any outer block");
        break;
      }
      body.push_back(parse_statement(block_indent));
    }
    return body;
  }

  StmtPtr parse_statement(int indent) {
    const Line& line = lines_[pos_];
    cur_ = &line;
    tok_ = 0;
    auto stmt = std::make_unique<Stmt>();
    stmt->line = line.number;
    const Token& first = line.tokens[0];
    if (is_kw(first, "def")) fail(line.number, first.column, "nested function definitions are not supported");
    if (is_op(first, "@")) fail(line.number, first.column, "monitor pragma must be at top level");
    if (is_kw(first, "elif") || is_kw(first, "else"))
      fail(line.number, first.column, "'" + first.text + "' without matching 'if'");

    if (accept_kw("if")) {
      stmt->kind = StmtKind::If;
      stmt->expr = parse_expr();
      expect_block_colon();
      ++pos_;
      stmt->body = parse_body(indent, line.number);
      parse_else_chain(*stmt, indent);
      return stmt;
    }
    if (accept_kw("while")) {
      stmt->kind = StmtKind::While;
      stmt->expr = parse_expr();
      expect_block_colon();
      ++pos_;
      stmt->body = parse_body(indent, line.number);
      return stmt;
    }
    if (accept_kw("for")) {
      stmt->kind = StmtKind::For;
      stmt->loop_var = expect_ident("loop variable");
      if (!accept_kw("in")) fail(line.number, column(), "expected 'in'" + found());
      stmt->expr = parse_expr();
      expect_block_colon();
      ++pos_;
      stmt->body = parse_body(indent, line.number);
      return stmt;
    }
    if (accept_kw("return")) {
      stmt->kind = StmtKind::Return;
      if (!at_end()) stmt->expr = parse_expr();
    } else if (accept_kw("global")) {
      stmt->kind = StmtKind::Global;
      do {
        stmt->names.push_back(expect_ident("global name"));
      } while (accept_op(","));
    } else if (accept_kw("pass")) {
      stmt->kind = StmtKind::Pass;
    } else if (accept_kw("break")) {
      stmt->kind = StmtKind::Break;
    } else if (accept_kw("continue")) {
      stmt->kind = StmtKind::Continue;
    } else {
      ExprPtr e = parse_expr();
      if (accept_op("=")) {
        if (e->kind != ExprKind::Name && e->kind != ExprKind::Index && e->kind != ExprKind::Field)
          fail(line.number, e->column, "invalid assignment target");
        stmt->kind = StmtKind::Assign;
        stmt->target = std::move(e);
        stmt->expr = parse_expr();
      } else {
        stmt->kind = StmtKind::ExprStmt;
        stmt->expr = std::move(e);
      }
    }
    expect_end("statement");
    ++pos_;
    return stmt;
  }

  void parse_else_chain(Stmt& if_stmt, int indent) {
    if (pos_ >= lines_.size() || lines_[pos_].indent != indent) return;
    const Line& line = lines_[pos_];
    cur_ = &line;
    tok_ = 0;
    if (accept_kw("elif")) {
      auto elif = std::make_unique<Stmt>();
      elif->kind = StmtKind::If;
      elif->is_elif = true;
      elif->line = line.number;
      elif->expr = parse_expr();
      expect_block_colon();
      ++pos_;
      elif->body = parse_body(indent, line.number);
      parse_else_chain(*elif, indent);
      if_stmt.orelse.push_back(std::move(elif));
    } else if (accept_kw("else")) {
      expect_block_colon();
      ++pos_;
      if_stmt.orelse = parse_body(indent, line.number);
    }
  }

  ExprPtr make(ExprKind kind, int column) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->line = cur_->number;
    e->column = column;
    return e;
  }

  ExprPtr binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, int column) {
    auto e = make(ExprKind::Binary, column);
    e->binary_op = op;
    e->children.push_back(std::move(lhs));
    e->children.push_back(std::move(rhs));
    return e;
  }

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    for (;;) {
      int col = column();
      if (!accept_kw("or")) return lhs;
      lhs = binary(BinaryOp::Or, std::move(lhs), parse_and(), col);
    }
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_not();
    for (;;) {
      int col = column();
      if (!accept_kw("and")) return lhs;
      lhs = binary(BinaryOp::And, std::move(lhs), parse_not(), col);
    }
  }

  ExprPtr parse_not() {
    int col = column();
    if (accept_kw("not")) {
      auto e = make(ExprKind::Unary, col);
      e->unary_op = UnaryOp::Not;
      e->children.push_back(parse_not());
      return e;
    }
    return parse_comparison();
  }

  std::optional<BinaryOp> comparison_op() {
    if (at_end()) return std::nullopt;
    const Token& t = peek();
    if (is_kw(t, "in")) return BinaryOp::In;
    if (t.type != Tok::Op) return std::nullopt;
    if (t.text == "==") return BinaryOp::Eq;
    if (t.text == "!=") return BinaryOp::Ne;
    if (t.text == "<") return BinaryOp::Lt;
    if (t.text == "<=") return BinaryOp::Le;
    if (t.text == ">") return BinaryOp::Gt;
    if (t.text == ">=") return BinaryOp::Ge;
    return std::nullopt;
  }

  ExprPtr parse_comparison() {
    ExprPtr lhs = parse_additive();
    auto op = comparison_op();
    if (!op) return lhs;
    int col = column();
    ++tok_;
    ExprPtr out = binary(*op, std::move(lhs), parse_additive(), col);
    if (comparison_op()) fail(cur_->number, column(), "chained comparisons are not supported");
    return out;
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    for (;;) {
      int col = column();
      if (accept_op("+")) {
        lhs = binary(BinaryOp::Add, std::move(lhs), parse_multiplicative(), col);
      } else if (accept_op("-")) {
        lhs = binary(BinaryOp::Sub, std::move(lhs), parse_multiplicative(), col);
      } else {
        return lhs;
      }
    }
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    for (;;) {
      int col = column();
      BinaryOp op;
      if (accept_op("*")) op = BinaryOp::Mul;
      else if (accept_op("//")) op = BinaryOp::FloorDiv;
      else if (accept_op("/")) op = BinaryOp::Div;
      else if (accept_op("%")) op = BinaryOp::Mod;
      else return lhs;
      lhs = binary(op, std::move(lhs), parse_unary(), col);
    }
  }

  ExprPtr parse_unary() {
    int col = column();
    if (accept_op("-")) {
      // Fold negative numeric literals so INT64_MIN is expressible.
      if (!at_end() && peek().type == Tok::Int && peek().text == "9223372036854775808") {
        ++tok_;
        auto e = make(ExprKind::Literal, col);
        e->literal = Value(std::numeric_limits<std::int64_t>::min());
        return parse_postfix(std::move(e));
      }
      auto e = make(ExprKind::Unary, col);
      e->unary_op = UnaryOp::Neg;
      e->children.push_back(parse_unary());
      return e;
    }
    return parse_postfix(parse_primary());
  }

  ExprPtr parse_postfix(ExprPtr e) {
    for (;;) {
      int col = column();
      if (accept_op("[")) {
        auto idx = make(ExprKind::Index, col);
        idx->children.push_back(std::move(e));
        idx->children.push_back(parse_expr());
        expect_op("]");
        e = std::move(idx);
      } else if (accept_op(".")) {
        auto field = make(ExprKind::Field, col);
        field->name = expect_ident("field name after '.'");
        if (!at_end() && is_op(peek(), "("))
          fail(cur_->number, column(), "method calls are not supported");
        field->children.push_back(std::move(e));
        e = std::move(field);
      } else if (!at_end() && is_op(peek(), "(")) {
        fail(cur_->number, col, "only named functions can be called");
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_primary() {
    if (at_end()) fail(cur_->number, column(), "expected an expression at end of line");
    const Token& t = peek();
    int col = t.column;
    switch (t.type) {
      case Tok::Int: {
        auto e = make(ExprKind::Literal, col);
        e->literal = Value(t.int_value);
        ++tok_;
        return e;
      }
      case Tok::Float: {
        auto e = make(ExprKind::Literal, col);
        e->literal = Value(t.float_value);
        ++tok_;
        return e;
      }
      case Tok::String: {
        auto e = make(ExprKind::Literal, col);
        e->literal = Value(t.text);
        ++tok_;
        return e;
      }
      case Tok::Keyword: {
        auto e = make(ExprKind::Literal, col);
        if (t.text == "true") e->literal = Value(true);
        else if (t.text == "false") e->literal = Value(false);
        else if (t.text == "nil") e->literal = Value(Nil{});
        else fail(cur_->number, col, "unexpected keyword '" + t.text + "'");
        ++tok_;
        return e;
      }
      case Tok::Ident: {
        std::string name = t.text;
        ++tok_;
        if (accept_op("(")) {
          auto call = make(ExprKind::Call, col);
          call->name = std::move(name);
          if (!accept_op(")")) {
            do {
              call->children.push_back(parse_expr());
            } while (accept_op(","));
            expect_op(")");
          }
          return call;
        }
        auto e = make(ExprKind::Name, col);
        e->name = std::move(name);
        return e;
      }
      case Tok::Op: {
        if (accept_op("(")) {
          ExprPtr inner = parse_expr();
          expect_op(")");
          return inner;
        }
        if (accept_op("[")) {
          auto list = make(ExprKind::ListLit, col);
          if (!accept_op("]")) {
            do {
              list->children.push_back(parse_expr());
            } while (accept_op(","));
            expect_op("]");
          }
          return list;
        }
        if (accept_op("{")) {
          auto map = make(ExprKind::MapLit, col);
          if (!accept_op("}")) {
            do {
              map->children.push_back(parse_expr());
              expect_op(":");
              map->children.push_back(parse_expr());
            } while (accept_op(","));
            expect_op("}");
          }
          return map;
        }
        fail(cur_->number, col, "unexpected '" + t.text + "'");
      }
      case Tok::End: break;
    }
    fail(cur_->number, col, "expected an expression");
  }

  Value constant(const Expr& e, Heap& heap) {
    switch (e.kind) {
      case ExprKind::Literal: return e.literal;
      case ExprKind::Unary:
        if (e.unary_op == UnaryOp::Neg) {
          Value inner = constant(*e.children[0], heap);
          if (inner.is_int() && inner.as_int() != std::numeric_limits<std::int64_t>::min())
            return Value(-inner.as_int());
          if (inner.is_float()) return Value(-inner.as_float());
        }
        break;
      case ExprKind::ListLit: {
        auto list = heap.new_list();
        for (const auto& c : e.children) list->items.push_back(constant(*c, heap));
        return list;
      }
      case ExprKind::MapLit: {
        auto map = heap.new_map();
        for (std::size_t i = 0; i + 1 < e.children.size(); i += 2) {
          Value key = constant(*e.children[i], heap);
          if (!key.is_str()) fail(e.line, e.children[i]->column, "map keys must be strings");
          map->items.insert_or_assign(key.as_str(), constant(*e.children[i + 1], heap));
        }
        return map;
      }
      default: break;
    }
    fail(e.line, e.column, "not a literal");
  }

  std::string_view source_;
  std::string path_;
  std::vector<Line> lines_;
  std::vector<std::string_view> raw_lines_;
  std::size_t pos_ = 0;
  const Line* cur_ = nullptr;
  std::size_t tok_ = 0;
};

}  // namespace

SourceUnit parse(std::string_view source, std::string path) {
  return Parser(source, std::move(path)).parse_unit();
}

std::shared_ptr<FunctionDef> parse_function(std::string_view source, std::string path) {
  return Parser(source, std::move(path)).parse_single_function();
}

Value parse_literal(std::string_view text, Heap& heap) {
  return Parser(text, "<literal>").parse_literal_value(heap);
}

}  // namespace spacetime::lang
