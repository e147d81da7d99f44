#include "spacetime/lang/interpreter.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "spacetime/lang/errors.hpp"

namespace spacetime::lang {

namespace {

[[noreturn]] void type_error(int line, const std::string& message) { throw RuntimeError(message, line); }

std::int64_t checked_add(std::int64_t a, std::int64_t b, int line) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) type_error(line, "integer overflow in '+'");
  return r;
}

std::int64_t checked_sub(std::int64_t a, std::int64_t b, int line) {
  std::int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) type_error(line, "integer overflow in '-'");
  return r;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b, int line) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) type_error(line, "integer overflow in '*'");
  return r;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b, int line) {
  if (b == 0) type_error(line, "integer division by zero");
  if (a == std::numeric_limits<std::int64_t>::min() && b == -1) type_error(line, "integer overflow in '//'");
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b, int line) {
  if (b == 0) type_error(line, "integer modulo by zero");
  if (b == -1) return 0;
  std::int64_t r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}

int compare_values(const Value& a, const Value& b, int line, std::string_view op) {
  if (a.is_number() && b.is_number()) {
    if (a.is_int() && b.is_int()) return a.as_int() < b.as_int() ? -1 : (a.as_int() > b.as_int() ? 1 : 0);
    double x = a.as_number(), y = b.as_number();
    if (std::isnan(x) || std::isnan(y)) return 2;  // unordered
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (a.is_str() && b.is_str()) {
    int c = a.as_str().compare(b.as_str());
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  type_error(line, "cannot compare " + std::string(a.type_name()) + " " + std::string(op) + " " +
                       std::string(b.type_name()));
}

std::size_t normalize_index(std::int64_t index, std::size_t size, int line) {
  std::int64_t n = static_cast<std::int64_t>(size);
  std::int64_t i = index < 0 ? index + n : index;
  if (i < 0 || i >= n)
    type_error(line, "index " + std::to_string(index) + " out of range for length " + std::to_string(size));
  return static_cast<std::size_t>(i);
}

}  // namespace

bool guest_equal(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number() && a.kind() != b.kind()) return a.as_number() == b.as_number();
  if (a.is_list() && b.is_list()) {
    const auto& xs = a.as_list()->items;
    const auto& ys = b.as_list()->items;
    if (xs.size() != ys.size()) return false;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (!guest_equal(xs[i], ys[i])) return false;
    return true;
  }
  if (a.is_map() && b.is_map()) {
    const auto& xs = a.as_map()->items;
    const auto& ys = b.as_map()->items;
    if (xs.size() != ys.size()) return false;
    auto it = ys.begin();
    for (const auto& [k, v] : xs) {
      if (it->first != k || !guest_equal(v, it->second)) return false;
      ++it;
    }
    return true;
  }
  if (a.is_native() && b.is_native()) return a.as_native() == b.as_native();
  if (a.is_float() && b.is_float()) return a.as_float() == b.as_float();
  return deep_equal(a, b);
}

void register_builtin(Env& env, std::string name, BuiltinKind kind, BuiltinFn fn, int min_arity,
                      int max_arity) {
  if (env.builtins.count(name)) throw std::invalid_argument("builtin '" + name + "' is already registered");
  Builtin b;
  b.name = name;
  b.kind = kind;
  b.min_arity = min_arity;
  b.max_arity = max_arity;
  b.fn = std::move(fn);
  env.builtins.emplace(std::move(name), std::move(b));
}

Interpreter::Interpreter(Program program, Env& env, ExecMode mode)
    : program_(std::move(program)), env_(env), mode_(mode) {}

Value Interpreter::call(const std::string& function, std::vector<Value> args, const CallOptions& options) {
  const FunctionDef& fn = program_.function(function);
  return call_function(fn, std::move(args), options);
}

void Interpreter::run_top_level() {
  Frame frame;
  frame.flat = &program_.top_level_flat();
  frame.loops.resize(static_cast<std::size_t>(frame.flat->loop_slots));
  if (mode_ == ExecMode::Flat) {
    run_flat(frame, *frame.flat, 0, false);
    return;
  }
  for (const auto& unit : program_.units()) {
    Value ignored;
    Signal sig = exec_block(frame, unit->top_level, false, ignored);
    if (sig == Signal::Return) return;
    if (sig != Signal::Normal) throw RuntimeError("'break' or 'continue' outside a loop", frame.line);
  }
}

Value Interpreter::invoke(const std::string& name, std::vector<Value> args, int line) {
  if (const FunctionDef* fn = program_.find(name)) {
    if (sink_ && sink_->intercepts(name)) {
      std::function<Value()> live = [&] { return call_function(*fn, args, {}); };
      return sink_->on_intercept(name, args, live);
    }
    return call_function(*fn, std::move(args), {});
  }
  auto it = env_.builtins.find(name);
  if (it == env_.builtins.end()) throw RuntimeError("undefined function '" + name + "'", line);
  const Builtin& b = it->second;
  if (sink_ && sink_->intercepts(name)) {
    std::function<Value()> live = [&] { return call_builtin(b, args, line); };
    return sink_->on_intercept(name, args, live);
  }
  return call_builtin(b, args, line);
}

Value Interpreter::call_builtin(const Builtin& b, std::vector<Value>& args, int line) {
  int n = static_cast<int>(args.size());
  if (n < b.min_arity || (b.max_arity >= 0 && n > b.max_arity)) {
    std::string expected = b.max_arity == b.min_arity ? std::to_string(b.min_arity)
                           : b.max_arity < 0         ? "at least " + std::to_string(b.min_arity)
                                                     : std::to_string(b.min_arity) + ".." + std::to_string(b.max_arity);
    throw RuntimeError(b.name + "() takes " + expected + " argument(s), got " + std::to_string(n), line);
  }
  BuiltinContext ctx{*this, heap_, line};
  try {
    return b.fn(ctx, std::span<const Value>(args));
  } catch (const RuntimeError&) {
    throw;
  } catch (const std::exception& e) {
    throw RuntimeError(b.name + ": " + e.what(), line);
  }
}

Value Interpreter::call_function(const FunctionDef& fn, std::vector<Value> args, const CallOptions& options) {
  if (!options.entry_line && args.size() != fn.params.size())
    throw RuntimeError(fn.name + "() takes " + std::to_string(fn.params.size()) + " argument(s), got " +
                       std::to_string(args.size()));
  if (depth_ >= max_depth_) throw RuntimeError("maximum call depth exceeded", 0, fn.name);

  const FlatBody& flat = program_.flat(fn.name);
  Frame frame;
  frame.function = &fn;
  frame.flat = &flat;
  frame.loops.resize(static_cast<std::size_t>(flat.loop_slots));
  int start = 0;
  if (options.entry_line) {
    int line = *options.entry_line;
    if (line < fn.def_line || line > fn.end_line)
      throw RuntimeError("entry line " + std::to_string(line) + " is outside function '" + fn.name + "'");
    if (!flat.is_statement_line(line))
      throw RuntimeError("entry line " + std::to_string(line) + " is not a statement boundary in '" + fn.name + "'");
    if (!flat.is_resumable(line))
      throw RuntimeError("entry line " + std::to_string(line) + " is inside a for loop and cannot be resumed");
    start = flat.line_index.at(line);
    frame.entry_line = line;
    for (const auto& [name, v] : options.preset_locals) frame.locals[name] = v;
    for (std::size_t i = 0; i < args.size() && i < fn.params.size(); ++i) frame.locals[fn.params[i]] = args[i];
  } else {
    frame.locals.reserve(fn.params.size() + 4);
    for (std::size_t i = 0; i < args.size(); ++i) frame.locals[fn.params[i]] = std::move(args[i]);
  }

  Observe observe = sink_ ? sink_->observe(fn) : Observe::None;
  ++depth_;
  struct DepthGuard {
    int& d;
    ~DepthGuard() { --d; }
  } guard{depth_};

  Value result;
  try {
    if (observe != Observe::None) sink_->on_call(frame);
    bool report = observe == Observe::Line;
    if (mode_ == ExecMode::Flat || options.entry_line) {
      result = run_flat(frame, flat, start, report);
    } else {
      Signal sig = exec_block(frame, fn.body, report, result);
      if (sig == Signal::Break || sig == Signal::Continue)
        throw RuntimeError("'break' or 'continue' outside a loop", frame.line);
      if (sig != Signal::Return) result = Value();
    }
  } catch (const RuntimeError& e) {
    if (!e.function().empty()) {
      if (observe != Observe::None) sink_->on_unwind(frame, e.what());
      throw;
    }
    RuntimeError located(e.detail(), e.line() ? e.line() : frame.line, fn.name);
    if (observe != Observe::None) sink_->on_unwind(frame, located.what());
    throw located;
  } catch (const std::exception& e) {
    if (observe != Observe::None) sink_->on_unwind(frame, e.what());
    throw;
  }
  if (observe != Observe::None) sink_->on_return(frame, result);
  return result;
}

void Interpreter::report_line(Frame& frame, int line, bool report) {
  frame.line = line;
  if (report) sink_->on_line(frame, line);
}

Value Interpreter::run_flat(Frame& frame, const FlatBody& body, int start, bool report) {
  const auto& entries = body.entries;
  int pc = start;
  const int size = static_cast<int>(entries.size());
  while (pc < size) {
    const FlatEntry& e = entries[static_cast<std::size_t>(pc)];
    switch (e.op) {
      case FlatOp::Exec: {
        report_line(frame, e.line, report);
        Value result;
        Signal sig = exec_simple(frame, *e.stmt, result);
        if (sig == Signal::Return) return result;
        if (sig == Signal::Break || sig == Signal::Continue) {
          if (e.target < 0) throw RuntimeError("'break' or 'continue' outside a loop", e.line);
          pc = e.target;
        } else {
          ++pc;
        }
        break;
      }
      case FlatOp::Branch:
      case FlatOp::LoopHead:
        report_line(frame, e.line, report);
        pc = truthy(eval(frame, *e.stmt->expr)) ? pc + 1 : e.target;
        break;
      case FlatOp::ForInit:
        frame.line = e.line;
        frame.loops[static_cast<std::size_t>(e.slot)] = LoopState{iterate(eval(frame, *e.stmt->expr), e.line), 0};
        ++pc;
        break;
      case FlatOp::ForNext: {
        report_line(frame, e.line, report);
        LoopState& loop = frame.loops[static_cast<std::size_t>(e.slot)];
        if (loop.next >= loop.items.size()) {
          loop.items.clear();
          pc = e.target;
        } else {
          bind(frame, e.stmt->loop_var, loop.items[loop.next++]);
          ++pc;
        }
        break;
      }
      case FlatOp::Jump:
        pc = e.target;
        break;
    }
  }
  return Value();
}

Interpreter::Signal Interpreter::exec_block(Frame& frame, const std::vector<StmtPtr>& body, bool report,
                                            Value& result) {
  for (const auto& s : body) {
    Signal sig = exec_stmt(frame, *s, report, result);
    if (sig != Signal::Normal) return sig;
  }
  return Signal::Normal;
}

Interpreter::Signal Interpreter::exec_stmt(Frame& frame, const Stmt& s, bool report, Value& result) {
  switch (s.kind) {
    case StmtKind::If: {
      report_line(frame, s.line, report);
      if (truthy(eval(frame, *s.expr))) return exec_block(frame, s.body, report, result);
      return exec_block(frame, s.orelse, report, result);
    }
    case StmtKind::While: {
      for (;;) {
        report_line(frame, s.line, report);
        if (!truthy(eval(frame, *s.expr))) return Signal::Normal;
        Signal sig = exec_block(frame, s.body, report, result);
        if (sig == Signal::Break) return Signal::Normal;
        if (sig == Signal::Return) return sig;
      }
    }
    case StmtKind::For: {
      frame.line = s.line;
      std::vector<Value> items = iterate(eval(frame, *s.expr), s.line);
      for (std::size_t i = 0;; ++i) {
        report_line(frame, s.line, report);
        if (i >= items.size()) return Signal::Normal;
        bind(frame, s.loop_var, items[i]);
        Signal sig = exec_block(frame, s.body, report, result);
        if (sig == Signal::Break) return Signal::Normal;
        if (sig == Signal::Return) return sig;
      }
    }
    default:
      report_line(frame, s.line, report);
      return exec_simple(frame, s, result);
  }
}

Interpreter::Signal Interpreter::exec_simple(Frame& frame, const Stmt& s, Value& result) {
  switch (s.kind) {
    case StmtKind::Assign:
      assign(frame, *s.target, eval(frame, *s.expr));
      return Signal::Normal;
    case StmtKind::ExprStmt:
      eval(frame, *s.expr);
      return Signal::Normal;
    case StmtKind::Return:
      result = s.expr ? eval(frame, *s.expr) : Value();
      return Signal::Return;
    case StmtKind::Global:
      if (!frame.function) throw RuntimeError("'global' outside a function", s.line);
      return Signal::Normal;
    case StmtKind::Pass:
      return Signal::Normal;
    case StmtKind::Break:
      return Signal::Break;
    case StmtKind::Continue:
      return Signal::Continue;
    default:
      throw RuntimeError("compound statement in simple position", s.line);
  }
}

std::vector<Value> Interpreter::iterate(const Value& v, int line) {
  switch (v.kind()) {
    case ValueKind::List: return v.as_list()->items;
    case ValueKind::Map: {
      std::vector<Value> keys;
      keys.reserve(v.as_map()->items.size());
      for (const auto& [k, _] : v.as_map()->items) keys.emplace_back(k);
      return keys;
    }
    case ValueKind::Str: {
      std::vector<Value> chars;
      for (char c : v.as_str()) chars.emplace_back(std::string(1, c));
      return chars;
    }
    default: throw RuntimeError("cannot iterate over " + std::string(v.type_name()), line);
  }
}

Value Interpreter::lookup(Frame& frame, const std::string& name, int line) {
  if (frame.function && frame.flat->locals.count(name)) {
    auto it = frame.locals.find(name);
    if (it != frame.locals.end()) return it->second;
    throw RuntimeError("local variable '" + name + "' referenced before assignment", line);
  }
  auto git = env_.globals.find(name);
  if (git != env_.globals.end()) return git->second;
  if (program_.find(name) || env_.builtins.count(name))
    throw RuntimeError("function '" + name + "' is not a value", line);
  throw RuntimeError("undefined name '" + name + "'", line);
}

void Interpreter::bind(Frame& frame, const std::string& name, Value v) {
  if (!frame.function || frame.flat->declared_globals.count(name)) {
    env_.globals[name] = std::move(v);
  } else {
    frame.locals[name] = std::move(v);
  }
}

void Interpreter::assign(Frame& frame, const Expr& target, Value v) {
  switch (target.kind) {
    case ExprKind::Name:
      bind(frame, target.name, std::move(v));
      return;
    case ExprKind::Index: {
      Value container = eval(frame, *target.children[0]);
      Value index = eval(frame, *target.children[1]);
      if (container.is_list()) {
        if (!index.is_int()) throw RuntimeError("list index must be int", target.line);
        auto& list = *container.as_list();
        list.items[normalize_index(index.as_int(), list.items.size(), target.line)] = std::move(v);
        list.touch();
        return;
      }
      if (container.is_map()) {
        if (!index.is_str()) throw RuntimeError("map key must be str", target.line);
        auto& map = *container.as_map();
        map.items.insert_or_assign(index.as_str(), std::move(v));
        map.touch();
        return;
      }
      throw RuntimeError("cannot assign into " + std::string(container.type_name()), target.line);
    }
    case ExprKind::Field: {
      Value container = eval(frame, *target.children[0]);
      if (!container.is_map())
        throw RuntimeError("cannot set field '" + target.name + "' on " + std::string(container.type_name()),
                           target.line);
      auto& map = *container.as_map();
      map.items.insert_or_assign(target.name, std::move(v));
      map.touch();
      return;
    }
    default:
      throw RuntimeError("invalid assignment target", target.line);
  }
}

Value Interpreter::eval(Frame& frame, const Expr& e) {
  switch (e.kind) {
    case ExprKind::Literal:
      return e.literal;
    case ExprKind::Name:
      return lookup(frame, e.name, e.line);
    case ExprKind::ListLit: {
      std::vector<Value> items;
      items.reserve(e.children.size());
      for (const auto& c : e.children) items.push_back(eval(frame, *c));
      return heap_.new_list(std::move(items));
    }
    case ExprKind::MapLit: {
      auto map = heap_.new_map();
      for (std::size_t i = 0; i + 1 < e.children.size(); i += 2) {
        Value key = eval(frame, *e.children[i]);
        if (!key.is_str()) throw RuntimeError("map keys must be str, got " + std::string(key.type_name()), e.line);
        map->items.insert_or_assign(key.as_str(), eval(frame, *e.children[i + 1]));
      }
      return map;
    }
    case ExprKind::Unary: {
      Value v = eval(frame, *e.children[0]);
      if (e.unary_op == UnaryOp::Not) return Value(!truthy(v));
      if (v.is_int()) {
        if (v.as_int() == std::numeric_limits<std::int64_t>::min())
          throw RuntimeError("integer overflow in unary '-'", e.line);
        return Value(-v.as_int());
      }
      if (v.is_float()) return Value(-v.as_float());
      throw RuntimeError("bad operand type for unary '-': " + std::string(v.type_name()), e.line);
    }
    case ExprKind::Binary:
      return eval_binary(frame, e);
    case ExprKind::Index: {
      Value container = eval(frame, *e.children[0]);
      Value index = eval(frame, *e.children[1]);
      if (container.is_list()) {
        if (!index.is_int()) throw RuntimeError("list index must be int", e.line);
        const auto& items = container.as_list()->items;
        return items[normalize_index(index.as_int(), items.size(), e.line)];
      }
      if (container.is_map()) {
        if (!index.is_str()) throw RuntimeError("map key must be str", e.line);
        const auto& items = container.as_map()->items;
        auto it = items.find(index.as_str());
        if (it == items.end()) throw RuntimeError("missing key " + render(index), e.line);
        return it->second;
      }
      if (container.is_str()) {
        if (!index.is_int()) throw RuntimeError("string index must be int", e.line);
        const auto& s = container.as_str();
        return Value(std::string(1, s[normalize_index(index.as_int(), s.size(), e.line)]));
      }
      throw RuntimeError("cannot index " + std::string(container.type_name()), e.line);
    }
    case ExprKind::Field: {
      Value container = eval(frame, *e.children[0]);
      if (!container.is_map())
        throw RuntimeError("cannot read field '" + e.name + "' of " + std::string(container.type_name()), e.line);
      const auto& items = container.as_map()->items;
      auto it = items.find(e.name);
      if (it == items.end()) throw RuntimeError("missing field '" + e.name + "'", e.line);
      return it->second;
    }
    case ExprKind::Call:
      return eval_call(frame, e);
  }
  throw RuntimeError("bad expression", e.line);
}

Value Interpreter::eval_call(Frame& frame, const Expr& e) {
  std::vector<Value> args;
  args.reserve(e.children.size());
  for (const auto& c : e.children) args.push_back(eval(frame, *c));
  return invoke(e.name, std::move(args), e.line);
}

Value Interpreter::eval_binary(Frame& frame, const Expr& e) {
  const int line = e.line;
  if (e.binary_op == BinaryOp::And) {
    Value lhs = eval(frame, *e.children[0]);
    return truthy(lhs) ? eval(frame, *e.children[1]) : lhs;
  }
  if (e.binary_op == BinaryOp::Or) {
    Value lhs = eval(frame, *e.children[0]);
    return truthy(lhs) ? lhs : eval(frame, *e.children[1]);
  }
  Value a = eval(frame, *e.children[0]);
  Value b = eval(frame, *e.children[1]);
  auto mismatch = [&]() -> Value {
    throw RuntimeError("unsupported operand types for '" + std::string(op_text(e.binary_op)) + "': " +
                           std::string(a.type_name()) + " and " + std::string(b.type_name()),
                       line);
  };
  switch (e.binary_op) {
    case BinaryOp::Add:
      if (a.is_int() && b.is_int()) return Value(checked_add(a.as_int(), b.as_int(), line));
      if (a.is_number() && b.is_number()) return Value(a.as_number() + b.as_number());
      if (a.is_str() && b.is_str()) return Value(a.as_str() + b.as_str());
      if (a.is_list() && b.is_list()) {
        std::vector<Value> items = a.as_list()->items;
        items.insert(items.end(), b.as_list()->items.begin(), b.as_list()->items.end());
        return heap_.new_list(std::move(items));
      }
      return mismatch();
    case BinaryOp::Sub:
      if (a.is_int() && b.is_int()) return Value(checked_sub(a.as_int(), b.as_int(), line));
      if (a.is_number() && b.is_number()) return Value(a.as_number() - b.as_number());
      return mismatch();
    case BinaryOp::Mul:
      if (a.is_int() && b.is_int()) return Value(checked_mul(a.as_int(), b.as_int(), line));
      if (a.is_number() && b.is_number()) return Value(a.as_number() * b.as_number());
      return mismatch();
    case BinaryOp::Div:
      if (a.is_number() && b.is_number()) {
        if (b.as_number() == 0.0) throw RuntimeError("division by zero", line);
        return Value(a.as_number() / b.as_number());
      }
      return mismatch();
    case BinaryOp::FloorDiv:
      if (a.is_int() && b.is_int()) return Value(floor_div(a.as_int(), b.as_int(), line));
      if (a.is_number() && b.is_number()) {
        if (b.as_number() == 0.0) throw RuntimeError("division by zero", line);
        return Value(std::floor(a.as_number() / b.as_number()));
      }
      return mismatch();
    case BinaryOp::Mod:
      if (a.is_int() && b.is_int()) return Value(floor_mod(a.as_int(), b.as_int(), line));
      if (a.is_number() && b.is_number()) {
        double y = b.as_number();
        if (y == 0.0) throw RuntimeError("modulo by zero", line);
        double r = std::fmod(a.as_number(), y);
        if (r != 0.0 && ((r < 0) != (y < 0))) r += y;
        return Value(r);
      }
      return mismatch();
    case BinaryOp::Eq: return Value(guest_equal(a, b));
    case BinaryOp::Ne: return Value(!guest_equal(a, b));
    case BinaryOp::Lt: return Value(compare_values(a, b, line, "<") == -1);
    case BinaryOp::Le: {
      int c = compare_values(a, b, line, "<=");
      return Value(c == -1 || c == 0);
    }
    case BinaryOp::Gt: return Value(compare_values(a, b, line, ">") == 1);
    case BinaryOp::Ge: {
      int c = compare_values(a, b, line, ">=");
      return Value(c == 1 || c == 0);
    }
    case BinaryOp::In:
      if (b.is_list()) {
        for (const auto& item : b.as_list()->items)
          if (guest_equal(a, item)) return Value(true);
        return Value(false);
      }
      if (b.is_map()) {
        if (!a.is_str()) return Value(false);
        return Value(b.as_map()->items.count(a.as_str()) != 0);
      }
      if (b.is_str() && a.is_str()) return Value(b.as_str().find(a.as_str()) != std::string::npos);
      return mismatch();
    default: break;
  }
  return mismatch();
}

Value call(const Program& program, const std::string& function, std::vector<Value> args, Env& env,
           InstrumentationSink* sink, const CallOptions& options) {
  Interpreter interp(program, env);
  interp.set_sink(sink);
  return interp.call(function, std::move(args), options);
}

}  // namespace spacetime::lang
