#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spacetime/lang/program.hpp"
#include "spacetime/lang/value.hpp"

namespace spacetime::lang {

class Interpreter;

enum class BuiltinKind { Pure, External };

struct BuiltinContext {
  Interpreter& interpreter;
  Heap& heap;
  int line;
};

using BuiltinFn = std::function<Value(BuiltinContext&, std::span<const Value>)>;

struct Builtin {
  std::string name;
  BuiltinKind kind = BuiltinKind::Pure;
  int min_arity = 0;
  int max_arity = -1;  // -1: variadic
  BuiltinFn fn;
};

struct Env {
  std::unordered_map<std::string, Value> globals;
  std::unordered_map<std::string, Builtin> builtins;

  bool is_external(const std::string& name) const {
    auto it = builtins.find(name);
    return it != builtins.end() && it->second.kind == BuiltinKind::External;
  }
};

// Throws std::invalid_argument when `name` is already bound.
void register_builtin(Env& env, std::string name, BuiltinKind kind, BuiltinFn fn, int min_arity = 0,
                      int max_arity = -1);

struct LoopState {
  std::vector<Value> items;
  std::size_t next = 0;
};

struct Frame {
  const FunctionDef* function = nullptr;  // null for top-level code
  const FlatBody* flat = nullptr;
  std::unordered_map<std::string, Value> locals;
  std::vector<LoopState> loops;
  int line = 0;
  std::optional<int> entry_line;
};

enum class Observe { None, Function, Line };

// Receives execution events. All callbacks run synchronously on the
// interpreter's thread.
class InstrumentationSink {
 public:
  virtual ~InstrumentationSink() = default;

  virtual Observe observe(const FunctionDef& fn) = 0;
  virtual void on_call(const Frame& frame) = 0;
  // Fired before the statement on `line` runs.
  virtual void on_line(const Frame& frame, int line) = 0;
  virtual void on_return(const Frame& frame, const Value& result) = 0;
  // The frame is being unwound by an exception.
  virtual void on_unwind(const Frame& frame, const std::string& error) {
    (void)frame;
    (void)error;
  }

  // Callables for which on_intercept is consulted instead of running directly.
  virtual bool intercepts(const std::string& callable) { (void)callable; return false; }
  virtual Value on_intercept(const std::string& callable, std::span<const Value> args,
                             const std::function<Value()>& live) {
    (void)callable;
    (void)args;
    return live();
  }
};

enum class ExecMode { Flat, Tree };

struct CallOptions {
  // Absolute source line to start at; must be a resumable statement line of
  // the called function.
  std::optional<int> entry_line;
  std::unordered_map<std::string, Value> preset_locals;
};

class Interpreter {
 public:
  Interpreter(Program program, Env& env, ExecMode mode = ExecMode::Flat);

  Value call(const std::string& function, std::vector<Value> args, const CallOptions& options = {});
  void run_top_level();

  void set_sink(InstrumentationSink* sink) { sink_ = sink; }
  InstrumentationSink* sink() const { return sink_; }
  void set_output(std::ostream* out) { out_ = out; }
  std::ostream* output() const { return out_; }
  void set_max_depth(int depth) { max_depth_ = depth; }

  const Program& program() const { return program_; }
  Env& env() { return env_; }
  const Env& env() const { return env_; }
  Heap& heap() { return heap_; }
  ExecMode mode() const { return mode_; }

  // Calls a guest function or builtin by name, honoring interception.
  Value invoke(const std::string& name, std::vector<Value> args, int line);

 private:
  enum class Signal { Normal, Break, Continue, Return };

  Value call_function(const FunctionDef& fn, std::vector<Value> args, const CallOptions& options);
  Value call_builtin(const Builtin& b, std::vector<Value>& args, int line);

  Value run_flat(Frame& frame, const FlatBody& body, int start, bool report);
  Signal exec_block(Frame& frame, const std::vector<StmtPtr>& body, bool report, Value& result);
  Signal exec_stmt(Frame& frame, const Stmt& s, bool report, Value& result);
  Signal exec_simple(Frame& frame, const Stmt& s, Value& result);

  Value eval(Frame& frame, const Expr& e);
  Value eval_binary(Frame& frame, const Expr& e);
  Value eval_call(Frame& frame, const Expr& e);
  Value lookup(Frame& frame, const std::string& name, int line);
  void assign(Frame& frame, const Expr& target, Value v);
  void bind(Frame& frame, const std::string& name, Value v);
  std::vector<Value> iterate(const Value& v, int line);

  void report_line(Frame& frame, int line, bool report);

  Program program_;
  Env& env_;
  ExecMode mode_;
  Heap heap_;
  InstrumentationSink* sink_ = nullptr;
  std::ostream* out_ = nullptr;
  int depth_ = 0;
  int max_depth_ = 1000;
};

// One-shot call with a fresh interpreter.
Value call(const Program& program, const std::string& function, std::vector<Value> args, Env& env,
           InstrumentationSink* sink = nullptr, const CallOptions& options = {});

// Equality as the guest `==` operator sees it (ints and floats compare
// numerically).
bool guest_equal(const Value& a, const Value& b);

}  // namespace spacetime::lang
