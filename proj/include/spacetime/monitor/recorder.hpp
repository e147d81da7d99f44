#pragma once

// The recording side: an InstrumentationSink that turns interpreter callbacks
// into calls, snapshots and events in the store, plus run_monitored, which
// records one whole program run as a session.

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "spacetime/lang/interpreter.hpp"
#include "spacetime/monitor/capture.hpp"
#include "spacetime/monitor/hooks.hpp"
#include "spacetime/monitor/spec.hpp"
#include "spacetime/store/store.hpp"

namespace spacetime::monitor {

// Recorded returns served in place of live callables during replay.
class MockSource {
 public:
  virtual ~MockSource() = default;
  virtual bool mocks(const std::string& callable) const = 0;
  // The next recorded return, or nullopt once the recording is used up.
  virtual std::optional<lang::Value> next(const std::string& callable, lang::Heap& heap) = 0;
};

class HookError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RecordStats {
  std::size_t calls = 0;
  std::size_t snapshots = 0;
  std::size_t events = 0;
  std::size_t skipped = 0;
  std::optional<std::int64_t> failed_at;  // ordinal of the first call that failed
  std::string error;
};

struct RecorderOptions {
  SerializerMap serializers;
  MockSource* mocks = nullptr;
};

class Recorder : public lang::InstrumentationSink {
 public:
  // Hook names in `specs` must all exist in `hooks`.
  Recorder(lang::Interpreter& interpreter, store::Store& store, store::Id session, const SpecSet& specs,
           const HookRegistry& hooks, RecorderOptions options = {});

  lang::Observe observe(const lang::FunctionDef& fn) override;
  void on_call(const lang::Frame& frame) override;
  void on_line(const lang::Frame& frame, int line) override;
  void on_return(const lang::Frame& frame, const lang::Value& result) override;
  void on_unwind(const lang::Frame& frame, const std::string& error) override;
  bool intercepts(const std::string& callable) override;
  lang::Value on_intercept(const std::string& callable, std::span<const lang::Value> args,
                           const std::function<lang::Value()>& live) override;

  RecordStats stats() const;
  // Globals captured for calls of `fn` in this run (analysis ∩ include/exclude).
  std::vector<std::string> captured_globals(const std::string& fn);

 private:
  struct Active {
    const MonitorSpec* spec = nullptr;
    store::CallRecord record;
    std::vector<store::SnapshotRecord> snapshots;
    std::vector<store::EventRecord> events;
    std::vector<HookOutput> hook_outputs;
    const std::vector<std::string>* globals = nullptr;
  };

  store::VarMap capture_locals(const lang::Frame& frame, const MonitorSpec& spec);
  store::VarMap capture_globals(const Active& a);
  void run_hooks(Active& a, const std::vector<std::string>& names, std::span<const lang::Value> args, int line);
  void finish(Active a);
  store::Id code_of(const lang::FunctionDef& fn);

  lang::Interpreter& interp_;
  store::Store& store_;
  store::Id session_;
  const SpecSet& specs_;
  const HookRegistry& hooks_;
  MockSource* mocks_;
  ValueCapturer capturer_;

  std::vector<Active> stack_;
  std::unordered_map<std::string, int> active_tracked_;
  store::CommitBatch pending_;
  std::int64_t next_ordinal_ = 0;
  std::unordered_map<const lang::FunctionDef*, store::Id> code_ids_;
  std::unordered_map<std::string, std::vector<std::string>> globals_;
  RecordStats stats_;
};

// ---- sessions -------------------------------------------------------------

struct SessionSetup {
  std::string label;
  std::string kind = "record";
  std::optional<store::Id> parent_session;
  std::optional<std::int64_t> parent_offset;
  // Function name -> replacement source, already applied to the program
  // being run.
  std::map<std::string, std::string> overrides;
};

// Creates a running session. `base` is the program as loaded from source
// (before overrides); its full text is stored so the session can be replayed
// from the store alone.
store::Id begin_session(store::Store& store, const lang::Program& base, const SpecSet& specs,
                        const SessionSetup& setup);

struct SessionProgram {
  lang::Program base;
  lang::Program program;  // base with the session's overrides applied
  SpecSet specs;
  std::map<std::string, std::string> overrides;
};

// Rebuilds the program and monitor specs a session was recorded with.
SessionProgram load_session_program(const store::Store& store, store::Id session);

// Applies a function-source override to `program`. The replacement must
// define a function of the same name with the same number of parameters.
lang::Program apply_override(const lang::Program& program, const std::string& function, const std::string& source);

// Full program source, units concatenated.
std::string program_source(const lang::Program& program);

// Statement lines of a function, relative to its def line.
std::vector<int> relative_line_map(const lang::Program& program, const lang::FunctionDef& fn);

// ---- whole runs ------------------------------------------------------------

struct RunOptions {
  std::string label = "run";
  // Function to call; empty runs the top-level code.
  std::string entry;
  std::vector<lang::Value> args;
  lang::ExecMode mode = lang::ExecMode::Flat;
  std::ostream* output = nullptr;
  SerializerMap serializers;
};

struct RunResult {
  store::Id session = 0;
  RecordStats stats;
  lang::Value result;  // entry function's return value
  bool failed() const { return !stats.error.empty(); }
};

// Records one run as a new session and flushes the store. Guest errors and
// hook failures mark the session failed (everything recorded up to the
// failure is kept) and are reported in RunResult; setup errors (bad specs,
// unknown hooks) throw before a session is created.
RunResult run_monitored(const lang::Program& program, lang::Env& env, SpecSet specs, const HookRegistry& hooks,
                        store::Store& store, const RunOptions& options);

}  // namespace spacetime::monitor
