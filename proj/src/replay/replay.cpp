#include "spacetime/replay/replay.hpp"

#include <algorithm>

#include "spacetime/compare/compare.hpp"
#include "spacetime/lang/errors.hpp"
#include "spacetime/store/queries.hpp"

namespace spacetime::replay {

std::size_t MockSet::size(const std::string& callable) const {
  auto it = queues.find(callable);
  return it == queues.end() ? 0 : it->second.size();
}

MockSet build_mocks(const store::Store& store, const std::vector<store::Id>& calls,
                    const std::set<std::string>& selection) {
  std::vector<store::EventRecord> events;
  for (store::Id c : calls)
    for (auto& e : store.events(c))
      if (selection.count(e.callable)) events.push_back(std::move(e));
  // Event ids are assigned as events happen, so id order is chronological
  // across nested calls too.
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  MockSet out;
  for (const auto& name : selection) out.queues[name];
  for (const auto& e : events) out.queues[e.callable].push_back(MockEntry{e.id, e.args, e.return_value});
  for (const auto& name : selection)
    if (out.queues[name].empty()) out.warnings.push_back("no recorded events for '" + name + "' in the replayed scope");
  return out;
}

namespace {

class QueueMocks : public monitor::MockSource {
 public:
  QueueMocks(const store::Store& store, MockSet set, std::set<std::string> selection)
      : store_(store), set_(std::move(set)), selection_(std::move(selection)) {}

  bool mocks(const std::string& callable) const override { return selection_.count(callable) != 0; }

  std::optional<lang::Value> next(const std::string& callable, lang::Heap& heap) override {
    auto& q = set_.queues[callable];
    if (q.empty()) {
      ++fell_through[callable];
      return std::nullopt;
    }
    if (!materializer_) materializer_ = std::make_unique<store::Materializer>(store_, heap);
    store::Id ret = q.front().return_value;
    q.pop_front();
    ++served[callable];
    return materializer_->get(ret).value;
  }

  std::map<std::string, std::size_t> served;
  std::map<std::string, std::size_t> fell_through;

 private:
  const store::Store& store_;
  MockSet set_;
  std::set<std::string> selection_;
  std::unique_ptr<store::Materializer> materializer_;
};

struct Prepared {
  monitor::SessionProgram sp;
  std::map<std::string, std::string> overrides;
  lang::Program program;
};

Prepared prepare(const store::Store& store, store::Id session, const ReplayPlan& plan) {
  Prepared p;
  p.sp = monitor::load_session_program(store, session);
  p.overrides = p.sp.overrides;
  for (const auto& [fn, o] : plan.code_override) {
    if (const auto* text = std::get_if<std::string>(&o)) {
      p.overrides[fn] = *text;
    } else {
      store::CodeVersion c = store::require_code(store, std::get<store::Id>(o));
      if (c.function != fn)
        throw ReplayError("code version " + std::to_string(c.id) + " belongs to '" + c.function + "', not '" + fn + "'");
      p.overrides[fn] = c.source_text;
    }
  }
  p.program = p.sp.base;
  try {
    for (const auto& [fn, text] : p.overrides) p.program = monitor::apply_override(p.program, fn, text);
  } catch (const lang::SyntaxError& e) {
    throw ReplayError(std::string("code override does not parse: ") + e.what());
  } catch (const lang::RuntimeError& e) {
    throw ReplayError(e.detail());
  }
  for (const auto& [name, spec] : p.sp.specs)
    if (!p.program.find(name)) throw ReplayError("monitored function '" + name + "' is missing from the program");
  // Naming a global for migration and also setting it is contradictory;
  // excluding it from migration and setting it is the normal override.
  if (plan.migrate == Migrate::Only)
    for (const auto& name : plan.migrate_names)
      if (plan.manual_globals.count(name))
        throw ReplayError("global '" + name + "' is both selected for migration and set manually");
  if (plan.window && plan.window->first > plan.window->second)
    throw ReplayError("window start " + std::to_string(plan.window->first) + " is after its end " +
                      std::to_string(plan.window->second));
  return p;
}

lang::Env make_env(const ReplayEnv& renv, const monitor::SpecSet& specs, const lang::Program& program) {
  lang::Env env;
  lang::RuntimeConfig config;
  config.seed = renv.seed;
  config.events = renv.events ? renv.events : std::make_shared<lang::EventScript>();
  lang::install_all(env, config);
  // A tracked callable that only existed in the recording environment still
  // needs a live stand-in for when its mock runs dry.
  for (const auto& [_, spec] : specs)
    for (const auto& t : spec.tracked)
      if (!program.find(t) && !env.builtins.count(t))
        lang::register_builtin(env, t, lang::BuiltinKind::External,
                               [](lang::BuiltinContext&, std::span<const lang::Value>) { return lang::Value(); });
  return env;
}

bool migrated(const ReplayPlan& plan, const std::string& name) {
  switch (plan.migrate) {
    case Migrate::All:
      return true;
    case Migrate::Only:
      return plan.migrate_names.count(name) != 0;
    case Migrate::Except:
      return plan.migrate_names.count(name) == 0;
  }
  return true;
}

void load_globals(lang::Env& env, const store::VarMap& recorded, const ReplayPlan& plan, const ReplayEnv& renv,
                  store::Materializer& m, lang::Heap& heap, std::vector<std::string>& warnings) {
  for (const auto& [name, ref] : recorded) {
    if (plan.manual_globals.count(name)) continue;
    auto current = renv.current_globals.find(name);
    if (migrated(plan, name)) {
      store::Materialized v = m.get(ref);
      if (!v.skipped) {
        env.globals[name] = v.value;
        continue;
      }
      if (current == renv.current_globals.end())
        throw ReplayError("global '" + name + "' was not recorded (" + v.reason + ") and has no live value");
      warnings.push_back("global '" + name + "' was not recorded (" + v.reason + "); using its live value");
      env.globals[name] = lang::deep_copy(heap, current->second);
    } else {
      if (current == renv.current_globals.end())
        throw ReplayError("global '" + name + "' is not migrated and has no current value; set it manually");
      env.globals[name] = lang::deep_copy(heap, current->second);
    }
  }
  for (const auto& [name, value] : plan.manual_globals) env.globals[name] = lang::deep_copy(heap, value);
}

std::vector<lang::Value> arguments(const lang::FunctionDef& fn, const store::CallRecord& call,
                                   store::Materializer& m) {
  std::vector<lang::Value> args;
  for (const auto& p : fn.params) {
    auto it = call.locals.find(p);
    if (it == call.locals.end())
      throw ReplayError("argument '" + p + "' of call " + std::to_string(call.id) + " was not recorded");
    store::Materialized v = m.get(it->second);
    if (v.skipped)
      throw ReplayError("argument '" + p + "' of call " + std::to_string(call.id) + " was not recorded (" + v.reason +
                        ")");
    args.push_back(v.value);
  }
  return args;
}

void check_hooks(const monitor::SpecSet& specs, const monitor::HookRegistry& hooks) {
  for (const auto& [name, spec] : specs) {
    for (const auto& h : spec.call_hooks)
      if (!hooks.has(h)) throw ReplayError("unknown hook '" + h + "' on '" + name + "'");
    for (const auto& h : spec.return_hooks)
      if (!hooks.has(h)) throw ReplayError("unknown hook '" + h + "' on '" + name + "'");
  }
}

// Calls of `session` that are `root` or nested below it.
std::vector<store::Id> with_descendants(const std::vector<store::CallRecord>& calls, store::Id root) {
  std::set<store::Id> in{root};
  std::vector<store::Id> out{root};
  for (const auto& c : calls)
    if (c.parent_call && in.count(*c.parent_call) && in.insert(c.id).second) out.push_back(c.id);
  return out;
}

// Shared tail of every replay: run `body` against a fresh interpreter that
// records into a new derived session.
template <typename Body>
ReplayResult run(store::Store& store, const Prepared& p, const store::Session& parent, std::int64_t offset,
                 const ReplayPlan& plan, const ReplayEnv& renv, const monitor::HookRegistry& hooks,
                 lang::Env& env, QueueMocks& mocks, std::vector<std::string> warnings, Body body) {
  monitor::SessionSetup setup;
  setup.label = plan.label.empty() ? "replay of " + std::to_string(parent.id) : plan.label;
  setup.kind = "replay";
  setup.parent_session = parent.id;
  setup.parent_offset = offset;
  setup.overrides = p.overrides;

  ReplayResult r;
  r.warnings = std::move(warnings);
  r.session = monitor::begin_session(store, p.sp.base, p.sp.specs, setup);

  lang::Interpreter interp(p.program, env);
  interp.set_output(renv.output);
  monitor::RecorderOptions ro;
  ro.serializers = renv.serializers;
  ro.mocks = &mocks;
  monitor::Recorder recorder(interp, store, r.session, p.sp.specs, hooks, std::move(ro));
  interp.set_sink(&recorder);

  std::string error;
  try {
    r.result = body(interp);
  } catch (const std::exception& e) {
    error = e.what();
  }
  r.stats = recorder.stats();
  r.stats.error = error;
  r.mocked_served = mocks.served;
  r.fell_through = mocks.fell_through;

  store::Session s = store::require_session(store, r.session);
  s.status = error.empty() ? "complete" : "failed";
  s.failed_at = error.empty() ? std::nullopt : r.stats.failed_at;
  s.error = error;
  store.update_session(s);
  store.flush();
  return r;
}

}  // namespace

ReplayResult replay_function(store::Store& store, store::Id call_id, const ReplayPlan& plan, const ReplayEnv& renv,
                             const monitor::HookRegistry& hooks) {
  auto lock = store.writer_lock();
  store::CallRecord call = store::require_call(store, call_id);
  store::Session parent = store::require_session(store, call.session);
  Prepared p = prepare(store, call.session, plan);
  check_hooks(p.sp.specs, hooks);
  const lang::FunctionDef& fn = p.program.function(call.function);

  lang::Env env = make_env(renv, p.sp.specs, p.program);
  lang::Heap heap;
  store::Materializer m(store, heap);
  std::vector<std::string> warnings;
  load_globals(env, call.globals, plan, renv, m, heap, warnings);
  std::vector<lang::Value> args = arguments(fn, call, m);

  MockSet set = build_mocks(store, with_descendants(store.calls(call.session), call.id), plan.mocked);
  warnings.insert(warnings.end(), set.warnings.begin(), set.warnings.end());
  QueueMocks mocks(store, std::move(set), plan.mocked);

  return run(store, p, parent, call.ordinal, plan, renv, hooks, env, mocks, std::move(warnings),
             [&](lang::Interpreter& interp) { return interp.call(call.function, args); });
}

ReplayResult replay_session(store::Store& store, store::Id session, const ReplayPlan& plan, const ReplayEnv& renv,
                            const monitor::HookRegistry& hooks) {
  auto lock = store.writer_lock();
  store::Session parent = store::require_session(store, session);
  Prepared p = prepare(store, session, plan);
  check_hooks(p.sp.specs, hooks);

  std::vector<store::CallRecord> calls = store.calls(session);
  std::vector<const store::CallRecord*> roots;
  for (const auto& c : calls)
    if (!c.parent_call) roots.push_back(&c);
  if (roots.empty()) throw ReplayError("session " + std::to_string(session) + " has no recorded calls");

  std::int64_t last = roots.back()->ordinal;
  std::int64_t start = plan.window ? plan.window->first : roots.front()->ordinal;
  std::int64_t end = plan.window ? plan.window->second : last;
  auto is_root = [&](std::int64_t ordinal) {
    return std::any_of(roots.begin(), roots.end(), [&](const auto* c) { return c->ordinal == ordinal; });
  };
  if (start < 0 || end > last)
    throw ReplayError("window [" + std::to_string(start) + ", " + std::to_string(end) + "] is outside session " +
                      std::to_string(session) + " (ordinals 0.." + std::to_string(last) + ")");
  if (!is_root(start) || !is_root(end))
    throw ReplayError("window ends must be top-level calls of session " + std::to_string(session));

  std::vector<const store::CallRecord*> selected;
  for (const auto* c : roots)
    if (c->ordinal >= start && c->ordinal <= end) selected.push_back(c);
  std::vector<store::Id> scope;
  for (const auto& c : calls) {
    bool after_end = false;
    for (const auto* r : roots)
      if (r->ordinal > end && c.ordinal >= r->ordinal) after_end = true;
    if (c.ordinal >= start && !after_end) scope.push_back(c.id);
  }

  lang::Env env = make_env(renv, p.sp.specs, p.program);
  lang::Heap heap;
  store::Materializer m(store, heap);
  std::vector<std::string> warnings;
  load_globals(env, selected.front()->globals, plan, renv, m, heap, warnings);

  MockSet set = build_mocks(store, scope, plan.mocked);
  warnings.insert(warnings.end(), set.warnings.begin(), set.warnings.end());
  QueueMocks mocks(store, std::move(set), plan.mocked);

  return run(store, p, parent, start, plan, renv, hooks, env, mocks, std::move(warnings),
             [&](lang::Interpreter& interp) {
               lang::Value result;
               for (const auto* c : selected) {
                 const lang::FunctionDef& fn = p.program.function(c->function);
                 result = interp.call(c->function, arguments(fn, *c, m));
               }
               return result;
             });
}

ReplayResult replay_from_snapshot(store::Store& store, store::Id snapshot_id, const ReplayPlan& plan,
                                  const ReplayEnv& renv, const monitor::HookRegistry& hooks) {
  auto lock = store.writer_lock();
  store::SnapshotRecord snap = store::require_snapshot(store, snapshot_id);
  store::CallRecord call = store::require_call(store, snap.call);
  store::Session parent = store::require_session(store, call.session);
  Prepared p = prepare(store, call.session, plan);
  check_hooks(p.sp.specs, hooks);

  const lang::FunctionDef& fn = p.program.function(call.function);
  store::CodeVersion recorded = store::require_code(store, call.code);
  int line = snap.line;
  if (recorded.source_text != fn.source_text) {
    compare::LineMapping map = compare::diff_code(recorded.source_text, fn.source_text);
    auto mapped = map.to_b(snap.line);
    if (!mapped)
      throw ReplayError("line " + std::to_string(snap.line) + " of '" + call.function +
                        "' has no counterpart in the new code (deleted or edited)");
    line = *mapped;
  }
  int entry = fn.absolute_line(line);
  const lang::FlatBody& flat = p.program.flat(call.function);
  if (!flat.is_statement_line(entry))
    throw ReplayError("line " + std::to_string(line) + " of '" + call.function + "' is not a statement boundary");
  if (!flat.is_resumable(entry))
    throw ReplayError("line " + std::to_string(line) + " of '" + call.function +
                      "' is inside a for loop and cannot be resumed");

  lang::Env env = make_env(renv, p.sp.specs, p.program);
  lang::Heap heap;
  store::Materializer m(store, heap);
  std::vector<std::string> warnings;
  load_globals(env, snap.globals, plan, renv, m, heap, warnings);
  lang::CallOptions options;
  options.entry_line = entry;
  for (const auto& [name, ref] : snap.locals) {
    store::Materialized v = m.get(ref);
    if (v.skipped) throw ReplayError("local '" + name + "' was not recorded (" + v.reason + ")");
    options.preset_locals[name] = v.value;
  }

  // Only events raised from this snapshot onwards are replayed.
  MockSet set = build_mocks(store, {call.id}, plan.mocked);
  std::set<store::Id> later;
  for (const auto& e : store.events(call.id))
    if (e.snapshot && *e.snapshot >= snap.id) later.insert(e.id);
  for (auto& [name, q] : set.queues)
    q.erase(std::remove_if(q.begin(), q.end(), [&](const MockEntry& e) { return !later.count(e.event); }), q.end());
  QueueMocks mocks(store, std::move(set), plan.mocked);

  return run(store, p, parent, call.ordinal, plan, renv, hooks, env, mocks, std::move(warnings),
             [&](lang::Interpreter& interp) { return interp.call(call.function, {}, options); });
}

ReplayResult execute(store::Store& store, const ReplayRequest& request, const monitor::HookRegistry& hooks) {
  auto need = [&](const std::optional<store::Id>& id, const char* what) {
    if (!id) throw ReplayError("replay mode '" + request.mode + "' needs a " + what + " id");
    return *id;
  };
  const std::string& mode = request.mode;
  if (mode == "function") return replay_function(store, need(request.call, "call"), request.plan, request.env, hooks);
  if (mode == "from_snapshot")
    return replay_from_snapshot(store, need(request.snapshot, "snapshot"), request.plan, request.env, hooks);
  if (mode != "full" && mode != "from_step" && mode != "window") throw ReplayError("unknown replay mode '" + mode + "'");

  store::Id session = need(request.session, "session");
  ReplayPlan plan = request.plan;
  if (mode == "full") {
    plan.window.reset();
  } else if (mode == "from_step") {
    if (!request.from) throw ReplayError("replay mode 'from_step' needs a start step");
    std::int64_t last = -1;
    for (const auto& c : store.calls(session))
      if (!c.parent_call) last = c.ordinal;
    plan.window = std::make_pair(*request.from, last);
  } else if (!plan.window) {
    throw ReplayError("replay mode 'window' needs a window");
  }
  return replay_session(store, session, plan, request.env, hooks);
}

}  // namespace spacetime::replay
