#include "spacetime/monitor/recorder.hpp"

#include <json.hpp>

#include "spacetime/lang/errors.hpp"
#include "spacetime/lang/parser.hpp"

namespace spacetime::monitor {

using json = nlohmann::json;

Recorder::Recorder(lang::Interpreter& interpreter, store::Store& store, store::Id session, const SpecSet& specs,
                   const HookRegistry& hooks, RecorderOptions options)
    : interp_(interpreter),
      store_(store),
      session_(session),
      specs_(specs),
      hooks_(hooks),
      mocks_(options.mocks),
      capturer_(store, session, std::move(options.serializers)) {}

lang::Observe Recorder::observe(const lang::FunctionDef& fn) {
  auto it = specs_.find(fn.name);
  if (it == specs_.end()) return lang::Observe::None;
  return it->second.granularity == lang::Granularity::Line ? lang::Observe::Line : lang::Observe::Function;
}

std::vector<std::string> Recorder::captured_globals(const std::string& fn) {
  auto it = globals_.find(fn);
  if (it != globals_.end()) return it->second;
  const MonitorSpec& spec = specs_.at(fn);
  GlobalRefs refs = analyze_global_refs(interp_.program(), fn);
  std::vector<std::string> out;
  if (refs.dynamic) {
    for (const auto& [name, _] : interp_.env().globals) refs.names.insert(name);
  }
  for (const auto& name : refs.names)
    if (spec.captures(name) && !interp_.program().find(name) && !interp_.env().builtins.count(name))
      out.push_back(name);
  return globals_.emplace(fn, std::move(out)).first->second;
}

store::Id Recorder::code_of(const lang::FunctionDef& fn) {
  auto it = code_ids_.find(&fn);
  if (it != code_ids_.end()) return it->second;
  store::Id id = store_.intern_code(fn.name, fn.source_text, relative_line_map(interp_.program(), fn));
  code_ids_.emplace(&fn, id);
  return id;
}

store::VarMap Recorder::capture_locals(const lang::Frame& frame, const MonitorSpec& spec) {
  store::VarMap out;
  for (const auto& [name, value] : frame.locals)
    if (spec.captures(name)) out.emplace(name, capturer_.capture(value));
  return out;
}

store::VarMap Recorder::capture_globals(const Active& a) {
  store::VarMap out;
  const auto& globals = interp_.env().globals;
  for (const auto& name : *a.globals) {
    auto it = globals.find(name);
    if (it != globals.end()) out.emplace(name, capturer_.capture(it->second));
  }
  return out;
}

void Recorder::run_hooks(Active& a, const std::vector<std::string>& names, std::span<const lang::Value> args,
                         int line) {
  for (const auto& name : names) {
    try {
      a.hook_outputs.push_back(hooks_.get(name)(args));
    } catch (const std::exception& e) {
      throw HookError("hook '" + name + "' failed in " + a.record.function + " at line " + std::to_string(line) +
                      ": " + e.what());
    }
  }
}

void Recorder::on_call(const lang::Frame& frame) {
  const lang::FunctionDef& fn = *frame.function;
  const MonitorSpec& spec = specs_.at(fn.name);

  Active a;
  a.spec = &spec;
  a.record.id = store_.reserve_call_id();
  a.record.session = session_;
  a.record.ordinal = next_ordinal_++;
  a.record.function = fn.name;
  a.record.code = code_of(fn);
  if (!stack_.empty()) a.record.parent_call = stack_.back().record.id;
  a.record.granularity = spec.granularity == lang::Granularity::Line ? "line" : "function";
  captured_globals(fn.name);
  a.globals = &globals_.at(fn.name);

  capturer_.set_current_call(a.record.id);
  a.record.locals = capture_locals(frame, spec);
  a.record.globals = capture_globals(a);
  for (const auto& t : spec.tracked) ++active_tracked_[t];
  stack_.push_back(std::move(a));

  if (!spec.call_hooks.empty()) {
    std::vector<lang::Value> args;
    for (const auto& p : fn.params) {
      auto it = frame.locals.find(p);
      args.push_back(it == frame.locals.end() ? lang::Value() : it->second);
    }
    run_hooks(stack_.back(), spec.call_hooks, args, fn.relative_line(fn.def_line));
  }
}

void Recorder::on_line(const lang::Frame& frame, int line) {
  Active& a = stack_.back();
  capturer_.set_current_call(a.record.id);
  store::SnapshotRecord s;
  s.id = store_.reserve_snapshot_id();
  s.call = a.record.id;
  s.ordinal = static_cast<std::int64_t>(a.snapshots.size());
  s.line = frame.function->relative_line(line);
  s.locals = capture_locals(frame, *a.spec);
  s.globals = capture_globals(a);
  a.snapshots.push_back(std::move(s));
}

void Recorder::on_return(const lang::Frame& frame, const lang::Value& result) {
  Active& a = stack_.back();
  capturer_.set_current_call(a.record.id);
  a.record.return_value = capturer_.capture(result);
  if (!a.spec->return_hooks.empty()) {
    try {
      run_hooks(a, a.spec->return_hooks, std::span<const lang::Value>(&result, 1),
                frame.function->relative_line(frame.line));
    } catch (const HookError& e) {
      on_unwind(frame, e.what());
      throw;
    }
  }
  Active done = std::move(stack_.back());
  stack_.pop_back();
  finish(std::move(done));
}

void Recorder::on_unwind(const lang::Frame& frame, const std::string& error) {
  (void)frame;
  Active done = std::move(stack_.back());
  stack_.pop_back();
  done.record.error = error;
  if (!stats_.failed_at) {
    stats_.failed_at = done.record.ordinal;
    stats_.error = error;
  }
  finish(std::move(done));
}

void Recorder::finish(Active a) {
  for (const auto& t : a.spec->tracked)
    if (--active_tracked_[t] == 0) active_tracked_.erase(t);

  if (a.hook_outputs.size() == 1) {
    a.record.hook_meta = store_.intern_blob(a.hook_outputs[0].kind, a.hook_outputs[0].bytes);
  } else if (a.hook_outputs.size() > 1) {
    json bundle = json::array();
    const MonitorSpec& spec = *a.spec;
    std::vector<std::string> names = spec.call_hooks;
    names.insert(names.end(), spec.return_hooks.begin(), spec.return_hooks.end());
    for (std::size_t i = 0; i < a.hook_outputs.size(); ++i)
      bundle.push_back({{"hook", names[i]}, {"kind", a.hook_outputs[i].kind}, {"data", a.hook_outputs[i].bytes}});
    a.record.hook_meta = store_.intern_blob("bundle", bundle.dump(-1, ' ', false, json::error_handler_t::replace));
  }

  stats_.calls += 1;
  stats_.snapshots += a.snapshots.size();
  stats_.events += a.events.size();
  pending_.calls.push_back(std::move(a.record));
  for (auto& s : a.snapshots) pending_.snapshots.push_back(std::move(s));
  for (auto& e : a.events) pending_.events.push_back(std::move(e));
  if (stack_.empty()) {
    store_.commit(std::move(pending_));
    pending_ = {};
  }
  capturer_.set_current_call(stack_.empty() ? std::nullopt : std::optional<store::Id>(stack_.back().record.id));
}

bool Recorder::intercepts(const std::string& callable) {
  if (stack_.empty()) return false;
  if (active_tracked_.count(callable)) return true;
  return mocks_ && mocks_->mocks(callable);
}

lang::Value Recorder::on_intercept(const std::string& callable, std::span<const lang::Value> args,
                                   const std::function<lang::Value()>& live) {
  Active& owner = stack_.back();
  store::EventRecord e;
  e.id = store_.reserve_event_id();
  e.call = owner.record.id;
  if (!owner.snapshots.empty()) e.snapshot = owner.snapshots.back().id;
  e.callable = callable;
  e.seq = static_cast<std::int64_t>(owner.events.size());
  capturer_.set_current_call(owner.record.id);
  for (const auto& a : args) e.args.push_back(capturer_.capture(a));
  // Reserve the seq slot before running: a tracked guest function may
  // itself raise events.
  std::size_t slot = owner.events.size();
  owner.events.push_back(e);
  store::Id call_id = owner.record.id;

  // `owner` may be invalidated by nested pushes; look it up again.
  auto settle = [&](store::Id ret) {
    for (auto& s : stack_)
      if (s.record.id == call_id) s.events[slot].return_value = ret;
  };

  std::optional<lang::Value> value;
  try {
    if (mocks_ && mocks_->mocks(callable)) value = mocks_->next(callable, interp_.heap());
    if (!value) value = live();
  } catch (const std::exception& e) {
    capturer_.set_current_call(call_id);
    settle(capturer_.skipped(std::string("raised: ") + e.what()));
    throw;
  }
  capturer_.set_current_call(call_id);
  settle(capturer_.capture(*value));
  return *value;
}

RecordStats Recorder::stats() const {
  RecordStats s = stats_;
  s.skipped = capturer_.skipped_count();
  return s;
}

// ---- sessions ---------------------------------------------------------------

std::string program_source(const lang::Program& program) {
  std::string out;
  for (const auto& unit : program.units()) {
    out += unit->source;
    if (!out.empty() && out.back() != '\n') out += '\n';
  }
  return out;
}

std::vector<int> relative_line_map(const lang::Program& program, const lang::FunctionDef& fn) {
  std::vector<int> out;
  for (const auto& [line, _] : program.flat(fn.name).line_index) out.push_back(fn.relative_line(line));
  return out;
}

lang::Program apply_override(const lang::Program& program, const std::string& function, const std::string& source) {
  const lang::FunctionDef* current = program.find(function);
  if (!current) throw lang::RuntimeError("cannot override unknown function '" + function + "'");
  std::shared_ptr<lang::FunctionDef> fn = lang::parse_function(source, "<override of " + function + ">");
  if (fn->name != function)
    throw lang::RuntimeError("override for '" + function + "' defines '" + fn->name + "' instead");
  if (fn->params.size() != current->params.size())
    throw lang::RuntimeError("override for '" + function + "' changes arity from " +
                             std::to_string(current->params.size()) + " to " + std::to_string(fn->params.size()));
  return program.with_override(std::move(fn));
}

store::Id begin_session(store::Store& store, const lang::Program& base, const SpecSet& specs,
                        const SessionSetup& setup) {
  lang::Program effective = base;
  for (const auto& [fn, src] : setup.overrides) effective = apply_override(effective, fn, src);

  store::Session s;
  s.label = setup.label;
  s.kind = setup.kind;
  s.program_hash = effective.hash();
  s.parent_session = setup.parent_session;
  s.parent_offset = setup.parent_offset;
  s.program_code = store.intern_code("<program>", program_source(base), {});
  json config{{"specs", json::parse(specs_to_json(specs))}, {"overrides", setup.overrides}};
  s.monitor_config = config.dump();
  return store.begin_session(s);
}

SessionProgram load_session_program(const store::Store& store, store::Id session) {
  auto s = store.session(session);
  if (!s) throw store::StoreError("unknown session " + std::to_string(session));
  if (!s->program_code) throw store::StoreError("session " + std::to_string(session) + " has no stored program");
  auto code = store.code(*s->program_code);
  if (!code) throw store::StoreError("session " + std::to_string(session) + " references missing program code");

  SessionProgram out;
  out.base = lang::load_program(code->source_text, "<session " + std::to_string(session) + ">");
  json config = json::parse(s->monitor_config.empty() ? "{}" : s->monitor_config);
  out.specs = specs_from_json(config.value("specs", json::object()).dump());
  out.overrides = config.value("overrides", std::map<std::string, std::string>{});
  out.program = out.base;
  for (const auto& [fn, src] : out.overrides) out.program = apply_override(out.program, fn, src);
  return out;
}

// ---- whole runs ---------------------------------------------------------------

RunResult run_monitored(const lang::Program& program, lang::Env& env, SpecSet specs, const HookRegistry& hooks,
                        store::Store& store, const RunOptions& options) {
  validate(specs, program, env);
  for (const auto& [name, spec] : specs) {
    for (const auto& h : spec.call_hooks)
      if (!hooks.has(h)) throw SpecError("unknown hook '" + h + "' on '" + name + "'");
    for (const auto& h : spec.return_hooks)
      if (!hooks.has(h)) throw SpecError("unknown hook '" + h + "' on '" + name + "'");
  }
  if (!options.entry.empty()) program.function(options.entry);

  auto lock = store.writer_lock();
  SessionSetup setup;
  setup.label = options.label;
  RunResult r;
  r.session = begin_session(store, program, specs, setup);

  lang::Interpreter interp(program, env, options.mode);
  interp.set_output(options.output);
  RecorderOptions ro;
  ro.serializers = options.serializers;
  Recorder recorder(interp, store, r.session, specs, hooks, std::move(ro));
  interp.set_sink(&recorder);

  std::string error;
  try {
    if (options.entry.empty()) interp.run_top_level();
    else r.result = interp.call(options.entry, options.args);
  } catch (const std::exception& e) {
    error = e.what();
  }
  r.stats = recorder.stats();
  r.stats.error = error;

  store::Session s = *store.session(r.session);
  s.status = error.empty() ? "complete" : "failed";
  s.failed_at = error.empty() ? std::nullopt : r.stats.failed_at;
  s.error = error;
  store.update_session(s);
  store.flush();
  return r;
}

}  // namespace spacetime::monitor
