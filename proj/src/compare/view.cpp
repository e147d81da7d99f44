#include "spacetime/compare/view.hpp"

#include <sstream>

#include "spacetime/store/canonical.hpp"
#include "spacetime/store/queries.hpp"

namespace spacetime::compare {

namespace {

VariableView variable(const store::Store& store, const std::string& name, const std::string& scope, store::Id ref) {
  VariableView v;
  v.name = name;
  v.scope = scope;
  v.version = ref;
  auto row = store.version(ref);
  if (!row) throw store::NotFound("unknown object version " + std::to_string(ref));
  v.hash = row->content_hash;
  v.skipped = row->kind == store::kind::Skipped;
  v.rendered = store::render_version(store, ref);
  return v;
}

json var_json(const VariableView& v) {
  return json{{"name", v.name},         {"scope", v.scope},       {"version", v.version},
              {"hash", v.hash},         {"value", v.rendered},    {"skipped", v.skipped}};
}

}  // namespace

StateView view(const store::Store& store, StateRef ref) {
  StateView out;
  out.ref = ref;
  store::CallRecord call;
  const store::VarMap* locals;
  const store::VarMap* globals;
  std::optional<store::SnapshotRecord> snap;
  if (ref.kind == StateKind::Call) {
    call = store::require_call(store, ref.id);
    locals = &call.locals;
    globals = &call.globals;
  } else {
    snap = store::require_snapshot(store, ref.id);
    call = store::require_call(store, snap->call);
    locals = &snap->locals;
    globals = &snap->globals;
    out.line = snap->line;
    out.snapshot_ordinal = snap->ordinal;
  }
  out.session = call.session;
  out.call = call.id;
  out.function = call.function;
  out.ordinal = call.ordinal;
  out.granularity = call.granularity;
  out.error = call.error;
  for (const auto& [name, r] : *locals) out.variables.push_back(variable(store, name, "local", r));
  for (const auto& [name, r] : *globals)
    if (!locals->count(name)) out.variables.push_back(variable(store, name, "global", r));
  if (ref.kind == StateKind::Call && call.return_value)
    out.return_value = variable(store, "<return>", "return", *call.return_value);

  for (const auto& e : store.events(call.id)) {
    if (snap && e.snapshot != snap->id) continue;
    EventView ev;
    ev.callable = e.callable;
    ev.seq = e.seq;
    ev.snapshot = e.snapshot;
    for (std::size_t i = 0; i < e.args.size(); ++i)
      ev.args.push_back(variable(store, "arg" + std::to_string(i), "arg", e.args[i]));
    ev.return_value = variable(store, "<return>", "return", e.return_value);
    out.events.push_back(std::move(ev));
  }

  store::CodeVersion code = store::require_code(store, call.code);
  out.code = code.id;
  out.source = code.source_text;
  if (call.hook_meta) {
    out.hook_blob = call.hook_meta;
    if (auto b = store.blob(*call.hook_meta)) out.hook_kind = b->kind;
  }
  return out;
}

json to_json(const StateRef& ref) { return json{{"kind", to_string(ref.kind)}, {"id", ref.id}}; }

json to_json(const StateView& v) {
  json vars = json::array();
  for (const auto& x : v.variables) vars.push_back(var_json(x));
  json events = json::array();
  for (const auto& e : v.events) {
    json args = json::array();
    for (const auto& a : e.args) args.push_back(var_json(a));
    events.push_back(json{{"callable", e.callable},
                          {"seq", e.seq},
                          {"snapshot", e.snapshot ? json(*e.snapshot) : json()},
                          {"args", args},
                          {"return", var_json(e.return_value)}});
  }
  return json{{"state", to_json(v.ref)},
              {"session", v.session},
              {"call", v.call},
              {"function", v.function},
              {"ordinal", v.ordinal},
              {"granularity", v.granularity},
              {"line", v.line ? json(*v.line) : json()},
              {"snapshot_ordinal", v.snapshot_ordinal ? json(*v.snapshot_ordinal) : json()},
              {"variables", vars},
              {"return_value", v.return_value ? var_json(*v.return_value) : json()},
              {"events", events},
              {"code", v.code},
              {"source", v.source},
              {"hook_blob", v.hook_blob ? json(*v.hook_blob) : json()},
              {"hook_kind", v.hook_kind},
              {"error", v.error}};
}

json to_json(const LineMapping& m) {
  json pairs = json::array();
  for (const auto& [a, b] : m.pairs) pairs.push_back(json::array({a, b}));
  return json{{"pairs", pairs}, {"unmatched_a", m.unmatched_a}, {"unmatched_b", m.unmatched_b}};
}

json to_json(const StateDiff& d) {
  json changed = json::array();
  for (const auto& c : d.changed) changed.push_back(json{{"name", c.name}, {"hash_a", c.hash_a}, {"hash_b", c.hash_b}});
  json events = json::array();
  for (const auto& e : d.events)
    events.push_back(json{{"callable", e.callable},
                          {"count_a", e.count_a},
                          {"count_b", e.count_b},
                          {"first_divergence", e.first_divergence ? json(*e.first_divergence) : json()}});
  auto pair = [](const auto& p) { return p ? json::array({p->first, p->second}) : json(); };
  return json{{"added", d.added},
              {"removed", d.removed},
              {"changed", changed},
              {"events", events},
              {"code", json{{"equal", d.code_equal}, {"mapping", to_json(d.code)}}},
              {"hooks", d.hooks ? json{{"equal", false}, {"hash_a", d.hooks->first}, {"hash_b", d.hooks->second}}
                                : json{{"equal", true}}},
              {"return_value", pair(d.return_value)},
              {"lines", pair(d.lines)},
              {"empty", d.empty()}};
}

json to_json(const std::vector<AlignedPair>& pairs) {
  json out = json::array();
  for (const auto& p : pairs)
    out.push_back(json{{"a", p.a ? to_json(*p.a) : json()}, {"b", p.b ? to_json(*p.b) : json()}, {"gap", p.gap()}});
  return out;
}

std::string format_view(const StateView& v) {
  std::ostringstream out;
  out << to_string(v.ref.kind) << " " << v.ref.id << ": " << v.function << " (session " << v.session << ", call #"
      << v.ordinal << ", " << v.granularity << ")";
  if (v.line) out << " line " << *v.line;
  out << "\n";
  if (!v.error.empty()) out << "  error: " << v.error << "\n";
  out << "variables:\n";
  for (const auto& x : v.variables) out << "  " << x.name << " = " << x.rendered << "  [" << x.scope << "]\n";
  if (v.return_value) out << "return: " << v.return_value->rendered << "\n";
  out << "events: " << v.events.size() << "\n";
  for (const auto& e : v.events) {
    out << "  #" << e.seq << " " << e.callable << "(";
    for (std::size_t i = 0; i < e.args.size(); ++i) out << (i ? ", " : "") << e.args[i].rendered;
    out << ") -> " << e.return_value.rendered << "\n";
  }
  if (v.hook_blob) out << "hook blob: " << *v.hook_blob << " (" << v.hook_kind << ")\n";
  out << "code version " << v.code << ":\n";
  int n = 1;
  for (const auto& l : split_lines(v.source)) {
    out << (v.line && *v.line == n ? " >" : "  ") << n << "  " << l << "\n";
    ++n;
  }
  return out.str();
}

std::string format_diff(const StateDiff& d) {
  std::ostringstream out;
  if (d.empty()) return "no differences\n";
  for (const auto& c : d.changed) out << "changed " << c.name << "\n";
  for (const auto& n : d.added) out << "added   " << n << "\n";
  for (const auto& n : d.removed) out << "removed " << n << "\n";
  if (d.return_value) out << "return value differs\n";
  if (d.lines) out << "line " << d.lines->first << " vs " << d.lines->second << "\n";
  for (const auto& e : d.events) {
    out << "events  " << e.callable << ": " << e.count_a << " vs " << e.count_b;
    if (e.first_divergence) out << ", first divergence at #" << *e.first_divergence;
    out << "\n";
  }
  if (!d.code_equal) {
    out << "code differs:";
    for (int l : d.code.unmatched_a) out << " -" << l;
    for (int l : d.code.unmatched_b) out << " +" << l;
    out << "\n";
  }
  if (d.hooks) out << "hook blobs differ\n";
  return out.str();
}

}  // namespace spacetime::compare
