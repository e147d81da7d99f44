#include "spacetime/monitor/spec.hpp"

#include <json.hpp>

namespace spacetime::monitor {

using json = nlohmann::json;

namespace {

MonitorSpec from_pragma(const lang::FunctionDef& fn) {
  const lang::MonitorPragma& p = *fn.pragma;
  MonitorSpec s;
  s.function = fn.name;
  s.granularity = p.granularity;
  s.tracked.insert(p.track.begin(), p.track.end());
  s.call_hooks = p.call_hooks;
  s.return_hooks = p.return_hooks;
  s.include.insert(p.include.begin(), p.include.end());
  s.exclude.insert(p.exclude.begin(), p.exclude.end());
  return s;
}

std::vector<std::string> names(const json& j, const std::string& fn, const char* key) {
  if (!j.contains(key)) return {};
  const json& v = j[key];
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw SpecError("monitor config for '" + fn + "': '" + key + "' must be a list of names");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw SpecError("monitor config for '" + fn + "': '" + key + "' must be a list of names");
    out.push_back(e.get<std::string>());
  }
  return out;
}

void walk_expr(const lang::Expr& e, const lang::FlatBody& flat, GlobalRefs& out, std::vector<std::string>& callees) {
  switch (e.kind) {
    case lang::ExprKind::Name:
      if (!flat.locals.count(e.name)) out.names.insert(e.name);
      break;
    case lang::ExprKind::Call:
      out.names.insert(e.name);
      callees.push_back(e.name);
      if (e.name == "invoke") out.dynamic = true;
      break;
    default:
      break;
  }
  for (const auto& c : e.children) walk_expr(*c, flat, out, callees);
}

void walk_block(const std::vector<lang::StmtPtr>& body, const lang::FlatBody& flat, GlobalRefs& out,
                std::vector<std::string>& callees) {
  for (const auto& s : body) {
    if (s->expr) walk_expr(*s->expr, flat, out, callees);
    if (s->target) {
      // Assigning `x[i] = v` reads x; a bare name target is a write.
      if (s->target->kind != lang::ExprKind::Name) walk_expr(*s->target, flat, out, callees);
    }
    walk_block(s->body, flat, out, callees);
    walk_block(s->orelse, flat, out, callees);
  }
}

}  // namespace

SpecSet specs_from_pragmas(const lang::Program& program) {
  SpecSet out;
  for (const auto& name : program.function_names()) {
    const lang::FunctionDef& fn = program.function(name);
    if (fn.pragma) out.emplace(name, from_pragma(fn));
  }
  return out;
}

SpecSet specs_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SpecError(std::string("monitor config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SpecError("monitor config must be an object keyed by function name");
  SpecSet out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& fn = it.key();
    const json& o = it.value();
    if (!o.is_object()) throw SpecError("monitor config for '" + fn + "' must be an object");
    static const std::set<std::string> known = {"granularity", "track",        "call_hook", "call_hooks",
                                                "return_hook", "return_hooks", "include",   "exclude"};
    for (auto k = o.begin(); k != o.end(); ++k)
      if (!known.count(k.key())) throw SpecError("monitor config for '" + fn + "': unknown option '" + k.key() + "'");
    MonitorSpec s;
    s.function = fn;
    std::string g = o.value("granularity", "function");
    if (g == "line") s.granularity = lang::Granularity::Line;
    else if (g != "function") throw SpecError("monitor config for '" + fn + "': unknown granularity '" + g + "'");
    for (auto& n : names(o, fn, "track")) s.tracked.insert(n);
    for (auto& n : names(o, fn, "call_hook")) s.call_hooks.push_back(n);
    for (auto& n : names(o, fn, "call_hooks")) s.call_hooks.push_back(n);
    for (auto& n : names(o, fn, "return_hook")) s.return_hooks.push_back(n);
    for (auto& n : names(o, fn, "return_hooks")) s.return_hooks.push_back(n);
    for (auto& n : names(o, fn, "include")) s.include.insert(n);
    for (auto& n : names(o, fn, "exclude")) s.exclude.insert(n);
    out.emplace(fn, std::move(s));
  }
  return out;
}

std::string specs_to_json(const SpecSet& specs) {
  json j = json::object();
  for (const auto& [name, s] : specs) {
    j[name] = json{{"granularity", s.granularity == lang::Granularity::Line ? "line" : "function"},
                   {"track", s.tracked},
                   {"call_hooks", s.call_hooks},
                   {"return_hooks", s.return_hooks},
                   {"include", s.include},
                   {"exclude", s.exclude}};
  }
  return j.dump();
}

void validate(SpecSet& specs, const lang::Program& program, const lang::Env& env) {
  for (auto& [name, s] : specs) {
    if (!program.find(name)) throw SpecError("monitored function '" + name + "' is not defined");
    for (const auto& v : s.include)
      if (s.exclude.count(v)) throw SpecError("'" + v + "' is both included and excluded for '" + name + "'");
    for (const auto& t : s.tracked)
      if (!program.find(t) && !env.builtins.count(t))
        throw SpecError("tracked callable '" + t + "' of '" + name + "' is neither a function nor a builtin");
    s.warnings.clear();
    if (analyze_global_refs(program, name).dynamic)
      s.warnings.push_back("dynamic call through invoke: every global is captured");
  }
}

GlobalRefs analyze_global_refs(const lang::Program& program, const std::string& fn) {
  GlobalRefs out;
  std::set<std::string> visited;
  std::vector<std::string> todo{fn};
  program.function(fn);  // throws for unknown names
  while (!todo.empty()) {
    std::string name = todo.back();
    todo.pop_back();
    const lang::FunctionDef* def = program.find(name);
    if (!def || !visited.insert(name).second) continue;
    const lang::FlatBody& flat = program.flat(name);
    out.names.insert(flat.declared_globals.begin(), flat.declared_globals.end());
    std::vector<std::string> callees;
    walk_block(def->body, flat, out, callees);
    for (auto& c : callees) todo.push_back(std::move(c));
  }
  return out;
}

}  // namespace spacetime::monitor
